//! Augmented Dickey–Fuller and KPSS stationarity tests.
//!
//! Critical values are asymptotic table entries with a first-order
//! finite-sample correction in `1/T`:
//!
//! - ADF: MacKinnon (2010) response-surface coefficients, constant and
//!   `1/T` terms only;
//! - KPSS: asymptotic quantiles from Kwiatkowski et al. (1992).

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::statcore::{ols_fit_with, DesignMatrix};

/// Deterministic terms: a constant (ADF) / level (KPSS), or also a linear trend.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Deterministic {
    #[default]
    Constant,
    ConstantTrend,
}

impl Deterministic {
    pub fn as_str(self) -> &'static str {
        match self {
            Deterministic::Constant => "constant",
            Deterministic::ConstantTrend => "trend",
        }
    }
}

impl std::str::FromStr for Deterministic {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "constant" | "level" => Ok(Deterministic::Constant),
            "trend" => Ok(Deterministic::ConstantTrend),
            _ => Err(Error::Validation(format!(
                "unknown deterministic variant `{s}` (constant or trend)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum UnitRootTest {
    Adf,
    Kpss,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CriticalValues {
    pub pct1: f64,
    pub pct5: f64,
    pub pct10: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TestResult {
    pub test: UnitRootTest,
    pub statistic: f64,
    pub critical: CriticalValues,
    /// Null rejected at 5%: left tail for ADF, right tail for KPSS.
    pub reject_5pct: bool,
    /// ADF augmentation lags, or KPSS Bartlett bandwidth.
    pub lags: usize,
    pub variant: Deterministic,
    pub nobs: usize,
}

impl TestResult {
    pub fn rejects_at(&self, critical: f64) -> bool {
        match self.test {
            UnitRootTest::Adf => self.statistic < critical,
            UnitRootTest::Kpss => self.statistic > critical,
        }
    }
}

const MIN_OBS: usize = 25;

// (asymptotic, 1/T coefficient) for 1%, 5%, 10%.
const ADF_CONSTANT: [(f64, f64); 3] = [(-3.43035, -6.5393), (-2.86154, -2.8903), (-2.56677, -1.5384)];
const ADF_TREND: [(f64, f64); 3] = [(-3.95877, -9.0531), (-3.41049, -4.3904), (-3.12705, -2.5856)];
const KPSS_LEVEL: [f64; 3] = [0.739, 0.463, 0.347];
const KPSS_TREND: [f64; 3] = [0.216, 0.146, 0.119];

pub fn adf_critical_values(variant: Deterministic, nobs: usize) -> CriticalValues {
    let table = match variant {
        Deterministic::Constant => ADF_CONSTANT,
        Deterministic::ConstantTrend => ADF_TREND,
    };
    let cv = |(a, b): (f64, f64)| a + b / nobs as f64;
    CriticalValues {
        pct1: cv(table[0]),
        pct5: cv(table[1]),
        pct10: cv(table[2]),
    }
}

pub fn kpss_critical_values(variant: Deterministic) -> CriticalValues {
    let t = match variant {
        Deterministic::Constant => KPSS_LEVEL,
        Deterministic::ConstantTrend => KPSS_TREND,
    };
    CriticalValues {
        pct1: t[0],
        pct5: t[1],
        pct10: t[2],
    }
}

/// `floor(12 (T/100)^(1/4))`.
pub fn adf_default_max_lag(n: usize) -> usize {
    (12.0 * (n as f64 / 100.0).powf(0.25)).floor() as usize
}

/// `floor(4 (T/100)^(1/4))`.
pub fn kpss_default_bandwidth(n: usize) -> usize {
    (4.0 * (n as f64 / 100.0).powf(0.25)).floor() as usize
}

fn is_constant(series: &[f64]) -> bool {
    series.windows(2).all(|w| w[0] == w[1])
}

/// Dickey–Fuller regression of `dy[j]` on `y[j]`, `p` lagged differences and
/// deterministic terms, over rows `j = start..dy.len()`.
fn df_design(y: &[f64], dy: &[f64], p: usize, start: usize, variant: Deterministic) -> Result<DesignMatrix> {
    let rows = dy.len() - start;
    let k = 2 + p + usize::from(variant == Deterministic::ConstantTrend);
    let mut x = DMatrix::zeros(rows, k);
    let mut resp = DVector::zeros(rows);
    for (r, j) in (start..dy.len()).enumerate() {
        resp[r] = dy[j];
        x[(r, 0)] = y[j];
        x[(r, 1)] = 1.0;
        for i in 1..=p {
            x[(r, 1 + i)] = dy[j - i];
        }
        if variant == Deterministic::ConstantTrend {
            x[(r, k - 1)] = (j + 1) as f64;
        }
    }
    DesignMatrix::from_matrix(x, resp)
}

/// ADF test with AIC lag selection over `0..=max_lag` on a common sample.
pub fn adf_test(series: &[f64], max_lag: Option<usize>, variant: Deterministic) -> Result<TestResult> {
    let n = series.len();
    if series.iter().any(|v| !v.is_finite()) {
        return Err(Error::Validation("ADF input contains non-finite values".into()));
    }
    if is_constant(series) {
        return Err(Error::Validation("ADF on a constant series".into()));
    }
    let max_lag = max_lag.unwrap_or_else(|| adf_default_max_lag(n));
    if n < max_lag + 2 || n - 1 - max_lag < MIN_OBS {
        return Err(Error::Insufficient(format!(
            "ADF with max lag {max_lag} needs at least {} points, got {n}",
            MIN_OBS + max_lag + 1
        )));
    }
    let dy: Vec<f64> = series.windows(2).map(|w| w[1] - w[0]).collect();

    let mut best: Option<(f64, usize)> = None;
    for p in 0..=max_lag {
        let design = df_design(series, &dy, p, max_lag, variant)?;
        let fit = ols_fit_with(&design, Some(0))?;
        let nobs = design.nrows() as f64;
        let aic = nobs * (fit.rss / nobs).ln() + 2.0 * design.ncols() as f64;
        if best.is_none_or(|(b, _)| aic < b) {
            best = Some((aic, p));
        }
    }
    let (_, lags) = best.expect("at least lag 0 evaluated");
    let design = df_design(series, &dy, lags, lags, variant)?;
    let fit = ols_fit_with(&design, Some(0))?;
    let statistic = fit.coefficients[0] / fit.se_classical(0);
    let nobs = design.nrows();
    let critical = adf_critical_values(variant, nobs);
    Ok(TestResult {
        test: UnitRootTest::Adf,
        statistic,
        critical,
        reject_5pct: statistic < critical.pct5,
        lags,
        variant,
        nobs,
    })
}

/// KPSS test: partial sums of demeaned (or detrended) data over a Bartlett
/// long-run variance.
pub fn kpss_test(series: &[f64], bandwidth: Option<usize>, variant: Deterministic) -> Result<TestResult> {
    let n = series.len();
    if n < MIN_OBS {
        return Err(Error::Insufficient(format!(
            "KPSS needs at least {MIN_OBS} points, got {n}"
        )));
    }
    if series.iter().any(|v| !v.is_finite()) {
        return Err(Error::Validation("KPSS input contains non-finite values".into()));
    }
    let bandwidth = bandwidth.unwrap_or_else(|| kpss_default_bandwidth(n));
    if bandwidth >= n {
        return Err(Error::Validation(format!(
            "KPSS bandwidth {bandwidth} must be below T = {n}"
        )));
    }
    let resid: Vec<f64> = match variant {
        Deterministic::Constant => {
            let mean = series.iter().sum::<f64>() / n as f64;
            series.iter().map(|v| v - mean).collect()
        }
        Deterministic::ConstantTrend => {
            let x = DMatrix::from_fn(n, 2, |i, j| if j == 0 { 1.0 } else { i as f64 });
            let design = DesignMatrix::from_matrix(x, DVector::from_column_slice(series))?;
            ols_fit_with(&design, Some(0))?.residuals.as_slice().to_vec()
        }
    };
    let nf = n as f64;
    let gamma = |l: usize| resid[l..].iter().zip(&resid[..n - l]).map(|(a, b)| a * b).sum::<f64>() / nf;
    let mut lrv = gamma(0);
    for l in 1..=bandwidth {
        lrv += 2.0 * (1.0 - l as f64 / (bandwidth as f64 + 1.0)) * gamma(l);
    }
    if !(lrv > 0.0) {
        return Err(Error::Numerical("KPSS long-run variance is zero".into()));
    }
    let mut partial = 0.0;
    let mut sum_sq = 0.0;
    for e in &resid {
        partial += e;
        sum_sq += partial * partial;
    }
    let statistic = sum_sq / (nf * nf * lrv);
    let critical = kpss_critical_values(variant);
    Ok(TestResult {
        test: UnitRootTest::Kpss,
        statistic,
        critical,
        reject_5pct: statistic > critical.pct5,
        lags: bandwidth,
        variant,
        nobs: n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn noise(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = crate::rng::rng(seed);
        (0..n).map(|_| rng.sample(StandardNormal)).collect()
    }

    #[test]
    fn short_and_constant_series_rejected() {
        assert!(adf_test(&[1.0; 100], None, Deterministic::Constant).is_err());
        assert!(adf_test(&noise(20, 1), None, Deterministic::Constant).is_err());
        assert!(kpss_test(&noise(20, 1), None, Deterministic::Constant).is_err());
        assert!(kpss_test(&[3.0; 50], None, Deterministic::Constant).is_err());
    }

    #[test]
    fn critical_values_tails() {
        let cv = adf_critical_values(Deterministic::Constant, 1_000_000);
        assert!((cv.pct5 + 2.86154).abs() < 1e-4);
        assert_eq!(kpss_critical_values(Deterministic::Constant).pct5, 0.463);
        let r = kpss_test(&noise(200, 2), None, Deterministic::Constant).unwrap();
        assert_eq!(r.reject_5pct, r.statistic > 0.463);
    }

    #[test]
    fn adf_scale_invariance() {
        let mut y = 0.0;
        let walk: Vec<f64> = noise(500, 3)
            .into_iter()
            .map(|e| {
                y += e;
                y
            })
            .collect();
        let scaled: Vec<f64> = walk.iter().map(|v| v * 1000.0).collect();
        let a = adf_test(&walk, None, Deterministic::Constant).unwrap();
        let b = adf_test(&scaled, None, Deterministic::Constant).unwrap();
        assert_eq!(a.lags, b.lags);
        assert!((a.statistic - b.statistic).abs() <= 1e-9 * a.statistic.abs());
    }

    #[test]
    fn kpss_trend_invariant_to_added_trend() {
        let x = noise(300, 4);
        let trended: Vec<f64> = x.iter().enumerate().map(|(i, v)| v + 5.0 - 0.3 * i as f64).collect();
        let a = kpss_test(&x, None, Deterministic::ConstantTrend).unwrap();
        let b = kpss_test(&trended, None, Deterministic::ConstantTrend).unwrap();
        assert!((a.statistic - b.statistic).abs() < 1e-9 * a.statistic);
    }
}
