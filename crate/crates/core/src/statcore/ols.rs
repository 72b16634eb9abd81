use std::collections::HashSet;
use std::fmt;

use chrono::NaiveDate;
use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::linalg::PivotedQr;
use crate::error::{Error, Result};

/// Relative pivot tolerance used to declare a design rank deficient.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// Regressors, response and the calendar day of each row.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    names: Vec<String>,
    x: DMatrix<f64>,
    y: DVector<f64>,
    dates: Vec<NaiveDate>,
}

impl DesignMatrix {
    pub fn new(names: Vec<String>, x: DMatrix<f64>, y: DVector<f64>, dates: Vec<NaiveDate>) -> Result<Self> {
        let (t, k) = x.shape();
        if names.len() != k {
            return Err(Error::Validation(format!("{} names for {k} columns", names.len())));
        }
        let mut seen = HashSet::new();
        if let Some(dup) = names.iter().find(|n| !seen.insert(n.as_str())) {
            return Err(Error::Validation(format!("duplicate column name `{dup}`")));
        }
        if y.len() != t || (!dates.is_empty() && dates.len() != t) {
            return Err(Error::Validation("row count mismatch between X, y and dates".into()));
        }
        if t <= k {
            return Err(Error::Insufficient(format!("{t} rows for {k} columns")));
        }
        if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Validation("design contains non-finite values".into()));
        }
        Ok(DesignMatrix { names, x, y, dates })
    }

    /// Unnamed design; columns are called `x0`, `x1`, ...
    pub fn from_matrix(x: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        let names = (0..x.ncols()).map(|j| format!("x{j}")).collect();
        Self::new(names, x, y, Vec::new())
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn nrows(&self) -> usize {
        self.x.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.x.ncols()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Same regressors with a replaced response.
    pub fn with_response(&self, y: DVector<f64>) -> Result<Self> {
        Self::new(self.names.clone(), self.x.clone(), y, self.dates.clone())
    }

    /// Subset of rows, in the given order (repeats allowed).
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        let x = self.x.select_rows(rows);
        let y = DVector::from_iterator(rows.len(), rows.iter().map(|&i| self.y[i]));
        let dates = if self.dates.is_empty() {
            Vec::new()
        } else {
            rows.iter().map(|&i| self.dates[i]).collect()
        };
        Self::new(self.names.clone(), x, y, dates)
    }
}

/// Two-sided significance marker.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum Stars {
    None,
    Five,
    One,
}

impl Stars {
    pub fn from_p(p: f64) -> Self {
        if p <= 0.01 {
            Stars::One
        } else if p <= 0.05 {
            Stars::Five
        } else {
            Stars::None
        }
    }
}

impl fmt::Display for Stars {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stars::None => "",
            Stars::Five => "*",
            Stars::One => "**",
        })
    }
}

/// Two-sided p-value under the normal approximation.
pub fn normal_p_value(z: f64) -> f64 {
    statrs::function::erf::erfc(z.abs() / std::f64::consts::SQRT_2)
}

/// `floor(4 (T/100)^(2/9))`.
pub fn default_bandwidth(nobs: usize) -> usize {
    (4.0 * (nobs as f64 / 100.0).powf(2.0 / 9.0)).floor() as usize
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoefficientRow {
    pub name: String,
    pub estimate: f64,
    pub se_hac: f64,
    pub se_classical: f64,
    pub z: f64,
    pub p_value: f64,
    pub stars: Stars,
}

/// Result of a least-squares fit with classical and HAC covariances.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelFit {
    pub names: Vec<String>,
    pub coefficients: DVector<f64>,
    pub vcov_hac: DMatrix<f64>,
    pub vcov_classical: DMatrix<f64>,
    /// `(X^T X)^{-1}`.
    pub xtx_inv: DMatrix<f64>,
    pub residuals: DVector<f64>,
    pub rss: f64,
    pub sigma2: f64,
    /// Adjusted R-squared in percent.
    pub r2_adj: f64,
    pub nobs: usize,
    pub bandwidth: usize,
}

impl ModelFit {
    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn coef(&self, name: &str) -> Option<f64> {
        self.index_of(name).map(|i| self.coefficients[i])
    }

    pub fn se_hac(&self, i: usize) -> f64 {
        self.vcov_hac[(i, i)].sqrt()
    }

    pub fn se_classical(&self, i: usize) -> f64 {
        self.vcov_classical[(i, i)].sqrt()
    }

    pub fn z_hac(&self, i: usize) -> f64 {
        self.coefficients[i] / self.se_hac(i)
    }

    pub fn p_value(&self, i: usize) -> f64 {
        normal_p_value(self.z_hac(i))
    }

    /// Stars from HAC standard errors.
    pub fn stars(&self, i: usize) -> Stars {
        Stars::from_p(self.p_value(i))
    }

    pub fn rows(&self) -> Vec<CoefficientRow> {
        (0..self.names.len())
            .map(|i| CoefficientRow {
                name: self.names[i].clone(),
                estimate: self.coefficients[i],
                se_hac: self.se_hac(i),
                se_classical: self.se_classical(i),
                z: self.z_hac(i),
                p_value: self.p_value(i),
                stars: self.stars(i),
            })
            .collect()
    }
}

pub fn ols_fit(design: &DesignMatrix) -> Result<ModelFit> {
    ols_fit_with(design, None)
}

/// OLS with a chosen HAC bandwidth (`None` = automatic rule).
pub fn ols_fit_with(design: &DesignMatrix, bandwidth: Option<usize>) -> Result<ModelFit> {
    let x = design.x();
    let y = design.y();
    let (t, k) = x.shape();
    let qr = PivotedQr::new(x, RANK_TOLERANCE);
    if !qr.is_full_rank() {
        let names = qr
            .dependent_columns()
            .into_iter()
            .map(|j| design.names()[j].clone())
            .collect();
        return Err(Error::RankDeficient(names));
    }
    let coefficients = qr.solve(y);
    let residuals = y - x * &coefficients;
    let rss = residuals.norm_squared();
    let sigma2 = rss / (t - k) as f64;
    let xtx_inv = qr.xtx_inverse();
    let vcov_classical = &xtx_inv * sigma2;
    let mean = y.mean();
    let tss: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let r2_adj = if tss > 0.0 {
        100.0 * (1.0 - (rss / (t - k) as f64) / (tss / (t - 1) as f64))
    } else {
        f64::NAN
    };
    let bandwidth = bandwidth.unwrap_or_else(|| default_bandwidth(t));
    let vcov_hac = hac_sandwich(x, &residuals, &xtx_inv, bandwidth)?;
    Ok(ModelFit {
        names: design.names().to_vec(),
        coefficients,
        vcov_hac,
        vcov_classical,
        xtx_inv,
        residuals,
        rss,
        sigma2,
        r2_adj,
        nobs: t,
        bandwidth,
    })
}

/// Newey–West covariance of `fit` with Bartlett weights `1 - l/(L+1)`.
pub fn newey_west(fit: &ModelFit, design: &DesignMatrix, bandwidth: Option<usize>) -> Result<DMatrix<f64>> {
    let bandwidth = bandwidth.unwrap_or_else(|| default_bandwidth(design.nrows()));
    hac_sandwich(design.x(), &fit.residuals, &fit.xtx_inv, bandwidth)
}

fn hac_sandwich(
    x: &DMatrix<f64>,
    residuals: &DVector<f64>,
    bread: &DMatrix<f64>,
    bandwidth: usize,
) -> Result<DMatrix<f64>> {
    let (t, k) = x.shape();
    if bandwidth >= t {
        return Err(Error::Validation(format!(
            "HAC bandwidth {bandwidth} must be below T = {t}"
        )));
    }
    let mut scores = x.clone();
    for mut col in scores.column_iter_mut() {
        col.component_mul_assign(residuals);
    }
    let mut meat = scores.transpose() * &scores;
    for lag in 1..=bandwidth {
        let w = 1.0 - lag as f64 / (bandwidth as f64 + 1.0);
        let lead = scores.rows(lag, t - lag);
        let lagged = scores.rows(0, t - lag);
        let gamma = lead.transpose() * lagged;
        meat += (&gamma + gamma.transpose()) * w;
    }
    debug_assert_eq!(meat.shape(), (k, k));
    let v = bread * meat * bread;
    Ok((&v + v.transpose()) * 0.5)
}
