//! Pass-through regression of the log-differenced spread ratio on its own
//! calendar lags, the log-differenced carbon cost, a Phase-4 interaction and
//! log demand, plus the phase comparison and robustness variants.

use std::collections::{BTreeMap, HashMap};

use chrono::{Days, NaiveDate};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::construct::{DailySeries, PriceBasis};
use crate::error::{Error, Result};
use crate::ingest::default_phase4_start;
use crate::statcore::{normal_p_value, ols_fit, DesignMatrix, ModelFit, Stars};

pub const DEFAULT_LAGS: [usize; 8] = [1, 2, 3, 4, 5, 7, 14, 21];

/// Extra valid rows required beyond the column count.
pub const MIN_SPARE_ROWS: usize = 30;

/// Specification of the pass-through regression.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CptrSpec {
    pub lags: Vec<usize>,
    /// Highest power of log demand, 1 to 3.
    pub demand_order: u8,
    pub price_basis: PriceBasis,
    pub phase4_start: NaiveDate,
    /// First date usable as a response row. Lags may reach earlier.
    pub sample_start: Option<NaiveDate>,
    /// Last date usable as a response row.
    pub sample_end: Option<NaiveDate>,
    pub interaction: bool,
}

impl Default for CptrSpec {
    fn default() -> Self {
        CptrSpec {
            lags: DEFAULT_LAGS.to_vec(),
            demand_order: 1,
            price_basis: PriceBasis::VolumeWeighted,
            phase4_start: default_phase4_start(),
            sample_start: None,
            sample_end: None,
            interaction: true,
        }
    }
}

impl CptrSpec {
    pub fn validate(&self) -> Result<()> {
        if self.lags.is_empty() {
            return Err(Error::Validation("lag set is empty".into()));
        }
        if self.lags.contains(&0) {
            return Err(Error::Validation("lags must be positive".into()));
        }
        let mut sorted = self.lags.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.lags.len() {
            return Err(Error::Validation("lags must be distinct".into()));
        }
        if !(1..=3).contains(&self.demand_order) {
            return Err(Error::Validation(format!(
                "demand polynomial order must be 1, 2 or 3, got {}",
                self.demand_order
            )));
        }
        if let (Some(a), Some(b)) = (self.sample_start, self.sample_end) {
            if a > b {
                return Err(Error::Validation(format!("sample start {a} is after sample end {b}")));
            }
        }
        Ok(())
    }

    pub fn max_lag(&self) -> usize {
        self.lags.iter().copied().max().unwrap_or(0)
    }

    /// Regressor names in design-column order.
    pub fn column_names(&self) -> Vec<String> {
        let mut names = vec!["beta0".to_string()];
        names.extend(self.lags.iter().map(|l| format!("phi{l}")));
        names.push("beta1".into());
        if self.interaction {
            names.push("beta2".into());
        }
        for p in 1..=self.demand_order {
            names.push(format!("beta{}", 2 + p));
        }
        names
    }
}

/// Day-level inputs after choosing the price basis.
struct Row {
    valid: bool,
    s: f64,
    c: f64,
    log_d: f64,
    phase4: bool,
}

fn rows_by_date(data: &DailySeries, spec: &CptrSpec) -> HashMap<NaiveDate, Row> {
    let s_tilde = data.s_tilde(spec.price_basis);
    data.days
        .iter()
        .zip(s_tilde)
        .map(|(day, s)| {
            let valid = !day.gap && s.is_some() && day.c_tilde.is_some() && day.log_d.is_some();
            let row = Row {
                valid,
                s: s.unwrap_or(f64::NAN),
                c: day.c_tilde.unwrap_or(f64::NAN),
                log_d: day.log_d.unwrap_or(f64::NAN),
                phase4: day.date >= spec.phase4_start,
            };
            (day.date, row)
        })
        .collect()
}

/// Builds the regression design. Lags are looked up by calendar date and a
/// row is kept only when it and every lagged day are valid.
pub fn build_design(data: &DailySeries, spec: &CptrSpec) -> Result<DesignMatrix> {
    spec.validate()?;
    if spec.max_lag() >= data.len() {
        return Err(Error::Insufficient(format!(
            "maximum lag {} needs more than {} days",
            spec.max_lag(),
            data.len()
        )));
    }
    let rows = rows_by_date(data, spec);
    let names = spec.column_names();
    let k = names.len();
    let mut values: Vec<f64> = Vec::new();
    let mut response = Vec::new();
    let mut dates = Vec::new();
    for day in &data.days {
        let date = day.date;
        if spec.sample_start.is_some_and(|s| date < s) || spec.sample_end.is_some_and(|e| date > e) {
            continue;
        }
        let current = &rows[&date];
        if !current.valid {
            continue;
        }
        let lagged: Option<Vec<f64>> = spec
            .lags
            .iter()
            .map(|&l| {
                date.checked_sub_days(Days::new(l as u64))
                    .and_then(|d| rows.get(&d))
                    .filter(|r| r.valid)
                    .map(|r| r.s)
            })
            .collect();
        let Some(lagged) = lagged else { continue };
        values.push(1.0);
        values.extend(lagged);
        values.push(current.c);
        if spec.interaction {
            values.push(if current.phase4 { current.c } else { 0.0 });
        }
        for p in 1..=spec.demand_order {
            values.push(current.log_d.powi(i32::from(p)));
        }
        response.push(current.s);
        dates.push(date);
    }
    if response.len() < k + MIN_SPARE_ROWS {
        return Err(Error::Insufficient(format!(
            "{} valid rows for {k} columns; need at least {}",
            response.len(),
            k + MIN_SPARE_ROWS
        )));
    }
    let x = DMatrix::from_row_slice(response.len(), k, &values);
    DesignMatrix::new(names, x, DVector::from_vec(response), dates)
}

/// OLS fit with Newey–West inference.
pub fn fit_baseline(data: &DailySeries, spec: &CptrSpec) -> Result<ModelFit> {
    ols_fit(&build_design(data, spec)?)
}

/// Phase 3 and Phase 4 pass-through rates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseReport {
    pub cptr_phase3: f64,
    pub cptr_phase4: f64,
    /// `100 * beta2 / beta1`; `None` when `beta1` is zero.
    pub pct_variation: Option<f64>,
    pub se_phase3: f64,
    pub se_phase4: f64,
    pub stars_phase3: Stars,
    pub stars_phase4: Stars,
}

impl PhaseReport {
    /// From the two coefficients and their 2x2 covariance block
    /// `[[var1, cov], [cov, var2]]`.
    pub fn from_coefficients(beta1: f64, beta2: f64, var1: f64, var2: f64, cov: f64) -> Self {
        let cptr_phase4 = beta1 + beta2;
        let se_phase3 = var1.sqrt();
        let se_phase4 = (var1 + var2 + 2.0 * cov).max(0.0).sqrt();
        PhaseReport {
            cptr_phase3: beta1,
            cptr_phase4,
            pct_variation: (beta1 != 0.0).then(|| 100.0 * beta2 / beta1),
            se_phase3,
            se_phase4,
            stars_phase3: Stars::from_p(normal_p_value(beta1 / se_phase3)),
            stars_phase4: Stars::from_p(normal_p_value(cptr_phase4 / se_phase4)),
        }
    }
}

/// Phase comparison from a fit containing `beta1` and `beta2`, using the
/// HAC covariance.
pub fn phase_cptr(fit: &ModelFit) -> Result<PhaseReport> {
    let missing = |n: &str| Error::Validation(format!("fit has no `{n}` coefficient"));
    let i1 = fit.index_of("beta1").ok_or_else(|| missing("beta1"))?;
    let i2 = fit.index_of("beta2").ok_or_else(|| missing("beta2"))?;
    let v = &fit.vcov_hac;
    Ok(PhaseReport::from_coefficients(
        fit.coefficients[i1],
        fit.coefficients[i2],
        v[(i1, i1)],
        v[(i2, i2)],
        v[(i1, i2)],
    ))
}

/// Robustness variants of the baseline specification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Baseline,
    DailyAverage,
    Quadratic,
    Cubic,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::Baseline,
        Variant::DailyAverage,
        Variant::Quadratic,
        Variant::Cubic,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Baseline => "baseline",
            Variant::DailyAverage => "daily_average",
            Variant::Quadratic => "quadratic",
            Variant::Cubic => "cubic",
        }
    }

    pub fn apply(self, base: &CptrSpec) -> CptrSpec {
        let mut spec = base.clone();
        match self {
            Variant::Baseline => {}
            Variant::DailyAverage => spec.price_basis = PriceBasis::DailyAverage,
            Variant::Quadratic => spec.demand_order = 2,
            Variant::Cubic => spec.demand_order = 3,
        }
        spec
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| Error::Validation(format!("unknown variant `{s}`")))
    }
}

/// Fits each requested variant in parallel.
pub fn fit_variants(data: &DailySeries, base: &CptrSpec, variants: &[Variant]) -> Result<BTreeMap<Variant, ModelFit>> {
    variants
        .par_iter()
        .map(|&v| fit_baseline(data, &v.apply(base)).map(|fit| (v, fit)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::construct::DailyRecord;

    fn clean_series(n: usize) -> DailySeries {
        let start = NaiveDate::from_ymd_opt(2020, 6, 1).unwrap();
        let days = (0..n)
            .map(|t| {
                let mut r = DailyRecord::empty(start + Days::new(t as u64));
                let x = t as f64;
                r.s_tilde = Some((x * 0.7).sin() + 0.01 * x);
                r.c_tilde = Some((x * 1.3).cos());
                r.log_d = Some(10.0 + (x * 0.11).sin());
                r
            })
            .collect();
        DailySeries { zone: "T".into(), days }
    }

    #[test]
    fn design_shape_with_default_lags() {
        let d = build_design(&clean_series(100), &CptrSpec::default()).unwrap();
        assert_eq!((d.nrows(), d.ncols()), (79, 12));
    }

    #[test]
    fn invalid_day_drops_dependent_rows() {
        let mut data = clean_series(100);
        data.days[50].gap = true;
        let d = build_design(&data, &CptrSpec::default()).unwrap();
        let bad = data.days[50].date;
        for date in d.dates() {
            let diff = (*date - bad).num_days();
            assert!(diff != 0 && !DEFAULT_LAGS.contains(&(diff as usize)));
        }
        assert_eq!(d.nrows(), 79 - 9);
    }

    #[test]
    fn polynomial_orders_add_columns() {
        let data = clean_series(200);
        let base = build_design(&data, &CptrSpec::default()).unwrap();
        let cubic = build_design(&data, &Variant::Cubic.apply(&CptrSpec::default())).unwrap();
        assert_eq!(cubic.ncols(), base.ncols() + 2);
        assert_eq!(cubic.names().last().unwrap(), "beta5");
    }

    #[test]
    fn too_few_rows_and_bad_specs() {
        assert!(matches!(
            build_design(&clean_series(60), &CptrSpec::default()),
            Err(Error::Insufficient(_))
        ));
        let spec = CptrSpec {
            lags: vec![1, 1],
            ..Default::default()
        };
        assert!(spec.validate().is_err());
        let spec = CptrSpec {
            demand_order: 4,
            ..Default::default()
        };
        assert!(spec.validate().is_err());
    }

    #[test]
    fn pct_variation_undefined_for_zero_beta1() {
        let r = PhaseReport::from_coefficients(0.0, 0.1, 0.01, 0.01, 0.0);
        assert_eq!(r.pct_variation, None);
        let r = PhaseReport::from_coefficients(0.32, -0.03, 0.01, 0.02, -0.005);
        assert_eq!(r.cptr_phase4, 0.32 + -0.03);
        assert!((r.se_phase4 - 0.02f64.sqrt()).abs() < 1e-15);
    }
}
