//! Python bindings for the estimation core.
//!
//! Series, fits and test results are exposed as read-only classes; the
//! pipeline functions take a `Series` and an optional JSON model spec.

use std::path::PathBuf;

use chrono::NaiveDate;
use cptr_core::construct::{self, DailySeries};
use cptr_core::cptr::{self as model, CptrSpec, Variant};
use cptr_core::gam::{self, Criterion};
use cptr_core::quantreg::{self, DEFAULT_TAUS};
use cptr_core::simulate::{self as sim, SimulationConfig};
use cptr_core::statcore::ModelFit;
use cptr_core::unitroot::{self, Deterministic, UnitRootTest};
use pyo3::exceptions::{PyArithmeticError, PyIOError, PyValueError};
use pyo3::prelude::*;

fn py_err(e: cptr_core::Error) -> PyErr {
    match e {
        cptr_core::Error::Io { .. } => PyIOError::new_err(e.to_string()),
        e if e.is_numerical() => PyArithmeticError::new_err(e.to_string()),
        e => PyValueError::new_err(e.to_string()),
    }
}

fn parse<T: std::str::FromStr<Err = cptr_core::Error>>(s: &str) -> PyResult<T> {
    s.parse().map_err(py_err)
}

fn spec_from(json: Option<&str>) -> PyResult<CptrSpec> {
    let Some(text) = json else {
        return Ok(CptrSpec::default());
    };
    let spec: CptrSpec =
        serde_json::from_str(text).map_err(|e| PyValueError::new_err(format!("invalid model spec: {e}")))?;
    spec.validate().map_err(py_err)?;
    Ok(spec)
}

/// Constructed daily series for one zone.
#[pyclass(frozen, module = "cptr")]
struct Series {
    inner: DailySeries,
}

#[pymethods]
impl Series {
    #[getter]
    fn zone(&self) -> &str {
        &self.inner.zone
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        let span = match (self.inner.days.first(), self.inner.days.last()) {
            (Some(a), Some(b)) => format!("{}..{}", a.date, b.date),
            _ => "empty".into(),
        };
        format!("Series(zone={:?}, days={}, {span})", self.inner.zone, self.inner.len())
    }

    fn dates(&self) -> Vec<String> {
        self.inner.days.iter().map(|d| d.date.to_string()).collect()
    }

    /// One column by its CSV name, with `None` for missing values.
    fn column(&self, name: &str) -> PyResult<Vec<Option<f64>>> {
        self.inner.column(name).map_err(py_err)
    }

    fn to_csv(&self, path: PathBuf) -> PyResult<()> {
        let file = std::fs::File::create(&path).map_err(|e| PyIOError::new_err(format!("{}: {e}", path.display())))?;
        construct::write_series_csv(&self.inner, file).map_err(py_err)
    }
}

#[pyfunction]
fn load_series(path: PathBuf, zone: &str) -> PyResult<Series> {
    Ok(Series {
        inner: construct::load_series_csv(&path, zone).map_err(py_err)?,
    })
}

/// Synthetic market from the regression with known coefficients.
/// `config` is a JSON object overriding generator fields.
#[pyfunction]
#[pyo3(signature = (seed, days=None, start=None, config=None))]
fn simulate(seed: u64, days: Option<usize>, start: Option<&str>, config: Option<&str>) -> PyResult<Series> {
    let mut cfg: SimulationConfig = match config {
        Some(text) => {
            serde_json::from_str(text).map_err(|e| PyValueError::new_err(format!("invalid simulation config: {e}")))?
        }
        None => SimulationConfig::default(),
    };
    if let Some(d) = days {
        cfg.days = d;
    }
    if let Some(s) = start {
        cfg.start =
            NaiveDate::parse_from_str(s, "%Y-%m-%d").map_err(|e| PyValueError::new_err(format!("start `{s}`: {e}")))?;
    }
    let out = sim::simulate(&cfg, &sim::default_parameters(), seed).map_err(py_err)?;
    Ok(Series { inner: out.series })
}

#[pyclass(frozen, get_all, module = "cptr")]
struct PhaseReport {
    cptr_phase3: f64,
    cptr_phase4: f64,
    pct_variation: Option<f64>,
    se_phase3: f64,
    se_phase4: f64,
    stars_phase3: String,
    stars_phase4: String,
}

impl From<model::PhaseReport> for PhaseReport {
    fn from(r: model::PhaseReport) -> Self {
        PhaseReport {
            cptr_phase3: r.cptr_phase3,
            cptr_phase4: r.cptr_phase4,
            pct_variation: r.pct_variation,
            se_phase3: r.se_phase3,
            se_phase4: r.se_phase4,
            stars_phase3: r.stars_phase3.to_string(),
            stars_phase4: r.stars_phase4.to_string(),
        }
    }
}

#[pymethods]
impl PhaseReport {
    fn __repr__(&self) -> String {
        format!(
            "PhaseReport(phase3={:.4}{}, phase4={:.4}{}, pct={})",
            self.cptr_phase3,
            self.stars_phase3,
            self.cptr_phase4,
            self.stars_phase4,
            self.pct_variation.map_or("None".to_string(), |p| format!("{p:.2}"))
        )
    }
}

/// Phase comparison from two coefficients and their covariance block.
#[pyfunction]
#[pyo3(signature = (beta1, beta2, var1=0.0, var2=0.0, cov=0.0))]
fn phase_cptr(beta1: f64, beta2: f64, var1: f64, var2: f64, cov: f64) -> PhaseReport {
    model::PhaseReport::from_coefficients(beta1, beta2, var1, var2, cov).into()
}

/// Least-squares fit with Newey–West standard errors.
#[pyclass(frozen, module = "cptr")]
struct Fit {
    #[pyo3(get)]
    names: Vec<String>,
    #[pyo3(get)]
    coefficients: Vec<f64>,
    #[pyo3(get)]
    se_hac: Vec<f64>,
    #[pyo3(get)]
    se_classical: Vec<f64>,
    #[pyo3(get)]
    p_values: Vec<f64>,
    #[pyo3(get)]
    stars: Vec<String>,
    /// Percent.
    #[pyo3(get)]
    r2_adj: f64,
    #[pyo3(get)]
    nobs: usize,
    #[pyo3(get)]
    bandwidth: usize,
    inner: ModelFit,
}

impl From<ModelFit> for Fit {
    fn from(f: ModelFit) -> Self {
        let k = f.names.len();
        Fit {
            names: f.names.clone(),
            coefficients: f.coefficients.iter().copied().collect(),
            se_hac: (0..k).map(|i| f.se_hac(i)).collect(),
            se_classical: (0..k).map(|i| f.se_classical(i)).collect(),
            p_values: (0..k).map(|i| f.p_value(i)).collect(),
            stars: (0..k).map(|i| f.stars(i).to_string()).collect(),
            r2_adj: f.r2_adj,
            nobs: f.nobs,
            bandwidth: f.bandwidth,
            inner: f,
        }
    }
}

#[pymethods]
impl Fit {
    fn coef(&self, name: &str) -> PyResult<f64> {
        self.inner
            .coef(name)
            .ok_or_else(|| PyValueError::new_err(format!("no coefficient `{name}`")))
    }

    /// HAC covariance as a list of rows.
    fn vcov(&self) -> Vec<Vec<f64>> {
        self.inner
            .vcov_hac
            .row_iter()
            .map(|r| r.iter().copied().collect())
            .collect()
    }

    fn phase_report(&self) -> PyResult<PhaseReport> {
        Ok(model::phase_cptr(&self.inner).map_err(py_err)?.into())
    }

    fn __repr__(&self) -> String {
        format!(
            "Fit(nobs={}, r2_adj={:.2}, names={:?})",
            self.nobs, self.r2_adj, self.names
        )
    }
}

#[pyfunction]
#[pyo3(signature = (series, variant="baseline", spec=None))]
fn fit(series: &Series, variant: &str, spec: Option<&str>) -> PyResult<Fit> {
    let variant: Variant = parse(variant)?;
    let spec = variant.apply(&spec_from(spec)?);
    Ok(model::fit_baseline(&series.inner, &spec).map_err(py_err)?.into())
}

#[pyclass(frozen, get_all, module = "cptr")]
struct UnitRoot {
    test: &'static str,
    statistic: f64,
    critical_1pct: f64,
    critical_5pct: f64,
    critical_10pct: f64,
    reject_5pct: bool,
    lags: usize,
    nobs: usize,
}

impl From<unitroot::TestResult> for UnitRoot {
    fn from(r: unitroot::TestResult) -> Self {
        UnitRoot {
            test: match r.test {
                UnitRootTest::Adf => "ADF",
                UnitRootTest::Kpss => "KPSS",
            },
            statistic: r.statistic,
            critical_1pct: r.critical.pct1,
            critical_5pct: r.critical.pct5,
            critical_10pct: r.critical.pct10,
            reject_5pct: r.reject_5pct,
            lags: r.lags,
            nobs: r.nobs,
        }
    }
}

#[pymethods]
impl UnitRoot {
    fn __repr__(&self) -> String {
        format!(
            "UnitRoot({}, stat={:.4}, lags={}, reject_5pct={})",
            self.test, self.statistic, self.lags, self.reject_5pct
        )
    }
}

#[pyfunction]
#[pyo3(signature = (values, max_lag=None, variant="constant"))]
fn adf(values: Vec<f64>, max_lag: Option<usize>, variant: &str) -> PyResult<UnitRoot> {
    let variant: Deterministic = parse(variant)?;
    Ok(unitroot::adf_test(&values, max_lag, variant).map_err(py_err)?.into())
}

#[pyfunction]
#[pyo3(signature = (values, bandwidth=None, variant="constant"))]
fn kpss(values: Vec<f64>, bandwidth: Option<usize>, variant: &str) -> PyResult<UnitRoot> {
    let variant: Deterministic = parse(variant)?;
    Ok(unitroot::kpss_test(&values, bandwidth, variant).map_err(py_err)?.into())
}

/// Quantile estimate with its 90% bootstrap band.
#[pyclass(frozen, get_all, module = "cptr")]
struct Band {
    tau: f64,
    coef: String,
    estimate: f64,
    se: f64,
    lo90: f64,
    hi90: f64,
}

#[pymethods]
impl Band {
    fn __repr__(&self) -> String {
        format!(
            "Band(tau={}, {}={:.4} [{:.4}, {:.4}])",
            self.tau, self.coef, self.estimate, self.lo90, self.hi90
        )
    }
}

/// Bands for beta0, beta1, beta2 and beta1+beta2 at every tau.
#[pyfunction]
#[pyo3(signature = (series, seed, taus=None, bootstrap=1000, spec=None))]
fn quantile_path(
    series: &Series,
    seed: u64,
    taus: Option<Vec<f64>>,
    bootstrap: usize,
    spec: Option<&str>,
) -> PyResult<Vec<Band>> {
    let spec = spec_from(spec)?;
    let design = model::build_design(&series.inner, &spec).map_err(py_err)?;
    let taus = taus.unwrap_or_else(|| DEFAULT_TAUS.to_vec());
    let path = quantreg::qr_path(&design, &taus, bootstrap, seed).map_err(py_err)?;
    Ok(path
        .bands
        .into_iter()
        .map(|b| Band {
            tau: b.tau,
            coef: b.coef,
            estimate: b.estimate,
            se: b.se,
            lo90: b.lo90,
            hi90: b.hi90,
        })
        .collect())
}

#[pyclass(frozen, get_all, module = "cptr")]
struct GamFit {
    names: Vec<String>,
    estimates: Vec<f64>,
    se: Vec<f64>,
    lambda_: f64,
    edf: f64,
    smooth_p_value: f64,
    r2_adj: f64,
    nobs: usize,
}

#[pymethods]
impl GamFit {
    fn coef(&self, name: &str) -> PyResult<f64> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.estimates[i])
            .ok_or_else(|| PyValueError::new_err(format!("no coefficient `{name}`")))
    }

    fn __repr__(&self) -> String {
        format!(
            "GamFit(edf={:.3}, lambda={:.3e}, r2_adj={:.2})",
            self.edf, self.lambda_, self.r2_adj
        )
    }
}

/// Spline-in-log-demand model with the smoothing parameter chosen on the
/// default grid.
#[pyfunction]
#[pyo3(signature = (series, k=gam::DEFAULT_K, criterion="gcv", spec=None))]
fn gam_fit(series: &Series, k: usize, criterion: &str, spec: Option<&str>) -> PyResult<GamFit> {
    let criterion: Criterion = parse(criterion)?;
    let spec = spec_from(spec)?;
    let f = gam::gam_fit(&series.inner, &spec, k, &gam::default_lambda_grid(), criterion).map_err(py_err)?;
    Ok(GamFit {
        names: f.parametric.iter().map(|r| r.name.clone()).collect(),
        estimates: f.parametric.iter().map(|r| r.estimate).collect(),
        se: f.parametric.iter().map(|r| r.se).collect(),
        lambda_: f.lambda,
        edf: f.edf,
        smooth_p_value: f.smooth_p_value,
        r2_adj: f.r2_adj,
        nobs: f.nobs,
    })
}

/// Carbon price at which coal and gas generation cost the same.
#[pyfunction]
fn switching_price(gas_cost: f64, coal_cost: f64, coal_intensity: f64, gas_intensity: f64) -> PyResult<f64> {
    construct::switching_price(gas_cost, coal_cost, coal_intensity, gas_intensity).map_err(py_err)
}

#[pymodule]
fn cptr(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Series>()?;
    m.add_class::<Fit>()?;
    m.add_class::<PhaseReport>()?;
    m.add_class::<UnitRoot>()?;
    m.add_class::<Band>()?;
    m.add_class::<GamFit>()?;
    m.add_function(wrap_pyfunction!(load_series, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    m.add_function(wrap_pyfunction!(phase_cptr, m)?)?;
    m.add_function(wrap_pyfunction!(adf, m)?)?;
    m.add_function(wrap_pyfunction!(kpss, m)?)?;
    m.add_function(wrap_pyfunction!(quantile_path, m)?)?;
    m.add_function(wrap_pyfunction!(gam_fit, m)?)?;
    m.add_function(wrap_pyfunction!(switching_price, m)?)?;
    Ok(())
}
