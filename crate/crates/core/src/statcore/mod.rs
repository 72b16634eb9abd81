//! Regression core: pivoted Householder least squares, Newey–West HAC
//! covariance and correlogram diagnostics.

mod acf;
mod linalg;
mod ols;

pub use acf::{acf_pacf, Correlogram};
pub use linalg::PivotedQr;
pub use ols::{
    default_bandwidth, newey_west, normal_p_value, ols_fit, ols_fit_with, CoefficientRow, DesignMatrix, ModelFit,
    Stars, RANK_TOLERANCE,
};
