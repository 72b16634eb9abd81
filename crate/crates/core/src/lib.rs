//! Carbon cost pass-through estimation for zonal electricity markets.
//!
//! The pipeline runs from raw hourly market data to pass-through rates:
//!
//! - [`ingest`] loads and calendar-aligns hourly panels and daily fuel and
//!   carbon prices;
//! - [`construct`] builds the daily price, fuel-cost, emission and spread
//!   variables and their log-difference transforms;
//! - [`statcore`] provides least squares with Newey–West covariance and
//!   correlograms;
//! - [`unitroot`] runs ADF and KPSS screening;
//! - [`cptr`] fits the autoregressive pass-through regression with a
//!   Phase-4 interaction and derives phase pass-through rates;
//! - [`quantreg`] estimates quantile-regression coefficient paths with
//!   bootstrap bands;
//! - [`gam`] replaces the log-demand term by a penalized cubic spline;
//! - [`simulate`] generates synthetic markets with known coefficients.

// Negated comparisons are used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod construct;
pub mod cptr;
pub mod error;
pub mod gam;
pub mod ingest;
pub mod quantreg;
pub mod rng;
pub mod simulate;
pub mod statcore;
pub mod unitroot;

pub use error::{Error, Result};
