//! Dominance-stability analysis of microbial community time series.
//!
//! Abundance tables are split into per-subject series ([`ingest`]), turned
//! into community and species dominance values ([`metrics`],
//! [`stability`]), and the relative change of dominance is regressed on
//! dominance with five candidate models ([`models`], [`fitting`]). One model
//! per subject is chosen by validity gates and a fixed priority
//! ([`selection`]), and the fitted curve is iterated as a map to find
//! equilibria ([`dynamics`]). [`report`] wires this into CSV/SVG outputs.
//!
//! The numeric core is generic over [`scalar::Real`]; the aliases below fix
//! the scalar to `f64`, and [`Exact`] is used where an identity should hold
//! with no rounding at all.

pub mod dynamics;
pub mod error;
pub mod fitting;
pub mod ingest;
pub mod linalg;
pub mod metrics;
pub mod models;
pub mod report;
pub mod scalar;
pub mod selection;
pub mod stability;

pub use error::{Error, Result};
pub use models::{ModelKind, Regime};
pub use report::{run, Command, RunConfig, RunOutcome, SimulateOptions};
pub use selection::SelectionPolicy;

/// Arbitrary-precision rational for exact power-sum identities.
pub type Exact = num_rational::BigRational;

pub type Abundance = metrics::AbundanceVector<f64>;
pub type Params = models::ModelParams<f64>;
pub type Fit = fitting::ModelFit<f64>;
pub type Selected = selection::SelectedModel<f64>;
pub type Series = stability::StabilitySeries<f64>;
pub type Trajectory = dynamics::Trajectory<f64>;
