//! Valuation of multi-period insurance liability cash flows under repeated
//! capital requirements on scenario trees, with closed forms for
//! independent and linear-Gaussian flows, static replication searches and
//! well-posedness diagnostics.
//!
//! The numerical core is generic over the scalar type through [`scalar::Real`];
//! the aliases below fix `f64` for ordinary use.

pub mod config;
pub mod error;
pub mod gaussian;
pub mod iid;
pub mod io;
pub mod linalg;
pub mod normal;
pub mod optim;
pub mod replication;
pub mod report;
pub mod risk;
pub mod sim;
pub mod scalar;
pub mod tree;
pub mod valuation;

pub use error::{Error, Result};

/// Scenario tree over `f64`.
pub type Tree = tree::ScenarioTree<f64>;
/// Risk measure specification over `f64`.
pub type RiskSpec = risk::RiskMeasureSpec<f64>;
/// Backward-recursion output over `f64`.
pub type Valuation = valuation::ValuationResult<f64>;
/// Linear-Gaussian model over `f64`.
pub type Gaussian = gaussian::GaussianModel<f64>;
