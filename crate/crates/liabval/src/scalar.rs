use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive};

/// Scalar type used throughout the engines.
///
/// Everything downstream of tree ingestion is generic over `Real`; the
/// concrete aliases at the crate root fix `f64`, which is what the CLI and
/// the file formats use.
pub trait Real: Float + FromPrimitive + Sum + Debug + Display + Send + Sync + 'static {
    /// Lossy conversion from `f64`, used for literal constants.
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("constant not representable in scalar type")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Absolute tolerance for exact identities (probabilities, martingale
/// checks, recursion identities).
pub const ABS_TOL: f64 = 1e-12;

/// Relative tolerance for oracle comparisons.
pub const REL_TOL: f64 = 1e-10;

/// Relative closeness with an absolute floor, the comparison used by the
/// oracle suites.
pub fn close<S: Real>(a: S, b: S, rel: f64, abs: f64) -> bool {
    let diff = (a - b).abs();
    let scale = a.abs().max(b.abs()).max(S::one());
    diff <= S::of(abs) || diff <= scale * S::of(rel)
}
