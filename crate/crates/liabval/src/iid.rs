//! Closed-form valuation for independent per-period cash flows: the
//! recursion decouples and V_t, C_t, R_t are sums of one-period terms.

use crate::error::{Error, Result};
use crate::gaussian::positive_part_gaussian;
use crate::normal;
use crate::risk::{Discrete, RiskMeasureSpec};
use crate::scalar::{close, Real, ABS_TOL, REL_TOL};

/// Marginal law of one period's cash flow under P and Q.
#[derive(Debug, Clone)]
pub enum PeriodDist<S> {
    /// Finite support `xs` with P-weights `p` and Q-weights `q`.
    Atoms { xs: Vec<S>, p: Vec<S>, q: Vec<S> },
    /// X ~ N(mean, sigma^2) under P and N(mean + shift, sigma^2) under Q.
    Gaussian { mean: S, sigma: S, shift: S },
}

impl<S: Real> PeriodDist<S> {
    fn validate(&self) -> Result<()> {
        match self {
            PeriodDist::Atoms { xs, p, q } => {
                if xs.len() != p.len() || xs.len() != q.len() {
                    return Err(Error::Data(format!(
                        "atom lengths differ: {} values, {} P-weights, {} Q-weights",
                        xs.len(),
                        p.len(),
                        q.len()
                    )));
                }
                if xs.is_empty() {
                    return Err(Error::Data("empty atom list".into()));
                }
                for (label, w) in [("P", p), ("Q", q)] {
                    if w.iter().any(|&wi| wi <= S::zero()) {
                        return Err(Error::Data(format!("{label}-weights must be positive")));
                    }
                    let total: S = w.iter().copied().sum();
                    if !close(total, S::one(), REL_TOL, ABS_TOL) {
                        return Err(Error::Data(format!(
                            "{label}-weights sum to {total}, expected 1"
                        )));
                    }
                }
                Ok(())
            }
            PeriodDist::Gaussian { sigma, .. } => {
                if *sigma < S::zero() {
                    return Err(Error::Data(format!("negative sigma {sigma}")));
                }
                Ok(())
            }
        }
    }

    /// rho_0(-X) for this period's law under P.
    pub fn rho(&self, spec: &RiskMeasureSpec<S>) -> Result<S> {
        match self {
            PeriodDist::Atoms { xs, p, .. } => {
                Discrete::new(p.iter().copied().zip(xs.iter().copied()).collect())?.rho(spec)
            }
            PeriodDist::Gaussian { mean, sigma, .. } => Ok(*mean + *sigma * spec.r0()?),
        }
    }

    /// E^Q[(a - X)_+].
    pub fn expected_shortfall_below(&self, a: S) -> S {
        match self {
            PeriodDist::Atoms { xs, q, .. } => xs
                .iter()
                .zip(q.iter())
                .map(|(&x, &w)| w * (a - x).max(S::zero()))
                .sum(),
            PeriodDist::Gaussian { mean, sigma, shift } => {
                positive_part_gaussian(a - *mean - *shift, *sigma)
            }
        }
    }

    /// E^Q[X].
    pub fn mean_q(&self) -> S {
        match self {
            PeriodDist::Atoms { xs, q, .. } => {
                xs.iter().zip(q.iter()).map(|(&x, &w)| w * x).sum()
            }
            PeriodDist::Gaussian { mean, shift, .. } => *mean + *shift,
        }
    }

    /// Draws under P (`q_measure == false`) or Q.
    pub fn sample<R: rand::Rng>(&self, rng: &mut R, q_measure: bool) -> S {
        match self {
            PeriodDist::Atoms { xs, p, q } => {
                let w = if q_measure { q } else { p };
                let mut u = S::of(rng.gen::<f64>());
                for (&x, &wi) in xs.iter().zip(w.iter()) {
                    if u < wi {
                        return x;
                    }
                    u = u - wi;
                }
                *xs.last().expect("non-empty atoms")
            }
            PeriodDist::Gaussian { mean, sigma, shift } => {
                let u: f64 = rng.gen_range(1e-16..1.0 - 1e-16);
                let z = normal::inv_cdf(S::of(u));
                *mean + if q_measure { *shift } else { S::zero() } + *sigma * z
            }
        }
    }
}

/// Deterministic time-t values for an independent cash-flow sequence.
#[derive(Debug, Clone)]
pub struct IidValuation<S> {
    /// V_t for t = 0..=T.
    pub v: Vec<S>,
    /// C_t for t = 0..T (C_t depends on period t+1 only).
    pub c: Vec<S>,
    /// R_t for t = 0..T.
    pub r: Vec<S>,
}

/// V_t = sum_{s>t} (rho_0(-X_s) - E^Q[(rho_0(-X_s) - X_s)_+]),
/// C_t = E^Q[(rho_0(-X_{t+1}) - X_{t+1})_+], R_t = rho_0(-X_{t+1}) + V_{t+1}.
pub fn iid_closed_form<S: Real>(
    periods: &[PeriodDist<S>],
    spec: &RiskMeasureSpec<S>,
) -> Result<IidValuation<S>> {
    spec.validate()?;
    if periods.is_empty() {
        return Err(Error::Data("no periods given".into()));
    }
    for p in periods {
        p.validate()?;
    }
    let horizon = periods.len();
    let rho: Vec<S> = periods.iter().map(|p| p.rho(spec)).collect::<Result<_>>()?;
    let gap: Vec<S> = periods
        .iter()
        .zip(rho.iter())
        .map(|(p, &a)| p.expected_shortfall_below(a))
        .collect();

    let mut v = vec![S::zero(); horizon + 1];
    for t in (0..horizon).rev() {
        v[t] = v[t + 1] + rho[t] - gap[t];
    }
    let c = gap.clone();
    let r: Vec<S> = (0..horizon).map(|t| rho[t] + v[t + 1]).collect();
    Ok(IidValuation { v, c, r })
}
