//! Conditional monetary risk measures on tree nodes: VaR, Expected
//! Shortfall and discrete spectral mixtures of quantiles.
//!
//! The measure is driven by a mixing distribution on (0,1): a point mass
//! gives VaR, a uniform tail gives ES, a finite list of weighted levels
//! gives a general mixture. Quantiles use the left-continuous min
//! convention; the ES integral over a discrete distribution is evaluated
//! exactly on the piecewise-constant quantile function.

use crate::error::{Error, Result};
use crate::normal;
use crate::scalar::{Real, ABS_TOL};
use crate::tree::{NodeId, ScenarioTree};

#[derive(Debug, Clone, PartialEq)]
pub enum RiskMeasureSpec<S> {
    /// VaR at tail level u corresponds to `PointMass { level: 1 - u }`.
    PointMass { level: S },
    /// ES at tail level u: mixing density v -> 1/u on (1-u, 1).
    UniformTail { u: S },
    /// Finite mixture of quantile levels, weights summing to one.
    DiscreteMixture { atoms: Vec<(S, S)> },
}

impl<S: Real> RiskMeasureSpec<S> {
    /// VaR_{u}: quantile at level 1 - u.
    pub fn var(u: S) -> Self {
        RiskMeasureSpec::PointMass { level: S::one() - u }
    }

    /// ES_{u}.
    pub fn es(u: S) -> Self {
        RiskMeasureSpec::UniformTail { u }
    }

    pub fn mixture(atoms: Vec<(S, S)>) -> Self {
        RiskMeasureSpec::DiscreteMixture { atoms }
    }

    pub fn validate(&self) -> Result<()> {
        let inside = |x: S| x > S::zero() && x < S::one();
        match self {
            RiskMeasureSpec::PointMass { level } => {
                if !inside(*level) {
                    return Err(Error::Argument(format!("quantile level {level} outside (0,1)")));
                }
            }
            RiskMeasureSpec::UniformTail { u } => {
                if !inside(*u) {
                    return Err(Error::Argument(format!("tail level {u} outside (0,1)")));
                }
            }
            RiskMeasureSpec::DiscreteMixture { atoms } => {
                if atoms.is_empty() {
                    return Err(Error::Argument("empty mixture".into()));
                }
                let mut total = S::zero();
                for &(q, w) in atoms {
                    if !inside(q) {
                        return Err(Error::Argument(format!("mixture level {q} outside (0,1)")));
                    }
                    if w <= S::zero() {
                        return Err(Error::Argument(format!("mixture weight {w} not positive")));
                    }
                    total = total + w;
                }
                if (total - S::one()).abs() > S::of(ABS_TOL) {
                    return Err(Error::Argument(format!("mixture weights sum to {total}")));
                }
            }
        }
        Ok(())
    }

    /// The Gaussian base quantile r_0: the mixture applied to the standard
    /// normal quantile function.
    pub fn r0(&self) -> Result<S> {
        self.validate()?;
        Ok(match self {
            RiskMeasureSpec::PointMass { level } => normal::inv_cdf(*level),
            // Exact tail-mean identity for the normal distribution.
            RiskMeasureSpec::UniformTail { u } => {
                normal::pdf(normal::inv_cdf(S::one() - *u)) / *u
            }
            RiskMeasureSpec::DiscreteMixture { atoms } => atoms
                .iter()
                .map(|&(q, w)| w * normal::inv_cdf(q))
                .sum(),
        })
    }
}

/// A finite distribution as (probability, value) atoms.
#[derive(Debug, Clone)]
pub struct Discrete<S> {
    /// Sorted ascending by value, probabilities strictly positive.
    atoms: Vec<(S, S)>,
}

impl<S: Real> Discrete<S> {
    pub fn new(mut atoms: Vec<(S, S)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::Structure("empty distribution".into()));
        }
        atoms.sort_by(|a, b| a.1.partial_cmp(&b.1).expect("non-finite atom value"));
        Ok(Discrete { atoms })
    }

    /// Left-continuous quantile: smallest value with cumulative probability
    /// at least `q`.
    pub fn quantile(&self, q: S) -> Result<S> {
        if q <= S::zero() || q >= S::one() {
            return Err(Error::Argument(format!("quantile level {q} outside (0,1)")));
        }
        let mut cum = S::zero();
        for &(p, v) in &self.atoms {
            cum = cum + p;
            if cum >= q {
                return Ok(v);
            }
        }
        // Cumulative probabilities should reach 1; guard against rounding.
        Ok(self.atoms.last().unwrap().1)
    }

    /// Exact integral of the quantile function over (a, 1).
    fn upper_tail_integral(&self, a: S) -> S {
        let mut acc = S::zero();
        let mut lo = S::zero();
        for &(p, v) in &self.atoms {
            let hi = lo + p;
            let left = lo.max(a);
            if hi > left {
                acc = acc + v * (hi - left);
            }
            lo = hi;
        }
        acc
    }

    /// Spectral mixture of quantiles: the risk measure applied with the
    /// liability orientation, i.e. rho(-Y) for Y distributed as `self`.
    pub fn rho(&self, spec: &RiskMeasureSpec<S>) -> Result<S> {
        spec.validate()?;
        match spec {
            RiskMeasureSpec::PointMass { level } => self.quantile(*level),
            RiskMeasureSpec::UniformTail { u } => {
                Ok(self.upper_tail_integral(S::one() - *u) / *u)
            }
            RiskMeasureSpec::DiscreteMixture { atoms } => {
                let mut acc = S::zero();
                for &(q, w) in atoms {
                    acc = acc + w * self.quantile(q)?;
                }
                Ok(acc)
            }
        }
    }
}

/// The P-conditional child distribution of `values` at `node`.
pub fn child_distribution<S: Real>(
    tree: &ScenarioTree<S>,
    node: NodeId,
    values: &[S],
) -> Result<Discrete<S>> {
    let children = &tree.node(node).children;
    if children.is_empty() {
        return Err(Error::Structure(format!(
            "node '{}' has no children",
            tree.node(node).id
        )));
    }
    Discrete::new(
        children
            .iter()
            .map(|&c| (tree.node(c).branch_prob, values[c]))
            .collect(),
    )
}

/// Left-continuous conditional quantile of the child values at `node`.
pub fn conditional_quantile<S: Real>(
    tree: &ScenarioTree<S>,
    node: NodeId,
    values: &[S],
    q: S,
) -> Result<S> {
    child_distribution(tree, node, values)?.quantile(q)
}

/// rho_t(-Y) for the child variable Y at `node`: the capital requirement
/// orientation R_t = rho_t(-X_{t+1} - V_{t+1}).
pub fn rho<S: Real>(
    tree: &ScenarioTree<S>,
    node: NodeId,
    values: &[S],
    spec: &RiskMeasureSpec<S>,
) -> Result<S> {
    child_distribution(tree, node, values)?.rho(spec)
}
