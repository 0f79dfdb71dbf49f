//! Seeded random instances: scenario trees with martingale densities,
//! flow vectors, risk-measure specs and Gaussian models. Shared by the
//! verification subcommand and the acceptance suite; everything is
//! deterministic in the provided RNG.

use rand::Rng;

use crate::gaussian::GaussianModel;
use crate::normal;
use crate::risk::RiskMeasureSpec;
use crate::tree::{NodeSpec, ScenarioTree};

/// Shape bounds for [`random_tree`].
#[derive(Debug, Clone, Copy)]
pub struct TreeShape {
    pub max_horizon: usize,
    pub max_branching: usize,
    /// Cap on nodes at times >= 1, so the stopping-time enumeration oracle
    /// stays feasible from the root.
    pub max_decision_nodes: usize,
}

impl Default for TreeShape {
    fn default() -> Self {
        TreeShape { max_horizon: 4, max_branching: 3, max_decision_nodes: 24 }
    }
}

fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
    normal::inv_cdf(rng.gen_range(1e-12..1.0 - 1e-12))
}

/// A random tree with positive branch probabilities and a positive density
/// martingale, within the given shape bounds.
pub fn random_tree<R: Rng>(rng: &mut R, shape: TreeShape) -> ScenarioTree<f64> {
    let horizon = rng.gen_range(1..=shape.max_horizon);
    let mut specs = vec![NodeSpec::<f64> {
        id: "n0".into(),
        parent: None,
        branch_prob: 1.0,
        density: 1.0,
    }];
    // (id, density) of the previous layer.
    let mut layer: Vec<(String, f64)> = vec![("n0".into(), 1.0)];
    let mut decision_nodes = 0usize;
    let mut counter = 0usize;
    for t in 1..=horizon {
        let mut next = Vec::new();
        for (idx, (parent, parent_density)) in layer.iter().enumerate() {
            // Largest fan-out that still leaves one child per unexpanded
            // parent and per node of every remaining layer.
            let unexpanded = layer.len() - idx - 1;
            let periods_left = horizon - t;
            let slack = shape
                .max_decision_nodes
                .saturating_sub(decision_nodes)
                .saturating_sub(unexpanded)
                .saturating_sub(periods_left * (next.len() + unexpanded));
            let allowed = (slack / (1 + periods_left)).max(1);
            let fan = rng.gen_range(1..=shape.max_branching).min(allowed);
            let mut probs: Vec<f64> = (0..fan).map(|_| rng.gen_range(0.2..1.0)).collect();
            let total: f64 = probs.iter().sum();
            probs.iter_mut().for_each(|p| *p /= total);
            // Positive density ratios with conditional P-mean one.
            let raw: Vec<f64> = (0..fan).map(|_| rng.gen_range(0.3..1.7)).collect();
            let mean: f64 = probs.iter().zip(&raw).map(|(p, r)| p * r).sum();
            for k in 0..fan {
                counter += 1;
                let id = format!("n{counter}");
                let density = parent_density * raw[k] / mean;
                specs.push(NodeSpec {
                    id: id.clone(),
                    parent: Some(parent.clone()),
                    branch_prob: probs[k],
                    density,
                });
                next.push((id, density));
                decision_nodes += 1;
            }
        }
        layer = next;
    }
    ScenarioTree::build(specs).expect("generated tree is structurally valid")
}

/// Normal flows of the given scale at every node with t >= 1, zero at the
/// root.
pub fn random_flows<R: Rng>(rng: &mut R, tree: &ScenarioTree<f64>, scale: f64) -> Vec<f64> {
    (0..tree.len())
        .map(|n| {
            if tree.node(n).time == 0 {
                0.0
            } else {
                scale * standard_normal(rng)
            }
        })
        .collect()
}

/// A random VaR, expected-shortfall or mixture spec.
pub fn random_spec<R: Rng>(rng: &mut R) -> RiskMeasureSpec<f64> {
    match rng.gen_range(0..3) {
        0 => RiskMeasureSpec::var(rng.gen_range(0.05..0.95)),
        1 => RiskMeasureSpec::es(rng.gen_range(0.05..0.95)),
        _ => {
            let n = rng.gen_range(2..=4);
            let mut weights: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..1.0)).collect();
            let total: f64 = weights.iter().sum();
            weights.iter_mut().for_each(|w| *w /= total);
            RiskMeasureSpec::mixture(
                weights
                    .into_iter()
                    .map(|w| (rng.gen_range(0.05..0.95), w))
                    .collect(),
            )
        }
    }
}

/// A random valid Gaussian model. With `block_diagonal`, B_{t,s} = 0 for
/// s < t, making the flows independent across periods.
pub fn random_gaussian_model<R: Rng>(
    rng: &mut R,
    dim: usize,
    horizon: usize,
    block_diagonal: bool,
) -> GaussianModel<f64> {
    loop {
        let a: Vec<Vec<f64>> = (0..horizon)
            .map(|_| (0..dim).map(|_| standard_normal(rng)).collect())
            .collect();
        let b: Vec<Vec<Vec<Vec<f64>>>> = (0..horizon)
            .map(|t| {
                (0..=t)
                    .map(|s| {
                        if s == t {
                            // Diagonally dominant, hence well-conditioned.
                            (0..dim)
                                .map(|i| {
                                    (0..dim)
                                        .map(|j| {
                                            let base = 0.4 * standard_normal(rng);
                                            if i == j {
                                                base + rng.gen_range(1.0..2.0)
                                            } else {
                                                base
                                            }
                                        })
                                        .collect()
                                })
                                .collect()
                        } else if block_diagonal {
                            vec![vec![0.0; dim]; dim]
                        } else {
                            (0..dim)
                                .map(|_| (0..dim).map(|_| 0.5 * standard_normal(rng)).collect())
                                .collect()
                        }
                    })
                    .collect()
            })
            .collect();
        let lambda: Vec<Vec<f64>> = (0..horizon)
            .map(|_| (0..dim).map(|_| rng.gen_range(-0.5..0.5)).collect())
            .collect();
        let g: Vec<Vec<f64>> = (0..horizon)
            .map(|_| (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let model = GaussianModel { a, b, lambda, g };
        if model.validate().is_ok()
            && model.g.iter().all(|v| v.iter().map(|x| x * x).sum::<f64>() > 0.09)
        {
            return model;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn trees_valid_and_bounded() {
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        for _ in 0..50 {
            let tree = random_tree(&mut rng, TreeShape::default());
            assert!(tree.validate().passed(), "{:?}", tree.validate());
            let decisions = tree.len() - 1;
            assert!(decisions <= 24, "{decisions} decision nodes");
            assert!(tree.horizon() >= 1 && tree.horizon() <= 4);
        }
    }

    #[test]
    fn deterministic_in_seed() {
        let gen = |seed| {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            let tree = random_tree(&mut rng, TreeShape::default());
            random_flows(&mut rng, &tree, 2.0)
        };
        assert_eq!(gen(5), gen(5));
        assert_ne!(gen(5), gen(6));
    }

    #[test]
    fn gaussian_models_valid() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        for _ in 0..20 {
            let model = random_gaussian_model(&mut rng, 2, 3, false);
            assert!(model.validate().is_ok());
            let block = random_gaussian_model(&mut rng, 2, 3, true);
            assert!(block.b[2][0].iter().flatten().all(|&x| x == 0.0));
        }
    }

    #[test]
    fn specs_valid() {
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        for _ in 0..50 {
            assert!(random_spec(&mut rng).validate().is_ok());
        }
    }
}
