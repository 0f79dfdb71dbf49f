//! End-to-end acceptance suite. Each test checks one numbered criterion
//! and prints a single pass line (run with `--nocapture` to see them).

use std::time::Instant;

use rand::{Rng, SeedableRng as _};
use rand_chacha::ChaCha12Rng;

use liabval::gaussian::{self, GaussianModel};
use liabval::iid::{self, PeriodDist};
use liabval::linalg;
use liabval::normal;
use liabval::replication::{self, psi_objective, psi_tilde};
use liabval::risk::{Discrete, RiskMeasureSpec};
use liabval::scalar::ABS_TOL;
use liabval::sim::{self, TreeShape};
use liabval::tree::{CashflowSet, Measure, ScenarioTree};
use liabval::valuation::{
    backward_valuation, enumerate_optimal_stopping, optimal_default_time, stopping_value,
    StoppingObjective,
};

fn pass(n: usize, what: &str) {
    println!("criterion {n}: pass - {what}");
}

fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
    normal::inv_cdf(rng.gen_range(1e-12..1.0 - 1e-12))
}

fn suite_trees(seed: u64, count: usize) -> Vec<(ScenarioTree<f64>, Vec<f64>, RiskMeasureSpec<f64>)> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let tree = sim::random_tree(&mut rng, TreeShape::default());
            let flows = sim::random_flows(&mut rng, &tree, 2.0);
            let spec = sim::random_spec(&mut rng);
            (tree, flows, spec)
        })
        .collect()
}

fn rel_gap(a: f64, b: f64) -> f64 {
    (a - b).abs() / 1.0f64.max(a.abs()).max(b.abs())
}

#[test]
fn criterion_01_stopping_oracle_equivalence() {
    let start = Instant::now();
    for (tree, flows, spec) in suite_trees(101, 200) {
        let result = backward_valuation(&tree, &flows, &spec).unwrap();
        for n in 0..tree.len() {
            if tree.node(n).children.is_empty() {
                continue;
            }
            let e = enumerate_optimal_stopping(&tree, n, &result.r, &flows).unwrap();
            assert!(
                rel_gap(e.sup_owner, result.c[n]) < 1e-10,
                "C mismatch at node {n}: {} vs {}",
                e.sup_owner,
                result.c[n]
            );
            assert!(
                rel_gap(e.inf_policyholder, result.v[n]) < 1e-10,
                "V mismatch at node {n}: {} vs {}",
                e.inf_policyholder,
                result.v[n]
            );
        }
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 60, "enumeration suite took {elapsed:?}");
    pass(1, "backward recursion equals stopping-time enumeration on 200 trees");
}

#[test]
fn criterion_02_optimal_default_time() {
    for (tree, flows, spec) in suite_trees(101, 200) {
        let result = backward_valuation(&tree, &flows, &spec).unwrap();
        for n in 0..tree.len() {
            if tree.node(n).children.is_empty() {
                continue;
            }
            let tau = optimal_default_time(&tree, &result, &flows, n);
            let owner = stopping_value(&tree, &result.r, &flows, &tau, StoppingObjective::Owner)
                .unwrap();
            let policy =
                stopping_value(&tree, &result.r, &flows, &tau, StoppingObjective::Policyholder)
                    .unwrap();
            assert!(rel_gap(owner, result.c[n]) < 1e-10, "owner value off at {n}");
            assert!(rel_gap(policy, result.v[n]) < 1e-10, "policyholder value off at {n}");
            let e = enumerate_optimal_stopping(&tree, n, &result.r, &flows).unwrap();
            assert!(e.sup_owner <= owner + 1e-10, "a stopping rule beats tau* for the owner");
            assert!(
                e.inf_policyholder >= policy - 1e-10,
                "a stopping rule beats tau* for the policyholder"
            );
        }
    }
    pass(2, "tau* attains the extremal stopping values on 200 trees");
}

#[test]
fn criterion_03_submartingale_bound() {
    for (tree, flows, spec) in suite_trees(101, 200) {
        let result = backward_valuation(&tree, &flows, &spec).unwrap();
        for n in 0..tree.len() {
            if tree.node(n).children.is_empty() {
                continue;
            }
            let here = result.cumulative_value(&tree, &flows, n);
            let next = tree.expect_children(n, Measure::Q, |c| {
                result.cumulative_value(&tree, &flows, c)
            });
            assert!(next >= here - ABS_TOL, "V^S drops in Q-expectation at node {n}");
        }
        // Equivalent statement at the root: L_0 <= E_0^Q[sum X].
        let l0 = result.v[tree.root()];
        let price = tree.price_cashflow(&flows, tree.root()).unwrap();
        assert!(l0 <= price + ABS_TOL, "L0 = {l0} exceeds E^Q[sum X] = {price}");
    }
    pass(3, "V^S is a Q-submartingale and L0 <= E^Q[sum X] on 200 trees");
}

#[test]
fn criterion_04_risk_measure_axioms() {
    let mut rng = ChaCha12Rng::seed_from_u64(404);
    let mut specs = vec![RiskMeasureSpec::var(0.3), RiskMeasureSpec::es(0.25)];
    for _ in 0..5 {
        let k = rng.gen_range(2..5);
        let mut atoms: Vec<(f64, f64)> =
            (0..k).map(|_| (rng.gen_range(0.05..0.95), rng.gen_range(0.1..1.0))).collect();
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        for a in &mut atoms {
            a.1 /= total;
        }
        specs.push(RiskMeasureSpec::mixture(atoms));
    }
    for _ in 0..100 {
        let k = rng.gen_range(2..7);
        let mut probs: Vec<f64> = (0..k).map(|_| rng.gen_range(0.05..1.0)).collect();
        let total: f64 = probs.iter().sum();
        for p in &mut probs {
            *p /= total;
        }
        let values: Vec<f64> = (0..k).map(|_| 4.0 * standard_normal(&mut rng)).collect();
        let shift = standard_normal(&mut rng);
        let factor = rng.gen_range(0.1..3.0);
        let bumps: Vec<f64> = (0..k).map(|_| rng.gen_range(0.0..1.0)).collect();

        let dist = |vals: &[f64]| {
            Discrete::new(probs.iter().copied().zip(vals.iter().copied()).map(|(p, v)| (p, v)).collect())
                .unwrap()
        };
        for spec in &specs {
            let base = dist(&values).rho(spec).unwrap();
            let shifted: Vec<f64> = values.iter().map(|v| v + shift).collect();
            assert!((dist(&shifted).rho(spec).unwrap() - (base + shift)).abs() < ABS_TOL);
            let scaled: Vec<f64> = values.iter().map(|v| factor * v).collect();
            assert!((dist(&scaled).rho(spec).unwrap() - factor * base).abs() < ABS_TOL);
            let bumped: Vec<f64> = values.iter().zip(&bumps).map(|(v, b)| v + b).collect();
            assert!(dist(&bumped).rho(spec).unwrap() >= base - ABS_TOL);
            let zero = vec![0.0; k];
            assert!(dist(&zero).rho(spec).unwrap().abs() < ABS_TOL);
        }
    }
    pass(4, "translation, homogeneity, monotonicity and normalization hold exactly");
}

fn path_sum(tree: &ScenarioTree<f64>, flows: &[f64], leaf: usize) -> f64 {
    let mut acc = 0.0;
    let mut cur = Some(leaf);
    while let Some(n) = cur {
        if tree.node(n).time >= 1 {
            acc += flows[n];
        }
        cur = tree.node(n).parent;
    }
    acc
}

#[test]
fn criterion_05_constant_sum_degeneracy() {
    let mut rng = ChaCha12Rng::seed_from_u64(505);
    for _ in 0..50 {
        let tree = sim::random_tree(&mut rng, TreeShape::default());
        let mut flows = sim::random_flows(&mut rng, &tree, 2.0);
        let k = rng.gen_range(-3.0..3.0);
        for &leaf in tree.leaves() {
            flows[leaf] += k - path_sum(&tree, &flows, leaf);
        }
        let spec = sim::random_spec(&mut rng);
        let result = backward_valuation(&tree, &flows, &spec).unwrap();
        for n in 0..tree.len() {
            assert!(result.c[n].abs() < ABS_TOL, "C nonzero on a constant-sum tree");
        }
        assert!((result.v[tree.root()] - k).abs() < 1e-12 * 1.0f64.max(k.abs()));
    }
    // Converse under ES: vanishing C everywhere forces a leaf-constant sum.
    let mut nondegenerate = 0;
    for _ in 0..50 {
        let tree = sim::random_tree(&mut rng, TreeShape::default());
        let flows = sim::random_flows(&mut rng, &tree, 2.0);
        let spec = RiskMeasureSpec::es(rng.gen_range(0.1..0.9));
        let result = backward_valuation(&tree, &flows, &spec).unwrap();
        if result.c.iter().all(|c| c.abs() < ABS_TOL) {
            let sums: Vec<f64> =
                tree.leaves().iter().map(|&l| path_sum(&tree, &flows, l)).collect();
            for s in &sums {
                assert!((s - sums[0]).abs() < 1e-9, "zero C with non-constant leaf sums");
            }
        } else {
            nondegenerate += 1;
        }
    }
    assert!(nondegenerate > 0, "converse check never exercised");
    pass(5, "leaf-constant sums give C = 0 and V0 = K; the ES converse holds");
}

#[test]
fn criterion_06_translation_property() {
    let mut rng = ChaCha12Rng::seed_from_u64(606);
    for _ in 0..50 {
        let tree = sim::random_tree(&mut rng, TreeShape::default());
        let x = sim::random_flows(&mut rng, &tree, 2.0);
        let spec = sim::random_spec(&mut rng);
        let b: Vec<f64> = (0..=tree.horizon()).map(|_| rng.gen_range(-2.0..2.0)).collect();

        let base = backward_valuation(&tree, &x, &spec).unwrap();
        let shifted_x: Vec<f64> =
            (0..tree.len()).map(|n| x[n] - b[tree.node(n).time]).collect();
        let shifted = backward_valuation(&tree, &shifted_x, &spec).unwrap();
        for n in 0..tree.len() {
            assert!(rel_gap(base.c[n], shifted.c[n]) < 1e-10, "C changed under a shift");
        }
        // L0 with X^r = b against L0 with X^r = 0.
        let x_r: Vec<f64> =
            (0..tree.len()).map(|n| if tree.node(n).time >= 1 { b[tree.node(n).time] } else { 0.0 })
                .collect();
        let l0_base = base.v[tree.root()];
        let l0_shifted =
            tree.price_cashflow(&x_r, tree.root()).unwrap() + shifted.v[tree.root()];
        assert!(rel_gap(l0_base, l0_shifted) < 1e-10, "L0 changed under a deterministic shift");
    }
    pass(6, "deterministic shifts of the replication flow leave C and L0 unchanged");
}

fn independent_periods(model: &GaussianModel<f64>) -> Vec<PeriodDist<f64>> {
    let dim = model.dim();
    (0..model.horizon())
        .map(|t| {
            let diag = &model.b[t][t];
            let w: Vec<f64> = (0..dim)
                .map(|col| (0..dim).map(|row| diag[row][col] * model.g[t][row]).sum())
                .collect();
            PeriodDist::Gaussian {
                mean: model.g[t].iter().zip(&model.a[t]).map(|(g, a)| g * a).sum(),
                sigma: w.iter().map(|x| x * x).sum::<f64>().sqrt(),
                shift: w.iter().zip(&model.lambda[t]).map(|(w, l)| w * l).sum(),
            }
        })
        .collect()
}

#[test]
fn criterion_07_gaussian_iid_and_monte_carlo() {
    let start = Instant::now();
    let mut rng = ChaCha12Rng::seed_from_u64(707);
    for i in 0..50 {
        let dim = 1 + i % 3;
        let horizon = 1 + i % 4;
        let model = sim::random_gaussian_model(&mut rng, dim, horizon, true);
        let spec = sim::random_spec(&mut rng);
        let out = gaussian::gaussian_valuation(&model, &spec).unwrap();
        let closed = iid::iid_closed_form(&independent_periods(&model), &spec).unwrap();
        for t in 0..=horizon {
            let tail: f64 = out.mean_flows_q[t..].iter().sum();
            assert!(rel_gap(tail + out.k_q[t], closed.v[t]) < 1e-10, "V_t mismatch");
            if t < horizon {
                assert!(rel_gap(out.c[t], closed.c[t]) < 1e-10, "C_t mismatch");
                assert!(
                    rel_gap(tail + out.k_q[t] + out.c[t], closed.r[t]) < 1e-10,
                    "R_t mismatch"
                );
            }
        }
    }

    // General models against a Q-measure Monte Carlo of the first
    // recursion step and of the flow expectations.
    let paths = 1_000_000usize;
    for i in 0..20 {
        let dim = 1 + i % 3;
        let horizon = 1 + i % 3;
        let model = sim::random_gaussian_model(&mut rng, dim, horizon, false);
        let spec = sim::random_spec(&mut rng);
        let out = gaussian::gaussian_valuation(&model, &spec).unwrap();
        let r0 = out.mean_flows_q.iter().sum::<f64>() + out.k_q[0] + out.c[0];

        let mut sum = (0.0, 0.0);
        let mut short = (0.0, 0.0);
        for _ in 0..paths {
            let eps: Vec<Vec<f64>> = (0..horizon)
                .map(|t| {
                    (0..dim).map(|j| model.lambda[t][j] + standard_normal(&mut rng)).collect()
                })
                .collect();
            let flows = model.flows_from_innovations(&eps);
            let total: f64 = flows.iter().sum();
            sum.0 += total;
            sum.1 += total * total;

            // V_1 from the closed form, conditionally on eps_1.
            let mut v1 = out.k_q[1];
            for s in 1..horizon {
                let shift = model.measure_shift(1, s + 1).unwrap();
                let cond: f64 = (0..dim)
                    .map(|j| {
                        model.g[s][j]
                            * (model.a[s][j]
                                + shift[j]
                                + (0..dim).map(|k| model.b[s][0][j][k] * eps[0][k]).sum::<f64>())
                    })
                    .sum();
                v1 += cond;
            }
            let gap = (r0 - flows[0] - v1).max(0.0);
            short.0 += gap;
            short.1 += gap * gap;
        }
        let n = paths as f64;
        let mean = sum.0 / n;
        let se = ((sum.1 / n - mean * mean) / n).sqrt();
        let target: f64 = out.mean_flows_q.iter().sum();
        assert!(
            (mean - target).abs() <= 3.0 * se + 1e-9,
            "E^Q[sum X] off: mc {mean} vs {target} (se {se})"
        );
        let c_mean = short.0 / n;
        let c_se = ((short.1 / n - c_mean * c_mean) / n).sqrt();
        assert!(
            (c_mean - out.c[0]).abs() <= 3.0 * c_se + 1e-9,
            "C_0 off: mc {c_mean} vs {} (se {c_se})",
            out.c[0]
        );
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 300, "cross-check suite took {elapsed:?}");
    pass(7, "block-diagonal models match the iid closed form; general models match MC");
}

#[test]
fn criterion_08_k_identity() {
    let mut rng = ChaCha12Rng::seed_from_u64(808);
    for i in 0..100 {
        let dim = 1 + i % 3;
        let horizon = 1 + i % 4;
        let model = sim::random_gaussian_model(&mut rng, dim, horizon, i % 2 == 0);
        let spec = sim::random_spec(&mut rng);
        let out = gaussian::gaussian_valuation(&model, &spec).unwrap();
        for t in 0..=horizon {
            let delta_tail: f64 = out.schedule.delta[t..].iter().sum();
            let gap = (out.k_p[t] - out.k_q[t]) - delta_tail;
            let scale = 1.0f64.max(out.k_p[t].abs()).max(out.k_q[t].abs());
            assert!(gap.abs() < 1e-12 * scale.max(1.0) + 1e-12, "K decompositions disagree at {t}");
        }
    }
    pass(8, "K^Q and K^P decompositions of V agree on 100 models");
}

/// Least-squares oracle through the eigendecomposition of the Gram matrix,
/// an independent code path from the pivoted solver used in production.
fn eigen_least_squares(cols: &[Vec<f64>], w: &[f64], y: &[f64]) -> Option<Vec<f64>> {
    let m = cols.len();
    let mut gram = vec![vec![0.0; m]; m];
    let mut rhs = vec![0.0; m];
    for i in 0..m {
        for j in 0..m {
            gram[i][j] = (0..y.len()).map(|k| w[k] * cols[i][k] * cols[j][k]).sum();
        }
        rhs[i] = (0..y.len()).map(|k| w[k] * cols[i][k] * y[k]).sum();
    }
    let (eigs, vecs) = linalg::sym_eigen(&gram);
    let max_eig = eigs.iter().cloned().fold(0.0f64, f64::max);
    let mut sol = vec![0.0; m];
    for (idx, &e) in eigs.iter().enumerate() {
        if e.abs() <= 1e-12 * max_eig {
            return None;
        }
        let proj: f64 = (0..m).map(|i| vecs[i][idx] * rhs[i]).sum();
        for i in 0..m {
            sol[i] += proj / e * vecs[i][idx];
        }
    }
    Some(sol)
}

fn random_instrument_tree(
    rng: &mut ChaCha12Rng,
    m: usize,
    shape: TreeShape,
) -> (ScenarioTree<f64>, CashflowSet<f64>) {
    let tree = sim::random_tree(rng, shape);
    let instruments: Vec<Vec<f64>> = (0..m)
        .map(|_| sim::random_flows(rng, &tree, 1.0))
        .collect();
    let noise = sim::random_flows(rng, &tree, 0.3);
    let liability: Vec<f64> = (0..tree.len())
        .map(|n| {
            let mut x = noise[n];
            for inst in &instruments {
                x += rng.gen_range(0.0..0.1) + inst[n] * 0.8;
            }
            if tree.node(n).time == 0 {
                0.0
            } else {
                x
            }
        })
        .collect();
    let per_node: Vec<Vec<f64>> =
        (0..tree.len()).map(|n| instruments.iter().map(|inst| inst[n]).collect()).collect();
    let flows = CashflowSet::new(&tree, liability, per_node, m).unwrap();
    (tree, flows)
}

#[test]
fn criterion_09_replication_closed_forms() {
    let mut rng = ChaCha12Rng::seed_from_u64(909);

    // terminal_value_match against the eigendecomposition oracle.
    let mut checked = 0;
    while checked < 20 {
        let (tree, flows) = random_instrument_tree(&mut rng, 2, TreeShape::default());
        let v = match replication::terminal_value_match(&tree, &flows, Measure::Q) {
            Ok(v) => v,
            Err(_) => continue,
        };
        let leaves = tree.leaves();
        let cols: Vec<Vec<f64>> = (0..flows.m)
            .map(|k| {
                leaves
                    .iter()
                    .map(|&l| {
                        let mut acc = 0.0;
                        let mut cur = Some(l);
                        while let Some(n) = cur {
                            if tree.node(n).time >= 1 {
                                acc += flows.instruments[n][k];
                            }
                            cur = tree.node(n).parent;
                        }
                        acc
                    })
                    .collect()
            })
            .collect();
        let y: Vec<f64> = leaves
            .iter()
            .map(|&l| {
                let mut acc = 0.0;
                let mut cur = Some(l);
                while let Some(n) = cur {
                    if tree.node(n).time >= 1 {
                        acc += flows.liability[n];
                    }
                    cur = tree.node(n).parent;
                }
                acc
            })
            .collect();
        let w: Vec<f64> =
            leaves.iter().map(|&l| tree.cond_prob(tree.root(), l, Measure::Q)).collect();
        let oracle = match eigen_least_squares(&cols, &w, &y) {
            Some(o) => o,
            None => continue,
        };
        for k in 0..flows.m {
            assert!(rel_gap(v[k], oracle[k]) < 1e-10, "terminal match differs from oracle");
        }
        checked += 1;
    }

    // Zero-coupon bonds under P recover the expected liability per period.
    for _ in 0..20 {
        let tree = sim::random_tree(&mut rng, TreeShape::default());
        let horizon = tree.horizon();
        let liability: Vec<f64> = sim::random_flows(&mut rng, &tree, 2.0);
        let per_node: Vec<Vec<f64>> = (0..tree.len())
            .map(|n| {
                (1..=horizon)
                    .map(|t| if tree.node(n).time == t { 1.0 } else { 0.0 })
                    .collect()
            })
            .collect();
        let flows = CashflowSet::new(&tree, liability.clone(), per_node, horizon).unwrap();
        let v = replication::cashflow_match_l2(&tree, &flows, Measure::P).unwrap();
        for t in 1..=horizon {
            let expected: f64 = tree
                .layer(t)
                .iter()
                .map(|&n| tree.cond_prob(tree.root(), n, Measure::P) * liability[n])
                .sum();
            assert!(rel_gap(v[t - 1], expected) < 1e-10, "ZCB match is not E^P[X_t]");
        }
    }

    // minimize_psi against a 1e-3 grid search.
    let mut done = 0;
    let mut attempt = 0u64;
    while done < 20 {
        attempt += 1;
        let m = if done < 12 { 1 } else { 2 };
        let mut local = ChaCha12Rng::seed_from_u64(909_000 + attempt);
        let shape = TreeShape { max_horizon: 2, max_branching: 2, max_decision_nodes: 5 };
        let (tree, flows) = random_instrument_tree(&mut local, m, shape);
        let spec = RiskMeasureSpec::es(local.gen_range(0.15..0.5));
        if !replication::check_wellposed(&tree, &flows, &spec, 1).map(|r| r.passed()).unwrap_or(false)
        {
            continue;
        }
        let out = match replication::minimize_psi(&tree, &flows, &spec, 1) {
            Ok(o) => o,
            Err(_) => continue,
        };
        let f = |v: &[f64]| psi_objective(&tree, &flows, &spec, v).unwrap();

        // Coarse pass at 0.05 over [-3, 3]^m, then 1e-3 refinement around
        // each candidate basin.
        let coarse = grid_min(&f, &vec![0.0; m], 3.0, 0.05);
        let fine_a = grid_min(&f, &coarse.1, 0.06, 1e-3);
        let fine_b = grid_min(&f, &out.v_hat, 0.06, 1e-3);
        let fine = if fine_a.0 <= fine_b.0 { fine_a } else { fine_b };
        assert!(
            (out.objective - fine.0).abs() < 1e-6,
            "psi objective {} vs grid {}",
            out.objective,
            fine.0
        );
        for k in 0..m {
            assert!(
                (out.v_hat[k] - fine.1[k]).abs() < 2e-3,
                "psi argmin {:?} vs grid {:?}",
                out.v_hat,
                fine.1
            );
        }
        done += 1;
    }
    pass(9, "terminal, cashflow and psi criteria match their oracles");
}

fn grid_min(f: &dyn Fn(&[f64]) -> f64, center: &[f64], half: f64, step: f64) -> (f64, Vec<f64>) {
    let steps = (2.0 * half / step).round() as usize;
    let m = center.len();
    let mut best = (f64::INFINITY, center.to_vec());
    let mut idx = vec![0usize; m];
    loop {
        let p: Vec<f64> =
            (0..m).map(|i| center[i] - half + step * idx[i] as f64).collect();
        let val = f(&p);
        if val < best.0 {
            best = (val, p);
        }
        let mut carry = 0;
        loop {
            if carry == m {
                return best;
            }
            idx[carry] += 1;
            if idx[carry] <= steps {
                break;
            }
            idx[carry] = 0;
            carry += 1;
        }
    }
}

#[test]
fn criterion_10_degeneracy_detection() {
    let mut rng = ChaCha12Rng::seed_from_u64(1010);
    for case in 0..50 {
        let (tree, base) = random_instrument_tree(&mut rng, 1, TreeShape::default());
        // Inject a risk-free instrument paying 1 every period.
        let per_node: Vec<Vec<f64>> = (0..tree.len())
            .map(|n| {
                vec![base.instruments[n][0], if tree.node(n).time >= 1 { 1.0 } else { 0.0 }]
            })
            .collect();
        let flows = CashflowSet::new(&tree, base.liability.clone(), per_node, 2).unwrap();
        let spec = sim::random_spec(&mut rng);
        let report = replication::check_wellposed(&tree, &flows, &spec, case).unwrap();
        assert!(!report.passed(), "risk-free instrument not flagged in case {case}");
        assert!(!report.degenerate_directions.is_empty());

        // Positive homogeneity of the lifted objective.
        let w: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0f64..1.0)).collect();
        let base_val = psi_tilde(&tree, &flows, &spec, &w).unwrap();
        for lambda in [0.5, 2.0, 10.0] {
            let scaled: Vec<f64> = w.iter().map(|x| lambda * x).collect();
            let val = psi_tilde(&tree, &flows, &spec, &scaled).unwrap();
            assert!(
                (val - lambda * base_val).abs() < 1e-10 * 1.0f64.max(base_val.abs() * lambda),
                "psi-tilde is not positively homogeneous"
            );
        }
    }
    pass(10, "risk-free injection is flagged in 50/50 cases; psi-tilde is homogeneous");
}

mod cli {
    use std::path::{Path, PathBuf};
    use std::process::Command;

    pub fn fixture(name: &str) -> PathBuf {
        Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
    }

    pub fn run(config: &Path, out: &Path, extra: &[&str]) -> std::process::Output {
        Command::new(env!("CARGO_BIN_EXE_liabval"))
            .arg("run")
            .arg("--config")
            .arg(config)
            .arg("--output-dir")
            .arg(out)
            .args(extra)
            .output()
            .expect("binary runs")
    }

    pub fn write_config(dir: &Path, body: &str) -> PathBuf {
        let path = dir.join("config.json");
        std::fs::write(&path, body).unwrap();
        path
    }
}

#[test]
fn criterion_11_cli_fixtures() {
    let dir = tempfile::tempdir().unwrap();
    let tree_csv = cli::fixture("two_leaf.csv");
    let model_json = cli::fixture("one_period_model.json");

    // Two-leaf fixture, u = 0.4.
    let cfg = cli::write_config(
        dir.path(),
        &format!(
            r#"{{"engine": "tree", "tree_csv": {:?}, "risk_measure": {{"kind": "var", "u": 0.4}}, "seed": 7}}"#,
            tree_csv
        ),
    );
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    std::fs::create_dir_all(&out_a).unwrap();
    std::fs::create_dir_all(&out_b).unwrap();
    assert!(cli::run(&cfg, &out_a, &[]).status.success());
    assert!(cli::run(&cfg, &out_b, &[]).status.success());
    let report_a = std::fs::read(out_a.join("valuation.json")).unwrap();
    let report_b = std::fs::read(out_b.join("valuation.json")).unwrap();
    assert_eq!(report_a, report_b, "tree reports are not byte-identical");
    let parsed: serde_json::Value = serde_json::from_slice(&report_a).unwrap();
    assert_eq!(parsed["summary"]["V0"], 1.0);
    assert_eq!(parsed["summary"]["C0"], 1.0);
    assert_eq!(parsed["summary"]["R0"], 2.0);

    // u = 0.6 zeroes everything.
    let cfg6 = cli::write_config(
        &out_a,
        &format!(
            r#"{{"engine": "tree", "tree_csv": {:?}, "risk_measure": {{"kind": "var", "u": 0.6}}, "seed": 7}}"#,
            tree_csv
        ),
    );
    let run6 = cli::run(&cfg6, &out_a, &[]);
    assert!(run6.status.success());
    let parsed6: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out_a.join("valuation.json")).unwrap()).unwrap();
    assert_eq!(parsed6["summary"]["V0"], 0.0);
    assert_eq!(parsed6["summary"]["C0"], 0.0);
    assert_eq!(parsed6["summary"]["R0"], 0.0);

    // One-period Gaussian fixture against Monte Carlo, byte-identical reruns.
    let cfg_g = cli::write_config(
        &out_b,
        &format!(
            r#"{{"engine": "gaussian", "model_json": {:?}, "risk_measure": {{"kind": "var", "u": 0.01}}, "seed": 7}}"#,
            model_json
        ),
    );
    let out_c = dir.path().join("c");
    let out_d = dir.path().join("d");
    std::fs::create_dir_all(&out_c).unwrap();
    std::fs::create_dir_all(&out_d).unwrap();
    assert!(cli::run(&cfg_g, &out_c, &[]).status.success());
    assert!(cli::run(&cfg_g, &out_d, &[]).status.success());
    let gauss_a = std::fs::read(out_c.join("valuation.json")).unwrap();
    let gauss_b = std::fs::read(out_d.join("valuation.json")).unwrap();
    assert_eq!(gauss_a, gauss_b, "gaussian reports are not byte-identical");
    let parsed_g: serde_json::Value = serde_json::from_slice(&gauss_a).unwrap();
    let v0 = parsed_g["summary"]["V0"].as_f64().unwrap();

    let r0 = normal::inv_cdf(0.99);
    let mut rng = ChaCha12Rng::seed_from_u64(1111);
    let paths = 1_000_000usize;
    let mut acc = (0.0, 0.0);
    for _ in 0..paths {
        let gap = (r0 - standard_normal(&mut rng)).max(0.0);
        acc.0 += gap;
        acc.1 += gap * gap;
    }
    let n = paths as f64;
    let c_mc = acc.0 / n;
    let se = ((acc.1 / n - c_mc * c_mc) / n).sqrt();
    let v_mc = r0 - c_mc;
    assert!(
        (v0 - v_mc).abs() <= (3.0 * se).max(1e-4),
        "V0 {v0} vs MC {v_mc} (se {se})"
    );
    pass(11, "worked fixtures reproduce byte-identically and match MC");
}
