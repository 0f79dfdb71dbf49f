//! Static replicating-portfolio selection on scenario trees: cash-flow
//! matching in both the sum-of-squares and sum-of-roots forms, closed-form
//! terminal-value matching, and the min-expected-max-C criterion with its
//! well-posedness (coercivity) probes.

use rand::Rng as _;
use rand::SeedableRng as _;
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::linalg;
use crate::risk::RiskMeasureSpec;
use crate::scalar::{Real, ABS_TOL};
use crate::tree::{CashflowSet, Measure, NodeId, ScenarioTree};
use crate::valuation::backward_valuation;

/// Horizon above which the min-expected-max-C well-posedness probes refuse
/// to run.
pub const WELLPOSED_HORIZON_GUARD: usize = 6;

/// Gram matrices worse than this are treated as singular.
pub const GRAM_CONDITION_LIMIT: f64 = 1e12;

/// Portfolio selection criteria.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Criterion {
    /// Sum over t of root weighted second moments of the period residual.
    CashflowL2Root,
    /// Sum over t of weighted second moments of the period residual.
    CashflowL2,
    /// Weighted second moment of the terminal (summed) residual.
    TerminalValue,
    /// psi(v) = E_0^Q[max_t C_t] of the residual flows.
    MinExpectedMaxC,
}

#[derive(Debug, Clone)]
pub struct ReplicationProblem<'a, S> {
    pub tree: &'a ScenarioTree<S>,
    pub flows: &'a CashflowSet<S>,
    pub criterion: Criterion,
    /// Weighting measure for the quadratic criteria. MinExpectedMaxC always
    /// uses Q outside and the P-conditional risk measure inside.
    pub measure: Measure,
    pub spec: RiskMeasureSpec<S>,
    /// Seed for the probe directions and restarts.
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct ReplicationOutcome<S> {
    pub v_hat: Vec<S>,
    pub objective: S,
    /// Distinct near-optimal weight vectors, best first.
    pub ties: Vec<Vec<S>>,
    pub warning: Option<String>,
}

fn node_weight<S: Real>(tree: &ScenarioTree<S>, node: NodeId, measure: Measure) -> S {
    tree.cond_prob(tree.root(), node, measure)
}

/// Sum-of-squares cash-flow matching: exact weighted least squares of X^o
/// on the instrument flows over all nodes with t >= 1.
pub fn cashflow_match_l2<S: Real>(
    tree: &ScenarioTree<S>,
    flows: &CashflowSet<S>,
    measure: Measure,
) -> Result<Vec<S>> {
    let ids: Vec<NodeId> = (0..tree.len()).filter(|&n| tree.node(n).time >= 1).collect();
    let w: Vec<S> = ids.iter().map(|&n| node_weight(tree, n, measure)).collect();
    let y: Vec<S> = ids.iter().map(|&n| flows.liability[n]).collect();
    let cols: Vec<Vec<S>> = (0..flows.m)
        .map(|k| ids.iter().map(|&n| flows.instruments[n][k]).collect())
        .collect();
    linalg::weighted_least_squares(&cols, &w, &y)
}

fn cashflow_l2_objective<S: Real>(
    tree: &ScenarioTree<S>,
    flows: &CashflowSet<S>,
    measure: Measure,
    v: &[S],
) -> Result<S> {
    let residual = flows.residual(v)?;
    Ok((0..tree.len())
        .filter(|&n| tree.node(n).time >= 1)
        .map(|n| node_weight(tree, n, measure) * residual[n] * residual[n])
        .sum())
}

fn cashflow_l2root_objective<S: Real>(
    tree: &ScenarioTree<S>,
    flows: &CashflowSet<S>,
    measure: Measure,
    v: &[S],
) -> Result<S> {
    let residual = flows.residual(v)?;
    let mut total = S::zero();
    for t in 1..=tree.horizon() {
        let m2: S = tree
            .layer(t)
            .iter()
            .map(|&n| node_weight(tree, n, measure) * residual[n] * residual[n])
            .sum();
        total = total + m2.sqrt();
    }
    Ok(total)
}

/// Sum-of-roots cash-flow matching: derivative-free minimization seeded at
/// the sum-of-squares solution.
pub fn cashflow_match_l2root<S: Real>(
    tree: &ScenarioTree<S>,
    flows: &CashflowSet<S>,
    measure: Measure,
) -> Result<ReplicationOutcome<S>> {
    let seed = cashflow_match_l2(tree, flows, measure)?;
    let f = |v: &[S]| {
        cashflow_l2root_objective(tree, flows, measure, v).unwrap_or_else(|_| S::infinity())
    };
    let radius = seed.iter().fold(S::one(), |a, &b| a.max(b.abs())) * S::of(2.0);
    let out = crate::optim::multistart_minimize(&f, &seed, radius, 8, 1000);
    Ok(ReplicationOutcome { v_hat: out.argmin, objective: out.min, ties: out.ties, warning: None })
}

/// Terminal-value matching: regress the path sum of X^o on the path sums of
/// the instruments, in closed form through the Gram system.
pub fn terminal_value_match<S: Real>(
    tree: &ScenarioTree<S>,
    flows: &CashflowSet<S>,
    measure: Measure,
) -> Result<Vec<S>> {
    let leaves = tree.leaves();
    let m = flows.m;
    let mut weights = Vec::with_capacity(leaves.len());
    let mut target = Vec::with_capacity(leaves.len());
    let mut sums = vec![Vec::with_capacity(leaves.len()); m];
    for &leaf in leaves {
        weights.push(node_weight(tree, leaf, measure));
        let mut y = S::zero();
        let mut inst = vec![S::zero(); m];
        let mut cur = Some(leaf);
        while let Some(n) = cur {
            if tree.node(n).time >= 1 {
                y = y + flows.liability[n];
                for k in 0..m {
                    inst[k] = inst[k] + flows.instruments[n][k];
                }
            }
            cur = tree.node(n).parent;
        }
        target.push(y);
        for k in 0..m {
            sums[k].push(inst[k]);
        }
    }
    let mut gram = vec![vec![S::zero(); m]; m];
    let mut rhs = vec![S::zero(); m];
    for i in 0..m {
        for j in i..m {
            let g: S = (0..leaves.len()).map(|k| weights[k] * sums[i][k] * sums[j][k]).sum();
            gram[i][j] = g;
            gram[j][i] = g;
        }
        rhs[i] = (0..leaves.len()).map(|k| weights[k] * sums[i][k] * target[k]).sum();
    }
    if m > 0 {
        let cond = linalg::condition_number(&gram);
        if !(cond < S::of(GRAM_CONDITION_LIMIT)) {
            return Err(Error::Degenerate(format!(
                "terminal-value Gram matrix has condition number {cond}; \
                 summed instrument flows are (numerically) dependent"
            )));
        }
    }
    linalg::solve(&gram, &rhs)
}

/// psi(v) = E_0^Q[max_{t in 0..T-1} C_t^v]: the maximum is taken along each
/// scenario path over the node values of C, then Q-averaged.
pub fn psi_objective<S: Real>(
    tree: &ScenarioTree<S>,
    flows: &CashflowSet<S>,
    spec: &RiskMeasureSpec<S>,
    v: &[S],
) -> Result<S> {
    let residual = flows.residual(v)?;
    psi_of_flows(tree, &residual, spec)
}

/// psi of an explicit residual flow vector.
pub fn psi_of_flows<S: Real>(
    tree: &ScenarioTree<S>,
    residual: &[S],
    spec: &RiskMeasureSpec<S>,
) -> Result<S> {
    let result = backward_valuation(tree, residual, spec)?;
    let mut acc = S::zero();
    for &leaf in tree.leaves() {
        let mut best = S::neg_infinity();
        let mut cur = tree.node(leaf).parent;
        while let Some(n) = cur {
            best = best.max(result.c[n]);
            cur = tree.node(n).parent;
        }
        best = best.max(result.c[tree.root()]);
        acc = acc + node_weight(tree, leaf, Measure::Q) * best;
    }
    Ok(acc)
}

/// psi-tilde on the lifted direction w in R^{m+1}: residual flows
/// w^T Z_t with Z_t = (X^o_t, -X^f_t).
pub fn psi_tilde<S: Real>(
    tree: &ScenarioTree<S>,
    flows: &CashflowSet<S>,
    spec: &RiskMeasureSpec<S>,
    w: &[S],
) -> Result<S> {
    psi_of_flows(tree, &lift(tree, flows, w)?, spec)
}

fn lift<S: Real>(tree: &ScenarioTree<S>, flows: &CashflowSet<S>, w: &[S]) -> Result<Vec<S>> {
    if w.len() != flows.m + 1 {
        return Err(Error::Argument(format!(
            "direction has length {}, expected {}",
            w.len(),
            flows.m + 1
        )));
    }
    Ok((0..tree.len())
        .map(|n| {
            let mut x = w[0] * flows.liability[n];
            for k in 0..flows.m {
                x = x - w[k + 1] * flows.instruments[n][k];
            }
            x
        })
        .collect())
}

/// Well-posedness probe report for the min-expected-max-C criterion.
#[derive(Debug, Clone)]
pub struct WellposedReport<S> {
    /// Probe directions along which psi-tilde vanishes.
    pub degenerate_directions: Vec<Vec<S>>,
    /// Human-readable note per degenerate direction.
    pub notes: Vec<String>,
    pub probes: usize,
}

impl<S: Real> WellposedReport<S> {
    /// Directions that break coercivity of the weight search: vanishing
    /// psi-tilde with (numerically) no liability component. A vanishing
    /// direction that loads on the liability (for instance the exact
    /// spanning weights) still leaves the minimization well-posed.
    pub fn coercivity_breaking(&self) -> Vec<&Vec<S>> {
        self.degenerate_directions
            .iter()
            .filter(|w| w[0].abs() <= S::of(1e-9) * linalg::norm2(w))
            .collect()
    }

    pub fn passed(&self) -> bool {
        self.coercivity_breaking().is_empty()
    }
}

/// Probes directions w in R^{m+1} (axes, seeded random unit vectors, and
/// the kernel of the covariance of the path-summed Z) for psi-tilde(w) = 0.
/// A vanishing direction breaks coercivity of the psi minimization; a
/// leaf-constant summed flow (for instance a risk-free instrument) is the
/// canonical offender and is detected exactly.
pub fn check_wellposed<S: Real>(
    tree: &ScenarioTree<S>,
    flows: &CashflowSet<S>,
    spec: &RiskMeasureSpec<S>,
    seed: u64,
) -> Result<WellposedReport<S>> {
    if tree.horizon() > WELLPOSED_HORIZON_GUARD {
        return Err(Error::Guard(format!(
            "well-posedness probes support horizons up to {WELLPOSED_HORIZON_GUARD}, tree has {}",
            tree.horizon()
        )));
    }
    let dim = flows.m + 1;
    let mut probes: Vec<Vec<S>> = Vec::new();
    for i in 0..dim {
        let mut e = vec![S::zero(); dim];
        e[i] = S::one();
        probes.push(e);
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    for _ in 0..32 {
        let mut w: Vec<S> = (0..dim)
            .map(|_| S::of(crate::normal::inv_cdf::<f64>(rng.gen_range(1e-12..1.0 - 1e-12))))
            .collect();
        let n = linalg::norm2(&w);
        if n > S::zero() {
            w.iter_mut().for_each(|x| *x = *x / n);
            probes.push(w);
        }
    }
    // Kernel directions of the covariance of sum_t Z_t: exactly the
    // directions with leaf-constant summed flows.
    let sums = summed_z(tree, flows);
    let pw: Vec<S> = tree
        .leaves()
        .iter()
        .map(|&l| node_weight(tree, l, Measure::P))
        .collect();
    let mean: Vec<S> = (0..dim)
        .map(|i| sums.iter().zip(pw.iter()).map(|(z, &w)| w * z[i]).sum())
        .collect();
    let mut cov = vec![vec![S::zero(); dim]; dim];
    for (z, &w) in sums.iter().zip(pw.iter()) {
        for i in 0..dim {
            for j in 0..dim {
                cov[i][j] = cov[i][j] + w * (z[i] - mean[i]) * (z[j] - mean[j]);
            }
        }
    }
    probes.extend(linalg::kernel_basis(&cov, S::of(1e-12)));

    let mut degenerate = Vec::new();
    let mut notes = Vec::new();
    let count = probes.len();
    for w in probes {
        let lifted = lift(tree, flows, &w)?;
        let scale = lifted.iter().fold(S::one(), |a, &b| a.max(b.abs()));
        let value = psi_of_flows(tree, &lifted, spec)?;
        if value <= scale * S::of(ABS_TOL) {
            let constant_sum = leaf_constant_sum(tree, &lifted);
            notes.push(if constant_sum {
                format!("direction {w:?}: summed residual flow is leaf-constant (risk-free)")
            } else {
                format!("direction {w:?}: psi-tilde vanishes")
            });
            degenerate.push(w);
        }
    }
    Ok(WellposedReport { degenerate_directions: degenerate, notes, probes: count })
}

fn summed_z<S: Real>(tree: &ScenarioTree<S>, flows: &CashflowSet<S>) -> Vec<Vec<S>> {
    tree.leaves()
        .iter()
        .map(|&leaf| {
            let mut z = vec![S::zero(); flows.m + 1];
            let mut cur = Some(leaf);
            while let Some(n) = cur {
                if tree.node(n).time >= 1 {
                    z[0] = z[0] + flows.liability[n];
                    for k in 0..flows.m {
                        z[k + 1] = z[k + 1] - flows.instruments[n][k];
                    }
                }
                cur = tree.node(n).parent;
            }
            z
        })
        .collect()
}

fn leaf_constant_sum<S: Real>(tree: &ScenarioTree<S>, flow: &[S]) -> bool {
    let sums: Vec<S> = tree
        .leaves()
        .iter()
        .map(|&leaf| {
            let mut s = S::zero();
            let mut cur = Some(leaf);
            while let Some(n) = cur {
                if tree.node(n).time >= 1 {
                    s = s + flow[n];
                }
                cur = tree.node(n).parent;
            }
            s
        })
        .collect();
    let scale = sums.iter().fold(S::one(), |a, &b| a.max(b.abs()));
    sums.iter().all(|&s| (s - sums[0]).abs() <= scale * S::of(ABS_TOL))
}

/// Minimizes psi over portfolio weights, refusing when the well-posedness
/// probes report a degenerate direction. Seeded at the terminal-value
/// solution (when available) and at zero.
pub fn minimize_psi<S: Real>(
    tree: &ScenarioTree<S>,
    flows: &CashflowSet<S>,
    spec: &RiskMeasureSpec<S>,
    seed: u64,
) -> Result<ReplicationOutcome<S>> {
    let report = check_wellposed(tree, flows, spec, seed)?;
    if !report.passed() {
        return Err(Error::Degenerate(format!(
            "min-expected-max-C is not coercive: {}",
            report.notes.join("; ")
        )));
    }
    let f = |v: &[S]| psi_objective(tree, flows, spec, v).unwrap_or_else(|_| S::infinity());
    let mut seeds: Vec<Vec<S>> = vec![vec![S::zero(); flows.m]];
    if let Ok(v) = terminal_value_match(tree, flows, Measure::Q) {
        seeds.push(v);
    }
    let mut best: Option<crate::optim::MultiStart<S>> = None;
    for s in &seeds {
        let radius = s.iter().fold(S::one(), |a, &b| a.max(b.abs())) * S::of(2.0);
        let out = crate::optim::multistart_minimize(&f, s, radius, 8, 1000);
        if best.as_ref().map(|b| out.min < b.min).unwrap_or(true) {
            best = Some(out);
        }
    }
    let best = best.expect("at least one seed");

    // Anti-stagnation sweep over the coercivity-bounded region around the
    // best iterate; an improving probe means the local searches stalled.
    let bound = f(&seeds[0]).max(best.min);
    let mut warning = None;
    let radius = best
        .argmin
        .iter()
        .fold(S::one(), |a, &b| a.max(b.abs()))
        * S::of(4.0);
    for k in 0..1000 {
        let u = crate::optim::halton::<S>(k, flows.m);
        let p: Vec<S> = (0..flows.m)
            .map(|i| best.argmin[i] + radius * (S::of(2.0) * u[i] - S::one()))
            .collect();
        let fp = f(&p);
        if fp <= bound && fp < best.min - S::of(1e-10) {
            warning = Some(format!(
                "minimization stagnated: probe {p:?} improves the objective to {fp}"
            ));
            break;
        }
    }
    Ok(ReplicationOutcome {
        v_hat: best.argmin,
        objective: best.min,
        ties: best.ties,
        warning,
    })
}

/// Dispatches a replication problem to its solver.
pub fn solve<S: Real>(problem: &ReplicationProblem<'_, S>) -> Result<ReplicationOutcome<S>> {
    let ReplicationProblem { tree, flows, criterion, measure, spec, seed } = problem;
    match criterion {
        Criterion::CashflowL2 => {
            let v = cashflow_match_l2(tree, flows, *measure)?;
            let objective = cashflow_l2_objective(tree, flows, *measure, &v)?;
            Ok(ReplicationOutcome { ties: vec![v.clone()], v_hat: v, objective, warning: None })
        }
        Criterion::CashflowL2Root => cashflow_match_l2root(tree, flows, *measure),
        Criterion::TerminalValue => {
            let v = terminal_value_match(tree, flows, *measure)?;
            let residual = flows.residual(&v)?;
            let objective = {
                let sums: Vec<S> = tree
                    .leaves()
                    .iter()
                    .map(|&leaf| {
                        let mut s = S::zero();
                        let mut cur = Some(leaf);
                        while let Some(n) = cur {
                            if tree.node(n).time >= 1 {
                                s = s + residual[n];
                            }
                            cur = tree.node(n).parent;
                        }
                        s
                    })
                    .collect();
                tree.leaves()
                    .iter()
                    .zip(sums.iter())
                    .map(|(&l, &s)| node_weight(tree, l, *measure) * s * s)
                    .sum()
            };
            Ok(ReplicationOutcome { ties: vec![v.clone()], v_hat: v, objective, warning: None })
        }
        Criterion::MinExpectedMaxC => minimize_psi(tree, flows, spec, *seed),
    }
}
