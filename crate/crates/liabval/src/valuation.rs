//! The coupled backward recursions for the residual liability value V_t,
//! the reference-undertaking value C_t and the capital requirement R_t,
//! together with optimal default times, stopped-cash-flow pricing, the
//! brute-force stopping-time oracle, liability values and cost-of-capital
//! rates.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::risk::{self, RiskMeasureSpec};
use crate::scalar::{Real, ABS_TOL};
use crate::tree::{Measure, NodeId, ScenarioTree};

/// Largest number of decision nodes the stopping-time enumeration accepts.
pub const ENUMERATION_GUARD: usize = 24;

/// Per-node output of the backward recursion.
#[derive(Debug, Clone)]
pub struct ValuationResult<S> {
    /// Residual liability value V_t, indexed by node.
    pub v: Vec<S>,
    /// Reference-undertaking value C_t.
    pub c: Vec<S>,
    /// Capital requirement R_t = rho_t(-X_{t+1} - V_{t+1}); zero at leaves.
    pub r: Vec<S>,
    /// Whether R_{t-1} - X_t - V_t < 0 at this node (t >= 1).
    pub default_flag: Vec<bool>,
}

impl<S: Real> ValuationResult<S> {
    /// Cumulative residual value V^S_t = sum_{s<=t} X_s + V_t at a node,
    /// given the residual flows.
    pub fn cumulative_value(&self, tree: &ScenarioTree<S>, x: &[S], node: NodeId) -> S {
        let mut acc = self.v[node];
        let mut cur = Some(node);
        while let Some(n) = cur {
            if tree.node(n).time >= 1 {
                acc = acc + x[n];
            }
            cur = tree.node(n).parent;
        }
        acc
    }
}

fn check_flows<S: Real>(tree: &ScenarioTree<S>, x: &[S]) -> Result<()> {
    if x.len() != tree.len() {
        return Err(Error::Data(format!(
            "flow vector has length {}, expected {}",
            x.len(),
            tree.len()
        )));
    }
    Ok(())
}

/// Solves the backward recursion leaf-to-root:
/// R_t = rho_t(-X_{t+1} - V_{t+1}), C_t = E_t^Q[(R_t - X_{t+1} - V_{t+1})_+],
/// V_t = R_t - C_t, with V_T = C_T = R_T = 0.
pub fn backward_valuation<S: Real>(
    tree: &ScenarioTree<S>,
    x: &[S],
    spec: &RiskMeasureSpec<S>,
) -> Result<ValuationResult<S>> {
    check_flows(tree, x)?;
    spec.validate()?;
    let n = tree.len();
    let mut v = vec![S::zero(); n];
    let mut c = vec![S::zero(); n];
    let mut r = vec![S::zero(); n];

    // Child-facing variable Y = X_{t+1} + V_{t+1}, filled layer by layer.
    let mut y = vec![S::zero(); n];
    for t in (0..tree.horizon()).rev() {
        for &id in tree.layer(t + 1) {
            y[id] = x[id] + v[id];
        }
        for &id in tree.layer(t) {
            let req = risk::rho(tree, id, &y, spec)?;
            let cap = tree.expect_children(id, Measure::Q, |ch| (req - y[ch]).max(S::zero()));
            r[id] = req;
            c[id] = cap;
            v[id] = req - cap;
        }
    }

    let mut default_flag = vec![false; n];
    for (id, node) in tree.nodes().iter().enumerate() {
        if let Some(p) = node.parent {
            default_flag[id] = r[p] - x[id] - v[id] < S::zero();
        }
    }
    Ok(ValuationResult { v, c, r, default_flag })
}

/// A stopping time on the subtree of `start`, stored as the default-time
/// label of each scenario path (leaf).
#[derive(Debug, Clone)]
pub struct StoppingTime {
    pub start: NodeId,
    /// leaf -> tau in {t+1, ..., T+1}.
    pub tau: BTreeMap<NodeId, usize>,
}

/// Side of the stopped cash flow being priced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StoppingObjective {
    Owner,
    Policyholder,
}

/// The optimal default times of the recursion: first s with
/// R_{s-1} - X_s - V_s < 0, else T + 1. Ties (= 0) mean continue.
pub fn optimal_default_time<S: Real>(
    tree: &ScenarioTree<S>,
    result: &ValuationResult<S>,
    x: &[S],
    start: NodeId,
) -> StoppingTime {
    let t0 = tree.node(start).time;
    let mut tau = BTreeMap::new();
    for leaf in tree.descendants_at(start, tree.horizon()) {
        // Path from start down to leaf.
        let mut path = Vec::new();
        let mut cur = leaf;
        while cur != start {
            path.push(cur);
            cur = tree.node(cur).parent.expect("leaf below start");
        }
        path.reverse();
        let mut label = tree.horizon() + 1;
        for (k, &node) in path.iter().enumerate() {
            let s = t0 + k + 1;
            let parent = if k == 0 { start } else { path[k - 1] };
            if result.r[parent] - x[node] - result.v[node] < S::zero() {
                label = s;
                break;
            }
        }
        tau.insert(leaf, label);
    }
    StoppingTime { start, tau }
}

fn check_adapted<S: Real>(tree: &ScenarioTree<S>, stopping: &StoppingTime) -> Result<()> {
    let start = stopping.start;
    let t0 = tree.node(start).time;
    for u in t0 + 1..=tree.horizon() {
        for w in tree.descendants_at(start, u) {
            let leaves = tree.descendants_at(w, tree.horizon());
            let stopped_here: Vec<bool> = leaves
                .iter()
                .map(|l| {
                    stopping
                        .tau
                        .get(l)
                        .map(|&tau| tau == u)
                        .unwrap_or(false)
                })
                .collect();
            if stopped_here.iter().any(|&b| b) && !stopped_here.iter().all(|&b| b) {
                return Err(Error::Measurability(format!(
                    "stopping decision at time {u} differs across indistinguishable histories under node '{}'",
                    tree.node(w).id
                )));
            }
        }
    }
    for leaf in tree.descendants_at(start, tree.horizon()) {
        match stopping.tau.get(&leaf) {
            Some(&tau) if tau > t0 && tau <= tree.horizon() + 1 => {}
            Some(&tau) => {
                return Err(Error::Argument(format!(
                    "tau = {tau} outside {{{}..{}}}",
                    t0 + 1,
                    tree.horizon() + 1
                )))
            }
            None => {
                return Err(Error::Data(format!(
                    "no stopping label for leaf '{}'",
                    tree.node(leaf).id
                )))
            }
        }
    }
    Ok(())
}

/// Exact Q-price at `start` of the stopped cumulative cash flow:
/// owner side sum_{s=t+1}^{tau-1} (R_{s-1} - R_s - X_s), policyholder side
/// sum_{s=t+1}^{tau-1} X_s + R_{tau-1}.
pub fn stopping_value<S: Real>(
    tree: &ScenarioTree<S>,
    r: &[S],
    x: &[S],
    stopping: &StoppingTime,
    objective: StoppingObjective,
) -> Result<S> {
    check_flows(tree, x)?;
    check_flows(tree, r)?;
    check_adapted(tree, stopping)?;
    let start = stopping.start;
    let t0 = tree.node(start).time;
    let mut acc = S::zero();
    for leaf in tree.descendants_at(start, tree.horizon()) {
        let tau = stopping.tau[&leaf];
        let mut path = Vec::new();
        let mut cur = leaf;
        while cur != start {
            path.push(cur);
            cur = tree.node(cur).parent.expect("leaf below start");
        }
        path.reverse();

        let mut payoff = S::zero();
        for (k, &node) in path.iter().enumerate() {
            let s = t0 + k + 1;
            if s > tau - 1 {
                break;
            }
            let parent = if k == 0 { start } else { path[k - 1] };
            payoff = payoff
                + match objective {
                    StoppingObjective::Owner => r[parent] - r[node] - x[node],
                    StoppingObjective::Policyholder => x[node],
                };
        }
        if objective == StoppingObjective::Policyholder {
            // R_{tau-1} evaluated on the path: index tau-1-t0-1 into path,
            // or the start node itself when tau = t0 + 1.
            let at = if tau == t0 + 1 { start } else { path[tau - t0 - 2] };
            payoff = payoff + r[at];
        }
        acc = acc + tree.cond_prob(start, leaf, Measure::Q) * payoff;
    }
    Ok(acc)
}

/// Outcome of the exhaustive stopping-time search.
#[derive(Debug, Clone)]
pub struct Enumeration<S> {
    pub sup_owner: S,
    pub inf_policyholder: S,
    /// The largest optimal stopping time (continue on ties).
    pub tau_star: StoppingTime,
    /// Number of adapted stopping rules enumerated.
    pub rules: usize,
}

/// Brute-force extrema over every adapted stopping time in S_{t+1,T+1} on
/// the subtree of `start`. Serves as the independent oracle for
/// [`backward_valuation`].
pub fn enumerate_optimal_stopping<S: Real>(
    tree: &ScenarioTree<S>,
    start: NodeId,
    r: &[S],
    x: &[S],
) -> Result<Enumeration<S>> {
    check_flows(tree, x)?;
    check_flows(tree, r)?;
    let t0 = tree.node(start).time;
    let decisions: usize = (t0 + 1..=tree.horizon())
        .map(|u| tree.descendants_at(start, u).len())
        .sum();
    if decisions > ENUMERATION_GUARD {
        return Err(Error::Guard(format!(
            "subtree has {decisions} decision nodes (> {ENUMERATION_GUARD}); use backward_valuation"
        )));
    }

    // Remaining (owner, policyholder) values from a node onward, given no
    // stopping at times <= its own, over every rule on its descendants.
    fn combos<S: Real>(tree: &ScenarioTree<S>, r: &[S], x: &[S], w: NodeId) -> Vec<(S, S)> {
        let node = tree.node(w);
        if node.children.is_empty() {
            // Full runoff: no further owner terms, terminal R_T = 0.
            return vec![(S::zero(), S::zero())];
        }
        let mut acc: Vec<(S, S)> = vec![(S::zero(), S::zero())];
        for &ch in &node.children {
            let q = tree.cond_prob(w, ch, Measure::Q);
            let mut options: Vec<(S, S)> = vec![(S::zero(), r[w])]; // stop at ch
            for (o, p) in combos(tree, r, x, ch) {
                options.push((r[w] - r[ch] - x[ch] + o, x[ch] + p));
            }
            let mut next = Vec::with_capacity(acc.len() * options.len());
            for &(ao, ap) in &acc {
                for &(oo, op) in &options {
                    next.push((ao + q * oo, ap + q * op));
                }
            }
            acc = next;
        }
        acc
    }

    let all = combos(tree, r, x, start);
    let sup_owner = all
        .iter()
        .map(|&(o, _)| o)
        .fold(S::neg_infinity(), |a, b| a.max(b));
    let inf_policyholder = all
        .iter()
        .map(|&(_, p)| p)
        .fold(S::infinity(), |a, b| a.min(b));

    // Reconstruct the largest optimal rule: per child, continue whenever the
    // continuation value ties or beats stopping.
    fn best_owner<S: Real>(tree: &ScenarioTree<S>, r: &[S], x: &[S], w: NodeId) -> S {
        combos(tree, r, x, w)
            .iter()
            .map(|&(o, _)| o)
            .fold(S::neg_infinity(), |a, b| a.max(b))
    }
    let mut tau = BTreeMap::new();
    let mut frontier = vec![start];
    while let Some(w) = frontier.pop() {
        let node = tree.node(w);
        for &ch in &node.children {
            let cont = r[w] - r[ch] - x[ch] + best_owner(tree, r, x, ch);
            if cont >= S::zero() {
                if tree.node(ch).children.is_empty() {
                    tau.insert(ch, tree.horizon() + 1);
                } else {
                    frontier.push(ch);
                }
            } else {
                let s = tree.node(ch).time;
                for leaf in tree.descendants_at(ch, tree.horizon()) {
                    tau.insert(leaf, s);
                }
            }
        }
    }
    Ok(Enumeration {
        sup_owner,
        inf_policyholder,
        tau_star: StoppingTime { start, tau },
        rules: all.len(),
    })
}

/// Liability value per node: L_t = E_t^Q[sum_{s>t} X^r_s] + V_t.
pub fn liability_value<S: Real>(
    tree: &ScenarioTree<S>,
    replication: &[S],
    result: &ValuationResult<S>,
) -> Result<Vec<S>> {
    check_flows(tree, replication)?;
    let mut l = vec![S::zero(); tree.len()];
    for (id, _) in tree.nodes().iter().enumerate() {
        let market = if tree.node(id).time < tree.horizon() {
            tree.price_cashflow(replication, id)?
        } else {
            S::zero()
        };
        l[id] = market + result.v[id];
    }
    Ok(l)
}

/// Cost-of-capital rates: eta_t = E_t^P[(R_t - Y)_+] / E_t^Q[(R_t - Y)_+] - 1
/// with Y = X_{t+1} + V_{t+1}. `None` where C_t = 0 (a 0/0 ratio).
pub fn cost_of_capital_rates<S: Real>(
    tree: &ScenarioTree<S>,
    result: &ValuationResult<S>,
    x: &[S],
) -> Result<Vec<Option<S>>> {
    check_flows(tree, x)?;
    let tol = S::of(ABS_TOL);
    let mut eta = vec![None; tree.len()];
    for (id, node) in tree.nodes().iter().enumerate() {
        if node.children.is_empty() {
            continue;
        }
        let req = result.r[id];
        let shortfall = |ch: NodeId| (req - x[ch] - result.v[ch]).max(S::zero());
        let num = tree.expect_children(id, Measure::P, shortfall);
        let den = tree.expect_children(id, Measure::Q, shortfall);
        if den > tol {
            eta[id] = Some(num / den - S::one());
        }
    }
    Ok(eta)
}
