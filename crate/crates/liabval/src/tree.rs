//! Finite scenario trees: the discrete filtered probability space together
//! with the state-price density process defining the pricing measure.
//!
//! The filtration is the tree itself: an F_t-measurable variable is constant
//! on each time-t subtree. The pricing measure Q is carried by the density
//! process `D`; the Q-branch probability of a child is
//! `p_child * D_child / D_parent`.

use crate::error::{Error, Result};
use crate::scalar::{Real, ABS_TOL};

pub type NodeId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Measure {
    P,
    Q,
}

#[derive(Debug, Clone)]
pub struct Node<S> {
    pub id: String,
    pub time: usize,
    pub parent: Option<NodeId>,
    pub children: Vec<NodeId>,
    /// Probability of reaching this node from its parent under P (1 at root).
    pub branch_prob: S,
    /// State-price density D_t at this node.
    pub density: S,
}

#[derive(Debug, Clone)]
pub struct ScenarioTree<S> {
    horizon: usize,
    nodes: Vec<Node<S>>,
    /// Node ids grouped by time, in insertion order.
    layers: Vec<Vec<NodeId>>,
}

/// One ingested node before structural assembly.
#[derive(Debug, Clone)]
pub struct NodeSpec<S> {
    pub id: String,
    pub parent: Option<String>,
    pub branch_prob: S,
    pub density: S,
}

#[derive(Debug, Clone, Default)]
pub struct ValidationReport {
    pub violations: Vec<String>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

impl<S: Real> ScenarioTree<S> {
    /// Assembles a tree from node specs. Times are derived from parent
    /// links; branch probabilities are renormalized per sibling group when
    /// they deviate from 1 by no more than the validation tolerance.
    pub fn build(specs: Vec<NodeSpec<S>>) -> Result<Self> {
        let mut index = std::collections::HashMap::new();
        for (i, s) in specs.iter().enumerate() {
            if index.insert(s.id.clone(), i).is_some() {
                return Err(Error::Structure(format!("duplicate node id '{}'", s.id)));
            }
        }
        let roots: Vec<usize> = specs
            .iter()
            .enumerate()
            .filter(|(_, s)| s.parent.is_none())
            .map(|(i, _)| i)
            .collect();
        if roots.len() != 1 {
            return Err(Error::Structure(format!(
                "expected exactly one root, found {}",
                roots.len()
            )));
        }

        let mut nodes: Vec<Node<S>> = specs
            .iter()
            .map(|s| Node {
                id: s.id.clone(),
                time: 0,
                parent: None,
                children: Vec::new(),
                branch_prob: s.branch_prob,
                density: s.density,
            })
            .collect();
        for (i, s) in specs.iter().enumerate() {
            if let Some(pid) = &s.parent {
                let p = *index
                    .get(pid)
                    .ok_or_else(|| Error::Structure(format!("orphan node '{}': unknown parent '{pid}'", s.id)))?;
                nodes[i].parent = Some(p);
                nodes[p].children.push(i);
            }
        }

        // Assign times by walking down from the root; anything unreached is
        // on a cycle or disconnected.
        let root = roots[0];
        let mut seen = vec![false; nodes.len()];
        let mut stack = vec![root];
        seen[root] = true;
        while let Some(n) = stack.pop() {
            for &c in &nodes[n].children.clone() {
                if seen[c] {
                    return Err(Error::Structure(format!("cycle through node '{}'", nodes[c].id)));
                }
                seen[c] = true;
                nodes[c].time = nodes[n].time + 1;
                stack.push(c);
            }
        }
        if let Some(i) = seen.iter().position(|&s| !s) {
            return Err(Error::Structure(format!(
                "node '{}' not reachable from the root",
                nodes[i].id
            )));
        }

        let horizon = nodes.iter().map(|n| n.time).max().unwrap_or(0);
        let mut layers = vec![Vec::new(); horizon + 1];
        for (i, n) in nodes.iter().enumerate() {
            layers[n.time].push(i);
        }
        // Every leaf must sit at the horizon, otherwise flows at later times
        // are undefined on some path.
        for n in &nodes {
            if n.children.is_empty() && n.time != horizon {
                return Err(Error::Structure(format!(
                    "leaf '{}' at time {} before horizon {}",
                    n.id, n.time, horizon
                )));
            }
        }

        nodes[root].branch_prob = S::one();
        let mut tree = ScenarioTree { horizon, nodes, layers };
        tree.renormalize()?;
        Ok(tree)
    }

    /// Renormalizes sibling probabilities; rejects deviations above tolerance.
    fn renormalize(&mut self) -> Result<()> {
        let tol = S::of(ABS_TOL);
        for n in 0..self.nodes.len() {
            let children = self.nodes[n].children.clone();
            if children.is_empty() {
                continue;
            }
            let total: S = children.iter().map(|&c| self.nodes[c].branch_prob).sum();
            if (total - S::one()).abs() > tol {
                return Err(Error::Validation(vec![format!(
                    "branch probabilities under '{}' sum to {total}",
                    self.nodes[n].id
                )]));
            }
            for &c in &children {
                let p = self.nodes[c].branch_prob;
                self.nodes[c].branch_prob = p / total;
            }
        }
        Ok(())
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn root(&self) -> NodeId {
        self.layers[0][0]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, id: NodeId) -> &Node<S> {
        &self.nodes[id]
    }

    pub fn nodes(&self) -> &[Node<S>] {
        &self.nodes
    }

    pub fn layer(&self, t: usize) -> &[NodeId] {
        &self.layers[t]
    }

    pub fn leaves(&self) -> &[NodeId] {
        &self.layers[self.horizon]
    }

    /// Checks the measure-theoretic invariants: positive densities, D_0 = 1,
    /// the density martingale property and branch-probability positivity.
    pub fn validate(&self) -> ValidationReport {
        let tol = S::of(ABS_TOL);
        let mut report = ValidationReport::default();
        let root = self.root();
        if (self.nodes[root].density - S::one()).abs() > tol {
            report
                .violations
                .push(format!("root density D_0 = {} != 1", self.nodes[root].density));
        }
        for n in &self.nodes {
            if n.density <= S::zero() {
                report
                    .violations
                    .push(format!("node '{}': density {} not strictly positive", n.id, n.density));
            }
        }
        for (i, n) in self.nodes.iter().enumerate() {
            if n.children.is_empty() {
                continue;
            }
            let mut total = S::zero();
            let mut avg_d = S::zero();
            for &c in &n.children {
                let child = &self.nodes[c];
                if child.branch_prob <= S::zero() {
                    report.violations.push(format!(
                        "node '{}': branch probability {} not strictly positive",
                        child.id, child.branch_prob
                    ));
                }
                total = total + child.branch_prob;
                avg_d = avg_d + child.branch_prob * child.density;
            }
            if (total - S::one()).abs() > tol {
                report
                    .violations
                    .push(format!("node '{}': branch probabilities sum to {total}", n.id));
            }
            if (avg_d - n.density).abs() > tol.max(n.density.abs() * tol) {
                report.violations.push(format!(
                    "node '{}': density martingale violated (E^P[D_child] = {avg_d}, D = {})",
                    self.nodes[i].id, n.density
                ));
            }
        }
        report
    }

    /// P-probability of reaching `node` from `ancestor`.
    pub fn path_prob(&self, ancestor: NodeId, node: NodeId) -> S {
        let mut p = S::one();
        let mut cur = node;
        while cur != ancestor {
            p = p * self.nodes[cur].branch_prob;
            cur = self.nodes[cur]
                .parent
                .expect("path_prob: node not below ancestor");
        }
        p
    }

    /// Conditional probability of `node` given `ancestor` under the measure.
    pub fn cond_prob(&self, ancestor: NodeId, node: NodeId, measure: Measure) -> S {
        let p = self.path_prob(ancestor, node);
        match measure {
            Measure::P => p,
            Measure::Q => p * self.nodes[node].density / self.nodes[ancestor].density,
        }
    }

    /// Descendants of `node` at time `u` (the node itself when u equals its
    /// time).
    pub fn descendants_at(&self, node: NodeId, u: usize) -> Vec<NodeId> {
        let mut out = vec![node];
        for _ in self.nodes[node].time..u {
            out = out
                .iter()
                .flat_map(|&n| self.nodes[n].children.iter().copied())
                .collect();
        }
        out
    }

    /// Exact conditional expectation at `node` of a variable defined on the
    /// time-`u` layer. `values` is indexed by node id over the whole tree.
    pub fn conditional_expectation(
        &self,
        node: NodeId,
        values: &[S],
        u: usize,
        measure: Measure,
    ) -> Result<S> {
        let t = self.nodes[node].time;
        if u <= t {
            return Err(Error::Argument(format!(
                "conditioning time {t} must precede value time {u}"
            )));
        }
        if u > self.horizon {
            return Err(Error::Argument(format!(
                "value time {u} beyond horizon {}",
                self.horizon
            )));
        }
        if values.len() != self.nodes.len() {
            return Err(Error::Data(format!(
                "values vector has length {}, expected {}",
                values.len(),
                self.nodes.len()
            )));
        }
        let mut acc = S::zero();
        for d in self.descendants_at(node, u) {
            acc = acc + self.cond_prob(node, d, measure) * values[d];
        }
        Ok(acc)
    }

    /// One-step conditional expectation over the children of `node`.
    pub fn expect_children<F: Fn(NodeId) -> S>(&self, node: NodeId, measure: Measure, f: F) -> S {
        let mut acc = S::zero();
        for &c in &self.nodes[node].children {
            acc = acc + self.cond_prob(node, c, measure) * f(c);
        }
        acc
    }

    /// Market price at `node` of a flow process: sum over s > t of the
    /// Q-conditional expectations of the time-s flow.
    pub fn price_cashflow(&self, flows: &[S], node: NodeId) -> Result<S> {
        let t = self.nodes[node].time;
        let mut total = S::zero();
        for u in t + 1..=self.horizon {
            total = total + self.conditional_expectation(node, flows, u, Measure::Q)?;
        }
        Ok(total)
    }
}

/// Per-node liability and instrument flows on a scenario tree.
///
/// Flows live at nodes with t >= 1; the root entries are unused and must be
/// zero.
#[derive(Debug, Clone)]
pub struct CashflowSet<S> {
    /// Liability flow X^o, indexed by node id.
    pub liability: Vec<S>,
    /// Instrument flows X^f, one vector of length `m` per node.
    pub instruments: Vec<Vec<S>>,
    pub m: usize,
}

impl<S: Real> CashflowSet<S> {
    pub fn new(tree: &ScenarioTree<S>, liability: Vec<S>, instruments: Vec<Vec<S>>, m: usize) -> Result<Self> {
        if liability.len() != tree.len() || instruments.len() != tree.len() {
            return Err(Error::Data(format!(
                "flow vectors must cover all {} nodes",
                tree.len()
            )));
        }
        for (i, f) in instruments.iter().enumerate() {
            if f.len() != m {
                return Err(Error::Data(format!(
                    "node '{}' carries {} instrument flows, expected {m}",
                    tree.node(i).id,
                    f.len()
                )));
            }
        }
        Ok(CashflowSet { liability, instruments, m })
    }

    /// Residual flow X = X^o - v^T X^f per node.
    pub fn residual(&self, v: &[S]) -> Result<Vec<S>> {
        if v.len() != self.m {
            return Err(Error::Argument(format!(
                "weight vector has length {}, expected {}",
                v.len(),
                self.m
            )));
        }
        Ok(self
            .liability
            .iter()
            .zip(&self.instruments)
            .map(|(&xo, xf)| {
                let hedge: S = v.iter().zip(xf).map(|(&vi, &fi)| vi * fi).sum();
                xo - hedge
            })
            .collect())
    }

    /// Residual flow X = X^o - X^r against an exogenous replication flow.
    pub fn residual_exogenous(&self, x_r: &[S]) -> Vec<S> {
        self.liability
            .iter()
            .zip(x_r.iter())
            .map(|(&xo, &xr)| xo - xr)
            .collect()
    }

    /// Replication flow v^T X^f per node.
    pub fn portfolio_flow(&self, v: &[S]) -> Result<Vec<S>> {
        if v.len() != self.m {
            return Err(Error::Argument(format!(
                "weight vector has length {}, expected {}",
                v.len(),
                self.m
            )));
        }
        Ok(self
            .instruments
            .iter()
            .map(|xf| v.iter().zip(xf).map(|(&vi, &fi)| vi * fi).sum())
            .collect())
    }
}
