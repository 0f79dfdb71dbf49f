//! Report assembly: valuation JSON documents and plot-ready CSV series.
//! Output is deterministic: sorted keys, shortest-round-trip floats.

use serde_json::{json, Value};

use crate::config::Engine;
use crate::error::Result;
use crate::gaussian::GaussianValuation;
use crate::iid::IidValuation;
use crate::replication::ReplicationOutcome;
use crate::risk::Discrete;
use crate::scalar::{ABS_TOL, REL_TOL};
use crate::tree::{CashflowSet, Measure, NodeId, ScenarioTree};
use crate::valuation::{StoppingTime, ValuationResult};

fn engine_name(engine: Engine) -> &'static str {
    match engine {
        Engine::Tree => "tree",
        Engine::Gaussian => "gaussian",
        Engine::Iid => "iid",
    }
}

fn header(engine: Engine, config_hash: &str) -> Value {
    json!({
        "engine": engine_name(engine),
        "config_sha256": config_hash,
        "tolerances": {"abs": ABS_TOL, "rel": REL_TOL},
    })
}

fn merge(mut base: Value, extra: Value) -> Value {
    if let (Value::Object(b), Value::Object(e)) = (&mut base, extra) {
        for (k, v) in e {
            b.insert(k, v);
        }
    }
    base
}

pub fn replication_block<S: serde::Serialize>(
    criterion: &str,
    outcome: &ReplicationOutcome<S>,
) -> Value {
    json!({
        "criterion": criterion,
        "v_hat": outcome.v_hat,
        "objective": outcome.objective,
        "ties": outcome.ties,
        "degeneracy_report": Value::Null,
        "warning": outcome.warning,
    })
}

/// Everything the tree report needs beyond the tree itself.
pub struct TreeReportInputs<'a> {
    pub tree: &'a ScenarioTree<f64>,
    pub flows: &'a CashflowSet<f64>,
    /// Chosen replication flow X^r per node (zero where none).
    pub x_r: &'a [f64],
    pub result: &'a ValuationResult<f64>,
    pub l: &'a [f64],
    pub eta: &'a [Option<f64>],
    pub tau: &'a StoppingTime,
    pub replication: Option<Value>,
}

/// First default time on the path to `node`, if decided by its time.
fn path_default_time(
    tree: &ScenarioTree<f64>,
    result: &ValuationResult<f64>,
    node: NodeId,
) -> Option<usize> {
    let mut path = Vec::new();
    let mut cur = Some(node);
    while let Some(n) = cur {
        path.push(n);
        cur = tree.node(n).parent;
    }
    path.reverse();
    path.iter()
        .find(|&&n| result.default_flag[n])
        .map(|&n| tree.node(n).time)
}

pub fn tree_report(config_hash: &str, inputs: &TreeReportInputs<'_>) -> Result<Value> {
    let TreeReportInputs { tree, flows, x_r, result, l, eta, tau, replication } = inputs;
    let horizon = tree.horizon();
    let mut nodes = serde_json::Map::new();
    for n in 0..tree.len() {
        let node = tree.node(n);
        let tau_star: Value = if node.children.is_empty() {
            json!(tau.tau.get(&n))
        } else {
            json!(path_default_time(tree, result, n))
        };
        nodes.insert(
            node.id.clone(),
            json!({
                "time": node.time,
                "v": result.v[n],
                "c": result.c[n],
                "r": result.r[n],
                "l": l[n],
                "eta": eta[n],
                "default_flag": result.default_flag[n],
                "tau_star": tau_star,
            }),
        );
    }

    let root = tree.root();
    let market_price = tree.price_cashflow(x_r, root)?;
    let liability_price = tree.price_cashflow(&flows.liability, root)?;
    let option_to_default = liability_price - l[root];

    // Submartingale slack of V^S: min over edges of E_t^Q[V^S_{t+1}] - V^S_t.
    let residual = flows.residual_exogenous(x_r);
    let vs: Vec<f64> = (0..tree.len())
        .map(|n| result.cumulative_value(tree, &residual, n))
        .collect();
    let mut min_slack = f64::INFINITY;
    for n in 0..tree.len() {
        if tree.node(n).children.is_empty() {
            continue;
        }
        let slack = tree.expect_children(n, Measure::Q, |c| vs[c]) - vs[n];
        min_slack = min_slack.min(slack);
    }

    Ok(merge(
        header(Engine::Tree, config_hash),
        json!({
            "nodes": Value::Object(nodes),
            "summary": {
                "V0": result.v[root],
                "C0": result.c[root],
                "R0": result.r[root],
                "L0": l[root],
                "market_price_replication": market_price,
                "option_to_default_value": option_to_default,
            },
            "replication": replication,
            "diagnostics": {
                "horizon": horizon,
                "submartingale_min_slack": min_slack,
                "submartingale_ok": min_slack >= -ABS_TOL,
                "eta_undefined_nodes": (0..tree.len())
                    .filter(|&n| !tree.node(n).children.is_empty() && eta[n].is_none())
                    .map(|n| tree.node(n).id.clone())
                    .collect::<Vec<_>>(),
                "option_to_default_value": option_to_default,
            },
        }),
    ))
}

pub fn gaussian_report(
    config_hash: &str,
    valuation: &GaussianValuation<f64>,
    replication: Option<Value>,
) -> Value {
    merge(
        header(Engine::Gaussian, config_hash),
        json!({
            "series": {
                "c": valuation.c,
                "k_q": valuation.k_q,
                "k_p": valuation.k_p,
                "sigma": valuation.schedule.sigma,
                "delta": valuation.schedule.delta,
                "mean_flows_q": valuation.mean_flows_q,
            },
            "summary": {
                "V0": valuation.v0,
                "C0": valuation.c.first().copied(),
                "K_Q0": valuation.k_q[0],
                "K_P0": valuation.k_p[0],
                "option_to_default_value": -valuation.k_q[0],
            },
            "replication": replication,
        }),
    )
}

pub fn iid_report(config_hash: &str, valuation: &IidValuation<f64>) -> Value {
    merge(
        header(Engine::Iid, config_hash),
        json!({
            "series": {"v": valuation.v, "c": valuation.c, "r": valuation.r},
            "summary": {
                "V0": valuation.v[0],
                "C0": valuation.c[0],
                "R0": valuation.r[0],
            },
        }),
    )
}

/// Per-time quantile fan of node values under P path probabilities:
/// columns time, series, min, q25, median, q75, max.
pub fn tree_plot_csv(tree: &ScenarioTree<f64>, result: &ValuationResult<f64>) -> String {
    let mut out = String::from("time,series,min,q25,median,q75,max\n");
    for (name, values) in [("v", &result.v), ("c", &result.c), ("r", &result.r)] {
        for t in 0..=tree.horizon() {
            let atoms: Vec<(f64, f64)> = tree
                .layer(t)
                .iter()
                .map(|&n| (tree.cond_prob(tree.root(), n, Measure::P), values[n]))
                .collect();
            let lo = atoms.iter().map(|&(_, v)| v).fold(f64::INFINITY, f64::min);
            let hi = atoms.iter().map(|&(_, v)| v).fold(f64::NEG_INFINITY, f64::max);
            let dist = Discrete::new(atoms).expect("positive path probabilities");
            let q = |p: f64| dist.quantile(p).expect("quantile in range");
            out.push_str(&format!(
                "{t},{name},{lo},{},{},{},{hi}\n",
                q(0.25),
                q(0.5),
                q(0.75),
            ));
        }
    }
    out
}

/// Deterministic curves for the Gaussian and iid engines.
pub fn curve_plot_csv(v: &[f64], c: &[f64], r: &[f64]) -> String {
    let mut out = String::from("time,v,c,r\n");
    for t in 0..v.len() {
        let cv = c.get(t).copied().map(|x| x.to_string()).unwrap_or_default();
        let rv = r.get(t).copied().map(|x| x.to_string()).unwrap_or_default();
        out.push_str(&format!("{t},{},{cv},{rv}\n", v[t]));
    }
    out
}

pub fn to_pretty(value: &Value) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}
