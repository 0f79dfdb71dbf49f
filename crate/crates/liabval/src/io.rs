//! CSV ingestion of scenario trees and cash flows, and atomic file
//! output.
//!
//! Tree schema: header `node_id,parent_id,time,branch_prob,density,x_o,
//! x_f_1,...,x_f_m`; one row per node; the root row has an empty
//! `parent_id` and empty flow columns.

use std::collections::HashMap;
use std::io::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tree::{CashflowSet, NodeSpec, ScenarioTree};

fn parse_f64(field: &str, row: usize, name: &str) -> Result<f64> {
    field.trim().parse().map_err(|_| {
        Error::Parse(format!("row {row}: column {name} has non-numeric value '{field}'"))
    })
}

/// Loads a tree plus cash flows. `discount` optionally rescales time-t
/// flows by the factor at index t-1.
pub fn read_tree_csv(
    path: &Path,
    discount: Option<&[f64]>,
) -> Result<(ScenarioTree<f64>, CashflowSet<f64>)> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    let headers = reader
        .headers()
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?
        .clone();
    let mut index = HashMap::new();
    for (i, h) in headers.iter().enumerate() {
        index.insert(h.to_string(), i);
    }
    for required in ["node_id", "parent_id", "time", "branch_prob", "density", "x_o"] {
        if !index.contains_key(required) {
            return Err(Error::Parse(format!(
                "{}: missing required column '{required}'",
                path.display()
            )));
        }
    }
    let mut m = 0;
    while index.contains_key(&format!("x_f_{}", m + 1)) {
        m += 1;
    }

    let mut specs = Vec::new();
    let mut times = Vec::new();
    let mut liability = Vec::new();
    let mut instruments = Vec::new();
    for (rownum, record) in reader.records().enumerate() {
        let row = rownum + 2; // 1-based, after the header
        let record = record.map_err(|e| Error::Parse(format!("row {row}: {e}")))?;
        let get = |name: &str| record.get(index[name]).unwrap_or("");
        let parent = get("parent_id");
        let is_root = parent.is_empty();
        let branch_prob = if is_root && get("branch_prob").is_empty() {
            1.0
        } else {
            parse_f64(get("branch_prob"), row, "branch_prob")?
        };
        let density = if is_root && get("density").is_empty() {
            1.0
        } else {
            parse_f64(get("density"), row, "density")?
        };
        specs.push(NodeSpec {
            id: get("node_id").to_string(),
            parent: if is_root { None } else { Some(parent.to_string()) },
            branch_prob,
            density,
        });
        times.push(parse_f64(get("time"), row, "time")? as usize);
        if is_root {
            liability.push(0.0);
            instruments.push(vec![0.0; m]);
            for k in 1..=m {
                let field = get(&format!("x_f_{k}"));
                if !field.is_empty() {
                    return Err(Error::Parse(format!(
                        "row {row}: root flow columns must be empty"
                    )));
                }
            }
        } else {
            liability.push(parse_f64(get("x_o"), row, "x_o")?);
            instruments.push(
                (1..=m)
                    .map(|k| parse_f64(get(&format!("x_f_{k}")), row, &format!("x_f_{k}")))
                    .collect::<Result<_>>()?,
            );
        }
    }

    let tree = ScenarioTree::build(specs)?;
    for (n, &declared) in times.iter().enumerate() {
        if tree.node(n).time != declared {
            return Err(Error::Parse(format!(
                "node '{}': declared time {declared} disagrees with tree depth {}",
                tree.node(n).id,
                tree.node(n).time
            )));
        }
    }
    let report = tree.validate();
    if !report.passed() {
        return Err(Error::Validation(report.violations));
    }
    if let Some(curve) = discount {
        if curve.len() < tree.horizon() {
            return Err(Error::Validation(vec![format!(
                "discount curve has {} factors, horizon is {}",
                curve.len(),
                tree.horizon()
            )]));
        }
        for n in 0..tree.len() {
            let t = tree.node(n).time;
            if t >= 1 {
                liability[n] *= curve[t - 1];
                for x in &mut instruments[n] {
                    *x *= curve[t - 1];
                }
            }
        }
    }
    let flows = CashflowSet::new(&tree, liability, instruments, m)?;
    Ok((tree, flows))
}

/// Loads an exogenous replication flow: CSV with columns node_id, x_r.
pub fn read_replication_csv(path: &Path, tree: &ScenarioTree<f64>) -> Result<Vec<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    let by_id: HashMap<String, usize> = (0..tree.len())
        .map(|n| (tree.node(n).id.clone(), n))
        .collect();
    let mut flow = vec![0.0; tree.len()];
    let mut seen = vec![false; tree.len()];
    for (rownum, record) in reader.records().enumerate() {
        let row = rownum + 2;
        let record = record.map_err(|e| Error::Parse(format!("row {row}: {e}")))?;
        let id = record.get(0).unwrap_or("");
        let &n = by_id
            .get(id)
            .ok_or_else(|| Error::Parse(format!("row {row}: unknown node_id '{id}'")))?;
        flow[n] = parse_f64(record.get(1).unwrap_or(""), row, "x_r")?;
        seen[n] = true;
    }
    for n in 0..tree.len() {
        if tree.node(n).time >= 1 && !seen[n] {
            return Err(Error::Parse(format!(
                "replication flow missing for node '{}'",
                tree.node(n).id
            )));
        }
    }
    Ok(flow)
}

/// Writes `content` atomically: temp file in the target directory, then
/// rename.
pub fn write_atomic(path: &Path, content: &str) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    std::fs::create_dir_all(dir)?;
    let tmp = dir.join(format!(
        ".{}.tmp",
        path.file_name().and_then(|s| s.to_str()).unwrap_or("out")
    ));
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(content.as_bytes())?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}
