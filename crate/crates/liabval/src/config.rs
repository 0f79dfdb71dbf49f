//! Run configuration: JSON schema, parsing and conversion into engine
//! inputs.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::iid::PeriodDist;
use crate::replication::Criterion;
use crate::risk::RiskMeasureSpec;
use crate::tree::Measure;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    Tree,
    Gaussian,
    Iid,
}

/// Risk measure as configured: `{"kind": "var"|"es"|"mixture", "u": ...,
/// "atoms": [[q, w], ...]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RiskSpecConfig {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atoms: Option<Vec<(f64, f64)>>,
}

impl RiskSpecConfig {
    pub fn to_spec(&self) -> Result<RiskMeasureSpec<f64>> {
        let spec = match self.kind.as_str() {
            "var" => RiskMeasureSpec::var(
                self.u
                    .ok_or_else(|| Error::Validation(vec!["risk_measure: var needs u".into()]))?,
            ),
            "es" => RiskMeasureSpec::es(
                self.u
                    .ok_or_else(|| Error::Validation(vec!["risk_measure: es needs u".into()]))?,
            ),
            "mixture" => RiskMeasureSpec::mixture(self.atoms.clone().ok_or_else(|| {
                Error::Validation(vec!["risk_measure: mixture needs atoms".into()])
            })?),
            other => {
                return Err(Error::Validation(vec![format!(
                    "risk_measure: unknown kind '{other}' (expected var, es or mixture)"
                )]))
            }
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReplicationConfig {
    /// cashflow_l2root | cashflow_l2 | terminal_value | min_expected_max_c
    pub criterion: String,
    /// "p" or "q"; ignored by min_expected_max_c (fixed Q outside, P in
    /// the risk measure).
    #[serde(default = "default_measure")]
    pub measure: String,
}

fn default_measure() -> String {
    "q".into()
}

impl ReplicationConfig {
    pub fn criterion(&self) -> Result<Criterion> {
        match self.criterion.as_str() {
            "cashflow_l2root" => Ok(Criterion::CashflowL2Root),
            "cashflow_l2" => Ok(Criterion::CashflowL2),
            "terminal_value" => Ok(Criterion::TerminalValue),
            "min_expected_max_c" => Ok(Criterion::MinExpectedMaxC),
            other => Err(Error::Validation(vec![format!(
                "replication: unknown criterion '{other}'"
            )])),
        }
    }

    pub fn measure(&self) -> Result<Measure> {
        match self.measure.as_str() {
            "p" | "P" => Ok(Measure::P),
            "q" | "Q" => Ok(Measure::Q),
            other => Err(Error::Validation(vec![format!(
                "replication: unknown measure '{other}' (expected p or q)"
            )])),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerificationConfig {
    /// Run the oracle cross-checks during `run` as well.
    #[serde(default)]
    pub oracle_checks: bool,
    /// Enforce desk-scale guards (enumeration size, probe horizon).
    #[serde(default = "default_true")]
    pub guards: bool,
}

fn default_true() -> bool {
    true
}

impl Default for VerificationConfig {
    fn default() -> Self {
        VerificationConfig { oracle_checks: false, guards: true }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub engine: Engine,
    /// Tree + cash flows, CSV (tree engine).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tree_csv: Option<PathBuf>,
    /// Exogenous replication flow column file: CSV with node_id, x_r.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replication_csv: Option<PathBuf>,
    /// Gaussian model, JSON (gaussian engine).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_json: Option<PathBuf>,
    /// Period distributions, JSON (iid engine).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub periods_json: Option<PathBuf>,
    pub risk_measure: RiskSpecConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replication: Option<ReplicationConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    /// Deterministic per-period discount factors applied to ingested flows
    /// (index t-1 scales time-t flows). Flows are stored discounted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub discount_curve: Option<Vec<f64>>,
    #[serde(default)]
    pub verification: Option<VerificationConfig>,
}

impl RunConfig {
    pub fn load(path: &std::path::Path) -> Result<(Self, String)> {
        let raw = std::fs::read_to_string(path)?;
        let config: RunConfig = serde_json::from_str(&raw)
            .map_err(|e| Error::Validation(vec![format!("config {}: {e}", path.display())]))?;
        config.validate()?;
        let hash = {
            use sha2::Digest as _;
            let mut h = sha2::Sha256::new();
            h.update(raw.as_bytes());
            format!("{:x}", h.finalize())
        };
        Ok((config, hash))
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        let need = |name: &str, p: &Option<PathBuf>, problems: &mut Vec<String>| match p {
            Some(p) if p.exists() => {}
            Some(p) => problems.push(format!("{name}: path {} does not exist", p.display())),
            None => problems.push(format!("{name} is required for this engine")),
        };
        match self.engine {
            Engine::Tree => need("tree_csv", &self.tree_csv, &mut problems),
            Engine::Gaussian => need("model_json", &self.model_json, &mut problems),
            Engine::Iid => need("periods_json", &self.periods_json, &mut problems),
        }
        if let Some(p) = &self.replication_csv {
            if !p.exists() {
                problems.push(format!("replication_csv: path {} does not exist", p.display()));
            }
            if self.engine != Engine::Tree {
                problems.push("replication_csv only applies to the tree engine".into());
            }
        }
        if let Some(curve) = &self.discount_curve {
            if curve.iter().any(|&f| !(f > 0.0)) {
                problems.push("discount_curve factors must be positive".into());
            }
        }
        if let Err(Error::Validation(mut v)) = self.risk_measure.to_spec() {
            problems.append(&mut v);
        } else if let Err(e) = self.risk_measure.to_spec() {
            problems.push(e.to_string());
        }
        if let Some(r) = &self.replication {
            if let Err(e) = r.criterion() {
                problems.push(e.to_string());
            }
            if let Err(e) = r.measure() {
                problems.push(e.to_string());
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(problems))
        }
    }
}

/// Period law as configured for the iid engine.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum PeriodConfig {
    Atoms { xs: Vec<f64>, p: Vec<f64>, q: Vec<f64> },
    Gaussian {
        mean: f64,
        sigma: f64,
        #[serde(default)]
        shift: f64,
    },
}

impl PeriodConfig {
    pub fn to_dist(&self) -> PeriodDist<f64> {
        match self {
            PeriodConfig::Atoms { xs, p, q } => {
                PeriodDist::Atoms { xs: xs.clone(), p: p.clone(), q: q.clone() }
            }
            PeriodConfig::Gaussian { mean, sigma, shift } => {
                PeriodDist::Gaussian { mean: *mean, sigma: *sigma, shift: *shift }
            }
        }
    }
}

/// Gaussian model file: `{"n": ..., "T": ..., "m": ..., "A": [[...]],
/// "B": [{"t": ..., "s": ..., "matrix": [[...]]}], "lambda": [[...]],
/// "g": [[...]]?}`. Missing B entries are zero; `g` defaults to the first
/// unit vector each period (the liability is factor 1).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianModelConfig {
    pub n: usize,
    #[serde(rename = "T")]
    pub horizon: usize,
    #[serde(default)]
    pub m: usize,
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    pub b: Vec<BlockConfig>,
    pub lambda: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockConfig {
    pub t: usize,
    pub s: usize,
    pub matrix: Vec<Vec<f64>>,
}

impl GaussianModelConfig {
    pub fn load(path: &std::path::Path) -> Result<Self> {
        let raw = std::fs::read_to_string(path)?;
        serde_json::from_str(&raw)
            .map_err(|e| Error::Validation(vec![format!("model {}: {e}", path.display())]))
    }

    pub fn to_model(&self) -> Result<crate::Gaussian> {
        let (n, horizon) = (self.n, self.horizon);
        if self.m + 1 > n {
            return Err(Error::Validation(vec![format!(
                "m = {} instruments need n >= {}, model has n = {n}",
                self.m,
                self.m + 1
            )]));
        }
        let mut b = vec![Vec::new(); horizon];
        for (t, row) in b.iter_mut().enumerate() {
            *row = vec![vec![vec![0.0; n]; n]; t + 1];
        }
        for block in &self.b {
            if block.t < 1 || block.t > horizon || block.s < 1 || block.s > block.t {
                return Err(Error::Validation(vec![format!(
                    "B entry (t={}, s={}) outside 1 <= s <= t <= {horizon}",
                    block.t, block.s
                )]));
            }
            b[block.t - 1][block.s - 1] = block.matrix.clone();
        }
        let g = self.g.clone().unwrap_or_else(|| {
            vec![
                {
                    let mut e = vec![0.0; n];
                    e[0] = 1.0;
                    e
                };
                horizon
            ]
        });
        let model = crate::Gaussian { a: self.a.clone(), b, lambda: self.lambda.clone(), g };
        model.validate()?;
        Ok(model)
    }
}

pub fn load_periods(path: &std::path::Path) -> Result<Vec<PeriodDist<f64>>> {
    let raw = std::fs::read_to_string(path)?;
    let configs: Vec<PeriodConfig> = serde_json::from_str(&raw)
        .map_err(|e| Error::Validation(vec![format!("periods {}: {e}", path.display())]))?;
    Ok(configs.iter().map(PeriodConfig::to_dist).collect())
}
