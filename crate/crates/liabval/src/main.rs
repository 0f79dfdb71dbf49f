use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng as _;
use rand_chacha::ChaCha12Rng;
use serde_json::{json, Value};

use liabval::config::{Engine, GaussianModelConfig, RunConfig};
use liabval::error::{Error, Result};
use liabval::replication::{self, ReplicationProblem};
use liabval::scalar::{close, ABS_TOL, REL_TOL};
use liabval::{config, gaussian, iid, io, report, sim, valuation};

#[derive(Parser)]
#[command(name = "liabval", version, about = "Multi-period liability valuation under repeated capital requirements")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Value the configured liability and write reports.
    Run(CommonArgs),
    /// Run the oracle cross-check suites.
    Verify(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Path to the JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the configured output directory.
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (reserved; evaluation is currently sequential).
    #[arg(long)]
    threads: Option<usize>,
    /// Treat warnings as errors.
    #[arg(long)]
    strict: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Run(args) => run(args),
        Command::Verify(args) => verify(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let kind = match &err {
                Error::Degenerate(_) => "degeneracy",
                Error::Guard(_) => "guard",
                _ => "validation",
            };
            eprintln!(
                "{}",
                json!({"error": {"kind": kind, "message": err.to_string()}})
            );
            ExitCode::from(match err {
                Error::Degenerate(_) => 3,
                Error::Guard(_) => 4,
                _ => 2,
            })
        }
    }
}

struct Session {
    config: RunConfig,
    hash: String,
    output_dir: PathBuf,
    seed: u64,
    strict: bool,
}

fn open_session(args: &CommonArgs) -> Result<Session> {
    if let Some(t) = args.threads {
        if t == 0 {
            return Err(Error::Validation(vec!["--threads must be at least 1".into()]));
        }
    }
    let (config, hash) = RunConfig::load(&args.config)?;
    let output_dir = args
        .output_dir
        .clone()
        .or_else(|| config.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("."));
    let seed = args.seed.unwrap_or(config.seed);
    Ok(Session { config, hash, output_dir, seed, strict: args.strict })
}

fn run(args: &CommonArgs) -> Result<()> {
    let session = open_session(args)?;
    let (report_value, plots) = match session.config.engine {
        Engine::Tree => run_tree(&session)?,
        Engine::Gaussian => run_gaussian(&session)?,
        Engine::Iid => run_iid(&session)?,
    };
    let report_path = session.output_dir.join("valuation.json");
    io::write_atomic(&report_path, &report::to_pretty(&report_value))?;
    io::write_atomic(&session.output_dir.join("plots.csv"), &plots)?;
    println!("report written to {}", report_path.display());
    Ok(())
}

fn run_tree(session: &Session) -> Result<(Value, String)> {
    let config = &session.config;
    let (tree, flows) = io::read_tree_csv(
        config.tree_csv.as_ref().expect("validated"),
        config.discount_curve.as_deref(),
    )?;
    let spec = config.risk_measure.to_spec()?;

    let mut replication_block = None;
    let x_r: Vec<f64> = if let Some(path) = &config.replication_csv {
        io::read_replication_csv(path, &tree)?
    } else if let Some(rep) = &config.replication {
        if flows.m == 0 {
            return Err(Error::Validation(vec![
                "replication requested but the tree file has no instrument columns".into(),
            ]));
        }
        let problem = ReplicationProblem {
            tree: &tree,
            flows: &flows,
            criterion: rep.criterion()?,
            measure: rep.measure()?,
            spec: spec.clone(),
            seed: session.seed,
        };
        let outcome = replication::solve(&problem)?;
        if session.strict {
            if let Some(w) = &outcome.warning {
                return Err(Error::Validation(vec![format!("strict mode: {w}")]));
            }
        }
        let flow = flows.portfolio_flow(&outcome.v_hat)?;
        replication_block = Some(report::replication_block(&rep.criterion, &outcome));
        flow
    } else {
        vec![0.0; tree.len()]
    };

    let residual = flows.residual_exogenous(&x_r);
    let result = valuation::backward_valuation(&tree, &residual, &spec)?;
    let l = valuation::liability_value(&tree, &x_r, &result)?;
    let eta = valuation::cost_of_capital_rates(&tree, &result, &residual)?;
    let tau = valuation::optimal_default_time(&tree, &result, &residual, tree.root());

    if config.verification.as_ref().map(|v| v.oracle_checks).unwrap_or(false) {
        oracle_check_tree(&tree, &residual, &result)?;
    }

    let inputs = report::TreeReportInputs {
        tree: &tree,
        flows: &flows,
        x_r: &x_r,
        result: &result,
        l: &l,
        eta: &eta,
        tau: &tau,
        replication: replication_block,
    };
    let value = report::tree_report(&session.hash, &inputs)?;
    let plots = report::tree_plot_csv(&tree, &result);
    Ok((value, plots))
}

fn oracle_check_tree(
    tree: &liabval::Tree,
    residual: &[f64],
    result: &liabval::Valuation,
) -> Result<()> {
    let e = valuation::enumerate_optimal_stopping(tree, tree.root(), &result.r, residual)?;
    let root = tree.root();
    if !close(e.sup_owner, result.c[root], REL_TOL, ABS_TOL)
        || !close(e.inf_policyholder, result.v[root], REL_TOL, ABS_TOL)
    {
        return Err(Error::Validation(vec![format!(
            "oracle mismatch at root: enumeration gives C0 = {}, V0 = {}; recursion gives C0 = {}, V0 = {}",
            e.sup_owner, e.inf_policyholder, result.c[root], result.v[root]
        )]));
    }
    Ok(())
}

fn run_gaussian(session: &Session) -> Result<(Value, String)> {
    let config = &session.config;
    let model_config = GaussianModelConfig::load(config.model_json.as_ref().expect("validated"))?;
    let model = model_config.to_model()?;
    let spec = config.risk_measure.to_spec()?;
    let out = gaussian::gaussian_valuation(&model, &spec)?;

    let replication_block = if model_config.m > 0 && config.replication.is_some() {
        let hedge = gaussian::optimal_replication_g(&model, model_config.m, &spec)?;
        Some(json!({
            "criterion": "frictional_cost",
            "g_hat": hedge.g,
            "objective": hedge.objective,
            "K_Q0": hedge.k_q0,
            "L0": hedge.l0,
            "ties": hedge.ties,
        }))
    } else {
        None
    };

    let horizon = model.horizon();
    // Deterministic curves: E_0^Q[V_t], exact C_t, and E_0^Q[R_t] = E_0^Q[V_t] + C_t.
    let mut v_curve = vec![0.0; horizon + 1];
    for t in 0..=horizon {
        let tail: f64 = out.mean_flows_q[t..].iter().sum();
        v_curve[t] = tail + out.k_q[t];
    }
    let r_curve: Vec<f64> = (0..horizon).map(|t| v_curve[t] + out.c[t]).collect();
    let value = report::gaussian_report(&session.hash, &out, replication_block);
    Ok((value, report::curve_plot_csv(&v_curve, &out.c, &r_curve)))
}

fn run_iid(session: &Session) -> Result<(Value, String)> {
    let config = &session.config;
    let periods = config::load_periods(config.periods_json.as_ref().expect("validated"))?;
    let spec = config.risk_measure.to_spec()?;
    let out = iid::iid_closed_form(&periods, &spec)?;
    let value = report::iid_report(&session.hash, &out);
    Ok((value, report::curve_plot_csv(&out.v, &out.c, &out.r)))
}

struct Suite {
    name: &'static str,
    passed: bool,
    cases: usize,
    max_deviation: f64,
}

fn verify(args: &CommonArgs) -> Result<()> {
    let session = open_session(args)?;
    // Engine inputs must load cleanly before any suite runs.
    match session.config.engine {
        Engine::Tree => {
            io::read_tree_csv(
                session.config.tree_csv.as_ref().expect("validated"),
                session.config.discount_curve.as_deref(),
            )?;
        }
        Engine::Gaussian => {
            GaussianModelConfig::load(session.config.model_json.as_ref().expect("validated"))?
                .to_model()?;
        }
        Engine::Iid => {
            config::load_periods(session.config.periods_json.as_ref().expect("validated"))?;
        }
    }

    let suites = vec![
        stopping_oracle_suite(session.seed)?,
        gaussian_iid_suite(session.seed)?,
        psi_grid_suite(session.seed)?,
    ];
    let mut all_passed = true;
    let mut blocks = serde_json::Map::new();
    for s in &suites {
        all_passed &= s.passed;
        println!(
            "{}: {} (cases {}, max deviation {:e})",
            s.name,
            if s.passed { "pass" } else { "FAIL" },
            s.cases,
            s.max_deviation
        );
        blocks.insert(
            s.name.to_string(),
            json!({"passed": s.passed, "cases": s.cases, "max_deviation": s.max_deviation}),
        );
    }
    let value = json!({
        "config_sha256": session.hash,
        "tolerances": {"abs": ABS_TOL, "rel": REL_TOL},
        "suites": Value::Object(blocks),
        "passed": all_passed,
    });
    io::write_atomic(
        &session.output_dir.join("verification.json"),
        &report::to_pretty(&value),
    )?;
    if all_passed {
        Ok(())
    } else {
        Err(Error::Validation(vec!["verification suites failed".into()]))
    }
}

/// Backward recursion vs stopping-time enumeration at every node of seeded
/// random trees.
fn stopping_oracle_suite(seed: u64) -> Result<Suite> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed ^ 0x5eed_0001);
    let mut max_dev = 0.0f64;
    let mut cases = 0;
    for _ in 0..25 {
        let tree = sim::random_tree(&mut rng, sim::TreeShape::default());
        let flows = sim::random_flows(&mut rng, &tree, 2.0);
        let spec = sim::random_spec(&mut rng);
        let result = valuation::backward_valuation(&tree, &flows, &spec)?;
        for n in 0..tree.len() {
            if tree.node(n).children.is_empty() {
                continue;
            }
            let e = valuation::enumerate_optimal_stopping(&tree, n, &result.r, &flows)?;
            let scale = 1.0f64.max(result.c[n].abs()).max(result.v[n].abs());
            max_dev = max_dev
                .max((e.sup_owner - result.c[n]).abs() / scale)
                .max((e.inf_policyholder - result.v[n]).abs() / scale);
            cases += 1;
        }
    }
    Ok(Suite { name: "stopping_oracle", passed: max_dev < REL_TOL, cases, max_deviation: max_dev })
}

/// Block-diagonal Gaussian models against the independent-period closed
/// form.
fn gaussian_iid_suite(seed: u64) -> Result<Suite> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed ^ 0x5eed_0002);
    let mut max_dev = 0.0f64;
    let mut cases = 0;
    for _ in 0..10 {
        let dim = 1 + (cases % 3);
        let horizon = 1 + (cases % 4);
        let model = sim::random_gaussian_model(&mut rng, dim, horizon, true);
        let spec = sim::random_spec(&mut rng);
        let out = gaussian::gaussian_valuation(&model, &spec)?;
        let periods: Vec<iid::PeriodDist<f64>> = (0..horizon)
            .map(|t| {
                let diag = &model.b[t][t];
                let w: Vec<f64> = (0..dim)
                    .map(|col| (0..dim).map(|row| diag[row][col] * model.g[t][row]).sum())
                    .collect();
                iid::PeriodDist::Gaussian {
                    mean: model.g[t].iter().zip(&model.a[t]).map(|(g, a)| g * a).sum(),
                    sigma: w.iter().map(|x| x * x).sum::<f64>().sqrt(),
                    shift: w.iter().zip(&model.lambda[t]).map(|(w, l)| w * l).sum(),
                }
            })
            .collect();
        let closed = iid::iid_closed_form(&periods, &spec)?;
        let mean_q_total: f64 = periods.iter().map(|p| p.mean_q()).sum();
        // V_0 identities: gaussian v0 vs iid, and the K decomposition.
        max_dev = max_dev.max((out.v0 - closed.v[0]).abs());
        max_dev = max_dev.max((out.k_q[0] - (closed.v[0] - mean_q_total)).abs());
        for t in 0..horizon {
            max_dev = max_dev.max((out.c[t] - closed.c[t]).abs());
        }
        cases += 1;
    }
    Ok(Suite { name: "gaussian_iid", passed: max_dev < 1e-10, cases, max_deviation: max_dev })
}

/// minimize_psi against a coarse grid search on small one-instrument
/// trees.
fn psi_grid_suite(seed: u64) -> Result<Suite> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed ^ 0x5eed_0003);
    let mut max_dev = 0.0f64;
    let mut cases = 0;
    for _ in 0..3 {
        let tree = sim::random_tree(
            &mut rng,
            sim::TreeShape { max_horizon: 2, max_branching: 2, max_decision_nodes: 6 },
        );
        let liability = sim::random_flows(&mut rng, &tree, 1.0);
        let instrument: Vec<f64> = liability
            .iter()
            .enumerate()
            .map(|(n, &x)| {
                if tree.node(n).time == 0 {
                    0.0
                } else {
                    0.7 * x + 0.3 * sim::random_flows(&mut rng, &tree, 1.0)[n]
                }
            })
            .collect();
        let flows = liabval::tree::CashflowSet::new(
            &tree,
            liability,
            instrument.iter().map(|&x| vec![x]).collect(),
            1,
        )?;
        let spec = liabval::risk::RiskMeasureSpec::es(0.3);
        if !replication::check_wellposed(&tree, &flows, &spec, seed)?.passed() {
            continue;
        }
        let out = replication::minimize_psi(&tree, &flows, &spec, seed)?;
        let mut best = (f64::INFINITY, 0.0f64);
        let mut v = -5.0;
        while v <= 5.0 {
            let p = replication::psi_objective(&tree, &flows, &spec, &[v])?;
            if p < best.0 {
                best = (p, v);
            }
            v += 0.01;
        }
        max_dev = max_dev.max(out.objective - best.0 - 1e-12);
        let _ = best.1;
        cases += 1;
    }
    Ok(Suite {
        name: "psi_grid",
        passed: max_dev <= 1e-4,
        cases,
        max_deviation: max_dev.max(0.0),
    })
}
