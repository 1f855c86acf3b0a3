//! `repnet`: validate domains, plan, simulate and benchmark.
//!
//! Exit codes: 0 success, 1 validation failure / oracle disagreement /
//! simulation fault, 2 invalid input. Only machine-readable payloads go to
//! stdout.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use repnet::bench::{self, Grid};
use repnet::domain::{load_spec, ActionId, AgentId, DomainSpec, SpecError};
use repnet::oracle::enumerate_plan;
use repnet::planner::{oi, PlanConfig};
use repnet::simulator::{self, Policy, PolicySpec};

const ORACLE_TOLERANCE: f64 = 1e-9;
const ORACLE_TREE_LIMIT: u64 = 50_000_000;

#[derive(Parser)]
#[command(name = "repnet", version, about = "Reputation-network POMDP toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a domain file; prints OK or one line per violation.
    Validate { spec: PathBuf },
    /// Optimal-impact planning for one agent from its initial view.
    Plan {
        spec: PathBuf,
        #[arg(long)]
        agent: String,
        #[arg(long)]
        horizon: usize,
        /// Cross-check against the brute-force policy enumerator.
        #[arg(long)]
        oracle: bool,
    },
    /// Run the ground-truth simulator and write a JSON Lines trace.
    Simulate {
        spec: PathBuf,
        #[arg(long)]
        steps: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// AGENT=POLICY, repeatable. POLICY is `plan:K`, `random`,
        /// `fixed:a1,a2,...` (cycled) or `stationary:p,p,...;p,p,...`
        /// (one action distribution per state). Unlisted agents act randomly.
        #[arg(long = "policy", value_name = "AGENT=POLICY")]
        policies: Vec<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Planner node counts over a grid such as `G=2;S=2;A=1,2;O=1,2;k=1,2,3`.
    Bench {
        #[arg(long)]
        grid: String,
        /// CSV destination; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = bench::DEFAULT_NODE_CAP)]
        cap: u64,
    },
}

enum Failure {
    /// Exit 1.
    Check(String),
    /// Exit 2.
    Input(String),
}

type CmdResult = Result<(), Failure>;

fn input(e: impl ToString) -> Failure {
    Failure::Input(e.to_string())
}

fn load(path: &PathBuf) -> Result<DomainSpec, Failure> {
    load_spec(path).map_err(input)
}

fn agent(spec: &DomainSpec, name: &str) -> Result<AgentId, Failure> {
    spec.agent_by_name(name)
        .ok_or_else(|| Failure::Input(format!("unknown agent {name:?}")))
}

fn print_json(v: &serde_json::Value) -> CmdResult {
    let mut out = io::stdout().lock();
    writeln!(out, "{v}").map_err(input)
}

fn cmd_validate(path: &PathBuf) -> CmdResult {
    match load_spec(path) {
        Ok(_) => {
            println!("OK");
            Ok(())
        }
        Err(SpecError::Validation(violations)) => {
            for v in &violations {
                println!("{v}");
            }
            Err(Failure::Check(format!("{} violation(s)", violations.len())))
        }
        Err(e) => Err(input(e)),
    }
}

fn cmd_plan(path: &PathBuf, agent_name: &str, horizon: usize, oracle: bool) -> CmdResult {
    let spec = load(path)?;
    let g = agent(&spec, agent_name)?;
    if horizon < 1 {
        return Err(Failure::Input("horizon must be at least 1".into()));
    }
    let view = spec.initial_view(g);
    let result = oi(&spec, view, &PlanConfig::new(&spec, g, horizon)).map_err(input)?;
    let mut payload = result.to_json(&spec);
    let mut disagreement = None;
    if oracle {
        let check = enumerate_plan(&spec, view, horizon, spec.hyper.gamma, ORACLE_TREE_LIMIT)
            .map_err(input)?;
        let diff = (check.value - result.value).abs();
        let agrees = diff <= ORACLE_TOLERANCE && check.best_action == result.best_action;
        payload["oracle"] = serde_json::json!({
            "best_action": spec.action(check.best_action).name,
            "value": check.value,
            "agrees": agrees,
        });
        if !agrees {
            disagreement = Some(format!(
                "oracle disagrees: value {} vs {}, action {} vs {}",
                result.value,
                check.value,
                spec.action(result.best_action).name,
                spec.action(check.best_action).name
            ));
        }
    }
    print_json(&payload)?;
    disagreement.map_or(Ok(()), |m| Err(Failure::Check(m)))
}

fn parse_policy(spec: &DomainSpec, text: &str, steps: u64) -> Result<Policy, Failure> {
    let (kind, arg) = text.split_once(':').unwrap_or((text, ""));
    let bad = |m: String| Failure::Input(format!("policy {text:?}: {m}"));
    match kind {
        "random" => Ok(Policy::Random),
        "plan" => arg
            .parse::<usize>()
            .ok()
            .filter(|&k| k >= 1)
            .map(|horizon| Policy::Plan { horizon })
            .ok_or_else(|| bad("expected plan:K with K >= 1".into())),
        "fixed" => {
            let script = arg
                .split(',')
                .map(|n| {
                    spec.action_by_name(n.trim())
                        .ok_or_else(|| bad(format!("unknown action {n:?}")))
                })
                .collect::<Result<Vec<ActionId>, _>>()?;
            Ok(Policy::Fixed(
                script
                    .iter()
                    .copied()
                    .cycle()
                    .take(steps as usize)
                    .collect(),
            ))
        }
        "stationary" => {
            let rows = arg
                .split(';')
                .map(|row| {
                    row.split(',')
                        .map(|p| p.trim().parse::<f64>().map_err(|e| bad(e.to_string())))
                        .collect::<Result<Vec<f64>, _>>()
                })
                .collect::<Result<Vec<_>, _>>()?;
            Ok(Policy::Stationary(rows))
        }
        _ => Err(bad(
            "expected plan:K, random, fixed:... or stationary:...".into()
        )),
    }
}

fn cmd_simulate(
    path: &PathBuf,
    steps: u64,
    seed: u64,
    policies: &[String],
    out: &PathBuf,
) -> CmdResult {
    let spec = load(path)?;
    let mut per_agent = vec![Policy::Random; spec.n_agents()];
    for p in policies {
        let (name, policy) = p
            .split_once('=')
            .ok_or_else(|| Failure::Input(format!("expected AGENT=POLICY, got {p:?}")))?;
        per_agent[agent(&spec, name)?.0] = parse_policy(&spec, policy, steps)?;
    }
    let policies = PolicySpec { per_agent };
    policies.check(&spec, steps).map_err(input)?;
    let records = match simulator::run(&spec, &policies, steps, seed) {
        Ok(r) => r,
        Err(e @ simulator::SimError::InvalidPolicy(_)) => return Err(input(e)),
        Err(e) => return Err(Failure::Check(e.to_string())),
    };
    let file = File::create(out)
        .map_err(|e| Failure::Input(format!("cannot create {}: {e}", out.display())))?;
    simulator::write_trace(&spec, &records, BufWriter::new(file)).map_err(input)?;
    let totals: serde_json::Map<String, serde_json::Value> = spec
        .agents
        .iter()
        .zip(simulator::cumulative_impact(&spec, &records))
        .map(|(n, v)| (n.clone(), serde_json::json!(v)))
        .collect();
    print_json(&serde_json::json!({
        "steps": steps,
        "seed": seed,
        "trace": out.display().to_string(),
        "cumulative_impact": totals,
    }))
}

fn cmd_bench(grid: &str, out: Option<&PathBuf>, seed: u64, cap: u64) -> CmdResult {
    let grid: Grid = grid.parse().map_err(input)?;
    let rows = bench::run_grid(&grid, seed, cap).map_err(input)?;
    match out {
        Some(path) => {
            let file = File::create(path)
                .map_err(|e| Failure::Input(format!("cannot create {}: {e}", path.display())))?;
            bench::write_csv(&rows, BufWriter::new(file)).map_err(input)
        }
        None => bench::write_csv(&rows, io::stdout().lock()).map_err(input),
    }
}

fn configure_threads() {
    if let Some(n) = std::env::var("REPNET_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
    {
        if n > 0 {
            if let Err(e) = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
            {
                eprintln!("repnet: cannot set thread count: {e}");
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    configure_threads();
    let result = match &cli.command {
        Command::Validate { spec } => cmd_validate(spec),
        Command::Plan {
            spec,
            agent,
            horizon,
            oracle,
        } => cmd_plan(spec, agent, *horizon, *oracle),
        Command::Simulate {
            spec,
            steps,
            seed,
            policies,
            out,
        } => cmd_simulate(spec, *steps, *seed, policies, out),
        Command::Bench {
            grid,
            out,
            seed,
            cap,
        } => cmd_bench(grid, out.as_ref(), *seed, *cap),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Check(m)) => {
            eprintln!("repnet: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Input(m)) => {
            eprintln!("repnet: {m}");
            ExitCode::from(2)
        }
    }
}
