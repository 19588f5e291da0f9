use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hiertrack::bench::{
    emit_report, run_estimator_study, run_tracking_study, EstimatorStudyOptions, TrackingStudyOptions,
};
use hiertrack::scenario::{sample_scenario, PlannerKind, ScenarioConfig};
use hiertrack::seed::{derive_seed, rng_for, STREAM_SCENARIO};
use hiertrack::{run_episode, Error};

/// Multi-target search-and-track experiments.
#[derive(Parser)]
#[command(name = "hiertrack", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compare estimated and simulated find probability and find time.
    EstimatorStudy(EstimatorArgs),
    /// Run closed-loop episodes for several planners on shared random cases.
    TrackingStudy(TrackingArgs),
    /// Run one episode and print its result as JSON.
    SingleEpisode(EpisodeArgs),
}

#[derive(Args)]
struct Common {
    /// Master seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads.
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Record wall-clock runtimes (outputs are then no longer reproducible byte for byte).
    #[arg(long)]
    timing: bool,
}

#[derive(Args)]
struct EstimatorArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    cases: Option<usize>,
    /// Monte Carlo runs per case and departure delay.
    #[arg(long)]
    runs: Option<usize>,
    /// Departure delays in seconds.
    #[arg(long = "t-d", value_delimiter = ',')]
    t_d: Option<Vec<f64>>,
    /// 1000 cases with 10000 runs each.
    #[arg(long)]
    paper_scale: bool,
}

#[derive(Args)]
struct TrackingArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    cases: Option<usize>,
    /// Target counts, e.g. `2,3`.
    #[arg(long, value_delimiter = ',')]
    targets: Option<Vec<usize>>,
    /// Planners to compare, e.g. `mcts,greedy,random`.
    #[arg(long, value_delimiter = ',')]
    planner: Option<Vec<PlannerKind>>,
    /// MCTS iterations per decision.
    #[arg(long)]
    iterations: Option<usize>,
    /// UCB1 exploration constant.
    #[arg(long)]
    exploration: Option<f64>,
    /// Mission budget in seconds.
    #[arg(long)]
    budget: Option<f64>,
    /// 100 cases per target count.
    #[arg(long)]
    paper_scale: bool,
}

#[derive(Args)]
struct EpisodeArgs {
    /// Scenario JSON; a random scenario is drawn when absent.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Target count of a random scenario.
    #[arg(long, default_value_t = 2)]
    targets: usize,
    #[arg(long)]
    planner: Option<PlannerKind>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    exploration: Option<f64>,
    #[arg(long)]
    budget: Option<f64>,
    /// Write the full episode record here instead of printing a summary.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn read_config(path: &Path) -> Result<ScenarioConfig, Error> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::InvalidConfig(format!("cannot read {}: {e}", path.display())))?;
    ScenarioConfig::from_json(&text)
}

fn estimator_study(args: EstimatorArgs) -> Result<(), Error> {
    let base = if args.paper_scale { EstimatorStudyOptions::paper_scale() } else { EstimatorStudyOptions::default() };
    let opts = EstimatorStudyOptions {
        cases: args.cases.unwrap_or(base.cases),
        runs: args.runs.unwrap_or(base.runs),
        departure_delays: args.t_d.unwrap_or(base.departure_delays),
        seed: args.common.seed,
        workers: args.common.workers,
        timing: args.common.timing,
    };
    let report = run_estimator_study(&opts)?;
    let (csv, json) = emit_report(&report, &args.common.out)?;
    for a in report.aggregates().estimator {
        println!(
            "t_d = {:>5}  cases = {:>4}  MAPE(P_find) = {}  MAPE(E[T_find]) = {}  excluded = {}/{}",
            a.t_d,
            a.cases,
            percent(a.mape_pfind),
            percent(a.mape_tfind),
            a.pfind_excluded,
            a.tfind_excluded
        );
    }
    println!("wrote {} and {}", csv.display(), json.display());
    Ok(())
}

fn tracking_study(args: TrackingArgs) -> Result<(), Error> {
    let base = if args.paper_scale { TrackingStudyOptions::paper_scale() } else { TrackingStudyOptions::default() };
    let opts = TrackingStudyOptions {
        target_counts: args.targets.unwrap_or(base.target_counts),
        cases: args.cases.unwrap_or(base.cases),
        planners: args.planner.unwrap_or(base.planners),
        seed: args.common.seed,
        iterations: args.iterations.unwrap_or(base.iterations),
        exploration: args.exploration.unwrap_or(base.exploration),
        budget: args.budget.unwrap_or(base.budget),
        workers: args.common.workers,
        timing: args.common.timing,
    };
    let report = run_tracking_study(&opts)?;
    let (csv, json) = emit_report(&report, &args.common.out)?;
    let agg = report.aggregates();
    for t in &agg.tracking {
        println!(
            "n = {}  {:<6}  final U = {} ± {}  cases = {}  failures = {}",
            t.n_targets,
            t.planner,
            num(t.mean_final_u),
            num(t.std_final_u),
            t.cases,
            t.failures
        );
    }
    for p in agg.paired.iter().filter(|p| p.planner == "mcts") {
        println!("n = {}  mcts beats {:<6} in {}/{} cases", p.n_targets, p.baseline, p.wins, p.cases);
    }
    println!("wrote {} and {}", csv.display(), json.display());
    Ok(())
}

fn single_episode(args: EpisodeArgs) -> Result<(), Error> {
    let mut config = match &args.config {
        Some(path) => read_config(path)?,
        None => sample_scenario(args.targets, &mut rng_for(derive_seed(args.seed, &[STREAM_SCENARIO]), &[])),
    };
    if let Some(p) = args.planner {
        config.planner = p;
    }
    if let Some(i) = args.iterations {
        config.planner_params.iterations = i;
    }
    if let Some(c) = args.exploration {
        config.planner_params.exploration = c;
    }
    if let Some(b) = args.budget {
        config.budget = b;
    }
    config.validate()?;
    let episode = run_episode(&config, args.seed)?;
    match &args.out {
        Some(path) => {
            let text = serde_json::to_string_pretty(&episode).expect("episode serializes");
            std::fs::write(path, text)
                .map_err(|e| Error::Io { path: path.display().to_string(), message: e.to_string() })?;
        }
        None => {
            let summary = serde_json::json!({
                "planner": config.planner.name(),
                "seed": episode.seed,
                "steps": episode.steps,
                "final_U": episode.final_u,
                "detections": episode.detections.len(),
                "subtasks": episode.subtasks,
            });
            println!("{}", serde_json::to_string_pretty(&summary).expect("summary serializes"));
        }
    }
    Ok(())
}

fn percent(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".into(), |v| format!("{:.2}%", 100.0 * v))
}

fn num(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".into(), |v| format!("{v:.2}"))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::EstimatorStudy(a) => estimator_study(a),
        Command::TrackingStudy(a) => tracking_study(a),
        Command::SingleEpisode(a) => single_episode(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::InvalidConfig(_) | Error::SpeedInfeasible { .. } => ExitCode::from(1),
                _ => ExitCode::from(2),
            }
        }
    }
}
