//! Command-line driver for the race simulator.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use toctou_sim::agent::{AgentProfile, BindingMode, PlanningLatency};
use toctou_sim::harness::{self, ExperimentConfig, HarnessError, ReportFormat, Summary};
use toctou_sim::page::ObservationMode;
use toctou_sim::runner::{self, LoopConfig};
use toctou_sim::scenario;
use toctou_sim::stress::{
    analytic_p, max_success, monte_carlo_outcomes, success_curve, AttackStrategy, LatencyModel,
    McPath,
};

const OUTPUT_ENV: &str = "TOCTOU_SIM_OUTPUT";
const JOBS_ENV: &str = "TOCTOU_SIM_JOBS";

#[derive(Parser)]
#[command(
    name = "toctou-sim",
    version,
    about = "Deterministic simulator and benchmark for check-to-use races in browser agents"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// List the bundled scenarios.
    ListScenarios,
    /// Run one scenario with one agent profile and print the outcome.
    Run(RunArgs),
    /// Run a whole experiment matrix from a config file and write reports.
    Bench(BenchArgs),
    /// Residual-window analysis: analytic curve plus Monte Carlo trials.
    Stress(StressArgs),
    /// Re-emit report files from a previously written results.json.
    Report(ReportArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Bundled id (s1..s9) or path to a scenario file.
    scenario: String,
    /// Agent profile: `coordinate` (screenshot + coordinates) or `selector`
    /// (structured + element selectors).
    #[arg(long, default_value = "coordinate")]
    profile: String,
    /// Pre-execution validation: on or off.
    #[arg(long, default_value = "off")]
    validate: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Planning latency: `fixed:MS` or `uniform:LO,HI` (ms).
    #[arg(long, default_value = "fixed:10000")]
    latency: String,
    /// Residual window between validation and dispatch (ms).
    #[arg(long, default_value_t = runner::DEFAULT_RESIDUAL_WINDOW_MS)]
    residual_ms: u64,
    #[arg(long, default_value_t = 3)]
    max_iterations: u32,
    /// Print the full run result as JSON instead of a summary.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct BenchArgs {
    /// Experiment config file (JSON).
    config: PathBuf,
    /// Output directory (also via TOCTOU_SIM_OUTPUT).
    #[arg(long)]
    output: Option<PathBuf>,
    /// Worker threads (also via TOCTOU_SIM_JOBS).
    #[arg(long)]
    jobs: Option<usize>,
    /// Comma-separated formats: grid,csv,json.
    #[arg(long, default_value = "grid,csv,json")]
    formats: String,
}

#[derive(Args)]
struct StressArgs {
    /// Lower latency bound a (seconds).
    #[arg(long)]
    a: f64,
    /// Upper latency bound b (seconds).
    #[arg(long)]
    b: f64,
    /// Residual window w (seconds).
    #[arg(long)]
    w: f64,
    /// Attack strategy: `fixed:T` or `uniform:LO,HI` (seconds).
    #[arg(long)]
    strategy: String,
    #[arg(long, default_value_t = 1000)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Drive full simulator runs per trial instead of the closed-form
    /// membership test.
    #[arg(long)]
    full_sim: bool,
    /// Step of the emitted (t, p) curve (seconds).
    #[arg(long, default_value_t = 0.01)]
    curve_step: f64,
    /// Output directory for curve.csv and trials.csv (also via
    /// TOCTOU_SIM_OUTPUT). Without it, only the summary is printed.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// Path to a results.json written by `bench`.
    results: PathBuf,
    /// Format to emit: grid, csv, or json.
    #[arg(long, default_value = "grid")]
    format: String,
    /// Output directory; prints to stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
}

fn main() -> ExitCode {
    // Die quietly when a downstream pipe closes (e.g. `bench ... | head`).
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::ListScenarios => list_scenarios(),
        Command::Run(args) => run_one(args),
        Command::Bench(args) => bench(args),
        Command::Stress(args) => stress(args),
        Command::Report(args) => report(args),
    }
}

fn output_dir(flag: Option<PathBuf>) -> Option<PathBuf> {
    flag.or_else(|| std::env::var_os(OUTPUT_ENV).map(PathBuf::from))
}

fn job_count(flag: Option<usize>) -> usize {
    flag.or_else(|| std::env::var(JOBS_ENV).ok().and_then(|v| v.parse().ok()))
        .unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        })
}

fn list_scenarios() -> Result<(), HarnessError> {
    println!("{:<4} {:<5} {:<28} schedule", "id", "type", "goal");
    for id in scenario::bundled_ids() {
        let s = scenario::load_bundled(id)?;
        println!(
            "{:<4} {:<5} {:<28} {} entries, first at {} ms",
            s.id,
            s.ty.to_string(),
            s.task.goal,
            s.schedule.entries().len(),
            s.schedule.entries().first().map(|e| e.at_ms).unwrap_or(0),
        );
    }
    Ok(())
}

fn parse_latency(spec: &str) -> Result<PlanningLatency, HarnessError> {
    let bad = || HarnessError::BadConfig(format!("cannot parse latency '{spec}'"));
    if let Some(ms) = spec.strip_prefix("fixed:") {
        return Ok(PlanningLatency::Fixed {
            ms: ms.parse().map_err(|_| bad())?,
        });
    }
    if let Some(range) = spec.strip_prefix("uniform:") {
        let (lo, hi) = range.split_once(',').ok_or_else(bad)?;
        return Ok(PlanningLatency::Uniform {
            lo_ms: lo.trim().parse().map_err(|_| bad())?,
            hi_ms: hi.trim().parse().map_err(|_| bad())?,
        });
    }
    Err(bad())
}

fn parse_profile(name: &str, latency: PlanningLatency) -> Result<AgentProfile, HarnessError> {
    match name {
        "coordinate" => Ok(AgentProfile::coordinate(latency)),
        "selector" => Ok(AgentProfile::selector(latency)),
        "hybrid-coordinate" => Ok(AgentProfile {
            name: name.into(),
            obs_mode: ObservationMode::Hybrid,
            binding: BindingMode::Coordinate,
            latency,
        }),
        "hybrid-selector" => Ok(AgentProfile {
            name: name.into(),
            obs_mode: ObservationMode::Hybrid,
            binding: BindingMode::ElementSelector,
            latency,
        }),
        other => Err(HarnessError::BadConfig(format!(
            "unknown profile '{other}' (expected coordinate, selector, hybrid-coordinate, hybrid-selector)"
        ))),
    }
}

fn run_one(args: RunArgs) -> Result<(), HarnessError> {
    let scenario = harness::resolve_scenario(&args.scenario)?;
    let latency = parse_latency(&args.latency)?;
    let profile = parse_profile(&args.profile, latency)?;
    let validation_enabled = match args.validate.as_str() {
        "on" => true,
        "off" => false,
        other => {
            return Err(HarnessError::BadConfig(format!(
                "--validate must be on or off, got '{other}'"
            )))
        }
    };
    let config = LoopConfig {
        validation_enabled,
        residual_window_ms: args.residual_ms,
        max_iterations: args.max_iterations,
        ..LoopConfig::default()
    };
    let result = runner::run_case(&scenario, &profile, &config, args.seed)?;

    if args.json {
        println!(
            "{}",
            serde_json::to_string_pretty(&result).expect("result serializes")
        );
        return Ok(());
    }

    println!(
        "scenario {} (type {}), profile {}, validation {}",
        result.scenario_id,
        scenario.ty,
        result.profile,
        if validation_enabled { "on" } else { "off" }
    );
    for (i, trace) in result.traces.iter().enumerate() {
        println!(
            "  step {}: check@{}ms validate@{}ms act@{}ms -> {:?}{}",
            i + 1,
            trace.t_check,
            trace.t_validate,
            trace.t_act,
            trace.outcome,
            if trace.violation { " [RACE]" } else { "" }
        );
    }
    println!(
        "oracle: {} | triggered: {}{}",
        if result.oracle_pass { "pass" } else { "fail" },
        result.triggered,
        result
            .failure_reason
            .as_deref()
            .map(|r| format!(" | reason: {r}"))
            .unwrap_or_default()
    );
    Ok(())
}

fn parse_formats(spec: &str) -> Result<Vec<ReportFormat>, HarnessError> {
    spec.split(',')
        .map(|f| match f.trim() {
            "grid" => Ok(ReportFormat::Grid),
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => Err(HarnessError::BadConfig(format!("unknown format '{other}'"))),
        })
        .collect()
}

fn bench(args: BenchArgs) -> Result<(), HarnessError> {
    let config = ExperimentConfig::from_file(&args.config)?;
    let jobs = job_count(args.jobs);
    let formats = parse_formats(&args.formats)?;
    let out = output_dir(args.output).unwrap_or_else(|| PathBuf::from("bench-out"));

    let report = harness::run_matrix(&config, jobs)?;
    let written = harness::emit_report(&report, &out, &formats)?;

    print!("{}", harness::render_grid(&report.summary));
    for path in &written {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn stress(args: StressArgs) -> Result<(), HarnessError> {
    let model =
        LatencyModel::new(args.a, args.b).map_err(|e| HarnessError::BadConfig(e.to_string()))?;
    let strategy = parse_strategy(&args.strategy)?;
    let path = if args.full_sim {
        McPath::FullSim
    } else {
        McPath::Membership
    };
    let outcomes = monte_carlo_outcomes(&strategy, &model, args.w, args.trials, args.seed, path)
        .map_err(|e| HarnessError::BadConfig(e.to_string()))?;
    let triggers = outcomes.iter().filter(|o| o.success).count();
    let (peak, (t_lo, t_hi)) = max_success(&model, args.w);

    println!(
        "R ~ U[{}, {}] s, w = {} s, strategy = {}, path = {:?}",
        args.a, args.b, args.w, args.strategy, path
    );
    println!(
        "triggers: {} / {} = {:.5}",
        triggers,
        args.trials,
        triggers as f64 / args.trials as f64
    );
    println!(
        "analytic max: {:.5} attained for t in [{:.3}, {:.3}]",
        peak, t_lo, t_hi
    );
    if let AttackStrategy::FixedRefresh { t_s } = strategy {
        println!(
            "analytic p(t={t_s}): {:.5}",
            analytic_p(t_s, &model, args.w)
        );
    }

    if let Some(dir) = output_dir(args.output) {
        std::fs::create_dir_all(&dir).map_err(|source| HarnessError::Io {
            path: dir.display().to_string(),
            source,
        })?;
        let curve_path = dir.join("curve.csv");
        let mut curve = String::from("t_s,p\n");
        for (t, p) in success_curve(
            &model,
            args.w,
            (args.a - 1.0).max(0.0),
            args.b + args.w + 1.0,
            args.curve_step,
        ) {
            curve.push_str(&format!("{t:.4},{p:.8}\n"));
        }
        std::fs::write(&curve_path, curve).map_err(|source| HarnessError::Io {
            path: curve_path.display().to_string(),
            source,
        })?;
        println!("wrote {}", curve_path.display());

        let trials_path = dir.join("trials.csv");
        let mut lines = String::from("trial,latency_ms,refresh_ms,success\n");
        for o in &outcomes {
            lines.push_str(&format!(
                "{},{},{},{}\n",
                o.trial, o.latency_ms, o.refresh_ms, o.success
            ));
        }
        std::fs::write(&trials_path, lines).map_err(|source| HarnessError::Io {
            path: trials_path.display().to_string(),
            source,
        })?;
        println!("wrote {}", trials_path.display());
    }
    Ok(())
}

fn parse_strategy(spec: &str) -> Result<AttackStrategy, HarnessError> {
    let bad = || HarnessError::BadConfig(format!("cannot parse strategy '{spec}'"));
    if let Some(t) = spec.strip_prefix("fixed:") {
        return Ok(AttackStrategy::FixedRefresh {
            t_s: t.parse().map_err(|_| bad())?,
        });
    }
    if let Some(range) = spec.strip_prefix("uniform:") {
        let (lo, hi) = range.split_once(',').ok_or_else(bad)?;
        return Ok(AttackStrategy::UniformRandomRefresh {
            lo_s: lo.trim().parse().map_err(|_| bad())?,
            hi_s: hi.trim().parse().map_err(|_| bad())?,
        });
    }
    Err(bad())
}

fn report(args: ReportArgs) -> Result<(), HarnessError> {
    let raw = std::fs::read_to_string(&args.results).map_err(|source| HarnessError::Io {
        path: args.results.display().to_string(),
        source,
    })?;
    let summary: Summary = serde_json::from_str(&raw)?;
    let rendered = match args.format.as_str() {
        "grid" => harness::render_grid(&summary),
        "csv" => {
            let mut out = String::from("profile,validation,type,cases,triggered_cases,ratio\n");
            for r in &summary.ratios {
                out.push_str(&format!(
                    "{},{},{},{},{},{:.4}\n",
                    r.profile,
                    if r.validation { "on" } else { "off" },
                    r.scenario_type,
                    r.cases,
                    r.triggered_cases,
                    r.ratio
                ));
            }
            out
        }
        "json" => serde_json::to_string_pretty(&summary).expect("summary serializes"),
        other => {
            return Err(HarnessError::BadConfig(format!(
                "unknown format '{other}' (expected grid, csv, json)"
            )))
        }
    };
    match output_dir(args.output) {
        Some(dir) => {
            std::fs::create_dir_all(&dir).map_err(|source| HarnessError::Io {
                path: dir.display().to_string(),
                source,
            })?;
            let name = match args.format.as_str() {
                "grid" => "grid.txt",
                "csv" => "trigger_ratios.csv",
                _ => "results.json",
            };
            let path = dir.join(name);
            std::fs::write(&path, rendered).map_err(|source| HarnessError::Io {
                path: path.display().to_string(),
                source,
            })?;
            println!("wrote {}", path.display());
        }
        None => print!("{rendered}"),
    }
    Ok(())
}
