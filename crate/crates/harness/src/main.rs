use std::fs::File;
use std::io::{self, BufWriter};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use edgecollab_harness::{
    evaluate_run_dir, heatmap, load_rows, load_system, write_heatmap, write_rows, AlgorithmChoice, ExperimentPlan,
    HarnessError, MetricsRow, Phase, Preset, Progress, Runner, Status,
};
use edgecollab_marl::Execution;

#[derive(Parser)]
#[command(name = "edgecollab", version, about = "Train, sweep and evaluate collaborative edge inference agents")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a plan without its sweep: every algorithm and seed on the base system.
    Train(RunArgs),
    /// Run a plan over every value of its sweep axis.
    Sweep(RunArgs),
    /// Re-evaluate a finished run from its manifest and checkpoint.
    Eval(EvalArgs),
    /// Parse and validate a plan or a system config, then print it resolved.
    ValidateConfig(ValidateArgs),
    /// Rank per-user evaluation costs into octile bands.
    ExportHeatmap(HeatmapArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Plan file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output root; the plan writes to `<out>/<plan name>`.
    #[arg(long, env = "EDGECOLLAB_OUT", default_value = "out")]
    out: PathBuf,
    /// Replace the plan's algorithms with this one.
    #[arg(long)]
    algorithm: Option<edgecollab_core::Algorithm>,
    /// Replace the plan's seeds.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long)]
    iterations: Option<usize>,
    /// Run rollouts on one thread.
    #[arg(long)]
    sequential: bool,
    /// Write per-slot evaluation traces next to each run.
    #[arg(long)]
    traces: bool,
    /// Exit with code 4 if any evaluation mean delay exceeds this.
    #[arg(long)]
    max_delay: Option<f64>,
    #[arg(long, short)]
    quiet: bool,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    run_dir: PathBuf,
    #[arg(long)]
    episodes: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Per-slot trace CSV to write.
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long)]
    max_delay: Option<f64>,
}

#[derive(Args)]
struct ValidateArgs {
    /// System config overrides (TOML) on top of `--preset`.
    #[arg(long, conflicts_with = "plan", required_unless_present = "plan")]
    config: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "desk")]
    preset: PresetArg,
    /// Plan file (TOML).
    #[arg(long)]
    plan: Option<PathBuf>,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum PresetArg {
    Desk,
    Full,
}

#[derive(Args)]
struct HeatmapArgs {
    /// Metrics CSVs to pool.
    #[arg(long, num_args = 1.., required = true)]
    metrics: Vec<PathBuf>,
    /// Output CSV; stdout when absent.
    #[arg(long)]
    output: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(command: Command) -> Result<(), HarnessError> {
    match command {
        Command::Train(args) => run_plan(args, false),
        Command::Sweep(args) => run_plan(args, true),
        Command::Eval(args) => {
            let (row, _) = evaluate_run_dir(&args.run_dir, args.episodes, args.seed, args.trace.as_deref())?;
            write_rows(io::stdout().lock(), std::slice::from_ref(&row))?;
            check_delay(std::slice::from_ref(&row), args.max_delay)
        }
        Command::ValidateConfig(args) => {
            let text = match (&args.plan, &args.config) {
                (Some(path), _) => serde_json::to_string_pretty(&ExperimentPlan::load(path)?)?,
                (None, Some(path)) => {
                    let preset = match args.preset {
                        PresetArg::Desk => Preset::Desk,
                        PresetArg::Full => Preset::Full,
                    };
                    load_system(path, preset)?.to_toml()
                }
                (None, None) => unreachable!("clap requires one of --plan and --config"),
            };
            println!("{text}");
            Ok(())
        }
        Command::ExportHeatmap(args) => {
            let mut rows = Vec::new();
            for path in &args.metrics {
                rows.extend(load_rows(path)?);
            }
            let cells = heatmap(&rows)?;
            match &args.output {
                Some(path) => {
                    let file = File::create(path).map_err(|e| HarnessError::io(path, e))?;
                    write_heatmap(BufWriter::new(file), &cells)
                }
                None => write_heatmap(io::stdout().lock(), &cells),
            }
        }
    }
}

fn run_plan(args: RunArgs, sweep: bool) -> Result<(), HarnessError> {
    let mut plan = ExperimentPlan::load(&args.config)?;
    if sweep && plan.sweep.is_none() {
        return Err(HarnessError::Plan(format!("{}: plan has no sweep", args.config.display())));
    }
    if !sweep {
        plan.sweep = None;
    }
    if let Some(a) = args.algorithm {
        plan.algorithms = vec![AlgorithmChoice::Named(a)];
    }
    if let Some(s) = args.seeds {
        plan.seeds = s;
    }
    if let Some(n) = args.iterations {
        plan.iterations = n;
        plan.train.iterations = n;
    }
    let runner = Runner {
        out_root: args.out,
        execution: if args.sequential { Execution::Sequential } else { Execution::Parallel },
        traces: args.traces,
    };
    let quiet = args.quiet;
    let mut report = |p: Progress| {
        if quiet {
            return;
        }
        match p {
            Progress::Started(run) => eprintln!("{}: started", run.id),
            Progress::Iteration(run, m) if (m.iteration + 1) % 10 == 0 => eprintln!(
                "{}: iteration {} delay {:.3} lambda {:.3} energy {:.4} privacy {:.4}",
                run.id,
                m.iteration + 1,
                m.mean_delay,
                m.lambda,
                m.mean_energy,
                m.mean_privacy
            ),
            Progress::Iteration(..) => {}
            Progress::Finished(o) => match o.eval_row() {
                Some(r) => eprintln!(
                    "{}: done in {:.1}s, delay {:.3} cost {:.4} success {:.3}",
                    o.run.id,
                    o.elapsed_s,
                    r.mean_delay.unwrap_or(f64::NAN),
                    r.mean_user_cost.unwrap_or(f64::NAN),
                    r.success_rate.unwrap_or(f64::NAN)
                ),
                None => eprintln!("{}: failed", o.run.id),
            },
        }
    };
    let outcome = runner.run_plan(&plan, &mut report)?;
    eprintln!("metrics: {}", outcome.dir.join("metrics.csv").display());
    let rows: Vec<MetricsRow> = outcome.rows().cloned().collect();
    let failed: Vec<&str> = outcome.runs.iter().filter(|r| r.failed()).map(|r| r.run.id.as_str()).collect();
    if !failed.is_empty() {
        return Err(HarnessError::Run(format!("failed runs: {}", failed.join(", "))));
    }
    check_delay(&rows, args.max_delay)
}

fn check_delay(rows: &[MetricsRow], max_delay: Option<f64>) -> Result<(), HarnessError> {
    let Some(max) = max_delay else { return Ok(()) };
    let over: Vec<String> = rows
        .iter()
        .filter(|r| r.phase == Phase::Eval && r.status == Status::Ok)
        .filter_map(|r| r.mean_delay.filter(|&d| d > max).map(|d| format!("{} ({d:.3} s)", r.run_id)))
        .collect();
    if over.is_empty() {
        Ok(())
    } else {
        Err(HarnessError::Check(format!("mean delay above {max} s: {}", over.join(", "))))
    }
}
