//! The `widthsearch` command line: `schedule`, `widen-check`, `search` and
//! `eval`. Each subcommand is also callable as a library function.
//!
//! Exit codes: 0 on success, 1 on internal failure (including a failed
//! preservation check), 2 on bad user input.

mod check;
mod config;
mod run;
mod schedule;

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use check::{print_check, widen_check, MutationDeviation, Precision, WidenCheck, WidenCheckReport, PRESERVATION_TOLERANCE};
pub use config::{load_json_field, load_schedule, load_spec, write_json, DatasetSource, RunConfig, RunLock};
pub use run::{eval_run, prepare_data, search_run, BestRecord, EvalReport, PreparedData, RunHeader, SearchSummary};
pub use schedule::{print_table, schedule_report, ScheduleReport, ScheduleSummary, UnitRow};

use crate::error::{Error, Result};
use crate::growth::Genotype;

#[derive(Debug, Parser)]
#[command(name = "widthsearch", version, about = "Evolutionary channel-width search for CNNs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Per-layer widths, parameters and MACs of a schedule.
    Schedule(ScheduleArgs),
    /// Check that every mutation's widening preserves the network function.
    WidenCheck(WidenCheckArgs),
    /// Run an evolutionary search.
    Search(SearchArgs),
    /// Train a schedule and report held-out accuracy.
    Eval(EvalArgs),
}

#[derive(Debug, Args)]
pub struct ScheduleArgs {
    /// Spec JSON path or `fixture:NAME`.
    #[arg(long)]
    pub spec: String,
    /// Genotype JSON (or a best_schedule.json).
    #[arg(long, conflicts_with_all = ["schedule", "uniform"])]
    pub genotype: Option<PathBuf>,
    /// Schedule JSON path or `published:NAME`.
    #[arg(long, conflicts_with = "uniform")]
    pub schedule: Option<String>,
    /// Same width in every slot.
    #[arg(long)]
    pub uniform: Option<usize>,
    /// Schedule to compare against.
    #[arg(long)]
    pub reference: Option<String>,
    /// Print JSON instead of a table.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct WidenCheckArgs {
    #[arg(long)]
    pub spec: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    /// Consumer noise bound; deviations are reported but not failed when > 0.
    #[arg(long, default_value_t = 0.0)]
    pub delta: f64,
    #[arg(long, default_value_t = 8)]
    pub base_width: usize,
    #[arg(long, value_enum, default_value_t = Precision::F32)]
    pub precision: Precision,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct SearchArgs {
    /// Run config JSON.
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub max_generations: Option<usize>,
    #[arg(long)]
    pub budget: Option<u64>,
    #[arg(long)]
    pub child_epochs: Option<usize>,
    #[arg(long)]
    pub init_epochs: Option<usize>,
    /// Silence per-event progress.
    #[arg(long, short)]
    pub quiet: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Schedule JSON (or best_schedule.json) or `published:NAME`.
    #[arg(long)]
    pub schedule: String,
    /// Start from these weights instead of a fresh initialization.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Directory for the eval header and report.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

pub fn exit_code(err: &Error) -> u8 {
    if err.is_user_error() {
        2
    } else {
        1
    }
}

fn cmd_schedule(args: &ScheduleArgs, out: &mut dyn Write) -> Result<u8> {
    let spec = load_spec(&args.spec)?;
    let schedule = match (&args.genotype, &args.schedule, args.uniform) {
        (Some(path), _, _) => {
            let g: Genotype = load_json_field(path, "genotype")?;
            g.validate()?;
            g.realize_for(&spec)?
        }
        (None, Some(s), _) => load_schedule(s)?,
        (None, None, Some(w)) => spec.uniform_schedule(w),
        (None, None, None) => return Err(Error::input("give one of --genotype, --schedule or --uniform")),
    };
    let reference = args.reference.as_deref().map(load_schedule).transpose()?;
    let report = schedule_report(&spec, &schedule, reference.as_ref())?;
    if args.json {
        serde_json::to_writer_pretty(&mut *out, &report)?;
        writeln!(out)?;
    } else {
        print_table(&report, out)?;
    }
    Ok(0)
}

fn cmd_widen_check(args: &WidenCheckArgs, out: &mut dyn Write) -> Result<u8> {
    let spec = load_spec(&args.spec)?;
    let cfg = WidenCheck {
        seed: args.seed,
        trials: args.trials,
        delta: args.delta,
        base_width: args.base_width,
        precision: args.precision,
        ..WidenCheck::default()
    };
    let report = widen_check(&spec, &cfg)?;
    if args.json {
        serde_json::to_writer_pretty(&mut *out, &report)?;
        writeln!(out)?;
    } else {
        print_check(&report, out)?;
    }
    Ok(if report.passed { 0 } else { 1 })
}

fn cmd_search(args: &SearchArgs, out: &mut dyn Write) -> Result<u8> {
    let mut cfg = RunConfig::load(&args.config)?;
    if let Some(s) = args.seed {
        cfg.search.seed = s;
    }
    if let Some(o) = &args.output {
        cfg.output_dir = o.clone();
    }
    if let Some(g) = args.max_generations {
        cfg.search.max_generations = g;
    }
    if let Some(b) = args.budget {
        cfg.search.param_budget = b;
    }
    if let Some(e) = args.child_epochs {
        cfg.search.child_epochs = e;
    }
    if let Some(e) = args.init_epochs {
        cfg.search.init_epochs = e;
    }
    if args.quiet {
        cfg.verbosity = 0;
    }
    let summary = search_run(&cfg)?;
    writeln!(
        out,
        "best individual {}: {} params, fitness {:.4} (seeded best {:.4}), {} steps, schedule {:?}",
        summary.best.id,
        summary.best.params,
        summary.best.fitness,
        summary.seed_best_fitness,
        summary.steps,
        summary.best.schedule.widths()
    )?;
    writeln!(out, "outputs in {}", cfg.output_dir.display())?;
    Ok(0)
}

fn cmd_eval(args: &EvalArgs, out: &mut dyn Write) -> Result<u8> {
    let mut cfg = RunConfig::load(&args.config)?;
    if let Some(e) = args.epochs {
        cfg.train.epochs = e;
    }
    if let Some(s) = args.seed {
        cfg.search.seed = s;
    }
    let report = eval_run(&cfg, &args.schedule, args.checkpoint.as_deref(), args.output.as_deref())?;
    writeln!(
        out,
        "{} accuracy {:.4} after {} epochs ({} params, chance {:.4})",
        report.evaluated_on, report.accuracy, report.epochs, report.params, report.chance
    )?;
    Ok(0)
}

/// Runs a parsed command, writing its report to `out`. Returns the exit code
/// for successful runs; errors map through [`exit_code`].
pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<u8> {
    match &cli.command {
        Command::Schedule(a) => cmd_schedule(a, out),
        Command::WidenCheck(a) => cmd_widen_check(a, out),
        Command::Search(a) => cmd_search(a, out),
        Command::Eval(a) => cmd_eval(a, out),
    }
}
