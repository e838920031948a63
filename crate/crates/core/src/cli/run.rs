use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{load_schedule, write_json, RunConfig, RunLock};
use crate::arch::{flop_count, param_count, ArchitectureSpec, ChannelSchedule};
use crate::data::{channel_stats, normalize, stratified_split, ChannelStats, LabeledDataset};
use crate::error::{Error, Result};
use crate::growth::Genotype;
use crate::network::NetworkInstance;
use crate::search::{individual_rng, run_search, Individual, LogWriter, SearchContext, TrainingEvaluator};
use crate::tensor::{read_checkpoint, write_checkpoint};
use crate::train::{evaluate_accuracy, train};

pub struct PreparedData {
    pub train: LabeledDataset,
    pub validation: LabeledDataset,
    pub test: Option<LabeledDataset>,
    /// Computed on the training split only.
    pub stats: ChannelStats,
}

fn check_fits(spec: &ArchitectureSpec, data: &LabeledDataset, what: &str) -> Result<()> {
    if data.dims() != spec.input {
        return Err(Error::input(format!(
            "{what} images are {:?} but {} expects {:?}",
            data.dims(),
            spec.name,
            spec.input
        )));
    }
    if data.class_count() != spec.classes {
        return Err(Error::input(format!(
            "{what} has {} classes but {} has {}",
            data.class_count(),
            spec.name,
            spec.classes
        )));
    }
    Ok(())
}

/// Loads, splits and normalizes the run's data.
pub fn prepare_data(cfg: &RunConfig, spec: &ArchitectureSpec) -> Result<PreparedData> {
    let full = cfg.dataset.load()?;
    check_fits(spec, &full, "dataset")?;
    let (train, validation) = stratified_split(&full, cfg.holdout, cfg.search.seed)?;
    let stats = channel_stats(&train);
    let test = match &cfg.test_dataset {
        Some(src) => {
            let t = src.load()?;
            check_fits(spec, &t, "test dataset")?;
            Some(normalize(&t, &stats)?)
        }
        None => None,
    };
    Ok(PreparedData {
        train: normalize(&train, &stats)?,
        validation: normalize(&validation, &stats)?,
        test,
        stats,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunHeader {
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub config: RunConfig,
    pub normalization: ChannelStats,
    pub train_size: usize,
    pub validation_size: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BestRecord {
    pub id: u64,
    pub parent_id: Option<u64>,
    pub schedule: ChannelSchedule,
    pub genotype: Genotype,
    pub params: u64,
    pub flops: u64,
    pub fitness: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchSummary {
    pub initial_params: u64,
    pub initial_accuracy: f64,
    pub param_budget: u64,
    pub steps: usize,
    pub budget_reached: bool,
    pub seed_best_fitness: f64,
    pub best: BestRecord,
}

fn header(cfg: &RunConfig, command: &str, data: &PreparedData) -> RunHeader {
    RunHeader {
        version: env!("CARGO_PKG_VERSION").into(),
        command: command.into(),
        seed: cfg.search.seed,
        config: cfg.clone(),
        normalization: data.stats.clone(),
        train_size: data.train.len(),
        validation_size: data.validation.len(),
    }
}

/// Full search run. Writes `header.json`, `log.csv` (flushed per event),
/// `best_schedule.json`, `best.ckpt` and `summary.json` into the output
/// directory.
pub fn search_run(cfg: &RunConfig) -> Result<SearchSummary> {
    cfg.validate()?;
    let spec = cfg.spec()?;
    let dir = &cfg.output_dir;
    let _lock = RunLock::acquire(dir)?;
    let data = prepare_data(cfg, &spec)?;
    write_json(&dir.join("header.json"), &header(cfg, "search", &data))?;

    let seed = cfg.search.seed;
    let mut rng = individual_rng(seed, 0);
    let base = spec.uniform_schedule(cfg.base_width);
    let mut net = NetworkInstance::<f32>::materialize(&spec, &base, &mut rng)?;
    let init_cfg = cfg.train.clone().with_epochs(cfg.search.init_epochs);
    train(&mut net, &data.train, &init_cfg, cfg.augment.as_ref(), &mut rng)?;
    let initial_accuracy = evaluate_accuracy(&net, &data.validation, cfg.train.batch_size)?;
    let initial_params = net.param_count();
    if cfg.verbosity > 0 {
        eprintln!("initial model: {initial_params} params, validation accuracy {initial_accuracy:.4}");
    }

    let slots = spec.slot_widths(&base)?;
    let genotype = Genotype::new(slots.iter().map(|&w| w as f64).collect(), cfg.search.mode);
    let initial = Individual::initial(&spec, genotype, Some(net))?;
    let mut search = cfg.search.clone();
    if search.param_budget == 0 {
        search.param_budget = (cfg.budget_multiplier * initial_params as f64).round() as u64;
    }
    let param_budget = search.param_budget;
    let ctx = SearchContext::new(spec.clone(), search)?;
    let mut evaluator = TrainingEvaluator::new(
        data.train,
        data.validation,
        cfg.train.clone().with_epochs(cfg.search.child_epochs),
    );
    evaluator.augmentation = cfg.augment.clone();

    let mut log = LogWriter::new(File::create(dir.join("log.csv"))?);
    let verbose = cfg.verbosity > 0;
    let outcome = run_search(&ctx, &initial, &evaluator, |row| {
        if verbose {
            eprintln!(
                "{:>8.1}s {:<6} id {:>4} <- {:>4} {:<5} params {:>9} fitness {:.4} best {:.4} pop {}",
                row.wallclock_s,
                format!("{:?}", row.event).to_lowercase(),
                row.individual_id,
                row.parent_id,
                row.mutation_tag.tag(),
                row.params,
                row.fitness,
                row.best_fitness,
                row.population_size
            );
        }
        log.write(row)
    })?;
    if !outcome.budget_reached {
        eprintln!(
            "warning: generation cap reached before the budget ({} of {} params)",
            outcome.best.params, param_budget
        );
    }

    let best = &outcome.best;
    let record = BestRecord {
        id: best.id,
        parent_id: best.parent_id,
        schedule: best.schedule.clone(),
        genotype: best.genotype.clone(),
        params: best.params,
        flops: flop_count(&spec, &best.schedule)?,
        fitness: best.fitness().unwrap_or(f64::NAN),
    };
    write_json(&dir.join("best_schedule.json"), &record)?;
    if let Some(net) = &best.network {
        write_checkpoint(BufWriter::new(File::create(dir.join("best.ckpt"))?), &net.to_checkpoint())?;
    }
    let seed_best_fitness = outcome
        .log
        .iter()
        .take(cfg.search.p1)
        .map(|r| r.fitness)
        .fold(f64::NEG_INFINITY, f64::max);
    let summary = SearchSummary {
        initial_params,
        initial_accuracy,
        param_budget,
        steps: outcome.steps,
        budget_reached: outcome.budget_reached,
        seed_best_fitness,
        best: record,
    };
    write_json(&dir.join("summary.json"), &summary)?;
    Ok(summary)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schedule: ChannelSchedule,
    pub params: u64,
    pub epochs: usize,
    pub batch_size: usize,
    pub momentum: f64,
    pub from_checkpoint: bool,
    /// Accuracy on the test set, or on the validation split without one.
    pub accuracy: f64,
    pub evaluated_on: String,
    pub chance: f64,
}

/// Trains a schedule (optionally from a checkpoint) for `cfg.train.epochs`
/// and reports held-out accuracy. Writes `eval_header.json` and
/// `eval_report.json` when `out_dir` is given.
pub fn eval_run(cfg: &RunConfig, schedule: &str, checkpoint: Option<&Path>, out_dir: Option<&Path>) -> Result<EvalReport> {
    cfg.validate()?;
    let spec = cfg.spec()?;
    let schedule = load_schedule(schedule)?;
    spec.check_schedule(&schedule)?;
    let data = prepare_data(cfg, &spec)?;
    let _lock = match out_dir {
        Some(d) => {
            let lock = RunLock::acquire(d)?;
            write_json(&d.join("eval_header.json"), &header(cfg, "eval", &data))?;
            Some(lock)
        }
        None => None,
    };
    let mut rng = individual_rng(cfg.search.seed, 0);
    let mut net = NetworkInstance::<f32>::materialize(&spec, &schedule, &mut rng)?;
    if let Some(path) = checkpoint {
        let f = File::open(path).map_err(|e| Error::input(format!("cannot open {}: {e}", path.display())))?;
        net.load_checkpoint(&read_checkpoint(std::io::BufReader::new(f))?)?;
    }
    if cfg.train.epochs > 0 {
        train(&mut net, &data.train, &cfg.train, cfg.augment.as_ref(), &mut rng)?;
    }
    let (target, name) = match &data.test {
        Some(t) => (t, "test"),
        None => (&data.validation, "validation"),
    };
    let report = EvalReport {
        params: param_count(&spec, &schedule)?,
        schedule,
        epochs: cfg.train.epochs,
        batch_size: cfg.train.batch_size,
        momentum: cfg.train.momentum,
        from_checkpoint: checkpoint.is_some(),
        accuracy: evaluate_accuracy(&net, target, cfg.train.batch_size)?,
        evaluated_on: name.into(),
        chance: 1.0 / spec.classes as f64,
    };
    if let Some(d) = out_dir {
        write_json(&d.join("eval_report.json"), &report)?;
    }
    Ok(report)
}
