use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::arch::{fixtures, ArchitectureSpec, ChannelSchedule};
use crate::data::{load_binary_dataset, synthetic_dataset, AugmentConfig, LabeledDataset, SyntheticParams};
use crate::error::{Error, Result};
use crate::search::SearchConfig;
use crate::train::TrainConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum DatasetSource {
    Synthetic(SyntheticParams),
    /// CIFAR-style binary batches, concatenated in order.
    Binary { paths: Vec<PathBuf>, classes: usize },
}

impl Default for DatasetSource {
    fn default() -> Self {
        DatasetSource::Synthetic(SyntheticParams::new(0, 2000, 4, [16, 16, 3]))
    }
}

impl DatasetSource {
    fn resolve(&mut self, base: &Path) {
        if let DatasetSource::Binary { paths, .. } = self {
            for p in paths.iter_mut() {
                *p = base.join(&*p);
            }
        }
    }

    fn check_paths(&self) -> Result<()> {
        if let DatasetSource::Binary { paths, .. } = self {
            if paths.is_empty() {
                return Err(Error::input("binary dataset lists no files"));
            }
            for p in paths {
                if !p.is_file() {
                    return Err(Error::input(format!("dataset file {} does not exist", p.display())));
                }
            }
        }
        Ok(())
    }

    pub fn load(&self) -> Result<LabeledDataset> {
        match self {
            DatasetSource::Synthetic(p) => synthetic_dataset(p),
            DatasetSource::Binary { paths, classes } => {
                let mut data = load_binary_dataset(&paths[0], *classes)?;
                for p in &paths[1..] {
                    data.extend(&load_binary_dataset(p, *classes)?)?;
                }
                Ok(data)
            }
        }
    }
}

/// Everything a run needs, read from one JSON file. Missing fields take
/// their defaults; command-line flags override both.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// A spec JSON path or `fixture:NAME`.
    pub spec: String,
    pub base_width: usize,
    pub dataset: DatasetSource,
    /// Held-out evaluation set for `eval`; the validation split otherwise.
    pub test_dataset: Option<DatasetSource>,
    /// Validation images drawn by stratified sampling.
    pub holdout: usize,
    pub output_dir: PathBuf,
    pub verbosity: u8,
    /// Budget as a multiple of the initial model's parameters, used when
    /// `search.param_budget` is 0.
    pub budget_multiplier: f64,
    pub augment: Option<AugmentConfig>,
    pub search: SearchConfig,
    pub train: TrainConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            spec: "fixture:plain-cnn".into(),
            base_width: 8,
            dataset: DatasetSource::default(),
            test_dataset: None,
            holdout: 400,
            output_dir: PathBuf::from("run"),
            verbosity: 1,
            budget_multiplier: 4.0,
            augment: None,
            search: SearchConfig {
                child_epochs: 3,
                init_epochs: 3,
                ..SearchConfig::default()
            },
            train: TrainConfig::default(),
        }
    }
}

impl RunConfig {
    /// Reads a config file. Spec and dataset paths are taken relative to
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = read_text(path)?;
        let mut cfg: RunConfig = serde_json::from_str(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        if !cfg.spec.starts_with("fixture:") {
            cfg.spec = base.join(&cfg.spec).to_string_lossy().into_owned();
        }
        cfg.dataset.resolve(base);
        if let Some(t) = &mut cfg.test_dataset {
            t.resolve(base);
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.search.validate()?;
        self.train.validate()?;
        if self.base_width < 2 || self.base_width % 2 == 1 {
            return Err(Error::input(format!("base_width {} must be even and at least 2", self.base_width)));
        }
        if !(self.budget_multiplier > 1.0) {
            return Err(Error::input("budget_multiplier must exceed 1"));
        }
        self.dataset.check_paths()?;
        if let Some(t) = &self.test_dataset {
            t.check_paths()?;
        }
        Ok(())
    }

    pub fn spec(&self) -> Result<ArchitectureSpec> {
        load_spec(&self.spec)
    }
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::input(format!("cannot read {}: {e}", path.display())))
}

/// `fixture:NAME` or a path to a spec JSON file.
pub fn load_spec(source: &str) -> Result<ArchitectureSpec> {
    let spec = match source.strip_prefix("fixture:") {
        Some(name) => fixtures::by_name(name)?,
        None => ArchitectureSpec::from_json(&read_text(Path::new(source))?)?,
    };
    spec.validate()?;
    Ok(spec)
}

/// Reads `T` from a file holding either `T` itself or an object with a
/// `key` field holding `T` (as in `best_schedule.json`).
pub fn load_json_field<T: DeserializeOwned>(path: &Path, key: &str) -> Result<T> {
    let value: serde_json::Value = serde_json::from_str(&read_text(path)?)?;
    let inner = match value.get(key) {
        Some(v) => v.clone(),
        None => value,
    };
    Ok(serde_json::from_value(inner)?)
}

/// `published:NAME` or a schedule JSON path.
pub fn load_schedule(source: &str) -> Result<ChannelSchedule> {
    match source.strip_prefix("published:") {
        Some(name) => fixtures::published::by_name(name).ok_or_else(|| {
            Error::input(format!(
                "unknown published schedule {name}; known: {}",
                fixtures::published::NAMES.join(", ")
            ))
        }),
        None => load_json_field(Path::new(source), "schedule"),
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut f = File::create(path)?;
    serde_json::to_writer_pretty(&mut f, value)?;
    f.write_all(b"\n")?;
    Ok(())
}

/// Exclusive claim on a run directory, released on drop.
pub struct RunLock {
    path: PathBuf,
}

impl RunLock {
    pub fn acquire(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        let path = dir.join("run.lock");
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                writeln!(f, "{}", std::process::id())?;
                Ok(Self { path })
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(Error::input(format!(
                "{} is locked by another run (remove {} if stale)",
                dir.display(),
                path.display()
            ))),
            Err(e) => Err(e.into()),
        }
    }
}

impl Drop for RunLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}
