use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use unlearn_core::data::{load_idx, make_blobs, split_forget_remain, ClassSplit, LabeledDataset};
use unlearn_core::engine::{TrainConfig, UnlearnConfig};
use unlearn_core::eval::MiaConfig;
use unlearn_core::losses::{LossConfig, Method};
use unlearn_core::model::MlpArch;

/// Overrides the configured output directory; `--out` still wins.
pub const OUT_ENV: &str = "ULCK_OUT";

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSpec {
    Blobs {
        num_classes: usize,
        per_class: usize,
        dim: usize,
        spread: f64,
        #[serde(default)]
        seed: u64,
    },
    /// Paths are relative to the config file.
    Idx {
        train_images: PathBuf,
        train_labels: PathBuf,
        test_images: PathBuf,
        test_labels: PathBuf,
    },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchSpec {
    pub hidden_dims: Vec<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: DatasetSpec,
    /// Defaults to 64-64 for blobs and 256-128 for IDX images.
    #[serde(default)]
    pub arch: Option<ArchSpec>,
    pub forget_classes: Vec<usize>,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default = "default_unlearn")]
    pub unlearn: UnlearnConfig,
    #[serde(default)]
    pub mia: MiaConfig,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    /// Seeds initialization, shuffling, re-labeling and the attack sample.
    /// Nested `seed` fields are overwritten with this value.
    #[serde(default)]
    pub seed: u64,
}

fn default_unlearn() -> UnlearnConfig {
    UnlearnConfig::new(LossConfig::new(Method::Delete))
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("runs")
}

/// A config plus the directory its relative paths resolve against.
pub struct Loaded {
    pub config: RunConfig,
    pub base: PathBuf,
}

pub fn load(path: &Path) -> Result<Loaded> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    let config: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let inner = e.inner();
        anyhow::anyhow!(
            "{}: line {}, column {}, at `{}`: {inner}",
            path.display(),
            inner.line(),
            inner.column(),
            e.path()
        )
    })?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(Loaded { config, base })
}

impl RunConfig {
    /// Applies `--seed` and pushes the run seed into every nested config.
    pub fn with_seed(mut self, seed: Option<u64>) -> Self {
        if let Some(s) = seed {
            self.seed = s;
        }
        self.train.seed = self.seed;
        self.unlearn.seed = self.seed;
        self.unlearn.loss.seed = self.seed;
        self.mia.seed = self.seed;
        self
    }

    /// `--out`, then `ULCK_OUT`, then the config's `out_dir` (relative to
    /// the config file).
    pub fn out_dir(&self, flag: Option<&Path>, base: &Path) -> PathBuf {
        if let Some(p) = flag {
            return p.to_path_buf();
        }
        if let Some(p) = std::env::var_os(OUT_ENV).filter(|v| !v.is_empty()) {
            return PathBuf::from(p);
        }
        base.join(&self.out_dir)
    }
}

pub struct Prepared {
    pub arch: MlpArch,
    pub train: LabeledDataset,
    pub split: ClassSplit,
}

/// Builds or loads the data, checks the forget set and derives the
/// architecture. Errors here are configuration errors.
pub fn prepare(loaded: &Loaded) -> Result<Prepared> {
    let cfg = &loaded.config;
    let (train, test) = match &cfg.dataset {
        DatasetSpec::Blobs { num_classes, per_class, dim, spread, seed } => {
            make_blobs(*num_classes, *per_class, *dim, *spread, *seed)?
        }
        DatasetSpec::Idx { train_images, train_labels, test_images, test_labels } => {
            let at = |p: &PathBuf| loaded.base.join(p);
            let train = load_idx(at(train_images), at(train_labels))?;
            let test = load_idx(at(test_images), at(test_labels))?;
            // Both halves must agree on K even if a class is absent from one.
            let k = train.num_classes().max(test.num_classes());
            (with_classes(train, k)?, with_classes(test, k)?)
        }
    };
    let k = train.num_classes();
    if cfg.forget_classes.is_empty() {
        bail!("forget_classes must not be empty");
    }
    if let Some(&c) = cfg.forget_classes.iter().find(|&&c| c >= k) {
        bail!("forget class {c} out of range for {k} classes");
    }
    let split = split_forget_remain(&train, &test, &cfg.forget_classes)?;
    let input = train.input_dim();
    let arch = match (&cfg.arch, &cfg.dataset) {
        (Some(a), _) => MlpArch::new(input, a.hidden_dims.clone(), k)?,
        (None, DatasetSpec::Blobs { .. }) => MlpArch::for_blobs(input, k)?,
        (None, DatasetSpec::Idx { .. }) => MlpArch::for_images(input, k)?,
    };
    Ok(Prepared { arch, train, split })
}

fn with_classes(ds: LabeledDataset, k: usize) -> Result<LabeledDataset> {
    if ds.num_classes() == k {
        return Ok(ds);
    }
    Ok(LabeledDataset::new(ds.inputs().clone(), ds.labels().to_vec(), k)?)
}
