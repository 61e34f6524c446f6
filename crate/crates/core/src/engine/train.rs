use serde::{Deserialize, Serialize};

use super::checkpoint::{Checkpoint, CheckpointMeta};
use crate::data::{batches, Batch, Fnv1a, LabeledDataset};
use crate::losses::{batch_loss, cross_entropy_loss, LossConfig, Method};
use crate::model::{FrozenModel, MlpArch, ModelParams};
use crate::numcore::{argmax, GradTape, Sgd, Tensor, Var};
use crate::{Error, Result};

/// Supervised cross-entropy training settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub momentum: f64,
    pub weight_decay: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 0.05,
            epochs: 30,
            batch_size: 64,
            momentum: 0.9,
            weight_decay: 5e-4,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnlearnConfig {
    pub loss: LossConfig,
    #[serde(default = "UnlearnConfig::default_lr")]
    pub lr: f64,
    #[serde(default = "UnlearnConfig::default_epochs")]
    pub epochs: usize,
    #[serde(default = "UnlearnConfig::default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "UnlearnConfig::default_momentum")]
    pub momentum: f64,
    #[serde(default = "UnlearnConfig::default_weight_decay")]
    pub weight_decay: f64,
    #[serde(default)]
    pub seed: u64,
}

impl UnlearnConfig {
    fn default_lr() -> f64 {
        1e-3
    }
    fn default_epochs() -> usize {
        20
    }
    fn default_batch_size() -> usize {
        64
    }
    fn default_momentum() -> f64 {
        0.9
    }
    fn default_weight_decay() -> f64 {
        5e-4
    }

    /// 20 epochs of SGD (lr 1e-3, momentum 0.9, weight decay 5e-4).
    pub fn new(loss: LossConfig) -> Self {
        Self {
            loss,
            lr: Self::default_lr(),
            epochs: Self::default_epochs(),
            batch_size: Self::default_batch_size(),
            momentum: Self::default_momentum(),
            weight_decay: Self::default_weight_decay(),
            seed: 0,
        }
    }

    pub fn with_lr(mut self, lr: f64) -> Self {
        self.lr = lr;
        self
    }

    pub fn with_epochs(mut self, epochs: usize) -> Self {
        self.epochs = epochs;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    fn as_train(&self) -> TrainConfig {
        TrainConfig {
            lr: self.lr,
            epochs: self.epochs,
            batch_size: self.batch_size,
            momentum: self.momentum,
            weight_decay: self.weight_decay,
            seed: self.seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    /// Batch-label accuracy of the pre-step predictions, in percent.
    pub accuracy: f64,
    /// Hash of the frozen teacher's logits on the training set, for runs
    /// that distill from one.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub teacher_digest: Option<u64>,
}

/// One dataset touched by a run.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AuditEntry {
    pub role: String,
    pub fingerprint: u64,
    pub samples: usize,
}

#[derive(Clone, Debug)]
pub struct TrainRun {
    pub checkpoint: Checkpoint,
    pub log: Vec<EpochRecord>,
    pub audit: Vec<AuditEntry>,
}

fn epoch_seed(seed: u64, epoch: usize) -> u64 {
    seed ^ (epoch as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15)
}

fn validate(cfg: &TrainConfig) -> Result<()> {
    if cfg.epochs == 0 {
        return Err(Error::invalid("epochs must be at least 1"));
    }
    if cfg.batch_size == 0 {
        return Err(Error::invalid("batch size must be at least 1"));
    }
    Ok(())
}

fn logits_digest(t: &Tensor) -> u64 {
    let mut h = Fnv1a::new();
    for x in t.data() {
        h.write(&x.to_le_bytes());
    }
    h.finish()
}

/// Shared SGD loop. `loss_fn` builds the batch loss from the student logits.
fn fit<F>(
    params: ModelParams,
    data: &LabeledDataset,
    cfg: &TrainConfig,
    teacher: Option<&FrozenModel>,
    mut loss_fn: F,
) -> Result<(ModelParams, Vec<EpochRecord>)>
where
    F: FnMut(&mut GradTape, Var, &Batch) -> Result<Var>,
{
    validate(cfg)?;
    if data.is_empty() {
        return Err(Error::invalid("cannot train on an empty dataset"));
    }
    if data.input_dim() != params.arch().input_dim || data.num_classes() != params.num_classes() {
        return Err(Error::invalid(format!(
            "dataset ({} features, {} classes) does not fit the model ({} features, {} classes)",
            data.input_dim(),
            data.num_classes(),
            params.arch().input_dim,
            params.num_classes()
        )));
    }
    let arch = params.arch().clone();
    let mut tensors = params.into_tensors();
    let mut opt = Sgd::new(cfg.lr, cfg.momentum, cfg.weight_decay)?;
    let mut log = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        let model = ModelParams::from_tensors(arch.clone(), tensors)?;
        let mut current = model.clone();
        let (mut loss_sum, mut correct, mut seen) = (0.0, 0usize, 0usize);
        tensors = model.into_tensors();
        for batch in batches(data, cfg.batch_size, epoch_seed(cfg.seed, epoch), true)? {
            let mut tape = GradTape::new();
            let rec = current.record(&mut tape, &batch.inputs)?;
            let loss = loss_fn(&mut tape, rec.logits, &batch)?;
            let value = tape.value(loss).data()[0];
            if !value.is_finite() {
                return Err(Error::Training {
                    epoch,
                    msg: format!("loss became {value}"),
                });
            }
            let logits = tape.value(rec.logits);
            correct += (0..logits.rows())
                .filter(|&i| argmax(logits.row(i)) == batch.labels[i])
                .count();
            seen += batch.labels.len();
            loss_sum += value * batch.labels.len() as f64;

            let mut grads = tape.backward(loss)?;
            let g: Vec<Tensor> = rec.params.iter().map(|&v| grads.take(v)).collect();
            opt.step(&mut tensors, &g)?;
            if tensors.iter().any(|t| !t.is_finite()) {
                return Err(Error::Training {
                    epoch,
                    msg: "parameters became non-finite".into(),
                });
            }
            current = ModelParams::from_tensors(arch.clone(), tensors.clone())?;
        }
        log.push(EpochRecord {
            epoch,
            loss: loss_sum / seen as f64,
            accuracy: 100.0 * correct as f64 / seen as f64,
            teacher_digest: match teacher {
                Some(t) => Some(logits_digest(&t.forward(data.inputs())?)),
                None => None,
            },
        });
    }
    Ok((ModelParams::from_tensors(arch, tensors)?, log))
}

fn supervised(
    init: ModelParams,
    data: &LabeledDataset,
    cfg: &TrainConfig,
    tag: &str,
    role: &str,
) -> Result<TrainRun> {
    let (params, log) = fit(init, data, cfg, None, |tape, logits, b| {
        cross_entropy_loss(tape, logits, &b.labels)
    })?;
    Ok(TrainRun {
        checkpoint: Checkpoint::from_params(
            &params,
            CheckpointMeta {
                seed: cfg.seed,
                epochs: cfg.epochs as u32,
                fingerprint: data.fingerprint(),
                method: tag.into(),
            },
        ),
        log,
        audit: vec![AuditEntry {
            role: role.into(),
            fingerprint: data.fingerprint(),
            samples: data.len(),
        }],
    })
}

/// Cross-entropy training from a fresh initialization seeded by `cfg.seed`.
pub fn pretrain(arch: &MlpArch, train: &LabeledDataset, cfg: &TrainConfig) -> Result<TrainRun> {
    let init = ModelParams::init(arch, cfg.seed)?;
    supervised(init, train, cfg, "original", "train")
}

/// The reference model: pretraining on remain data only.
pub fn retrain(arch: &MlpArch, d_r_train: &LabeledDataset, cfg: &TrainConfig) -> Result<TrainRun> {
    let init = ModelParams::init(arch, cfg.seed)?;
    supervised(init, d_r_train, cfg, "retrain", "remain_train")
}

/// Continues cross-entropy training on remain data. Not admissible when
/// only forget data may be used; kept as a comparison baseline.
pub fn finetune_baseline(
    checkpoint: &Checkpoint,
    d_r_train: &LabeledDataset,
    cfg: &TrainConfig,
) -> Result<TrainRun> {
    supervised(checkpoint.to_params()?, d_r_train, cfg, Method::Finetune.as_str(), "remain_train")
}

/// Unlearns the classes present in `d_f_train` from `checkpoint`, touching
/// no other data. Each sample masks its own label.
pub fn unlearn(checkpoint: &Checkpoint, d_f_train: &LabeledDataset, cfg: &UnlearnConfig) -> Result<TrainRun> {
    if cfg.loss.method.needs_remain_data() {
        return Err(Error::Contract(format!(
            "{} trains on remain data; use finetune_baseline",
            cfg.loss.method
        )));
    }
    cfg.loss.validate()?;
    let student = checkpoint.to_params()?;
    let teacher = student.freeze();
    let loss_cfg = &cfg.loss;
    let uses_teacher = matches!(
        loss_cfg.method,
        Method::Delete | Method::AlphaAblation | Method::TempAblation
    );
    let train_cfg = cfg.as_train();
    let (params, log) = fit(
        student,
        d_f_train,
        &train_cfg,
        uses_teacher.then_some(&teacher),
        |tape, logits, b| batch_loss(tape, loss_cfg, &teacher, logits, b),
    )?;
    Ok(TrainRun {
        checkpoint: Checkpoint::from_params(
            &params,
            CheckpointMeta {
                seed: cfg.seed,
                epochs: cfg.epochs as u32,
                fingerprint: d_f_train.fingerprint(),
                method: loss_cfg.method.as_str().into(),
            },
        ),
        log,
        audit: vec![AuditEntry {
            role: "forget_train".into(),
            fingerprint: d_f_train.fingerprint(),
            samples: d_f_train.len(),
        }],
    })
}
