use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::targets::{alpha_target, delete_target, temp_target};
use super::{LossConfig, Method, RelabelRule};
use crate::data::Batch;
use crate::model::FrozenModel;
use crate::numcore::{GradTape, Tensor, Var};
use crate::{Error, Result};

/// Mean over rows of `KL(target_i ‖ softmax(logits_i))`, with `targets`
/// entering the graph as a constant.
pub fn soft_target_loss(tape: &mut GradTape, logits: Var, targets: &Tensor) -> Result<Var> {
    let shape = tape.value(logits).shape().to_vec();
    if shape.len() != 2 || targets.shape() != shape.as_slice() {
        return Err(Error::invalid(format!(
            "targets {:?} do not match logits {shape:?}",
            targets.shape()
        )));
    }
    let n = shape[0];
    if n == 0 {
        return Err(Error::invalid("empty batch"));
    }
    // Σ p ln p with 0 ln 0 = 0; the cross term carries all the gradient.
    let neg_entropy: f64 = targets
        .data()
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| p * p.ln())
        .sum();
    let log_q = tape.log_softmax(logits)?;
    let p = tape.constant(targets.clone());
    let cross = tape.mul(p, log_q)?;
    let cross = tape.sum(cross)?;
    let kl_sum = tape.scale(cross, -1.0)?;
    let kl_sum = tape.add_scalar(kl_sum, neg_entropy)?;
    tape.scale(kl_sum, 1.0 / n as f64)
}

fn one_hot_rows(classes: &[usize], k: usize) -> Result<Tensor> {
    let mut t = Tensor::zeros(vec![classes.len(), k]);
    for (i, &c) in classes.iter().enumerate() {
        if c >= k {
            return Err(Error::invalid(format!("class {c} out of range for K={k}")));
        }
        t.row_mut(i)[c] = 1.0;
    }
    Ok(t)
}

fn num_classes(tape: &GradTape, logits: Var) -> usize {
    tape.value(logits).cols()
}

/// Mean cross-entropy against `labels`.
pub fn cross_entropy_loss(tape: &mut GradTape, logits: Var, labels: &[usize]) -> Result<Var> {
    let targets = one_hot_rows(labels, num_classes(tape, logits))?;
    soft_target_loss(tape, logits, &targets)
}

/// Negated mean cross-entropy against the true labels (gradient ascent).
pub fn negative_gradient_loss(tape: &mut GradTape, logits: Var, true_labels: &[usize]) -> Result<Var> {
    let ce = cross_entropy_loss(tape, logits, true_labels)?;
    tape.scale(ce, -1.0)
}

/// Replacement label for sample `index` whose true class is `u`: uniform over
/// the other `K - 1` classes, fixed by `(seed, index)`.
pub fn relabel_class(seed: u64, index: usize, u: usize, k: usize) -> Result<usize> {
    if k < 2 {
        return Err(Error::invalid("re-labeling needs at least 2 classes"));
    }
    if u >= k {
        return Err(Error::invalid(format!("class {u} out of range for K={k}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    let r = rng.random_range(0..k - 1);
    Ok(if r >= u { r + 1 } else { r })
}

/// Mean cross-entropy against per-sample replacement labels `r ≠ y`.
/// `indices` are the samples' positions in the forget set and fix `r`.
pub fn relabel_loss(
    tape: &mut GradTape,
    logits: Var,
    labels: &[usize],
    indices: &[usize],
    cfg: &LossConfig,
) -> Result<Var> {
    if labels.len() != indices.len() {
        return Err(Error::invalid("labels and indices differ in length"));
    }
    let k = num_classes(tape, logits);
    let replaced = match cfg.relabel_rule {
        RelabelRule::UniformRandomExcludingU => labels
            .iter()
            .zip(indices)
            .map(|(&u, &i)| relabel_class(cfg.seed, i, u, k))
            .collect::<Result<Vec<_>>>()?,
    };
    cross_entropy_loss(tape, logits, &replaced)
}

/// Teacher targets for every row of a batch, masking each row's own label.
pub fn batch_targets(
    cfg: &LossConfig,
    teacher_logits: &Tensor,
    labels: &[usize],
) -> Result<Tensor> {
    if teacher_logits.rows() != labels.len() {
        return Err(Error::invalid("teacher logits and labels differ in length"));
    }
    let mut out = Tensor::zeros(vec![labels.len(), teacher_logits.cols()]);
    for (i, &u) in labels.iter().enumerate() {
        let z = teacher_logits.row(i);
        let t = match cfg.method {
            Method::Delete => delete_target(z, u)?,
            Method::AlphaAblation => alpha_target(z, u, cfg.alpha)?,
            Method::TempAblation => temp_target(z, u, cfg.temperature)?,
            m => {
                return Err(Error::invalid(format!("{m} does not use teacher targets")));
            }
        };
        out.row_mut(i).copy_from_slice(t.as_slice());
    }
    Ok(out)
}

/// Masked-teacher distillation loss over a batch of forget samples; each row
/// masks its own label.
pub fn delete_loss(
    tape: &mut GradTape,
    teacher: &FrozenModel,
    student_logits: Var,
    batch_inputs: &Tensor,
    batch_labels: &[usize],
) -> Result<Var> {
    let z = teacher.forward(batch_inputs)?;
    let targets = batch_targets(&LossConfig::new(Method::Delete), &z, batch_labels)?;
    soft_target_loss(tape, student_logits, &targets)
}

/// Loss selected by `cfg.method` for one batch.
pub fn batch_loss(
    tape: &mut GradTape,
    cfg: &LossConfig,
    teacher: &FrozenModel,
    student_logits: Var,
    batch: &Batch,
) -> Result<Var> {
    match cfg.method {
        Method::Delete | Method::AlphaAblation | Method::TempAblation => {
            let z = teacher.forward(&batch.inputs)?;
            let targets = batch_targets(cfg, &z, &batch.labels)?;
            soft_target_loss(tape, student_logits, &targets)
        }
        Method::RandomLabel => relabel_loss(tape, student_logits, &batch.labels, &batch.indices, cfg),
        Method::NegativeGradient => negative_gradient_loss(tape, student_logits, &batch.labels),
        Method::Finetune => cross_entropy_loss(tape, student_logits, &batch.labels),
    }
}
