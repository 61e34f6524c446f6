use crate::data::LabeledDataset;
use crate::model::{FrozenModel, ModelParams};
use crate::numcore::{argmax, Tensor};
use crate::{Error, Result};

/// Rows per forward pass when scoring a dataset.
const EVAL_CHUNK: usize = 1024;

/// Anything that maps an input batch to class logits.
pub trait Classifier {
    fn logits(&self, batch: &Tensor) -> Result<Tensor>;
}

impl Classifier for ModelParams {
    fn logits(&self, batch: &Tensor) -> Result<Tensor> {
        self.forward(batch)
    }
}

impl Classifier for FrozenModel {
    fn logits(&self, batch: &Tensor) -> Result<Tensor> {
        self.forward(batch)
    }
}

/// Calls `f` with each chunk of logits and the chunk's first row index.
pub(crate) fn for_each_logit_chunk(
    model: &impl Classifier,
    ds: &LabeledDataset,
    mut f: impl FnMut(usize, &Tensor) -> Result<()>,
) -> Result<()> {
    let n = ds.len();
    let mut start = 0;
    while start < n {
        let end = (start + EVAL_CHUNK).min(n);
        let idx: Vec<usize> = (start..end).collect();
        let z = model.logits(&ds.inputs().select_rows(&idx))?;
        f(start, &z)?;
        start = end;
    }
    Ok(())
}

/// Argmax class per sample, ties going to the lowest index.
pub fn predictions(model: &impl Classifier, ds: &LabeledDataset) -> Result<Vec<usize>> {
    let mut out = Vec::with_capacity(ds.len());
    for_each_logit_chunk(model, ds, |_, z| {
        out.extend((0..z.rows()).map(|i| argmax(z.row(i))));
        Ok(())
    })?;
    Ok(out)
}

/// Percentage of samples whose argmax equals the label.
pub fn accuracy(model: &impl Classifier, ds: &LabeledDataset) -> Result<f64> {
    if ds.is_empty() {
        return Err(Error::invalid("accuracy of an empty dataset"));
    }
    let preds = predictions(model, ds)?;
    let correct = preds.iter().zip(ds.labels()).filter(|(p, y)| p == y).count();
    Ok(100.0 * correct as f64 / ds.len() as f64)
}

/// Percentage of samples on which the two models' argmax predictions differ.
pub fn prediction_change_rate(
    before: &impl Classifier,
    after: &impl Classifier,
    ds: &LabeledDataset,
) -> Result<f64> {
    if ds.is_empty() {
        return Err(Error::invalid("change rate over an empty dataset"));
    }
    let a = predictions(before, ds)?;
    let b = predictions(after, ds)?;
    let changed = a.iter().zip(&b).filter(|(x, y)| x != y).count();
    Ok(100.0 * changed as f64 / ds.len() as f64)
}

/// Harmonic mean `2ab / (a + b)`, defined as 0 when both are 0.
pub fn h_mean(acc_rt: f64, drop_ft: f64) -> f64 {
    debug_assert!(acc_rt >= 0.0 && drop_ft >= 0.0);
    let s = acc_rt + drop_ft;
    if s == 0.0 {
        0.0
    } else {
        2.0 * acc_rt * drop_ft / s
    }
}
