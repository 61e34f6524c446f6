//! Confidence-based membership inference.
//!
//! An attacker is fit to tell remain-train samples (members) from remain-test
//! samples (non-members) using only the model's softmax confidences, then
//! asked about the forget set. The score is the percentage of forget samples
//! it still calls members.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::metrics::{for_each_logit_chunk, Classifier};
use crate::data::LabeledDataset;
use crate::losses::cross_entropy_loss;
use crate::model::{Layer, MlpArch, ModelParams};
use crate::numcore::{softmax, GradTape, Sgd, Tensor};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MiaFeature {
    /// The largest softmax probability.
    #[default]
    MaxConfidence,
    /// The full softmax vector sorted in descending order.
    SortedConfidences,
    /// The softmax probability of the sample's own label.
    TrueLabelConfidence,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MiaConfig {
    /// Upper bound on members and on non-members sampled for fitting.
    pub samples_per_side: usize,
    pub feature: MiaFeature,
    pub seed: u64,
    pub lr: f64,
    pub iterations: usize,
}

impl Default for MiaConfig {
    fn default() -> Self {
        Self {
            samples_per_side: 2000,
            feature: MiaFeature::MaxConfidence,
            seed: 0,
            lr: 0.5,
            iterations: 500,
        }
    }
}

/// Confidence features of every sample in `ds`.
pub fn confidence_features(
    model: &impl Classifier,
    ds: &LabeledDataset,
    feature: MiaFeature,
) -> Result<Vec<Vec<f64>>> {
    let mut out = Vec::with_capacity(ds.len());
    for_each_logit_chunk(model, ds, |start, z| {
        for i in 0..z.rows() {
            let mut p = softmax(z.row(i))?.into_vec();
            if feature == MiaFeature::TrueLabelConfidence {
                out.push(vec![p[ds.labels()[start + i]]]);
                continue;
            }
            p.sort_by(|a, b| b.total_cmp(a));
            out.push(match feature {
                MiaFeature::SortedConfidences => p,
                _ => vec![p[0]],
            });
        }
        Ok(())
    })?;
    Ok(out)
}

/// Logistic-regression attacker on standardized confidence features.
#[derive(Clone, Debug)]
pub struct ConfidenceAttack {
    mean: Vec<f64>,
    scale: Vec<f64>,
    model: ModelParams,
}

impl ConfidenceAttack {
    /// Full-batch gradient descent on the binary cross-entropy, starting
    /// from zero weights.
    pub fn fit(members: &[Vec<f64>], non_members: &[Vec<f64>], cfg: &MiaConfig) -> Result<Self> {
        if members.is_empty() || non_members.is_empty() {
            return Err(Error::invalid("attack needs both members and non-members"));
        }
        let d = members[0].len();
        let rows: Vec<&Vec<f64>> = members.iter().chain(non_members).collect();
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::invalid("feature vectors differ in length"));
        }
        let n = rows.len() as f64;
        let mean: Vec<f64> = (0..d).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n).collect();
        let scale: Vec<f64> = (0..d)
            .map(|j| {
                let var = rows.iter().map(|r| (r[j] - mean[j]).powi(2)).sum::<f64>() / n;
                if var > 0.0 { var.sqrt() } else { 1.0 }
            })
            .collect();
        let x = standardize(&rows, &mean, &scale);
        let labels: Vec<usize> = (0..rows.len()).map(|i| usize::from(i < members.len())).collect();

        // Two-logit linear model; the member logit minus the non-member logit
        // is the usual logistic score.
        let arch = MlpArch::new(d, vec![], 2)?;
        let mut tensors = ModelParams::from_layers(
            arch.clone(),
            vec![Layer {
                weight: Tensor::zeros(vec![d, 2]),
                bias: Tensor::zeros(vec![2]),
            }],
        )?
        .into_tensors();
        let mut opt = Sgd::new(cfg.lr, 0.0, 0.0)?;
        for _ in 0..cfg.iterations {
            let model = ModelParams::from_tensors(arch.clone(), tensors.clone())?;
            let mut tape = GradTape::new();
            let rec = model.record(&mut tape, &x)?;
            let loss = cross_entropy_loss(&mut tape, rec.logits, &labels)?;
            let mut grads = tape.backward(loss)?;
            let g: Vec<Tensor> = rec.params.iter().map(|&v| grads.take(v)).collect();
            opt.step(&mut tensors, &g)?;
        }
        Ok(Self {
            mean,
            scale,
            model: ModelParams::from_tensors(arch, tensors)?,
        })
    }

    /// `P(member) > 0.5`.
    pub fn predict_member(&self, feature: &[f64]) -> Result<bool> {
        let x = standardize(&[&feature.to_vec()], &self.mean, &self.scale);
        let z = self.model.forward(&x)?;
        Ok(z.row(0)[1] > z.row(0)[0])
    }
}

fn standardize(rows: &[&Vec<f64>], mean: &[f64], scale: &[f64]) -> Tensor {
    let d = mean.len();
    let data = rows
        .iter()
        .flat_map(|r| (0..d).map(move |j| (r[j] - mean[j]) / scale[j]))
        .collect();
    Tensor::new(vec![rows.len(), d], data).expect("sized by rows × d")
}

/// `100 · TP / |D_f|`: share of forget samples the predictor calls members.
pub fn mia_rate(predict_member: impl Fn(&[f64]) -> Result<bool>, forget_features: &[Vec<f64>]) -> Result<f64> {
    if forget_features.is_empty() {
        return Err(Error::invalid("empty forget set"));
    }
    let mut tp = 0usize;
    for f in forget_features {
        if predict_member(f)? {
            tp += 1;
        }
    }
    Ok(100.0 * tp as f64 / forget_features.len() as f64)
}

fn sample(ds: &LabeledDataset, n: usize, rng: &mut ChaCha8Rng) -> LabeledDataset {
    let mut idx: Vec<usize> = (0..ds.len()).collect();
    idx.shuffle(rng);
    idx.truncate(n);
    idx.sort_unstable();
    ds.subset(&idx)
}

/// Membership-inference score of `model` on `d_f_train`. Equal numbers of
/// members (from `d_r_train`) and non-members (from `d_r_test`) are drawn,
/// at most `cfg.samples_per_side` each.
pub fn mia(
    model: &impl Classifier,
    d_r_train: &LabeledDataset,
    d_r_test: &LabeledDataset,
    d_f_train: &LabeledDataset,
    cfg: &MiaConfig,
) -> Result<f64> {
    let n = d_r_train.len().min(d_r_test.len()).min(cfg.samples_per_side);
    if n == 0 {
        return Err(Error::invalid(
            "membership inference needs remain-train and remain-test samples to balance",
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let members = confidence_features(model, &sample(d_r_train, n, &mut rng), cfg.feature)?;
    let non_members = confidence_features(model, &sample(d_r_test, n, &mut rng), cfg.feature)?;
    let attack = ConfidenceAttack::fit(&members, &non_members, cfg)?;
    let forget = confidence_features(model, d_f_train, cfg.feature)?;
    mia_rate(|f| attack.predict_member(f), &forget)
}
