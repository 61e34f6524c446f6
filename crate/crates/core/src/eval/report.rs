use serde::{Deserialize, Serialize};

use super::metrics::{accuracy, h_mean};
use super::mia::{mia, MiaConfig};
use crate::data::ClassSplit;
use crate::engine::Checkpoint;
use crate::losses::Method;
use crate::model::ModelParams;
use crate::{Error, Result};

/// Hex-encoded FNV-1a fingerprints, so they survive JSON readers that parse
/// numbers as doubles.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fingerprints {
    pub dataset: String,
    pub original: String,
    pub unlearned: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub retrained: Option<String>,
}

/// Evaluation of one unlearned model. Accuracies and MIA are percentages.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub method: String,
    pub seed: u64,
    pub forget_classes: Vec<usize>,
    pub acc_f: f64,
    pub acc_r: f64,
    pub acc_ft: f64,
    pub acc_rt: f64,
    pub drop_ft: f64,
    pub h_mean: f64,
    pub mia: f64,
    pub original_acc_ft: f64,
    pub original_acc_rt: f64,
    pub original_mia: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub retrained_acc_ft: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub retrained_acc_rt: Option<f64>,
    /// True when the method touched remain-train data.
    pub uses_remain_data: bool,
    pub fingerprints: Fingerprints,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub config: Option<serde_json::Value>,
}

pub(crate) fn hex(x: u64) -> String {
    format!("{x:016x}")
}

fn uses_remain_data(method: &str) -> bool {
    method == "retrain" || method.parse::<Method>().is_ok_and(|m| m.needs_remain_data())
}

/// Scores `unlearned` against `original` on `split`.
pub fn full_report(
    original: &Checkpoint,
    unlearned: &Checkpoint,
    retrained: Option<&Checkpoint>,
    split: &ClassSplit,
    mia_cfg: &MiaConfig,
) -> Result<MetricsReport> {
    for other in std::iter::once(unlearned).chain(retrained) {
        if other.arch() != original.arch() {
            return Err(Error::Contract(format!(
                "checkpoint architecture {:?} differs from original {:?}",
                other.arch().dims(),
                original.arch().dims()
            )));
        }
    }
    if original.arch().num_classes != split.num_classes() {
        return Err(Error::Contract(format!(
            "model has {} classes, data has {}",
            original.arch().num_classes,
            split.num_classes()
        )));
    }
    let orig = original.to_params()?;
    let unl = unlearned.to_params()?;
    let mia_of = |m: &ModelParams| mia(m, &split.d_r_train, &split.d_r_test, &split.d_f_train, mia_cfg);

    let original_acc_ft = accuracy(&orig, &split.d_f_test)?;
    let original_acc_rt = accuracy(&orig, &split.d_r_test)?;
    let acc_ft = accuracy(&unl, &split.d_f_test)?;
    let acc_rt = accuracy(&unl, &split.d_r_test)?;
    let drop_ft = (original_acc_ft - acc_ft).max(0.0);
    let (retrained_acc_ft, retrained_acc_rt) = match retrained {
        Some(r) => {
            let p = r.to_params()?;
            (Some(accuracy(&p, &split.d_f_test)?), Some(accuracy(&p, &split.d_r_test)?))
        }
        None => (None, None),
    };

    Ok(MetricsReport {
        method: unlearned.meta.method.clone(),
        seed: unlearned.meta.seed,
        forget_classes: split.forget_classes.clone(),
        acc_f: accuracy(&unl, &split.d_f_train)?,
        acc_r: accuracy(&unl, &split.d_r_train)?,
        acc_ft,
        acc_rt,
        drop_ft,
        h_mean: h_mean(acc_rt, drop_ft),
        mia: mia_of(&unl)?,
        original_acc_ft,
        original_acc_rt,
        original_mia: mia_of(&orig)?,
        retrained_acc_ft,
        retrained_acc_rt,
        uses_remain_data: uses_remain_data(&unlearned.meta.method),
        fingerprints: Fingerprints {
            dataset: hex(original.meta.fingerprint),
            original: hex(original.fingerprint()),
            unlearned: hex(unlearned.fingerprint()),
            retrained: retrained.map(|r| hex(r.fingerprint())),
        },
        config: None,
    })
}
