//! Browser bindings for the static demo page in `www/`.
//!
//! Each export wraps a plain Rust function that returns `Result<_, String>`,
//! so the logic is testable natively.

use unlearn_core::data::{make_blobs, split_forget_remain, ClassSplit, LabeledDataset};
use unlearn_core::engine::{finetune_baseline, pretrain, unlearn, Checkpoint, TrainConfig, UnlearnConfig};
use unlearn_core::eval::{accuracy, predictions};
use unlearn_core::losses::{alpha_target, decompose_kl, delete_target, temp_target, LossConfig, Method};
use unlearn_core::model::{MlpArch, ModelParams};
use unlearn_core::numcore::{softmax, Tensor};
use wasm_bindgen::prelude::*;

fn msg(e: impl std::fmt::Display) -> String {
    e.to_string()
}

/// `[teacher, delete, alpha, temp]` concatenated, `K` entries each.
pub fn target_rows(logits: &[f64], u: usize, alpha: f64, temperature: f64) -> Result<Vec<f64>, String> {
    let mut out = softmax(logits).map_err(msg)?.into_vec();
    out.extend(delete_target(logits, u).map_err(msg)?.into_vec());
    out.extend(alpha_target(logits, u, alpha).map_err(msg)?.into_vec());
    out.extend(temp_target(logits, u, temperature).map_err(msg)?.into_vec());
    Ok(out)
}

/// `[forget, retention, total]` for `KL(softmax(p) ‖ softmax(q))` split
/// around `u`.
pub fn kl_split(p_logits: &[f64], q_logits: &[f64], u: usize) -> Result<Vec<f64>, String> {
    let p = softmax(p_logits).map_err(msg)?;
    let q = softmax(q_logits).map_err(msg)?;
    let d = decompose_kl(&p, &q, u).map_err(msg)?;
    Ok(vec![d.forget_term, d.retention_term, d.total])
}

#[wasm_bindgen(js_name = targets)]
pub fn js_targets(logits: Vec<f64>, u: usize, alpha: f64, temperature: f64) -> Result<Vec<f64>, JsError> {
    target_rows(&logits, u, alpha, temperature).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = klSplit)]
pub fn js_kl_split(p_logits: Vec<f64>, q_logits: Vec<f64>, u: usize) -> Result<Vec<f64>, JsError> {
    kl_split(&p_logits, &q_logits, u).map_err(|e| JsError::new(&e))
}

/// A pretrained blob classifier that can forget classes interactively.
#[wasm_bindgen]
pub struct BlobLab {
    train: LabeledDataset,
    test: LabeledDataset,
    original: Checkpoint,
    current: ModelParams,
    seed: u64,
    /// `[x_min, x_max, y_min, y_max]` of the training points plus a margin.
    bounds: [f64; 4],
}

impl BlobLab {
    pub fn build(num_classes: usize, per_class: usize, spread: f64, seed: u64) -> Result<Self, String> {
        let (train, test) = make_blobs(num_classes, per_class, 2, spread, seed).map_err(msg)?;
        let arch = MlpArch::for_blobs(2, num_classes).map_err(msg)?;
        let cfg = TrainConfig { seed, ..TrainConfig::default() };
        let original = pretrain(&arch, &train, &cfg).map_err(msg)?.checkpoint;
        let current = original.to_params().map_err(msg)?;
        let bounds = bounds(train.inputs());
        Ok(Self { train, test, original, current, seed, bounds })
    }

    fn split(&self, forget: &[usize]) -> Result<ClassSplit, String> {
        split_forget_remain(&self.train, &self.test, forget).map_err(msg)
    }

    /// Restarts from the original and unlearns `forget`. Returns
    /// `[acc_ft, acc_rt, original_acc_ft, original_acc_rt]` in percent.
    pub fn forget(&mut self, forget: &[usize], method: &str, lr: f64, epochs: usize) -> Result<Vec<f64>, String> {
        let method: Method = method.parse().map_err(msg)?;
        let split = self.split(forget)?;
        let run = if method.needs_remain_data() {
            let cfg = TrainConfig { lr, epochs, seed: self.seed, ..TrainConfig::default() };
            finetune_baseline(&self.original, &split.d_r_train, &cfg)
        } else {
            let cfg = UnlearnConfig::new(LossConfig::new(method).with_seed(self.seed))
                .with_lr(lr)
                .with_epochs(epochs)
                .with_seed(self.seed);
            unlearn(&self.original, &split.d_f_train, &cfg)
        }
        .map_err(msg)?;
        self.current = run.checkpoint.to_params().map_err(msg)?;
        let original = self.original.to_params().map_err(msg)?;
        Ok(vec![
            accuracy(&self.current, &split.d_f_test).map_err(msg)?,
            accuracy(&self.current, &split.d_r_test).map_err(msg)?,
            accuracy(&original, &split.d_f_test).map_err(msg)?,
            accuracy(&original, &split.d_r_test).map_err(msg)?,
        ])
    }

    pub fn reset(&mut self) -> Result<(), String> {
        self.current = self.original.to_params().map_err(msg)?;
        Ok(())
    }

    /// Predicted class per cell of a `size × size` grid over `bounds`, row
    /// major with the top row first.
    pub fn decision_map(&self, size: usize) -> Result<Vec<u8>, String> {
        if size == 0 {
            return Err("grid size must be positive".into());
        }
        let [x0, x1, y0, y1] = self.bounds;
        let step = |lo: f64, hi: f64, i: usize| lo + (hi - lo) * (i as f64 + 0.5) / size as f64;
        let mut cells = Vec::with_capacity(2 * size * size);
        for r in 0..size {
            for c in 0..size {
                cells.push(step(x0, x1, c));
                cells.push(step(y1, y0, r));
            }
        }
        let grid = Tensor::new(vec![size * size, 2], cells).map_err(msg)?;
        let labels = vec![0; size * size];
        let ds = LabeledDataset::new(grid, labels, self.current.num_classes()).map_err(msg)?;
        Ok(predictions(&self.current, &ds).map_err(msg)?.into_iter().map(|p| p as u8).collect())
    }

    /// Test points as `[x, y, label]` triples.
    pub fn points(&self) -> Vec<f64> {
        let x = self.test.inputs();
        (0..x.rows())
            .flat_map(|i| [x.row(i)[0], x.row(i)[1], self.test.labels()[i] as f64])
            .collect()
    }

    pub fn bounds(&self) -> Vec<f64> {
        self.bounds.to_vec()
    }
}

fn bounds(x: &Tensor) -> [f64; 4] {
    let mut b = [f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY];
    for i in 0..x.rows() {
        let r = x.row(i);
        b = [b[0].min(r[0]), b[1].max(r[0]), b[2].min(r[1]), b[3].max(r[1])];
    }
    let pad = 0.1 * (b[1] - b[0]).max(b[3] - b[2]);
    [b[0] - pad, b[1] + pad, b[2] - pad, b[3] + pad]
}

#[wasm_bindgen]
impl BlobLab {
    #[wasm_bindgen(constructor)]
    pub fn js_new(num_classes: usize, per_class: usize, spread: f64, seed: u64) -> Result<BlobLab, JsError> {
        Self::build(num_classes, per_class, spread, seed).map_err(|e| JsError::new(&e))
    }

    #[wasm_bindgen(js_name = forget)]
    pub fn js_forget(&mut self, forget: Vec<usize>, method: &str, lr: f64, epochs: usize) -> Result<Vec<f64>, JsError> {
        self.forget(&forget, method, lr, epochs).map_err(|e| JsError::new(&e))
    }

    #[wasm_bindgen(js_name = reset)]
    pub fn js_reset(&mut self) -> Result<(), JsError> {
        self.reset().map_err(|e| JsError::new(&e))
    }

    #[wasm_bindgen(js_name = decisionMap)]
    pub fn js_decision_map(&self, size: usize) -> Result<Vec<u8>, JsError> {
        self.decision_map(size).map_err(|e| JsError::new(&e))
    }

    #[wasm_bindgen(js_name = points)]
    pub fn js_points(&self) -> Vec<f64> {
        self.points()
    }

    #[wasm_bindgen(js_name = bounds)]
    pub fn js_bounds(&self) -> Vec<f64> {
        self.bounds()
    }
}
