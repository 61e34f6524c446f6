//! Target distributions and unlearning losses.
//!
//! All distillation-style losses are `KL(target ‖ softmax(student))` with the
//! target held constant. They differ only in how the target is built from
//! the frozen teacher's logits `z` and the sample's forgotten class `u`:
//!
//! | method             | target                                         |
//! |--------------------|------------------------------------------------|
//! | `delete`           | `softmax(z + m^u)`, `m^u_u = -inf`             |
//! | `alpha_ablation`   | `p_u = α·softmax(z)_u`, rest ∝ `softmax(z)`    |
//! | `temp_ablation`    | `softmax(z/T + m^u)`                           |
//! | `random_label`     | one-hot on a random `r ≠ u`                    |
//!
//! `negative_gradient` ascends the true-label cross-entropy and `finetune`
//! descends it on remain data.

mod decompose;
mod loss;
mod targets;

use serde::{Deserialize, Serialize};

pub use decompose::{decompose_kl, KlDecomposition};
pub use loss::{
    batch_loss, batch_targets, cross_entropy_loss, delete_loss, negative_gradient_loss,
    relabel_class, relabel_loss, soft_target_loss,
};
pub use targets::{
    alpha_target, delete_target, mask_additive, mask_multiplicative, normalize, temp_target,
};

use crate::{Error, Result};

/// Forgotten class `u` of one sample, validated against `K`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MaskSpec {
    class: usize,
    num_classes: usize,
}

impl MaskSpec {
    pub fn new(class: usize, num_classes: usize) -> Result<Self> {
        if class >= num_classes {
            return Err(Error::invalid(format!(
                "forget class {class} out of range for K={num_classes}"
            )));
        }
        Ok(Self { class, num_classes })
    }

    pub fn class(&self) -> usize {
        self.class
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    /// `1 - e^u`, the Hadamard mask on probabilities.
    pub fn keep_vector(&self) -> Vec<f64> {
        (0..self.num_classes)
            .map(|i| if i == self.class { 0.0 } else { 1.0 })
            .collect()
    }

    /// `m^u`: zero except `-inf` at `u`, the additive mask on logits.
    pub fn additive_vector(&self) -> Vec<f64> {
        (0..self.num_classes)
            .map(|i| if i == self.class { f64::NEG_INFINITY } else { 0.0 })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Delete,
    RandomLabel,
    NegativeGradient,
    Finetune,
    AlphaAblation,
    TempAblation,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Delete,
        Method::RandomLabel,
        Method::NegativeGradient,
        Method::Finetune,
        Method::AlphaAblation,
        Method::TempAblation,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Delete => "delete",
            Method::RandomLabel => "random_label",
            Method::NegativeGradient => "negative_gradient",
            Method::Finetune => "finetune",
            Method::AlphaAblation => "alpha_ablation",
            Method::TempAblation => "temp_ablation",
        }
    }

    /// Whether the method trains on remain data.
    pub fn needs_remain_data(&self) -> bool {
        matches!(self, Method::Finetune)
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = Method::ALL.iter().map(Method::as_str).collect();
                Error::invalid(format!("unknown method {s:?}; expected one of {}", names.join(", ")))
            })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelabelRule {
    /// `r` uniform over the classes other than the sample's own label.
    #[default]
    UniformRandomExcludingU,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossConfig {
    pub method: Method,
    /// Retained fraction of the forgotten class; `alpha_ablation` only.
    #[serde(default)]
    pub alpha: f64,
    /// Teacher temperature; `temp_ablation` only.
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default)]
    pub relabel_rule: RelabelRule,
    #[serde(default)]
    pub seed: u64,
}

fn default_temperature() -> f64 {
    1.0
}

impl LossConfig {
    pub fn new(method: Method) -> Self {
        Self {
            method,
            alpha: 0.0,
            temperature: 1.0,
            relabel_rule: RelabelRule::default(),
            seed: 0,
        }
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn with_temperature(mut self, t: f64) -> Self {
        self.temperature = t;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::invalid(format!("alpha must be in [0, 1], got {}", self.alpha)));
        }
        if !(self.temperature >= 1.0 && self.temperature.is_finite()) {
            return Err(Error::invalid(format!(
                "temperature must be >= 1, got {}",
                self.temperature
            )));
        }
        Ok(())
    }
}
