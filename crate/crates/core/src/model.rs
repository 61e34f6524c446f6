//! Multilayer-perceptron classifier producing raw class logits.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::numcore::{matmul, GradTape, Tensor, Var};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Relu,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpArch {
    pub input_dim: usize,
    #[serde(default)]
    pub hidden_dims: Vec<usize>,
    pub num_classes: usize,
    #[serde(default)]
    pub activation: Activation,
}

impl MlpArch {
    pub fn new(input_dim: usize, hidden_dims: Vec<usize>, num_classes: usize) -> Result<Self> {
        let arch = Self {
            input_dim,
            hidden_dims,
            num_classes,
            activation: Activation::Relu,
        };
        arch.validate()?;
        Ok(arch)
    }

    /// `input_dim → 64 → 64 → K`, sized for low-dimensional synthetic data.
    pub fn for_blobs(input_dim: usize, num_classes: usize) -> Result<Self> {
        Self::new(input_dim, vec![64, 64], num_classes)
    }

    /// `input_dim → 256 → 128 → K`, sized for flattened images.
    pub fn for_images(input_dim: usize, num_classes: usize) -> Result<Self> {
        Self::new(input_dim, vec![256, 128], num_classes)
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_classes < 2 {
            return Err(Error::invalid(format!(
                "need at least 2 classes, got {}",
                self.num_classes
            )));
        }
        if self.input_dim == 0 || self.hidden_dims.contains(&0) {
            return Err(Error::invalid("layer widths must be positive"));
        }
        Ok(())
    }

    /// All layer widths from input to logits.
    pub fn dims(&self) -> Vec<usize> {
        let mut d = Vec::with_capacity(self.hidden_dims.len() + 2);
        d.push(self.input_dim);
        d.extend_from_slice(&self.hidden_dims);
        d.push(self.num_classes);
        d
    }
}

/// One affine layer; `weight` is `(fan_in × fan_out)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    pub weight: Tensor,
    pub bias: Tensor,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    arch: MlpArch,
    layers: Vec<Layer>,
}

/// Parameter handles and logits of a forward pass recorded on a tape.
#[derive(Clone, Debug)]
pub struct Recorded {
    pub logits: Var,
    /// `[w0, b0, w1, b1, ...]`, matching [`ModelParams::tensors`].
    pub params: Vec<Var>,
}

impl ModelParams {
    /// Kaiming-uniform weights (`U(-√(6/fan_in), √(6/fan_in))`) and zero biases.
    pub fn init(arch: &MlpArch, seed: u64) -> Result<Self> {
        arch.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dims = arch.dims();
        let layers = dims
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let bound = (6.0 / fan_in as f64).sqrt();
                let data = (0..fan_in * fan_out)
                    .map(|_| rng.random_range(-bound..bound))
                    .collect();
                Layer {
                    weight: Tensor::new(vec![fan_in, fan_out], data).expect("sized above"),
                    bias: Tensor::zeros(vec![fan_out]),
                }
            })
            .collect();
        Ok(Self {
            arch: arch.clone(),
            layers,
        })
    }

    pub fn from_layers(arch: MlpArch, layers: Vec<Layer>) -> Result<Self> {
        arch.validate()?;
        let dims = arch.dims();
        if layers.len() != dims.len() - 1 {
            return Err(Error::invalid(format!(
                "architecture has {} layers, got {}",
                dims.len() - 1,
                layers.len()
            )));
        }
        for (i, (l, w)) in layers.iter().zip(dims.windows(2)).enumerate() {
            if l.weight.shape() != [w[0], w[1]] || l.bias.shape() != [w[1]] {
                return Err(Error::invalid(format!(
                    "layer {i}: weight {:?} / bias {:?} do not match {}→{}",
                    l.weight.shape(),
                    l.bias.shape(),
                    w[0],
                    w[1]
                )));
            }
        }
        Ok(Self { arch, layers })
    }

    /// Rebuilds parameters from the flat `[w0, b0, w1, b1, ...]` layout.
    pub fn from_tensors(arch: MlpArch, tensors: Vec<Tensor>) -> Result<Self> {
        if !tensors.len().is_multiple_of(2) {
            return Err(Error::invalid("odd number of parameter tensors"));
        }
        let mut it = tensors.into_iter();
        let mut layers = Vec::new();
        while let (Some(weight), Some(bias)) = (it.next(), it.next()) {
            layers.push(Layer { weight, bias });
        }
        Self::from_layers(arch, layers)
    }

    pub fn arch(&self) -> &MlpArch {
        &self.arch
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn num_classes(&self) -> usize {
        self.arch.num_classes
    }

    pub fn tensors(&self) -> Vec<&Tensor> {
        self.layers.iter().flat_map(|l| [&l.weight, &l.bias]).collect()
    }

    pub fn into_tensors(self) -> Vec<Tensor> {
        self.layers.into_iter().flat_map(|l| [l.weight, l.bias]).collect()
    }

    fn check_batch(&self, batch: &Tensor) -> Result<()> {
        if batch.shape().len() != 2 || batch.cols() != self.arch.input_dim {
            return Err(Error::invalid(format!(
                "batch shape {:?} does not match input_dim {}",
                batch.shape(),
                self.arch.input_dim
            )));
        }
        Ok(())
    }

    /// Logits `(N × K)` for an `(N × input_dim)` batch, no tape involved.
    pub fn forward(&self, batch: &Tensor) -> Result<Tensor> {
        self.check_batch(batch)?;
        let last = self.layers.len() - 1;
        let mut h = batch.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            h = matmul(&h, &layer.weight)?;
            for r in 0..h.rows() {
                for (o, &b) in h.row_mut(r).iter_mut().zip(layer.bias.data()) {
                    *o += b;
                }
            }
            if i < last {
                h = h.map(|x| x.max(0.0));
            }
        }
        Ok(h)
    }

    /// Same computation as [`forward`](Self::forward), recorded on `tape` with
    /// every weight and bias as a trainable leaf.
    pub fn record(&self, tape: &mut GradTape, batch: &Tensor) -> Result<Recorded> {
        self.check_batch(batch)?;
        let mut h = tape.constant(batch.clone());
        let mut params = Vec::with_capacity(self.layers.len() * 2);
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let w = tape.param(layer.weight.clone());
            let b = tape.param(layer.bias.clone());
            params.extend([w, b]);
            h = tape.matmul(h, w)?;
            h = tape.add_row(h, b)?;
            if i < last {
                h = tape.relu(h)?;
            }
        }
        Ok(Recorded { logits: h, params })
    }

    /// Deep copy that can only run plain forward passes.
    pub fn freeze(&self) -> FrozenModel {
        FrozenModel(self.clone())
    }
}

/// Frozen copy of a model. It exposes no way to record onto a tape, so no
/// gradient can ever reach its parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct FrozenModel(ModelParams);

impl FrozenModel {
    pub fn forward(&self, batch: &Tensor) -> Result<Tensor> {
        self.0.forward(batch)
    }

    pub fn arch(&self) -> &MlpArch {
        self.0.arch()
    }

    pub fn num_classes(&self) -> usize {
        self.0.num_classes()
    }

    /// Read-only view of the frozen parameters.
    pub fn params(&self) -> &ModelParams {
        &self.0
    }
}
