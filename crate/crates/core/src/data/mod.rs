//! Labeled datasets, class-centric splits and batching.

mod batch;
mod blobs;
mod idx;
mod split;

pub use batch::{batches, Batch, Batches};
pub use blobs::make_blobs;
pub use idx::{load_idx, write_idx};
pub use split::{split_forget_remain, ClassSplit};

use crate::numcore::Tensor;
use crate::{Error, Result};

/// Row-aligned inputs and class labels.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledDataset {
    inputs: Tensor,
    labels: Vec<usize>,
    num_classes: usize,
}

impl LabeledDataset {
    pub fn new(inputs: Tensor, labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        if inputs.shape().len() != 2 {
            return Err(Error::invalid(format!(
                "inputs must be a matrix, got shape {:?}",
                inputs.shape()
            )));
        }
        if inputs.rows() != labels.len() {
            return Err(Error::invalid(format!(
                "{} input rows but {} labels",
                inputs.rows(),
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= num_classes) {
            return Err(Error::invalid(format!(
                "label {bad} out of range for {num_classes} classes"
            )));
        }
        Ok(Self {
            inputs,
            labels,
            num_classes,
        })
    }

    pub fn inputs(&self) -> &Tensor {
        &self.inputs
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn input_dim(&self) -> usize {
        self.inputs.cols()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Rows at `indices`, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            inputs: self.inputs.select_rows(indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            num_classes: self.num_classes,
        }
    }

    /// Keeps rows whose label satisfies `keep`, preserving order.
    pub fn filter_labels(&self, keep: impl Fn(usize) -> bool) -> Self {
        let idx: Vec<usize> = (0..self.len()).filter(|&i| keep(self.labels[i])).collect();
        self.subset(&idx)
    }

    /// 64-bit FNV-1a over the little-endian bytes of the shape, the inputs
    /// and the labels.
    pub fn fingerprint(&self) -> u64 {
        let mut h = Fnv1a::new();
        for &d in self.inputs.shape() {
            h.write(&(d as u64).to_le_bytes());
        }
        for x in self.inputs.data() {
            h.write(&x.to_le_bytes());
        }
        for &y in &self.labels {
            h.write(&(y as u64).to_le_bytes());
        }
        h.finish()
    }
}

/// Incremental 64-bit FNV-1a.
#[derive(Clone, Copy, Debug)]
pub struct Fnv1a(u64);

impl Fnv1a {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;

    pub fn new() -> Self {
        Self(Self::OFFSET)
    }

    pub fn write(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 ^= b as u64;
            self.0 = self.0.wrapping_mul(Self::PRIME);
        }
    }

    pub fn finish(&self) -> u64 {
        self.0
    }

    pub fn hash(bytes: &[u8]) -> u64 {
        let mut h = Self::new();
        h.write(bytes);
        h.finish()
    }
}

impl Default for Fnv1a {
    fn default() -> Self {
        Self::new()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fnv_reference_vectors() {
        assert_eq!(Fnv1a::hash(b""), 0xcbf29ce484222325);
        assert_eq!(Fnv1a::hash(b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(Fnv1a::hash(b"foobar"), 0x85944171f73967e8);
    }

    #[test]
    fn dataset_validation() {
        let x = Tensor::zeros(vec![3, 2]);
        assert!(LabeledDataset::new(x.clone(), vec![0, 1], 2).is_err());
        assert!(LabeledDataset::new(x.clone(), vec![0, 1, 2], 2).is_err());
        let ds = LabeledDataset::new(x, vec![0, 1, 1], 2).unwrap();
        assert_eq!(ds.filter_labels(|y| y == 1).len(), 2);
    }

    #[test]
    fn fingerprint_tracks_content() {
        let a = LabeledDataset::new(Tensor::zeros(vec![2, 2]), vec![0, 1], 2).unwrap();
        let mut b = a.clone();
        assert_eq!(a.fingerprint(), b.fingerprint());
        b.labels[0] = 1;
        assert_ne!(a.fingerprint(), b.fingerprint());
    }
}
