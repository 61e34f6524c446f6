//! Binary checkpoint format (all integers little-endian):
//!
//! ```text
//! "ULCK" | version u32 = 1
//! input_dim u32 | hidden_count u32 | hidden_dim u32 × hidden_count | K u32
//! seed u64 | epochs u32 | dataset fingerprint u64 | tag_len u32 | tag UTF-8
//! per layer: weight f32 × (fan_in·fan_out) row-major, bias f32 × fan_out
//! ```

use std::fs;
use std::path::Path;

use crate::data::Fnv1a;
use crate::model::{MlpArch, ModelParams};
use crate::numcore::Tensor;
use crate::{Error, Result};

pub const MAGIC: &[u8; 4] = b"ULCK";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CheckpointMeta {
    pub seed: u64,
    pub epochs: u32,
    /// Fingerprint of the dataset the run trained on.
    pub fingerprint: u64,
    pub method: String,
}

/// Classifier parameters stored at `f32` precision.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    arch: MlpArch,
    /// `[w0, b0, w1, b1, ...]`.
    tensors: Vec<Vec<f32>>,
    pub meta: CheckpointMeta,
}

impl Checkpoint {
    /// Rounds `params` to `f32`.
    pub fn from_params(params: &ModelParams, meta: CheckpointMeta) -> Self {
        Self {
            arch: params.arch().clone(),
            tensors: params
                .tensors()
                .into_iter()
                .map(|t| t.data().iter().map(|&x| x as f32).collect())
                .collect(),
            meta,
        }
    }

    /// Promotes the stored weights to `f64`.
    pub fn to_params(&self) -> Result<ModelParams> {
        let shapes = tensor_shapes(&self.arch);
        let tensors = self
            .tensors
            .iter()
            .zip(shapes)
            .map(|(t, s)| Tensor::new(s, t.iter().map(|&x| x as f64).collect()))
            .collect::<Result<Vec<_>>>()?;
        ModelParams::from_tensors(self.arch.clone(), tensors)
    }

    pub fn arch(&self) -> &MlpArch {
        &self.arch
    }

    pub fn weights(&self) -> &[Vec<f32>] {
        &self.tensors
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut b = Vec::new();
        b.extend_from_slice(MAGIC);
        b.extend_from_slice(&VERSION.to_le_bytes());
        b.extend_from_slice(&(self.arch.input_dim as u32).to_le_bytes());
        b.extend_from_slice(&(self.arch.hidden_dims.len() as u32).to_le_bytes());
        for &h in &self.arch.hidden_dims {
            b.extend_from_slice(&(h as u32).to_le_bytes());
        }
        b.extend_from_slice(&(self.arch.num_classes as u32).to_le_bytes());
        b.extend_from_slice(&self.meta.seed.to_le_bytes());
        b.extend_from_slice(&self.meta.epochs.to_le_bytes());
        b.extend_from_slice(&self.meta.fingerprint.to_le_bytes());
        b.extend_from_slice(&(self.meta.method.len() as u32).to_le_bytes());
        b.extend_from_slice(self.meta.method.as_bytes());
        for t in &self.tensors {
            for x in t {
                b.extend_from_slice(&x.to_le_bytes());
            }
        }
        b
    }

    /// Parses a checkpoint; `origin` only labels errors.
    pub fn from_bytes(bytes: &[u8], origin: &Path) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0, origin };
        if r.take(4)? != MAGIC {
            return Err(Error::format(origin, "bad magic, not a ULCK checkpoint"));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::Version {
                found: version,
                expected: VERSION,
            });
        }
        let input_dim = r.u32()? as usize;
        let hidden_count = r.u32()? as usize;
        if hidden_count > r.remaining() / 4 {
            return Err(Error::format(origin, format!("implausible hidden layer count {hidden_count}")));
        }
        let hidden_dims = (0..hidden_count)
            .map(|_| r.u32().map(|d| d as usize))
            .collect::<Result<Vec<_>>>()?;
        let num_classes = r.u32()? as usize;
        let arch = MlpArch::new(input_dim, hidden_dims, num_classes)
            .map_err(|e| Error::format(origin, format!("inconsistent architecture: {e}")))?;
        let seed = r.u64()?;
        let epochs = r.u32()?;
        let fingerprint = r.u64()?;
        let tag_len = r.u32()? as usize;
        let method = std::str::from_utf8(r.take(tag_len)?)
            .map_err(|_| Error::format(origin, "method tag is not UTF-8"))?
            .to_owned();

        let mut tensors = Vec::new();
        for shape in tensor_shapes(&arch) {
            let n: usize = shape.iter().product();
            let raw = r.take(n.checked_mul(4).ok_or_else(|| Error::format(origin, "tensor too large"))?)?;
            tensors.push(
                raw.chunks_exact(4)
                    .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
                    .collect(),
            );
        }
        if r.remaining() != 0 {
            return Err(Error::format(
                origin,
                format!("{} trailing bytes; weights do not match the architecture", r.remaining()),
            ));
        }
        Ok(Self {
            arch,
            tensors,
            meta: CheckpointMeta {
                seed,
                epochs,
                fingerprint,
                method,
            },
        })
    }

    /// FNV-1a of the serialized bytes.
    pub fn fingerprint(&self) -> u64 {
        Fnv1a::hash(&self.to_bytes())
    }

    /// Writes via a temporary sibling and renames, so a failed write never
    /// leaves a partial checkpoint at `path`.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let tmp = path.with_extension("ulck.tmp");
        fs::write(&tmp, self.to_bytes())?;
        fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path)?;
        Self::from_bytes(&bytes, path)
    }
}

pub fn save_checkpoint(ckpt: &Checkpoint, path: impl AsRef<Path>) -> Result<()> {
    ckpt.save(path)
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    Checkpoint::load(path)
}

fn tensor_shapes(arch: &MlpArch) -> Vec<Vec<usize>> {
    arch.dims()
        .windows(2)
        .flat_map(|w| [vec![w[0], w[1]], vec![w[1]]])
        .collect()
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    origin: &'a Path,
}

impl<'a> Reader<'a> {
    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if n > self.remaining() {
            return Err(Error::format(
                self.origin,
                format!("truncated at byte {} (needed {n} more)", self.pos),
            ));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}
