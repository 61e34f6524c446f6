//! IDX files as used by the MNIST distribution: big-endian `u32` magic and
//! dimension headers followed by raw `u8` payload.

use std::fs;
use std::path::Path;

use super::LabeledDataset;
use crate::numcore::Tensor;
use crate::{Error, Result};

const IMAGES_MAGIC: u32 = 0x0000_0803;
const LABELS_MAGIC: u32 = 0x0000_0801;

struct Header<'a> {
    dims: Vec<usize>,
    payload: &'a [u8],
}

fn parse<'a>(bytes: &'a [u8], magic: u32, ndims: usize, path: &Path) -> Result<Header<'a>> {
    let word = |i: usize| -> Result<u32> {
        bytes
            .get(4 * i..4 * i + 4)
            .map(|b| u32::from_be_bytes(b.try_into().expect("4 bytes")))
            .ok_or_else(|| Error::format(path, "truncated header"))
    };
    let found = word(0)?;
    if found != magic {
        return Err(Error::format(
            path,
            format!("bad magic 0x{found:08x}, expected 0x{magic:08x}"),
        ));
    }
    let dims = (1..=ndims)
        .map(|i| word(i).map(|d| d as usize))
        .collect::<Result<Vec<_>>>()?;
    let payload = &bytes[4 * (ndims + 1)..];
    let expected: usize = dims.iter().product();
    if payload.len() < expected {
        return Err(Error::format(
            path,
            format!("truncated payload: {} of {expected} bytes", payload.len()),
        ));
    }
    if payload.len() > expected {
        return Err(Error::format(
            path,
            format!("{} trailing bytes after payload", payload.len() - expected),
        ));
    }
    Ok(Header { dims, payload })
}

/// Loads an image/label IDX pair. Pixels are scaled by `1/255`; the class
/// count is `max(label) + 1` (at least 2).
pub fn load_idx(images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>) -> Result<LabeledDataset> {
    let (ip, lp) = (images_path.as_ref(), labels_path.as_ref());
    let image_bytes = fs::read(ip)?;
    let label_bytes = fs::read(lp)?;
    let images = parse(&image_bytes, IMAGES_MAGIC, 3, ip)?;
    let labels = parse(&label_bytes, LABELS_MAGIC, 1, lp)?;
    let (n, rows, cols) = (images.dims[0], images.dims[1], images.dims[2]);
    if labels.dims[0] != n {
        return Err(Error::format(
            lp,
            format!("{} labels but {} has {n} images", labels.dims[0], ip.display()),
        ));
    }
    let inputs: Vec<f64> = images.payload.iter().map(|&b| b as f64 / 255.0).collect();
    let labels: Vec<usize> = labels.payload.iter().map(|&b| b as usize).collect();
    let k = labels.iter().max().map_or(2, |&m| (m + 1).max(2));
    LabeledDataset::new(Tensor::new(vec![n, rows * cols], inputs)?, labels, k)
}

/// Writes `ds` as an IDX pair with images of `rows × cols` pixels. Inputs
/// are mapped back to bytes as `round(255·x)` clamped to `[0, 255]`.
pub fn write_idx(
    ds: &LabeledDataset,
    rows: usize,
    cols: usize,
    images_path: impl AsRef<Path>,
    labels_path: impl AsRef<Path>,
) -> Result<()> {
    if rows * cols != ds.input_dim() {
        return Err(Error::invalid(format!(
            "{rows}×{cols} images do not match input_dim {}",
            ds.input_dim()
        )));
    }
    if ds.num_classes() > 256 {
        return Err(Error::invalid("IDX labels are single bytes"));
    }
    let n = ds.len() as u32;
    let mut img = Vec::with_capacity(16 + ds.inputs().len());
    for w in [IMAGES_MAGIC, n, rows as u32, cols as u32] {
        img.extend_from_slice(&w.to_be_bytes());
    }
    img.extend(ds.inputs().data().iter().map(|&x| (x * 255.0).round().clamp(0.0, 255.0) as u8));
    let mut lab = Vec::with_capacity(8 + ds.len());
    for w in [LABELS_MAGIC, n] {
        lab.extend_from_slice(&w.to_be_bytes());
    }
    lab.extend(ds.labels().iter().map(|&y| y as u8));
    fs::write(images_path, img)?;
    fs::write(labels_path, lab)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_raw(dir: &Path, name: &str, words: &[u32], payload: &[u8]) -> std::path::PathBuf {
        let mut b = Vec::new();
        for w in words {
            b.extend_from_slice(&w.to_be_bytes());
        }
        b.extend_from_slice(payload);
        let p = dir.join(name);
        fs::write(&p, b).unwrap();
        p
    }

    #[test]
    fn reads_well_formed_pair() {
        let dir = tempfile::tempdir().unwrap();
        let img = write_raw(dir.path(), "img", &[IMAGES_MAGIC, 3, 1, 2], &[0, 255, 51, 102, 7, 8]);
        let lab = write_raw(dir.path(), "lab", &[LABELS_MAGIC, 3], &[2, 0, 1]);
        let ds = load_idx(&img, &lab).unwrap();
        assert_eq!(ds.len(), 3);
        assert_eq!(ds.input_dim(), 2);
        assert_eq!(ds.inputs().row(0), &[0.0, 1.0]);
        assert_eq!(ds.inputs().row(1), &[0.2, 0.4]);
        assert_eq!(ds.labels(), &[2, 0, 1]);
        assert_eq!(ds.num_classes(), 3);
    }

    #[test]
    fn count_mismatch_names_label_file() {
        let dir = tempfile::tempdir().unwrap();
        let img = write_raw(dir.path(), "img", &[IMAGES_MAGIC, 2, 1, 1], &[0, 1]);
        let lab = write_raw(dir.path(), "labels.idx", &[LABELS_MAGIC, 3], &[0, 1, 1]);
        let err = load_idx(&img, &lab).unwrap_err();
        assert!(matches!(err, Error::Format { .. }));
        assert!(err.to_string().contains("labels.idx"), "{err}");
    }

    #[test]
    fn bad_magic_and_truncation() {
        let dir = tempfile::tempdir().unwrap();
        let lab = write_raw(dir.path(), "lab", &[LABELS_MAGIC, 1], &[0]);
        let swapped = write_raw(dir.path(), "img", &[LABELS_MAGIC, 1, 1, 1], &[0]);
        let err = load_idx(&swapped, &lab).unwrap_err();
        assert!(err.to_string().contains("bad magic"), "{err}");

        let short = write_raw(dir.path(), "short", &[IMAGES_MAGIC, 1, 2, 2], &[0, 1]);
        assert!(matches!(load_idx(&short, &lab), Err(Error::Format { .. })));

        let header_only = write_raw(dir.path(), "hdr", &[IMAGES_MAGIC], &[]);
        assert!(matches!(load_idx(&header_only, &lab), Err(Error::Format { .. })));
    }

    #[test]
    fn write_then_load_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let pixels: Vec<f64> = (0..12).map(|k| (k * 20) as f64 / 255.0).collect();
        let ds = LabeledDataset::new(Tensor::new(vec![3, 4], pixels).unwrap(), vec![1, 0, 1], 2)
            .unwrap();
        let (ip, lp) = (dir.path().join("i"), dir.path().join("l"));
        write_idx(&ds, 2, 2, &ip, &lp).unwrap();
        assert_eq!(load_idx(&ip, &lp).unwrap(), ds);
    }
}
