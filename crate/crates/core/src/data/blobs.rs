use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::LabeledDataset;
use crate::numcore::Tensor;
use crate::{Error, Result};

/// Class means are drawn from `[-BOX_HALF_WIDTH, BOX_HALF_WIDTH]^dim`.
const BOX_HALF_WIDTH: f64 = 5.0;
/// Rejection threshold between class means.
const MIN_SEPARATION: f64 = 2.0;
const MAX_MEAN_ATTEMPTS: usize = 1000;

/// Isotropic Gaussian clusters, one per class, with standard deviation
/// `spread`. Each class contributes exactly `per_class` samples; the first
/// 80% (at least one) go to train and the rest to test.
pub fn make_blobs(
    num_classes: usize,
    per_class: usize,
    dim: usize,
    spread: f64,
    seed: u64,
) -> Result<(LabeledDataset, LabeledDataset)> {
    if num_classes < 2 {
        return Err(Error::invalid("blobs need at least 2 classes"));
    }
    if per_class < 2 {
        return Err(Error::invalid("blobs need at least 2 samples per class"));
    }
    if dim == 0 || !(spread >= 0.0 && spread.is_finite()) {
        return Err(Error::invalid("blobs need dim > 0 and a finite spread >= 0"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let means = draw_means(&mut rng, num_classes, dim);

    let n_train = ((per_class as f64 * 0.8).floor() as usize).clamp(1, per_class - 1);
    let mut train = (Vec::new(), Vec::new());
    let mut test = (Vec::new(), Vec::new());
    for (class, mean) in means.iter().enumerate() {
        for s in 0..per_class {
            let target = if s < n_train { &mut train } else { &mut test };
            for &m in mean {
                let noise: f64 = StandardNormal.sample(&mut rng);
                target.0.push(m + spread * noise);
            }
            target.1.push(class);
        }
    }
    let build = |(x, y): (Vec<f64>, Vec<usize>)| {
        let n = y.len();
        LabeledDataset::new(Tensor::new(vec![n, dim], x)?, y, num_classes)
    };
    Ok((build(train)?, build(test)?))
}

fn draw_means(rng: &mut ChaCha8Rng, k: usize, dim: usize) -> Vec<Vec<f64>> {
    let mut means: Vec<Vec<f64>> = Vec::with_capacity(k);
    while means.len() < k {
        let mut candidate = Vec::new();
        for attempt in 0..MAX_MEAN_ATTEMPTS {
            candidate = (0..dim)
                .map(|_| rng.random_range(-BOX_HALF_WIDTH..BOX_HALF_WIDTH))
                .collect();
            let far = means.iter().all(|m| distance(m, &candidate) >= MIN_SEPARATION);
            if far || attempt + 1 == MAX_MEAN_ATTEMPTS {
                break;
            }
        }
        means.push(candidate);
    }
    means
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}
