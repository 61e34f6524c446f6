use std::ops::Index;

use crate::{Error, Result};

/// Lower clamp applied to the denominator distribution inside `ln`.
pub const LOG_EPS: f64 = 1e-12;

/// Tolerance on the total mass of a distribution.
pub const MASS_TOL: f64 = 1e-9;

/// A probability distribution over `K` classes.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbVector(Vec<f64>);

impl ProbVector {
    /// Validates that every entry lies in `[0, 1]` and the entries sum to 1.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::invalid("empty distribution"));
        }
        if let Some(bad) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::invalid(format!("probability {bad} outside [0, 1]")));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::invalid(format!("probabilities sum to {total}")));
        }
        Ok(Self(probs))
    }

    /// Point mass on `class`.
    pub fn one_hot(class: usize, k: usize) -> Result<Self> {
        if class >= k {
            return Err(Error::invalid(format!("class {class} out of range for K={k}")));
        }
        let mut v = vec![0.0; k];
        v[class] = 1.0;
        Ok(Self(v))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Index of the largest entry, lowest index on ties.
    pub fn argmax(&self) -> usize {
        argmax(&self.0)
    }
}

impl Index<usize> for ProbVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl AsRef<[f64]> for ProbVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Index of the largest entry, lowest index on ties.
pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

/// Max-subtracted softmax. `-inf` entries map to exactly zero.
pub fn softmax(logits: &[f64]) -> Result<ProbVector> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return Err(Error::invalid(
            "softmax needs at least one finite logit and no +inf or NaN",
        ));
    }
    if logits.iter().any(|x| x.is_nan()) {
        return Err(Error::invalid("softmax input contains NaN"));
    }
    let exps: Vec<f64> = logits.iter().map(|&x| (x - m).exp()).collect();
    let total: f64 = exps.iter().sum();
    Ok(ProbVector(exps.into_iter().map(|e| e / total).collect()))
}

/// Row-wise stable log-softmax; `out` receives `x - logsumexp(x)`.
pub(crate) fn log_softmax_into(row: &[f64], out: &mut [f64]) {
    let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let total: f64 = row.iter().map(|&x| (x - m).exp()).sum();
    let lse = m + total.ln();
    for (o, &x) in out.iter_mut().zip(row) {
        *o = x - lse;
    }
}

/// `KL(p || q) = Σ p_i ln(p_i / q_i)` with `0 · ln 0 = 0` and `q` clamped
/// below by [`LOG_EPS`].
pub fn kl_divergence(p: &ProbVector, q: &ProbVector) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::invalid(format!(
            "KL between distributions of length {} and {}",
            p.len(),
            q.len()
        )));
    }
    Ok(kl_terms(p.as_slice(), q.as_slice()))
}

/// Unchecked KL sum, used wherever lengths are already known to agree.
pub(crate) fn kl_terms(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(&pi, _)| pi > 0.0)
        .map(|(&pi, &qi)| pi * (pi.ln() - qi.max(LOG_EPS).ln()))
        .sum()
}
