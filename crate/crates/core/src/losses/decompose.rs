use serde::Serialize;

use super::MaskSpec;
use crate::numcore::{kl_terms, ProbVector};
use crate::{Error, Result};

/// `KL(p ‖ q)` split around the forgotten class `u`:
///
/// ```text
/// KL(p ‖ q) = KL([p_u, p_¬u] ‖ [q_u, q_¬u]) + p_¬u · KL(p̂ ‖ q̂)
/// ```
///
/// where `p̂`, `q̂` are `p`, `q` restricted to the classes `≠ u` and
/// renormalized.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct KlDecomposition {
    /// Binary KL between the mass on `u` and the mass off `u`.
    pub forget_term: f64,
    /// `p_¬u · KL(p̂ ‖ q̂)`.
    pub retention_term: f64,
    pub total: f64,
}

impl KlDecomposition {
    /// `|forget + retention - total|`.
    pub fn residual(&self) -> f64 {
        (self.forget_term + self.retention_term - self.total).abs()
    }
}

/// Renormalized distribution over the classes other than `u`, plus the mass
/// that was off `u` before renormalizing.
pub(crate) fn renormalize_off(p: &[f64], u: usize) -> (Vec<f64>, f64) {
    let rest: f64 = p.iter().enumerate().filter(|&(i, _)| i != u).map(|(_, x)| x).sum();
    let hat = p
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != u)
        .map(|(_, x)| x / rest)
        .collect();
    (hat, rest)
}

pub fn decompose_kl(p: &ProbVector, q: &ProbVector, u: usize) -> Result<KlDecomposition> {
    if p.len() != q.len() {
        return Err(Error::invalid(format!(
            "distributions of length {} and {}",
            p.len(),
            q.len()
        )));
    }
    MaskSpec::new(u, p.len())?;
    let (p_hat, p_rest) = renormalize_off(p.as_slice(), u);
    let (q_hat, q_rest) = renormalize_off(q.as_slice(), u);
    if p_rest <= 0.0 || q_rest <= 0.0 {
        return Err(Error::Degenerate(format!(
            "all probability mass sits on class {u}; nothing to renormalize"
        )));
    }
    let forget_term = kl_terms(&[p[u], p_rest], &[q[u], q_rest]);
    let retention_term = p_rest * kl_terms(&p_hat, &q_hat);
    let total = kl_terms(p.as_slice(), q.as_slice());
    Ok(KlDecomposition {
        forget_term,
        retention_term,
        total,
    })
}
