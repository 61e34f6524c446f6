use super::MaskSpec;
use crate::numcore::{softmax, ProbVector};
use crate::{Error, Result};

/// `(1 - e^u) ⊙ p`: zeroes entry `u`, leaves the rest. Not renormalized.
pub fn mask_multiplicative(p: &ProbVector, u: usize) -> Result<Vec<f64>> {
    let spec = MaskSpec::new(u, p.len())?;
    Ok(spec
        .keep_vector()
        .iter()
        .zip(p.as_slice())
        .map(|(k, x)| k * x)
        .collect())
}

/// `z + m^u`: sets entry `u` to `-inf`. Idempotent.
pub fn mask_additive(z: &[f64], u: usize) -> Result<Vec<f64>> {
    let spec = MaskSpec::new(u, z.len())?;
    Ok(z.iter().zip(spec.additive_vector()).map(|(x, m)| x + m).collect())
}

/// Divides by the total so the entries sum to one.
pub fn normalize(v: &[f64]) -> Result<ProbVector> {
    if v.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
        return Err(Error::invalid("normalize needs finite non-negative entries"));
    }
    let total: f64 = v.iter().sum();
    if total <= 0.0 {
        return Err(Error::Degenerate("cannot normalize a zero vector".into()));
    }
    ProbVector::new(v.iter().map(|x| x / total).collect())
}

fn check_finite(z: &[f64]) -> Result<()> {
    if z.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::invalid("teacher logits must be finite"))
    }
}

/// `softmax(z + m^u)`: zero on `u`, proportional to `softmax(z)` elsewhere.
pub fn delete_target(z: &[f64], u: usize) -> Result<ProbVector> {
    check_finite(z)?;
    softmax(&mask_additive(z, u)?)
}

/// Keeps `α·softmax(z)_u` on the forgotten class and spreads the remaining
/// mass over the other classes in proportion to `softmax(z)`.
pub fn alpha_target(z: &[f64], u: usize, alpha: f64) -> Result<ProbVector> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::invalid(format!("alpha must be in [0, 1], got {alpha}")));
    }
    let teacher = softmax(z)?;
    let masked = delete_target(z, u)?;
    let p_u = alpha * teacher[u];
    let rest = 1.0 - p_u;
    let probs = masked
        .as_slice()
        .iter()
        .enumerate()
        .map(|(i, &m)| if i == u { p_u } else { rest * m })
        .collect();
    ProbVector::new(probs)
}

/// `softmax(z/T + m^u)`: the masked target of a temperature-softened teacher.
pub fn temp_target(z: &[f64], u: usize, temperature: f64) -> Result<ProbVector> {
    if !(temperature >= 1.0 && temperature.is_finite()) {
        return Err(Error::invalid(format!("temperature must be >= 1, got {temperature}")));
    }
    check_finite(z)?;
    let scaled: Vec<f64> = z.iter().map(|x| x / temperature).collect();
    softmax(&mask_additive(&scaled, u)?)
}
