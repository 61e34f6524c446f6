use super::tape::{GradTape, Var};
use super::tensor::Tensor;
use crate::{Error, Result};

/// Gradient magnitudes below this are compared on an absolute scale.
pub const REL_ERROR_FLOOR: f64 = 1e-3;

#[derive(Clone, Debug)]
pub struct GradCheck {
    /// `max |a - n| / max(|a|, |n|, REL_ERROR_FLOOR)` over all entries.
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    pub analytic: Vec<Tensor>,
    pub numeric: Vec<Tensor>,
}

/// Compares [`GradTape::backward`] against central differences.
///
/// `f` rebuilds the scalar loss on a fresh tape from parameter leaves; it is
/// called once for the analytic pass and twice per parameter entry.
pub fn finite_diff_check<F>(f: F, params: &[Tensor], epsilon: f64) -> Result<GradCheck>
where
    F: Fn(&mut GradTape, &[Var]) -> Result<Var>,
{
    if !(epsilon > 0.0 && epsilon <= 1e-2) {
        return Err(Error::invalid(format!("epsilon must be in (0, 1e-2], got {epsilon}")));
    }
    let eval = |ps: &[Tensor]| -> Result<f64> {
        let mut tape = GradTape::new();
        let vars: Vec<Var> = ps.iter().map(|p| tape.param(p.clone())).collect();
        let loss = f(&mut tape, &vars)?;
        Ok(tape.value(loss).data()[0])
    };

    let mut tape = GradTape::new();
    let vars: Vec<Var> = params.iter().map(|p| tape.param(p.clone())).collect();
    let loss = f(&mut tape, &vars)?;
    let grads = tape.backward(loss)?;
    let analytic: Vec<Tensor> = vars.iter().map(|&v| grads.wrt(v)).collect();

    let mut work: Vec<Tensor> = params.to_vec();
    let mut numeric = Vec::with_capacity(params.len());
    let (mut max_rel, mut max_abs) = (0.0f64, 0.0f64);
    for (pi, a) in analytic.iter().enumerate() {
        let mut num = Tensor::zeros(params[pi].shape().to_vec());
        for j in 0..params[pi].len() {
            let orig = params[pi].data()[j];
            work[pi].data_mut()[j] = orig + epsilon;
            let up = eval(&work)?;
            work[pi].data_mut()[j] = orig - epsilon;
            let down = eval(&work)?;
            work[pi].data_mut()[j] = orig;
            let n = (up - down) / (2.0 * epsilon);
            num.data_mut()[j] = n;

            let av = a.data()[j];
            let abs = (av - n).abs();
            let scale = av.abs().max(n.abs()).max(REL_ERROR_FLOOR);
            max_abs = max_abs.max(abs);
            max_rel = max_rel.max(abs / scale);
        }
        numeric.push(num);
    }
    Ok(GradCheck {
        max_rel_error: max_rel,
        max_abs_error: max_abs,
        analytic,
        numeric,
    })
}
