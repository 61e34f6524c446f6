use super::tensor::Tensor;
use crate::{Error, Result};

/// SGD with heavy-ball momentum and L2 weight decay:
///
/// ```text
/// g' = g + weight_decay · w
/// v  = momentum · v + g'
/// w  = w - lr · v
/// ```
///
/// The velocity starts at zero, so the first step is plain `g'`.
#[derive(Clone, Debug)]
pub struct Sgd {
    pub lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    velocity: Vec<Tensor>,
}

impl Sgd {
    /// `lr` may be zero (a frozen run); it must not be negative.
    pub fn new(lr: f64, momentum: f64, weight_decay: f64) -> Result<Self> {
        if !(lr >= 0.0 && lr.is_finite()) {
            return Err(Error::invalid(format!("learning rate must be >= 0, got {lr}")));
        }
        if !(0.0..1.0).contains(&momentum) {
            return Err(Error::invalid(format!("momentum must be in [0, 1), got {momentum}")));
        }
        if !(weight_decay >= 0.0 && weight_decay.is_finite()) {
            return Err(Error::invalid(format!("weight decay must be >= 0, got {weight_decay}")));
        }
        Ok(Self {
            lr,
            momentum,
            weight_decay,
            velocity: Vec::new(),
        })
    }

    pub fn step(&mut self, params: &mut [Tensor], grads: &[Tensor]) -> Result<()> {
        if params.len() != grads.len() {
            return Err(Error::invalid(format!(
                "{} parameters but {} gradients",
                params.len(),
                grads.len()
            )));
        }
        for (p, g) in params.iter().zip(grads) {
            if p.shape() != g.shape() {
                return Err(Error::invalid(format!(
                    "parameter shape {:?} vs gradient shape {:?}",
                    p.shape(),
                    g.shape()
                )));
            }
        }
        if self.velocity.is_empty() {
            self.velocity = params.iter().map(|p| Tensor::zeros(p.shape().to_vec())).collect();
        }
        for ((p, g), v) in params.iter_mut().zip(grads).zip(&mut self.velocity) {
            for ((w, &gi), vi) in p.data_mut().iter_mut().zip(g.data()).zip(v.data_mut()) {
                let d = gi + self.weight_decay * *w;
                *vi = self.momentum * *vi + d;
                *w -= self.lr * *vi;
            }
        }
        Ok(())
    }
}

/// One stateless step; equivalent to a fresh [`Sgd`] taking a single step.
pub fn sgd_step(
    params: &mut [Tensor],
    grads: &[Tensor],
    lr: f64,
    momentum: f64,
    weight_decay: f64,
) -> Result<()> {
    Sgd::new(lr, momentum, weight_decay)?.step(params, grads)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_keeps_params() {
        let mut p = vec![Tensor::vector(vec![1.0, -2.0])];
        sgd_step(&mut p, &[Tensor::vector(vec![0.0, 0.0])], 0.1, 0.9, 0.0).unwrap();
        assert_eq!(p[0].data(), &[1.0, -2.0]);
    }

    #[test]
    fn scalar_step() {
        let mut p = vec![Tensor::scalar(1.0)];
        sgd_step(&mut p, &[Tensor::scalar(0.5)], 0.1, 0.0, 0.0).unwrap();
        assert!((p[0].data()[0] - 0.95).abs() < 1e-15);
    }

    #[test]
    fn momentum_matches_hand_unroll() {
        // w0 = 1, g = 0.5 then 0.25, lr 0.1, momentum 0.9, no decay.
        // v1 = 0.5          -> w1 = 1 - 0.05 = 0.95
        // v2 = 0.45 + 0.25  -> w2 = 0.95 - 0.07 = 0.88
        let mut opt = Sgd::new(0.1, 0.9, 0.0).unwrap();
        let mut p = vec![Tensor::scalar(1.0)];
        opt.step(&mut p, &[Tensor::scalar(0.5)]).unwrap();
        assert!((p[0].data()[0] - 0.95).abs() < 1e-15);
        opt.step(&mut p, &[Tensor::scalar(0.25)]).unwrap();
        assert!((p[0].data()[0] - 0.88).abs() < 1e-15);
    }

    #[test]
    fn weight_decay_adds_to_gradient() {
        // g' = 0 + 0.5·2 = 1 -> w = 2 - 0.1
        let mut p = vec![Tensor::scalar(2.0)];
        sgd_step(&mut p, &[Tensor::scalar(0.0)], 0.1, 0.0, 0.5).unwrap();
        assert!((p[0].data()[0] - 1.9).abs() < 1e-15);
    }

    #[test]
    fn plain_descent_without_momentum_or_decay() {
        let mut a = vec![Tensor::vector(vec![0.3, -0.7, 1.1])];
        let g = [Tensor::vector(vec![0.2, 0.4, -0.6])];
        let mut opt = Sgd::new(0.05, 0.0, 0.0).unwrap();
        for _ in 0..3 {
            opt.step(&mut a, &g).unwrap();
        }
        let mut expect = [0.3, -0.7, 1.1];
        for _ in 0..3 {
            for (e, gi) in expect.iter_mut().zip(g[0].data()) {
                *e -= 0.05 * gi;
            }
        }
        for (x, e) in a[0].data().iter().zip(expect) {
            assert_eq!(x.to_bits(), e.to_bits());
        }
    }

    #[test]
    fn shape_mismatch_and_bad_hyperparameters() {
        let mut p = vec![Tensor::vector(vec![1.0, 2.0])];
        assert!(sgd_step(&mut p, &[Tensor::vector(vec![1.0])], 0.1, 0.0, 0.0).is_err());
        assert!(sgd_step(&mut p, &[], 0.1, 0.0, 0.0).is_err());
        assert!(Sgd::new(-0.1, 0.0, 0.0).is_err());
        assert!(Sgd::new(0.1, 1.0, 0.0).is_err());
    }
}
