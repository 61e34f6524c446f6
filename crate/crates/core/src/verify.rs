//! Self-checks for the numerical identities the unlearning losses rely on.
//!
//! Every check draws its cases from a seeded generator and reports the worst
//! error seen, so a run is reproducible and a failure names its margin.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::losses::{
    alpha_target, batch_targets, decompose_kl, delete_target, mask_multiplicative,
    negative_gradient_loss, normalize, relabel_loss, soft_target_loss, temp_target, LossConfig,
    Method,
};
use crate::numcore::{finite_diff_check, kl_divergence, softmax, ProbVector, Tensor};
use crate::Result;

pub const DECOMPOSITION_TOL: f64 = 1e-9;
pub const INTERCHANGE_TOL: f64 = 1e-12;
pub const TARGET_TOL: f64 = 1e-12;
pub const GRADIENT_TOL: f64 = 1e-4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub cases: usize,
    pub max_error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl CheckResult {
    fn new(name: &str, cases: usize, max_error: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            cases,
            max_error,
            tolerance,
            passed: max_error <= tolerance,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub seed: u64,
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    pub seed: u64,
    pub decomposition_cases: usize,
    pub interchange_cases: usize,
    pub target_cases: usize,
    pub gradient_points: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            decomposition_cases: 1000,
            interchange_cases: 1000,
            target_cases: 1000,
            gradient_points: 100,
        }
    }
}

/// Runs every check.
pub fn run_all(cfg: &VerifyConfig) -> Result<VerifyReport> {
    let s = cfg.seed;
    Ok(VerifyReport {
        seed: s,
        checks: vec![
            check_decomposition(cfg.decomposition_cases, s)?,
            check_interchange(cfg.interchange_cases, s.wrapping_add(1))?,
            check_target_conditions(cfg.target_cases, s.wrapping_add(2))?,
            check_relabel(cfg.target_cases, s.wrapping_add(3))?,
            check_gradients(cfg.gradient_points, s.wrapping_add(4))?,
        ],
    })
}

fn random_logits(rng: &mut ChaCha8Rng, k: usize, scale: f64) -> Vec<f64> {
    (0..k).map(|_| rng.random_range(-scale..scale)).collect()
}

fn random_case(rng: &mut ChaCha8Rng) -> (usize, usize) {
    let k = rng.random_range(2..=10);
    (k, rng.random_range(0..k))
}

/// `KL(p‖q)` against the sum of its forget and retention terms, `K ∈ 2..=10`.
/// A tenth of the `p` draws get an exact zero off `u`.
pub fn check_decomposition(cases: usize, seed: u64) -> Result<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..cases {
        let (k, u) = random_case(&mut rng);
        let mut p = softmax(&random_logits(&mut rng, k, 5.0))?.into_vec();
        if k > 2 && rng.random_bool(0.1) {
            let j = (u + rng.random_range(1..k)) % k;
            p[j] = 0.0;
            p = normalize(&p)?.into_vec();
        }
        let p = ProbVector::new(p)?;
        let q = softmax(&random_logits(&mut rng, k, 5.0))?;
        let d = decompose_kl(&p, &q, u)?;
        worst = worst.max(d.residual());
        worst = worst.max((d.total - kl_divergence(&p, &q)?).abs());
    }
    Ok(CheckResult::new("kl_decomposition", cases, worst, DECOMPOSITION_TOL))
}

/// [`check_interchange_with`] using the library's multiplicative mask.
pub fn check_interchange(cases: usize, seed: u64) -> Result<CheckResult> {
    check_interchange_with(mask_multiplicative, cases, seed)
}

/// Masking logits additively then applying softmax should equal applying
/// softmax then `mask` and renormalizing.
pub fn check_interchange_with(
    mask: impl Fn(&ProbVector, usize) -> Result<Vec<f64>>,
    cases: usize,
    seed: u64,
) -> Result<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..cases {
        let (k, u) = random_case(&mut rng);
        let z = random_logits(&mut rng, k, 10.0);
        let additive = delete_target(&z, u)?;
        let multiplicative = normalize(&mask(&softmax(&z)?, u)?)?;
        worst = additive
            .as_slice()
            .iter()
            .zip(multiplicative.as_slice())
            .map(|(a, b)| (a - b).abs())
            .fold(worst, f64::max);
    }
    Ok(CheckResult::new("mask_interchange", cases, worst, INTERCHANGE_TOL))
}

/// Target invariants: the masked and tempered targets put no mass on `u`,
/// the masked target keeps the teacher's ratios among the other classes,
/// and the alpha target keeps `α·softmax(z)_u`.
pub fn check_target_conditions(cases: usize, seed: u64) -> Result<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..cases {
        let (k, u) = random_case(&mut rng);
        let z = random_logits(&mut rng, k, 5.0);
        let s = softmax(&z)?;
        let d = delete_target(&z, u)?;
        worst = worst.max(d[u]);
        worst = worst.max((d.as_slice().iter().sum::<f64>() - 1.0).abs());
        for i in (0..k).filter(|&i| i != u) {
            // d_i = s_i / (1 - s_u)
            worst = worst.max((d[i] * (1.0 - s[u]) - s[i]).abs());
        }

        let t = temp_target(&z, u, rng.random_range(1.0..20.0))?;
        worst = worst.max(t[u]);

        let alpha = rng.random_range(0.0..=1.0);
        let a = alpha_target(&z, u, alpha)?;
        worst = worst.max((a[u] - alpha * s[u]).abs());
        worst = worst.max((a.as_slice().iter().sum::<f64>() - 1.0).abs());
    }
    Ok(CheckResult::new("target_conditions", cases, worst, TARGET_TOL))
}

/// Re-labeling as distillation: cross-entropy on `r` equals `KL(e^r‖q)`,
/// and the retention term collapses to `-ln q̂_r`, discarding the teacher's
/// ranking among the remaining classes.
pub fn check_relabel(cases: usize, seed: u64) -> Result<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..cases {
        let (k, u) = random_case(&mut rng);
        let r = (u + rng.random_range(1..k)) % k;
        let z = random_logits(&mut rng, k, 5.0);
        let q = softmax(&z)?;
        let e_r = ProbVector::one_hot(r, k)?;
        let ce = -q[r].ln();
        worst = worst.max((ce - kl_divergence(&e_r, &q)?).abs());

        let d = decompose_kl(&e_r, &q, u)?;
        let q_hat_r = q[r] / (1.0 - q[u]);
        worst = worst.max((d.retention_term + q_hat_r.ln()).abs());
    }
    Ok(CheckResult::new("relabel_equivalence", cases, worst, DECOMPOSITION_TOL))
}

/// Central finite differences against the tape gradient for the delete,
/// alpha, temperature, re-label and negative-gradient losses, each at
/// `points` random logit batches.
pub fn check_gradients(points: usize, seed: u64) -> Result<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let methods = [
        Method::Delete,
        Method::AlphaAblation,
        Method::TempAblation,
        Method::RandomLabel,
        Method::NegativeGradient,
    ];
    let mut worst = 0.0f64;
    for method in methods {
        for point in 0..points {
            let k = rng.random_range(2..=6);
            let n = rng.random_range(1..=4);
            let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
            let student = Tensor::new(vec![n, k], random_logits(&mut rng, n * k, 3.0))?;
            let teacher = Tensor::new(vec![n, k], random_logits(&mut rng, n * k, 3.0))?;
            let cfg = LossConfig::new(method)
                .with_alpha(rng.random_range(0.0..=1.0))
                .with_temperature(rng.random_range(1.0..15.0))
                .with_seed(point as u64);
            let indices: Vec<usize> = (0..n).collect();
            let targets = match method {
                Method::Delete | Method::AlphaAblation | Method::TempAblation => {
                    Some(batch_targets(&cfg, &teacher, &labels)?)
                }
                _ => None,
            };
            let check = finite_diff_check(
                |tape, vars| match &targets {
                    Some(t) => soft_target_loss(tape, vars[0], t),
                    None if method == Method::RandomLabel => {
                        relabel_loss(tape, vars[0], &labels, &indices, &cfg)
                    }
                    None => negative_gradient_loss(tape, vars[0], &labels),
                },
                &[student],
                1e-5,
            )?;
            worst = worst.max(check.max_rel_error);
        }
    }
    Ok(CheckResult::new("loss_gradients", methods.len() * points, worst, GRADIENT_TOL))
}
