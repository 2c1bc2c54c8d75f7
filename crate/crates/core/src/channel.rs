//! Gaussian MAC superposition and end-to-end Monte Carlo trials.
//!
//! Each trial draws from its own ChaCha stream seeded by a counter-based
//! derivation of `(master_seed, trial_index)`; squared errors are collected
//! in trial order and reduced sequentially, so results do not depend on the
//! rayon thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::model::{sample_users, ModelSpec, Theta};
use crate::scheme::{encode, estimate, Scheme};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub theta_hat: Theta,
    pub squared_error: f64,
    pub seed_used: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    /// Standard error of the mean.
    pub stderr: f64,
    pub trials: usize,
}

impl McEstimate {
    /// True if `value` lies within `k` standard errors of the mean.
    pub fn agrees_with(&self, value: f64, k: f64) -> bool {
        (self.mean - value).abs() <= k * self.stderr
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of trial `index` under `master_seed`.
pub fn derive_trial_seed(master_seed: u64, index: u64) -> u64 {
    splitmix64(splitmix64(master_seed) ^ index.wrapping_mul(0xD1B5_4A32_D192_ED03))
}

pub fn trial_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `Yⱼ = Σᵢ X_ij + Zⱼ` with `Zⱼ ~ N(0, σ₀²)`. `symbols` holds one row per user.
pub fn transmit<R: Rng + ?Sized>(symbols: &[Vec<f64>], sigma0_sq: f64, rng: &mut R) -> Result<Vec<f64>> {
    if !(sigma0_sq.is_finite() && sigma0_sq >= 0.0) {
        return Err(invalid("sigma0_sq", format!("must be >= 0, got {sigma0_sq}")));
    }
    let Some(first) = symbols.first() else {
        return Err(invalid("symbols", "need at least one user"));
    };
    let s = first.len();
    let mut y = vec![0.0; s];
    for row in symbols {
        if row.len() != s {
            return Err(Error::DimensionMismatch {
                expected: s,
                actual: row.len(),
            });
        }
        for (acc, x) in y.iter_mut().zip(row) {
            *acc += x;
        }
    }
    if sigma0_sq > 0.0 {
        let sd = sigma0_sq.sqrt();
        for yj in &mut y {
            let z: f64 = rng.sample(StandardNormal);
            *yj += sd * z;
        }
    }
    Ok(y)
}

/// One round: sample `n` users, encode, superpose, estimate.
pub fn run_trial_with<R: Rng + ?Sized>(
    model: &ModelSpec,
    theta: &Theta,
    scheme: &Scheme,
    rng: &mut R,
) -> Result<(Theta, f64)> {
    let cfg = &scheme.config;
    if model != &scheme.model {
        return Err(invalid("model", "does not match the scheme's model"));
    }
    let samples = sample_users(model, theta, cfg.n, rng)?;
    let symbols = samples
        .rows()
        .map(|u| encode(scheme, u, rng))
        .collect::<Result<Vec<_>>>()?;
    let y = transmit(&symbols, cfg.sigma0_sq, rng)?;
    let theta_hat = estimate(scheme, &y)?;
    let squared_error = theta_hat
        .values()
        .iter()
        .zip(theta.values())
        .map(|(a, b)| (a - b).powi(2))
        .sum();
    Ok((theta_hat, squared_error))
}

/// One trial driven by its own seed.
pub fn run_trial(model: &ModelSpec, theta: &Theta, scheme: &Scheme, seed: u64) -> Result<TrialResult> {
    let mut rng = trial_rng(seed);
    let (theta_hat, squared_error) = run_trial_with(model, theta, scheme, &mut rng)?;
    Ok(TrialResult {
        theta_hat,
        squared_error,
        seed_used: seed,
    })
}

/// Mean and standard error of `values`, summed in slice order.
pub fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let count = values.len() as f64;
    let mean = values.iter().sum::<f64>() / count;
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    let variance = ss / (count - 1.0);
    (mean, (variance / count).sqrt())
}

/// Monte Carlo estimate of `E‖θ̂ − θ‖²` over `trials` independent rounds.
pub fn mc_risk(
    model: &ModelSpec,
    theta: &Theta,
    scheme: &Scheme,
    trials: usize,
    master_seed: u64,
) -> Result<McEstimate> {
    if trials < 2 {
        return Err(Error::TooFewTrials(trials));
    }
    let errors = (0..trials as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = trial_rng(derive_trial_seed(master_seed, i));
            run_trial_with(model, theta, scheme, &mut rng).map(|(_, err)| err)
        })
        .collect::<Result<Vec<f64>>>()?;
    let (mean, stderr) = mean_and_stderr(&errors);
    Ok(McEstimate { mean, stderr, trials })
}
