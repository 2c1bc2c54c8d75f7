//! Mutual-information leakage of one user's sample through the channel
//! output, local-noise calibration for a conditional-MI budget, and the
//! `E[V ln V]` inequality used by the Bernoulli bound.
//!
//! Every information quantity is in nats.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::model::{ModelSpec, SystemConfig};

/// An information value that is either finite or unbounded (zero total
/// noise on a channel that reveals the input).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InfoValue {
    Finite(f64),
    Unbounded,
}

impl InfoValue {
    pub fn finite(self) -> Option<f64> {
        match self {
            InfoValue::Finite(v) => Some(v),
            InfoValue::Unbounded => None,
        }
    }

    pub fn is_unbounded(self) -> bool {
        matches!(self, InfoValue::Unbounded)
    }

    /// `self ≤ other`, treating `Unbounded` as the top element.
    pub fn le(self, other: InfoValue) -> bool {
        match (self, other) {
            (_, InfoValue::Unbounded) => true,
            (InfoValue::Unbounded, InfoValue::Finite(_)) => false,
            (InfoValue::Finite(a), InfoValue::Finite(b)) => a <= b,
        }
    }
}

pub fn nats_to_bits(nats: f64) -> f64 {
    nats / std::f64::consts::LN_2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrivacyReport {
    pub mi_bound: InfoValue,
    pub mi_exact: Option<InfoValue>,
    pub cmi_bound: Option<InfoValue>,
    pub epsilon_target: Option<f64>,
    pub sigma_pri_sq: f64,
}

/// Interference-to-signal term `σ₀²(B²+σ²)/(P·σ²)` of the Gaussian scheme.
fn gaussian_noise_ratio(cfg: &SystemConfig, model: &ModelSpec) -> Result<f64> {
    let ModelSpec::GaussianLocation { sigma_sq, bound } = *model else {
        return Err(invalid("model", "requires the Gaussian location model"));
    };
    model.validate(cfg.d)?;
    cfg.validate()?;
    Ok(cfg.sigma0_sq * (bound * bound + sigma_sq) / (cfg.power * sigma_sq))
}

/// Inverse per-coordinate SNR seen by one user: other users' data noise
/// plus channel noise, relative to that user's data noise.
fn gaussian_inverse_snr(cfg: &SystemConfig, model: &ModelSpec) -> Result<f64> {
    Ok(cfg.n_f64() - 1.0 + gaussian_noise_ratio(cfg, model)?)
}

/// Upper bound on `I(Y; Uᵢ)` for the linear-gain Gaussian scheme.
pub fn gaussian_mi_bound(cfg: &SystemConfig, model: &ModelSpec) -> Result<InfoValue> {
    let inv_snr = gaussian_inverse_snr(cfg, model)?;
    if inv_snr <= 0.0 {
        return Ok(InfoValue::Unbounded);
    }
    Ok(InfoValue::Finite(cfg.d_f64() / 2.0 / inv_snr))
}

/// Exact `I(Y; Uᵢ)` for the linear-gain Gaussian scheme (d independent
/// Gaussian channel uses).
pub fn gaussian_mi_exact(cfg: &SystemConfig, model: &ModelSpec) -> Result<InfoValue> {
    let inv_snr = gaussian_inverse_snr(cfg, model)?;
    if inv_snr <= 0.0 {
        return Ok(InfoValue::Unbounded);
    }
    Ok(InfoValue::Finite(cfg.d_f64() / 2.0 * (1.0 / inv_snr).ln_1p()))
}

fn ln_factorials(n: usize) -> Vec<f64> {
    let mut table = Vec::with_capacity(n + 1);
    let mut acc = 0.0;
    table.push(0.0);
    for k in 1..=n {
        acc += (k as f64).ln();
        table.push(acc);
    }
    table
}

/// `ln P[Bin(trials, p) = k]` for `p ∈ (0, 1)`.
fn ln_binomial_pmf(ln_fact: &[f64], trials: usize, k: usize, ln_p: f64, ln_q: f64) -> f64 {
    ln_fact[trials] - ln_fact[k] - ln_fact[trials - k] + k as f64 * ln_p + (trials - k) as f64 * ln_q
}

/// Exact per-coordinate `I(Ỹⱼ; X_ij)` where `Ỹⱼ` is the noiseless
/// superposition of `n` binary users with success probability `theta_j`.
/// Summed over outcomes with binomial probabilities evaluated in log space.
pub fn bernoulli_mi_exact(n: usize, theta_j: f64) -> Result<f64> {
    if n < 1 {
        return Err(invalid("n", "must be at least 1"));
    }
    if !(0.0..=1.0).contains(&theta_j) {
        return Err(invalid("theta_j", format!("must lie in [0, 1], got {theta_j}")));
    }
    if theta_j == 0.0 || theta_j == 1.0 {
        return Ok(0.0);
    }
    let ln_fact = ln_factorials(n);
    let ln_p = theta_j.ln();
    let ln_q = (-theta_j).ln_1p();
    let ln_marginal = |y: usize| ln_binomial_pmf(&ln_fact, n, y, ln_p, ln_q);
    let ln_given = |y: usize| ln_binomial_pmf(&ln_fact, n - 1, y, ln_p, ln_q);

    let mut given_one = 0.0;
    for y in 1..=n {
        let ln_cond = ln_given(y - 1);
        given_one += ln_cond.exp() * (ln_cond - ln_marginal(y));
    }
    let mut given_zero = 0.0;
    for y in 0..n {
        let ln_cond = ln_given(y);
        given_zero += ln_cond.exp() * (ln_cond - ln_marginal(y));
    }
    Ok((theta_j * given_one + (1.0 - theta_j) * given_zero).max(0.0))
}

/// `d/n`, the bound on `I(Y; Uᵢ)` for the two-level Bernoulli schemes.
pub fn bernoulli_mi_bound(cfg: &SystemConfig) -> f64 {
    cfg.d_f64() / cfg.n_f64()
}

/// Local noise variance that keeps the conditional MI below `epsilon`:
/// `max{(sP − 2εσ₀²)/(2εn + s), 0}`.
pub fn calibrate_sigma_pri(cfg: &SystemConfig, epsilon: f64) -> Result<f64> {
    if !(epsilon > 0.0) {
        return Err(Error::NonPositiveEpsilon(epsilon));
    }
    cfg.validate()?;
    let s = cfg.s as f64;
    let raw = (s * cfg.power - 2.0 * epsilon * cfg.sigma0_sq) / (2.0 * epsilon * cfg.n_f64() + s);
    Ok(raw.max(0.0))
}

/// Capacity bound on `I(Y; Uᵢ | U₋ᵢ)` once every user adds local noise of
/// variance `sigma_pri_sq`: `(s/2)·ln(1 + (P−σ_pri²)/(nσ_pri² + σ₀²))`.
pub fn robust_cmi_bound(cfg: &SystemConfig, sigma_pri_sq: f64) -> Result<InfoValue> {
    cfg.validate()?;
    if !(sigma_pri_sq >= 0.0 && sigma_pri_sq < cfg.power) {
        return Err(invalid(
            "sigma_pri_sq",
            format!("must lie in [0, P = {}), got {sigma_pri_sq}", cfg.power),
        ));
    }
    let noise = cfg.n_f64() * sigma_pri_sq + cfg.sigma0_sq;
    if noise == 0.0 {
        return Ok(InfoValue::Unbounded);
    }
    let snr = (cfg.power - sigma_pri_sq) / noise;
    Ok(InfoValue::Finite(cfg.s as f64 / 2.0 * snr.ln_1p()))
}

/// Both sides of `E[V ln V] ≤ μ·ln((ω² + μ²)/μ)` for a discrete `V ≥ 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VlnvCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

pub fn vlnv_bound_check(support: &[f64], probs: &[f64]) -> Result<VlnvCheck> {
    if support.len() != probs.len() || support.is_empty() {
        return Err(Error::InvalidDistribution(format!(
            "support has {} points but probs has {}",
            support.len(),
            probs.len()
        )));
    }
    if support.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::InvalidDistribution("values must be finite and >= 0".into()));
    }
    if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
        return Err(Error::InvalidDistribution("probabilities must be >= 0".into()));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidDistribution(format!("probabilities sum to {total}")));
    }
    let mean: f64 = support.iter().zip(probs).map(|(v, p)| v * p).sum();
    if !(mean > 0.0) {
        return Err(Error::InvalidDistribution("mean must be > 0".into()));
    }
    let second: f64 = support.iter().zip(probs).map(|(v, p)| v * v * p).sum();
    let variance = (second - mean * mean).max(0.0);
    let lhs: f64 = support
        .iter()
        .zip(probs)
        .filter(|(v, _)| **v > 0.0)
        .map(|(v, p)| p * v * v.ln())
        .sum();
    let rhs = mean * ((variance + mean * mean) / mean).ln();
    Ok(VlnvCheck {
        lhs,
        rhs,
        holds: lhs <= rhs + 1e-12,
    })
}

/// The per-coordinate step of the Bernoulli bound:
/// `θ·ln(1 + (1−θ)/(θn))` against `(1−θ)/n`.
pub fn bernoulli_term_bound(n: usize, theta_j: f64) -> (f64, f64) {
    let n = n as f64;
    let rhs = (1.0 - theta_j) / n;
    let lhs = if theta_j == 0.0 {
        0.0
    } else {
        theta_j * ((1.0 - theta_j) / (theta_j * n)).ln_1p()
    };
    (lhs, rhs)
}
