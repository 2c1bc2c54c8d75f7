//! Minimax-optimal over-the-air encoders and affine estimators, their
//! ε-robust variants, and exact power accounting.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::model::{validate_theta, ModelSpec, SystemConfig, Theta};
use crate::privacy::calibrate_sigma_pri;

/// Which closed-form branch a scheme or risk value comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    /// Linear-gain Gaussian scheme (single formula).
    Gaussian,
    /// Two-level scheme with σ₀² ≤ n^{3/2}·P: α sits on the boundary where
    /// the Σθ² coefficient of the risk vanishes.
    LowNoise,
    /// Two-level scheme with σ₀² > n^{3/2}·P: α shrinks toward the noise.
    HighNoise,
}

impl Branch {
    pub fn as_str(&self) -> &'static str {
        match self {
            Branch::Gaussian => "gaussian",
            Branch::LowNoise => "low_noise",
            Branch::HighNoise => "high_noise",
        }
    }
}

/// Per-coordinate symbol map applied by every user.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EncoderMap {
    /// `x = gain·u`.
    LinearGain { gain: f64 },
    /// `0 ↦ level_lo`, `1 ↦ level_hi`.
    TwoLevel { level_lo: f64, level_hi: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EncoderSpec {
    pub map: EncoderMap,
    /// Variance of the i.i.d. Gaussian noise each user adds per channel use.
    pub local_noise_var: f64,
}

impl EncoderSpec {
    /// Half the gap between the two levels, if this is a two-level map.
    pub fn center(&self) -> Option<f64> {
        match self.map {
            EncoderMap::TwoLevel { level_lo, level_hi } => Some((level_hi - level_lo) / 2.0),
            EncoderMap::LinearGain { .. } => None,
        }
    }
}

/// `θ̂ = α·Y + β·𝟏`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineEstimator {
    pub alpha: f64,
    pub beta: f64,
}

/// An encoder/estimator pair built for a model and system config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scheme {
    pub encoder: EncoderSpec,
    pub estimator: AffineEstimator,
    pub model: ModelSpec,
    /// The raw system config (before any local-noise rebudgeting).
    pub config: SystemConfig,
    pub branch: Branch,
}

impl Scheme {
    /// Channel noise as seen by the estimator: σ₀² plus the aggregated local
    /// noise of all `n` users.
    pub fn effective_sigma0_sq(&self) -> f64 {
        self.config.sigma0_sq + self.config.n_f64() * self.encoder.local_noise_var
    }

    /// The equivalent centered pair `(C, estimator')` for two-level schemes.
    pub fn centered(&self) -> Option<(f64, AffineEstimator)> {
        match self.encoder.map {
            EncoderMap::TwoLevel { level_lo, level_hi } => {
                equivalent_centered(level_lo, level_hi, self.estimator, self.config.n).ok()
            }
            EncoderMap::LinearGain { .. } => None,
        }
    }
}

/// True when σ₀² ≤ n^{3/2}·P, the regime where the two-level optimum sits on
/// the vanishing-quadratic boundary.
pub fn low_noise_regime(cfg: &SystemConfig) -> bool {
    cfg.sigma0_sq <= cfg.n_f64().powf(1.5) * cfg.power
}

/// Linear-gain scheme for the Gaussian location model.
pub fn gaussian_scheme(cfg: &SystemConfig, model: &ModelSpec) -> Result<Scheme> {
    cfg.validate()?;
    let ModelSpec::GaussianLocation { sigma_sq, bound } = *model else {
        return Err(invalid("model", "gaussian_scheme requires the Gaussian location model"));
    };
    model.validate(cfg.d)?;
    let energy = bound * bound + sigma_sq;
    let gain = (cfg.power / energy).sqrt();
    let alpha = (energy / cfg.power).sqrt() / cfg.n_f64();
    Ok(Scheme {
        encoder: EncoderSpec {
            map: EncoderMap::LinearGain { gain },
            local_noise_var: 0.0,
        },
        estimator: AffineEstimator { alpha, beta: 0.0 },
        model: *model,
        config: *cfg,
        branch: Branch::Gaussian,
    })
}

/// α* for the product Bernoulli scheme evaluated on a chosen branch formula.
pub fn bernoulli_alpha(cfg: &SystemConfig, branch: Branch) -> f64 {
    let n = cfg.n_f64();
    let p = cfg.power;
    match branch {
        Branch::HighNoise => n * p.sqrt() / (2.0 * (cfg.sigma0_sq + n * n * p)),
        _ => 1.0 / (2.0 * (n * p).sqrt() * (n.sqrt() + 1.0)),
    }
}

/// Symmetric two-level scheme `±√P` with `β = 1/2`.
pub fn bernoulli_scheme(cfg: &SystemConfig) -> Result<Scheme> {
    cfg.validate()?;
    let branch = if low_noise_regime(cfg) {
        Branch::LowNoise
    } else {
        Branch::HighNoise
    };
    let level = cfg.power.sqrt();
    Ok(Scheme {
        encoder: EncoderSpec {
            map: EncoderMap::TwoLevel {
                level_lo: -level,
                level_hi: level,
            },
            local_noise_var: 0.0,
        },
        estimator: AffineEstimator {
            alpha: bernoulli_alpha(cfg, branch),
            beta: 0.5,
        },
        model: ModelSpec::ProductBernoulli,
        config: *cfg,
        branch,
    })
}

/// Power-maximal levels `(A*, B*)` for sparsity `m` out of `d`.
pub fn sparse_levels(d: usize, m: usize, power: f64) -> (f64, f64) {
    if 2 * m >= d {
        let level = power.sqrt();
        return (-level, level);
    }
    let (d, m) = (d as f64, m as f64);
    (-(m / (d - m) * power).sqrt(), ((d - m) / m * power).sqrt())
}

/// `√((d−m)/m) + √(m/(d−m))`, the level-gap factor of the sparse scheme.
fn sparse_gap_factor(d: f64, m: f64) -> f64 {
    ((d - m) / m).sqrt() + (m / (d - m)).sqrt()
}

/// α* for the sparse scheme (m/d < 1/2) evaluated on a chosen branch formula.
pub fn sparse_alpha(cfg: &SystemConfig, m: usize, branch: Branch) -> f64 {
    let (n, d, m) = (cfg.n_f64(), cfg.d_f64(), m as f64);
    let p = cfg.power;
    let k = sparse_gap_factor(d, m);
    match branch {
        Branch::HighNoise => m * (d - m) * n * p.sqrt() * k / (d * d * cfg.sigma0_sq + m * (d - m) * n * n * p * k * k),
        _ => 1.0 / ((n * p).sqrt() * k * (n.sqrt() + 1.0)),
    }
}

/// β* for the sparse scheme given its α*, already shifted for the
/// asymmetric levels.
pub fn sparse_beta(cfg: &SystemConfig, m: usize, alpha: f64) -> f64 {
    let (n, d, m) = (cfg.n_f64(), cfg.d_f64(), m as f64);
    let root_p = cfg.power.sqrt();
    let up = ((d - m) / m).sqrt();
    let down = (m / (d - m)).sqrt();
    (1.0 - 2.0 * m / d) * n * root_p / 2.0 * (up + down) * alpha + m / d - n * root_p * (up - down) / 2.0 * alpha
}

/// Two-level scheme for the m-sparse Bernoulli model. Falls back to the plain
/// Bernoulli scheme when `m/d ≥ 1/2`.
pub fn sparse_scheme(cfg: &SystemConfig, m: usize) -> Result<Scheme> {
    cfg.validate()?;
    let model = ModelSpec::SparseBernoulli { m };
    model.validate(cfg.d)?;
    if 2 * m >= cfg.d {
        return Ok(Scheme {
            model,
            ..bernoulli_scheme(cfg)?
        });
    }
    let branch = if low_noise_regime(cfg) {
        Branch::LowNoise
    } else {
        Branch::HighNoise
    };
    let (level_lo, level_hi) = sparse_levels(cfg.d, m, cfg.power);
    let alpha = sparse_alpha(cfg, m, branch);
    Ok(Scheme {
        encoder: EncoderSpec {
            map: EncoderMap::TwoLevel { level_lo, level_hi },
            local_noise_var: 0.0,
        },
        estimator: AffineEstimator {
            alpha,
            beta: sparse_beta(cfg, m, alpha),
        },
        model,
        config: *cfg,
        branch,
    })
}

/// The minimax-optimal scheme for `model` under `cfg`.
pub fn optimal_scheme(model: &ModelSpec, cfg: &SystemConfig) -> Result<Scheme> {
    match *model {
        ModelSpec::GaussianLocation { .. } => gaussian_scheme(cfg, model),
        ModelSpec::ProductBernoulli => bernoulli_scheme(cfg),
        ModelSpec::SparseBernoulli { m } => sparse_scheme(cfg, m),
    }
}

/// The ε-robust scheme: the optimal scheme rebuilt for power `P − σ_pri²`
/// and channel noise `σ₀² + n·σ_pri²`, with local noise `σ_pri²` added by
/// every user.
pub fn robustify(model: &ModelSpec, cfg: &SystemConfig, epsilon: f64) -> Result<Scheme> {
    let sigma_pri_sq = calibrate_sigma_pri(cfg, epsilon)?;
    let effective = cfg.with_local_noise(sigma_pri_sq)?;
    let mut scheme = optimal_scheme(model, &effective)?;
    scheme.encoder.local_noise_var = sigma_pri_sq;
    scheme.config = *cfg;
    Ok(scheme)
}

/// Maps one user's sample to its `s` channel symbols, adding local noise.
pub fn encode<R: Rng + ?Sized>(scheme: &Scheme, u: &[f64], rng: &mut R) -> Result<Vec<f64>> {
    let s = scheme.config.s;
    if u.len() != scheme.config.d {
        return Err(Error::DimensionMismatch {
            expected: scheme.config.d,
            actual: u.len(),
        });
    }
    let mut x = Vec::with_capacity(s);
    match scheme.encoder.map {
        EncoderMap::LinearGain { gain } => {
            if let Some(bad) = u.iter().find(|v| !v.is_finite()) {
                return Err(Error::InvalidSample(format!("non-finite input {bad}")));
            }
            x.extend(u.iter().map(|&v| gain * v));
        }
        EncoderMap::TwoLevel { level_lo, level_hi } => {
            for &v in u {
                x.push(if v == 0.0 {
                    level_lo
                } else if v == 1.0 {
                    level_hi
                } else {
                    return Err(Error::InvalidSample(format!(
                        "two-level encoder needs binary input, got {v}"
                    )));
                });
            }
        }
    }
    let var = scheme.encoder.local_noise_var;
    if var > 0.0 {
        let sd = var.sqrt();
        for xj in &mut x {
            let z: f64 = rng.sample(StandardNormal);
            *xj += sd * z;
        }
    }
    Ok(x)
}

/// `θ̂ = α·y + β`, componentwise, without clipping to Θ.
pub fn estimate(scheme: &Scheme, y: &[f64]) -> Result<Theta> {
    if y.len() != scheme.config.s {
        return Err(Error::DimensionMismatch {
            expected: scheme.config.s,
            actual: y.len(),
        });
    }
    let AffineEstimator { alpha, beta } = scheme.estimator;
    Ok(Theta::new(y.iter().map(|&v| alpha * v + beta).collect()))
}

/// Exact average transmit power `(1/s)·Σⱼ E[X_ij²]` under `θ`.
pub fn power_audit(scheme: &Scheme, theta: &Theta) -> Result<f64> {
    let d = scheme.config.d;
    validate_theta(&scheme.model, d, theta)?;
    let noise = scheme.encoder.local_noise_var;
    let signal = match (scheme.encoder.map, scheme.model) {
        (EncoderMap::LinearGain { gain }, ModelSpec::GaussianLocation { sigma_sq, .. }) => {
            gain * gain * (theta.norm_sq() / d as f64 + sigma_sq)
        }
        (EncoderMap::TwoLevel { level_lo, level_hi }, _) => {
            theta
                .values()
                .iter()
                .map(|&t| t * level_hi * level_hi + (1.0 - t) * level_lo * level_lo)
                .sum::<f64>()
                / d as f64
        }
        (EncoderMap::LinearGain { gain }, _) => {
            // Binary data through a linear gain: E[U²] = θ.
            gain * gain * theta.sum() / d as f64
        }
    };
    Ok(signal + noise)
}

/// Re-expresses a `(A, B)` level pair with estimator `(α, β)` as the
/// centered map `±C` with an estimator shifted by `n·(A+B)/2`.
pub fn equivalent_centered(
    level_lo: f64,
    level_hi: f64,
    estimator: AffineEstimator,
    n: usize,
) -> Result<(f64, AffineEstimator)> {
    if !(level_hi > level_lo) {
        return Err(invalid(
            "levels",
            format!("need level_hi > level_lo, got ({level_lo}, {level_hi})"),
        ));
    }
    let center = (level_hi - level_lo) / 2.0;
    let shift = n as f64 * (level_lo + level_hi) / 2.0;
    Ok((
        center,
        AffineEstimator {
            alpha: estimator.alpha,
            beta: estimator.beta + estimator.alpha * shift,
        },
    ))
}
