//! Independent oracles used by the acceptance run.

use ota_core::scheme::{AffineEstimator, Branch, EncoderMap, EncoderSpec, Scheme};
use ota_core::{ModelSpec, SystemConfig, Theta};
use rand::Rng;

/// `I(X₁ + … + Xₙ; X₁)` in nats for i.i.d. Bernoulli(θ) bits, by
/// enumerating all 2ⁿ bit patterns.
pub fn enumerate_binary_sum_mi(n: usize, theta: f64) -> f64 {
    assert!((1..=24).contains(&n), "enumeration limited to 1..=24 users");
    let mut joint = vec![[0.0f64; 2]; n + 1];
    for pattern in 0u32..(1 << n) {
        let ones = pattern.count_ones() as i32;
        joint[ones as usize][(pattern & 1) as usize] += theta.powi(ones) * (1.0 - theta).powi(n as i32 - ones);
    }
    let px = [1.0 - theta, theta];
    let mut mi = 0.0;
    for row in &joint {
        let ps = row[0] + row[1];
        for x in 0..2 {
            if row[x] > 0.0 {
                mi += row[x] * (row[x] / (px[x] * ps)).ln();
            }
        }
    }
    mi
}

/// A centered two-level scheme with an arbitrary affine estimator.
pub fn centered_scheme(center: f64, alpha: f64, beta: f64, cfg: SystemConfig) -> Scheme {
    Scheme {
        encoder: EncoderSpec {
            map: EncoderMap::TwoLevel {
                level_lo: -center,
                level_hi: center,
            },
            local_noise_var: 0.0,
        },
        estimator: AffineEstimator { alpha, beta },
        model: ModelSpec::ProductBernoulli,
        config: cfg,
        branch: Branch::LowNoise,
    }
}

/// One random `(C, α, β, θ)` instance with `n ≤ 10`, `d ≤ 4`.
#[derive(Debug, Clone)]
pub struct TwoLevelInstance {
    pub cfg: SystemConfig,
    pub center: f64,
    pub alpha: f64,
    pub beta: f64,
    pub theta: Theta,
}

impl TwoLevelInstance {
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let n = rng.random_range(1..=10);
        let d = rng.random_range(1..=4);
        let power: f64 = rng.random_range(0.2..3.0);
        let cfg = SystemConfig::new(n, d, power, rng.random_range(0.0..5.0)).expect("valid config");
        let center = power.sqrt() * rng.random_range(0.3..1.0);
        let alpha = rng.random_range(0.0..1.0) / (n as f64 * center);
        let beta = rng.random_range(-0.5..1.5);
        let theta = Theta::new((0..d).map(|_| rng.random::<f64>()).collect());
        Self {
            cfg,
            center,
            alpha,
            beta,
            theta,
        }
    }

    pub fn scheme(&self) -> Scheme {
        centered_scheme(self.center, self.alpha, self.beta, self.cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn enumeration_small_cases() {
        assert!((enumerate_binary_sum_mi(1, 0.3) - (-(0.3f64 * 0.3f64.ln() + 0.7 * 0.7f64.ln()))).abs() < 1e-15);
        assert!((enumerate_binary_sum_mi(2, 0.5) - 0.5 * std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(enumerate_binary_sum_mi(3, 0.0), 0.0);
    }
}
