//! Closed-form minimax risks, exact per-θ risks, and worst-case θ search.
//!
//! For a centered two-level map `±C` with estimator `α·Y + β`, the risk at θ
//! is a quadratic in θ whose only θ-dependence is through `Σθⱼ²` and `Σθⱼ`.
//! Combined with `(Σθⱼ)²/d ≤ Σθⱼ² ≤ Σθⱼ`, the supremum over Θ reduces to a
//! one-dimensional problem in `t = Σθⱼ`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::model::{validate_theta, ModelSpec, SystemConfig, Theta};
use crate::privacy::calibrate_sigma_pri;
use crate::scheme::{low_noise_regime, Branch, EncoderMap, Scheme};

/// Quadratic coefficients at or above this are handled by the linear (0/1
/// vertex) reduction.
const QUADRATIC_ZERO_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClosedForm {
    pub risk: f64,
    pub branch: Branch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskReport {
    pub closed_form: f64,
    pub mc_mean: Option<f64>,
    pub mc_stderr: Option<f64>,
    pub worst_theta: Theta,
    pub branch: Branch,
}

fn gaussian_params(model: &ModelSpec) -> Result<(f64, f64)> {
    match *model {
        ModelSpec::GaussianLocation { sigma_sq, bound } => Ok((sigma_sq, bound)),
        _ => Err(invalid("model", "requires the Gaussian location model")),
    }
}

/// `(dσ²/n)·[1 + (σ₀²/(nP))·(1 + B²/σ²)]`.
pub fn gaussian_minimax_risk(cfg: &SystemConfig, model: &ModelSpec) -> Result<f64> {
    let (sigma_sq, bound) = gaussian_params(model)?;
    cfg.validate()?;
    let (n, d) = (cfg.n_f64(), cfg.d_f64());
    Ok(d * sigma_sq / n * (1.0 + cfg.sigma0_sq / (n * cfg.power) * (1.0 + bound * bound / sigma_sq)))
}

/// Product Bernoulli minimax risk on an explicit branch formula.
pub fn bernoulli_risk_on(cfg: &SystemConfig, branch: Branch) -> f64 {
    let (n, d) = (cfg.n_f64(), cfg.d_f64());
    match branch {
        Branch::HighNoise => d / 4.0 / (1.0 + n * (n * cfg.power / cfg.sigma0_sq)),
        _ => d / (4.0 * (n.sqrt() + 1.0).powi(2)) * (1.0 + cfg.sigma0_sq / (n * cfg.power)),
    }
}

fn two_level_branch(cfg: &SystemConfig) -> Branch {
    if low_noise_regime(cfg) {
        Branch::LowNoise
    } else {
        Branch::HighNoise
    }
}

pub fn bernoulli_minimax_risk(cfg: &SystemConfig) -> f64 {
    bernoulli_risk_on(cfg, two_level_branch(cfg))
}

fn gap_factor_sq(d: f64, m: f64) -> f64 {
    (((d - m) / m).sqrt() + (m / (d - m)).sqrt()).powi(2)
}

/// Sparse Bernoulli (m/d < 1/2) minimax risk on an explicit branch formula.
pub fn sparse_risk_on(cfg: &SystemConfig, m: usize, branch: Branch) -> f64 {
    let (n, d, m) = (cfg.n_f64(), cfg.d_f64(), m as f64);
    let k2 = gap_factor_sq(d, m);
    let p = cfg.power;
    match branch {
        Branch::HighNoise => m / (d / (d - m) + n * (m * n * p * k2) / (d * cfg.sigma0_sq)),
        _ => m / (n.sqrt() + 1.0).powi(2) * ((d - m) / d + d * cfg.sigma0_sq / (m * n * p * k2)),
    }
}

pub fn sparse_minimax_risk(cfg: &SystemConfig, m: usize) -> Result<f64> {
    cfg.validate()?;
    ModelSpec::SparseBernoulli { m }.validate(cfg.d)?;
    if 2 * m >= cfg.d {
        return Ok(bernoulli_minimax_risk(cfg));
    }
    Ok(sparse_risk_on(cfg, m, two_level_branch(cfg)))
}

/// Closed-form minimax risk and branch for the optimal scheme of `model`.
pub fn minimax_risk(model: &ModelSpec, cfg: &SystemConfig) -> Result<ClosedForm> {
    cfg.validate()?;
    model.validate(cfg.d)?;
    Ok(match *model {
        ModelSpec::GaussianLocation { .. } => ClosedForm {
            risk: gaussian_minimax_risk(cfg, model)?,
            branch: Branch::Gaussian,
        },
        ModelSpec::ProductBernoulli => ClosedForm {
            risk: bernoulli_minimax_risk(cfg),
            branch: two_level_branch(cfg),
        },
        ModelSpec::SparseBernoulli { m } => ClosedForm {
            risk: sparse_minimax_risk(cfg, m)?,
            branch: two_level_branch(cfg),
        },
    })
}

/// Minimax risk of the ε-robust scheme, written directly in terms of ε.
/// Falls back to the base risk when no local noise is needed.
pub fn robust_risk(model: &ModelSpec, cfg: &SystemConfig, epsilon: f64) -> Result<ClosedForm> {
    let sigma_pri_sq = calibrate_sigma_pri(cfg, epsilon)?;
    if sigma_pri_sq == 0.0 {
        return minimax_risk(model, cfg);
    }
    model.validate(cfg.d)?;
    let effective = cfg.with_local_noise(sigma_pri_sq)?;
    let branch = match model {
        ModelSpec::GaussianLocation { .. } => Branch::Gaussian,
        _ => two_level_branch(&effective),
    };
    let (n, d) = (cfg.n_f64(), cfg.d_f64());
    // Noise-to-power ratio of the rebudgeted scheme, s/(2ε).
    let privacy_ratio = cfg.s as f64 / (2.0 * epsilon);
    let risk = match *model {
        ModelSpec::GaussianLocation { sigma_sq, bound } => {
            d * sigma_sq / n * (1.0 + privacy_ratio / n * (1.0 + bound * bound / sigma_sq))
        }
        ModelSpec::SparseBernoulli { m } if 2 * m < cfg.d => {
            let m = m as f64;
            let k2 = gap_factor_sq(d, m);
            match branch {
                Branch::HighNoise => m / (d / (d - m) + n * (n / privacy_ratio) * m * k2 / d),
                _ => m / (n.sqrt() + 1.0).powi(2) * ((d - m) / d + privacy_ratio / n * d / (m * k2)),
            }
        }
        _ => match branch {
            Branch::HighNoise => d / 4.0 / (1.0 + n * (n / privacy_ratio)),
            _ => d / (4.0 * (n.sqrt() + 1.0).powi(2)) * (1.0 + privacy_ratio / n),
        },
    };
    Ok(ClosedForm { risk, branch })
}

/// Coefficients of the two-level risk `q·Σθ² + l·Σθ + k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiskCoefficients {
    pub quadratic: f64,
    pub linear: f64,
    pub constant: f64,
}

impl RiskCoefficients {
    pub fn new(center: f64, alpha: f64, beta: f64, n: usize, d: usize, sigma0_sq: f64) -> Self {
        let n = n as f64;
        let ca = center * alpha;
        let quadratic = 4.0 * (n * n - n) * ca * ca - 4.0 * n * ca + 1.0;
        let linear = 4.0 * n * ca * ca + 4.0 * n * ca * beta - 2.0 * beta - 4.0 * n * n * ca * ca + 2.0 * n * ca;
        let constant = d as f64 * (alpha * alpha * sigma0_sq + (beta - n * ca).powi(2));
        Self {
            quadratic,
            linear,
            constant,
        }
    }

    pub fn eval(&self, sum_sq: f64, sum: f64) -> f64 {
        self.quadratic * sum_sq + self.linear * sum + self.constant
    }
}

fn check_unit_theta(theta: &Theta, d: usize) -> Result<()> {
    validate_theta(&ModelSpec::ProductBernoulli, d, theta)
}

/// Exact `E‖θ̂ − θ‖²` for the centered map `±C` with estimator `α·Y + β`.
pub fn exact_risk_two_level(center: f64, alpha: f64, beta: f64, theta: &Theta, cfg: &SystemConfig) -> Result<f64> {
    check_unit_theta(theta, cfg.d)?;
    let coef = RiskCoefficients::new(center, alpha, beta, cfg.n, cfg.d, cfg.sigma0_sq);
    Ok(coef.eval(theta.norm_sq(), theta.sum()))
}

/// Exact risk of a linear-gain encoder `x = γ·u` with estimator `α·Y`
/// on Gaussian data: `d·α²(nγ²σ² + σ₀²) + (nαγ − 1)²·‖θ‖²`.
pub fn exact_risk_linear(gain: f64, alpha: f64, sigma_sq: f64, theta: &Theta, cfg: &SystemConfig) -> f64 {
    let n = cfg.n_f64();
    let variance = alpha * alpha * (n * gain * gain * sigma_sq + cfg.sigma0_sq);
    cfg.d_f64() * variance + (n * alpha * gain - 1.0).powi(2) * theta.norm_sq()
}

/// Exact risk of the optimal Gaussian scheme at θ.
pub fn exact_risk_gaussian(cfg: &SystemConfig, model: &ModelSpec, theta: &Theta) -> Result<f64> {
    let (sigma_sq, bound) = gaussian_params(model)?;
    validate_theta(model, cfg.d, theta)?;
    let energy = bound * bound + sigma_sq;
    let gain = (cfg.power / energy).sqrt();
    let alpha = (energy / cfg.power).sqrt() / cfg.n_f64();
    Ok(exact_risk_linear(gain, alpha, sigma_sq, theta, cfg))
}

/// θ with `⌊t⌋` leading ones and the fractional remainder in the next slot.
fn vertex_theta(d: usize, t: f64) -> Theta {
    let ones = (t.floor() as usize).min(d);
    let mut values = vec![0.0; d];
    values[..ones].iter_mut().for_each(|v| *v = 1.0);
    let frac = t - ones as f64;
    if frac > 0.0 && ones < d {
        values[ones] = frac;
    }
    Theta::new(values)
}

/// Supremum of the two-level risk over `{θ ∈ [0,1]^d : Σθⱼ ≤ t_max}` and a
/// θ attaining it.
pub fn worst_case_theta(center: f64, alpha: f64, beta: f64, cfg: &SystemConfig, t_max: f64) -> Result<(Theta, f64)> {
    let d = cfg.d;
    if !(0.0..=d as f64).contains(&t_max) {
        return Err(invalid("t_max", format!("must lie in [0, d = {d}], got {t_max}")));
    }
    let coef = RiskCoefficients::new(center, alpha, beta, cfg.n, d, cfg.sigma0_sq);
    let eval = |theta: &Theta| coef.eval(theta.norm_sq(), theta.sum());

    if coef.quadratic >= -QUADRATIC_ZERO_TOL {
        // Convex in θ: the maximum sits on a vertex of the feasible polytope.
        let floor = t_max.floor();
        let mut candidates = vec![Theta::constant(d, 0.0), vertex_theta(d, floor)];
        if t_max > floor {
            candidates.push(vertex_theta(d, t_max));
        }
        let mut best = candidates.swap_remove(0);
        let mut best_val = eval(&best);
        for cand in candidates {
            let val = eval(&cand);
            if val > best_val {
                best_val = val;
                best = cand;
            }
        }
        Ok((best, best_val))
    } else {
        // Concave: all-equal θ, maximize q·t²/d + l·t over [0, t_max].
        let vertex = -coef.linear * d as f64 / (2.0 * coef.quadratic);
        let t = vertex.clamp(0.0, t_max);
        let theta = Theta::constant(d, t / d as f64);
        let val = eval(&theta);
        Ok((theta, val))
    }
}

/// Exact risk of `scheme` at θ, using the channel noise the estimator sees.
pub fn scheme_exact_risk(scheme: &Scheme, theta: &Theta) -> Result<f64> {
    let cfg = SystemConfig {
        sigma0_sq: scheme.effective_sigma0_sq(),
        ..scheme.config
    };
    validate_theta(&scheme.model, cfg.d, theta)?;
    match (scheme.encoder.map, scheme.model) {
        (EncoderMap::LinearGain { gain }, ModelSpec::GaussianLocation { sigma_sq, .. }) => {
            Ok(exact_risk_linear(gain, scheme.estimator.alpha, sigma_sq, theta, &cfg))
        }
        (EncoderMap::TwoLevel { .. }, _) => {
            let (center, est) = scheme
                .centered()
                .ok_or_else(|| invalid("levels", "two-level scheme needs level_hi > level_lo"))?;
            exact_risk_two_level(center, est.alpha, est.beta, theta, &cfg)
        }
        _ => Err(invalid("scheme", "encoder does not match the model family")),
    }
}

/// Worst-case θ and supremum risk for `scheme` over its model's Θ.
pub fn scheme_worst_case(scheme: &Scheme) -> Result<(Theta, f64)> {
    let d = scheme.config.d;
    match scheme.model {
        ModelSpec::GaussianLocation { bound, .. } => {
            // The exact risk grows with ‖θ‖² (weakly), so the boundary is worst.
            let theta = Theta::constant(d, bound);
            let risk = scheme_exact_risk(scheme, &theta)?;
            Ok((theta, risk))
        }
        model => {
            let cfg = SystemConfig {
                sigma0_sq: scheme.effective_sigma0_sq(),
                ..scheme.config
            };
            let (center, est) = scheme.centered().ok_or(Error::InvalidParameter {
                field: "scheme",
                reason: "Bernoulli families need a two-level encoder".into(),
            })?;
            let t_max = model.sum_cap(d).unwrap_or(d as f64);
            worst_case_theta(center, est.alpha, est.beta, &cfg, t_max)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scheme::{bernoulli_scheme, optimal_scheme, robustify, sparse_scheme};
    use approx::assert_relative_eq;

    fn cfg(n: usize, d: usize, p: f64, s0: f64) -> SystemConfig {
        SystemConfig::new(n, d, p, s0).unwrap()
    }

    fn gauss() -> ModelSpec {
        ModelSpec::gaussian(1.0, 1.0).unwrap()
    }

    #[test]
    fn gaussian_closed_form_values() {
        assert_relative_eq!(
            gaussian_minimax_risk(&cfg(10, 2, 1.0, 1.0), &gauss()).unwrap(),
            0.24,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            gaussian_minimax_risk(&cfg(10, 2, 1.0, 0.0), &gauss()).unwrap(),
            0.2,
            max_relative = 1e-12
        );
        let tiny_b = ModelSpec::gaussian(1.0, 1e-9).unwrap();
        assert_relative_eq!(
            gaussian_minimax_risk(&cfg(10, 2, 1.0, 10.0), &tiny_b).unwrap(),
            0.4,
            max_relative = 1e-9
        );
    }

    #[test]
    fn bernoulli_closed_form_values() {
        assert_relative_eq!(
            bernoulli_minimax_risk(&cfg(4, 1, 1.0, 1.0)),
            1.25 / 36.0,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            bernoulli_minimax_risk(&cfg(4, 1, 1.0, 100.0)),
            0.25 / 1.16,
            max_relative = 1e-12
        );
        for n in [1usize, 3, 8, 20] {
            let c = cfg(n, 3, 0.7, (n as f64).powf(1.5) * 0.7);
            assert_relative_eq!(
                bernoulli_risk_on(&c, Branch::LowNoise),
                bernoulli_risk_on(&c, Branch::HighNoise),
                max_relative = 1e-12
            );
            assert_relative_eq!(
                sparse_risk_on(&c, 1, Branch::LowNoise),
                sparse_risk_on(&c, 1, Branch::HighNoise),
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn sparse_closed_form_values() {
        let v = sparse_minimax_risk(&cfg(4, 4, 1.0, 1.0), 1).unwrap();
        assert_relative_eq!(v, (0.75 + 4.0 / (4.0 * 16.0 / 3.0)) / 9.0, max_relative = 1e-12);
        let c = cfg(4, 4, 1.0, 1.0);
        assert_eq!(sparse_minimax_risk(&c, 4).unwrap(), bernoulli_minimax_risk(&c));
        let loud = sparse_minimax_risk(&cfg(4, 4, 1.0, 1e6), 1).unwrap();
        assert!(loud < 1.0 && loud > 0.0);
        assert!(sparse_minimax_risk(&c, 5).is_err());
    }

    #[test]
    fn robust_closed_form_values() {
        let g = robust_risk(&gauss(), &cfg(10, 2, 1.0, 1.0), 0.1).unwrap();
        assert_relative_eq!(g.risk, 0.6, max_relative = 1e-12);
        let b = robust_risk(&ModelSpec::ProductBernoulli, &cfg(4, 2, 1.0, 1.0), 0.25).unwrap();
        assert_eq!(b.branch, Branch::LowNoise);
        assert_relative_eq!(b.risk, 2.0 / 36.0 * 2.0, max_relative = 1e-12);
        let c = cfg(4, 2, 1.0, 1.0);
        let clamped = robust_risk(&ModelSpec::ProductBernoulli, &c, 5.0).unwrap();
        assert_eq!(clamped.risk, bernoulli_minimax_risk(&c));
        assert!(robust_risk(&gauss(), &c, 0.0).is_err());
    }

    #[test]
    fn robust_matches_base_at_effective_params() {
        let models = [
            gauss(),
            ModelSpec::ProductBernoulli,
            ModelSpec::SparseBernoulli { m: 1 },
        ];
        for model in models {
            for (n, s0) in [(4usize, 1.0), (16, 0.3), (3, 50.0), (30, 2.0)] {
                for eps in [0.01, 0.1, 0.5] {
                    let c = cfg(n, 5, 1.5, s0);
                    let sigma = calibrate_sigma_pri(&c, eps).unwrap();
                    if sigma == 0.0 {
                        continue;
                    }
                    let direct = robust_risk(&model, &c, eps).unwrap();
                    let composed = minimax_risk(&model, &c.with_local_noise(sigma).unwrap()).unwrap();
                    assert_eq!(direct.branch, composed.branch);
                    assert_relative_eq!(direct.risk, composed.risk, max_relative = 1e-10);
                }
            }
        }
    }

    #[test]
    fn constant_estimator_risk() {
        let c = cfg(5, 3, 1.0, 2.0);
        let theta = Theta::new(vec![0.1, 0.7, 0.4]);
        let v = exact_risk_two_level(1.3, 0.0, 0.5, &theta, &c).unwrap();
        let direct: f64 = theta.values().iter().map(|t| (0.5 - t).powi(2)).sum();
        assert_relative_eq!(v, direct, max_relative = 1e-12);

        let (worst, sup) = worst_case_theta(1.0, 0.0, 0.5, &cfg(2, 3, 1.0, 1.0), 3.0).unwrap();
        assert_relative_eq!(sup, 0.75, max_relative = 1e-12);
        assert!(worst.values().iter().all(|&t| t == 0.0 || t == 1.0));
    }

    #[test]
    fn optimal_low_noise_risk_is_flat() {
        let c = cfg(4, 3, 1.0, 1.0);
        let alpha = 1.0 / 12.0;
        let reference = exact_risk_two_level(1.0, alpha, 0.5, &Theta::constant(3, 0.0), &c).unwrap();
        for theta in [vec![0.2, 0.9, 0.5], vec![1.0, 1.0, 0.0], vec![0.33, 0.01, 0.77]] {
            let v = exact_risk_two_level(1.0, alpha, 0.5, &Theta::new(theta), &c).unwrap();
            assert_relative_eq!(v, reference, max_relative = 1e-12);
        }
        let (_, sup) = worst_case_theta(1.0, alpha, 0.5, &c, 3.0).unwrap();
        assert_relative_eq!(sup, reference, max_relative = 1e-12);
    }

    #[test]
    fn gaussian_exact_is_theta_independent() {
        let c = cfg(10, 2, 1.0, 1.0);
        for theta in [vec![0.0, 0.0], vec![1.0, 1.0], vec![-0.3, 1.2]] {
            let v = exact_risk_gaussian(&c, &gauss(), &Theta::new(theta)).unwrap();
            assert_relative_eq!(v, 0.24, max_relative = 1e-12);
        }
        assert!(exact_risk_gaussian(&c, &gauss(), &Theta::new(vec![2.0, 2.0])).is_err());
    }

    #[test]
    fn fractional_cap_vertex() {
        // Strongly convex risk with fractional cap: the vertex with the
        // fractional slot must be considered.
        let c = cfg(3, 3, 1.0, 0.5);
        let (theta, sup) = worst_case_theta(1.0, 0.0, -1.0, &c, 1.5).unwrap();
        assert_eq!(theta.values(), &[1.0, 0.5, 0.0]);
        let direct: f64 = theta.values().iter().map(|t| (-1.0 - t).powi(2)).sum();
        assert_relative_eq!(sup, direct, max_relative = 1e-12);
        assert!(worst_case_theta(1.0, 0.1, 0.5, &c, 4.0).is_err());
    }

    #[test]
    fn scheme_worst_case_matches_closed_forms() {
        let models = [
            gauss(),
            ModelSpec::ProductBernoulli,
            ModelSpec::SparseBernoulli { m: 1 },
        ];
        for model in models {
            for (n, s0) in [(4usize, 1.0), (4, 100.0), (9, 5.0), (2, 0.0)] {
                let c = cfg(n, 4, 1.0, s0);
                let scheme = optimal_scheme(&model, &c).unwrap();
                let (_, sup) = scheme_worst_case(&scheme).unwrap();
                let closed = minimax_risk(&model, &c).unwrap().risk;
                assert_relative_eq!(sup, closed, max_relative = 1e-9);
            }
        }
    }

    #[test]
    fn robust_scheme_worst_case_matches_robust_risk() {
        let c = cfg(10, 2, 1.0, 1.0);
        for model in [
            gauss(),
            ModelSpec::ProductBernoulli,
            ModelSpec::SparseBernoulli { m: 1 },
        ] {
            let scheme = robustify(&model, &c, 0.1).unwrap();
            let (_, sup) = scheme_worst_case(&scheme).unwrap();
            assert_relative_eq!(sup, robust_risk(&model, &c, 0.1).unwrap().risk, max_relative = 1e-9);
        }
    }

    #[test]
    fn closed_forms_are_monotone() {
        let models = [
            gauss(),
            ModelSpec::ProductBernoulli,
            ModelSpec::SparseBernoulli { m: 1 },
        ];
        for model in models {
            let r = |n: usize, p: f64, s0: f64| minimax_risk(&model, &cfg(n, 5, p, s0)).unwrap().risk;
            for n in 1..40 {
                for &p in &[0.1, 0.5, 1.0, 4.0] {
                    for &s0 in &[0.0, 0.5, 3.0, 30.0, 300.0] {
                        let base = r(n, p, s0);
                        assert!(r(n + 1, p, s0) <= base * (1.0 + 1e-12));
                        assert!(r(n, p * 1.1, s0) <= base * (1.0 + 1e-12));
                        assert!(r(n, p, s0 + 1.0) >= base * (1.0 - 1e-12));
                    }
                }
            }
        }
    }

    #[test]
    fn robust_risk_decreases_in_epsilon() {
        let c = cfg(8, 3, 1.0, 1.0);
        for model in [
            gauss(),
            ModelSpec::ProductBernoulli,
            ModelSpec::SparseBernoulli { m: 1 },
        ] {
            let mut prev = f64::INFINITY;
            for k in 0..60 {
                let eps = 1e-3 * 1.25f64.powi(k);
                let v = robust_risk(&model, &c, eps).unwrap().risk;
                assert!(v <= prev * (1.0 + 1e-12), "{model:?} eps {eps}");
                prev = v;
            }
            assert_eq!(prev, minimax_risk(&model, &c).unwrap().risk);
        }
    }

    #[test]
    fn bernoulli_scheme_branch_matches_risk_branch() {
        for s0 in [0.5, 8.0, 8.0001, 100.0] {
            let c = cfg(4, 2, 1.0, s0);
            assert_eq!(
                bernoulli_scheme(&c).unwrap().branch,
                minimax_risk(&ModelSpec::ProductBernoulli, &c).unwrap().branch
            );
            assert_eq!(
                sparse_scheme(&cfg(4, 5, 1.0, s0), 2).unwrap().branch,
                bernoulli_scheme(&c).unwrap().branch
            );
        }
    }
}
