//! Brute-force checks of the optimization results behind the two-level
//! schemes.
//!
//! Grid searches only ever score a candidate through
//! [`exact_risk_two_level`](crate::risk::exact_risk_two_level) and
//! [`worst_case_theta`], never through the closed-form minimax formulas they
//! are compared against.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ModelSpec, SystemConfig, Theta};
use crate::privacy::vlnv_bound_check;
use crate::risk::{minimax_risk, worst_case_theta, RiskCoefficients};
use crate::scheme::{optimal_scheme, sparse_levels};

/// Window shrink factor between refinement rounds.
pub const ZOOM_FACTOR: f64 = 10.0;
/// Relative tolerance for recovered (α, β).
pub const AFFINE_TOLERANCE: f64 = 0.01;
/// Relative tolerance for the recovered supremum risk.
pub const SUP_RISK_TOLERANCE: f64 = 0.005;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub steps: usize,
    pub refine_rounds: usize,
}

impl GridSpec {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self {
            lo,
            hi,
            steps: 201,
            refine_rounds: 3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lo.is_finite() && self.hi.is_finite() && self.lo < self.hi) {
            return Err(Error::InvalidGrid(format!(
                "need lo < hi, got [{}, {}]",
                self.lo, self.hi
            )));
        }
        if self.steps < 3 {
            return Err(Error::InvalidGrid(format!("need at least 3 steps, got {}", self.steps)));
        }
        Ok(())
    }

    fn point(lo: f64, hi: f64, steps: usize, i: usize) -> f64 {
        lo + (hi - lo) * i as f64 / (steps - 1) as f64
    }

    /// Step size after all refinement rounds.
    pub fn final_step(&self) -> f64 {
        (self.hi - self.lo) / ZOOM_FACTOR.powi(self.refine_rounds as i32) / (self.steps - 1) as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleVerdict {
    pub name: String,
    pub analytic_value: Vec<f64>,
    pub oracle_value: Vec<f64>,
    /// Largest relative (or, for resolution checks, absolute) discrepancy.
    pub gap: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub note: Option<String>,
}

impl OracleVerdict {
    fn new(name: impl Into<String>, analytic: Vec<f64>, oracle: Vec<f64>, gap: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            analytic_value: analytic,
            oracle_value: oracle,
            gap,
            tolerance,
            pass: gap <= tolerance,
            note: None,
        }
    }
}

fn rel_gap(analytic: f64, oracle: f64) -> f64 {
    let scale = analytic.abs().max(oracle.abs());
    if scale == 0.0 {
        0.0
    } else {
        (analytic - oracle).abs() / scale
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineOptimum {
    pub alpha: f64,
    pub beta: f64,
    pub sup_risk: f64,
}

/// Minimizes the worst-case two-level risk over an `(α, β)` grid, zooming
/// in on the incumbent after each round. Ties go to the lowest α, then the
/// lowest β.
pub fn grid_search_affine(
    cfg: &SystemConfig,
    center: f64,
    t_max: f64,
    alpha_grid: &GridSpec,
    beta_grid: &GridSpec,
) -> Result<AffineOptimum> {
    alpha_grid.validate()?;
    beta_grid.validate()?;
    if !(center > 0.0) {
        return Err(Error::InvalidGrid(format!("center must be > 0, got {center}")));
    }
    // Surface a bad t_max before the parallel loop.
    worst_case_theta(center, 0.0, 0.0, cfg, t_max)?;
    let sup =
        |alpha: f64, beta: f64| worst_case_theta(center, alpha, beta, cfg, t_max).map_or(f64::INFINITY, |(_, v)| v);

    let (mut a_lo, mut a_hi) = (alpha_grid.lo, alpha_grid.hi);
    let (mut b_lo, mut b_hi) = (beta_grid.lo, beta_grid.hi);
    let rounds = alpha_grid.refine_rounds.max(beta_grid.refine_rounds);
    let mut best = AffineOptimum {
        alpha: a_lo,
        beta: b_lo,
        sup_risk: f64::INFINITY,
    };
    for _ in 0..=rounds {
        let (na, nb) = (alpha_grid.steps, beta_grid.steps);
        let rows: Vec<(f64, usize, usize)> = (0..na)
            .into_par_iter()
            .map(|ia| {
                let alpha = GridSpec::point(a_lo, a_hi, na, ia);
                let mut row_best = (f64::INFINITY, ia, 0);
                for ib in 0..nb {
                    let v = sup(alpha, GridSpec::point(b_lo, b_hi, nb, ib));
                    if v < row_best.0 {
                        row_best = (v, ia, ib);
                    }
                }
                row_best
            })
            .collect();
        let (val, ia, ib) = rows
            .into_iter()
            .fold((f64::INFINITY, 0, 0), |acc, r| if r.0 < acc.0 { r } else { acc });
        let alpha = GridSpec::point(a_lo, a_hi, na, ia);
        let beta = GridSpec::point(b_lo, b_hi, nb, ib);
        if val < best.sup_risk {
            best = AffineOptimum {
                alpha,
                beta,
                sup_risk: val,
            };
        }
        let half_a = (a_hi - a_lo) / ZOOM_FACTOR / 2.0;
        let half_b = (b_hi - b_lo) / ZOOM_FACTOR / 2.0;
        (a_lo, a_hi) = (best.alpha - half_a, best.alpha + half_a);
        (b_lo, b_hi) = (best.beta - half_b, best.beta + half_b);
    }
    Ok(best)
}

/// Default search box: `α ∈ [0, 1/(nC)]` (up to twice the noiseless
/// inversion gain) and `β ∈ [−1, 2]`.
pub fn default_affine_grids(n: usize, center: f64) -> (GridSpec, GridSpec) {
    (GridSpec::new(0.0, 1.0 / (n as f64 * center)), GridSpec::new(-1.0, 2.0))
}

/// Power of a level pair averaged over coordinates when `Σθ = t`.
fn level_power(level_lo: f64, level_hi: f64, d: f64, t: f64) -> f64 {
    (t * level_hi * level_hi + (d - t) * level_lo * level_lo) / d
}

/// Largest `B` on `[lo, hi]` with `feasible(B)`, found by successive grid
/// scans. `feasible` must be monotone (true below a threshold).
fn largest_feasible(lo: f64, hi: f64, grid: &GridSpec, feasible: impl Fn(f64) -> bool) -> Option<f64> {
    let (mut lo, mut hi) = (lo, hi);
    let mut best = None;
    for _ in 0..=grid.refine_rounds {
        let mut found = None;
        for i in 0..grid.steps {
            let b = GridSpec::point(lo, hi, grid.steps, i);
            if feasible(b) {
                found = Some(b);
            } else {
                break;
            }
        }
        let b = found?;
        best = Some(b);
        let step = (hi - lo) / (grid.steps - 1) as f64;
        (lo, hi) = (b, b + step);
    }
    best
}

/// Brute-force maximization of `C = (B − A)/2` over level pairs that meet
/// the power budget for every `Σθ ∈ [0, m]`, compared with the analytic
/// levels.
pub fn verify_power_max_c(d: usize, m: usize, power: f64, level_grid: &GridSpec) -> Result<OracleVerdict> {
    level_grid.validate()?;
    ModelSpec::SparseBernoulli { m }.validate(d)?;
    let (df, mf) = (d as f64, m as f64);
    let tol = 1e-12 * power;
    // Power is linear in Σθ, so the two endpoints decide feasibility.
    let feasible =
        |a: f64, b: f64| level_power(a, b, df, 0.0) <= power + tol && level_power(a, b, df, mf) <= power + tol;
    let b_cap = (df * power / mf).sqrt();
    let best_b = |a: f64| largest_feasible(a, b_cap, level_grid, |b| feasible(a, b));

    let (mut lo, mut hi) = (level_grid.lo, level_grid.hi);
    let mut best: Option<(f64, f64)> = None;
    for _ in 0..=level_grid.refine_rounds {
        let candidates: Vec<Option<(f64, f64)>> = (0..level_grid.steps)
            .into_par_iter()
            .map(|i| {
                let a = GridSpec::point(lo, hi, level_grid.steps, i);
                if !feasible(a, a) {
                    return None;
                }
                best_b(a).map(|b| (a, b))
            })
            .collect();
        for (a, b) in candidates.into_iter().flatten() {
            if best.is_none_or(|(ba, bb)| b - a > bb - ba) {
                best = Some((a, b));
            }
        }
        let Some((a, _)) = best else { break };
        let half = (hi - lo) / ZOOM_FACTOR / 2.0;
        (lo, hi) = (a - half, a + half);
    }
    let (a_o, b_o) = best.ok_or_else(|| Error::InvalidGrid("no feasible level pair on the grid".into()))?;
    let (a_star, b_star) = sparse_levels(d, m, power);
    let c_star = (b_star - a_star) / 2.0;
    let c_o = (b_o - a_o) / 2.0;

    let resolution = 10.0
        * level_grid.final_step().max(
            (b_cap - level_grid.lo) / ZOOM_FACTOR.powi(level_grid.refine_rounds as i32) / (level_grid.steps - 1) as f64,
        );
    let gap = (a_o - a_star).abs().max((b_o - b_star).abs()).max((c_o - c_star).abs());
    let mut verdict = OracleVerdict::new(
        format!("power_max_levels d={d} m={m} P={power}"),
        vec![a_star, b_star, c_star],
        vec![a_o, b_o, c_o],
        gap,
        resolution,
    );
    let active = (level_power(a_o, b_o, df, mf) - power).abs();
    let analytic_feasible = feasible(a_star, b_star);
    verdict.pass = verdict.pass && analytic_feasible && c_o <= c_star + resolution && active <= resolution * 10.0;
    verdict.note = Some(format!("power at sum=m: {:.3e} from P", active));
    Ok(verdict)
}

/// `(Σθ)²/d`, `Σθ²`, `Σθ` for θ.
pub fn key_inequality_parts(theta: &Theta) -> (f64, f64, f64) {
    let sum = theta.sum();
    (sum * sum / theta.len() as f64, theta.norm_sq(), sum)
}

/// `(Σθⱼ)²/d ≤ Σθⱼ² ≤ Σθⱼ` for `θ ∈ [0,1]^d`.
pub fn key_inequality_check(theta: &Theta) -> bool {
    let (lo, mid, hi) = key_inequality_parts(theta);
    let slack = 1e-12 * hi.max(1.0);
    lo <= mid + slack && mid <= hi + slack
}

/// Analytic (α*, β*) of the centered scheme `±C` in the regime where the
/// Σθ² coefficient is nonnegative, as a min over two candidate gains.
pub fn centered_optimum(n: usize, center: f64, sigma0_sq: f64, d: usize, m: usize) -> (f64, f64) {
    let (nf, df, mf) = (n as f64, d as f64, m as f64);
    let boundary = 1.0 / (2.0 * nf.sqrt() * center * (nf.sqrt() + 1.0));
    if 2 * m >= d {
        let noise = nf * center / (2.0 * (sigma0_sq + nf * nf * center * center));
        (boundary.min(noise), 0.5)
    } else {
        let spread = mf * (df - mf);
        let noise = 2.0 * spread * nf * center / (df * df * sigma0_sq + 4.0 * spread * nf * nf * center * center);
        let alpha = boundary.min(noise);
        (alpha, sparse_centered_beta(n, center, d, m, alpha))
    }
}

fn sparse_centered_beta(n: usize, center: f64, d: usize, m: usize, alpha: f64) -> f64 {
    let ratio = m as f64 / d as f64;
    if 2 * m >= d {
        0.5
    } else {
        (1.0 - 2.0 * ratio) * n as f64 * center * alpha + ratio
    }
}

/// Checks that the min-over-two-gains scheme is never worse than the
/// boundary-gain candidate, and that the large-gain family is worse still.
pub fn verify_branch_consistency(cfg: &SystemConfig, center: f64, m: usize) -> Result<OracleVerdict> {
    let (n, d) = (cfg.n, cfg.d);
    let t_max = if 2 * m >= d { d as f64 } else { m as f64 };
    let nf = n as f64;
    let (alpha4, beta4) = centered_optimum(n, center, cfg.sigma0_sq, d, m);
    let alpha5 = 1.0 / (2.0 * nf.sqrt() * center * (nf.sqrt() + 1.0));
    let beta5 = sparse_centered_beta(n, center, d, m, alpha5);
    let sup = |a: f64, b: f64| worst_case_theta(center, a, b, cfg, t_max).map(|(_, v)| v);
    let sup4 = sup(alpha4, beta4)?;
    let sup5 = sup(alpha5, beta5)?;
    let candidate_in_min = alpha4 <= alpha5 * (1.0 + 1e-15);
    let gap = ((sup4 - sup5) / sup5).max(0.0);
    let mut analytic = vec![sup4];
    let mut oracle = vec![sup5];
    let mut note = None;
    let mut large_gain_ok = true;
    if n >= 2 {
        let alpha1 = 1.0 / (2.0 * center * (nf - nf.sqrt()));
        let beta1 = sparse_centered_beta(n, center, d, m, alpha1);
        let sup1 = sup(alpha1, beta1)?;
        oracle.push(sup1);
        if sup1 <= sup4 {
            if rel_gap(sup1, sup4) <= 1e-9 {
                note = Some(format!("large-gain candidate ties within 1e-9 ({sup1} vs {sup4})"));
            } else {
                large_gain_ok = false;
            }
        }
    }
    analytic.push(alpha4);
    oracle.push(alpha5);
    let mut verdict = OracleVerdict::new(
        format!("branch_consistency n={n} C={center} s0={} d={d} m={m}", cfg.sigma0_sq),
        analytic,
        oracle,
        gap,
        1e-9,
    );
    verdict.pass = verdict.pass && candidate_in_min && large_gain_ok;
    verdict.note = note;
    Ok(verdict)
}

/// Exact risk of levels `(A, B)` with estimator `α·Y + β`, computed from the
/// per-coordinate mean and variance of `Y = nA + (B−A)·Bin(n, θⱼ) + Z`.
fn exact_risk_levels(level_lo: f64, level_hi: f64, alpha: f64, beta: f64, theta: &Theta, cfg: &SystemConfig) -> f64 {
    let n = cfg.n as f64;
    let gap = level_hi - level_lo;
    theta
        .values()
        .iter()
        .map(|&t| {
            let bias = alpha * (n * level_lo + gap * n * t) + beta - t;
            let variance = alpha * alpha * (gap * gap * n * t * (1.0 - t) + cfg.sigma0_sq);
            bias * bias + variance
        })
        .sum()
}

/// Sup-risk of `(A, B)` levels with `(α, β)` against the centered pair with
/// the shifted estimator.
pub fn verify_shift_equivalence(
    level_lo: f64,
    level_hi: f64,
    alpha: f64,
    beta: f64,
    cfg: &SystemConfig,
    t_max: f64,
) -> Result<OracleVerdict> {
    let (center, shifted) = crate::scheme::equivalent_centered(
        level_lo,
        level_hi,
        crate::scheme::AffineEstimator { alpha, beta },
        cfg.n,
    )?;
    let (theta_star, sup_centered) = worst_case_theta(center, shifted.alpha, shifted.beta, cfg, t_max)?;
    let sup_levels = exact_risk_levels(level_lo, level_hi, alpha, beta, &theta_star, cfg);
    Ok(OracleVerdict::new(
        format!("shift_equivalence A={level_lo} B={level_hi}"),
        vec![sup_centered],
        vec![sup_levels],
        rel_gap(sup_centered, sup_levels),
        1e-10,
    ))
}

/// One parameter combination for the affine recovery checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineCase {
    pub n: usize,
    pub d: usize,
    pub m: usize,
    pub power: f64,
    pub sigma0_sq: f64,
}

/// Combinations spanning both branches, the `m/d = 1/2` boundary and sparse
/// configurations just below and above the branch switch.
pub fn default_affine_cases() -> Vec<AffineCase> {
    let c = |n, d, m, power, sigma0_sq| AffineCase {
        n,
        d,
        m,
        power,
        sigma0_sq,
    };
    vec![
        c(4, 1, 1, 1.0, 1.0),
        c(4, 1, 1, 1.0, 100.0),
        c(9, 2, 2, 1.0, 10.0),
        c(9, 2, 2, 0.5, 50.0),
        c(16, 3, 3, 2.0, 1.0),
        c(2, 3, 3, 1.0, 10.0),
        c(4, 4, 1, 1.0, 1.0),
        c(4, 4, 1, 1.0, 100.0),
        c(9, 5, 2, 1.0, 20.0),
        c(9, 5, 1, 1.0, 200.0),
        c(16, 6, 1, 2.0, 50.0),
        c(4, 4, 1, 1.0, 7.0),
        c(4, 2, 1, 1.0, 1.0),
        c(25, 8, 2, 0.5, 40.0),
    ]
}

/// Recovers (α*, β*) of the optimal two-level scheme by grid search and
/// compares. `alpha_scale` multiplies the analytic α (1.0 for the real check,
/// anything else as a negative control).
pub fn verify_affine_case(case: &AffineCase, alpha_scale: f64) -> Result<OracleVerdict> {
    let cfg = SystemConfig::new(case.n, case.d, case.power, case.sigma0_sq)?;
    let model = if case.m == case.d {
        ModelSpec::ProductBernoulli
    } else {
        ModelSpec::SparseBernoulli { m: case.m }
    };
    let scheme = optimal_scheme(&model, &cfg)?;
    let (center, est) = scheme
        .centered()
        .ok_or_else(|| Error::InvalidGrid("two-level scheme expected".into()))?;
    let analytic_alpha = est.alpha * alpha_scale;
    let t_max = model.sum_cap(case.d).unwrap_or(case.d as f64);
    let (ag, bg) = default_affine_grids(case.n, center);
    let found = grid_search_affine(&cfg, center, t_max, &ag, &bg)?;
    let closed = minimax_risk(&model, &cfg)?.risk;
    let gap = rel_gap(analytic_alpha, found.alpha).max(rel_gap(est.beta, found.beta));
    let risk_gap = rel_gap(closed, found.sup_risk);
    let mut verdict = OracleVerdict::new(
        format!(
            "affine_optimum n={} d={} m={} P={} s0={}",
            case.n, case.d, case.m, case.power, case.sigma0_sq
        ),
        vec![analytic_alpha, est.beta, closed],
        vec![found.alpha, found.beta, found.sup_risk],
        gap,
        AFFINE_TOLERANCE,
    );
    verdict.pass = verdict.pass && risk_gap <= SUP_RISK_TOLERANCE;
    verdict.note = Some(format!(
        "{} branch, sup-risk gap {risk_gap:.2e}",
        scheme.branch.as_str()
    ));
    Ok(verdict)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuiteOptions {
    /// Multiplier applied to every analytic α before comparison.
    pub alpha_scale: f64,
    /// Instances per randomized inequality sweep.
    pub sweep_size: usize,
    /// Instances for the shift-equivalence sweep.
    pub shift_sweep_size: usize,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        Self {
            alpha_scale: 1.0,
            sweep_size: 10_000,
            shift_sweep_size: 1_000,
        }
    }
}

const SUITE_SEED: u64 = 0x0a1b_2c3d;

fn sweep_verdict(name: &str, checked: usize, failures: usize, worst: f64) -> OracleVerdict {
    let mut v = OracleVerdict::new(name, vec![0.0], vec![failures as f64], failures as f64, 0.0);
    v.note = Some(format!("{checked} instances, worst margin {worst:.3e}"));
    v
}

fn random_theta(rng: &mut ChaCha8Rng, d: usize) -> Theta {
    Theta::new(
        (0..d)
            .map(|_| match rng.random_range(0..6) {
                0 => 0.0,
                1 => 1.0,
                _ => rng.random(),
            })
            .collect(),
    )
}

/// Runs every oracle check. Deterministic: all randomness comes from a
/// fixed internal seed.
pub fn run_suite(opts: &SuiteOptions) -> Result<Vec<OracleVerdict>> {
    let mut verdicts = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(SUITE_SEED);

    for case in default_affine_cases() {
        verdicts.push(verify_affine_case(&case, opts.alpha_scale)?);
    }

    for (d, m, power) in [
        (2, 1, 1.0),
        (4, 1, 1.0),
        (5, 2, 2.5),
        (3, 3, 1.0),
        (10, 3, 0.7),
        (7, 5, 1.0),
    ] {
        verdicts.push(verify_power_max_c(
            d,
            m,
            power,
            &GridSpec::new(-power.sqrt(), power.sqrt()),
        )?);
    }

    // Min-over-two-gains vs boundary-gain candidate on the parameter grid.
    let mut worst_gap = 0.0f64;
    let mut failures = 0;
    let mut checked = 0;
    let mut notes = 0;
    for n in 2..=16usize {
        for &center in &[0.5, 1.0, 2.0] {
            for &s0 in &[0.1, 1.0, 10.0] {
                for &m in &[1usize, 2, 4] {
                    let cfg = SystemConfig::new(n, 4, center * center, s0)?;
                    let v = verify_branch_consistency(&cfg, center, m)?;
                    checked += 1;
                    worst_gap = worst_gap.max(v.gap);
                    failures += usize::from(!v.pass);
                    notes += usize::from(v.note.is_some());
                }
            }
        }
    }
    let mut v = sweep_verdict("branch_consistency_grid", checked, failures, worst_gap);
    v.note = Some(format!(
        "{checked} configs, {notes} near-ties logged, worst gap {worst_gap:.3e}"
    ));
    verdicts.push(v);

    // At σ₀² = n^{3/2}C² the two gain candidates coincide; at the boundary
    // gain the Σθ² coefficient vanishes.
    let mut worst = 0.0f64;
    for n in 1..=64usize {
        for &center in &[0.3, 1.0, 2.7] {
            let nf = n as f64;
            let s0 = nf.powf(1.5) * center * center;
            let boundary = 1.0 / (2.0 * nf.sqrt() * center * (nf.sqrt() + 1.0));
            let noise = nf * center / (2.0 * (s0 + nf * nf * center * center));
            worst = worst.max(rel_gap(boundary, noise));
            let alpha = 1.0 / (2.0 * (nf + nf.sqrt()) * center);
            let q = RiskCoefficients::new(center, alpha, 0.5, n, 1, s0).quadratic;
            worst = worst.max(q.abs());
        }
    }
    verdicts.push(OracleVerdict::new(
        "branch_boundary_identities",
        vec![0.0],
        vec![worst],
        worst,
        1e-12,
    ));

    let mut fails = 0;
    let mut margin = f64::INFINITY;
    for _ in 0..opts.sweep_size {
        let d = rng.random_range(1..=12);
        let theta = random_theta(&mut rng, d);
        let (lo, mid, hi) = key_inequality_parts(&theta);
        margin = margin.min((mid - lo).min(hi - mid));
        fails += usize::from(!key_inequality_check(&theta));
    }
    verdicts.push(sweep_verdict("key_inequality_sweep", opts.sweep_size, fails, margin));

    let mut fails = 0;
    let mut margin = f64::INFINITY;
    for _ in 0..opts.sweep_size {
        let k = rng.random_range(1..=8);
        let mut support: Vec<f64> = (0..k)
            .map(|_| {
                if rng.random_bool(0.2) {
                    0.0
                } else {
                    rng.random::<f64>() * 10.0
                }
            })
            .collect();
        if support.iter().all(|&v| v == 0.0) {
            support[0] = 1.0;
        }
        let weights: Vec<f64> = (0..k).map(|_| rng.random::<f64>() + 1e-3).collect();
        let total: f64 = weights.iter().sum();
        let mut probs: Vec<f64> = weights.iter().map(|w| w / total).collect();
        let head: f64 = probs[..k - 1].iter().sum();
        probs[k - 1] = (1.0 - head).max(0.0);
        if support.iter().zip(&probs).all(|(v, p)| *v == 0.0 || *p == 0.0) {
            continue;
        }
        let check = vlnv_bound_check(&support, &probs)?;
        margin = margin.min(check.rhs - check.lhs);
        fails += usize::from(!check.holds);
    }
    verdicts.push(sweep_verdict("vlnv_inequality_sweep", opts.sweep_size, fails, margin));

    let mut worst = 0.0f64;
    for _ in 0..opts.shift_sweep_size {
        let n = rng.random_range(1..=10);
        let d = rng.random_range(1..=4);
        let level_lo = rng.random_range(-3.0..3.0);
        let level_hi = level_lo + rng.random_range(0.05..4.0);
        let cfg = SystemConfig::new(n, d, 1.0, rng.random_range(0.0..5.0))?;
        let t_max = rng.random_range(0.0..=d as f64);
        let v = verify_shift_equivalence(
            level_lo,
            level_hi,
            rng.random_range(-0.5..0.5),
            rng.random_range(-1.0..2.0),
            &cfg,
            t_max,
        )?;
        worst = worst.max(v.gap);
    }
    verdicts.push(OracleVerdict::new(
        "shift_equivalence_sweep",
        vec![0.0],
        vec![worst],
        worst,
        1e-10,
    ));

    Ok(verdicts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn cfg(n: usize, d: usize, p: f64, s0: f64) -> SystemConfig {
        SystemConfig::new(n, d, p, s0).unwrap()
    }

    #[test]
    fn grid_spec_validation() {
        assert!(GridSpec::new(1.0, 0.0).validate().is_err());
        let mut g = GridSpec::new(0.0, 1.0);
        g.steps = 2;
        assert!(g.validate().is_err());
    }

    #[test]
    fn grid_recovers_bernoulli_low_noise() {
        let c = cfg(4, 1, 1.0, 1.0);
        let (ag, bg) = default_affine_grids(4, 1.0);
        let found = grid_search_affine(&c, 1.0, 1.0, &ag, &bg).unwrap();
        assert!(rel_gap(found.alpha, 1.0 / 12.0) < 0.01, "{found:?}");
        assert!(rel_gap(found.beta, 0.5) < 0.01);
        assert!(rel_gap(found.sup_risk, 1.25 / 36.0) < 0.005);
    }

    #[test]
    fn grid_recovers_bernoulli_high_noise() {
        let c = cfg(4, 1, 1.0, 100.0);
        let (ag, bg) = default_affine_grids(4, 1.0);
        let found = grid_search_affine(&c, 1.0, 1.0, &ag, &bg).unwrap();
        assert!(rel_gap(found.alpha, 4.0 / 232.0) < 0.01, "{found:?}");
    }

    #[test]
    fn grid_recovers_sparse() {
        let c = cfg(4, 4, 1.0, 1.0);
        let center = 2.0 / 3f64.sqrt();
        let (ag, bg) = default_affine_grids(4, center);
        let found = grid_search_affine(&c, center, 1.0, &ag, &bg).unwrap();
        let alpha = 3f64.sqrt() / 24.0;
        let beta = 0.5 * 4.0 * center * alpha + 0.25;
        assert!(rel_gap(found.alpha, alpha) < 0.01, "{found:?}");
        assert!(rel_gap(found.beta, beta) < 0.01, "{found:?}");
    }

    #[test]
    fn grid_rejects_bad_input() {
        let c = cfg(4, 1, 1.0, 1.0);
        let (ag, bg) = default_affine_grids(4, 1.0);
        assert!(grid_search_affine(&c, 0.0, 1.0, &ag, &bg).is_err());
        assert!(grid_search_affine(&c, 1.0, 2.0, &ag, &bg).is_err());
    }

    #[test]
    fn power_max_levels() {
        let dense = verify_power_max_c(2, 1, 1.0, &GridSpec::new(-1.0, 1.0)).unwrap();
        assert!(dense.pass, "{dense:?}");
        assert_relative_eq!(dense.oracle_value[0], -1.0, epsilon = 1e-4);
        assert_relative_eq!(dense.oracle_value[1], 1.0, epsilon = 1e-4);

        let sparse = verify_power_max_c(4, 1, 1.0, &GridSpec::new(-1.0, 1.0)).unwrap();
        assert!(sparse.pass, "{sparse:?}");
        assert_relative_eq!(sparse.oracle_value[2], 2.0 / 3f64.sqrt(), epsilon = 1e-3);
    }

    #[test]
    fn stated_center_formula_is_not_the_level_gap() {
        // (1/2)·√(((d−m)/m + m/(d−m))·P) understates (B*−A*)/2 for m/d < 1/2.
        let (a, b) = sparse_levels(4, 1, 1.0);
        let stated = 0.5 * ((3.0f64 + 1.0 / 3.0) * 1.0).sqrt();
        assert!((b - a) / 2.0 > stated + 0.1);
    }

    #[test]
    fn key_inequality_cases() {
        assert!(key_inequality_check(&Theta::constant(4, 1.0)));
        let (lo, mid, hi) = key_inequality_parts(&Theta::constant(4, 1.0));
        assert_eq!((lo, mid, hi), (4.0, 4.0, 4.0));
        let (lo, mid, hi) = key_inequality_parts(&Theta::constant(4, 0.3));
        assert_relative_eq!(lo, mid, max_relative = 1e-12);
        assert!(mid < hi);
    }

    #[test]
    fn shift_equivalence_examples() {
        let c = cfg(3, 2, 1.0, 0.7);
        let v = verify_shift_equivalence(-1.0, 1.0, 0.2, 0.4, &c, 2.0).unwrap();
        assert!(v.pass && v.gap < 1e-14, "{v:?}");
        let v = verify_shift_equivalence(0.0, 2.0, 0.13, -0.2, &c, 2.0).unwrap();
        assert!(v.pass, "{v:?}");
        assert!(verify_shift_equivalence(2.0, 1.0, 0.1, 0.0, &c, 2.0).is_err());
    }

    #[test]
    fn sparse_scheme_is_shifted_centered_optimum() {
        let c = cfg(4, 4, 1.0, 1.0);
        let scheme = optimal_scheme(&ModelSpec::SparseBernoulli { m: 1 }, &c).unwrap();
        let (center, est) = scheme.centered().unwrap();
        let (alpha, beta) = centered_optimum(4, center, 1.0, 4, 1);
        assert_relative_eq!(est.alpha, alpha, max_relative = 1e-12);
        assert_relative_eq!(est.beta, beta, max_relative = 1e-12);
    }

    #[test]
    fn branch_consistency_single_config() {
        let v = verify_branch_consistency(&cfg(4, 4, 1.0, 100.0), 1.0, 1).unwrap();
        assert!(v.pass, "{v:?}");
    }

    #[test]
    fn printed_sparse_condition_picks_worse_gain() {
        // σ₀² = 7 lies between (4m(d−m)/d²)·n^{3/2}P = 6 and n^{3/2}P = 8. The
        // d²σ₀²/(4m(d−m)) ≤ n^{3/2}P test would select the high-noise gain.
        let c = cfg(4, 4, 1.0, 7.0);
        let scheme = optimal_scheme(&ModelSpec::SparseBernoulli { m: 1 }, &c).unwrap();
        let (center, est) = scheme.centered().unwrap();
        let high = crate::scheme::sparse_alpha(&c, 1, crate::Branch::HighNoise);
        let high_beta = sparse_centered_beta(4, center, 4, 1, high);
        let sup_low = worst_case_theta(center, est.alpha, est.beta, &c, 1.0).unwrap().1;
        let sup_high = worst_case_theta(center, high, high_beta, &c, 1.0).unwrap().1;
        assert!(sup_high > sup_low * 1.001, "{sup_high} vs {sup_low}");
        let (ag, bg) = default_affine_grids(4, center);
        let found = grid_search_affine(&c, center, 1.0, &ag, &bg).unwrap();
        assert!(rel_gap(found.alpha, est.alpha) < 0.01);
    }

    #[test]
    fn perturbed_alpha_fails() {
        let case = default_affine_cases()[0];
        let good = verify_affine_case(&case, 1.0).unwrap();
        let bad = verify_affine_case(&case, 1.1).unwrap();
        assert!(good.pass, "{good:?}");
        assert!(!bad.pass && bad.gap > 0.05, "{bad:?}");
    }
}
