//! Experiment orchestration for each subcommand.

use ota_core::channel::mc_risk;
use ota_core::oracle::{run_suite, OracleVerdict, SuiteOptions};
use ota_core::privacy::{
    bernoulli_mi_bound, bernoulli_mi_exact, calibrate_sigma_pri, gaussian_mi_bound, gaussian_mi_exact,
    robust_cmi_bound, InfoValue,
};
use ota_core::risk::{minimax_risk, robust_risk, scheme_worst_case, ClosedForm};
use ota_core::scheme::{optimal_scheme, robustify};
use ota_core::{ModelSpec, Scheme, SystemConfig};
use serde::Serialize;
use serde_json::Value;

use crate::config::{ExperimentConfig, SchemeFamily};
use crate::error::CliError;
use crate::report::{model_label, parse_model_label, reference_notes, InfoCell, Row, VerdictRow};

/// MC agreement band, in standard errors.
pub const MC_SIGMA_BAND: f64 = 3.0;
/// Relative slack on `cmi_bound <= ε`.
const CMI_SLACK: f64 = 1e-12;
/// Relative tolerance on the calibrated inner SNR `2ε/s`.
const INNER_RATIO_TOL: f64 = 1e-12;
/// Step of the θ grid used for the Bernoulli exact-MI maximum.
const MI_THETA_STEP: f64 = 0.01;
/// Minimum number of points for a scaling fit.
pub const MIN_FIT_POINTS: usize = 4;

/// Rows and bookkeeping produced by one subcommand.
#[derive(Debug, Clone, Default)]
pub struct RunOutcome {
    pub rows: Vec<Row>,
    pub notes: Vec<String>,
    /// Failed assertions; a nonempty list maps to exit status 2.
    pub failures: Vec<String>,
    /// Extra top-level JSON fields.
    pub extras: Option<Value>,
}

fn system_at(cfg: &ExperimentConfig, n: usize) -> Result<SystemConfig, CliError> {
    let system = SystemConfig { n, ..cfg.system };
    system.validate()?;
    Ok(system)
}

/// `d · max_θ I(Ỹⱼ; X_ij)` over equal per-coordinate θ on a 0.01 grid,
/// capped at `m/d` for the sparse family.
pub fn bernoulli_mi_grid_max(n: usize, d: usize, cap: f64) -> Result<f64, CliError> {
    let steps = (cap / MI_THETA_STEP).floor() as usize;
    let mut best = bernoulli_mi_exact(n, cap)?;
    for k in 0..=steps {
        best = best.max(bernoulli_mi_exact(n, k as f64 * MI_THETA_STEP)?);
    }
    Ok(d as f64 * best)
}

fn mi_values(model: &ModelSpec, system: &SystemConfig, sigma_pri_sq: f64) -> Result<(InfoValue, InfoValue), CliError> {
    // Local noise of the user under scrutiny is independent of its data, so
    // the leakage is that of the base scheme on the effective channel.
    let effective = system.with_local_noise(sigma_pri_sq)?;
    Ok(match *model {
        ModelSpec::GaussianLocation { .. } => (
            gaussian_mi_bound(&effective, model)?,
            gaussian_mi_exact(&effective, model)?,
        ),
        ModelSpec::ProductBernoulli => (
            InfoValue::Finite(bernoulli_mi_bound(system)),
            InfoValue::Finite(bernoulli_mi_grid_max(system.n, system.d, 1.0)?),
        ),
        ModelSpec::SparseBernoulli { m } => (
            InfoValue::Finite(bernoulli_mi_bound(system)),
            InfoValue::Finite(bernoulli_mi_grid_max(
                system.n,
                system.d,
                (m as f64 / system.d as f64).min(1.0),
            )?),
        ),
    })
}

struct Evaluated {
    row: Row,
    scheme: Scheme,
}

/// Closed-form and information columns of one row; MC columns are empty.
fn evaluate(cfg: &ExperimentConfig, n: usize, epsilon: Option<f64>) -> Result<Evaluated, CliError> {
    let system = system_at(cfg, n)?;
    let model = &cfg.model;
    let (closed, sigma_pri_sq, scheme): (ClosedForm, f64, Scheme) = match epsilon {
        None => (minimax_risk(model, &system)?, 0.0, optimal_scheme(model, &system)?),
        Some(eps) => (
            robust_risk(model, &system, eps)?,
            calibrate_sigma_pri(&system, eps)?,
            robustify(model, &system, eps)?,
        ),
    };
    let (mi_bound, mi_exact) = mi_values(model, &system, sigma_pri_sq)?;
    let cmi = robust_cmi_bound(&system, sigma_pri_sq)?;
    let row = Row {
        model: model_label(model),
        n,
        d: system.d,
        m: match *model {
            ModelSpec::SparseBernoulli { m } => Some(m),
            _ => None,
        },
        power: system.power,
        sigma0_sq: system.sigma0_sq,
        epsilon,
        sigma_pri_sq,
        branch: closed.branch.as_str().to_string(),
        risk_closed: closed.risk,
        risk_mc: None,
        risk_mc_stderr: None,
        mi_bound: InfoCell(mi_bound),
        mi_exact: Some(InfoCell(mi_exact)),
        cmi_bound: Some(InfoCell(cmi)),
        trials: None,
        seed: cfg.seed,
    };
    Ok(Evaluated { row, scheme })
}

/// Fills the MC columns at the scheme's worst-case θ and checks agreement.
fn attach_mc(cfg: &ExperimentConfig, eval: &mut Evaluated, outcome: &mut RunOutcome) -> Result<(), CliError> {
    let (theta, _) = scheme_worst_case(&eval.scheme)?;
    let est = mc_risk(&cfg.model, &theta, &eval.scheme, cfg.trials, cfg.seed)?;
    let row = &mut eval.row;
    row.risk_mc = Some(est.mean);
    row.risk_mc_stderr = Some(est.stderr);
    row.trials = Some(cfg.trials);
    let band = (MC_SIGMA_BAND * est.stderr).max(1e-12 * row.risk_closed.abs());
    let diff = (est.mean - row.risk_closed).abs();
    if diff > band {
        outcome.failures.push(format!(
            "n={} epsilon={:?}: |mc - closed| = {diff:.3e} exceeds {MC_SIGMA_BAND}*stderr = {band:.3e}",
            row.n, row.epsilon
        ));
    }
    outcome.notes.push(format!(
        "row {}: worst-case theta {}",
        outcome.rows.len() + 1,
        summarize_theta(theta.values())
    ));
    Ok(())
}

fn summarize_theta(values: &[f64]) -> String {
    if values.iter().all(|&v| v == values[0]) {
        format!("all {} coordinates = {}", values.len(), values[0])
    } else {
        let listed: Vec<String> = values.iter().map(|v| format!("{v}")).collect();
        format!("[{}]", listed.join(", "))
    }
}

fn epsilon_list(cfg: &ExperimentConfig) -> Vec<Option<f64>> {
    match cfg.scheme {
        SchemeFamily::Optimal => vec![None],
        SchemeFamily::Robust => cfg.robust_epsilons().into_iter().map(Some).collect(),
    }
}

fn check_privacy_row(row: &Row, outcome: &mut RunOutcome) {
    if let Some(InfoCell(exact)) = row.mi_exact {
        if !exact.le(row.mi_bound.0) {
            outcome.failures.push(format!(
                "n={}: mi_exact {exact:?} exceeds mi_bound {:?}",
                row.n, row.mi_bound.0
            ));
        }
    }
    if let (Some(eps), Some(InfoCell(cmi))) = (row.epsilon, row.cmi_bound) {
        let within = matches!(cmi, InfoValue::Finite(v) if v <= eps * (1.0 + CMI_SLACK));
        if !within {
            outcome
                .failures
                .push(format!("n={} epsilon={eps}: cmi_bound {cmi:?} exceeds epsilon", row.n));
        }
    }
}

/// Closed-form risk against Monte Carlo at the worst-case θ.
pub fn run_risk(cfg: &ExperimentConfig) -> Result<RunOutcome, CliError> {
    let mut outcome = RunOutcome::default();
    for eps in epsilon_list(cfg) {
        let mut eval = evaluate(cfg, cfg.system.n, eps)?;
        attach_mc(cfg, &mut eval, &mut outcome)?;
        outcome.rows.push(eval.row);
    }
    outcome.notes.extend(reference_notes());
    Ok(outcome)
}

/// MI bounds, exact MI and CMI bounds, with their orderings asserted.
pub fn run_privacy(cfg: &ExperimentConfig) -> Result<RunOutcome, CliError> {
    let mut outcome = RunOutcome::default();
    for eps in epsilon_list(cfg) {
        let eval = evaluate(cfg, cfg.system.n, eps)?;
        check_privacy_row(&eval.row, &mut outcome);
        outcome.rows.push(eval.row);
    }
    outcome.notes.push(match cfg.model {
        ModelSpec::GaussianLocation { .. } => "mi_exact: exact leakage of the linear scheme".into(),
        _ => "mi_exact: d times the largest per-coordinate leakage to the noiseless sum over a 0.01 theta grid".into(),
    });
    outcome.notes.extend(reference_notes());
    Ok(outcome)
}

/// Local-noise calibration over the ε list, with the calibration identity
/// `(P − σ_pri²)/(nσ_pri² + σ₀²) = 2ε/s` checked whenever σ_pri² > 0.
pub fn run_calibrate(cfg: &ExperimentConfig) -> Result<RunOutcome, CliError> {
    let mut outcome = RunOutcome::default();
    let system = system_at(cfg, cfg.system.n)?;
    for eps in cfg.robust_epsilons() {
        let eval = evaluate(cfg, system.n, Some(eps))?;
        let sigma = eval.row.sigma_pri_sq;
        if sigma > 0.0 {
            let inner = (system.power - sigma) / (system.n as f64 * sigma + system.sigma0_sq);
            let target = 2.0 * eps / system.s as f64;
            if ((inner - target) / target).abs() > INNER_RATIO_TOL {
                outcome.failures.push(format!(
                    "epsilon={eps}: inner ratio {inner} differs from 2*eps/s = {target}"
                ));
            }
        }
        check_privacy_row(&eval.row, &mut outcome);
        outcome.rows.push(eval.row);
    }
    outcome.notes.extend(reference_notes());
    Ok(outcome)
}

/// Least-squares slope and intercept of `y` on `x`.
pub fn least_squares(x: &[f64], y: &[f64]) -> (f64, f64) {
    let k = x.len() as f64;
    let mx = x.iter().sum::<f64>() / k;
    let my = y.iter().sum::<f64>() / k;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Fitted ln-ln slope of one ε series.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingFit {
    pub epsilon: Option<f64>,
    pub points: usize,
    /// Slope of ln(risk_closed) against ln(n).
    pub slope: f64,
    /// Slope of ln(robust risk − base risk): the privacy cost alone.
    pub excess_slope: Option<f64>,
    /// Exponent of n in the reference over-the-air scaling.
    pub reference_exponent: f64,
}

/// Fits `ln(risk)` against `ln(n)` from `rows`, which must share one ε.
pub fn fit_scaling(rows: &[Row], base: &[f64]) -> Result<ScalingFit, CliError> {
    if rows.len() < MIN_FIT_POINTS {
        return Err(CliError::Config(format!(
            "invalid `sweep_n`: scaling needs at least {MIN_FIT_POINTS} values, got {}",
            rows.len()
        )));
    }
    let ln_n: Vec<f64> = rows.iter().map(|r| (r.n as f64).ln()).collect();
    let ln_r: Vec<f64> = rows.iter().map(|r| r.risk_closed.ln()).collect();
    let (slope, _) = least_squares(&ln_n, &ln_r);
    let epsilon = rows[0].epsilon;
    let excess: Vec<f64> = rows.iter().zip(base).map(|(r, b)| r.risk_closed - b).collect();
    let excess_slope = if epsilon.is_some() && excess.iter().all(|&e| e > 0.0) {
        let ln_e: Vec<f64> = excess.iter().map(|e| e.ln()).collect();
        Some(least_squares(&ln_n, &ln_e).0)
    } else {
        None
    };
    Ok(ScalingFit {
        epsilon,
        points: rows.len(),
        slope,
        excess_slope,
        reference_exponent: if epsilon.is_some() { -2.0 } else { -1.0 },
    })
}

/// Closed-form risk over the n sweep for each ε, with ln-ln slope fits.
/// Monte Carlo columns are filled unless `with_mc` is false.
pub fn run_scaling(cfg: &ExperimentConfig, with_mc: bool) -> Result<RunOutcome, CliError> {
    let mut outcome = RunOutcome::default();
    let mut fits = Vec::new();
    if cfg.sweep_n.len() < MIN_FIT_POINTS {
        return Err(CliError::Config(format!(
            "invalid `sweep_n`: scaling needs at least {MIN_FIT_POINTS} values, got {}",
            cfg.sweep_n.len()
        )));
    }
    for eps in epsilon_list(cfg) {
        let mut series = Vec::with_capacity(cfg.sweep_n.len());
        let mut base = Vec::with_capacity(cfg.sweep_n.len());
        for &n in &cfg.sweep_n {
            let mut eval = evaluate(cfg, n, eps)?;
            if with_mc {
                attach_mc(cfg, &mut eval, &mut outcome)?;
            }
            base.push(minimax_risk(&cfg.model, &system_at(cfg, n)?)?.risk);
            outcome.rows.push(eval.row.clone());
            series.push(eval.row);
        }
        fits.push(fit_scaling(&series, &base)?);
    }
    for fit in &fits {
        let excess = fit
            .excess_slope
            .map(|s| format!(", privacy-cost slope {s:.4}"))
            .unwrap_or_default();
        outcome.notes.push(format!(
            "fit epsilon={}: slope {:.4} over {} points (reference exponent {}){excess}",
            fit.epsilon.map(|e| e.to_string()).unwrap_or_else(|| "none".into()),
            fit.slope,
            fit.points,
            fit.reference_exponent
        ));
    }
    outcome.notes.extend(reference_notes());
    outcome.extras = Some(serde_json::json!({ "fits": fits }));
    Ok(outcome)
}

/// Runs the oracle suite. `alpha_scale` perturbs every analytic α.
pub fn run_verify(alpha_scale: f64) -> Result<(Vec<VerdictRow>, Vec<String>), CliError> {
    let opts = SuiteOptions {
        alpha_scale,
        ..SuiteOptions::default()
    };
    let verdicts: Vec<OracleVerdict> = run_suite(&opts)?;
    let rows: Vec<VerdictRow> = verdicts.iter().map(VerdictRow::from).collect();
    let failures = rows
        .iter()
        .filter(|r| !r.pass)
        .map(|r| format!("{}: gap {:.3e} > tolerance {:.3e}", r.name, r.gap, r.tolerance))
        .collect();
    Ok((rows, failures))
}

/// Re-derives a row's closed-form risk from its own columns.
pub fn recompute_closed_form(row: &Row) -> Result<f64, CliError> {
    let model = parse_model_label(&row.model, row.m)?;
    let system = SystemConfig::new(row.n, row.d, row.power, row.sigma0_sq)?;
    Ok(match row.epsilon {
        None => minimax_risk(&model, &system)?.risk,
        Some(eps) => robust_risk(&model, &system, eps)?.risk,
    })
}
