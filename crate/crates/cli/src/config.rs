//! Experiment configuration: JSON ingestion, defaults, flag overrides and
//! validation.

use std::path::{Path, PathBuf};

use ota_core::{ModelSpec, SystemConfig};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::CliError;

pub const DEFAULT_TRIALS: usize = 100_000;
pub const DEFAULT_SEED: u64 = 0;
pub const DEFAULT_EPSILONS: [f64; 5] = [0.01, 0.05, 0.1, 0.5, 1.0];
pub const DEFAULT_SWEEP_N: [usize; 7] = [16, 32, 64, 128, 256, 512, 1024];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemeFamily {
    Optimal,
    Robust,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    family: String,
    sigma_sq: Option<f64>,
    #[serde(rename = "B")]
    bound: Option<f64>,
    m: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSystem {
    n: usize,
    d: usize,
    #[serde(rename = "P")]
    power: f64,
    sigma0_sq: f64,
    s: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScheme {
    family: SchemeFamily,
    epsilon: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRun {
    trials: Option<usize>,
    seed: Option<u64>,
    sweep_n: Option<Vec<usize>>,
    epsilons: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    path: Option<PathBuf>,
    format: Option<Format>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    model: RawModel,
    system: RawSystem,
    scheme: Option<RawScheme>,
    #[serde(default)]
    run: RawRun,
    #[serde(default)]
    output: RawOutput,
}

/// Fully resolved and validated experiment configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub model: ModelSpec,
    pub system: SystemConfig,
    pub scheme: SchemeFamily,
    /// Single ε from `scheme.epsilon`; overrides the ε list when present.
    pub epsilon: Option<f64>,
    pub epsilons: Vec<f64>,
    pub sweep_n: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    pub output_path: Option<PathBuf>,
    pub format: Format,
}

impl ExperimentConfig {
    /// ε values a robust run iterates over.
    pub fn robust_epsilons(&self) -> Vec<f64> {
        match self.epsilon {
            Some(eps) => vec![eps],
            None => self.epsilons.clone(),
        }
    }
}

/// Command-line values that take precedence over the file. Each entry is a
/// dotted config path and the JSON value to place there.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    entries: Vec<(&'static str, Value)>,
}

impl Overrides {
    pub fn set(&mut self, path: &'static str, value: impl Into<Value>) {
        self.entries.push((path, value.into()));
    }

    pub fn set_opt<T: Into<Value>>(&mut self, path: &'static str, value: Option<T>) {
        if let Some(v) = value {
            self.set(path, v);
        }
    }

    fn apply(&self, root: &mut Value) -> Result<(), CliError> {
        for (path, value) in &self.entries {
            let mut node = &mut *root;
            let mut parts = path.split('.').peekable();
            while let Some(key) = parts.next() {
                let Value::Object(map) = node else {
                    return Err(CliError::Config(format!("`{path}`: parent is not an object")));
                };
                if parts.peek().is_none() {
                    map.insert(key.to_string(), value.clone());
                    break;
                }
                node = map.entry(key).or_insert_with(|| Value::Object(Map::new()));
            }
        }
        Ok(())
    }
}

fn parse_error(origin: &str, err: &serde_json::Error) -> CliError {
    CliError::Config(format!("{origin}: line {}, column {}: {err}", err.line(), err.column()))
}

/// Parses config text, applies overrides, fills defaults and validates.
pub fn parse_config(text: &str, origin: &str, overrides: &Overrides) -> Result<ExperimentConfig, CliError> {
    let mut root: Value = if text.trim().is_empty() {
        Value::Object(Map::new())
    } else {
        serde_json::from_str(text).map_err(|e| parse_error(origin, &e))?
    };
    overrides.apply(&mut root)?;
    let raw: RawConfig = serde_json::from_value(root).map_err(|e| CliError::Config(format!("{origin}: {e}")))?;
    resolve(raw)
}

/// Reads and parses a config file. Unreadable files are I/O errors.
pub fn load_config(path: &Path, overrides: &Overrides) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config(&text, &path.display().to_string(), overrides)
}

fn field_error(field: &str, reason: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("invalid `{field}`: {reason}"))
}

fn resolve_model(raw: &RawModel) -> Result<ModelSpec, CliError> {
    let unused = |name: &str, present: bool| {
        if present {
            Err(field_error(name, format!("not used by the {} family", raw.family)))
        } else {
            Ok(())
        }
    };
    match raw.family.as_str() {
        "gaussian" => {
            unused("m", raw.m.is_some())?;
            let sigma_sq = raw
                .sigma_sq
                .ok_or_else(|| field_error("sigma_sq", "required for gaussian"))?;
            let bound = raw.bound.ok_or_else(|| field_error("B", "required for gaussian"))?;
            Ok(ModelSpec::GaussianLocation { sigma_sq, bound })
        }
        "bernoulli" => {
            unused("m", raw.m.is_some())?;
            unused("sigma_sq", raw.sigma_sq.is_some())?;
            unused("B", raw.bound.is_some())?;
            Ok(ModelSpec::ProductBernoulli)
        }
        "sparse" => {
            unused("sigma_sq", raw.sigma_sq.is_some())?;
            unused("B", raw.bound.is_some())?;
            let m = raw.m.ok_or_else(|| field_error("m", "required for sparse"))?;
            Ok(ModelSpec::SparseBernoulli { m })
        }
        other => Err(field_error(
            "family",
            format!("unknown model family `{other}` (expected gaussian, bernoulli or sparse)"),
        )),
    }
}

fn check_epsilon(field: &str, eps: f64) -> Result<(), CliError> {
    if eps.is_finite() && eps > 0.0 {
        Ok(())
    } else {
        Err(field_error(field, format!("must be > 0, got {eps}")))
    }
}

fn resolve(raw: RawConfig) -> Result<ExperimentConfig, CliError> {
    let model = resolve_model(&raw.model)?;
    let mut system = SystemConfig::new(raw.system.n, raw.system.d, raw.system.power, raw.system.sigma0_sq)?;
    if let Some(s) = raw.system.s {
        system.s = s;
        system.validate()?;
    }
    model.validate(system.d)?;

    let (scheme, epsilon) = match raw.scheme {
        Some(s) => (s.family, s.epsilon),
        None => (SchemeFamily::Optimal, None),
    };
    if let Some(eps) = epsilon {
        check_epsilon("epsilon", eps)?;
        if scheme == SchemeFamily::Optimal {
            return Err(field_error("epsilon", "only meaningful for the robust scheme"));
        }
    }

    let epsilons = raw.run.epsilons.unwrap_or_else(|| DEFAULT_EPSILONS.to_vec());
    if epsilons.is_empty() {
        return Err(field_error("epsilons", "must be nonempty"));
    }
    for &eps in &epsilons {
        check_epsilon("epsilons", eps)?;
    }
    let sweep_n = raw.run.sweep_n.unwrap_or_else(|| DEFAULT_SWEEP_N.to_vec());
    if sweep_n.is_empty() {
        return Err(field_error("sweep_n", "must be nonempty"));
    }
    if sweep_n.contains(&0) {
        return Err(field_error("sweep_n", "entries must be >= 1"));
    }
    let trials = raw.run.trials.unwrap_or(DEFAULT_TRIALS);
    if trials < 2 {
        return Err(field_error("trials", format!("must be >= 2, got {trials}")));
    }

    Ok(ExperimentConfig {
        model,
        system: system.with_seed(raw.run.seed.unwrap_or(DEFAULT_SEED)),
        scheme,
        epsilon,
        epsilons,
        sweep_n,
        trials,
        seed: raw.run.seed.unwrap_or(DEFAULT_SEED),
        output_path: raw.output.path,
        format: raw.output.format.unwrap_or(Format::Csv),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "model": {"family": "gaussian", "sigma_sq": 1.0, "B": 1.0},
        "system": {"n": 10, "d": 2, "P": 1.0, "sigma0_sq": 1.0}
    }"#;

    fn parse(text: &str) -> Result<ExperimentConfig, CliError> {
        parse_config(text, "test", &Overrides::default())
    }

    fn config_message(err: CliError) -> String {
        match err {
            CliError::Config(msg) => msg,
            CliError::Model(e) => e.to_string(),
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn minimal_gaussian_fills_defaults() {
        let cfg = parse(MINIMAL).unwrap();
        assert_eq!(cfg.system.s, 2);
        assert_eq!(cfg.trials, DEFAULT_TRIALS);
        assert_eq!(cfg.format, Format::Csv);
        assert_eq!(cfg.scheme, SchemeFamily::Optimal);
        assert_eq!(cfg.epsilons, DEFAULT_EPSILONS.to_vec());
        assert_eq!(cfg.seed, DEFAULT_SEED);
        assert!(cfg.output_path.is_none());
    }

    #[test]
    fn sparse_m_above_d_names_m() {
        let text = r#"{"model": {"family": "sparse", "m": 5},
                       "system": {"n": 4, "d": 4, "P": 1.0, "sigma0_sq": 1.0}}"#;
        let msg = config_message(parse(text).unwrap_err());
        assert!(msg.contains("`m`"), "{msg}");
    }

    #[test]
    fn nonpositive_epsilon_rejected() {
        let text = r#"{"model": {"family": "bernoulli"},
                       "system": {"n": 4, "d": 1, "P": 1.0, "sigma0_sq": 1.0},
                       "run": {"epsilons": [0.1, 0.0]}}"#;
        let msg = config_message(parse(text).unwrap_err());
        assert!(msg.contains("epsilons"), "{msg}");
    }

    #[test]
    fn syntax_error_reports_position() {
        let text = "{\n  \"model\": {\"family\": \"bernoulli\"},\n  \"system\": {\"n\": 4,, }\n}";
        let msg = config_message(parse(text).unwrap_err());
        assert!(msg.contains("line 3"), "{msg}");
    }

    #[test]
    fn unknown_field_rejected() {
        let text = r#"{"model": {"family": "bernoulli", "sigma": 1.0},
                       "system": {"n": 4, "d": 1, "P": 1.0, "sigma0_sq": 1.0}}"#;
        let msg = config_message(parse(text).unwrap_err());
        assert!(msg.contains("sigma"), "{msg}");
    }

    #[test]
    fn overrides_take_precedence() {
        let mut o = Overrides::default();
        o.set("run.seed", 42u64);
        o.set("system.n", 20u64);
        o.set("output.format", "json");
        let cfg = parse_config(MINIMAL, "test", &o).unwrap();
        assert_eq!(cfg.seed, 42);
        assert_eq!(cfg.system.master_seed, 42);
        assert_eq!(cfg.system.n, 20);
        assert_eq!(cfg.format, Format::Json);
    }

    #[test]
    fn overrides_alone_build_a_config() {
        let mut o = Overrides::default();
        o.set("model.family", "bernoulli");
        o.set("system.n", 4u64);
        o.set("system.d", 1u64);
        o.set("system.P", 1.0);
        o.set("system.sigma0_sq", 100.0);
        let cfg = parse_config("", "flags", &o).unwrap();
        assert_eq!(cfg.model, ModelSpec::ProductBernoulli);
    }

    #[test]
    fn gaussian_requires_bound() {
        let text = r#"{"model": {"family": "gaussian", "sigma_sq": 1.0},
                       "system": {"n": 4, "d": 1, "P": 1.0, "sigma0_sq": 1.0}}"#;
        let msg = config_message(parse(text).unwrap_err());
        assert!(msg.contains("`B`"), "{msg}");
    }

    #[test]
    fn optimal_scheme_rejects_epsilon() {
        let text = r#"{"model": {"family": "bernoulli"},
                       "system": {"n": 4, "d": 1, "P": 1.0, "sigma0_sq": 1.0},
                       "scheme": {"family": "optimal", "epsilon": 0.1}}"#;
        assert!(parse(text).is_err());
    }
}
