//! Argument parsing and subcommand dispatch.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::{load_config, parse_config, ExperimentConfig, Format, Overrides};
use crate::error::{CliError, EXIT_CHECK, EXIT_CONFIG, EXIT_OK};
use crate::report::{emit, render, SCHEMA_V1, VERIFY_SCHEMA_V1};
use crate::run::{run_calibrate, run_privacy, run_risk, run_scaling, run_verify, RunOutcome};

#[derive(Debug, Parser)]
#[command(
    name = "ota",
    version,
    about = "Over-the-air estimation experiments over a Gaussian MAC"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Closed-form minimax risk checked against Monte Carlo.
    Risk,
    /// Mutual-information leakage and CMI bounds.
    Privacy,
    /// Brute-force oracle suite for the scheme optimality results.
    Verify {
        /// Multiply every analytic α by this factor before comparison.
        #[arg(long, default_value_t = 1.0)]
        perturb_alpha: f64,
    },
    /// Risk against n with ln-ln slope fits.
    Scaling {
        /// Closed forms only; leave the Monte Carlo columns empty.
        #[arg(long)]
        skip_mc: bool,
    },
    /// Local-noise calibration over the ε list.
    Calibrate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    Gaussian,
    Bernoulli,
    Sparse,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SchemeArg {
    Optimal,
    Robust,
}

/// Flags mirroring the config file; any flag given wins over the file.
#[derive(Debug, Default, Args)]
pub struct CommonArgs {
    /// JSON experiment config.
    #[arg(long, short = 'c', global = true)]
    pub config: Option<PathBuf>,
    /// Master seed; falls back to OTA_SEED, then the file.
    #[arg(long, env = "OTA_SEED", global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub trials: Option<u64>,
    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, global = true)]
    pub format: Option<FormatArg>,
    #[arg(long, value_enum, global = true)]
    pub model: Option<ModelArg>,
    #[arg(long, global = true)]
    pub sigma_sq: Option<f64>,
    /// Gaussian norm bound B.
    #[arg(long = "bound", global = true)]
    pub bound: Option<f64>,
    #[arg(long, global = true)]
    pub m: Option<u64>,
    #[arg(long, global = true)]
    pub n: Option<u64>,
    #[arg(long, global = true)]
    pub d: Option<u64>,
    /// Power budget P.
    #[arg(long = "power", global = true)]
    pub power: Option<f64>,
    #[arg(long, global = true)]
    pub sigma0_sq: Option<f64>,
    #[arg(long, value_enum, global = true)]
    pub scheme: Option<SchemeArg>,
    /// Single ε; implies the robust scheme unless --scheme is given.
    #[arg(long, global = true)]
    pub epsilon: Option<f64>,
    #[arg(long, value_delimiter = ',', global = true)]
    pub epsilons: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', global = true)]
    pub sweep_n: Option<Vec<u64>>,
}

impl CommonArgs {
    pub fn overrides(&self) -> Overrides {
        let mut o = Overrides::default();
        o.set_opt("run.seed", self.seed);
        o.set_opt("run.trials", self.trials);
        o.set_opt("run.epsilons", self.epsilons.clone());
        o.set_opt("run.sweep_n", self.sweep_n.clone());
        o.set_opt(
            "output.path",
            self.out.as_ref().map(|p| p.to_string_lossy().into_owned()),
        );
        o.set_opt(
            "output.format",
            self.format.map(|f| match f {
                FormatArg::Csv => "csv",
                FormatArg::Json => "json",
            }),
        );
        o.set_opt(
            "model.family",
            self.model.map(|m| match m {
                ModelArg::Gaussian => "gaussian",
                ModelArg::Bernoulli => "bernoulli",
                ModelArg::Sparse => "sparse",
            }),
        );
        o.set_opt("model.sigma_sq", self.sigma_sq);
        o.set_opt("model.B", self.bound);
        o.set_opt("model.m", self.m);
        o.set_opt("system.n", self.n);
        o.set_opt("system.d", self.d);
        o.set_opt("system.P", self.power);
        o.set_opt("system.sigma0_sq", self.sigma0_sq);
        let scheme = match (self.scheme, self.epsilon) {
            (Some(SchemeArg::Optimal), _) => Some("optimal"),
            (Some(SchemeArg::Robust), _) | (None, Some(_)) => Some("robust"),
            (None, None) => None,
        };
        o.set_opt("scheme.family", scheme);
        o.set_opt("scheme.epsilon", self.epsilon);
        o
    }

    pub fn resolve(&self) -> Result<ExperimentConfig, CliError> {
        let overrides = self.overrides();
        match &self.config {
            Some(path) => load_config(path, &overrides),
            None => parse_config("", "command line", &overrides),
        }
    }

    fn format(&self) -> Format {
        match self.format {
            Some(FormatArg::Json) => Format::Json,
            _ => Format::Csv,
        }
    }
}

fn finish(cfg: &ExperimentConfig, outcome: RunOutcome, label: &str) -> Result<i32, CliError> {
    let bytes = render(SCHEMA_V1, &outcome.rows, &outcome.notes, outcome.extras, cfg.format)?;
    emit(&bytes, cfg.output_path.as_deref())?;
    report_failures(label, outcome.rows.len(), &outcome.failures)
}

fn report_failures(label: &str, rows: usize, failures: &[String]) -> Result<i32, CliError> {
    for f in failures {
        eprintln!("ota {label}: FAIL {f}");
    }
    eprintln!("ota {label}: {rows} rows, {} failures", failures.len());
    Ok(if failures.is_empty() { EXIT_OK } else { EXIT_CHECK })
}

fn dispatch(cli: &Cli) -> Result<i32, CliError> {
    match cli.command {
        Command::Verify { perturb_alpha } => {
            let (format, path) = match &cli.common.config {
                Some(_) => {
                    let cfg = cli.common.resolve()?;
                    (cfg.format, cfg.output_path)
                }
                None => (cli.common.format(), cli.common.out.clone()),
            };
            let (rows, failures) = run_verify(perturb_alpha)?;
            let bytes = render(VERIFY_SCHEMA_V1, &rows, &[], None, format)?;
            emit(&bytes, path.as_deref())?;
            report_failures("verify", rows.len(), &failures)
        }
        Command::Risk => {
            let cfg = cli.common.resolve()?;
            finish(&cfg, run_risk(&cfg)?, "risk")
        }
        Command::Privacy => {
            let cfg = cli.common.resolve()?;
            finish(&cfg, run_privacy(&cfg)?, "privacy")
        }
        Command::Scaling { skip_mc } => {
            let cfg = cli.common.resolve()?;
            finish(&cfg, run_scaling(&cfg, !skip_mc)?, "scaling")
        }
        Command::Calibrate => {
            let cfg = cli.common.resolve()?;
            finish(&cfg, run_calibrate(&cfg)?, "calibrate")
        }
    }
}

/// Runs the CLI on the given argument list and returns the exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("ota: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_parse_after_subcommand() {
        let cli = Cli::try_parse_from([
            "ota",
            "risk",
            "--model",
            "bernoulli",
            "--n",
            "4",
            "--d",
            "1",
            "--power",
            "1",
            "--sigma0-sq",
            "100",
            "--trials",
            "1000",
        ])
        .unwrap();
        let cfg = cli.common.resolve().unwrap();
        assert_eq!(cfg.system.n, 4);
        assert_eq!(cfg.trials, 1000);
    }

    #[test]
    fn epsilon_flag_implies_robust() {
        let cli = Cli::try_parse_from([
            "ota",
            "privacy",
            "--model",
            "bernoulli",
            "--n",
            "4",
            "--d",
            "1",
            "--power",
            "1",
            "--sigma0-sq",
            "1",
            "--epsilon",
            "0.1",
        ])
        .unwrap();
        let cfg = cli.common.resolve().unwrap();
        assert_eq!(cfg.scheme, crate::config::SchemeFamily::Robust);
        assert_eq!(cfg.robust_epsilons(), vec![0.1]);
    }

    #[test]
    fn list_flags_split_on_commas() {
        let cli = Cli::try_parse_from(["ota", "scaling", "--sweep-n", "8,16,32,64", "--epsilons", "0.1,1"]).unwrap();
        assert_eq!(cli.common.sweep_n, Some(vec![8, 16, 32, 64]));
        assert_eq!(cli.common.epsilons, Some(vec![0.1, 1.0]));
    }

    #[test]
    fn unknown_flag_is_a_config_error() {
        assert_eq!(main_with_args(["ota", "risk", "--bogus"]), EXIT_CONFIG);
    }
}
