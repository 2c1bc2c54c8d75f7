//! Parameter spaces, θ validation and i.i.d. sampling for the three
//! distribution families: Gaussian location, product Bernoulli and
//! m-sparse product Bernoulli.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Constraint, Error, Result};

/// Relative slack applied to the norm-ball and sparsity-sum constraints so
/// that boundary points (the worst cases) survive rounding.
pub const CONSTRAINT_SLACK: f64 = 1e-9;

/// Channel and population parameters shared by every scheme.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    /// Number of users.
    pub n: usize,
    /// Parameter dimension.
    pub d: usize,
    /// Channel uses per estimation round. Always equal to `d`.
    pub s: usize,
    /// Per-user average power budget.
    pub power: f64,
    /// Channel noise variance σ₀².
    pub sigma0_sq: f64,
    pub master_seed: u64,
}

impl SystemConfig {
    /// Builds a validated config with `s = d`.
    pub fn new(n: usize, d: usize, power: f64, sigma0_sq: f64) -> Result<Self> {
        let cfg = Self {
            n,
            d,
            s: d,
            power,
            sigma0_sq,
            master_seed: 0,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.master_seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 1 {
            return Err(invalid("n", "must be at least 1"));
        }
        if self.d < 1 {
            return Err(invalid("d", "must be at least 1"));
        }
        if self.s != self.d {
            return Err(invalid(
                "s",
                format!("channel uses must equal d = {}, got {}", self.d, self.s),
            ));
        }
        if !(self.power.is_finite() && self.power > 0.0) {
            return Err(invalid("P", format!("must be finite and > 0, got {}", self.power)));
        }
        if !(self.sigma0_sq.is_finite() && self.sigma0_sq >= 0.0) {
            return Err(invalid(
                "sigma0_sq",
                format!("must be finite and >= 0, got {}", self.sigma0_sq),
            ));
        }
        Ok(())
    }

    /// The config seen by the base scheme once `sigma_pri_sq` of the power
    /// budget is spent on local noise: power `P − σ_pri²` and channel noise
    /// `σ₀² + n·σ_pri²`.
    pub fn with_local_noise(&self, sigma_pri_sq: f64) -> Result<Self> {
        if !(sigma_pri_sq >= 0.0 && sigma_pri_sq < self.power) {
            return Err(invalid(
                "sigma_pri_sq",
                format!("must lie in [0, P = {}), got {sigma_pri_sq}", self.power),
            ));
        }
        let cfg = Self {
            power: self.power - sigma_pri_sq,
            sigma0_sq: self.sigma0_sq + self.n as f64 * sigma_pri_sq,
            ..*self
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub(crate) fn n_f64(&self) -> f64 {
        self.n as f64
    }

    pub(crate) fn d_f64(&self) -> f64 {
        self.d as f64
    }
}

/// Distribution family together with its known hyper-parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ModelSpec {
    /// `N(θ, σ²·I_d)` with `‖θ‖₂ ≤ B·√d`.
    GaussianLocation { sigma_sq: f64, bound: f64 },
    /// `∏ Bernoulli(θₖ)` with `θ ∈ [0,1]^d`.
    ProductBernoulli,
    /// Product Bernoulli restricted to `Σθₖ ≤ m`.
    SparseBernoulli { m: usize },
}

impl ModelSpec {
    pub fn gaussian(sigma_sq: f64, bound: f64) -> Result<Self> {
        let model = ModelSpec::GaussianLocation { sigma_sq, bound };
        model.validate(usize::MAX)?;
        Ok(model)
    }

    /// Checks the hyper-parameters against dimension `d`.
    pub fn validate(&self, d: usize) -> Result<()> {
        match *self {
            ModelSpec::GaussianLocation { sigma_sq, bound } => {
                if !(sigma_sq.is_finite() && sigma_sq > 0.0) {
                    return Err(invalid("sigma_sq", format!("must be > 0, got {sigma_sq}")));
                }
                if !(bound.is_finite() && bound > 0.0) {
                    return Err(invalid("B", format!("must be > 0, got {bound}")));
                }
            }
            ModelSpec::ProductBernoulli => {}
            ModelSpec::SparseBernoulli { m } => {
                if m < 1 || m > d {
                    return Err(invalid("m", format!("must satisfy 1 <= m <= d = {d}, got {m}")));
                }
            }
        }
        Ok(())
    }

    pub fn is_binary(&self) -> bool {
        !matches!(self, ModelSpec::GaussianLocation { .. })
    }

    /// Largest admissible Σθⱼ for the Bernoulli families (`d` or `m`).
    pub fn sum_cap(&self, d: usize) -> Option<f64> {
        match *self {
            ModelSpec::GaussianLocation { .. } => None,
            ModelSpec::ProductBernoulli => Some(d as f64),
            ModelSpec::SparseBernoulli { m } => Some(m as f64),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ModelSpec::GaussianLocation { .. } => "gaussian",
            ModelSpec::ProductBernoulli => "bernoulli",
            ModelSpec::SparseBernoulli { .. } => "sparse",
        }
    }
}

/// The unknown parameter vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Theta(pub Vec<f64>);

impl Theta {
    pub fn new(values: Vec<f64>) -> Self {
        Theta(values)
    }

    pub fn constant(d: usize, value: f64) -> Self {
        Theta(vec![value; d])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum()
    }
}

/// Accepts θ iff it lies in the parameter space of `model` with dimension `d`.
pub fn validate_theta(model: &ModelSpec, d: usize, theta: &Theta) -> Result<()> {
    if theta.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            actual: theta.len(),
        });
    }
    if let Some(index) = theta.values().iter().position(|v| !v.is_finite()) {
        return Err(Error::ConstraintViolation(Constraint::NonFinite { index }));
    }
    match *model {
        ModelSpec::GaussianLocation { bound, .. } => {
            let norm = theta.norm_sq().sqrt();
            let radius = bound * (d as f64).sqrt();
            if norm > radius * (1.0 + CONSTRAINT_SLACK) {
                return Err(Error::ConstraintViolation(Constraint::NormBall { norm, radius }));
            }
        }
        ModelSpec::ProductBernoulli | ModelSpec::SparseBernoulli { .. } => {
            if let Some((index, &value)) = theta
                .values()
                .iter()
                .enumerate()
                .find(|(_, v)| !(0.0..=1.0).contains(*v))
            {
                return Err(Error::ConstraintViolation(Constraint::UnitInterval { index, value }));
            }
            if let ModelSpec::SparseBernoulli { m } = *model {
                let sum = theta.sum();
                if sum > m as f64 * (1.0 + CONSTRAINT_SLACK) {
                    return Err(Error::ConstraintViolation(Constraint::SparsitySum { sum, m }));
                }
            }
        }
    }
    Ok(())
}

/// `n × d` matrix of per-user samples, row `i` being user `i`'s `Uᵢ`.
#[derive(Debug, Clone, PartialEq)]
pub struct UserSamples {
    n: usize,
    d: usize,
    data: Vec<f64>,
}

impl UserSamples {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: bad.len(),
            });
        }
        Ok(Self {
            n: rows.len(),
            d,
            data: rows.concat(),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.d.max(1)).take(self.n)
    }

    /// Per-coordinate sample mean.
    pub fn column_means(&self) -> Vec<f64> {
        let mut means = vec![0.0; self.d];
        for row in self.rows() {
            for (m, v) in means.iter_mut().zip(row) {
                *m += v;
            }
        }
        let n = self.n as f64;
        means.iter_mut().for_each(|m| *m /= n);
        means
    }
}

/// Draws `n` i.i.d. samples from `p_θ`.
pub fn sample_users<R: Rng + ?Sized>(model: &ModelSpec, theta: &Theta, n: usize, rng: &mut R) -> Result<UserSamples> {
    let d = theta.len();
    model.validate(d)?;
    validate_theta(model, d, theta)?;
    let mut data = Vec::with_capacity(n * d);
    match *model {
        ModelSpec::GaussianLocation { sigma_sq, .. } => {
            let sigma = sigma_sq.sqrt();
            for _ in 0..n {
                for &mean in theta.values() {
                    let z: f64 = rng.sample(StandardNormal);
                    data.push(mean + sigma * z);
                }
            }
        }
        ModelSpec::ProductBernoulli | ModelSpec::SparseBernoulli { .. } => {
            for _ in 0..n {
                for &p in theta.values() {
                    let u: f64 = rng.random();
                    data.push(if u < p { 1.0 } else { 0.0 });
                }
            }
        }
    }
    Ok(UserSamples { n, d, data })
}
