//! Exploration coefficients and confidence bands over the grid.
//!
//! Bands have the form `s(ĥ) ± β_t σ_t`. They are compared raw and never
//! clamped to `[0, 1]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{sigmoid, EstimatorFit};
use crate::kernels::{GridPosterior, Query};

/// Smallest admissible regularization; `λ = 0` leaves `2κ/λ` undefined.
pub const MIN_LAMBDA: f64 = 1e-6;

/// `κ = sup_{|a| ≤ B} 1/ṡ(a) = 1 / (s(B)(1 − s(B)))`.
pub fn kappa(bound: f64) -> f64 {
    1.0 / sigmoid::derivative(bound.abs())
}

/// `L = sup_{|a| ≤ B} ṡ(a)`, attained at `a = 0`.
pub fn lipschitz_l(_bound: f64) -> f64 {
    0.25
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum BetaMode {
    /// `β_t = 4LB + 2L √(2κ/λ · (γ_t + log 1/δ))`.
    Theoretical,
    Fixed(f64),
}

impl BetaMode {
    /// Parses `theory` / `theoretical` or `fixed:<value>`.
    pub fn parse(text: &str) -> Result<Self> {
        let t = text.trim();
        if t.eq_ignore_ascii_case("theory") || t.eq_ignore_ascii_case("theoretical") {
            return Ok(BetaMode::Theoretical);
        }
        if let Some(v) = t.strip_prefix("fixed:") {
            let value: f64 = v
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("bad fixed β `{v}`")))?;
            if !(value.is_finite() && value >= 0.0) {
                return Err(Error::Config(format!("fixed β must be ≥ 0, got {value}")));
            }
            return Ok(BetaMode::Fixed(value));
        }
        Err(Error::Config(format!(
            "β mode must be `theoretical` or `fixed:<value>`, got `{t}`"
        )))
    }
}

impl std::fmt::Display for BetaMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BetaMode::Theoretical => write!(f, "theoretical"),
            BetaMode::Fixed(v) => write!(f, "fixed:{v}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceConfig {
    /// RKHS-norm bound `B`.
    pub bound: f64,
    pub lambda: f64,
    pub delta: f64,
    pub beta_mode: BetaMode,
}

impl ConfidenceConfig {
    /// Validates the inputs and clamps `λ` to at least [`MIN_LAMBDA`].
    pub fn new(bound: f64, lambda: f64, delta: f64, beta_mode: BetaMode) -> Result<Self> {
        if !(bound.is_finite() && bound > 0.0) {
            return Err(Error::Config(format!("B must be positive, got {bound}")));
        }
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::Config(format!("λ must be ≥ 0, got {lambda}")));
        }
        if !(delta > 0.0 && delta < 1.0) && !(delta == 1.0) {
            return Err(Error::Config(format!("δ must lie in (0, 1], got {delta}")));
        }
        Ok(ConfidenceConfig {
            bound,
            lambda: lambda.max(MIN_LAMBDA),
            delta,
            beta_mode,
        })
    }

    pub fn kappa(&self) -> f64 {
        kappa(self.bound)
    }

    pub fn lipschitz(&self) -> f64 {
        lipschitz_l(self.bound)
    }

    /// Ridge `ρ = λκ` used by the posterior widths.
    pub fn rho(&self) -> f64 {
        self.lambda * self.kappa()
    }

    pub fn beta(&self, gamma: f64) -> f64 {
        beta(self, gamma)
    }
}

pub fn beta(config: &ConfidenceConfig, gamma: f64) -> f64 {
    match config.beta_mode {
        BetaMode::Fixed(v) => v,
        BetaMode::Theoretical => {
            let l = config.lipschitz();
            let b = config.bound;
            let inner = 2.0 * config.kappa() / config.lambda
                * (gamma.max(0.0) + (1.0 / config.delta).ln());
            4.0 * l * b + 2.0 * l * inner.sqrt()
        }
    }
}

pub fn lcb(prob: f64, beta: f64, sigma: f64) -> f64 {
    prob - beta * sigma
}

pub fn ucb(prob: f64, beta: f64, sigma: f64) -> f64 {
    prob + beta * sigma
}

/// Bands for direct (logistic) feedback at every grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectSurface {
    pub utility: Vec<f64>,
    pub sigma: Vec<f64>,
    pub beta: f64,
}

impl DirectSurface {
    pub fn from_fit(fit: &EstimatorFit, posterior: &GridPosterior, beta: f64) -> Self {
        let n = fit.utility.len();
        DirectSurface {
            utility: fit.utility.clone(),
            sigma: (0..n).map(|i| posterior.sigma(Query::Point(i))).collect(),
            beta,
        }
    }

    pub fn len(&self) -> usize {
        self.utility.len()
    }

    pub fn is_empty(&self) -> bool {
        self.utility.is_empty()
    }

    pub fn prob(&self, i: usize) -> f64 {
        sigmoid::value(self.utility[i])
    }

    pub fn ucb(&self, i: usize) -> f64 {
        ucb(self.prob(i), self.beta, self.sigma[i])
    }

    pub fn lcb(&self, i: usize) -> f64 {
        lcb(self.prob(i), self.beta, self.sigma[i])
    }
}

/// Bands for preference feedback over all ordered grid pairs.
///
/// Tables are row-major `n × n`: entry `(i, j)` is the pair `(x_i, x_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DuelingSurface {
    n: usize,
    h: Vec<f64>,
    prob: Vec<f64>,
    sigma: Vec<f64>,
    beta: f64,
}

impl DuelingSurface {
    pub fn from_fit(fit: &EstimatorFit, posterior: &GridPosterior, beta: f64) -> Self {
        let n = fit.utility.len();
        let u = &fit.utility;
        let mut h = Vec::with_capacity(n * n);
        let mut sigma = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                h.push(u[i] - u[j]);
                sigma.push(posterior.sigma(Query::Pair(i, j)));
            }
        }
        Self::from_tables(n, h, sigma, beta)
    }

    /// Builds a surface from explicit `ĥ` and `σ` tables.
    pub fn from_tables(n: usize, h: Vec<f64>, sigma: Vec<f64>, beta: f64) -> Self {
        assert_eq!(h.len(), n * n, "ĥ table must be n × n");
        assert_eq!(sigma.len(), n * n, "σ table must be n × n");
        let prob = h.iter().map(|&v| sigmoid::value(v)).collect();
        DuelingSurface {
            n,
            h,
            prob,
            sigma,
            beta,
        }
    }

    /// Builds a surface from explicit `s(ĥ)` and `σ` tables; `ĥ` is the logit.
    pub fn from_prob_tables(n: usize, prob: Vec<f64>, sigma: Vec<f64>, beta: f64) -> Self {
        assert_eq!(prob.len(), n * n, "probability table must be n × n");
        assert_eq!(sigma.len(), n * n, "σ table must be n × n");
        let h = prob.iter().map(|&p| (p / (1.0 - p)).ln()).collect();
        DuelingSurface {
            n,
            h,
            prob,
            sigma,
            beta,
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn h(&self, i: usize, j: usize) -> f64 {
        self.h[i * self.n + j]
    }

    pub fn prob(&self, i: usize, j: usize) -> f64 {
        self.prob[i * self.n + j]
    }

    pub fn sigma(&self, i: usize, j: usize) -> f64 {
        self.sigma[i * self.n + j]
    }

    pub fn lcb(&self, i: usize, j: usize) -> f64 {
        lcb(self.prob(i, j), self.beta, self.sigma(i, j))
    }

    pub fn ucb(&self, i: usize, j: usize) -> f64 {
        ucb(self.prob(i, j), self.beta, self.sigma(i, j))
    }

    pub fn max_sigma(&self) -> f64 {
        self.sigma.iter().copied().fold(0.0, f64::max)
    }

    /// Same tables with a different exploration coefficient.
    pub fn with_beta(&self, beta: f64) -> Self {
        DuelingSurface {
            beta,
            ..self.clone()
        }
    }
}

/// Per-step confidence bookkeeping of a trial.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceState {
    pub beta: f64,
    pub gamma: f64,
    pub mask: Vec<bool>,
    /// The mask came out empty and was reset to all-true.
    pub mask_fallback: bool,
}

/// Plausible maximizers: `i` is kept iff `ucb(i, j) ≥ 0.5` for every `j`.
///
/// Returns the mask and whether the all-true fallback was used.
pub fn plausible_maximizers(surface: &DuelingSurface) -> (Vec<bool>, bool) {
    let n = surface.len();
    let mask: Vec<bool> = (0..n)
        .map(|i| (0..n).all(|j| surface.ucb(i, j) >= 0.5))
        .collect();
    if n > 0 && !mask.iter().any(|&m| m) {
        return (vec![true; n], true);
    }
    (mask, false)
}
