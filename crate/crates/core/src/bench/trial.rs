use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::RunConfig;
use crate::confidence::{plausible_maximizers, DirectSurface, DuelingSurface};
use crate::environments::{substream, Environment, FeedbackSampler, SamplerMode};
use crate::error::Result;
use crate::estimator::{fit_in_basis, EstimatorFit, FeedbackMode, History};
use crate::kernels::{GridPosterior, KernelGrid, Query};
use crate::policies::{Action, IdsParams, PolicyState, StepContext};

/// Random substream of the feedback sampler.
pub const FEEDBACK_STREAM: u64 = 0;
/// Random substream of the policy.
pub const POLICY_STREAM: u64 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRow {
    pub t: usize,
    pub first: usize,
    pub second: Option<usize>,
    pub outcome: bool,
    pub step_regret: f64,
    pub cum_regret: f64,
    /// Largest confidence width on the grid when the action was chosen.
    pub sigma_max: f64,
    /// `‖f̂‖_k` after the refit.
    pub fitted_norm: f64,
    pub converged: bool,
    /// Size of the plausible-maximizer set (dueling feedback only).
    pub mask_size: usize,
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub seed: u64,
    pub rows: Vec<StepRow>,
    pub cum_regret: f64,
    pub wall_ms: f64,
    pub nonconverged_fits: usize,
    pub mask_fallbacks: usize,
}

impl TrialRecord {
    pub fn horizon(&self) -> usize {
        self.rows.len()
    }
}

/// Runs one seed on the configured test function.
pub fn run_trial(config: &RunConfig, seed: u64) -> Result<TrialRecord> {
    let env = Environment::build(config.env);
    run_trial_in(&env, config, seed)
}

/// Runs one seed on an explicit environment; `config.env` is ignored.
pub fn run_trial_in(env: &Environment, config: &RunConfig, seed: u64) -> Result<TrialRecord> {
    config.validate()?;
    let start = Instant::now();
    let conf = config.confidence()?;
    let grid = KernelGrid::new(config.kernel, env.points().to_vec())?;
    let mut posterior = GridPosterior::new(&grid, conf.rho())?;
    let mode = config.policy.feedback_mode();
    let mut history = History::new(mode);
    let mut fit = EstimatorFit::empty(&grid, conf.lambda);
    let mut policy = PolicyState::new(config.policy, env.len(), config.restrict_to_maximizers);
    let sampler_mode = match mode {
        FeedbackMode::Direct => SamplerMode::Logistic,
        FeedbackMode::Dueling => SamplerMode::Preference,
    };
    let mut sampler = FeedbackSampler::new(seed, FEEDBACK_STREAM, sampler_mode);
    let mut rng = substream(seed, POLICY_STREAM);
    let ids = |beta: f64| IdsParams {
        beta_tilde: beta / conf.lipschitz(),
        rho: conf.rho(),
    };

    let mut rows = Vec::with_capacity(config.horizon);
    let mut cum = 0.0;
    let mut nonconverged = 0;
    let mut fallbacks = 0;
    for t in 1..=config.horizon {
        let beta = conf.beta(posterior.info_gain());
        let (action, sigma_max, mask_size) = match mode {
            FeedbackMode::Direct => {
                let surface = DirectSurface::from_fit(&fit, &posterior, beta);
                let sigma_max = surface.sigma.iter().copied().fold(0.0, f64::max);
                let a = policy.select(StepContext::Direct { surface: &surface }, &mut rng)?;
                (a, sigma_max, 0)
            }
            FeedbackMode::Dueling => {
                let surface = DuelingSurface::from_fit(&fit, &posterior, beta);
                let (mask, fell_back) = plausible_maximizers(&surface);
                fallbacks += usize::from(fell_back);
                let ctx = StepContext::Dueling {
                    surface: &surface,
                    mask: &mask,
                    ids: ids(beta),
                };
                let a = policy.select(ctx, &mut rng)?;
                let size = mask.iter().filter(|&&m| m).count();
                (a, surface.max_sigma(), size)
            }
        };

        let (i, j, query, regret) = match action {
            Action::Single(i) => (i, i, Query::Point(i), env.logistic_regret(i)),
            Action::Pair(i, j) => (i, j, Query::Pair(i, j), env.dueling_regret(i, j)),
        };
        let outcome = sampler.sample(env, i, j);
        policy.observe(action, outcome);
        history.push(i, j, outcome);
        posterior.append(query);
        if config.policy.uses_estimator() {
            fit = fit_in_basis(&history, &grid, conf.lambda, Some(&fit.weights))?;
            nonconverged += usize::from(!fit.converged);
        }

        cum += regret;
        rows.push(StepRow {
            t,
            first: i,
            second: action.second(),
            outcome,
            step_regret: regret,
            cum_regret: cum,
            sigma_max,
            fitted_norm: fit.norm,
            converged: fit.converged,
            mask_size,
            beta,
        });
    }

    Ok(TrialRecord {
        seed,
        rows,
        cum_regret: cum,
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
        nonconverged_fits: nonconverged,
        mask_fallbacks: fallbacks,
    })
}

/// Runs every configured seed in parallel; records come back sorted by seed.
pub fn run_seeds(config: &RunConfig) -> Result<Vec<TrialRecord>> {
    let env = Environment::build(config.env);
    run_seeds_in(&env, config)
}

pub fn run_seeds_in(env: &Environment, config: &RunConfig) -> Result<Vec<TrialRecord>> {
    config.validate()?;
    let mut records = config
        .seeds
        .par_iter()
        .map(|&seed| run_trial_in(env, config, seed))
        .collect::<Result<Vec<_>>>()?;
    records.sort_by_key(|r| r.seed);
    Ok(records)
}
