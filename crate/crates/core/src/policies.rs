//! Action selection for logistic and preference feedback.
//!
//! Every argmax/argmin breaks ties toward the smallest index. For pairs the
//! follower tie is resolved first, then the leader tie.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::confidence::{DirectSurface, DuelingSurface};
use crate::error::{Error, Result};
use crate::estimator::FeedbackMode;

/// Points on the IDS selection-probability grid.
pub const IDS_P_GRID: usize = 101;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PolicyKind {
    #[serde(rename = "maxminlcb")]
    MaxMinLcb,
    #[serde(rename = "maxinp")]
    MaxInP,
    #[serde(rename = "rucb")]
    Rucb,
    #[serde(rename = "multisbm")]
    MultiSbm,
    #[serde(rename = "doubler")]
    Doubler,
    #[serde(rename = "ids")]
    Ids,
    #[serde(rename = "lgp-ucb")]
    LgpUcb,
    #[serde(rename = "ind-ucb")]
    IndUcb,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 8] = [
        PolicyKind::MaxMinLcb,
        PolicyKind::MaxInP,
        PolicyKind::Rucb,
        PolicyKind::MultiSbm,
        PolicyKind::Doubler,
        PolicyKind::Ids,
        PolicyKind::LgpUcb,
        PolicyKind::IndUcb,
    ];

    pub fn parse(name: &str) -> Result<Self> {
        let lower = name.trim().to_ascii_lowercase().replace('_', "-");
        Self::ALL
            .into_iter()
            .find(|p| p.name() == lower)
            .ok_or(Error::UnknownName {
                kind: "policy",
                name: name.to_string(),
            })
    }

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::MaxMinLcb => "maxminlcb",
            PolicyKind::MaxInP => "maxinp",
            PolicyKind::Rucb => "rucb",
            PolicyKind::MultiSbm => "multisbm",
            PolicyKind::Doubler => "doubler",
            PolicyKind::Ids => "ids",
            PolicyKind::LgpUcb => "lgp-ucb",
            PolicyKind::IndUcb => "ind-ucb",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            PolicyKind::MaxMinLcb => "MaxMinLCB",
            PolicyKind::MaxInP => "MaxInP",
            PolicyKind::Rucb => "RUCB",
            PolicyKind::MultiSbm => "MultiSBM",
            PolicyKind::Doubler => "Doubler",
            PolicyKind::Ids => "IDS",
            PolicyKind::LgpUcb => "LGP-UCB",
            PolicyKind::IndUcb => "Ind-UCB",
        }
    }

    pub fn feedback_mode(self) -> FeedbackMode {
        match self {
            PolicyKind::LgpUcb | PolicyKind::IndUcb => FeedbackMode::Direct,
            _ => FeedbackMode::Dueling,
        }
    }

    /// Whether the policy reads the kernel estimator at all.
    pub fn uses_estimator(self) -> bool {
        !matches!(self, PolicyKind::IndUcb)
    }
}

impl std::fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Action {
    Single(usize),
    Pair(usize, usize),
}

impl Action {
    pub fn first(self) -> usize {
        match self {
            Action::Single(i) | Action::Pair(i, _) => i,
        }
    }

    pub fn second(self) -> Option<usize> {
        match self {
            Action::Single(_) => None,
            Action::Pair(_, j) => Some(j),
        }
    }
}

fn mask_indices(mask: &[bool]) -> Vec<usize> {
    mask.iter()
        .enumerate()
        .filter_map(|(i, &m)| m.then_some(i))
        .collect()
}

/// First index attaining the maximum of `score` over `candidates`.
fn argmax_by(candidates: impl IntoIterator<Item = usize>, score: impl Fn(usize) -> f64) -> usize {
    let mut best: Option<(usize, f64)> = None;
    for i in candidates {
        let v = score(i);
        match best {
            Some((_, b)) if !(v > b) => {}
            _ => best = Some((i, v)),
        }
    }
    best.expect("candidate set is nonempty").0
}

/// `argmax_x s(f̂(x)) + β σ(x)`.
pub fn lgp_ucb_select(surface: &DirectSurface) -> usize {
    argmax_by(0..surface.len(), |i| surface.ucb(i))
}

/// Untried arms first, then `argmax mean_i + √(2 ln t / n_i)`.
pub fn ind_ucb_select(counts: &[u64], means: &[f64], t: u64) -> usize {
    if let Some(i) = counts.iter().position(|&c| c == 0) {
        return i;
    }
    let log_t = (t.max(1) as f64).ln();
    argmax_by(0..counts.len(), |i| {
        means[i] + (2.0 * log_t / counts[i] as f64).sqrt()
    })
}

/// Leader maximizes the worst-case LCB its follower can force.
///
/// Returns the pair and the achieved max-min value.
pub fn maxminlcb_select(surface: &DuelingSurface, mask: &[bool]) -> ((usize, usize), f64) {
    let m = mask_indices(mask);
    let mut best: Option<((usize, usize), f64)> = None;
    for &i in &m {
        let j = argmax_by(m.iter().copied(), |j| -surface.lcb(i, j));
        let v = surface.lcb(i, j);
        match best {
            Some((_, b)) if !(v > b) => {}
            _ => best = Some(((i, j), v)),
        }
    }
    best.expect("mask is nonempty")
}

/// Most uncertain pair within the mask.
pub fn maxinp_select(surface: &DuelingSurface, mask: &[bool]) -> (usize, usize) {
    let m = mask_indices(mask);
    let mut best: Option<((usize, usize), f64)> = None;
    for &i in &m {
        for &j in &m {
            let v = surface.sigma(i, j);
            match best {
                Some((_, b)) if !(v > b) => {}
                _ => best = Some(((i, j), v)),
            }
        }
    }
    best.expect("mask is nonempty").0
}

/// `argmax_{x ∈ M} ucb(x, reference)`.
pub fn ucb_response(surface: &DuelingSurface, mask: &[bool], reference: usize) -> usize {
    argmax_by(mask_indices(mask), |x| surface.ucb(x, reference))
}

/// Reference drawn uniformly from the mask; returns `(response, reference)`.
pub fn rucb_select<R: Rng + ?Sized>(
    surface: &DuelingSurface,
    mask: &[bool],
    rng: &mut R,
) -> (usize, usize) {
    let m = mask_indices(mask);
    let reference = m[rng.random_range(0..m.len())];
    (ucb_response(surface, mask, reference), reference)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MultiSbmState {
    pub previous: usize,
}

impl Default for MultiSbmState {
    fn default() -> Self {
        MultiSbmState { previous: 0 }
    }
}

/// Carries the last second arm over as the next first arm.
pub fn multisbm_select(
    surface: &DuelingSurface,
    mask: &[bool],
    state: &mut MultiSbmState,
) -> (usize, usize) {
    let first = state.previous;
    let second = ucb_response(surface, mask, first);
    state.previous = second;
    (first, second)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DoublerState {
    /// Current epoch `e`; the epoch lasts `2^e` steps.
    pub epoch: u32,
    pub step_in_epoch: u64,
    /// Reference multiset.
    pub pool: Vec<usize>,
    /// Maximizer arms played so far in the current epoch.
    pub played: Vec<usize>,
}

impl Default for DoublerState {
    fn default() -> Self {
        DoublerState {
            epoch: 1,
            step_in_epoch: 0,
            pool: vec![0],
            played: Vec::new(),
        }
    }
}

impl DoublerState {
    pub fn epoch_len(&self) -> u64 {
        1u64 << self.epoch.min(62)
    }
}

/// Reference drawn from the pool; returns `(response, reference)`.
pub fn doubler_select<R: Rng + ?Sized>(
    surface: &DuelingSurface,
    mask: &[bool],
    state: &mut DoublerState,
    rng: &mut R,
) -> (usize, usize) {
    if state.step_in_epoch == state.epoch_len() {
        state.pool = std::mem::take(&mut state.played);
        state.epoch += 1;
        state.step_in_epoch = 0;
    }
    let reference = state.pool[rng.random_range(0..state.pool.len())];
    let first = ucb_response(surface, mask, reference);
    state.played.push(first);
    state.step_in_epoch += 1;
    (first, reference)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdsParams {
    /// `β̃ = β / L`.
    pub beta_tilde: f64,
    /// `ρ = λκ`.
    pub rho: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdsChoice {
    pub incumbent: usize,
    /// Minimizing `(x, p)`, absent when every width against the incumbent is 0.
    pub candidate: Option<(usize, f64)>,
    pub ratio: f64,
    pub u: f64,
}

/// Selection probabilities `k / 101`, `k = 1..=101`.
pub fn ids_p_grid() -> impl Iterator<Item = f64> {
    (1..=IDS_P_GRID).map(|k| k as f64 / IDS_P_GRID as f64)
}

/// Information ratio `((1 − p)u + pΔ)² / (p ln(1 + σ²/ρ))`.
pub fn ids_ratio(u: f64, gap: f64, sigma: f64, rho: f64, p: f64) -> f64 {
    let num = (1.0 - p) * u + p * gap;
    num * num / (p * (sigma * sigma / rho).ln_1p())
}

/// Minimizes the information ratio over arms and the probability grid.
pub fn ids_plan(surface: &DuelingSurface, params: IdsParams) -> IdsChoice {
    let n = surface.len();
    let null = 0;
    let incumbent = argmax_by(0..n, |x| surface.h(x, null));
    let u = (0..n)
        .map(|x| surface.h(x, incumbent) + params.beta_tilde * surface.sigma(x, incumbent))
        .fold(f64::NEG_INFINITY, f64::max);
    let mut best: Option<((usize, f64), f64)> = None;
    for x in (0..n).filter(|&x| x != incumbent) {
        let sigma = surface.sigma(incumbent, x);
        if !(sigma > 0.0) {
            continue;
        }
        let gap = u + surface.h(incumbent, x);
        for p in ids_p_grid() {
            let r = ids_ratio(u, gap, sigma, params.rho, p);
            match best {
                Some((_, b)) if !(r < b) => {}
                _ => best = Some(((x, p), r)),
            }
        }
    }
    IdsChoice {
        incumbent,
        candidate: best.map(|(c, _)| c),
        ratio: best.map_or(f64::INFINITY, |(_, r)| r),
        u,
    }
}

/// Plays `(x̂*, x)` with probability `p`, else `(x̂*, x̂*)`.
pub fn ids_select<R: Rng + ?Sized>(
    surface: &DuelingSurface,
    params: IdsParams,
    rng: &mut R,
) -> ((usize, usize), IdsChoice) {
    let plan = ids_plan(surface, params);
    let pair = match plan.candidate {
        Some((x, p)) if rng.random::<f64>() < p => (plan.incumbent, x),
        _ => (plan.incumbent, plan.incumbent),
    };
    (pair, plan)
}

/// Per-policy persistent data.
#[derive(Debug, Clone, PartialEq)]
pub enum Scratch {
    None,
    IndUcb { counts: Vec<u64>, sums: Vec<f64> },
    MultiSbm(MultiSbmState),
    Doubler(DoublerState),
    Ids { incumbent: Option<usize> },
}

/// Inputs available to a policy at one step.
#[derive(Debug, Clone, Copy)]
pub enum StepContext<'a> {
    Direct {
        surface: &'a DirectSurface,
    },
    Dueling {
        surface: &'a DuelingSurface,
        /// Plausible maximizers `M_t`.
        mask: &'a [bool],
        ids: IdsParams,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyState {
    kind: PolicyKind,
    restrict_to_maximizers: bool,
    scratch: Scratch,
    steps: u64,
}

impl PolicyState {
    pub fn new(kind: PolicyKind, n_arms: usize, restrict_to_maximizers: bool) -> Self {
        let scratch = match kind {
            PolicyKind::IndUcb => Scratch::IndUcb {
                counts: vec![0; n_arms],
                sums: vec![0.0; n_arms],
            },
            PolicyKind::MultiSbm => Scratch::MultiSbm(MultiSbmState::default()),
            PolicyKind::Doubler => Scratch::Doubler(DoublerState::default()),
            PolicyKind::Ids => Scratch::Ids { incumbent: None },
            _ => Scratch::None,
        };
        PolicyState {
            kind,
            restrict_to_maximizers,
            scratch,
            steps: 0,
        }
    }

    pub fn kind(&self) -> PolicyKind {
        self.kind
    }

    pub fn scratch(&self) -> &Scratch {
        &self.scratch
    }

    /// Chooses the next query.
    pub fn select<R: Rng + ?Sized>(&mut self, ctx: StepContext<'_>, rng: &mut R) -> Result<Action> {
        let mode = self.kind.feedback_mode();
        let action = match (ctx, mode) {
            (StepContext::Direct { surface }, FeedbackMode::Direct) => match &self.scratch {
                Scratch::IndUcb { counts, sums } => {
                    let means: Vec<f64> = counts
                        .iter()
                        .zip(sums)
                        .map(|(&c, &s)| if c == 0 { 0.0 } else { s / c as f64 })
                        .collect();
                    Action::Single(ind_ucb_select(counts, &means, self.steps))
                }
                _ => Action::Single(lgp_ucb_select(surface)),
            },
            (StepContext::Dueling { surface, mask, ids }, FeedbackMode::Dueling) => {
                let (i, j) = match (&mut self.scratch, self.kind) {
                    (_, PolicyKind::MaxMinLcb) => {
                        if self.restrict_to_maximizers {
                            maxminlcb_select(surface, mask).0
                        } else {
                            maxminlcb_select(surface, &vec![true; surface.len()]).0
                        }
                    }
                    (_, PolicyKind::MaxInP) => maxinp_select(surface, mask),
                    (_, PolicyKind::Rucb) => rucb_select(surface, mask, rng),
                    (Scratch::MultiSbm(state), _) => multisbm_select(surface, mask, state),
                    (Scratch::Doubler(state), _) => doubler_select(surface, mask, state, rng),
                    (Scratch::Ids { incumbent }, _) => {
                        let (pair, plan) = ids_select(surface, ids, rng);
                        *incumbent = Some(plan.incumbent);
                        pair
                    }
                    _ => unreachable!("scratch matches kind"),
                };
                Action::Pair(i, j)
            }
            _ => {
                return Err(Error::Config(format!(
                    "policy `{}` cannot act on this feedback model",
                    self.kind
                )))
            }
        };
        self.steps += 1;
        Ok(action)
    }

    /// Records the outcome of the last action.
    pub fn observe(&mut self, action: Action, outcome: bool) {
        if let Scratch::IndUcb { counts, sums } = &mut self.scratch {
            let i = action.first();
            counts[i] += 1;
            sums[i] += f64::from(u8::from(outcome));
        }
    }
}
