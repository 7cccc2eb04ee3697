//! Test-function utilities on a 10×10 grid, Bernoulli feedback and regret.

use std::f64::consts::{E, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::sigmoid;

/// Grid points per axis.
pub const MESH: usize = 10;
/// Utilities are rescaled onto `[-SCALE, SCALE]`.
pub const SCALE: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TestFunction {
    Ackley,
    Branin,
    Eggholder,
    Hoelder,
    Matyas,
    Michalewicz,
    Rosenbrock,
}

impl TestFunction {
    pub const ALL: [TestFunction; 7] = [
        TestFunction::Ackley,
        TestFunction::Branin,
        TestFunction::Eggholder,
        TestFunction::Hoelder,
        TestFunction::Matyas,
        TestFunction::Michalewicz,
        TestFunction::Rosenbrock,
    ];

    pub fn parse(name: &str) -> Result<Self> {
        let lower = name.trim().to_ascii_lowercase();
        Self::ALL
            .into_iter()
            .find(|f| f.name() == lower)
            .ok_or(Error::UnknownName {
                kind: "environment",
                name: name.to_string(),
            })
    }

    pub fn name(self) -> &'static str {
        match self {
            TestFunction::Ackley => "ackley",
            TestFunction::Branin => "branin",
            TestFunction::Eggholder => "eggholder",
            TestFunction::Hoelder => "hoelder",
            TestFunction::Matyas => "matyas",
            TestFunction::Michalewicz => "michalewicz",
            TestFunction::Rosenbrock => "rosenbrock",
        }
    }

    /// Display name used in tables.
    pub fn title(self) -> &'static str {
        match self {
            TestFunction::Ackley => "Ackley",
            TestFunction::Branin => "Branin",
            TestFunction::Eggholder => "Eggholder",
            TestFunction::Hoelder => "Hoelder",
            TestFunction::Matyas => "Matyas",
            TestFunction::Michalewicz => "Michalewicz",
            TestFunction::Rosenbrock => "Rosenbrock",
        }
    }

    /// Axis bounds `[(lo₁, hi₁), (lo₂, hi₂)]`.
    pub fn domain(self) -> [(f64, f64); 2] {
        match self {
            TestFunction::Ackley => [(-5.0, 5.0); 2],
            TestFunction::Branin => [(-5.0, 10.0), (0.0, 15.0)],
            TestFunction::Eggholder => [(-512.0, 512.0); 2],
            TestFunction::Hoelder => [(-10.0, 10.0); 2],
            TestFunction::Matyas => [(-10.0, 10.0); 2],
            TestFunction::Michalewicz => [(0.0, PI); 2],
            TestFunction::Rosenbrock => [(-5.0, 10.0); 2],
        }
    }

    /// Raw function value (minimization convention).
    pub fn eval(self, x: [f64; 2]) -> f64 {
        let [x1, x2] = x;
        match self {
            TestFunction::Ackley => {
                let d = 2.0;
                let sq = (x1 * x1 + x2 * x2) / d;
                let cs = ((2.0 * PI * x1).cos() + (2.0 * PI * x2).cos()) / d;
                (20.0 - 20.0 * (-0.2 * sq.sqrt()).exp()) + (E - cs.exp())
            }
            TestFunction::Branin => {
                let b = 5.1 / (4.0 * PI * PI);
                let c = 5.0 / PI;
                let q = x2 - b * x1 * x1 + c * x1 - 6.0;
                q * q + 10.0 * (1.0 - 1.0 / (8.0 * PI)) * x1.cos() + 10.0
            }
            TestFunction::Eggholder => {
                let a = x2 + 47.0;
                -a * (x2 + x1 / 2.0 + 47.0).abs().sqrt().sin()
                    - x1 * (x1 - a).abs().sqrt().sin()
            }
            TestFunction::Hoelder => {
                let r = (x1 * x1 + x2 * x2).sqrt();
                -(x1.sin() * x2.cos() * (1.0 - r / PI).abs().exp()).abs()
            }
            TestFunction::Matyas => 0.26 * (x1 * x1 + x2 * x2) - 0.48 * x1 * x2,
            TestFunction::Michalewicz => {
                let m = 10;
                [x1, x2]
                    .iter()
                    .enumerate()
                    .map(|(k, &xi)| {
                        let i = (k + 1) as f64;
                        -xi.sin() * (i * xi * xi / PI).sin().powi(2 * m)
                    })
                    .sum()
            }
            TestFunction::Rosenbrock => {
                let a = x2 - x1 * x1;
                100.0 * a * a + (x1 - 1.0) * (x1 - 1.0)
            }
        }
    }
}

/// `n` evenly spaced values from `lo` to `hi`, both included.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// Affine map of `values` onto `[-SCALE, SCALE]`; a constant input maps to 0.
pub fn scale_utilities(values: &[f64]) -> Vec<f64> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return vec![0.0; values.len()];
    }
    values
        .iter()
        .map(|&v| {
            if v == hi {
                SCALE
            } else if v == lo {
                -SCALE
            } else {
                -SCALE + 2.0 * SCALE * (v - lo) / (hi - lo)
            }
        })
        .collect()
}

/// A finite arm set with known utilities.
#[derive(Debug, Clone, PartialEq)]
pub struct Environment {
    name: String,
    function: Option<TestFunction>,
    points: Vec<Vec<f64>>,
    raw: Vec<f64>,
    utilities: Vec<f64>,
    optimum: usize,
    minimum: usize,
}

impl Environment {
    /// Negated test function on a 10×10 mesh, rescaled to `[-3, 3]`.
    ///
    /// Point `(a, b)` on the mesh has index `a * 10 + b`.
    pub fn build(function: TestFunction) -> Self {
        let [(l1, h1), (l2, h2)] = function.domain();
        let xs = linspace(l1, h1, MESH);
        let ys = linspace(l2, h2, MESH);
        let mut points = Vec::with_capacity(MESH * MESH);
        let mut raw = Vec::with_capacity(MESH * MESH);
        for &x in &xs {
            for &y in &ys {
                points.push(vec![x, y]);
                raw.push(function.eval([x, y]));
            }
        }
        let negated: Vec<f64> = raw.iter().map(|v| -v).collect();
        let mut env = Self::assemble(function.name().to_string(), points, raw, &negated);
        env.function = Some(function);
        env
    }

    pub fn by_name(name: &str) -> Result<Self> {
        TestFunction::parse(name).map(Self::build)
    }

    /// Environment over arbitrary points whose utilities are used as given.
    pub fn from_utilities(
        name: impl Into<String>,
        points: Vec<Vec<f64>>,
        utilities: Vec<f64>,
    ) -> Result<Self> {
        if points.len() != utilities.len() {
            return Err(Error::Dimension {
                expected: points.len(),
                got: utilities.len(),
            });
        }
        if points.is_empty() {
            return Err(Error::Config("environment needs at least one arm".into()));
        }
        if utilities.iter().any(|u| !u.is_finite()) {
            return Err(Error::Domain("utilities must be finite".into()));
        }
        let mut env = Self::assemble(name.into(), points, utilities.clone(), &utilities);
        env.utilities = utilities;
        Ok(env)
    }

    fn assemble(name: String, points: Vec<Vec<f64>>, raw: Vec<f64>, negated: &[f64]) -> Self {
        let utilities = scale_utilities(negated);
        let optimum = first_extreme(&utilities, |a, b| a > b);
        let minimum = first_extreme(&utilities, |a, b| a < b);
        Environment {
            name,
            function: None,
            points,
            raw,
            utilities,
            optimum,
            minimum,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn function(&self) -> Option<TestFunction> {
        self.function
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    /// Raw function values in the minimization convention.
    pub fn raw(&self) -> &[f64] {
        &self.raw
    }

    pub fn utilities(&self) -> &[f64] {
        &self.utilities
    }

    pub fn utility(&self, i: usize) -> f64 {
        self.utilities[i]
    }

    pub fn optimum_idx(&self) -> usize {
        self.optimum
    }

    pub fn minimum_idx(&self) -> usize {
        self.minimum
    }

    /// `P(x_i ≻ x_j) = s(f_i − f_j)`.
    pub fn preference_prob(&self, i: usize, j: usize) -> f64 {
        sigmoid::value(self.utilities[i] - self.utilities[j])
    }

    /// `P(y = 1 | x_i) = s(f_i)`.
    pub fn logistic_prob(&self, i: usize) -> f64 {
        sigmoid::value(self.utilities[i])
    }

    pub fn dueling_regret(&self, i: usize, j: usize) -> f64 {
        dueling_regret_step(self, i, j)
    }

    pub fn logistic_regret(&self, i: usize) -> f64 {
        logistic_regret_step(self, i)
    }
}

fn first_extreme(values: &[f64], better: impl Fn(f64, f64) -> bool) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if better(v, values[best]) {
            best = i;
        }
    }
    best
}

/// `[s(f* − f_i) + s(f* − f_j) − 1] / 2`.
pub fn dueling_regret_step(env: &Environment, i: usize, j: usize) -> f64 {
    let star = env.utilities[env.optimum];
    let r = sigmoid::value(star - env.utilities[i]) + sigmoid::value(star - env.utilities[j]) - 1.0;
    (0.5 * r).max(0.0)
}

/// `s(f*) − s(f_i)`.
pub fn logistic_regret_step(env: &Environment, i: usize) -> f64 {
    (sigmoid::value(env.utilities[env.optimum]) - sigmoid::value(env.utilities[i])).max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SamplerMode {
    /// `y = 1` with probability `s(f_i)`.
    Logistic,
    /// `y = 1` with probability `s(f_i − f_j)`.
    Preference,
}

/// Seeded Bernoulli feedback.
#[derive(Debug, Clone)]
pub struct FeedbackSampler {
    rng: ChaCha8Rng,
    mode: SamplerMode,
}

impl FeedbackSampler {
    pub fn new(seed: u64, stream: u64, mode: SamplerMode) -> Self {
        FeedbackSampler {
            rng: substream(seed, stream),
            mode,
        }
    }

    pub fn mode(&self) -> SamplerMode {
        self.mode
    }

    pub fn probability(&self, env: &Environment, i: usize, j: usize) -> f64 {
        match self.mode {
            SamplerMode::Logistic => env.logistic_prob(i),
            SamplerMode::Preference => env.preference_prob(i, j),
        }
    }

    /// Draws one outcome; logistic mode ignores `j`.
    pub fn sample(&mut self, env: &Environment, i: usize, j: usize) -> bool {
        let p = self.probability(env, i, j);
        self.rng.random::<f64>() < p
    }
}

/// ChaCha8 generator for `(seed, stream)`.
pub fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn raw_values_at_known_minima() {
        assert_eq!(TestFunction::Ackley.eval([0.0, 0.0]), 0.0);
        assert_eq!(TestFunction::Matyas.eval([0.0, 0.0]), 0.0);
        assert_close!(TestFunction::Branin.eval([PI, 2.275]), 0.3978874, 1e-7);
        assert_eq!(TestFunction::Rosenbrock.eval([1.0, 1.0]), 0.0);
    }

    #[test]
    fn utilities_span_scaled_range() {
        for f in TestFunction::ALL {
            let env = Environment::build(f);
            assert_eq!(env.len(), 100);
            let u = env.utilities();
            let hi = u.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lo = u.iter().copied().fold(f64::INFINITY, f64::min);
            assert_close!(hi, 3.0, 1e-12);
            assert_close!(lo, -3.0, 1e-12);
            assert_eq!(u[env.optimum_idx()], hi);
        }
    }

    #[test]
    fn optimum_is_argmax_of_negated_raw() {
        for f in TestFunction::ALL {
            let env = Environment::build(f);
            let raw = env.raw();
            let best = (0..raw.len())
                .min_by(|&a, &b| raw[a].partial_cmp(&raw[b]).unwrap())
                .unwrap();
            assert_eq!(raw[env.optimum_idx()], raw[best]);
        }
    }

    #[test]
    fn matyas_peaks_next_to_origin() {
        let env = Environment::build(TestFunction::Matyas);
        let opt = &env.points()[env.optimum_idx()];
        assert!(opt.iter().all(|c| c.abs() < 1.2));
        assert_close!(env.utility(env.optimum_idx()), 3.0, 1e-12);
    }

    #[test]
    fn mesh_includes_endpoints() {
        let env = Environment::build(TestFunction::Branin);
        assert_eq!(env.points()[0], vec![-5.0, 0.0]);
        assert_eq!(env.points()[99], vec![10.0, 15.0]);
        assert_eq!(env.points()[12], vec![-5.0 + 15.0 / 9.0, 30.0 / 9.0]);
    }

    #[test]
    fn names_round_trip() {
        for f in TestFunction::ALL {
            assert_eq!(TestFunction::parse(f.name()).unwrap(), f);
        }
        assert!(TestFunction::parse("sphere").is_err());
    }

    #[test]
    fn feedback_probabilities() {
        let env = Environment::build(TestFunction::Ackley);
        assert_eq!(env.preference_prob(7, 7), 0.5);
        let p = env.preference_prob(env.optimum_idx(), env.minimum_idx());
        assert_close!(p, 0.9975274, 1e-7);
    }

    #[test]
    fn regret_examples() {
        let env = Environment::build(TestFunction::Ackley);
        let (opt, min) = (env.optimum_idx(), env.minimum_idx());
        assert_eq!(env.dueling_regret(opt, opt), 0.0);
        assert_close!(env.dueling_regret(min, min), 0.4975274, 1e-7);
        assert_eq!(env.logistic_regret(opt), 0.0);
        assert_close!(env.logistic_regret(min), 0.9051483, 1e-7);
        for i in 0..env.len() {
            for j in 0..env.len() {
                let r = env.dueling_regret(i, j);
                assert!((0.0..=0.5).contains(&r));
                assert_eq!(r, env.dueling_regret(j, i));
            }
        }
    }

    #[test]
    fn fair_coin_concentrates() {
        let env = Environment::build(TestFunction::Ackley);
        let mut s = FeedbackSampler::new(3, 0, SamplerMode::Preference);
        let wins = (0..10_000).filter(|_| s.sample(&env, 5, 5)).count();
        let mean = wins as f64 / 10_000.0;
        assert!((mean - 0.5).abs() < 0.02, "mean {mean}");
    }

    #[test]
    fn sampler_is_reproducible() {
        let env = Environment::build(TestFunction::Hoelder);
        let mut a = FeedbackSampler::new(11, 0, SamplerMode::Preference);
        let mut b = FeedbackSampler::new(11, 0, SamplerMode::Preference);
        for k in 0..1000 {
            let (i, j) = (k % 100, (k * 7) % 100);
            assert_eq!(a.sample(&env, i, j), b.sample(&env, i, j));
        }
    }

    #[test]
    fn constant_utilities_scale_to_zero() {
        let env = Environment::from_utilities("flat", vec![vec![0.0]; 3], vec![1.0; 3]).unwrap();
        assert_eq!(env.utilities(), &[1.0, 1.0, 1.0]);
        assert_eq!(scale_utilities(&[2.0, 2.0]), vec![0.0, 0.0]);
    }
}
