//! Regularized kernel logistic estimation from direct or preference feedback.
//!
//! For a history of functionals `q_τ` (points or pairs) with binary outcomes
//! `y_τ`, the estimator minimizes
//!
//! ```text
//! L(α) = Σ_τ −y_τ log s(z_τ) − (1 − y_τ) log(1 − s(z_τ)) + λ/2 · αᵀGα,   z = Gα
//! ```
//!
//! where `G` is the Gram matrix of the history under the base kernel (direct
//! mode) or the dueling kernel (preference mode). The penalty `αᵀGα` is the
//! squared RKHS norm of `f̂ = Σ α_τ k(·, q_τ)`. Among the minimizers the
//! canonical one satisfies `α = (y − s(Gα)) / λ`, which is unique.
//!
//! Two solvers reach it:
//!
//! - [`fit`] runs damped Newton directly on the `t` coefficients using explicit
//!   kernel rows. Cost grows as `O(t³)` per iteration.
//! - [`fit_in_basis`] parametrizes the utility on the grid as `f = U w` with
//!   `K = U Uᵀ`, so the problem has at most `n` unknowns however long the
//!   history grows. It reports the same canonical `α`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{KernelGrid, Query};

pub const GRAD_TOL: f64 = 1e-8;
pub const MAX_ITERS: usize = 100;
const PROB_CLAMP: f64 = 1e-12;
const ARMIJO: f64 = 1e-4;
const MAX_HALVINGS: usize = 60;

pub mod sigmoid {
    /// `s(a) = 1 / (1 + e^{−a})`.
    pub fn value(a: f64) -> f64 {
        if a >= 0.0 {
            1.0 / (1.0 + (-a).exp())
        } else {
            let e = a.exp();
            e / (1.0 + e)
        }
    }

    /// `ṡ(a) = s(a)(1 − s(a))`.
    pub fn derivative(a: f64) -> f64 {
        let s = value(a);
        s * (1.0 - s)
    }
}

use sigmoid::value as s;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FeedbackMode {
    /// Binary feedback on a single action against the null action.
    Direct,
    /// Binary preference between two actions.
    Dueling,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Observation {
    pub first: usize,
    /// Ignored in direct mode.
    pub second: usize,
    pub outcome: bool,
}

/// Ordered record of queried actions and their binary outcomes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct History {
    mode: FeedbackMode,
    records: Vec<Observation>,
}

impl History {
    pub fn new(mode: FeedbackMode) -> Self {
        History {
            mode,
            records: Vec::new(),
        }
    }

    pub fn mode(&self) -> FeedbackMode {
        self.mode
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[Observation] {
        &self.records
    }

    pub fn push(&mut self, first: usize, second: usize, outcome: bool) {
        self.records.push(Observation {
            first,
            second,
            outcome,
        });
    }

    pub fn query(&self, k: usize) -> Query {
        let r = self.records[k];
        match self.mode {
            FeedbackMode::Direct => Query::Point(r.first),
            FeedbackMode::Dueling => Query::Pair(r.first, r.second),
        }
    }

    pub fn queries(&self) -> Vec<Query> {
        (0..self.len()).map(|k| self.query(k)).collect()
    }

    pub fn outcomes(&self) -> Vec<f64> {
        self.records
            .iter()
            .map(|r| if r.outcome { 1.0 } else { 0.0 })
            .collect()
    }

    fn check(&self, grid: &KernelGrid) -> Result<()> {
        for k in 0..self.len() {
            grid.check(self.query(k))?;
        }
        Ok(())
    }
}

/// Result of a fit: representer coefficients plus the fitted utility on the
/// grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorFit {
    pub alpha: Vec<f64>,
    /// `‖∇L(α)‖₂` at the returned iterate.
    pub grad_norm: f64,
    pub lambda: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Set when a Newton system could not be solved and gradient steps were
    /// used instead.
    pub used_fallback: bool,
    /// `f̂` at every grid point. Pair predictions are differences of these.
    pub utility: Vec<f64>,
    /// `‖f̂‖_k = √(αᵀGα)`.
    pub norm: f64,
    /// Coordinates `w` with `f̂ = U w`; used to warm-start [`fit_in_basis`].
    pub weights: Vec<f64>,
}

impl EstimatorFit {
    /// The zero estimator for an empty history.
    pub fn empty(grid: &KernelGrid, lambda: f64) -> Self {
        EstimatorFit {
            alpha: Vec::new(),
            grad_norm: 0.0,
            lambda,
            converged: true,
            iterations: 0,
            used_fallback: false,
            utility: vec![0.0; grid.len()],
            norm: 0.0,
            weights: vec![0.0; grid.basis().ncols()],
        }
    }

    /// `f̂(q)` (point) or `ĥ(x, x')` (pair) from the cached grid utility.
    pub fn value(&self, q: Query) -> f64 {
        q.apply(&self.utility)
    }

    pub fn prob(&self, q: Query) -> f64 {
        s(self.value(q))
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::Config(format!("λ must be positive, got {lambda}")));
    }
    Ok(())
}

fn nll_term(y: f64, z: f64) -> f64 {
    let p = s(z).clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
    -y * p.ln() - (1.0 - y) * (1.0 - p).ln()
}

fn data_loss(y: &[f64], z: &[f64]) -> f64 {
    y.iter().zip(z).map(|(&y, &z)| nll_term(y, z)).sum()
}

fn mat_vec(g: &DMatrix<f64>, v: &[f64]) -> Vec<f64> {
    (g * DVector::from_column_slice(v)).as_slice().to_vec()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn history_gram(hist: &History, grid: &KernelGrid) -> Result<DMatrix<f64>> {
    hist.check(grid)?;
    Ok(grid.row_gram(&hist.queries()))
}

fn check_alpha(alpha: &[f64], hist: &History) -> Result<()> {
    if alpha.len() != hist.len() {
        return Err(Error::Dimension {
            expected: hist.len(),
            got: alpha.len(),
        });
    }
    Ok(())
}

/// Regularized negative log-likelihood at representer coefficients `alpha`.
pub fn loss(alpha: &[f64], hist: &History, grid: &KernelGrid, lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    check_alpha(alpha, hist)?;
    let g = history_gram(hist, grid)?;
    let z = mat_vec(&g, alpha);
    let penalty: f64 = alpha.iter().zip(&z).map(|(a, z)| a * z).sum();
    Ok(data_loss(&hist.outcomes(), &z) + 0.5 * lambda * penalty)
}

/// `∇L(α) = G (s(Gα) − y + λα)`.
pub fn loss_gradient(
    alpha: &[f64],
    hist: &History,
    grid: &KernelGrid,
    lambda: f64,
) -> Result<Vec<f64>> {
    check_lambda(lambda)?;
    check_alpha(alpha, hist)?;
    let g = history_gram(hist, grid)?;
    let y = hist.outcomes();
    let (_, grad) = residual_and_gradient(&g, &y, alpha, lambda);
    Ok(grad)
}

/// Returns `(F, G F)` with `F = s(Gα) − y + λα`.
fn residual_and_gradient(
    g: &DMatrix<f64>,
    y: &[f64],
    alpha: &[f64],
    lambda: f64,
) -> (Vec<f64>, Vec<f64>) {
    let z = mat_vec(g, alpha);
    let f: Vec<f64> = z
        .iter()
        .zip(y)
        .zip(alpha)
        .map(|((&z, &y), &a)| s(z) - y + lambda * a)
        .collect();
    let grad = mat_vec(g, &f);
    (f, grad)
}

fn objective(g: &DMatrix<f64>, y: &[f64], alpha: &[f64], lambda: f64) -> f64 {
    let z = mat_vec(g, alpha);
    let penalty: f64 = alpha.iter().zip(&z).map(|(a, z)| a * z).sum();
    data_loss(y, &z) + 0.5 * lambda * penalty
}

/// Damped Newton on the representer coefficients.
///
/// `warm_start` may be shorter than the history (e.g. the previous step's
/// coefficients); missing entries start at zero.
pub fn fit(
    hist: &History,
    grid: &KernelGrid,
    lambda: f64,
    warm_start: Option<&[f64]>,
) -> Result<EstimatorFit> {
    check_lambda(lambda)?;
    if hist.is_empty() {
        return Ok(EstimatorFit::empty(grid, lambda));
    }
    let g = history_gram(hist, grid)?;
    let y = hist.outcomes();
    let t = hist.len();

    let mut alpha = vec![0.0; t];
    if let Some(w) = warm_start {
        for (a, &v) in alpha.iter_mut().zip(w) {
            *a = v;
        }
    }

    let mut used_fallback = false;
    let mut converged = false;
    let mut iterations = 0;
    let mut current = objective(&g, &y, &alpha, lambda);
    let (mut resid, mut grad) = residual_and_gradient(&g, &y, &alpha, lambda);

    while iterations < MAX_ITERS {
        if norm(&grad) <= GRAD_TOL && norm(&resid) <= GRAD_TOL {
            converged = true;
            break;
        }
        iterations += 1;

        // Newton system for F(α) = 0: (S G + λI) Δ = −F
        let z = mat_vec(&g, &alpha);
        let mut jac = DMatrix::zeros(t, t);
        for a in 0..t {
            let w = sigmoid::derivative(z[a]);
            for b in 0..t {
                jac[(a, b)] = w * g[(a, b)];
            }
            jac[(a, a)] += lambda;
        }
        let rhs = DVector::from_iterator(t, resid.iter().map(|v| -v));
        let direction: Vec<f64> = match jac.lu().solve(&rhs) {
            Some(d) if d.iter().all(|v| v.is_finite()) => d.as_slice().to_vec(),
            _ => {
                used_fallback = true;
                grad.iter().map(|v| -v).collect()
            }
        };

        let slope: f64 = grad.iter().zip(&direction).map(|(g, d)| g * d).sum();
        let resid_norm = norm(&resid);
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let trial: Vec<f64> = alpha
                .iter()
                .zip(&direction)
                .map(|(a, d)| a + step * d)
                .collect();
            let value = objective(&g, &y, &trial, lambda);
            if value <= current + ARMIJO * step * slope.min(0.0) && value < current {
                accepted = Some((trial, value));
                break;
            }
            // movement along directions that leave the loss flat still
            // shrinks the canonical residual
            if value <= current {
                let (r, _) = residual_and_gradient(&g, &y, &trial, lambda);
                if norm(&r) < resid_norm {
                    accepted = Some((trial, value));
                    break;
                }
            }
            step *= 0.5;
        }
        match accepted {
            Some((trial, value)) => {
                alpha = trial;
                current = value;
                let rg = residual_and_gradient(&g, &y, &alpha, lambda);
                resid = rg.0;
                grad = rg.1;
            }
            None => break,
        }
    }
    if !converged && norm(&grad) <= GRAD_TOL && norm(&resid) <= GRAD_TOL {
        converged = true;
    }

    let queries = hist.queries();
    let mut utility = vec![0.0; grid.len()];
    for (k, &q) in queries.iter().enumerate() {
        let (terms, nt) = q.terms();
        for (x, u) in utility.iter_mut().enumerate() {
            let mut kv = 0.0;
            for &(i, c) in &terms[..nt] {
                kv += c * grid.base(i, x);
            }
            *u += alpha[k] * kv;
        }
    }
    let z = mat_vec(&g, &alpha);
    let sq: f64 = alpha.iter().zip(&z).map(|(a, z)| a * z).sum();
    let weights = weights_from_alpha(grid, &queries, &alpha);
    Ok(EstimatorFit {
        grad_norm: norm(&grad),
        alpha,
        lambda,
        converged,
        iterations,
        used_fallback,
        utility,
        norm: sq.max(0.0).sqrt(),
        weights,
    })
}

/// `w = Uᵀ Dᵀ α`.
fn weights_from_alpha(grid: &KernelGrid, queries: &[Query], alpha: &[f64]) -> Vec<f64> {
    let a = scatter(grid.len(), queries, alpha);
    (grid.basis().transpose() * a).as_slice().to_vec()
}

/// `Dᵀ v` as an n-vector.
fn scatter(n: usize, queries: &[Query], v: &[f64]) -> DVector<f64> {
    let mut out = DVector::zeros(n);
    for (&q, &c) in queries.iter().zip(v) {
        let (terms, nt) = q.terms();
        for &(i, ci) in &terms[..nt] {
            out[i] += ci * c;
        }
    }
    out
}

/// Damped Newton on the coefficients with every linear system reduced to the
/// kernel basis (`K = U Uᵀ`, `r = rank(K) ≤ n`).
///
/// `(SG + λI)Δ = −F` is solved through Woodbury with the `r × r` matrix
/// `λI + Uᵀ(DᵀSD)U`, so an iteration costs `O(t + n²r)` and `G` is never
/// formed. `warm_start` is a previous fit's [`EstimatorFit::weights`].
pub fn fit_in_basis(
    hist: &History,
    grid: &KernelGrid,
    lambda: f64,
    warm_start: Option<&[f64]>,
) -> Result<EstimatorFit> {
    check_lambda(lambda)?;
    if hist.is_empty() {
        return Ok(EstimatorFit::empty(grid, lambda));
    }
    hist.check(grid)?;
    let basis = grid.basis();
    let basis_t = basis.transpose();
    let n = grid.len();
    let r = basis.ncols();
    let queries = hist.queries();
    let y = hist.outcomes();
    let t = y.len();

    let gather = |f: &DVector<f64>| -> Vec<f64> {
        queries.iter().map(|q| q.apply(f.as_slice())).collect()
    };
    // w = UᵀDᵀv and Gv = D U w
    let gram_apply = |v: &[f64]| -> (DVector<f64>, Vec<f64>) {
        let w = &basis_t * scatter(n, &queries, v);
        let z = gather(&(basis * &w));
        (w, z)
    };
    let objective = |alpha: &[f64], z: &[f64]| -> f64 {
        let penalty: f64 = alpha.iter().zip(z).map(|(a, z)| a * z).sum();
        data_loss(&y, z) + 0.5 * lambda * penalty
    };
    let residual = |alpha: &[f64], z: &[f64]| -> Vec<f64> {
        z.iter()
            .zip(&y)
            .zip(alpha)
            .map(|((&z, &y), &a)| s(z) - y + lambda * a)
            .collect()
    };

    let mut alpha: Vec<f64> = match warm_start {
        Some(ws) if ws.len() == r => {
            let z = gather(&(basis * DVector::from_column_slice(ws)));
            z.iter().zip(&y).map(|(&z, &y)| (y - s(z)) / lambda).collect()
        }
        _ => vec![0.0; t],
    };
    let (mut w, mut z) = gram_apply(&alpha);
    let mut current = objective(&alpha, &z);
    let mut grad = gram_apply(&residual(&alpha, &z)).1;
    let mut grad_norm = norm(&grad);
    let mut iterations = 0;
    let mut used_fallback = false;
    let mut converged = false;

    loop {
        if grad_norm <= GRAD_TOL {
            converged = true;
            break;
        }
        if iterations >= MAX_ITERS {
            break;
        }
        iterations += 1;

        let weights: Vec<f64> = z.iter().map(|&z| sigmoid::derivative(z)).collect();
        let mut curvature = DMatrix::zeros(n, n);
        for (&q, &d) in queries.iter().zip(&weights) {
            let (terms, nt) = q.terms();
            for &(i, ci) in &terms[..nt] {
                for &(j, cj) in &terms[..nt] {
                    curvature[(i, j)] += d * ci * cj;
                }
            }
        }
        let mut reduced = &basis_t * curvature * basis;
        for k in 0..r {
            reduced[(k, k)] += lambda;
        }
        let direction: Vec<f64> = match reduced.cholesky() {
            Some(ch) => {
                let b: Vec<f64> = residual(&alpha, &z).iter().map(|v| -v).collect();
                let proj = ch.solve(&(&basis_t * scatter(n, &queries, &b)));
                let back = gather(&(basis * proj));
                b.iter()
                    .zip(&weights)
                    .zip(&back)
                    .map(|((&b, &d), &u)| (b - d * u) / lambda)
                    .collect()
            }
            None => {
                used_fallback = true;
                grad.iter().map(|g| -g).collect()
            }
        };
        let slope: f64 = grad.iter().zip(&direction).map(|(g, d)| g * d).sum();
        if !(slope < 0.0) {
            break;
        }

        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..MAX_HALVINGS {
            let trial: Vec<f64> = alpha
                .iter()
                .zip(&direction)
                .map(|(a, d)| a + step * d)
                .collect();
            let (tw, tz) = gram_apply(&trial);
            let value = objective(&trial, &tz);
            let armijo = value <= current + ARMIJO * step * slope;
            let flat = value <= current + 1e-12 * current.abs().max(1.0);
            if armijo || flat {
                let tgrad = gram_apply(&residual(&trial, &tz)).1;
                let tnorm = norm(&tgrad);
                if armijo || tnorm < grad_norm {
                    alpha = trial;
                    w = tw;
                    z = tz;
                    current = value;
                    grad = tgrad;
                    grad_norm = tnorm;
                    accepted = true;
                    break;
                }
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }

    let utility = basis * &w;
    Ok(EstimatorFit {
        alpha,
        grad_norm,
        lambda,
        converged,
        iterations,
        used_fallback,
        utility: utility.as_slice().to_vec(),
        norm: w.norm(),
        weights: w.as_slice().to_vec(),
    })
}

/// `Σ_τ α_τ k(q_τ, q)` evaluated from explicit kernel rows.
pub fn predict(fit: &EstimatorFit, hist: &History, grid: &KernelGrid, q: Query) -> Result<f64> {
    check_alpha(&fit.alpha, hist)?;
    grid.check(q)?;
    Ok(hist
        .queries()
        .iter()
        .zip(&fit.alpha)
        .map(|(&row, &a)| a * grid.row_kernel(row, q))
        .sum())
}

pub fn predict_prob(
    fit: &EstimatorFit,
    hist: &History,
    grid: &KernelGrid,
    q: Query,
) -> Result<f64> {
    Ok(s(predict(fit, hist, grid, q)?))
}
