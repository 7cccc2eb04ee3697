use nalgebra::{DMatrix, DVector};

use super::{KernelGrid, Query};
use crate::error::{Error, Result};

const REFRESH_EVERY: usize = 256;

/// Posterior covariance of the utility over the whole grid,
/// `Σ_t = K - K Dᵀ (D K Dᵀ + ρI)⁻¹ D K`, where the rows of `D` are the
/// observed functionals.
///
/// Any width `σ_t(q)² = dᵀ Σ_t d` is then a two-entry lookup, and each append is
/// a rank-one downdate in `O(n²)` regardless of how long the history is. The
/// running `log det(I + ρ⁻¹ K_t)` follows from the matrix determinant lemma.
#[derive(Debug, Clone)]
pub struct GridPosterior {
    rho: f64,
    cov: DMatrix<f64>,
    basis: DMatrix<f64>,
    /// `DᵀD`, kept to rebuild `Σ` from scratch.
    counts: DMatrix<f64>,
    log_det: f64,
    appends: usize,
    clamped: u64,
}

impl GridPosterior {
    pub fn new(grid: &KernelGrid, rho: f64) -> Result<Self> {
        if !(rho.is_finite() && rho > 0.0) {
            return Err(Error::Config(format!("ridge ρ must be positive, got {rho}")));
        }
        let n = grid.len();
        let basis = grid.basis().clone();
        Ok(GridPosterior {
            rho,
            cov: &basis * basis.transpose(),
            basis,
            counts: DMatrix::zeros(n, n),
            log_det: 0.0,
            appends: 0,
            clamped: 0,
        })
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn len(&self) -> usize {
        self.appends
    }

    pub fn is_empty(&self) -> bool {
        self.appends == 0
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    pub fn info_gain(&self) -> f64 {
        0.5 * self.log_det
    }

    pub fn clamped_count(&self) -> u64 {
        self.clamped
    }

    /// `σ_t(q)²`, clamped at zero.
    pub fn variance(&self, q: Query) -> f64 {
        let v = match q {
            Query::Point(i) => self.cov[(i, i)],
            Query::Pair(i, j) => {
                self.cov[(i, i)] + self.cov[(j, j)] - self.cov[(i, j)] - self.cov[(j, i)]
            }
        };
        v.max(0.0)
    }

    pub fn sigma(&self, q: Query) -> f64 {
        self.variance(q).sqrt()
    }

    /// Conditions on one more observed functional.
    pub fn append(&mut self, q: Query) {
        let n = self.cov.nrows();
        let (terms, nt) = q.terms();
        let mut v = DVector::zeros(n);
        for &(i, c) in &terms[..nt] {
            v += self.cov.column(i) * c;
        }
        let mut quad = 0.0;
        for &(i, c) in &terms[..nt] {
            quad += c * v[i];
        }
        if quad < 0.0 {
            self.clamped += 1;
            quad = 0.0;
        }
        let denom = self.rho + quad;
        self.cov.ger(-1.0 / denom, &v, &v, 1.0);
        self.log_det += (1.0 + quad / self.rho).ln();

        for &(i, ci) in &terms[..nt] {
            for &(j, cj) in &terms[..nt] {
                self.counts[(i, j)] += ci * cj;
            }
        }
        self.appends += 1;
        if self.appends % REFRESH_EVERY == 0 {
            self.refresh();
        }
    }

    /// Recomputes `Σ = U (I + ρ⁻¹ Uᵀ DᵀD U)⁻¹ Uᵀ`.
    pub fn refresh(&mut self) {
        let r = self.basis.ncols();
        let ut_a = self.basis.transpose() * &self.counts;
        let mut inner = &ut_a * &self.basis / self.rho;
        for k in 0..r {
            inner[(k, k)] += 1.0;
        }
        // inner is SPD with eigenvalues ≥ 1
        let chol = inner
            .cholesky()
            .expect("I + ρ⁻¹UᵀAU is positive definite");
        let solved = chol.solve(&self.basis.transpose());
        self.cov = &self.basis * solved;
        self.cov = (&self.cov + self.cov.transpose()) * 0.5;
    }
}
