//! Base kernels, the dueling kernel on action pairs, and the Gram/posterior
//! machinery built on top of them.
//!
//! Every action lives on a finite grid, so most of the numerics are phrased
//! through [`KernelGrid`], which caches the base Gram matrix over the grid and
//! a square-root factor `U` with `K = U Uᵀ`. A history row or a query is a
//! [`Query`]: either a single grid point (direct feedback, paired with an
//! implicit null action whose utility is zero) or an ordered pair of grid points
//! (preference feedback). Both are linear functionals of the utility on the
//! grid, which is what makes the dueling kernel a plain kernel over pairs.

mod gram;
mod posterior;

pub use gram::GramState;
pub use posterior::GridPosterior;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smoothness of a Matérn kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MaternNu {
    Half,
    ThreeHalves,
    FiveHalves,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KernelFamily {
    Rbf,
    Matern(MaternNu),
    Linear,
}

impl KernelFamily {
    pub fn parse(name: &str) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "rbf" => Ok(KernelFamily::Rbf),
            "matern12" | "matern1/2" => Ok(KernelFamily::Matern(MaternNu::Half)),
            "matern32" | "matern3/2" => Ok(KernelFamily::Matern(MaternNu::ThreeHalves)),
            "matern52" | "matern5/2" => Ok(KernelFamily::Matern(MaternNu::FiveHalves)),
            "linear" => Ok(KernelFamily::Linear),
            _ => Err(Error::UnknownName {
                kind: "kernel",
                name: name.to_string(),
            }),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            KernelFamily::Rbf => "rbf",
            KernelFamily::Matern(MaternNu::Half) => "matern12",
            KernelFamily::Matern(MaternNu::ThreeHalves) => "matern32",
            KernelFamily::Matern(MaternNu::FiveHalves) => "matern52",
            KernelFamily::Linear => "linear",
        }
    }
}

/// A base kernel family with its hyperparameters.
///
/// `variance` scales every family; `lengthscale` is ignored by `Linear`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub variance: f64,
    pub lengthscale: f64,
}

impl Default for KernelSpec {
    fn default() -> Self {
        KernelSpec::rbf(1.0, 1.0)
    }
}

impl KernelSpec {
    pub fn new(family: KernelFamily, variance: f64, lengthscale: f64) -> Result<Self> {
        let spec = KernelSpec {
            family,
            variance,
            lengthscale,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn rbf(variance: f64, lengthscale: f64) -> Self {
        KernelSpec {
            family: KernelFamily::Rbf,
            variance,
            lengthscale,
        }
    }

    pub fn linear(variance: f64) -> Self {
        KernelSpec {
            family: KernelFamily::Linear,
            variance,
            lengthscale: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.variance.is_finite() && self.variance > 0.0) {
            return Err(Error::Config(format!(
                "kernel variance must be positive, got {}",
                self.variance
            )));
        }
        if !(self.lengthscale.is_finite() && self.lengthscale > 0.0) {
            return Err(Error::Config(format!(
                "kernel lengthscale must be positive, got {}",
                self.lengthscale
            )));
        }
        Ok(())
    }

    /// Evaluates `k(x, x')`.
    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        if x.len() != y.len() {
            return Err(Error::Dimension {
                expected: x.len(),
                got: y.len(),
            });
        }
        if x.iter().chain(y).any(|v| !v.is_finite()) {
            return Err(Error::Domain("kernel inputs must be finite".into()));
        }
        Ok(self.eval_unchecked(x, y))
    }

    pub(crate) fn eval_unchecked(&self, x: &[f64], y: &[f64]) -> f64 {
        match self.family {
            KernelFamily::Linear => {
                self.variance * x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>()
            }
            KernelFamily::Rbf => {
                let sq = squared_distance(x, y);
                self.variance * (-0.5 * sq / (self.lengthscale * self.lengthscale)).exp()
            }
            KernelFamily::Matern(nu) => {
                let r = squared_distance(x, y).sqrt() / self.lengthscale;
                let shape = match nu {
                    MaternNu::Half => (-r).exp(),
                    MaternNu::ThreeHalves => {
                        let a = 3f64.sqrt() * r;
                        (1.0 + a) * (-a).exp()
                    }
                    MaternNu::FiveHalves => {
                        let a = 5f64.sqrt() * r;
                        (1.0 + a + a * a / 3.0) * (-a).exp()
                    }
                };
                self.variance * shape
            }
        }
    }

    /// Dueling kernel between the pairs `(x1, x1')` and `(x2, x2')`:
    /// `k(x1,x2) + k(x1',x2') - k(x1,x2') - k(x1',x2)`.
    pub fn eval_dueling(
        &self,
        first: (&[f64], &[f64]),
        second: (&[f64], &[f64]),
    ) -> Result<f64> {
        let (a, b) = first;
        let (c, d) = second;
        Ok(self.eval(a, c)? + self.eval(b, d)? - self.eval(a, d)? - self.eval(b, c)?)
    }
}

fn squared_distance(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// A linear functional of the utility restricted to the grid.
///
/// `Point(i)` reads `f(x_i)` (direct feedback against the null action);
/// `Pair(i, j)` reads `f(x_i) - f(x_j)` (preference feedback).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Query {
    Point(usize),
    Pair(usize, usize),
}

impl Query {
    pub fn first(self) -> usize {
        match self {
            Query::Point(i) | Query::Pair(i, _) => i,
        }
    }

    pub fn second(self) -> Option<usize> {
        match self {
            Query::Point(_) => None,
            Query::Pair(_, j) => Some(j),
        }
    }

    /// Sparse coefficients of the functional over grid indices.
    pub(crate) fn terms(self) -> ([(usize, f64); 2], usize) {
        match self {
            Query::Point(i) => ([(i, 1.0), (i, 0.0)], 1),
            Query::Pair(i, j) => ([(i, 1.0), (j, -1.0)], 2),
        }
    }

    /// Applies the functional to a vector of grid values.
    pub fn apply(self, values: &[f64]) -> f64 {
        match self {
            Query::Point(i) => values[i],
            Query::Pair(i, j) => values[i] - values[j],
        }
    }

    fn max_index(self) -> usize {
        match self {
            Query::Point(i) => i,
            Query::Pair(i, j) => i.max(j),
        }
    }
}

/// A kernel evaluated once over a finite set of grid points.
#[derive(Debug, Clone)]
pub struct KernelGrid {
    spec: KernelSpec,
    points: Vec<Vec<f64>>,
    gram: DMatrix<f64>,
    basis: DMatrix<f64>,
}

impl KernelGrid {
    pub fn new(spec: KernelSpec, points: Vec<Vec<f64>>) -> Result<Self> {
        spec.validate()?;
        if points.is_empty() {
            return Err(Error::Config("kernel grid needs at least one point".into()));
        }
        let dim = points[0].len();
        for p in &points {
            if p.len() != dim {
                return Err(Error::Dimension {
                    expected: dim,
                    got: p.len(),
                });
            }
            if p.iter().any(|v| !v.is_finite()) {
                return Err(Error::Domain("grid points must be finite".into()));
            }
        }
        let n = points.len();
        let gram = DMatrix::from_fn(n, n, |i, j| spec.eval_unchecked(&points[i], &points[j]));
        let basis = square_root_factor(&gram);
        Ok(KernelGrid {
            spec,
            points,
            gram,
            basis,
        })
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
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

    /// Base Gram matrix over the grid.
    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    /// Factor `U` (n × r) with `U Uᵀ = K` up to clamped negative eigenvalues.
    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn base(&self, i: usize, j: usize) -> f64 {
        self.gram[(i, j)]
    }

    pub fn check(&self, q: Query) -> Result<()> {
        let m = q.max_index();
        if m >= self.len() {
            return Err(Error::Domain(format!(
                "grid index {m} out of range for {} points",
                self.len()
            )));
        }
        Ok(())
    }

    /// Kernel between two functionals. Pair-pair is the dueling kernel; a point
    /// is a pair whose second element is the null action.
    pub fn row_kernel(&self, a: Query, b: Query) -> f64 {
        let (ta, na) = a.terms();
        let (tb, nb) = b.terms();
        let mut acc = 0.0;
        for &(i, ci) in &ta[..na] {
            for &(j, cj) in &tb[..nb] {
                acc += ci * cj * self.gram[(i, j)];
            }
        }
        acc
    }

    pub fn kernel_vector(&self, rows: &[Query], q: Query) -> Vec<f64> {
        rows.iter().map(|&r| self.row_kernel(r, q)).collect()
    }

    /// Gram matrix of a list of functionals.
    pub fn row_gram(&self, rows: &[Query]) -> DMatrix<f64> {
        let t = rows.len();
        let mut g = DMatrix::zeros(t, t);
        for a in 0..t {
            for b in 0..=a {
                let v = self.row_kernel(rows[a], rows[b]);
                g[(a, b)] = v;
                g[(b, a)] = v;
            }
        }
        g
    }
}

/// `U = V · diag(√max(λ, 0))` over eigenpairs with positive eigenvalue.
fn square_root_factor(gram: &DMatrix<f64>) -> DMatrix<f64> {
    let n = gram.nrows();
    let eig = SymmetricEigen::new(gram.clone());
    let keep: Vec<usize> = (0..n).filter(|&k| eig.eigenvalues[k] > 0.0).collect();
    let mut basis = DMatrix::zeros(n, keep.len().max(1));
    for (col, &k) in keep.iter().enumerate() {
        let scale = eig.eigenvalues[k].sqrt();
        for i in 0..n {
            basis[(i, col)] = eig.eigenvectors[(i, k)] * scale;
        }
    }
    basis
}
