use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result};

/// Appends between full refactorizations.
const REFACTOR_EVERY: usize = 256;

/// Incrementally maintained Cholesky factor of `K_t + ρI`.
///
/// Rows are stored lower-triangular and packed: row `i` holds `i + 1` entries.
/// The regularized Gram matrix itself is kept so that the factor can be
/// rebuilt from scratch.
#[derive(Debug)]
pub struct GramState {
    rho: f64,
    gram: Vec<Vec<f64>>,
    chol: Vec<Vec<f64>>,
    log_det: f64,
    appends_since_refactor: usize,
    clamped: AtomicU64,
}

impl Clone for GramState {
    fn clone(&self) -> Self {
        GramState {
            rho: self.rho,
            gram: self.gram.clone(),
            chol: self.chol.clone(),
            log_det: self.log_det,
            appends_since_refactor: self.appends_since_refactor,
            clamped: AtomicU64::new(self.clamped.load(Ordering::Relaxed)),
        }
    }
}

impl GramState {
    pub fn new(rho: f64) -> Result<Self> {
        if !(rho.is_finite() && rho > 0.0) {
            return Err(Error::Config(format!("ridge ρ must be positive, got {rho}")));
        }
        Ok(GramState {
            rho,
            gram: Vec::new(),
            chol: Vec::new(),
            log_det: 0.0,
            appends_since_refactor: 0,
            clamped: AtomicU64::new(0),
        })
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn len(&self) -> usize {
        self.gram.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gram.is_empty()
    }

    /// `log det(I + ρ⁻¹ K_t)`.
    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    /// Information gain of the realized trajectory, `½ log det(I + ρ⁻¹ K_t)`.
    pub fn info_gain(&self) -> f64 {
        0.5 * self.log_det
    }

    /// Number of negative posterior variances clamped to zero so far.
    pub fn clamped_count(&self) -> u64 {
        self.clamped.load(Ordering::Relaxed)
    }

    /// Lower Cholesky factor as a dense row-major matrix.
    pub fn factor(&self) -> Vec<Vec<f64>> {
        dense(&self.chol)
    }

    /// `K_t + ρI` as a dense matrix.
    pub fn regularized_gram(&self) -> Vec<Vec<f64>> {
        dense(&self.gram)
    }

    /// Appends a point whose kernel values against the existing points are
    /// `new_row` and whose regularized self-kernel is `diag = k(x, x) + ρ`.
    pub fn append(&mut self, new_row: &[f64], diag: f64) -> Result<()> {
        let t = self.len();
        if new_row.len() != t {
            return Err(Error::Dimension {
                expected: t,
                got: new_row.len(),
            });
        }
        if !diag.is_finite() || new_row.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("Gram entries must be finite".into()));
        }
        let mut row = new_row.to_vec();
        row.push(diag);
        self.gram.push(row);

        let l = self.forward(new_row);
        let pivot = diag - l.iter().map(|v| v * v).sum::<f64>();
        self.appends_since_refactor += 1;
        if pivot <= 0.0 || self.appends_since_refactor >= REFACTOR_EVERY {
            let res = self.refactor();
            if res.is_err() {
                self.gram.pop();
            }
            return res;
        }
        let d = pivot.sqrt();
        let mut chol_row = l;
        chol_row.push(d);
        self.chol.push(chol_row);
        // ratio of successive determinants of K + ρI is the pivot
        self.log_det += pivot.ln() - self.rho.ln();
        Ok(())
    }

    /// Rebuilds the factor and the running log-determinant from the stored
    /// Gram matrix. On failure the previous factor is left untouched.
    pub fn refactor(&mut self) -> Result<()> {
        let t = self.gram.len();
        let mut chol: Vec<Vec<f64>> = Vec::with_capacity(t);
        let mut log_det = 0.0;
        for i in 0..t {
            let mut row = vec![0.0; i + 1];
            for j in 0..i {
                let prev: &Vec<f64> = &chol[j];
                let s: f64 = self.gram[i][j] - (0..j).map(|k| row[k] * prev[k]).sum::<f64>();
                row[j] = s / prev[j];
            }
            let s = self.gram[i][i] - row[..i].iter().map(|v| v * v).sum::<f64>();
            if s <= 0.0 {
                return Err(Error::NotPositiveDefinite { row: i, pivot: s });
            }
            row[i] = s.sqrt();
            log_det += s.ln() - self.rho.ln();
            chol.push(row);
        }
        self.chol = chol;
        self.log_det = log_det;
        self.appends_since_refactor = 0;
        Ok(())
    }

    /// Posterior standard deviation `σ_t(x)` given `k_vec = k_t(x)` and
    /// `k_self = k(x, x)`.
    pub fn posterior_sigma(&self, k_vec: &[f64], k_self: f64) -> Result<f64> {
        if k_vec.len() != self.len() {
            return Err(Error::Dimension {
                expected: self.len(),
                got: k_vec.len(),
            });
        }
        let v = self.forward(k_vec);
        let var = k_self - v.iter().map(|x| x * x).sum::<f64>();
        if var < 0.0 {
            self.clamped.fetch_add(1, Ordering::Relaxed);
            return Ok(0.0);
        }
        Ok(var.sqrt())
    }

    /// Solves `L v = b` by forward substitution.
    fn forward(&self, b: &[f64]) -> Vec<f64> {
        let mut v = Vec::with_capacity(b.len());
        for (i, row) in self.chol.iter().enumerate() {
            let s: f64 = row[..i].iter().zip(&v).map(|(l, x)| l * x).sum();
            v.push((b[i] - s) / row[i]);
        }
        v
    }
}

fn dense(packed: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let t = packed.len();
    let mut out = vec![vec![0.0; t]; t];
    for (i, row) in packed.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            out[i][j] = v;
        }
    }
    out
}
