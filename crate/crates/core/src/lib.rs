//! Kernelized bandit optimization with logistic and pairwise-preference
//! feedback.
//!
//! The crate is organised bottom-up:
//!
//! - [`kernels`]: base and dueling kernels, incremental Gram factorizations,
//!   posterior widths and information gain.
//! - [`estimator`]: the regularized kernel logistic estimator (direct and
//!   preference feedback) solved by damped Newton.
//! - [`confidence`]: exploration coefficients, confidence bands and the set of
//!   plausible maximizers.
//! - [`environments`]: grid test functions, Bernoulli feedback and regret.
//! - [`policies`]: MaxMinLCB and the baseline acquisition rules.
//! - [`bench`]: multi-seed trial runner, aggregation and report files.

#[cfg(test)]
macro_rules! assert_close {
    ($a:expr, $b:expr, $tol:expr) => {{
        let (a, b): (f64, f64) = ($a, $b);
        assert!((a - b).abs() <= $tol, "{} != {} (tol {})", a, b, $tol);
    }};
}

pub mod bench;
pub mod confidence;
pub mod environments;
pub mod error;
pub mod estimator;
pub mod kernels;
pub mod policies;

pub use error::{Error, Result};
