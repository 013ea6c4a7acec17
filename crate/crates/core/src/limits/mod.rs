//! Limit objects: Gaussian covariance families, the stable integrals `ξ` and
//! `ζ` against an independently scattered stable measure, their
//! characteristic functions, the scalar limit constants, high-dimension
//! laws and dependence diagnostics.

pub mod cf;
pub mod constants;
pub mod dependence;
pub mod highdim;
pub mod kernels;
pub mod stable_integral;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

pub use cf::{cf_xi_fdd, cf_zeta_fdd, zeta_second_moment};
pub use constants::{limit_constant, normalized_limit_constant, ConstantParams};
pub use dependence::{dependence_distance_gaussian, dependence_exponent, increment_covariance, self_similarity_index};
pub use highdim::{highdim_law, HighDimParams, HighDimValue, HighDimVariant};
pub use kernels::{
    cov_kernel_eval, gram_matrix, min_gram_eigenvalue, sample_gaussian_process, xi_covariance_kernel, CovarianceKernel,
    KernelFamily,
};
pub use stable_integral::{occupation_kernel, sample_xi, sample_zeta, StableIntegralGrid};

/// The two stable integrals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntegralKind {
    Xi,
    Zeta,
}

impl IntegralKind {
    /// Upper dimension bound for existence.
    pub fn dimension_bound(self, alpha: f64, beta: f64) -> f64 {
        match self {
            IntegralKind::Xi => alpha * (1.0 + beta) / beta,
            IntegralKind::Zeta => alpha * (2.0 + beta) / (1.0 + beta),
        }
    }
}

/// Whether the integrand of `kind` is `(1+β)`-integrable.
pub fn existence_check(kind: IntegralKind, d: usize, alpha: f64, beta: f64) -> bool {
    (d as f64) < kind.dimension_bound(alpha, beta)
}

/// Times of a limit process: nonnegative, strictly increasing, nonempty.
pub fn validate_times(times: &[f64]) -> Result<()> {
    if times.is_empty() {
        return Err(invalid("time grid is empty"));
    }
    if times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
        return Err(invalid("times must be finite and nonnegative"));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("time grid must be strictly increasing"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn existence_examples() {
        assert!(existence_check(IntegralKind::Xi, 3, 2.0, 1.0));
        assert!(!existence_check(IntegralKind::Xi, 4, 2.0, 1.0));
        assert!(existence_check(IntegralKind::Zeta, 2, 2.0, 1.0));
        assert!(!existence_check(IntegralKind::Zeta, 3, 2.0, 1.0));
    }
}
