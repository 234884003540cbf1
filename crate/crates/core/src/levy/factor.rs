use nalgebra::{DMatrix, SymmetricEigen};

use super::LevyMeasure;
use crate::error::{Error, Result};

/// Reconstruction tolerance on `‖QQ* − C‖_F / ‖C‖_F`.
pub const RECONSTRUCTION_TOL: f64 = 1e-10;

const PSD_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FactorMethod {
    /// Triangular factor of a positive definite matrix.
    Cholesky,
    /// Principal square root through the eigendecomposition.
    PrincipalSqrt,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CovFactor {
    pub q: DMatrix<f64>,
    pub method: FactorMethod,
}

/// Factors a symmetric positive semidefinite matrix as `C = QQ*`.
///
/// Positive definite input gets its lower Cholesky factor; singular input
/// falls back to the principal square root.
pub fn covariance_factor(cov: &DMatrix<f64>) -> Result<CovFactor> {
    if !cov.is_square() {
        return Err(Error::domain(format!(
            "covariance must be square, got {}x{}",
            cov.nrows(),
            cov.ncols()
        )));
    }
    if cov.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("covariance has non-finite entries".into()));
    }
    let scale = cov.norm();
    let asym = (cov - cov.transpose()).norm();
    if asym > 1e-12 * scale {
        return Err(Error::Numerical(format!(
            "covariance is not symmetric: ‖C − C*‖ = {asym:e}"
        )));
    }
    let n = cov.nrows();
    if scale == 0.0 {
        return Ok(CovFactor { q: DMatrix::zeros(n, n), method: FactorMethod::PrincipalSqrt });
    }

    let eig = SymmetricEigen::new(cov.clone());
    let max_abs = eig.eigenvalues.amax();
    let min = eig.eigenvalues.min();
    if min < -PSD_TOL * max_abs {
        return Err(Error::Numerical(format!(
            "covariance is not positive semidefinite: smallest eigenvalue {min:e} \
             (largest magnitude {max_abs:e})"
        )));
    }

    let factor = if min > PSD_TOL * max_abs {
        nalgebra::Cholesky::new(cov.clone())
            .map(|c| CovFactor { q: c.l(), method: FactorMethod::Cholesky })
    } else {
        None
    };
    let factor = factor.unwrap_or_else(|| {
        let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
        let v = &eig.eigenvectors;
        CovFactor {
            q: v * DMatrix::from_diagonal(&roots) * v.transpose(),
            method: FactorMethod::PrincipalSqrt,
        }
    });

    let err = (&factor.q * factor.q.transpose() - cov).norm() / scale;
    if err > RECONSTRUCTION_TOL {
        return Err(Error::Numerical(format!(
            "factor reconstruction error {err:e} exceeds {RECONSTRUCTION_TOL:e}"
        )));
    }
    Ok(factor)
}

/// `Q` with `QQ* = ∫_{|y|≤u} yy* π(dy)`.
pub fn small_jump_cov_factor(measure: &dyn LevyMeasure, u: f64) -> Result<CovFactor> {
    let cov = measure.small_jump_cov(u)?;
    covariance_factor(&cov).map_err(|e| e.with_context(format!("small-jump covariance at u = {u}")))
}
