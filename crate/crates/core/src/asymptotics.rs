//! Closed-form limits of `n * E ||estimate - truth||^2` for the linear
//! estimators, and the limiting efficiency ratio between the unconstrained and
//! diagonal plug-ins.
//!
//! Both state noise and reward noise share the scale `sigma`, so the limits do
//! not depend on it: `sigma^2` enters once directly and once inversely through
//! the stationary covariance. The formulas keep `sigma` explicit anyway and
//! the cancellation is covered by tests.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::spectral_radius;
use crate::linear::stationary_covariance;

/// The limit of `n * E ||estimate - truth||^2` on one instance.
#[derive(Debug, Clone)]
pub struct AsymptoticMse {
    pub value: f64,
    pub estimator: &'static str,
    pub instance: String,
}

fn validate_discount(gamma: f64) -> Result<()> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "discount factor must lie strictly in (0, 1), got {gamma}"
        )));
    }
    Ok(())
}

/// Limiting scaled MSE of the unconstrained estimator (LSTD and the
/// unconstrained plug-in coincide):
///
/// `sigma^2 (gamma^2 ||(I - gamma A')^{-1} theta||^2 + 1)
///  ||P_inf^{-1/2} (I - gamma A)^{-1}||_F^2`.
pub fn asymptotic_mse_general(
    a: &DMatrix<f64>,
    theta: &DVector<f64>,
    gamma: f64,
    sigma: f64,
) -> Result<AsymptoticMse> {
    validate_discount(gamma)?;
    let d = a.nrows();
    if !a.is_square() || theta.len() != d {
        return Err(Error::InvalidArgument("dimension mismatch".into()));
    }
    let p_inf = stationary_covariance(a, sigma)?;
    let eye = DMatrix::<f64>::identity(d, d);
    let beta = (&eye - gamma * a.transpose())
        .lu()
        .solve(theta)
        .ok_or_else(|| Error::Numerical("singular (I - gamma A')".into()))?;
    let resolvent = (&eye - gamma * a)
        .lu()
        .solve(&eye)
        .ok_or_else(|| Error::Numerical("singular (I - gamma A)".into()))?;
    // ||P_inf^{-1/2} X||_F^2 = tr(X' P_inf^{-1} X) via the Cholesky factor.
    let chol = p_inf
        .cholesky()
        .ok_or_else(|| Error::Numerical("stationary covariance not positive definite".into()))?;
    let half = chol.l().solve_lower_triangular(&resolvent).ok_or_else(|| {
        Error::Numerical("triangular solve failed on the stationary factor".into())
    })?;
    let weight = half.norm_squared();
    let value = sigma * sigma * (gamma * gamma * beta.norm_squared() + 1.0) * weight;
    Ok(AsymptoticMse {
        value,
        estimator: "lstd-linear",
        instance: format!("general d={d} gamma={gamma} sigma={sigma}"),
    })
}

/// Limiting scaled MSE of the diagonal-constrained plug-in:
///
/// `sum_i (gamma^2 theta_i^2 / (1 - gamma a_i)^2 + 1) (1 - a_i^2) / (1 - gamma a_i)^2`.
///
/// The sum is scale-free in `sigma` for the shared-noise model; `sigma` is
/// accepted for interface symmetry and does not enter.
pub fn asymptotic_mse_diag(
    a: &DMatrix<f64>,
    theta: &DVector<f64>,
    gamma: f64,
    sigma: f64,
) -> Result<AsymptoticMse> {
    validate_discount(gamma)?;
    let d = a.nrows();
    if !a.is_square() || theta.len() != d {
        return Err(Error::InvalidArgument("dimension mismatch".into()));
    }
    for i in 0..d {
        for j in 0..d {
            if i != j && a[(i, j)] != 0.0 {
                return Err(Error::InvalidArgument(
                    "diagonal formula requires a diagonal dynamics matrix".into(),
                ));
            }
        }
    }
    if spectral_radius(a) >= 1.0 {
        return Err(Error::InvalidArgument("dynamics must be stable".into()));
    }
    let mut value = 0.0;
    for i in 0..d {
        let ai = a[(i, i)];
        let denom = (1.0 - gamma * ai) * (1.0 - gamma * ai);
        let boot = gamma * gamma * theta[i] * theta[i] / denom;
        value += (boot + 1.0) * (1.0 - ai * ai) / denom;
    }
    Ok(AsymptoticMse {
        value,
        estimator: "mb-linear-diag",
        instance: format!("diagonal d={d} gamma={gamma} sigma={sigma}"),
    })
}

/// Exact limiting ratio of the two scaled MSEs on the scaled-identity
/// instance `A = lambda I`, `theta = 1`:
///
/// `(d gamma^2/(1-gamma lambda)^2 + 1) / (gamma^2/(1-gamma lambda)^2 + 1)`.
pub fn dls_gap_ratio(d: usize, lambda: f64, gamma: f64) -> f64 {
    assert!(
        d >= 1 && lambda > 0.0 && lambda < 1.0 && gamma > 0.0 && gamma < 1.0,
        "dls_gap_ratio requires d >= 1 and lambda, gamma in (0, 1)"
    );
    let c = gamma * gamma / ((1.0 - gamma * lambda) * (1.0 - gamma * lambda));
    (d as f64 * c + 1.0) / (c + 1.0)
}

/// Covariance contraction: if `Cov(vec(M')) = B ⊗ C` then
/// `Cov(M theta) = (theta' C theta) B`.
pub fn kron_cov_contract(
    b: &DMatrix<f64>,
    c: &DMatrix<f64>,
    theta: &DVector<f64>,
) -> Result<DMatrix<f64>> {
    if !b.is_square() || !c.is_square() || c.nrows() != theta.len() {
        return Err(Error::InvalidArgument("dimension mismatch".into()));
    }
    let sym_tol = 1e-10;
    if (b - b.transpose()).amax() > sym_tol * (1.0 + b.amax())
        || (c - c.transpose()).amax() > sym_tol * (1.0 + c.amax())
    {
        return Err(Error::InvalidArgument("B and C must be symmetric".into()));
    }
    let scale = (theta.transpose() * c * theta)[(0, 0)];
    Ok(b * scale)
}
