//! Linear-value estimators: batch LSTD and the model-based plug-in with an
//! optional diagonal constraint on the fitted dynamics.

use nalgebra::{DMatrix, DVector};

use crate::dataset::TransitionDataset;
use crate::error::{Error, Result};
use crate::linalg::{lu_solve, spectral_radius, RANK_CUTOFF_REL};

use super::{EstimatePayload, ValueEstimate};

/// Constraint set for the fitted dynamics matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DynamicsConstraint {
    Unconstrained,
    Diagonal,
}

/// Accumulated second moments of a real-state dataset.
pub(crate) struct LinearMoments {
    /// `sum_t x_t x_t'`
    pub gram: DMatrix<f64>,
    /// `sum_t x_t x_{t+1}'`
    pub cross: DMatrix<f64>,
    /// `sum_t r_t x_t`
    pub reward: DVector<f64>,
}

pub(crate) fn accumulate_moments(data: &TransitionDataset) -> Result<LinearMoments> {
    data.require_real()?;
    let d = data.dim();
    let mut gram = DMatrix::zeros(d, d);
    let mut cross = DMatrix::zeros(d, d);
    let mut reward = DVector::zeros(d);
    for t in 0..data.len() {
        let x = data.real_state(t);
        let xn = data.real_next(t);
        let r = data.reward(t);
        for i in 0..d {
            reward[i] += r * x[i];
            for j in 0..d {
                gram[(i, j)] += x[i] * x[j];
                cross[(i, j)] += x[i] * xn[j];
            }
        }
    }
    Ok(LinearMoments {
        gram,
        cross,
        reward,
    })
}

fn validate_gamma(gamma: f64) -> Result<()> {
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::InvalidArgument(format!(
            "discount factor must lie in [0, 1), got {gamma}"
        )));
    }
    Ok(())
}

/// Batch LSTD over the linear value class:
/// `beta` solves `sum_t x_t (x_t - gamma x_{t+1})' beta = sum_t r_t x_t`.
///
/// At `gamma = 0` this is ordinary least-squares regression of rewards on
/// states. Errors with the numerical rank if the LSTD matrix is singular.
pub fn lstd_linear(data: &TransitionDataset, gamma: f64) -> Result<ValueEstimate> {
    validate_gamma(gamma)?;
    let m = accumulate_moments(data)?;
    let d = data.dim();
    let lstd_matrix = &m.gram - gamma * &m.cross;
    let svd = lstd_matrix.clone().svd(true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let eps = RANK_CUTOFF_REL * smax;
    let rank = svd.rank(eps);
    if rank < d {
        return Err(Error::RankDeficient {
            required: d,
            actual: rank,
        });
    }
    let beta = svd
        .solve(&m.reward, eps)
        .map_err(|e| Error::Numerical(format!("LSTD solve failed: {e}")))?;
    let residual = (&lstd_matrix * &beta - &m.reward).norm();
    let scale = m.reward.norm().max(lstd_matrix.norm() * beta.norm());
    if residual > 1e-10 * scale.max(1e-300) {
        return Err(Error::Numerical(format!(
            "LSTD residual {residual:.3e} relative to {scale:.3e}"
        )));
    }
    Ok(ValueEstimate::new(
        EstimatePayload::Linear(beta),
        "lstd-linear",
        data.len(),
    ))
}

/// Least-squares dynamics fit within the constraint set, shared by the linear
/// and quadratic plug-in estimators. Returns `A_hat`.
pub(crate) fn fit_dynamics(
    data: &TransitionDataset,
    moments: &LinearMoments,
    constraint: DynamicsConstraint,
) -> Result<DMatrix<f64>> {
    let d = data.dim();
    match constraint {
        DynamicsConstraint::Unconstrained => {
            let svd = moments.gram.clone().svd(true, true);
            let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
            let eps = RANK_CUTOFF_REL * smax;
            let rank = svd.rank(eps);
            if rank < d {
                return Err(Error::RankDeficient {
                    required: d,
                    actual: rank,
                });
            }
            // rows of A_hat: A_hat' = Gram^{-1} Cross
            let a_t = svd
                .solve(&moments.cross, eps)
                .map_err(|e| Error::Numerical(format!("dynamics regression failed: {e}")))?;
            Ok(a_t.transpose())
        }
        DynamicsConstraint::Diagonal => {
            let mut diag = DVector::zeros(d);
            for i in 0..d {
                let denom = moments.gram[(i, i)];
                if denom <= 0.0 {
                    return Err(Error::RankDeficient {
                        required: d,
                        actual: i,
                    });
                }
                diag[i] = moments.cross[(i, i)] / denom;
            }
            Ok(DMatrix::from_diagonal(&diag))
        }
    }
}

/// Model-based plug-in over the linear value class: fit `A_hat` by least
/// squares within the constraint set, `theta_hat` by reward regression, then
/// `beta = (I - gamma A_hat')^{-1} theta_hat`.
///
/// Errors if the reward regression design is rank deficient or if
/// `rho(gamma A_hat) >= 1` (the plug-in value would be meaningless).
pub fn mb_linear(
    data: &TransitionDataset,
    gamma: f64,
    constraint: DynamicsConstraint,
) -> Result<ValueEstimate> {
    validate_gamma(gamma)?;
    let m = accumulate_moments(data)?;
    let d = data.dim();
    let a_hat = fit_dynamics(data, &m, constraint)?;

    let svd = m.gram.clone().svd(true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let eps = RANK_CUTOFF_REL * smax;
    let rank = svd.rank(eps);
    if rank < d {
        return Err(Error::RankDeficient {
            required: d,
            actual: rank,
        });
    }
    let theta_hat = svd
        .solve(&m.reward, eps)
        .map_err(|e| Error::Numerical(format!("reward regression failed: {e}")))?;

    let radius = gamma * spectral_radius(&a_hat);
    if radius >= 1.0 {
        return Err(Error::PlugInUnstable { radius });
    }
    let lhs = DMatrix::identity(d, d) - gamma * a_hat.transpose();
    let beta = lu_solve(&lhs, &theta_hat)?;
    let name = match constraint {
        DynamicsConstraint::Unconstrained => "mb-linear",
        DynamicsConstraint::Diagonal => "mb-linear-diag",
    };
    Ok(ValueEstimate::new(
        EstimatePayload::Linear(beta),
        name,
        data.len(),
    ))
}
