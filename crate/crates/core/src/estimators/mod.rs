//! Value-function estimators: batch LSTD over three feature classes and the
//! model-based plug-in family.
//!
//! Every estimator is a pure function of a [`TransitionDataset`] and its
//! parameters. Rank-deficient systems are resolved in the minimum-norm sense
//! (SVD cutoff `1e-10 * sigma_max`); fitted dynamics whose discounted spectral
//! radius reaches 1 are rejected rather than plugged in.

mod linear;
mod quadratic;
mod separable;

pub use linear::{lstd_linear, mb_linear, DynamicsConstraint};
pub use quadratic::{lstd_quadratic, mb_lifted_lqr, mb_lqr};
pub use separable::{lstd_separable, mb_decoupled, mb_joint_tabular};

use nalgebra::{DMatrix, DVector};

use crate::decoupled::SeparableValue;
use crate::linear::QuadraticValue;

/// The payload of an estimate, tagged by value class.
#[derive(Debug, Clone)]
pub enum EstimatePayload {
    /// Linear value `x -> beta . x`.
    Linear(DVector<f64>),
    /// Quadratic value `x -> tr((x x' + gamma/(1-gamma) I) P)`.
    Quadratic(QuadraticValue),
    /// Tabular value over a flattened product space.
    Tabular(DVector<f64>),
    /// Separable value, one table per component.
    Separable(SeparableValue),
}

/// An estimate with its provenance metadata.
#[derive(Debug, Clone)]
pub struct ValueEstimate {
    pub payload: EstimatePayload,
    /// Estimator name, e.g. `"lstd-linear"`.
    pub estimator: &'static str,
    /// Number of transitions consumed.
    pub n: usize,
    /// Count of states that had to be imputed (tabular estimators only);
    /// nonzero marks the estimate as untrustworthy for aggregation.
    pub imputed_states: usize,
}

impl ValueEstimate {
    pub(crate) fn new(payload: EstimatePayload, estimator: &'static str, n: usize) -> Self {
        ValueEstimate {
            payload,
            estimator,
            n,
            imputed_states: 0,
        }
    }

    pub fn beta(&self) -> Option<&DVector<f64>> {
        match &self.payload {
            EstimatePayload::Linear(b) => Some(b),
            _ => None,
        }
    }

    pub fn quadratic(&self) -> Option<&QuadraticValue> {
        match &self.payload {
            EstimatePayload::Quadratic(q) => Some(q),
            _ => None,
        }
    }

    pub fn quadratic_matrix(&self) -> Option<&DMatrix<f64>> {
        self.quadratic().map(|q| &q.p)
    }

    pub fn separable(&self) -> Option<&SeparableValue> {
        match &self.payload {
            EstimatePayload::Separable(s) => Some(s),
            _ => None,
        }
    }

    pub fn tabular(&self) -> Option<&DVector<f64>> {
        match &self.payload {
            EstimatePayload::Tabular(v) => Some(v),
            _ => None,
        }
    }

    /// True when imputation was required somewhere in the fit.
    pub fn is_flagged(&self) -> bool {
        self.imputed_states > 0
    }
}
