//! The transition dataset consumed by every estimator.
//!
//! A dataset is a sequence of `(state, reward, next_state)` triples. States are
//! either tabular index vectors (one index per component) or real vectors; all
//! triples in one dataset share the same kind and dimension. Storage is flat:
//! triple `t` owns `states[t*dim .. (t+1)*dim]`.

use crate::error::{Error, Result};

/// Tag for the two supported state representations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StateKind {
    /// Index vectors into finite per-component state spaces.
    TabularIndex,
    /// Vectors in `R^dim`.
    RealVector,
}

impl StateKind {
    pub fn label(self) -> &'static str {
        match self {
            StateKind::TabularIndex => "tabular-index",
            StateKind::RealVector => "real-vector",
        }
    }
}

#[derive(Debug, Clone)]
enum States {
    Tabular(Vec<u32>),
    Real(Vec<f64>),
}

/// A sequence of `(state, reward, next_state)` transitions.
#[derive(Debug, Clone)]
pub struct TransitionDataset {
    dim: usize,
    n: usize,
    states: States,
    rewards: Vec<f64>,
    next_states: States,
}

impl TransitionDataset {
    /// Builds a tabular-index dataset from flat index buffers.
    pub fn from_tabular(
        dim: usize,
        states: Vec<u32>,
        rewards: Vec<f64>,
        next_states: Vec<u32>,
    ) -> Result<Self> {
        let n = rewards.len();
        Self::validate_shape(dim, n, states.len(), next_states.len(), &rewards)?;
        Ok(TransitionDataset {
            dim,
            n,
            states: States::Tabular(states),
            rewards,
            next_states: States::Tabular(next_states),
        })
    }

    /// Builds a real-vector dataset from flat buffers.
    pub fn from_real(
        dim: usize,
        states: Vec<f64>,
        rewards: Vec<f64>,
        next_states: Vec<f64>,
    ) -> Result<Self> {
        let n = rewards.len();
        Self::validate_shape(dim, n, states.len(), next_states.len(), &rewards)?;
        if states.iter().chain(next_states.iter()).any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("non-finite state entry".into()));
        }
        Ok(TransitionDataset {
            dim,
            n,
            states: States::Real(states),
            rewards,
            next_states: States::Real(next_states),
        })
    }

    fn validate_shape(
        dim: usize,
        n: usize,
        state_len: usize,
        next_len: usize,
        rewards: &[f64],
    ) -> Result<()> {
        if n == 0 {
            return Err(Error::EmptyDataset);
        }
        if dim == 0 {
            return Err(Error::InvalidArgument("state dimension must be >= 1".into()));
        }
        if state_len != n * dim || next_len != n * dim {
            return Err(Error::InvalidArgument(format!(
                "state buffers have {state_len}/{next_len} entries, expected {}",
                n * dim
            )));
        }
        if rewards.iter().any(|r| !r.is_finite()) {
            return Err(Error::InvalidArgument("non-finite reward".into()));
        }
        Ok(())
    }

    pub fn kind(&self) -> StateKind {
        match self.states {
            States::Tabular(_) => StateKind::TabularIndex,
            States::Real(_) => StateKind::RealVector,
        }
    }

    /// Number of transitions.
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// State dimension (components for tabular, coordinates for real).
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn reward(&self, t: usize) -> f64 {
        self.rewards[t]
    }

    pub fn rewards(&self) -> &[f64] {
        &self.rewards
    }

    /// Errors unless the dataset holds tabular-index states.
    pub fn require_tabular(&self) -> Result<()> {
        match self.kind() {
            StateKind::TabularIndex => Ok(()),
            other => Err(Error::StateKindMismatch {
                expected: StateKind::TabularIndex.label(),
                got: other.label(),
            }),
        }
    }

    /// Errors unless the dataset holds real-vector states.
    pub fn require_real(&self) -> Result<()> {
        match self.kind() {
            StateKind::RealVector => Ok(()),
            other => Err(Error::StateKindMismatch {
                expected: StateKind::RealVector.label(),
                got: other.label(),
            }),
        }
    }

    /// Tabular state of triple `t`. Panics on real-vector datasets.
    pub fn tabular_state(&self, t: usize) -> &[u32] {
        match &self.states {
            States::Tabular(s) => &s[t * self.dim..(t + 1) * self.dim],
            States::Real(_) => panic!("tabular_state on a real-vector dataset"),
        }
    }

    /// Tabular next state of triple `t`. Panics on real-vector datasets.
    pub fn tabular_next(&self, t: usize) -> &[u32] {
        match &self.next_states {
            States::Tabular(s) => &s[t * self.dim..(t + 1) * self.dim],
            States::Real(_) => panic!("tabular_next on a real-vector dataset"),
        }
    }

    /// Real state of triple `t`. Panics on tabular datasets.
    pub fn real_state(&self, t: usize) -> &[f64] {
        match &self.states {
            States::Real(s) => &s[t * self.dim..(t + 1) * self.dim],
            States::Tabular(_) => panic!("real_state on a tabular dataset"),
        }
    }

    /// Real next state of triple `t`. Panics on tabular datasets.
    pub fn real_next(&self, t: usize) -> &[f64] {
        match &self.next_states {
            States::Real(s) => &s[t * self.dim..(t + 1) * self.dim],
            States::Tabular(_) => panic!("real_next on a tabular dataset"),
        }
    }

    /// Reorders the components of every tabular state by `perm`, where
    /// `perm[i]` is the source component placed at position `i`.
    pub fn permute_components(&self, perm: &[usize]) -> Result<Self> {
        self.require_tabular()?;
        if perm.len() != self.dim {
            return Err(Error::InvalidArgument("permutation length mismatch".into()));
        }
        let mut seen = vec![false; self.dim];
        for &p in perm {
            if p >= self.dim || seen[p] {
                return Err(Error::InvalidArgument("not a permutation".into()));
            }
            seen[p] = true;
        }
        let apply = |flat: &[u32]| -> Vec<u32> {
            let mut out = Vec::with_capacity(flat.len());
            for t in 0..self.n {
                let s = &flat[t * self.dim..(t + 1) * self.dim];
                out.extend(perm.iter().map(|&p| s[p]));
            }
            out
        };
        let (states, next_states) = match (&self.states, &self.next_states) {
            (States::Tabular(s), States::Tabular(sn)) => (apply(s), apply(sn)),
            _ => unreachable!(),
        };
        TransitionDataset::from_tabular(self.dim, states, self.rewards.clone(), next_states)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_empty() {
        let err = TransitionDataset::from_tabular(1, vec![], vec![], vec![]).unwrap_err();
        assert!(matches!(err, Error::EmptyDataset));
    }

    #[test]
    fn rejects_shape_mismatch() {
        let err =
            TransitionDataset::from_real(2, vec![0.0; 3], vec![0.0; 2], vec![0.0; 4]).unwrap_err();
        assert!(matches!(err, Error::InvalidArgument(_)));
    }

    #[test]
    fn kind_guards() {
        let d = TransitionDataset::from_tabular(1, vec![0], vec![1.0], vec![0]).unwrap();
        assert!(d.require_tabular().is_ok());
        assert!(matches!(
            d.require_real(),
            Err(Error::StateKindMismatch { .. })
        ));
    }

    #[test]
    fn permute_components_swaps() {
        let d =
            TransitionDataset::from_tabular(2, vec![0, 1, 2, 3], vec![0.5, 0.25], vec![4, 5, 6, 7])
                .unwrap();
        let p = d.permute_components(&[1, 0]).unwrap();
        assert_eq!(p.tabular_state(0), &[1, 0]);
        assert_eq!(p.tabular_state(1), &[3, 2]);
        assert_eq!(p.tabular_next(1), &[7, 6]);
        assert_eq!(p.reward(1), 0.25);
    }
}
