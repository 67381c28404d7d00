//! Finite-state Markov reward processes: exact values, trajectory simulation,
//! and stationary distributions.
//!
//! Value convention, fixed repo-wide: the value of a state is the expected
//! discounted reward stream *after* leaving it,
//!
//! ```text
//! V(s) = E[ sum_{t>=1} gamma^t r(S_t) | S_0 = s ],
//! ```
//!
//! so `V` solves `(I - gamma P) V = gamma P r`. Rewards are state-indexed mean
//! rewards plus optional Gaussian noise; the reward recorded in a transition
//! triple is emitted at the triple's *current* state.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::dataset::TransitionDataset;
use crate::error::{Error, Result};
use crate::linalg::lu_solve;
use crate::seeding::RngSeed;

const ROW_SUM_TOL: f64 = 1e-12;

/// A finite MRP: row-stochastic transition matrix, state-indexed mean rewards,
/// and a discount factor strictly inside `(0, 1)`.
#[derive(Debug, Clone)]
pub struct TabularMRP {
    transition: DMatrix<f64>,
    mean_reward: DVector<f64>,
    gamma: f64,
}

impl TabularMRP {
    pub fn new(transition: DMatrix<f64>, mean_reward: DVector<f64>, gamma: f64) -> Result<Self> {
        if !transition.is_square() {
            return Err(Error::InvalidModel("transition matrix must be square".into()));
        }
        let s = transition.nrows();
        if s == 0 {
            return Err(Error::InvalidModel("state space must be nonempty".into()));
        }
        if mean_reward.len() != s {
            return Err(Error::InvalidModel(format!(
                "reward vector has {} entries for {} states",
                mean_reward.len(),
                s
            )));
        }
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::InvalidModel(format!(
                "discount factor must lie strictly in (0, 1), got {gamma}"
            )));
        }
        for i in 0..s {
            let mut sum = 0.0;
            for j in 0..s {
                let p = transition[(i, j)];
                if !(p >= 0.0) {
                    return Err(Error::InvalidModel(format!(
                        "negative or NaN transition probability at ({i}, {j})"
                    )));
                }
                sum += p;
            }
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::InvalidModel(format!(
                    "row {i} sums to {sum}, not 1"
                )));
            }
        }
        if mean_reward.iter().any(|r| !r.is_finite()) {
            return Err(Error::InvalidModel("non-finite mean reward".into()));
        }
        Ok(TabularMRP {
            transition,
            mean_reward,
            gamma,
        })
    }

    pub fn num_states(&self) -> usize {
        self.transition.nrows()
    }

    pub fn transition(&self) -> &DMatrix<f64> {
        &self.transition
    }

    pub fn mean_reward(&self) -> &DVector<f64> {
        &self.mean_reward
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }
}

/// Exact value vector: the unique solution of `(I - gamma P) V = gamma P r`.
pub fn exact_value(mrp: &TabularMRP) -> Result<DVector<f64>> {
    let s = mrp.num_states();
    let gp = mrp.gamma * &mrp.transition;
    let lhs = DMatrix::identity(s, s) - &gp;
    let rhs = &gp * &mrp.mean_reward;
    let v = lu_solve(&lhs, &rhs)?;
    let residual = (&lhs * &v - &rhs).amax();
    let bound = 1e-10 * (1.0 + mrp.mean_reward.amax());
    if residual > bound {
        return Err(Error::Numerical(format!(
            "value solve residual {residual:.3e} exceeds {bound:.3e}"
        )));
    }
    Ok(v)
}

/// Samples an index from a probability row via inverse CDF.
pub(crate) fn sample_categorical(row: &[f64], rng: &mut impl Rng) -> u32 {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (j, &p) in row.iter().enumerate() {
        acc += p;
        if u < acc {
            return j as u32;
        }
    }
    (row.len() - 1) as u32
}

/// Simulates one trajectory of `n` transitions from `start`.
///
/// The reward of triple `t` is `N(r(S_t), noise_sd^2)`; the next state of
/// triple `t` equals the state of triple `t + 1`.
pub fn simulate_trajectory(
    mrp: &TabularMRP,
    start: usize,
    n: usize,
    noise_sd: f64,
    seed: RngSeed,
) -> Result<TransitionDataset> {
    if n == 0 {
        return Err(Error::InvalidArgument("need at least one transition".into()));
    }
    if start >= mrp.num_states() {
        return Err(Error::InvalidArgument(format!(
            "start state {start} out of range (|S| = {})",
            mrp.num_states()
        )));
    }
    if !(noise_sd >= 0.0) {
        return Err(Error::InvalidArgument("noise_sd must be >= 0".into()));
    }
    let mut rng = seed.rng();
    let noise = Normal::new(0.0, noise_sd)
        .map_err(|e| Error::InvalidArgument(format!("bad noise scale: {e}")))?;
    let mut states = Vec::with_capacity(n);
    let mut rewards = Vec::with_capacity(n);
    let mut next_states = Vec::with_capacity(n);
    let mut s = start as u32;
    for _ in 0..n {
        let reward = mrp.mean_reward[s as usize] + noise.sample(&mut rng);
        let row = mrp.transition.row(s as usize);
        let next = sample_categorical(row.transpose().as_slice(), &mut rng);
        states.push(s);
        rewards.push(reward);
        next_states.push(next);
        s = next;
    }
    TransitionDataset::from_tabular(1, states, rewards, next_states)
}

/// Stationary distribution of a row-stochastic matrix by power iteration.
///
/// Starts from a deliberately non-uniform vector so periodic chains oscillate
/// instead of sitting on a spurious fixed point; non-convergence within the
/// iteration cap is reported as an error (reducible or periodic kernel).
pub fn stationary_distribution(p: &DMatrix<f64>) -> Result<DVector<f64>> {
    if !p.is_square() || p.nrows() == 0 {
        return Err(Error::InvalidArgument("kernel must be square and nonempty".into()));
    }
    let s = p.nrows();
    let norm: f64 = (s * (s + 1) / 2) as f64;
    let mut pi = DVector::from_fn(s, |i, _| (i + 1) as f64 / norm);
    const MAX_ITERS: usize = 100_000;
    const STEP_TOL: f64 = 1e-13;
    let mut step = f64::INFINITY;
    for _ in 0..MAX_ITERS {
        let next = p.tr_mul(&pi); // (piᵀ P)ᵀ
        step = (&next - &pi).abs().sum();
        pi = next;
        if step <= STEP_TOL {
            let residual = (p.tr_mul(&pi) - &pi).amax();
            if residual > 1e-10 {
                return Err(Error::Numerical(format!(
                    "stationary residual {residual:.3e} after convergence"
                )));
            }
            let total: f64 = pi.iter().sum();
            return Ok(pi / total);
        }
    }
    Err(Error::NoConvergence {
        iterations: MAX_ITERS,
        residual: step,
    })
}
