//! Linear-Gaussian dynamical systems with linear or quadratic rewards.
//!
//! Dynamics: `X_{t+1} = A X_t + eps_t`, `eps_t ~ N(0, sigma^2 I)`. Rewards are
//! emitted at the current state, `R_t = f(X_t) + eta_t` with `eta_t ~ N(0,
//! sigma^2)`; `f` is `x -> theta . x` for the linear kinds and `x -> x' Q x`
//! for the quadratic kind.
//!
//! The linear value parameter is `beta = (I - gamma A')^{-1} theta`; the
//! quadratic value matrix `P` solves the discounted Lyapunov equation
//! `gamma A' P A - P + Q = 0` and the value reads
//! `tr((x x' + gamma/(1-gamma) I) P)` (unit noise scale).

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};

use crate::dataset::TransitionDataset;
use crate::error::{Error, Result};
use crate::linalg::{kron, lu_solve, spectral_radius};
use crate::seeding::RngSeed;

/// The three model classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SystemKind {
    GeneralLinear,
    DiagonalLinear,
    Lqr,
}

/// Reward parameterization: a vector for linear rewards, a matrix (not
/// necessarily symmetric) for quadratic rewards.
#[derive(Debug, Clone)]
pub enum RewardParam {
    Linear(DVector<f64>),
    Quadratic(DMatrix<f64>),
}

/// A stable linear-Gaussian system with its reward model and discount.
#[derive(Debug, Clone)]
pub struct LinearSystem {
    a: DMatrix<f64>,
    reward: RewardParam,
    sigma: f64,
    gamma: f64,
    kind: SystemKind,
}

impl LinearSystem {
    /// General dynamics, linear rewards.
    pub fn general(a: DMatrix<f64>, theta: DVector<f64>, sigma: f64, gamma: f64) -> Result<Self> {
        Self::new(a, RewardParam::Linear(theta), sigma, gamma, SystemKind::GeneralLinear)
    }

    /// Diagonal dynamics (given by the diagonal entries), linear rewards.
    pub fn diagonal(
        a_diag: DVector<f64>,
        theta: DVector<f64>,
        sigma: f64,
        gamma: f64,
    ) -> Result<Self> {
        let a = DMatrix::from_diagonal(&a_diag);
        Self::new(a, RewardParam::Linear(theta), sigma, gamma, SystemKind::DiagonalLinear)
    }

    /// General dynamics, quadratic rewards.
    pub fn lqr(a: DMatrix<f64>, q: DMatrix<f64>, sigma: f64, gamma: f64) -> Result<Self> {
        Self::new(a, RewardParam::Quadratic(q), sigma, gamma, SystemKind::Lqr)
    }

    fn new(
        a: DMatrix<f64>,
        reward: RewardParam,
        sigma: f64,
        gamma: f64,
        kind: SystemKind,
    ) -> Result<Self> {
        if !a.is_square() || a.nrows() == 0 {
            return Err(Error::InvalidModel("dynamics matrix must be square".into()));
        }
        let d = a.nrows();
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::InvalidModel(format!(
                "discount factor must lie strictly in (0, 1), got {gamma}"
            )));
        }
        if !(sigma > 0.0) {
            return Err(Error::InvalidModel("noise scale must be > 0".into()));
        }
        let rho = spectral_radius(&a);
        if rho >= 1.0 {
            return Err(Error::InvalidModel(format!(
                "dynamics unstable: spectral radius {rho:.6}"
            )));
        }
        match (&reward, kind) {
            (RewardParam::Linear(theta), SystemKind::GeneralLinear | SystemKind::DiagonalLinear) => {
                if theta.len() != d {
                    return Err(Error::InvalidModel("theta dimension mismatch".into()));
                }
            }
            (RewardParam::Quadratic(q), SystemKind::Lqr) => {
                if q.nrows() != d || q.ncols() != d {
                    return Err(Error::InvalidModel("Q dimension mismatch".into()));
                }
            }
            _ => {
                return Err(Error::InvalidModel(
                    "reward parameterization does not match the system kind".into(),
                ))
            }
        }
        if kind == SystemKind::DiagonalLinear {
            for i in 0..d {
                for j in 0..d {
                    if i != j && a[(i, j)] != 0.0 {
                        return Err(Error::InvalidModel(
                            "diagonal kind requires a diagonal dynamics matrix".into(),
                        ));
                    }
                }
            }
        }
        Ok(LinearSystem {
            a,
            reward,
            sigma,
            gamma,
            kind,
        })
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn dynamics(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn reward(&self) -> &RewardParam {
        &self.reward
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn kind(&self) -> SystemKind {
        self.kind
    }

    fn reward_mean(&self, x: &DVector<f64>) -> f64 {
        match &self.reward {
            RewardParam::Linear(theta) => theta.dot(x),
            RewardParam::Quadratic(q) => (x.transpose() * q * x)[(0, 0)],
        }
    }
}

/// A quadratic value `x -> tr((x x' + gamma/(1-gamma) I) P)`.
#[derive(Debug, Clone)]
pub struct QuadraticValue {
    pub p: DMatrix<f64>,
    pub gamma: f64,
}

impl QuadraticValue {
    pub fn eval(&self, x: &DVector<f64>) -> f64 {
        let quad = (x.transpose() * &self.p * x)[(0, 0)];
        quad + self.gamma / (1.0 - self.gamma) * self.p.trace()
    }
}

/// Simulates one trajectory of `n` transitions, starting from the stationary
/// distribution `N(0, P_inf)`.
pub fn simulate_linear(sys: &LinearSystem, n: usize, seed: RngSeed) -> Result<TransitionDataset> {
    if n == 0 {
        return Err(Error::InvalidArgument("need at least one transition".into()));
    }
    let d = sys.dim();
    let p_inf = stationary_covariance(&sys.a, sys.sigma)?;
    let chol = p_inf
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Numerical("stationary covariance not positive definite".into()))?;
    let mut rng = seed.rng();
    let draw_standard = |rng: &mut rand_chacha::ChaCha8Rng, len: usize| {
        DVector::from_fn(len, |_, _| StandardNormal.sample(rng))
    };

    let mut x = chol.l() * draw_standard(&mut rng, d);
    let mut states = Vec::with_capacity(n * d);
    let mut rewards = Vec::with_capacity(n);
    let mut next_states = Vec::with_capacity(n * d);
    for _ in 0..n {
        let eta: f64 = StandardNormal.sample(&mut rng);
        let reward = sys.reward_mean(&x) + sys.sigma * eta;
        let next = &sys.a * &x + sys.sigma * draw_standard(&mut rng, d);
        states.extend_from_slice(x.as_slice());
        rewards.push(reward);
        next_states.extend_from_slice(next.as_slice());
        x = next;
    }
    TransitionDataset::from_real(d, states, rewards, next_states)
}

/// Linear value parameter: solves `(I - gamma A') beta = theta`.
pub fn true_beta(a: &DMatrix<f64>, theta: &DVector<f64>, gamma: f64) -> Result<DVector<f64>> {
    let d = a.nrows();
    if !a.is_square() || theta.len() != d {
        return Err(Error::InvalidArgument("dimension mismatch".into()));
    }
    let rho = gamma.sqrt() * spectral_radius(a);
    if rho >= 1.0 {
        return Err(Error::InvalidArgument(format!(
            "discounted dynamics not stable: sqrt(gamma)*rho(A) = {rho:.6}"
        )));
    }
    let lhs = DMatrix::identity(d, d) - gamma * a.transpose();
    let beta = lu_solve(&lhs, theta)?;
    let residual = (&lhs * &beta - theta).amax();
    if residual > 1e-12 * (1.0 + theta.amax()) {
        return Err(Error::Numerical(format!(
            "beta solve residual {residual:.3e}"
        )));
    }
    Ok(beta)
}

fn lyapunov_fixed_point(
    map: impl Fn(&DMatrix<f64>) -> DMatrix<f64>,
    init: DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    const MAX_ITERS: usize = 100_000;
    const TOL: f64 = 1e-14;
    let mut p = init;
    let mut step = f64::INFINITY;
    for _ in 0..MAX_ITERS {
        let next = map(&p);
        step = (&next - &p).amax();
        let scale = 1.0 + p.amax();
        p = next;
        if step <= TOL * scale {
            return Ok(p);
        }
    }
    Err(Error::NoConvergence {
        iterations: MAX_ITERS,
        residual: step,
    })
}

/// Stationary covariance of `X_{t+1} = A X_t + N(0, sigma^2 I)`: the solution
/// of `A P A' - P + sigma^2 I = 0`, computed by fixed-point iteration.
pub fn stationary_covariance(a: &DMatrix<f64>, sigma: f64) -> Result<DMatrix<f64>> {
    if !a.is_square() || a.nrows() == 0 {
        return Err(Error::InvalidArgument("dynamics matrix must be square".into()));
    }
    let d = a.nrows();
    let noise = DMatrix::identity(d, d) * (sigma * sigma);
    let p = lyapunov_fixed_point(|p| a * p * a.transpose() + &noise, noise.clone())?;
    // The iteration preserves symmetry; clean up the last few ulps anyway.
    let p = 0.5 * (&p + p.transpose());
    let residual = (a * &p * a.transpose() - &p + &noise).norm();
    let bound = 1e-10 * sigma * sigma * d as f64;
    if residual > bound {
        return Err(Error::Numerical(format!(
            "Lyapunov residual {residual:.3e} exceeds {bound:.3e}"
        )));
    }
    if p.clone().cholesky().is_none() {
        return Err(Error::Numerical(
            "stationary covariance not positive definite".into(),
        ));
    }
    Ok(p)
}

/// Quadratic value matrix: the solution of `gamma A' P A - P + Q = 0`.
pub fn lqr_value_matrix(a: &DMatrix<f64>, q: &DMatrix<f64>, gamma: f64) -> Result<QuadraticValue> {
    let d = a.nrows();
    if !a.is_square() || q.nrows() != d || q.ncols() != d {
        return Err(Error::InvalidArgument("dimension mismatch".into()));
    }
    let rho = gamma.sqrt() * spectral_radius(a);
    if rho >= 1.0 {
        return Err(Error::InvalidArgument(format!(
            "discounted dynamics not stable: sqrt(gamma)*rho(A) = {rho:.6}"
        )));
    }
    let p = lyapunov_fixed_point(|p| gamma * a.transpose() * p * a + q, q.clone())?;
    let residual = (gamma * a.transpose() * &p * a - &p + q).norm();
    let bound = 1e-10 * (1.0 + q.norm());
    if residual > bound {
        return Err(Error::Numerical(format!(
            "Lyapunov residual {residual:.3e} exceeds {bound:.3e}"
        )));
    }
    Ok(QuadraticValue { p, gamma })
}

/// Lift of one state: `vec(x x')` in the column-stacking convention.
pub fn lift_state(x: &[f64]) -> Vec<f64> {
    let d = x.len();
    let mut z = Vec::with_capacity(d * d);
    for j in 0..d {
        for i in 0..d {
            z.push(x[i] * x[j]);
        }
    }
    z
}

/// Replaces every real state by its `d^2`-dimensional lifted image; rewards
/// are unchanged. `x` and `-x` lift identically.
pub fn lift_dataset(data: &TransitionDataset) -> Result<TransitionDataset> {
    data.require_real()?;
    let d = data.dim();
    let n = data.len();
    let mut states = Vec::with_capacity(n * d * d);
    let mut next_states = Vec::with_capacity(n * d * d);
    for t in 0..n {
        states.extend_from_slice(&lift_state(data.real_state(t)));
        next_states.extend_from_slice(&lift_state(data.real_next(t)));
    }
    TransitionDataset::from_real(d * d, states, data.rewards().to_vec(), next_states)
}

/// Lifted dynamics `M = A ⊗ A`, satisfying `M vec(x x') = vec(A x x' A')`.
pub fn kron_dynamics(a: &DMatrix<f64>) -> DMatrix<f64> {
    kron(a, a)
}

/// Gaussian random matrix rescaled to a prescribed spectral radius.
pub fn random_stable_matrix(d: usize, target_radius: f64, seed: RngSeed) -> Result<DMatrix<f64>> {
    if d == 0 {
        return Err(Error::InvalidArgument("dimension must be >= 1".into()));
    }
    if !(target_radius > 0.0 && target_radius < 1.0) {
        return Err(Error::InvalidArgument(
            "target radius must lie strictly in (0, 1)".into(),
        ));
    }
    let mut rng = seed.rng();
    for _ in 0..64 {
        let g = DMatrix::from_fn(d, d, |_, _| StandardNormal.sample(&mut rng));
        let rho = spectral_radius(&g);
        if rho < 1e-9 {
            continue; // degenerate draw, resample
        }
        let mut a = g * (target_radius / rho);
        // One corrective rescale soaks up eigenvalue round-off.
        let rho_a = spectral_radius(&a);
        if rho_a > 0.0 {
            a *= target_radius / rho_a;
        }
        if (spectral_radius(&a) - target_radius).abs() <= 1e-8 {
            return Ok(a);
        }
    }
    Err(Error::Numerical(
        "could not scale a random matrix to the target spectral radius".into(),
    ))
}
