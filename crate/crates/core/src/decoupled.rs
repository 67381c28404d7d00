//! Product MRPs whose components evolve independently and whose reward is the
//! sum of per-component rewards, together with their separable value functions.
//!
//! Joint states are index vectors, one index per component. When a joint state
//! must be flattened to a single index (only for materialized product kernels),
//! component 0 is the most significant digit of the mixed-radix encoding.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::dataset::TransitionDataset;
use crate::error::{Error, Result};
use crate::linalg::{lu_solve, min_norm_solve};
use crate::mrp::{exact_value, sample_categorical, stationary_distribution, TabularMRP};
use crate::seeding::RngSeed;

/// Cap on the materialized product state space.
pub const PRODUCT_SPACE_CAP: u128 = 1_000_000;

/// An ordered list of component MRPs sharing one discount factor.
#[derive(Debug, Clone)]
pub struct DecoupledMRP {
    components: Vec<TabularMRP>,
}

impl DecoupledMRP {
    pub fn new(components: Vec<TabularMRP>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidModel("need at least one component".into()));
        }
        let gamma = components[0].gamma();
        for (i, c) in components.iter().enumerate() {
            if c.gamma() != gamma {
                return Err(Error::InvalidModel(format!(
                    "component {i} has discount {}, component 0 has {gamma}",
                    c.gamma()
                )));
            }
            if c.num_states() < 2 {
                return Err(Error::InvalidModel(format!(
                    "component {i} has fewer than 2 states"
                )));
            }
        }
        Ok(DecoupledMRP { components })
    }

    pub fn components(&self) -> &[TabularMRP] {
        &self.components
    }

    pub fn num_components(&self) -> usize {
        self.components.len()
    }

    pub fn gamma(&self) -> f64 {
        self.components[0].gamma()
    }

    /// Per-component state counts.
    pub fn dims(&self) -> Vec<usize> {
        self.components.iter().map(|c| c.num_states()).collect()
    }

    /// Product-space size, saturating at `u128` width.
    pub fn product_size(&self) -> u128 {
        self.components
            .iter()
            .fold(1u128, |acc, c| acc.saturating_mul(c.num_states() as u128))
    }
}

/// A separable joint value: one table per component, evaluated by summation.
#[derive(Debug, Clone)]
pub struct SeparableValue {
    tables: Vec<DVector<f64>>,
}

impl SeparableValue {
    pub fn new(tables: Vec<DVector<f64>>) -> Self {
        SeparableValue { tables }
    }

    pub fn tables(&self) -> &[DVector<f64>] {
        &self.tables
    }

    pub fn num_components(&self) -> usize {
        self.tables.len()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.tables.iter().map(|t| t.len()).collect()
    }

    /// Joint value at a component-index state; O(d), never touches the
    /// product space.
    pub fn eval(&self, state: &[u32]) -> f64 {
        debug_assert_eq!(state.len(), self.tables.len());
        self.tables
            .iter()
            .zip(state)
            .map(|(t, &s)| t[s as usize])
            .sum()
    }

    /// Table-wise difference `self - other` (same dims required).
    pub fn sub(&self, other: &SeparableValue) -> Result<SeparableValue> {
        if self.dims() != other.dims() {
            return Err(Error::InvalidArgument(
                "separable values have mismatched dims".into(),
            ));
        }
        Ok(SeparableValue::new(
            self.tables
                .iter()
                .zip(&other.tables)
                .map(|(a, b)| a - b)
                .collect(),
        ))
    }
}

/// Flattens a component-index state to its mixed-radix product index
/// (component 0 most significant).
pub fn joint_index(state: &[u32], dims: &[usize]) -> usize {
    debug_assert_eq!(state.len(), dims.len());
    let mut idx = 0usize;
    for (s, n) in state.iter().zip(dims) {
        idx = idx * n + *s as usize;
    }
    idx
}

/// Inverse of [`joint_index`].
pub fn joint_state(mut idx: usize, dims: &[usize]) -> Vec<u32> {
    let mut out = vec![0u32; dims.len()];
    for i in (0..dims.len()).rev() {
        out[i] = (idx % dims[i]) as u32;
        idx /= dims[i];
    }
    out
}

/// Materializes the product MRP: Kronecker-product kernel and summed rewards.
pub fn product_mrp(dmrp: &DecoupledMRP) -> Result<TabularMRP> {
    let size = dmrp.product_size();
    if size > PRODUCT_SPACE_CAP {
        return Err(Error::SizeGuardExceeded {
            size,
            cap: PRODUCT_SPACE_CAP,
        });
    }
    if dmrp.num_components() == 1 {
        return Ok(dmrp.components[0].clone());
    }
    let mut kernel = dmrp.components[0].transition().clone();
    for c in &dmrp.components[1..] {
        kernel = kernel.kronecker(c.transition());
    }
    let dims = dmrp.dims();
    let total = size as usize;
    let mut reward = DVector::zeros(total);
    for idx in 0..total {
        let s = joint_state(idx, &dims);
        reward[idx] = dmrp
            .components
            .iter()
            .zip(&s)
            .map(|(c, &si)| c.mean_reward()[si as usize])
            .sum();
    }
    TabularMRP::new(kernel, reward, dmrp.gamma())
}

/// Per-component exact values; their sum is the joint value at every state.
pub fn separable_value(dmrp: &DecoupledMRP) -> Result<SeparableValue> {
    let tables = dmrp
        .components
        .iter()
        .map(exact_value)
        .collect::<Result<Vec<_>>>()?;
    Ok(SeparableValue::new(tables))
}

/// Rewards making `v` the exact value of the MRP `(p, r, gamma)`.
///
/// Solves `gamma P r = (I - gamma P) v`; falls back to a minimum-norm solve
/// when `P` is singular, and always re-verifies through [`exact_value`].
pub fn reward_from_value(p: &DMatrix<f64>, v: &DVector<f64>, gamma: f64) -> Result<DVector<f64>> {
    if !p.is_square() || p.nrows() != v.len() {
        return Err(Error::InvalidArgument("kernel/value dimension mismatch".into()));
    }
    let s = p.nrows();
    let gp = gamma * p;
    let rhs = v - &gp * v;
    let r = match lu_solve(&gp, &rhs) {
        Ok(r) => r,
        Err(_) => min_norm_solve(&gp, &rhs)?.x,
    };
    let mrp = TabularMRP::new(p.clone(), r.clone(), gamma)?;
    let check = exact_value(&mrp)?;
    let err = (&check - v).amax();
    if err > 1e-9 * (1.0 + v.amax()) {
        return Err(Error::Numerical(format!(
            "constructed rewards reproduce the value only to {err:.3e} \
             (kernel does not realize this value exactly, size {s})"
        )));
    }
    Ok(r)
}

/// Simulates one joint trajectory: each component steps by its own kernel,
/// the reward is `N(sum_i r_i(s_i), 1)` at the current joint state.
///
/// Components start from their stationary distributions when the power
/// iteration converges, and uniformly at random otherwise (periodic kernels).
pub fn simulate_decoupled(dmrp: &DecoupledMRP, n: usize, seed: RngSeed) -> Result<TransitionDataset> {
    if n == 0 {
        return Err(Error::InvalidArgument("need at least one transition".into()));
    }
    let d = dmrp.num_components();
    let mut rng = seed.rng();
    let noise = Normal::new(0.0, 1.0).expect("unit normal");

    let mut current: Vec<u32> = Vec::with_capacity(d);
    for c in &dmrp.components {
        match stationary_distribution(c.transition()) {
            Ok(pi) => current.push(sample_categorical(pi.as_slice(), &mut rng)),
            Err(_) => current.push(rng.random_range(0..c.num_states()) as u32),
        }
    }

    let mut states = Vec::with_capacity(n * d);
    let mut rewards = Vec::with_capacity(n);
    let mut next_states = Vec::with_capacity(n * d);
    for _ in 0..n {
        let mean: f64 = dmrp
            .components
            .iter()
            .zip(&current)
            .map(|(c, &s)| c.mean_reward()[s as usize])
            .sum();
        let reward = mean + noise.sample(&mut rng);
        let mut next = Vec::with_capacity(d);
        for (c, &s) in dmrp.components.iter().zip(&current) {
            let row = c.transition().row(s as usize);
            next.push(sample_categorical(row.transpose().as_slice(), &mut rng));
        }
        states.extend_from_slice(&current);
        rewards.push(reward);
        next_states.extend_from_slice(&next);
        current = next;
    }
    TransitionDataset::from_tabular(d, states, rewards, next_states)
}

/// Mean squared value of a separable function under the uniform distribution
/// on the product space: `(sum_i mu_i)^2 + sum_i var_i`, evaluated per table.
pub fn mse_uniform_separable(delta: &SeparableValue) -> f64 {
    let mut mean_sum = 0.0;
    let mut var_sum = 0.0;
    for table in delta.tables() {
        let n = table.len() as f64;
        let mu = table.iter().sum::<f64>() / n;
        let var = table.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / n;
        mean_sum += mu;
        var_sum += var;
    }
    mean_sum * mean_sum + var_sum
}

/// Random decoupled instance: each kernel row is a normalized vector of
/// i.i.d. uniform(0,1) draws, mean rewards are i.i.d. uniform(0,1).
pub fn random_decoupled_instance(
    d: usize,
    states_per_component: usize,
    gamma: f64,
    seed: RngSeed,
) -> Result<DecoupledMRP> {
    if d == 0 || states_per_component < 2 {
        return Err(Error::InvalidArgument(
            "need d >= 1 components and >= 2 states each".into(),
        ));
    }
    let mut rng = seed.rng();
    let n = states_per_component;
    let mut components = Vec::with_capacity(d);
    for _ in 0..d {
        let mut p = DMatrix::from_fn(n, n, |_, _| rng.random::<f64>());
        for i in 0..n {
            let sum: f64 = p.row(i).sum();
            for j in 0..n {
                p[(i, j)] /= sum;
            }
        }
        let r = DVector::from_fn(n, |_, _| rng.random::<f64>());
        components.push(TabularMRP::new(p, r, gamma)?);
    }
    DecoupledMRP::new(components)
}
