//! Monte-Carlo experiment runner: replication management, MSE and ratio
//! estimation with confidence intervals, and CSV emission.
//!
//! Six experiments are built in, one per figure panel of the study design:
//! three MSE comparisons on linear systems (`fig1-*`), two ratio curves on
//! decoupled chains (`fig2-*`), and the diagonal-gap ratio curve (`fig3-ratio`).
//!
//! Replication `k` of every row simulates with seed `base_seed + k`; one
//! dataset feeds both estimators, so ratios compare like with like.
//! Replications run data-parallel (rayon, or sequentially without the
//! `parallel` feature) and are aggregated in replication order, so results are
//! identical for any thread count.

mod checks;
mod ci;
mod csv;

pub use checks::{
    check_diag_mse_agreement, check_general_mse_agreement, check_kron_cov_sampling,
    check_lifted_equivalence, check_lqr_value_oracle, check_ratio_identity_grid,
    check_tabular_value_oracle, check_thm3_equivalence, CheckOutcome,
};
pub use ci::{confidence_interval, ratio_of_means_ci, Ci};
pub use csv::{format_significant, write_csv, write_meta};

use nalgebra::{DMatrix, DVector};

use crate::asymptotics::dls_gap_ratio;
use crate::decoupled::{
    mse_uniform_separable, random_decoupled_instance, separable_value, simulate_decoupled,
    SeparableValue,
};
use crate::error::{Error, Result};
use crate::estimators::{
    lstd_linear, lstd_quadratic, lstd_separable, mb_decoupled, mb_linear, mb_lqr,
    DynamicsConstraint, ValueEstimate,
};
use crate::linalg::vec_mat;
use crate::linear::{
    lqr_value_matrix, random_stable_matrix, simulate_linear, true_beta, LinearSystem,
};
use crate::par::map_indexed;
use crate::seeding::RngSeed;
use rand::Rng;

/// The six built-in experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    /// General dynamics, quadratic rewards: LSTD vs structured plug-in MSE.
    Fig1Quad,
    /// General dynamics, linear rewards: LSTD vs unconstrained plug-in MSE.
    Fig1Lin,
    /// Diagonal dynamics, linear rewards: LSTD vs diagonal plug-in MSE.
    Fig1Diag,
    /// Decoupled chains, value error uniform over the product space (ratio).
    Fig2Offline,
    /// Decoupled chains, value error over the dataset states (ratio).
    Fig2Online,
    /// Scaled-identity system: LSTD/diagonal MSE ratio with its closed form.
    Fig3Ratio,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 6] = [
        ExperimentKind::Fig1Quad,
        ExperimentKind::Fig1Lin,
        ExperimentKind::Fig1Diag,
        ExperimentKind::Fig2Offline,
        ExperimentKind::Fig2Online,
        ExperimentKind::Fig3Ratio,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Fig1Quad => "fig1-quad",
            ExperimentKind::Fig1Lin => "fig1-lin",
            ExperimentKind::Fig1Diag => "fig1-diag",
            ExperimentKind::Fig2Offline => "fig2-offline",
            ExperimentKind::Fig2Online => "fig2-online",
            ExperimentKind::Fig3Ratio => "fig3-ratio",
        }
    }

    pub fn parse(name: &str) -> Option<ExperimentKind> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }

    /// Ratio experiments emit a ratio column set; the others emit two MSE
    /// column sets.
    pub fn is_ratio(self) -> bool {
        matches!(
            self,
            ExperimentKind::Fig2Offline | ExperimentKind::Fig2Online | ExperimentKind::Fig3Ratio
        )
    }

    fn instance_stream(self) -> u64 {
        match self {
            ExperimentKind::Fig1Quad => 1,
            ExperimentKind::Fig1Lin => 2,
            ExperimentKind::Fig1Diag => 3,
            // The two fig2 experiments share instances and data; only the
            // error metric differs.
            ExperimentKind::Fig2Offline | ExperimentKind::Fig2Online => 4,
            ExperimentKind::Fig3Ratio => 6,
        }
    }
}

/// Configuration of one experiment run.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    /// Dimensions (state dimension, or number of components for fig2).
    pub dims: Vec<usize>,
    /// Trajectory length per replication.
    pub n: usize,
    /// Replication count per dimension.
    pub reps: usize,
    pub gamma: f64,
    pub sigma: f64,
    /// Scaled-identity dynamics parameter (fig3).
    pub lambda: f64,
    /// States per component (fig2).
    pub states_per_component: usize,
    pub base_seed: u64,
}

impl ExperimentConfig {
    /// The defaults each experiment was designed around.
    pub fn defaults(kind: ExperimentKind) -> Self {
        let dims = match kind {
            ExperimentKind::Fig1Quad => vec![2, 5, 10, 15, 20],
            ExperimentKind::Fig1Lin | ExperimentKind::Fig1Diag | ExperimentKind::Fig3Ratio => {
                vec![5, 10, 20, 30, 40, 50]
            }
            ExperimentKind::Fig2Offline | ExperimentKind::Fig2Online => vec![10, 50, 100, 200],
        };
        let reps = match kind {
            ExperimentKind::Fig3Ratio => 100,
            _ => 80,
        };
        ExperimentConfig {
            kind,
            dims,
            n: 1000,
            reps,
            gamma: 0.9,
            sigma: 1.0,
            lambda: 0.9,
            states_per_component: 5,
            base_seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.reps < 2 {
            return Err(Error::InvalidArgument(
                "need at least 2 replications for confidence intervals".into(),
            ));
        }
        if self.dims.is_empty() || self.dims.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument(
                "dims must be nonempty and strictly increasing".into(),
            ));
        }
        if self.dims[0] == 0 {
            return Err(Error::InvalidArgument("dims must be positive".into()));
        }
        if self.n == 0 {
            return Err(Error::InvalidArgument("n must be positive".into()));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::InvalidArgument("gamma must lie in (0, 1)".into()));
        }
        if !(self.sigma > 0.0) {
            return Err(Error::InvalidArgument("sigma must be positive".into()));
        }
        if !(self.lambda > 0.0 && self.lambda < 1.0) {
            return Err(Error::InvalidArgument("lambda must lie in (0, 1)".into()));
        }
        if self.states_per_component < 2 {
            return Err(Error::InvalidArgument(
                "states per component must be >= 2".into(),
            ));
        }
        Ok(())
    }
}

/// Aggregated results for one dimension.
#[derive(Debug, Clone)]
pub struct ExperimentRow {
    pub d: usize,
    /// Model-free MSE with confidence interval (MSE experiments).
    pub mf: Option<Ci>,
    /// Model-based MSE with confidence interval (MSE experiments).
    pub mb: Option<Ci>,
    /// Model-free / model-based MSE ratio (ratio experiments).
    pub ratio: Option<Ci>,
    /// Closed-form limiting ratio where one exists (fig3).
    pub ratio_theoretical: Option<f64>,
    pub reps: usize,
    pub failures: usize,
}

impl ExperimentRow {
    /// A row with more than 10% failed replications is not trustworthy.
    pub fn is_valid(&self) -> bool {
        self.failures * 10 <= self.reps
    }
}

/// Per-replication squared errors of one row, in replication order with
/// failed replications dropped.
#[derive(Debug, Clone)]
pub struct RowSamples {
    pub mf: Vec<f64>,
    pub mb: Vec<f64>,
    pub failures: usize,
}

fn squared_distance(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).norm_squared()
}

/// Mean squared joint-value error over the current states of the dataset.
fn online_value_mse(
    estimate: &SeparableValue,
    truth: &SeparableValue,
    data: &crate::dataset::TransitionDataset,
) -> f64 {
    let mut acc = 0.0;
    for t in 0..data.len() {
        let s = data.tabular_state(t);
        let diff = estimate.eval(s) - truth.eval(s);
        acc += diff * diff;
    }
    acc / data.len() as f64
}

fn estimate_or_fail(est: Result<ValueEstimate>) -> Option<ValueEstimate> {
    match est {
        Ok(e) if !e.is_flagged() => Some(e),
        _ => None,
    }
}

/// Runs one row with explicit per-replication data seeds.
///
/// Fresh fig1 instances are derived from each replication's data seed, so
/// permuting the seed list permutes the per-replication records.
pub fn run_row_samples(
    cfg: &ExperimentConfig,
    d: usize,
    data_seeds: &[RngSeed],
) -> Result<RowSamples> {
    cfg.validate()?;
    let gamma = cfg.gamma;
    let sigma = cfg.sigma;
    let n = cfg.n;
    let stream = cfg.kind.instance_stream();

    let outcomes: Vec<Option<(f64, f64)>> = match cfg.kind {
        ExperimentKind::Fig1Quad => map_indexed(data_seeds.len(), |k| {
            let seed = data_seeds[k];
            let a = random_stable_matrix(d, 0.9, seed.derive(stream)).ok()?;
            let q = DMatrix::identity(d, d);
            let truth = vec_mat(&lqr_value_matrix(&a, &q, gamma).ok()?.p);
            let sys = LinearSystem::lqr(a, q, sigma, gamma).ok()?;
            let data = simulate_linear(&sys, n, seed).ok()?;
            let mf = estimate_or_fail(lstd_quadratic(&data, gamma))?;
            let mb = estimate_or_fail(mb_lqr(&data, gamma))?;
            Some((
                squared_distance(&vec_mat(mf.quadratic_matrix()?), &truth),
                squared_distance(&vec_mat(mb.quadratic_matrix()?), &truth),
            ))
        }),
        ExperimentKind::Fig1Lin => map_indexed(data_seeds.len(), |k| {
            let seed = data_seeds[k];
            let a = random_stable_matrix(d, 0.9, seed.derive(stream)).ok()?;
            let theta = DVector::from_element(d, 1.0);
            let truth = true_beta(&a, &theta, gamma).ok()?;
            let sys = LinearSystem::general(a, theta, sigma, gamma).ok()?;
            let data = simulate_linear(&sys, n, seed).ok()?;
            let mf = estimate_or_fail(lstd_linear(&data, gamma))?;
            let mb = estimate_or_fail(mb_linear(&data, gamma, DynamicsConstraint::Unconstrained))?;
            Some((
                squared_distance(mf.beta()?, &truth),
                squared_distance(mb.beta()?, &truth),
            ))
        }),
        ExperimentKind::Fig1Diag => map_indexed(data_seeds.len(), |k| {
            let seed = data_seeds[k];
            let mut rng = seed.derive(stream).rng();
            let a_diag = DVector::from_fn(d, |_, _| rng.random::<f64>() * 1.8 - 0.9);
            let theta = DVector::from_element(d, 1.0);
            let a = DMatrix::from_diagonal(&a_diag);
            let truth = true_beta(&a, &theta, gamma).ok()?;
            let sys = LinearSystem::diagonal(a_diag, theta, sigma, gamma).ok()?;
            let data = simulate_linear(&sys, n, seed).ok()?;
            let mf = estimate_or_fail(lstd_linear(&data, gamma))?;
            let mb = estimate_or_fail(mb_linear(&data, gamma, DynamicsConstraint::Diagonal))?;
            Some((
                squared_distance(mf.beta()?, &truth),
                squared_distance(mb.beta()?, &truth),
            ))
        }),
        ExperimentKind::Fig2Offline | ExperimentKind::Fig2Online => {
            // One instance per dimension, shared across replications.
            let inst_seed = RngSeed(cfg.base_seed).derive((stream << 32) | d as u64);
            let dmrp = random_decoupled_instance(d, cfg.states_per_component, gamma, inst_seed)?;
            let truth = separable_value(&dmrp)?;
            let dims = dmrp.dims();
            let online = cfg.kind == ExperimentKind::Fig2Online;
            map_indexed(data_seeds.len(), |k| {
                let data = simulate_decoupled(&dmrp, n, data_seeds[k]).ok()?;
                let mf = estimate_or_fail(lstd_separable(&data, &dims, gamma))?;
                let mb = estimate_or_fail(mb_decoupled(&data, &dims, gamma))?;
                let mf_sep = mf.separable()?;
                let mb_sep = mb.separable()?;
                if online {
                    Some((
                        online_value_mse(mf_sep, &truth, &data),
                        online_value_mse(mb_sep, &truth, &data),
                    ))
                } else {
                    Some((
                        mse_uniform_separable(&mf_sep.sub(&truth).ok()?),
                        mse_uniform_separable(&mb_sep.sub(&truth).ok()?),
                    ))
                }
            })
        }
        ExperimentKind::Fig3Ratio => {
            let a_diag = DVector::from_element(d, cfg.lambda);
            let theta = DVector::from_element(d, 1.0);
            let a = DMatrix::from_diagonal(&a_diag);
            let truth = true_beta(&a, &theta, gamma)?;
            map_indexed(data_seeds.len(), |k| {
                let sys =
                    LinearSystem::diagonal(a_diag.clone(), theta.clone(), sigma, gamma).ok()?;
                let data = simulate_linear(&sys, n, data_seeds[k]).ok()?;
                let mf = estimate_or_fail(lstd_linear(&data, gamma))?;
                let mb = estimate_or_fail(mb_linear(&data, gamma, DynamicsConstraint::Diagonal))?;
                Some((
                    squared_distance(mf.beta()?, &truth),
                    squared_distance(mb.beta()?, &truth),
                ))
            })
        }
    };

    let mut samples = RowSamples {
        mf: Vec::with_capacity(data_seeds.len()),
        mb: Vec::with_capacity(data_seeds.len()),
        failures: 0,
    };
    for outcome in outcomes {
        match outcome {
            Some((mf, mb)) => {
                samples.mf.push(mf);
                samples.mb.push(mb);
            }
            None => samples.failures += 1,
        }
    }
    Ok(samples)
}

fn aggregate_row(cfg: &ExperimentConfig, d: usize, samples: &RowSamples) -> Result<ExperimentRow> {
    let mut row = ExperimentRow {
        d,
        mf: None,
        mb: None,
        ratio: None,
        ratio_theoretical: None,
        reps: cfg.reps,
        failures: samples.failures,
    };
    if samples.mf.len() >= 2 {
        if cfg.kind.is_ratio() {
            row.ratio = Some(ratio_of_means_ci(&samples.mf, &samples.mb)?);
        } else {
            row.mf = Some(confidence_interval(&samples.mf)?);
            row.mb = Some(confidence_interval(&samples.mb)?);
        }
    }
    if cfg.kind == ExperimentKind::Fig3Ratio {
        row.ratio_theoretical = Some(dls_gap_ratio(d, cfg.lambda, cfg.gamma));
    }
    Ok(row)
}

/// Runs every dimension of the experiment; replication `k` uses seed
/// `base_seed + k`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<ExperimentRow>> {
    run_experiment_with_progress(cfg, |_, _| {})
}

/// [`run_experiment`] with a per-row callback (dimension, finished row).
pub fn run_experiment_with_progress(
    cfg: &ExperimentConfig,
    mut progress: impl FnMut(usize, &ExperimentRow),
) -> Result<Vec<ExperimentRow>> {
    cfg.validate()?;
    let seeds: Vec<RngSeed> = (0..cfg.reps as u64)
        .map(|k| RngSeed(cfg.base_seed).offset(k))
        .collect();
    let mut rows = Vec::with_capacity(cfg.dims.len());
    for &d in &cfg.dims {
        let samples = run_row_samples(cfg, d, &seeds)?;
        let row = aggregate_row(cfg, d, &samples)?;
        progress(d, &row);
        rows.push(row);
    }
    Ok(rows)
}
