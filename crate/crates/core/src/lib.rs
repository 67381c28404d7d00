//! Policy evaluation for Markov reward processes: exact solvers, simulators,
//! model-free (LSTD) and model-based plug-in estimators over tabular,
//! separable, linear, and quadratic value classes, closed-form asymptotic
//! mean-squared-error formulas, and a Monte-Carlo experiment harness.

pub mod asymptotics;
pub mod dataset;
pub mod dataset_io;
pub mod decoupled;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod linalg;
pub mod linear;
pub mod mrp;
pub mod par;
pub mod seeding;

pub use dataset::{StateKind, TransitionDataset};
pub use error::{Error, Result};
pub use seeding::RngSeed;
