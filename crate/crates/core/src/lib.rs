//! Mini-batch stochastic iterative hard thresholding for sparse empirical
//! risk minimization, with numerical checks of its sampling identities and
//! descent inequalities.

pub mod error;
pub mod hardthreshold;
pub mod io;
pub mod objectives;
pub mod rng;
pub mod sampling;
pub mod solver;
pub mod suite;
pub mod synthetic;
pub mod types;
pub mod verify;

pub use error::{Result, SihtError};
pub use hardthreshold::{hard_threshold, top_support, TieRule};
pub use solver::{iht_run, run_ensemble, siht_run, siht_run_from, SolveResult, StopReason};
pub use types::{
    DenseVector, LossKind, ProblemInstance, SolverConfig, SparseIterate, SupportSet,
    TrajectoryRecord, TrajectoryRow,
};
