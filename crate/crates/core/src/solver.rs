//! Mini-batch stochastic iterative hard thresholding.
//!
//! Each iteration draws a fresh batch `B^k` of `S_B` samples uniformly without
//! replacement, forms the mini-batch gradient `G^k`, and projects:
//! `X^{k+1} = H_s(X^k − γ G^k)`. With `S_B = N` this is deterministic IHT.

use rayon::prelude::*;

use crate::error::{invalid, Result, SihtError};
use crate::hardthreshold::hard_threshold;
use crate::objectives::{minibatch_gradient, restricted_energies, value};
use crate::rng::substream;
use crate::sampling::{batch_size_lower_bound, draw_batch, BatchSample};
use crate::types::{ProblemInstance, SolverConfig, SparseIterate, TrajectoryRecord, TrajectoryRow};

/// Relative range of the windowed objective below which the run stops.
pub const F_TAIL_TOL: f64 = 1e-10;
/// Restricted gradient energy below which a stable support stops the run.
pub const GRAD_TOL: f64 = 1e-10;

/// Rounding allowance, relative to `1 + |f|`, when asserting that full-batch
/// objectives do not increase. Near a stationary point successive values
/// differ only in their last few bits.
pub const MONOTONE_SLACK: f64 = 1e-13;

/// Whether `current` exceeds `previous` by more than rounding.
pub fn increased(previous: f64, current: f64) -> bool {
    current > previous + MONOTONE_SLACK * (1.0 + previous.abs())
}

/// Label of the RNG sub-stream used for batch selection.
pub const BATCH_STREAM: &str = "siht/batches";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    MaxIters,
    FTailConverged,
    SupportStabilized,
}

impl StopReason {
    pub fn name(self) -> &'static str {
        match self {
            StopReason::MaxIters => "max_iters",
            StopReason::FTailConverged => "f_tail_converged",
            StopReason::SupportStabilized => "support_stabilized",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub final_iterate: SparseIterate,
    pub trajectory: TrajectoryRecord,
    pub stop_reason: StopReason,
}

/// Runs from the zero vector (support padded by the tie rule).
pub fn siht_run(inst: &ProblemInstance, config: &SolverConfig) -> Result<SolveResult> {
    let x0 = SparseIterate::zero(inst.dim(), config.sparsity, config.tie_rule)?;
    run(inst, config, x0, false)
}

pub fn siht_run_from(
    inst: &ProblemInstance,
    config: &SolverConfig,
    x0: SparseIterate,
) -> Result<SolveResult> {
    run(inst, config, x0, false)
}

/// Full-batch IHT. Fails with [`SihtError::MonotonicityViolation`] if the
/// objective ever increases, which signals an underestimated `L_s`.
pub fn iht_run(inst: &ProblemInstance, config: &SolverConfig) -> Result<SolveResult> {
    let x0 = SparseIterate::zero(inst.dim(), config.sparsity, config.tie_rule)?;
    iht_run_from(inst, config, x0)
}

pub fn iht_run_from(
    inst: &ProblemInstance,
    config: &SolverConfig,
    x0: SparseIterate,
) -> Result<SolveResult> {
    let config = SolverConfig {
        batch_size: inst.n_samples(),
        ..config.clone()
    };
    run(inst, &config, x0, true)
}

/// Runs [`siht_run`] once per seed, in parallel. Results are in seed order and
/// do not depend on the thread count.
pub fn run_ensemble(
    inst: &ProblemInstance,
    config: &SolverConfig,
    seeds: &[u64],
) -> Vec<Result<SolveResult>> {
    seeds
        .par_iter()
        .map(|&seed| {
            let cfg = SolverConfig {
                seed,
                ..config.clone()
            };
            siht_run(inst, &cfg)
        })
        .collect()
}

fn check_batch_admissible(inst: &ProblemInstance, config: &SolverConfig) -> Result<()> {
    let n_samples = inst.n_samples();
    if n_samples < 2 {
        return Ok(());
    }
    let bound = batch_size_lower_bound(
        n_samples,
        config.smoothness,
        config.gamma,
        config.c_constant,
    )?;
    if !bound.admits(config.batch_size) {
        return Err(invalid(format!(
            "batch size {} is below the descent bound {} (c = {})",
            config.batch_size, bound.min_batch, config.c_constant
        )));
    }
    Ok(())
}

fn make_row(
    inst: &ProblemInstance,
    k: usize,
    x: &SparseIterate,
    batch: Vec<usize>,
) -> Result<TrajectoryRow> {
    let objective = value(inst, x.vector())?;
    if !objective.is_finite() {
        return Err(SihtError::NonFiniteObjective { iteration: k });
    }
    let (_, grad_sq) = restricted_energies(inst, x.support(), x.vector())?;
    Ok(TrajectoryRow {
        k,
        objective,
        support: x.support().indices().to_vec(),
        values: x.support_values(),
        grad_norm_sq_restricted: grad_sq,
        batch,
    })
}

fn should_stop(rows: &[TrajectoryRow], window: usize, stable_for: usize) -> Option<StopReason> {
    if rows.len() < window {
        return None;
    }
    let last = rows.last()?;
    let tail = &rows[rows.len() - window..];
    let (lo, hi) = tail
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
            (lo.min(r.objective), hi.max(r.objective))
        });
    if hi - lo < F_TAIL_TOL * (1.0 + last.objective.abs()) {
        return Some(StopReason::FTailConverged);
    }
    if stable_for >= window && last.grad_norm_sq_restricted < GRAD_TOL {
        return Some(StopReason::SupportStabilized);
    }
    None
}

fn run(
    inst: &ProblemInstance,
    config: &SolverConfig,
    x0: SparseIterate,
    enforce_monotone: bool,
) -> Result<SolveResult> {
    config.validate(inst)?;
    check_batch_admissible(inst, config)?;
    if x0.dim() != inst.dim() {
        return Err(SihtError::DimensionMismatch {
            expected: inst.dim(),
            found: x0.dim(),
        });
    }
    if x0.support().len() > config.sparsity {
        return Err(invalid("initial point is not s-sparse"));
    }

    let n_samples = inst.n_samples();
    let mut rng = substream(config.seed, BATCH_STREAM);
    let mut x = x0;
    let mut rows = vec![make_row(inst, 0, &x, Vec::new())?];
    let mut stable_for = 0usize;
    let mut stop_reason = StopReason::MaxIters;

    for k in 1..=config.max_iters {
        let batch: BatchSample = draw_batch(n_samples, config.batch_size, &mut rng)?;
        let g = minibatch_gradient(inst, &batch, x.vector())?;
        let step: Vec<f64> = x
            .vector()
            .iter()
            .zip(g.iter())
            .map(|(xi, gi)| xi - config.gamma * gi)
            .collect();
        if step.iter().any(|v| !v.is_finite()) {
            return Err(SihtError::NonFiniteObjective { iteration: k });
        }
        let next = hard_threshold(&step, config.sparsity, config.tie_rule)?;
        let row = make_row(inst, k, &next, batch.indices().to_vec())?;

        let prev = rows.last().expect("trajectory starts with x0");
        assert!(next.vector().l0() <= config.sparsity, "iterate left C_s");
        if enforce_monotone && increased(prev.objective, row.objective) {
            return Err(SihtError::MonotonicityViolation {
                iteration: k,
                previous: prev.objective,
                current: row.objective,
            });
        }
        if row.support == prev.support {
            stable_for += 1;
        } else {
            stable_for = 0;
        }
        rows.push(row);
        x = next;

        if let Some(reason) = should_stop(&rows, config.window, stable_for) {
            stop_reason = reason;
            break;
        }
    }

    Ok(SolveResult {
        final_iterate: x,
        trajectory: TrajectoryRecord {
            seed: config.seed,
            dim: inst.dim(),
            rows,
        },
        stop_reason,
    })
}
