//! Numerical checks of the sampling identities and descent inequalities.
//!
//! Each check returns a [`CheckReport`] with both sides of the relation, the
//! gap that was compared against the tolerance, and how the expectation was
//! computed. Expectations over batches are exact enumerations when
//! `C(N, S_B)` is under the cap, and Monte Carlo averages with a `3·stderr`
//! allowance otherwise.

use std::fmt::Write as _;

use rand::Rng;

use crate::error::{invalid, Result, SihtError};
use crate::hardthreshold::{hard_threshold, TieRule};
use crate::io::fmt_f64;
use crate::objectives::{
    full_gradient, gradient_matrix, minibatch_gradient, restricted_energies, sample_value, value,
    GradientMatrix,
};
use crate::rng::substream;
use crate::sampling::{
    batch_iter, batch_size_lower_bound, binomial, descent_coefficient, draw_batch,
    inclusion_covariance, scaled_descent_coefficient, BatchSample, DEFAULT_ENUMERATION_CAP,
};
use crate::types::{ProblemInstance, SolverConfig, SparseIterate, TrajectoryRecord};

/// Relative tolerance for algebraic identities.
pub const IDENTITY_REL_TOL: f64 = 1e-10;
/// Relative tolerance (against `1 + |f(x)|`) for exactly evaluated inequalities.
pub const INEQUALITY_REL_TOL: f64 = 1e-10;
/// Floating-point floor added to Monte Carlo allowances, relative to `1 + |f|`.
pub const MC_ROUNDING_FLOOR: f64 = 1e-12;
/// Relative tolerance of the finite-difference gradient check.
pub const FD_REL_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckStatus {
    ExactPass,
    McPass,
    Fail,
}

impl CheckStatus {
    pub fn name(self) -> &'static str {
        match self {
            CheckStatus::ExactPass => "exact_pass",
            CheckStatus::McPass => "mc_pass",
            CheckStatus::Fail => "fail",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub name: String,
    pub status: CheckStatus,
    pub lhs: f64,
    pub rhs: f64,
    /// Quantity compared against `tolerance`; the check passes iff `gap ≤ tolerance`.
    pub gap: f64,
    pub tolerance: f64,
    /// Batches enumerated, draws taken, or cases swept.
    pub trials: u64,
    pub seed: Option<u64>,
    pub diagnostics: Vec<(String, f64)>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.status != CheckStatus::Fail
    }

    pub fn diagnostic(&self, key: &str) -> Option<f64> {
        self.diagnostics
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| *v)
    }

    fn with(mut self, key: &str, v: f64) -> Self {
        self.diagnostics.push((key.to_string(), v));
        self
    }
}

fn status(pass: bool, exact: bool) -> CheckStatus {
    match (pass, exact) {
        (false, _) => CheckStatus::Fail,
        (true, true) => CheckStatus::ExactPass,
        (true, false) => CheckStatus::McPass,
    }
}

pub const REPORT_HEADER: &str = "name,status,lhs,rhs,gap,tol,trials,seed";

pub fn report_csv(reports: &[CheckReport]) -> String {
    let mut out = format!("{REPORT_HEADER}\n");
    for r in reports {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.name,
            r.status.name(),
            fmt_f64(r.lhs),
            fmt_f64(r.rhs),
            fmt_f64(r.gap),
            fmt_f64(r.tolerance),
            r.trials,
            r.seed.map(|s| s.to_string()).unwrap_or_default()
        );
    }
    out
}

fn norm_sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

fn identity_scale(g: &GradientMatrix) -> f64 {
    g.columns().iter().map(|v| v * v).sum::<f64>() / g.count() as f64
}

/// `E‖G(B)‖²` by enumeration against `(1/S_B²) trace(GᵀG Cov(z)) + ‖ḡ‖²`.
///
/// The tolerance is relative to the larger of the two sides and the mean
/// per-sample energy `(1/N) Σ ‖g⁽ⁱ⁾‖²`, so cancellation to zero is judged at
/// the scale of the data.
pub fn check_sample_average_identity(
    g: &GradientMatrix,
    batch_size: usize,
    cap: u128,
) -> Result<CheckReport> {
    let n_samples = g.count();
    let cov = inclusion_covariance(n_samples, batch_size)?;
    let mut total = 0.0;
    let mut count = 0u64;
    for b in batch_iter(n_samples, batch_size, cap)? {
        total += norm_sq(&g.batch_mean(b.indices()));
        count += 1;
    }
    let lhs = total / count as f64;
    let gram = g.columns().tr_mul(g.columns());
    let trace: f64 = gram.iter().zip(cov.iter()).map(|(a, b)| a * b).sum();
    let rhs = trace / (batch_size * batch_size) as f64 + norm_sq(g.mean());
    let gap = (lhs - rhs).abs();
    let tolerance = IDENTITY_REL_TOL * lhs.abs().max(rhs.abs()).max(identity_scale(g));
    Ok(CheckReport {
        name: "sample_average_identity".into(),
        status: status(gap <= tolerance, true),
        lhs,
        rhs,
        gap,
        tolerance,
        trials: count,
        seed: None,
        diagnostics: vec![("trace_term".into(), trace)],
    })
}

/// Three-way agreement of the mini-batch deviation `E‖G(B) − ḡ‖²`:
/// enumeration, `((N−S)/(S N (N−1)))(Σ‖g⁽ⁱ⁾‖² − N‖ḡ‖²)`, and
/// `((N−S)/(S N)) (1/(N−1)) Σ‖g⁽ⁱ⁾ − ḡ‖²`.
pub fn check_distance_identity(
    g: &GradientMatrix,
    batch_size: usize,
    cap: u128,
) -> Result<CheckReport> {
    let n_samples = g.count();
    if n_samples < 2 {
        return Err(invalid("distance identity needs N >= 2"));
    }
    let mean = g.mean();
    let mut total = 0.0;
    let mut count = 0u64;
    for b in batch_iter(n_samples, batch_size, cap)? {
        let d: Vec<f64> = g
            .batch_mean(b.indices())
            .iter()
            .zip(mean)
            .map(|(a, m)| a - m)
            .collect();
        total += norm_sq(&d);
        count += 1;
    }
    let enumerated = total / count as f64;

    let n = n_samples as f64;
    let s = batch_size as f64;
    let cols = g.columns();
    let sum_sq: f64 = cols.iter().map(|v| v * v).sum();
    let first = (n - s) / (s * n * (n - 1.0)) * (sum_sq - n * norm_sq(mean));
    let spread: f64 = cols
        .column_iter()
        .map(|c| {
            c.iter()
                .zip(mean)
                .map(|(a, m)| (a - m) * (a - m))
                .sum::<f64>()
        })
        .sum();
    let second = (n - s) / (s * n) * spread / (n - 1.0);

    let gap = (enumerated - first)
        .abs()
        .max((enumerated - second).abs())
        .max((first - second).abs());
    let tolerance = IDENTITY_REL_TOL
        * enumerated
            .abs()
            .max(first.abs())
            .max(second.abs())
            .max(identity_scale(g));
    Ok(CheckReport {
        name: "distance_identity".into(),
        status: status(gap <= tolerance, true),
        lhs: enumerated,
        rhs: first,
        gap,
        tolerance,
        trials: count,
        seed: None,
        diagnostics: vec![("closed_form_centered".into(), second)],
    })
}

fn check_step(smoothness: f64, gamma: f64, strict: bool) -> Result<()> {
    if !(smoothness > 0.0 && smoothness.is_finite()) {
        return Err(invalid("smoothness modulus must be positive and finite"));
    }
    let lg = smoothness * gamma;
    let ok = gamma > 0.0 && if strict { lg < 1.0 } else { lg <= 1.0 };
    if !ok {
        return Err(invalid(format!(
            "step size {gamma} is out of range for L_s = {smoothness}"
        )));
    }
    Ok(())
}

fn sparsity_of(inst: &ProblemInstance, x: &SparseIterate) -> Result<usize> {
    if x.dim() != inst.dim() {
        return Err(SihtError::DimensionMismatch {
            expected: inst.dim(),
            found: x.dim(),
        });
    }
    let s = x.support().len();
    if s == 0 || s >= inst.dim() {
        return Err(invalid("x must carry a support of size 1 <= s < n"));
    }
    Ok(s)
}

/// Single-step inequality for an arbitrary direction `g`:
///
/// `f(y) ≤ f(x) − (γ/2)(1−Lγ)‖g_{Iy}‖² − (γ/2)‖g_{Ix}‖² + γ⟨δ_{Iy}, g_{Iy}⟩ + γ⟨δ_D, x_D⟩`
///
/// with `y = H_s(x − γg)`, `δ = g − ∇f(x)`, `I = Ix ∪ Iy`, `D = I \ Iy`.
/// The right side with `g_D` in place of `x_D` and the right side with the
/// last term unscaled by `γ` are reported as diagnostics.
pub fn check_descent_lemma(
    inst: &ProblemInstance,
    x: &SparseIterate,
    g: &[f64],
    gamma: f64,
    smoothness: f64,
    rule: TieRule,
) -> Result<CheckReport> {
    check_step(smoothness, gamma, false)?;
    let s = sparsity_of(inst, x)?;
    if g.len() != inst.dim() {
        return Err(SihtError::DimensionMismatch {
            expected: inst.dim(),
            found: g.len(),
        });
    }
    let xv = x.vector();
    let step: Vec<f64> = xv.iter().zip(g).map(|(a, b)| a - gamma * b).collect();
    let y = hard_threshold(&step, s, rule)?;
    let grad = full_gradient(inst, xv)?;
    let delta: Vec<f64> = g.iter().zip(grad.iter()).map(|(a, b)| a - b).collect();

    let ix = x.support();
    let iy = y.support();
    let d = ix.union(iy).difference(iy);

    let fx = value(inst, xv)?;
    let lhs = value(inst, y.vector())?;
    let base = fx
        - 0.5 * gamma * (1.0 - smoothness * gamma) * iy.norm_sq_on(g)
        - 0.5 * gamma * ix.norm_sq_on(g)
        + gamma * iy.dot_on(&delta, g);
    let delta_x = d.dot_on(&delta, xv);
    let rhs = base + gamma * delta_x;
    let gap = lhs - rhs;
    let tolerance = INEQUALITY_REL_TOL * (1.0 + fx.abs());
    Ok(CheckReport {
        name: "descent_lemma".into(),
        status: status(gap <= tolerance, true),
        lhs,
        rhs,
        gap,
        tolerance,
        trials: 1,
        seed: None,
        diagnostics: vec![
            ("rhs_g_variant".into(), base + gamma * d.dot_on(&delta, g)),
            ("rhs_unscaled_x_variant".into(), base + delta_x),
            ("f_x".into(), fx),
        ],
    })
}

/// How batch expectations are evaluated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpectationSettings {
    pub tie_rule: TieRule,
    /// Exact enumeration is used iff `C(N, S_B)` is at most this.
    pub enumeration_cap: u128,
    /// Draws for the Monte Carlo fallback.
    pub mc_draws: usize,
    pub seed: u64,
}

impl Default for ExpectationSettings {
    fn default() -> Self {
        Self {
            tie_rule: TieRule::LowestIndex,
            enumeration_cap: DEFAULT_ENUMERATION_CAP,
            mc_draws: 10_000,
            seed: 0,
        }
    }
}

/// `Y(B) = H_s(x − γ G(x, B))`.
pub fn step_image(
    inst: &ProblemInstance,
    x: &SparseIterate,
    gamma: f64,
    rule: TieRule,
    batch: &BatchSample,
) -> Result<SparseIterate> {
    let g = minibatch_gradient(inst, batch, x.vector())?;
    let step: Vec<f64> = x
        .vector()
        .iter()
        .zip(g.iter())
        .map(|(a, b)| a - gamma * b)
        .collect();
    hard_threshold(&step, x.support().len(), rule)
}

/// Mean of `f(Y(B))` over the batch distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatchExpectation {
    pub mean: f64,
    /// Zero in exact mode.
    pub stderr: f64,
    pub trials: u64,
    pub exact: bool,
}

/// `E_B[f(Y(B))]`, enumerated when `C(N, S_B) ≤ cap`, otherwise sampled with
/// the given RNG.
pub fn expected_next_value<R: Rng + ?Sized>(
    inst: &ProblemInstance,
    x: &SparseIterate,
    gamma: f64,
    batch_size: usize,
    settings: &ExpectationSettings,
    rng: &mut R,
) -> Result<BatchExpectation> {
    let n_samples = inst.n_samples();
    if binomial(n_samples, batch_size) <= settings.enumeration_cap {
        let mut total = 0.0;
        let mut count = 0u64;
        for b in batch_iter(n_samples, batch_size, settings.enumeration_cap)? {
            let y = step_image(inst, x, gamma, settings.tie_rule, &b)?;
            total += value(inst, y.vector())?;
            count += 1;
        }
        return Ok(BatchExpectation {
            mean: total / count as f64,
            stderr: 0.0,
            trials: count,
            exact: true,
        });
    }
    if settings.mc_draws < 2 {
        return Err(invalid("Monte Carlo mode needs at least two draws"));
    }
    // Welford running moments.
    let (mut mean, mut m2) = (0.0f64, 0.0f64);
    for k in 0..settings.mc_draws {
        let b = draw_batch(n_samples, batch_size, rng)?;
        let y = step_image(inst, x, gamma, settings.tie_rule, &b)?;
        let v = value(inst, y.vector())?;
        let d = v - mean;
        mean += d / (k + 1) as f64;
        m2 += d * (v - mean);
    }
    let draws = settings.mc_draws as f64;
    let var = m2 / (draws - 1.0);
    Ok(BatchExpectation {
        mean,
        stderr: (var / draws).sqrt(),
        trials: settings.mc_draws as u64,
        exact: false,
    })
}

fn require_admissible(
    inst: &ProblemInstance,
    smoothness: f64,
    gamma: f64,
    batch_size: usize,
    c: f64,
) -> Result<Option<crate::sampling::BatchSizeBound>> {
    if inst.n_samples() < 2 {
        return Ok(None);
    }
    let bound = batch_size_lower_bound(inst.n_samples(), smoothness, gamma, c)?;
    if !bound.admits(batch_size) {
        return Err(invalid(format!(
            "batch size {batch_size} is below the descent bound {} (c = {c})",
            bound.min_batch
        )));
    }
    Ok(Some(bound))
}

/// `E_B[f(Y(B)) | x] ≤ f(x) − (γ/2)‖∇_{Ix} f(x)‖²`.
#[allow(clippy::too_many_arguments)]
pub fn check_expected_descent(
    inst: &ProblemInstance,
    x: &SparseIterate,
    gamma: f64,
    smoothness: f64,
    batch_size: usize,
    c: f64,
    settings: &ExpectationSettings,
) -> Result<CheckReport> {
    check_step(smoothness, gamma, true)?;
    sparsity_of(inst, x)?;
    let bound = require_admissible(inst, smoothness, gamma, batch_size, c)?;
    let fx = value(inst, x.vector())?;
    let (_, grad_sq) = restricted_energies(inst, x.support(), x.vector())?;
    let rhs = fx - 0.5 * gamma * grad_sq;

    let mut rng = substream(settings.seed, "siht/verify/expected_descent");
    let e = expected_next_value(inst, x, gamma, batch_size, settings, &mut rng)?;
    let floor = if e.exact {
        INEQUALITY_REL_TOL
    } else {
        MC_ROUNDING_FLOOR
    };
    let tolerance = 3.0 * e.stderr + floor * (1.0 + fx.abs());
    let gap = e.mean - rhs;
    let mut report = CheckReport {
        name: "expected_descent".into(),
        status: status(gap <= tolerance, e.exact),
        lhs: e.mean,
        rhs,
        gap,
        tolerance,
        trials: e.trials,
        seed: (!e.exact).then_some(settings.seed),
        diagnostics: vec![("f_x".into(), fx), ("stderr".into(), e.stderr)],
    };
    if let Some(b) = bound {
        report = report.with("min_batch", b.min_batch as f64);
    }
    Ok(report)
}

/// Margin inequality with the sampling-variance term, by full enumeration:
///
/// `E f(Y(B)) ≤ f(x) − (γ/2)‖∇_{Ix} f(x)‖² − (γ/2)(1+Lγ) ζ κ E‖∇_{I_{Y(B)}} f(x)‖²`
///
/// with `κ = 1 − c/N + ((1−Lγ)/(1+Lγ))/ζ`, plus the side condition `κ ≥ 0`.
/// The product `ζκ` is evaluated in the form `ζ(1 − c/N) + (1−Lγ)/(1+Lγ)`,
/// which is finite at `ζ = 0`, so the full batch is accepted.
#[allow(clippy::too_many_arguments)]
pub fn check_variance_margin(
    inst: &ProblemInstance,
    x: &SparseIterate,
    gamma: f64,
    smoothness: f64,
    batch_size: usize,
    c: f64,
    settings: &ExpectationSettings,
) -> Result<CheckReport> {
    check_step(smoothness, gamma, true)?;
    sparsity_of(inst, x)?;
    let n_samples = inst.n_samples();
    let lg = smoothness * gamma;
    let coefficient = descent_coefficient(n_samples, batch_size, lg, c)?;
    let scaled = scaled_descent_coefficient(n_samples, batch_size, lg, c)?;

    let fx = value(inst, x.vector())?;
    let grad = full_gradient(inst, x.vector())?;
    let grad_sq_x = x.support().norm_sq_on(&grad);

    let mut f_total = 0.0;
    let mut g_total = 0.0;
    let mut count = 0u64;
    for b in batch_iter(n_samples, batch_size, settings.enumeration_cap)? {
        let y = step_image(inst, x, gamma, settings.tie_rule, &b)?;
        f_total += value(inst, y.vector())?;
        g_total += y.support().norm_sq_on(&grad);
        count += 1;
    }
    let lhs = f_total / count as f64;
    let expected_grad_sq = g_total / count as f64;
    let rhs = fx - 0.5 * gamma * grad_sq_x - 0.5 * gamma * (1.0 + lg) * scaled * expected_grad_sq;
    let gap = lhs - rhs;
    let tolerance = INEQUALITY_REL_TOL * (1.0 + fx.abs());
    let side_ok = coefficient >= -1e-12;
    Ok(CheckReport {
        name: "variance_margin".into(),
        status: status(gap <= tolerance && side_ok, true),
        lhs,
        rhs,
        gap,
        tolerance,
        trials: count,
        seed: None,
        diagnostics: vec![
            ("coefficient".into(), coefficient),
            ("scaled_coefficient".into(), scaled),
            ("expected_restricted_grad_sq".into(), expected_grad_sq),
            ("f_x".into(), fx),
        ],
    })
}

/// `max_{k ≥ K} |f_k − f_K|` over the recorded tail, with
/// `K = len − 1 − min(window, ⌊(len − 1)/2⌋)`: the last `window + 1` values,
/// or the last half of a run that stopped before reaching `2·window`
/// iterations. `None` for a run with no iterations.
pub fn tail_oscillation(f: &[f64], window: usize) -> Option<f64> {
    if f.len() < 2 {
        return None;
    }
    let span = window.min((f.len() - 1) / 2);
    let start = f.len() - 1 - span;
    let anchor = f[start];
    Some(
        f[start..]
            .iter()
            .map(|v| (v - anchor).abs())
            .fold(0.0, f64::max),
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupermartingaleSettings {
    /// Iterates of the reference trajectory at which the conditional mean is checked.
    pub sampled_iterates: usize,
    pub expectation: ExpectationSettings,
    pub tail_window: usize,
    pub tail_tol: f64,
    pub min_trajectories: usize,
}

impl Default for SupermartingaleSettings {
    fn default() -> Self {
        Self {
            sampled_iterates: 10,
            expectation: ExpectationSettings::default(),
            tail_window: SolverConfig::DEFAULT_WINDOW,
            tail_tol: 1e-6,
            min_trajectories: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SupermartingaleOutcome {
    /// Aggregate of `per_iterate`: passes iff every sampled iterate passes.
    pub conditional: CheckReport,
    pub per_iterate: Vec<CheckReport>,
    /// Passes iff every trajectory meets the tail criterion.
    pub tail: CheckReport,
    /// Per trajectory; `INFINITY` for a run with no iterations.
    pub oscillations: Vec<f64>,
}

impl SupermartingaleOutcome {
    pub fn tail_passes(&self, tol: f64) -> usize {
        self.oscillations.iter().filter(|&&o| o <= tol).count()
    }
}

/// (a) `E[f(X^{k+1}) | X^k] ≤ f(X^k)` at evenly spaced iterates of the first
/// trajectory; (b) the tail criterion on every trajectory.
pub fn check_supermartingale(
    inst: &ProblemInstance,
    config: &SolverConfig,
    trajectories: &[TrajectoryRecord],
    settings: &SupermartingaleSettings,
) -> Result<SupermartingaleOutcome> {
    if trajectories.len() < settings.min_trajectories {
        return Err(invalid(format!(
            "need at least {} trajectories, got {}",
            settings.min_trajectories,
            trajectories.len()
        )));
    }
    if settings.sampled_iterates == 0 {
        return Err(invalid("at least one iterate must be sampled"));
    }
    let reference = &trajectories[0];
    let last = reference.rows.len() - 1;
    let m = settings.sampled_iterates;
    let mut ks: Vec<usize> = (0..m)
        .map(|j| if m == 1 { 0 } else { j * last / (m - 1) })
        .collect();
    ks.dedup();

    let expectation = ExpectationSettings {
        tie_rule: config.tie_rule,
        ..settings.expectation
    };
    let mut per_iterate = Vec::with_capacity(ks.len());
    for &k in &ks {
        let x = reference.iterate(k)?;
        let fk = reference.rows[k].objective;
        let label = format!("siht/verify/supermartingale/{k}");
        let mut rng = substream(expectation.seed, &label);
        let e = expected_next_value(
            inst,
            &x,
            config.gamma,
            config.batch_size,
            &expectation,
            &mut rng,
        )?;
        let floor = if e.exact {
            INEQUALITY_REL_TOL
        } else {
            MC_ROUNDING_FLOOR
        };
        let tolerance = 3.0 * e.stderr + floor * (1.0 + fk.abs());
        let gap = e.mean - fk;
        per_iterate.push(CheckReport {
            name: format!("supermartingale_k{k}"),
            status: status(gap <= tolerance, e.exact),
            lhs: e.mean,
            rhs: fk,
            gap,
            tolerance,
            trials: e.trials,
            seed: (!e.exact).then_some(expectation.seed),
            diagnostics: vec![("k".into(), k as f64), ("stderr".into(), e.stderr)],
        });
    }
    let worst = per_iterate
        .iter()
        .max_by(|a, b| (a.gap - a.tolerance).total_cmp(&(b.gap - b.tolerance)))
        .expect("at least one iterate");
    let all_ok = per_iterate.iter().all(CheckReport::passed);
    let all_exact = per_iterate
        .iter()
        .all(|r| r.status == CheckStatus::ExactPass);
    let conditional = CheckReport {
        name: "supermartingale_conditional".into(),
        status: status(all_ok, all_exact),
        lhs: worst.lhs,
        rhs: worst.rhs,
        gap: worst.gap,
        tolerance: worst.tolerance,
        trials: per_iterate.iter().map(|r| r.trials).sum(),
        seed: worst.seed,
        diagnostics: vec![("iterates".into(), per_iterate.len() as f64)],
    };

    let oscillations: Vec<f64> = trajectories
        .iter()
        .map(|t| {
            let f: Vec<f64> = t.objectives().collect();
            tail_oscillation(&f, settings.tail_window).unwrap_or(f64::INFINITY)
        })
        .collect();
    let worst_osc = oscillations.iter().copied().fold(0.0, f64::max);
    let passes = oscillations
        .iter()
        .filter(|&&o| o <= settings.tail_tol)
        .count();
    let tail = CheckReport {
        name: "supermartingale_tail".into(),
        status: status(passes == oscillations.len(), true),
        lhs: worst_osc,
        rhs: settings.tail_tol,
        gap: worst_osc - settings.tail_tol,
        tolerance: 0.0,
        trials: oscillations.len() as u64,
        seed: None,
        diagnostics: vec![("passing_trajectories".into(), passes as f64)],
    };
    Ok(SupermartingaleOutcome {
        conditional,
        per_iterate,
        tail,
        oscillations,
    })
}

/// Central-difference step for coordinate value `v`.
pub fn fd_step(v: f64) -> f64 {
    1e-5 * (1.0 + v.abs())
}

/// Analytic per-sample (`Some(i)`) or full (`None`) gradient against central
/// differences of the corresponding objective. The gap is
/// `max_j |g_j − d_j| / max(1, ‖g‖_∞)`.
pub fn check_gradient_fd(
    inst: &ProblemInstance,
    x: &[f64],
    sample: Option<usize>,
) -> Result<CheckReport> {
    let eval = |p: &[f64]| match sample {
        Some(i) => sample_value(inst, i, p),
        None => value(inst, p),
    };
    let analytic = match sample {
        Some(i) => crate::objectives::sample_gradient(inst, i, x)?,
        None => full_gradient(inst, x)?,
    };
    let mut p = x.to_vec();
    let mut max_err = 0.0f64;
    for j in 0..x.len() {
        let h = fd_step(x[j]);
        p[j] = x[j] + h;
        let up = eval(&p)?;
        p[j] = x[j] - h;
        let down = eval(&p)?;
        p[j] = x[j];
        let d = (up - down) / (2.0 * h);
        max_err = max_err.max((analytic[j] - d).abs());
    }
    let scale = analytic.iter().map(|v| v.abs()).fold(1.0, f64::max);
    let gap = max_err / scale;
    Ok(CheckReport {
        name: "gradient_fd".into(),
        status: status(gap <= FD_REL_TOL, true),
        lhs: max_err,
        rhs: 0.0,
        gap,
        tolerance: FD_REL_TOL,
        trials: x.len() as u64,
        seed: None,
        diagnostics: vec![],
    })
}

/// Per-sample gradients at `x`; convenience re-export for callers building
/// identity checks from an instance.
pub fn sample_gradients(inst: &ProblemInstance, x: &[f64]) -> Result<GradientMatrix> {
    gradient_matrix(inst, x)
}
