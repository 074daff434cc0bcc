//! Composite finite-sum losses `f(x) = (1/N) Σ f⁽ⁱ⁾(V_i·x)` and the data
//! constants the solver needs: the restricted smoothness modulus `L_s` and the
//! constant `c` bounding restricted per-sample gradient energy.
//!
//! Per-sample losses carry no `1/N` factor; the mean lives in the aggregate.
//! Every per-sample gradient has the form `w_i · V_iᵀ` where `w_i` is the
//! derivative of the scalar link at `t_i = V_i·x`.

use itertools::Itertools;
use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Result, SihtError};
use crate::sampling::BatchSample;
use crate::types::{DenseVector, LossKind, ProblemInstance, SupportSet};

/// Largest dimension for which `L_s` is computed by enumerating supports.
pub const EXACT_RESTRICTED_MAX_DIM: usize = 20;

/// Safety factor applied to the largest observed ratio in [`empirical_c`].
pub const EMPIRICAL_C_SAFETY: f64 = 1.5;

/// Ratios whose restricted full-gradient energy is below this are skipped.
pub const EMPIRICAL_C_MIN_DENOMINATOR: f64 = 1e-14;

/// `log(1 + eᵗ)` without overflow.
pub fn softplus(t: f64) -> f64 {
    t.max(0.0) + (-t.abs()).exp().ln_1p()
}

pub fn sigmoid(t: f64) -> f64 {
    let e = (-t.abs()).exp();
    if t >= 0.0 {
        1.0 / (1.0 + e)
    } else {
        e / (1.0 + e)
    }
}

fn link_value(loss: LossKind, t: f64, y: f64) -> f64 {
    match loss {
        LossKind::LeastSquares => (t - y) * (t - y),
        LossKind::Logistic => softplus(t) - y * t,
    }
}

fn link_slope(loss: LossKind, t: f64, y: f64) -> f64 {
    match loss {
        LossKind::LeastSquares => 2.0 * (t - y),
        LossKind::Logistic => sigmoid(t) - y,
    }
}

fn check_dim(inst: &ProblemInstance, x: &[f64]) -> Result<()> {
    if x.len() != inst.dim() {
        return Err(SihtError::DimensionMismatch {
            expected: inst.dim(),
            found: x.len(),
        });
    }
    Ok(())
}

fn check_sample(inst: &ProblemInstance, i: usize) -> Result<()> {
    if i >= inst.n_samples() {
        return Err(SihtError::IndexOutOfRange {
            index: i,
            len: inst.n_samples(),
        });
    }
    Ok(())
}

fn row_dot(inst: &ProblemInstance, i: usize, x: &[f64]) -> f64 {
    let v = inst.design();
    (0..inst.dim()).map(|j| v[(i, j)] * x[j]).sum()
}

fn predictions(inst: &ProblemInstance, x: &[f64]) -> DVector<f64> {
    inst.design() * DVector::from_column_slice(x)
}

/// Link slopes `w_i` at every sample.
fn slopes(inst: &ProblemInstance, x: &[f64]) -> DVector<f64> {
    let loss = inst.loss();
    let t = predictions(inst, x);
    DVector::from_fn(inst.n_samples(), |i, _| {
        link_slope(loss, t[i], inst.targets()[i])
    })
}

fn finite_vector(v: Vec<f64>) -> Result<DenseVector> {
    DenseVector::new(v)
}

/// `f(x) = (1/N) Σ f⁽ⁱ⁾(V_i·x)`
pub fn value(inst: &ProblemInstance, x: &[f64]) -> Result<f64> {
    check_dim(inst, x)?;
    let loss = inst.loss();
    let t = predictions(inst, x);
    let total: f64 = t
        .iter()
        .zip(inst.targets())
        .map(|(&ti, &yi)| link_value(loss, ti, yi))
        .sum();
    Ok(total / inst.n_samples() as f64)
}

/// `f⁽ⁱ⁾(x)` without the `1/N` factor.
pub fn sample_value(inst: &ProblemInstance, i: usize, x: &[f64]) -> Result<f64> {
    check_dim(inst, x)?;
    check_sample(inst, i)?;
    Ok(link_value(
        inst.loss(),
        row_dot(inst, i, x),
        inst.targets()[i],
    ))
}

/// `∇f⁽ⁱ⁾(x)`
pub fn sample_gradient(inst: &ProblemInstance, i: usize, x: &[f64]) -> Result<DenseVector> {
    check_dim(inst, x)?;
    check_sample(inst, i)?;
    let w = link_slope(inst.loss(), row_dot(inst, i, x), inst.targets()[i]);
    let v = inst.design();
    finite_vector((0..inst.dim()).map(|j| w * v[(i, j)]).collect())
}

/// `∇f(x) = (1/N) Σ ∇f⁽ⁱ⁾(x)`
pub fn full_gradient(inst: &ProblemInstance, x: &[f64]) -> Result<DenseVector> {
    check_dim(inst, x)?;
    let w = slopes(inst, x);
    let g = inst.design().tr_mul(&w) / inst.n_samples() as f64;
    finite_vector(g.as_slice().to_vec())
}

/// `(1/|B|) Σ_{i∈B} ∇f⁽ⁱ⁾(x)`
pub fn minibatch_gradient(
    inst: &ProblemInstance,
    batch: &BatchSample,
    x: &[f64],
) -> Result<DenseVector> {
    check_dim(inst, x)?;
    if batch.is_empty() {
        return Err(SihtError::EmptyBatch);
    }
    if batch.population() != inst.n_samples() {
        return Err(SihtError::DimensionMismatch {
            expected: inst.n_samples(),
            found: batch.population(),
        });
    }
    let loss = inst.loss();
    let v = inst.design();
    let mut g = vec![0.0; inst.dim()];
    for &i in batch.indices() {
        let w = link_slope(loss, row_dot(inst, i, x), inst.targets()[i]);
        for (j, gj) in g.iter_mut().enumerate() {
            *gj += w * v[(i, j)];
        }
    }
    let scale = 1.0 / batch.len() as f64;
    g.iter_mut().for_each(|gj| *gj *= scale);
    finite_vector(g)
}

/// Columns are vectors `g⁽¹⁾ … g⁽ᴺ⁾ ∈ ℝⁿ`, typically per-sample gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientMatrix {
    columns: DMatrix<f64>,
    mean: Vec<f64>,
}

impl GradientMatrix {
    /// `columns` is `n × N`.
    pub fn new(columns: DMatrix<f64>) -> Result<Self> {
        if columns.ncols() == 0 || columns.nrows() == 0 {
            return Err(invalid("gradient matrix must be non-empty"));
        }
        if let Some(index) = columns.iter().position(|v| !v.is_finite()) {
            return Err(SihtError::NonFinite { index });
        }
        let n_cols = columns.ncols() as f64;
        let mean = columns
            .row_iter()
            .map(|row| row.iter().sum::<f64>() / n_cols)
            .collect();
        Ok(Self { columns, mean })
    }

    pub fn from_columns(cols: &[Vec<f64>]) -> Result<Self> {
        let n = cols.first().map_or(0, Vec::len);
        if let Some(bad) = cols.iter().find(|c| c.len() != n) {
            return Err(SihtError::DimensionMismatch {
                expected: n,
                found: bad.len(),
            });
        }
        Self::new(DMatrix::from_fn(n, cols.len(), |j, i| cols[i][j]))
    }

    pub fn columns(&self) -> &DMatrix<f64> {
        &self.columns
    }

    /// Number of vectors `N`.
    pub fn count(&self) -> usize {
        self.columns.ncols()
    }

    pub fn dim(&self) -> usize {
        self.columns.nrows()
    }

    /// `ḡ = (1/N) Σ g⁽ⁱ⁾`
    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    /// Mean of the columns indexed by `batch`.
    pub fn batch_mean(&self, batch: &[usize]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        for &i in batch {
            for (j, o) in out.iter_mut().enumerate() {
                *o += self.columns[(j, i)];
            }
        }
        let k = batch.len() as f64;
        out.iter_mut().for_each(|o| *o /= k);
        out
    }
}

/// All per-sample gradients at `x`.
pub fn gradient_matrix(inst: &ProblemInstance, x: &[f64]) -> Result<GradientMatrix> {
    check_dim(inst, x)?;
    let w = slopes(inst, x);
    let v = inst.design();
    GradientMatrix::new(DMatrix::from_fn(inst.dim(), inst.n_samples(), |j, i| {
        w[i] * v[(i, j)]
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SmoothnessMethod {
    /// Curvature bound from the largest eigenvalue of the full Gram matrix.
    SpectralUpperBound,
    /// Largest eigenvalue over all Gram blocks of size `min(2s, n)`; least
    /// squares only.
    ExactRestricted,
}

impl SmoothnessMethod {
    pub fn name(self) -> &'static str {
        match self {
            SmoothnessMethod::SpectralUpperBound => "spectral_upper_bound",
            SmoothnessMethod::ExactRestricted => "exact_restricted",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothnessEstimate {
    pub modulus: f64,
    pub method: SmoothnessMethod,
}

fn curvature_scale(inst: &ProblemInstance) -> f64 {
    let n_samples = inst.n_samples() as f64;
    match inst.loss() {
        LossKind::LeastSquares => 2.0 / n_samples,
        // σ' ≤ 1/4
        LossKind::Logistic => 0.25 / n_samples,
    }
}

fn largest_eigenvalue(sym: DMatrix<f64>) -> f64 {
    sym.symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Restricted smoothness modulus `L_s`.
pub fn smoothness_modulus(
    inst: &ProblemInstance,
    s: usize,
    method: SmoothnessMethod,
) -> Result<SmoothnessEstimate> {
    smoothness_modulus_with_cap(inst, s, method, EXACT_RESTRICTED_MAX_DIM)
}

pub fn smoothness_modulus_with_cap(
    inst: &ProblemInstance,
    s: usize,
    method: SmoothnessMethod,
    max_dim: usize,
) -> Result<SmoothnessEstimate> {
    let n = inst.dim();
    if s == 0 || s >= n {
        return Err(invalid(format!(
            "sparsity level {s} must satisfy 1 <= s < n = {n}"
        )));
    }
    let gram = inst.design().tr_mul(inst.design());
    let modulus = match method {
        SmoothnessMethod::SpectralUpperBound => curvature_scale(inst) * largest_eigenvalue(gram),
        SmoothnessMethod::ExactRestricted => {
            if inst.loss() != LossKind::LeastSquares {
                return Err(invalid(
                    "exact restricted modulus is only defined for least squares",
                ));
            }
            if n > max_dim {
                return Err(invalid(format!(
                    "exact restricted modulus needs n <= {max_dim}, got n = {n}"
                )));
            }
            // Eigenvalues interlace, so supports of the largest admissible
            // size dominate all smaller ones.
            let k = (2 * s).min(n);
            let mut best = 0.0f64;
            for cols in (0..n).combinations(k) {
                let block = DMatrix::from_fn(k, k, |a, b| gram[(cols[a], cols[b])]);
                best = best.max(largest_eigenvalue(block));
            }
            curvature_scale(inst) * best
        }
    };
    if !(modulus.is_finite() && modulus > 0.0) {
        return Err(SihtError::Degenerate(format!(
            "smoothness modulus {modulus} is not positive"
        )));
    }
    Ok(SmoothnessEstimate { modulus, method })
}

/// Restricted gradient energies at `x` over coordinates `j`:
/// `(Σ_i ‖∇_J f⁽ⁱ⁾(x)‖², ‖∇_J f(x)‖²)`.
pub fn restricted_energies(
    inst: &ProblemInstance,
    j: &SupportSet,
    x: &[f64],
) -> Result<(f64, f64)> {
    check_dim(inst, x)?;
    if j.dim() != inst.dim() {
        return Err(SihtError::DimensionMismatch {
            expected: inst.dim(),
            found: j.dim(),
        });
    }
    let w = slopes(inst, x);
    let v = inst.design();
    let n_samples = inst.n_samples() as f64;
    let mut per_sample = 0.0;
    let mut full = vec![0.0; j.len()];
    for i in 0..inst.n_samples() {
        let row_sq: f64 = j.indices().iter().map(|&c| v[(i, c)] * v[(i, c)]).sum();
        per_sample += w[i] * w[i] * row_sq;
        for (f, &c) in full.iter_mut().zip(j.indices()) {
            *f += w[i] * v[(i, c)];
        }
    }
    let full_sq = full.iter().map(|f| (f / n_samples).powi(2)).sum();
    Ok((per_sample, full_sq))
}

/// Pointwise ratio `Σ_i ‖∇_J f⁽ⁱ⁾(x)‖² / ‖∇_J f(x)‖²`, or `None` when the
/// denominator is below [`EMPIRICAL_C_MIN_DENOMINATOR`].
pub fn pointwise_ratio(inst: &ProblemInstance, j: &SupportSet, x: &[f64]) -> Result<Option<f64>> {
    let (num, den) = restricted_energies(inst, j, x)?;
    Ok((den >= EMPIRICAL_C_MIN_DENOMINATOR).then(|| num / den))
}

/// Data-only bound on the pointwise ratio, evaluated together with both sides
/// of the inequality it is meant to certify at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClaimBound {
    /// `N² · max_r ‖(V_r)_J‖² / σ⁺_min(V_J V_Jᵀ)²`
    pub bound: f64,
    /// `σ⁺_min(V_J V_Jᵀ)`, the smallest nonzero singular value.
    pub sigma_min_nonzero: f64,
    /// `Σ_i ‖∇_J f⁽ⁱ⁾(x)‖²`
    pub sum_sample_sq: f64,
    /// `‖∇_J f(x)‖²`
    pub full_sq: f64,
    /// Whether `sum_sample_sq ≤ bound · full_sq`.
    pub holds: bool,
}

impl ClaimBound {
    pub fn gradient_is_zero(&self) -> bool {
        self.full_sq == 0.0
    }
}

/// Evaluates the data-dependent ratio bound on coordinates `j` and checks it
/// at `x`.
///
/// `V_J V_Jᵀ` is `N × N` with rank at most `|J|`, so its smallest singular
/// value is zero whenever `|J| < N`; the bound uses the smallest *nonzero*
/// one. Singular values of the Gram matrix are the squared singular values of
/// `V_J`, which is what is decomposed here.
pub fn claim_c_bound(inst: &ProblemInstance, j: &SupportSet, x: &[f64]) -> Result<ClaimBound> {
    check_dim(inst, x)?;
    if j.is_empty() {
        return Err(invalid("coordinate set J must be non-empty"));
    }
    let v = inst.design();
    let n_samples = inst.n_samples();
    let vj = DMatrix::from_fn(n_samples, j.len(), |i, a| v[(i, j.indices()[a])]);
    let sv = vj.clone().singular_values();
    let sv_max = sv.iter().copied().fold(0.0f64, f64::max);
    let rank_tol = n_samples.max(j.len()) as f64 * f64::EPSILON * sv_max;
    let sv_min_nonzero = sv
        .iter()
        .copied()
        .filter(|&s| s > rank_tol && s > 0.0)
        .fold(f64::INFINITY, f64::min);
    if !sv_min_nonzero.is_finite() {
        return Err(SihtError::Degenerate(
            "restricted Gram matrix is zero; no finite bound exists".into(),
        ));
    }
    let sigma_min_nonzero = sv_min_nonzero * sv_min_nonzero;
    let max_row_sq = vj
        .row_iter()
        .map(|r| r.norm_squared())
        .fold(0.0f64, f64::max);
    let n_sq = (n_samples * n_samples) as f64;
    let bound = n_sq * max_row_sq / (sigma_min_nonzero * sigma_min_nonzero);

    let (sum_sample_sq, full_sq) = restricted_energies(inst, j, x)?;
    let holds = sum_sample_sq <= bound * full_sq * (1.0 + 1e-12) || sum_sample_sq == 0.0;
    Ok(ClaimBound {
        bound,
        sigma_min_nonzero,
        sum_sample_sq,
        full_sq,
        holds,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CMethod {
    ClaimBound,
    EmpiricalSearch,
}

impl CMethod {
    pub fn name(self) -> &'static str {
        match self {
            CMethod::ClaimBound => "claim_bound",
            CMethod::EmpiricalSearch => "empirical_search",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CConstant {
    pub value: f64,
    pub method: CMethod,
    /// Largest raw ratio or bound observed, before any safety factor.
    pub max_observed: f64,
    /// Samples that entered the maximum.
    pub used: usize,
    /// Samples skipped for a degenerate denominator or Gram matrix.
    pub skipped: usize,
}

/// Random `s`-sparse point with standard normal entries on a uniformly drawn
/// support.
pub fn random_sparse_point<R: Rng + ?Sized>(n: usize, s: usize, rng: &mut R) -> Vec<f64> {
    let mut x = vec![0.0; n];
    for i in sample(rng, n, s) {
        x[i] = rng.sample(StandardNormal);
    }
    x
}

pub fn random_support<R: Rng + ?Sized>(n: usize, s: usize, rng: &mut R) -> SupportSet {
    let mut idx = sample(rng, n, s).into_vec();
    idx.sort_unstable();
    SupportSet::from_sorted(n, idx)
}

fn check_c_args(inst: &ProblemInstance, s: usize, trials: usize) -> Result<()> {
    if trials == 0 {
        return Err(invalid("at least one trial is required"));
    }
    if s == 0 || s >= inst.dim() {
        return Err(invalid(format!(
            "sparsity level {s} must satisfy 1 <= s < n = {}",
            inst.dim()
        )));
    }
    Ok(())
}

/// Searches for `c`: the largest pointwise ratio over `trials` random
/// `s`-sparse points `x` and uniformly random coordinate sets `J` with
/// `|J| = s`, times [`EMPIRICAL_C_SAFETY`].
///
/// By Cauchy–Schwarz every ratio is at least `N`, with equality exactly when
/// all restricted per-sample gradients coincide.
pub fn empirical_c<R: Rng + ?Sized>(
    inst: &ProblemInstance,
    s: usize,
    trials: usize,
    rng: &mut R,
) -> Result<CConstant> {
    check_c_args(inst, s, trials)?;
    let n = inst.dim();
    let mut max_ratio = 0.0f64;
    let (mut used, mut skipped) = (0, 0);
    for _ in 0..trials {
        let x = random_sparse_point(n, s, rng);
        let j = random_support(n, s, rng);
        match pointwise_ratio(inst, &j, &x)? {
            Some(r) => {
                max_ratio = max_ratio.max(r);
                used += 1;
            }
            None => skipped += 1,
        }
    }
    if used == 0 {
        return Err(SihtError::Degenerate(format!(
            "all {trials} sampled restricted gradients vanished; cannot estimate c"
        )));
    }
    Ok(CConstant {
        value: EMPIRICAL_C_SAFETY * max_ratio,
        method: CMethod::EmpiricalSearch,
        max_observed: max_ratio,
        used,
        skipped,
    })
}

/// Largest [`claim_c_bound`] over `trials` uniformly random coordinate sets
/// of size `s`.
pub fn claim_c_estimate<R: Rng + ?Sized>(
    inst: &ProblemInstance,
    s: usize,
    trials: usize,
    rng: &mut R,
) -> Result<CConstant> {
    check_c_args(inst, s, trials)?;
    let n = inst.dim();
    let x = vec![0.0; n];
    let mut best = 0.0f64;
    let (mut used, mut skipped) = (0, 0);
    for _ in 0..trials {
        let j = random_support(n, s, rng);
        match claim_c_bound(inst, &j, &x) {
            Ok(b) => {
                best = best.max(b.bound);
                used += 1;
            }
            Err(SihtError::Degenerate(_)) => skipped += 1,
            Err(e) => return Err(e),
        }
    }
    if used == 0 {
        return Err(SihtError::Degenerate(
            "every sampled restricted Gram matrix was zero".into(),
        ));
    }
    Ok(CConstant {
        value: best,
        method: CMethod::ClaimBound,
        max_observed: best,
        used,
        skipped,
    })
}
