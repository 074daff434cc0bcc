//! Shared domain types.
//!
//! Indices are 0-based everywhere, including CSV input and output.

use std::ops::Deref;

use nalgebra::DMatrix;

use crate::error::{invalid, Result, SihtError};
use crate::hardthreshold::TieRule;

/// A finite real vector.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseVector(Vec<f64>);

impl DenseVector {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if let Some(index) = entries.iter().position(|v| !v.is_finite()) {
            return Err(SihtError::NonFinite { index });
        }
        Ok(Self(entries))
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn norm_sq(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum()
    }

    /// Number of nonzero entries.
    pub fn l0(&self) -> usize {
        self.0.iter().filter(|v| **v != 0.0).count()
    }

    // Crate-internal constructor for values already known to be finite.
    pub(crate) fn from_finite(entries: Vec<f64>) -> Self {
        debug_assert!(entries.iter().all(|v| v.is_finite()));
        Self(entries)
    }
}

impl Deref for DenseVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Strictly increasing set of coordinates in `[0, dim)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SupportSet {
    dim: usize,
    indices: Vec<usize>,
}

impl SupportSet {
    /// Builds a support set; `indices` may be given in any order but must not
    /// contain duplicates.
    pub fn new(dim: usize, mut indices: Vec<usize>) -> Result<Self> {
        if let Some(&index) = indices.iter().find(|&&i| i >= dim) {
            return Err(SihtError::IndexOutOfRange { index, len: dim });
        }
        indices.sort_unstable();
        if indices.windows(2).any(|w| w[0] == w[1]) {
            return Err(invalid("support set contains duplicate indices"));
        }
        Ok(Self { dim, indices })
    }

    pub fn empty(dim: usize) -> Self {
        Self {
            dim,
            indices: Vec::new(),
        }
    }

    pub(crate) fn from_sorted(dim: usize, indices: Vec<usize>) -> Self {
        debug_assert!(indices.windows(2).all(|w| w[0] < w[1]));
        debug_assert!(indices.last().is_none_or(|&i| i < dim));
        Self { dim, indices }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.indices.binary_search(&i).is_ok()
    }

    pub fn union(&self, other: &SupportSet) -> SupportSet {
        assert_eq!(
            self.dim, other.dim,
            "support sets over different dimensions"
        );
        let mut out = Vec::with_capacity(self.len() + other.len());
        let (mut a, mut b) = (
            self.indices.iter().peekable(),
            other.indices.iter().peekable(),
        );
        loop {
            match (a.peek(), b.peek()) {
                (Some(&&x), Some(&&y)) => {
                    out.push(x.min(y));
                    if x <= y {
                        a.next();
                    }
                    if y <= x {
                        b.next();
                    }
                }
                (Some(&&x), None) => {
                    out.push(x);
                    a.next();
                }
                (None, Some(&&y)) => {
                    out.push(y);
                    b.next();
                }
                (None, None) => break,
            }
        }
        SupportSet::from_sorted(self.dim, out)
    }

    /// Elements of `self` not in `other`.
    pub fn difference(&self, other: &SupportSet) -> SupportSet {
        assert_eq!(
            self.dim, other.dim,
            "support sets over different dimensions"
        );
        let out = self
            .indices
            .iter()
            .copied()
            .filter(|&i| !other.contains(i))
            .collect();
        SupportSet::from_sorted(self.dim, out)
    }

    /// Gathers `v` at the indices of the set.
    pub fn restrict(&self, v: &[f64]) -> Vec<f64> {
        self.indices.iter().map(|&i| v[i]).collect()
    }

    /// `‖v_S‖²`
    pub fn norm_sq_on(&self, v: &[f64]) -> f64 {
        self.indices.iter().map(|&i| v[i] * v[i]).sum()
    }

    /// `⟨a_S, b_S⟩`
    pub fn dot_on(&self, a: &[f64], b: &[f64]) -> f64 {
        self.indices.iter().map(|&i| a[i] * b[i]).sum()
    }
}

/// An `s`-sparse point: entries off the support are exactly zero.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseIterate {
    vector: DenseVector,
    support: SupportSet,
}

impl SparseIterate {
    /// Zeroes every entry of `vector` outside `support`.
    pub fn new(vector: DenseVector, support: SupportSet, s: usize) -> Result<Self> {
        if support.dim() != vector.len() {
            return Err(SihtError::DimensionMismatch {
                expected: vector.len(),
                found: support.dim(),
            });
        }
        if support.len() > s {
            return Err(invalid(format!(
                "support of size {} exceeds sparsity level {s}",
                support.len()
            )));
        }
        let mut entries = vector.into_inner();
        let mut keep = support.indices().iter().peekable();
        for (i, v) in entries.iter_mut().enumerate() {
            if keep.peek() == Some(&&i) {
                keep.next();
            } else {
                *v = 0.0;
            }
        }
        Ok(Self {
            vector: DenseVector::from_finite(entries),
            support,
        })
    }

    /// Zero vector whose support is padded to `s` indices by the tie rule.
    pub fn zero(n: usize, s: usize, rule: TieRule) -> Result<Self> {
        crate::hardthreshold::hard_threshold(&vec![0.0; n], s, rule)
    }

    /// Rebuilds an iterate from its support and the values on it.
    pub fn from_support_values(n: usize, support: &[usize], values: &[f64]) -> Result<Self> {
        if support.len() != values.len() {
            return Err(SihtError::DimensionMismatch {
                expected: support.len(),
                found: values.len(),
            });
        }
        let set = SupportSet::new(n, support.to_vec())?;
        let mut entries = vec![0.0; n];
        for (&i, &v) in support.iter().zip(values) {
            entries[i] = v;
        }
        let s = set.len();
        Self::new(DenseVector::new(entries)?, set, s)
    }

    pub(crate) fn from_parts(vector: DenseVector, support: SupportSet) -> Self {
        Self { vector, support }
    }

    pub fn vector(&self) -> &DenseVector {
        &self.vector
    }

    pub fn support(&self) -> &SupportSet {
        &self.support
    }

    pub fn dim(&self) -> usize {
        self.vector.len()
    }

    /// Values of the iterate on its support, in support order.
    pub fn support_values(&self) -> Vec<f64> {
        self.support.restrict(&self.vector)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    /// `f⁽ⁱ⁾(x) = (V_i·x − y_i)²`
    LeastSquares,
    /// `f⁽ⁱ⁾(x) = −y_i (V_i·x) + log(1 + exp(V_i·x))`, with `y_i ∈ {0, 1}`
    Logistic,
}

impl LossKind {
    pub fn name(self) -> &'static str {
        match self {
            LossKind::LeastSquares => "least_squares",
            LossKind::Logistic => "logistic",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "least_squares" => Ok(LossKind::LeastSquares),
            "logistic" => Ok(LossKind::Logistic),
            other => Err(invalid(format!("unknown loss kind `{other}`"))),
        }
    }
}

/// Finite-sum problem `f(x) = (1/N) Σ f⁽ⁱ⁾(V_i·x)` over the rows of `V`.
#[derive(Debug, Clone)]
pub struct ProblemInstance {
    design: DMatrix<f64>,
    targets: Vec<f64>,
    loss: LossKind,
}

impl ProblemInstance {
    pub fn new(design: DMatrix<f64>, targets: Vec<f64>, loss: LossKind) -> Result<Self> {
        if design.nrows() == 0 || design.ncols() == 0 {
            return Err(invalid("design matrix must be non-empty"));
        }
        if targets.len() != design.nrows() {
            return Err(SihtError::DimensionMismatch {
                expected: design.nrows(),
                found: targets.len(),
            });
        }
        if let Some(index) = design.iter().position(|v| !v.is_finite()) {
            return Err(SihtError::NonFinite { index });
        }
        if let Some(index) = targets.iter().position(|v| !v.is_finite()) {
            return Err(SihtError::NonFinite { index });
        }
        if loss == LossKind::Logistic && targets.iter().any(|&t| t != 0.0 && t != 1.0) {
            return Err(invalid("logistic targets must be 0 or 1"));
        }
        Ok(Self {
            design,
            targets,
            loss,
        })
    }

    /// Builds an instance from row-major data.
    pub fn from_rows(rows: &[Vec<f64>], targets: Vec<f64>, loss: LossKind) -> Result<Self> {
        let n = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != n) {
            return Err(SihtError::DimensionMismatch {
                expected: n,
                found: bad.len(),
            });
        }
        let design = DMatrix::from_fn(rows.len(), n, |i, j| rows[i][j]);
        Self::new(design, targets, loss)
    }

    pub fn design(&self) -> &DMatrix<f64> {
        &self.design
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn loss(&self) -> LossKind {
        self.loss
    }

    /// Number of samples `N`.
    pub fn n_samples(&self) -> usize {
        self.design.nrows()
    }

    /// Problem dimension `n`.
    pub fn dim(&self) -> usize {
        self.design.ncols()
    }

    /// Same data with the design scaled by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(&self.design * factor, self.targets.clone(), self.loss)
    }
}

/// Parameters of one solver run.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Sparsity level `s`, `1 ≤ s < n`.
    pub sparsity: usize,
    /// Step size, `0 < γ < 1/L_s`.
    pub gamma: f64,
    /// Restricted smoothness modulus `L_s` the step size was chosen against.
    pub smoothness: f64,
    /// Mini-batch size `S_B`.
    pub batch_size: usize,
    pub max_iters: usize,
    pub seed: u64,
    /// Constant `c` bounding restricted per-sample gradient energy.
    pub c_constant: f64,
    pub tie_rule: TieRule,
    /// Window length for the stopping rules.
    pub window: usize,
}

impl SolverConfig {
    pub const DEFAULT_WINDOW: usize = 200;

    pub fn validate(&self, inst: &ProblemInstance) -> Result<()> {
        let n = inst.dim();
        let n_samples = inst.n_samples();
        if self.sparsity == 0 || self.sparsity >= n {
            return Err(invalid(format!(
                "sparsity level {} must satisfy 1 <= s < n = {n}",
                self.sparsity
            )));
        }
        if !(self.smoothness.is_finite() && self.smoothness > 0.0) {
            return Err(invalid("smoothness modulus must be positive and finite"));
        }
        if !(self.gamma > 0.0 && self.gamma * self.smoothness < 1.0) {
            return Err(invalid(format!(
                "step size {} must satisfy 0 < gamma < 1/L_s = {}",
                self.gamma,
                1.0 / self.smoothness
            )));
        }
        if self.batch_size == 0 || self.batch_size > n_samples {
            return Err(invalid(format!(
                "batch size {} must lie in [1, {n_samples}]",
                self.batch_size
            )));
        }
        if !(self.c_constant > 0.0) {
            return Err(invalid("c constant must be positive"));
        }
        if self.window == 0 {
            return Err(invalid("stopping window must be positive"));
        }
        Ok(())
    }
}

/// One recorded iteration. Row `k` describes `X^k`; `batch` is the batch that
/// produced it (empty for `k = 0`).
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRow {
    pub k: usize,
    pub objective: f64,
    pub support: Vec<usize>,
    /// Values of `X^k` on `support`.
    pub values: Vec<f64>,
    /// `‖∇_{I_s^x} f(X^k)‖²`
    pub grad_norm_sq_restricted: f64,
    pub batch: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub seed: u64,
    pub dim: usize,
    pub rows: Vec<TrajectoryRow>,
}

impl TrajectoryRecord {
    pub fn objectives(&self) -> impl Iterator<Item = f64> + '_ {
        self.rows.iter().map(|r| r.objective)
    }

    /// Number of iterations executed (rows minus the initial point).
    pub fn iterations(&self) -> usize {
        self.rows.len().saturating_sub(1)
    }

    pub fn iterate(&self, k: usize) -> Result<SparseIterate> {
        let row = self.rows.get(k).ok_or(SihtError::IndexOutOfRange {
            index: k,
            len: self.rows.len(),
        })?;
        SparseIterate::from_support_values(self.dim, &row.support, &row.values)
    }
}
