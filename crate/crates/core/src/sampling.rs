//! Uniform batch sampling without replacement, exhaustive batch enumeration,
//! the covariance of the batch inclusion indicators, and the fixed batch-size
//! lower bound that guarantees expected descent.

use itertools::Itertools;
use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{invalid, Result, SihtError};

/// Default cap on the number of batches an enumeration may produce.
pub const DEFAULT_ENUMERATION_CAP: u128 = 1_000_000;

/// Sorted subset of `{0, …, N−1}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BatchSample {
    population: usize,
    indices: Vec<usize>,
}

impl BatchSample {
    pub fn new(population: usize, mut indices: Vec<usize>) -> Result<Self> {
        if indices.is_empty() {
            return Err(SihtError::EmptyBatch);
        }
        if let Some(&index) = indices.iter().find(|&&i| i >= population) {
            return Err(SihtError::IndexOutOfRange {
                index,
                len: population,
            });
        }
        indices.sort_unstable();
        if indices.windows(2).any(|w| w[0] == w[1]) {
            return Err(invalid("batch contains duplicate indices"));
        }
        Ok(Self {
            population,
            indices,
        })
    }

    /// `{0, …, N−1}`
    pub fn full(population: usize) -> Result<Self> {
        Self::new(population, (0..population).collect())
    }

    pub(crate) fn from_sorted(population: usize, indices: Vec<usize>) -> Self {
        debug_assert!(indices.windows(2).all(|w| w[0] < w[1]));
        Self {
            population,
            indices,
        }
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

    pub fn population(&self) -> usize {
        self.population
    }

    pub fn inclusion(&self) -> InclusionVector {
        let mut z = vec![0u8; self.population];
        for &i in &self.indices {
            z[i] = 1;
        }
        InclusionVector(z)
    }
}

/// `z_i = 1` iff sample `i` is in the batch.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InclusionVector(Vec<u8>);

impl InclusionVector {
    pub fn as_slice(&self) -> &[u8] {
        &self.0
    }

    pub fn count(&self) -> usize {
        self.0.iter().map(|&z| z as usize).sum()
    }
}

fn check_batch_size(population: usize, batch_size: usize) -> Result<()> {
    if batch_size == 0 || batch_size > population {
        return Err(invalid(format!(
            "batch size {batch_size} must lie in [1, {population}]"
        )));
    }
    Ok(())
}

/// Draws `S_B` distinct indices from `{0, …, N−1}` uniformly, by a partial
/// Fisher–Yates shuffle. The full batch is returned without consuming
/// randomness.
pub fn draw_batch<R: Rng + ?Sized>(
    population: usize,
    batch_size: usize,
    rng: &mut R,
) -> Result<BatchSample> {
    check_batch_size(population, batch_size)?;
    if batch_size == population {
        return BatchSample::full(population);
    }
    let mut pool: Vec<usize> = (0..population).collect();
    for i in 0..batch_size {
        let j = rng.random_range(i..population);
        pool.swap(i, j);
    }
    pool.truncate(batch_size);
    pool.sort_unstable();
    Ok(BatchSample::from_sorted(population, pool))
}

/// `C(n, k)`, saturating at `u128::MAX`.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc · (n − i) is divisible by (i + 1) at every step.
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// Lazily yields every size-`S_B` batch in lexicographic order.
pub fn batch_iter(
    population: usize,
    batch_size: usize,
    cap: u128,
) -> Result<impl Iterator<Item = BatchSample>> {
    check_batch_size(population, batch_size)?;
    let count = binomial(population, batch_size);
    if count > cap {
        return Err(SihtError::EnumerationCap { count, cap });
    }
    Ok((0..population)
        .combinations(batch_size)
        .map(move |idx| BatchSample::from_sorted(population, idx)))
}

/// All `C(N, S_B)` batches, lexicographic.
pub fn enumerate_batches(
    population: usize,
    batch_size: usize,
    cap: u128,
) -> Result<Vec<BatchSample>> {
    Ok(batch_iter(population, batch_size, cap)?.collect())
}

/// `Cov(z(B))` for a uniform size-`S_B` batch: `p(1−p)` on the diagonal with
/// `p = S_B/N`, and `S_B(S_B−1)/(N(N−1)) − p²` off it.
pub fn inclusion_covariance(population: usize, batch_size: usize) -> Result<DMatrix<f64>> {
    check_batch_size(population, batch_size)?;
    if population < 2 {
        return Err(invalid("inclusion covariance needs N >= 2"));
    }
    let n = population as f64;
    let b = batch_size as f64;
    let p = b / n;
    let diag = p * (1.0 - p);
    let off = b * (b - 1.0) / (n * (n - 1.0)) - p * p;
    Ok(DMatrix::from_fn(population, population, |i, j| {
        if i == j {
            diag
        } else {
            off
        }
    }))
}

/// `ζ = (N − S_B) / (S_B (N − 1))`
pub fn zeta(population: usize, batch_size: usize) -> Result<f64> {
    if population < 2 {
        return Err(invalid("zeta needs N >= 2"));
    }
    check_batch_size(population, batch_size)?;
    let n = population as f64;
    let b = batch_size as f64;
    Ok((n - b) / (b * (n - 1.0)))
}

/// `(1 − L_s γ) / (1 + L_s γ)`
pub fn step_ratio(l_gamma: f64) -> f64 {
    (1.0 - l_gamma) / (1.0 + l_gamma)
}

/// Descent coefficient `1 − c/N + ((1−L_sγ)/(1+L_sγ))/ζ`; `+∞` for the full
/// batch (`ζ = 0`).
pub fn descent_coefficient(
    population: usize,
    batch_size: usize,
    l_gamma: f64,
    c: f64,
) -> Result<f64> {
    let z = zeta(population, batch_size)?;
    let a = step_ratio(l_gamma);
    if z == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(1.0 - c / population as f64 + a / z)
}

/// `ζ · (1 − c/N + ((1−L_sγ)/(1+L_sγ))/ζ)` written as `ζ(1 − c/N) + (1−L_sγ)/(1+L_sγ)`,
/// which stays finite at `ζ = 0`.
pub fn scaled_descent_coefficient(
    population: usize,
    batch_size: usize,
    l_gamma: f64,
    c: f64,
) -> Result<f64> {
    let z = zeta(population, batch_size)?;
    Ok(z * (1.0 - c / population as f64) + step_ratio(l_gamma))
}

/// Outcome of [`batch_size_lower_bound`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatchSizeBound {
    /// Smallest admissible batch size, in `[1, N]`.
    pub min_batch: usize,
    /// Unrounded value of the bound formula; `None` when degenerate.
    pub formula_value: Option<f64>,
    /// `c ≤ N`: the bound places no restriction on the batch size.
    pub degenerate: bool,
    /// [`descent_coefficient`] at `min_batch`.
    pub coefficient_at_min: f64,
}

impl BatchSizeBound {
    /// Nonnegativity of the descent coefficient, up to rounding when the
    /// bound formula lands exactly on an integer.
    pub fn coefficient_nonnegative(&self) -> bool {
        self.coefficient_at_min >= -1e-12
    }

    /// Whether `batch_size` is admissible under this bound.
    pub fn admits(&self, batch_size: usize) -> bool {
        self.degenerate || batch_size >= self.min_batch
    }
}

/// Smallest fixed batch size
/// `S_B ≥ N / (1 + ((1−L_sγ)/(1+L_sγ)) · (N−1)/(c/N − 1))`,
/// rounded up and clamped to `[1, N]`.
///
/// For `c ≤ N` the denominator term is non-positive and the formula imposes
/// nothing; `min_batch = 1` is returned with `degenerate = true`.
pub fn batch_size_lower_bound(
    population: usize,
    smoothness: f64,
    gamma: f64,
    c: f64,
) -> Result<BatchSizeBound> {
    if population < 2 {
        return Err(invalid("the batch-size bound needs N >= 2"));
    }
    if !(smoothness > 0.0 && smoothness.is_finite()) {
        return Err(invalid("smoothness modulus must be positive and finite"));
    }
    let l_gamma = smoothness * gamma;
    if !(gamma > 0.0 && l_gamma < 1.0) {
        return Err(invalid(format!(
            "step size {gamma} must satisfy 0 < gamma < 1/L_s = {}",
            1.0 / smoothness
        )));
    }
    if c.is_nan() || c <= 0.0 {
        return Err(invalid("c must be positive"));
    }
    let n = population as f64;
    if c <= n {
        return Ok(BatchSizeBound {
            min_batch: 1,
            formula_value: None,
            degenerate: true,
            coefficient_at_min: descent_coefficient(population, 1, l_gamma, c)?,
        });
    }
    let value = n / (1.0 + step_ratio(l_gamma) * (n - 1.0) / (c / n - 1.0));
    let min_batch = if value.is_nan() {
        population
    } else {
        (value.ceil().max(1.0) as usize).min(population)
    };
    Ok(BatchSizeBound {
        min_batch,
        formula_value: Some(value),
        degenerate: false,
        coefficient_at_min: descent_coefficient(population, min_batch, l_gamma, c)?,
    })
}
