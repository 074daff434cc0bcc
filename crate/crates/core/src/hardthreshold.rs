//! Hard thresholding `H_s`: projection onto vectors with at most `s` nonzeros.
//!
//! The projection keeps the `s` entries of largest magnitude. When several
//! entries share the boundary magnitude the minimizer is not unique; a
//! [`TieRule`] fixes a total order on indices so the selected support is
//! deterministic. The support always has exactly `s` indices, padding with
//! zero entries (in tie-rule order) when the input has fewer than `s` nonzeros.

use std::cmp::Ordering;

use crate::error::{invalid, Result, SihtError};
use crate::types::{DenseVector, SparseIterate, SupportSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TieRule {
    /// Among equal magnitudes prefer the smaller index.
    #[default]
    LowestIndex,
    /// Among equal magnitudes prefer the larger index.
    HighestIndex,
}

impl TieRule {
    pub fn name(self) -> &'static str {
        match self {
            TieRule::LowestIndex => "lowest_index",
            TieRule::HighestIndex => "highest_index",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "lowest_index" => Ok(TieRule::LowestIndex),
            "highest_index" => Ok(TieRule::HighestIndex),
            other => Err(invalid(format!("unknown tie rule `{other}`"))),
        }
    }

    /// Strict total order: `Less` means `i` ranks ahead of `j`.
    fn rank(self, x: &[f64], i: usize, j: usize) -> Ordering {
        x[j].abs().total_cmp(&x[i].abs()).then_with(|| match self {
            TieRule::LowestIndex => i.cmp(&j),
            TieRule::HighestIndex => j.cmp(&i),
        })
    }
}

fn check_args(x: &[f64], s: usize) -> Result<()> {
    let n = x.len();
    if s == 0 || s >= n {
        return Err(invalid(format!(
            "sparsity level {s} must satisfy 1 <= s < n = {n}"
        )));
    }
    if let Some(index) = x.iter().position(|v| !v.is_finite()) {
        return Err(SihtError::NonFinite { index });
    }
    Ok(())
}

/// Indices of the `s` largest-magnitude entries of `x`, ties resolved by `rule`.
pub fn top_support(x: &[f64], s: usize, rule: TieRule) -> Result<SupportSet> {
    check_args(x, s)?;
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.select_nth_unstable_by(s - 1, |&i, &j| rule.rank(x, i, j));
    order.truncate(s);
    order.sort_unstable();
    Ok(SupportSet::from_sorted(x.len(), order))
}

/// `H_s(x)`: `x` on [`top_support`], zero elsewhere.
pub fn hard_threshold(x: &[f64], s: usize, rule: TieRule) -> Result<SparseIterate> {
    let support = top_support(x, s, rule)?;
    let mut out = vec![0.0; x.len()];
    for &i in support.indices() {
        out[i] = x[i];
    }
    Ok(SparseIterate::from_parts(
        DenseVector::from_finite(out),
        support,
    ))
}
