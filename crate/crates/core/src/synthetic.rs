//! Planted sparse problems with Gaussian designs.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Bernoulli, Distribution, StandardNormal};

use crate::error::{invalid, Result};
use crate::objectives::{random_sparse_point, sigmoid};
use crate::rng::substream;
use crate::types::{LossKind, ProblemInstance};

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub n_samples: usize,
    pub dim: usize,
    /// Nonzeros in the planted vector.
    pub s_true: usize,
    /// Standard deviation of additive noise (least squares only).
    pub noise_sigma: f64,
    pub loss: LossKind,
    pub seed: u64,
}

/// Draws `V` with i.i.d. standard normal entries and a planted `x*` with
/// `s_true` standard normal entries on a uniform support.
///
/// Least squares: `y = V x* + σ ε`. Logistic: the last column of `V` is set to
/// ones (intercept) and `y_i ~ Bernoulli(sigmoid(⟨V_i, x*⟩))`.
///
/// Returns the instance and `x*`.
pub fn planted_instance(spec: &SyntheticSpec) -> Result<(ProblemInstance, Vec<f64>)> {
    let SyntheticSpec {
        n_samples,
        dim,
        s_true,
        noise_sigma,
        loss,
        seed,
    } = *spec;
    if n_samples == 0 || dim == 0 {
        return Err(invalid("instance dimensions must be positive"));
    }
    if s_true == 0 || s_true > dim {
        return Err(invalid(format!(
            "planted sparsity {s_true} must lie in [1, {dim}]"
        )));
    }
    if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
        return Err(invalid("noise level must be finite and nonnegative"));
    }

    let mut rng = substream(seed, "siht/instance");
    let mut design = DMatrix::from_fn(n_samples, dim, |_, _| rng.sample::<f64, _>(StandardNormal));
    let x_star = random_sparse_point(dim, s_true, &mut rng);
    if loss == LossKind::Logistic {
        design.column_mut(dim - 1).fill(1.0);
    }
    let linear = &design * nalgebra::DVector::from_column_slice(&x_star);

    let targets = match loss {
        LossKind::LeastSquares => linear
            .iter()
            .map(|t| t + noise_sigma * rng.sample::<f64, _>(StandardNormal))
            .collect(),
        LossKind::Logistic => linear
            .iter()
            .map(|&t| {
                let p = sigmoid(t);
                let coin = Bernoulli::new(p).map_err(|e| invalid(e.to_string()))?;
                Ok(if coin.sample(&mut rng) { 1.0 } else { 0.0 })
            })
            .collect::<Result<Vec<f64>>>()?,
    };
    Ok((ProblemInstance::new(design, targets, loss)?, x_star))
}
