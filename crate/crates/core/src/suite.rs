//! The checker suite behind `siht verify`: every check at small, fully
//! enumerable sizes, one report row per check.

use itertools::Itertools;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Result};
use crate::hardthreshold::{hard_threshold, TieRule};
use crate::objectives::{
    claim_c_bound, empirical_c, full_gradient, minibatch_gradient, random_sparse_point,
    random_support, smoothness_modulus, GradientMatrix, SmoothnessMethod,
};
use crate::rng::substream;
use crate::sampling::{
    batch_iter, batch_size_lower_bound, inclusion_covariance, DEFAULT_ENUMERATION_CAP,
};
use crate::solver::run_ensemble;
use crate::synthetic::{planted_instance, SyntheticSpec};
use crate::types::{LossKind, ProblemInstance, SolverConfig, SparseIterate};
use crate::verify::{
    check_descent_lemma, check_distance_identity, check_expected_descent, check_gradient_fd,
    check_sample_average_identity, check_supermartingale, check_variance_margin, CheckReport,
    CheckStatus, ExpectationSettings, SupermartingaleSettings,
};

pub const CHECK_NAMES: &[&str] = &[
    "ht_optimality",
    "inclusion_covariance",
    "unbiased_minibatch",
    "sample_average_identity",
    "distance_identity",
    "gradient_fd",
    "descent_lemma_exact_gradient",
    "descent_lemma",
    "expected_descent",
    "variance_margin",
    "claim_bound",
    "supermartingale_conditional",
    "supermartingale_tail",
];

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteConfig {
    pub seed: u64,
    /// Largest population size in the identity sweeps.
    pub max_population: usize,
    /// Random gradient matrices per `(N, S_B)` pair.
    pub matrices_per_size: usize,
    /// Random `(x, g)` pairs in the descent-lemma sweep.
    pub lemma_cases: usize,
    pub enumeration_cap: u128,
    pub mc_draws: usize,
    pub tie_rule: TieRule,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            max_population: 7,
            matrices_per_size: 10,
            lemma_cases: 1000,
            enumeration_cap: DEFAULT_ENUMERATION_CAP,
            mc_draws: 10_000,
            tie_rule: TieRule::LowestIndex,
        }
    }
}

/// Folds many reports of one check into a single row: the worst case by
/// `gap − tolerance`, with trials summed.
pub fn aggregate(name: &str, reports: &[CheckReport]) -> CheckReport {
    let worst = reports
        .iter()
        .max_by(|a, b| (a.gap - a.tolerance).total_cmp(&(b.gap - b.tolerance)))
        .expect("at least one report");
    let passed = reports.iter().filter(|r| r.passed()).count();
    let status = if passed < reports.len() {
        CheckStatus::Fail
    } else if reports.iter().all(|r| r.status == CheckStatus::ExactPass) {
        CheckStatus::ExactPass
    } else {
        CheckStatus::McPass
    };
    let mut diagnostics = vec![
        ("cases".to_string(), reports.len() as f64),
        ("passed".to_string(), passed as f64),
    ];
    diagnostics.extend(worst.diagnostics.iter().cloned());
    CheckReport {
        name: name.to_string(),
        status,
        lhs: worst.lhs,
        rhs: worst.rhs,
        gap: worst.gap,
        tolerance: worst.tolerance,
        trials: reports.iter().map(|r| r.trials).sum(),
        seed: worst.seed,
        diagnostics,
    }
}

fn least_squares(
    n_samples: usize,
    dim: usize,
    s_true: usize,
    seed: u64,
) -> Result<ProblemInstance> {
    Ok(planted_instance(&SyntheticSpec {
        n_samples,
        dim,
        s_true,
        noise_sigma: 0.1,
        loss: LossKind::LeastSquares,
        seed,
    })?
    .0)
}

fn random_iterate<R: Rng>(n: usize, s: usize, rule: TieRule, rng: &mut R) -> Result<SparseIterate> {
    let x = random_sparse_point(n, s, rng);
    hard_threshold(&x, s, rule)
}

fn ht_optimality(cfg: &SuiteConfig) -> Result<CheckReport> {
    let mut rng = substream(cfg.seed, "suite/ht_optimality");
    let mut reports = Vec::new();
    for _ in 0..200 {
        let n = rng.random_range(2..=8usize);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-3i32..=3) as f64).collect();
        for s in 1..n {
            let y = hard_threshold(&x, s, cfg.tie_rule)?;
            let dist: f64 = x
                .iter()
                .zip(y.vector().iter())
                .map(|(a, b)| (a - b).powi(2))
                .sum();
            let best = (0..n)
                .combinations(s)
                .map(|sup| {
                    (0..n)
                        .filter(|i| !sup.contains(i))
                        .map(|i| x[i] * x[i])
                        .sum::<f64>()
                })
                .fold(f64::INFINITY, f64::min);
            let gap = (dist - best).abs();
            reports.push(CheckReport {
                name: String::new(),
                status: if gap == 0.0 {
                    CheckStatus::ExactPass
                } else {
                    CheckStatus::Fail
                },
                lhs: dist,
                rhs: best,
                gap,
                tolerance: 0.0,
                trials: 1,
                seed: None,
                diagnostics: vec![],
            });
        }
    }
    Ok(aggregate("ht_optimality", &reports))
}

fn inclusion_cov(cfg: &SuiteConfig) -> Result<CheckReport> {
    let mut reports = Vec::new();
    for n in 2..=cfg.max_population {
        for b in 1..=n {
            let batches: Vec<_> = batch_iter(n, b, cfg.enumeration_cap)?.collect();
            let m = batches.len() as f64;
            let z: Vec<Vec<f64>> = batches
                .iter()
                .map(|bs| {
                    bs.inclusion()
                        .as_slice()
                        .iter()
                        .map(|&v| v as f64)
                        .collect()
                })
                .collect();
            let mean: Vec<f64> = (0..n)
                .map(|i| z.iter().map(|r| r[i]).sum::<f64>() / m)
                .collect();
            let formula = inclusion_covariance(n, b)?;
            let mut gap = 0.0f64;
            for i in 0..n {
                for j in 0..n {
                    let cov = z
                        .iter()
                        .map(|r| (r[i] - mean[i]) * (r[j] - mean[j]))
                        .sum::<f64>()
                        / m;
                    gap = gap.max((cov - formula[(i, j)]).abs());
                }
            }
            reports.push(CheckReport {
                name: String::new(),
                status: if gap <= 1e-12 {
                    CheckStatus::ExactPass
                } else {
                    CheckStatus::Fail
                },
                lhs: gap,
                rhs: 0.0,
                gap,
                tolerance: 1e-12,
                trials: batches.len() as u64,
                seed: None,
                diagnostics: vec![],
            });
        }
    }
    Ok(aggregate("inclusion_covariance", &reports))
}

fn unbiased(cfg: &SuiteConfig) -> Result<CheckReport> {
    let mut rng = substream(cfg.seed, "suite/unbiased");
    let inst = least_squares(cfg.max_population, 5, 2, cfg.seed)?;
    let n_samples = inst.n_samples();
    let mut reports = Vec::new();
    for b in 1..=n_samples {
        let x = random_sparse_point(5, 2, &mut rng);
        let full = full_gradient(&inst, &x)?;
        let mut acc = vec![0.0; 5];
        let mut count = 0u64;
        for batch in batch_iter(n_samples, b, cfg.enumeration_cap)? {
            let g = minibatch_gradient(&inst, &batch, &x)?;
            acc.iter_mut().zip(g.iter()).for_each(|(a, v)| *a += v);
            count += 1;
        }
        let gap = acc
            .iter()
            .zip(full.iter())
            .map(|(a, f)| (a / count as f64 - f).abs())
            .fold(0.0, f64::max);
        let tol = 1e-10 * full.iter().map(|v| v.abs()).fold(1.0, f64::max);
        reports.push(CheckReport {
            name: String::new(),
            status: if gap <= tol {
                CheckStatus::ExactPass
            } else {
                CheckStatus::Fail
            },
            lhs: gap,
            rhs: 0.0,
            gap,
            tolerance: tol,
            trials: count,
            seed: None,
            diagnostics: vec![],
        });
    }
    Ok(aggregate("unbiased_minibatch", &reports))
}

fn identity_sweep(cfg: &SuiteConfig, distance: bool) -> Result<CheckReport> {
    let label = if distance {
        "suite/distance"
    } else {
        "suite/sample_average"
    };
    let mut rng = substream(cfg.seed, label);
    let mut reports = Vec::new();
    for n in 2..=cfg.max_population {
        for _ in 0..cfg.matrices_per_size {
            let cols: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..4).map(|_| rng.sample(StandardNormal)).collect())
                .collect();
            let g = GradientMatrix::from_columns(&cols)?;
            for b in 1..=n {
                reports.push(if distance {
                    check_distance_identity(&g, b, cfg.enumeration_cap)?
                } else {
                    check_sample_average_identity(&g, b, cfg.enumeration_cap)?
                });
            }
        }
    }
    let name = if distance {
        "distance_identity"
    } else {
        "sample_average_identity"
    };
    Ok(aggregate(name, &reports))
}

fn gradient_fd(cfg: &SuiteConfig) -> Result<CheckReport> {
    let mut rng = substream(cfg.seed, "suite/gradient_fd");
    let mut reports = Vec::new();
    for loss in [LossKind::LeastSquares, LossKind::Logistic] {
        let (inst, _) = planted_instance(&SyntheticSpec {
            n_samples: 8,
            dim: 6,
            s_true: 3,
            noise_sigma: 0.1,
            loss,
            seed: cfg.seed,
        })?;
        for _ in 0..10 {
            let x: Vec<f64> = (0..6).map(|_| rng.sample(StandardNormal)).collect();
            reports.push(check_gradient_fd(&inst, &x, None)?);
            let i = rng.random_range(0..8);
            reports.push(check_gradient_fd(&inst, &x, Some(i))?);
        }
    }
    Ok(aggregate("gradient_fd", &reports))
}

struct DescentSetup {
    inst: ProblemInstance,
    s: usize,
    smoothness: f64,
    gamma: f64,
}

fn descent_setup(cfg: &SuiteConfig, n_samples: usize, dim: usize) -> Result<DescentSetup> {
    let inst = least_squares(n_samples, dim, 3, cfg.seed.wrapping_add(1))?;
    let smoothness = smoothness_modulus(&inst, 3, SmoothnessMethod::SpectralUpperBound)?.modulus;
    Ok(DescentSetup {
        inst,
        s: 3,
        smoothness,
        gamma: 0.9 / smoothness,
    })
}

fn descent_lemma(cfg: &SuiteConfig, exact_gradient: bool) -> Result<CheckReport> {
    let label = if exact_gradient {
        "suite/lemma_exact"
    } else {
        "suite/lemma_random"
    };
    let mut rng = substream(cfg.seed, label);
    let d = descent_setup(cfg, 8, 10)?;
    let n = d.inst.dim();
    let mut reports = Vec::new();
    let cases = if exact_gradient { 200 } else { cfg.lemma_cases };
    for _ in 0..cases {
        let x = random_iterate(n, d.s, cfg.tie_rule, &mut rng)?;
        let g: Vec<f64> = if exact_gradient {
            full_gradient(&d.inst, x.vector())?.into_inner()
        } else {
            (0..n).map(|_| rng.sample(StandardNormal)).collect()
        };
        reports.push(check_descent_lemma(
            &d.inst,
            &x,
            &g,
            d.gamma,
            d.smoothness,
            cfg.tie_rule,
        )?);
    }
    let name = if exact_gradient {
        "descent_lemma_exact_gradient"
    } else {
        "descent_lemma"
    };
    let mut row = aggregate(name, &reports);
    for key in ["rhs_g_variant", "rhs_unscaled_x_variant"] {
        let ok = reports
            .iter()
            .filter(|r| r.lhs - r.diagnostic(key).unwrap_or(f64::NAN) <= r.tolerance)
            .count();
        let label = format!("passed_{}", key.trim_start_matches("rhs_"));
        row.diagnostics.push((label, ok as f64));
    }
    Ok(row)
}

fn expectation_checks(cfg: &SuiteConfig, margin: bool) -> Result<CheckReport> {
    let d = descent_setup(cfg, 8, 8)?;
    let mut rng = substream(
        cfg.seed,
        if margin {
            "suite/margin"
        } else {
            "suite/expected"
        },
    );
    let c = empirical_c(&d.inst, d.s, 2000, &mut rng)?.value;
    let b = batch_size_lower_bound(d.inst.n_samples(), d.smoothness, d.gamma, c)?.min_batch;
    let settings = ExpectationSettings {
        tie_rule: cfg.tie_rule,
        enumeration_cap: cfg.enumeration_cap,
        mc_draws: cfg.mc_draws,
        seed: cfg.seed,
    };
    let mut reports = Vec::new();
    for _ in 0..20 {
        let x = random_iterate(d.inst.dim(), d.s, cfg.tie_rule, &mut rng)?;
        reports.push(if margin {
            check_variance_margin(&d.inst, &x, d.gamma, d.smoothness, b, c, &settings)?
        } else {
            check_expected_descent(&d.inst, &x, d.gamma, d.smoothness, b, c, &settings)?
        });
    }
    let mut row = aggregate(
        if margin {
            "variance_margin"
        } else {
            "expected_descent"
        },
        &reports,
    );
    row.diagnostics.push(("c".into(), c));
    row.diagnostics.push(("batch_size".into(), b as f64));
    Ok(row)
}

/// Ratio bound sweep: for each instance, random `J` (uniform size in `[1, n]`)
/// and random `s`-sparse `x`. Cases with zero restricted full gradient are
/// excluded.
pub fn claim_sweep<R: Rng>(
    instances: &[ProblemInstance],
    cases_per_instance: usize,
    s: usize,
    rng: &mut R,
) -> Result<CheckReport> {
    let mut reports = Vec::new();
    let mut skipped = 0usize;
    for inst in instances {
        let n = inst.dim();
        for _ in 0..cases_per_instance {
            let size = rng.random_range(1..=n);
            let j = random_support(n, size, rng);
            let x = random_sparse_point(n, s.min(n), rng);
            let b = claim_c_bound(inst, &j, &x)?;
            if b.gradient_is_zero() {
                skipped += 1;
                continue;
            }
            let lhs = b.sum_sample_sq;
            let rhs = b.bound * b.full_sq;
            reports.push(CheckReport {
                name: String::new(),
                status: if b.holds {
                    CheckStatus::ExactPass
                } else {
                    CheckStatus::Fail
                },
                lhs,
                rhs,
                gap: lhs - rhs,
                tolerance: 1e-12 * rhs,
                trials: 1,
                seed: None,
                diagnostics: vec![("j_size".into(), size as f64), ("bound".into(), b.bound)],
            });
        }
    }
    if reports.is_empty() {
        return Err(invalid("every sampled restricted gradient vanished"));
    }
    let mut row = aggregate("claim_bound", &reports);
    row.diagnostics
        .push(("skipped_zero_gradient".into(), skipped as f64));
    Ok(row)
}

fn claim_bound(cfg: &SuiteConfig) -> Result<CheckReport> {
    let mut rng = substream(cfg.seed, "suite/claim");
    let instances = (0..10)
        .map(|k| least_squares(8, 8, 3, cfg.seed.wrapping_add(100 + k)))
        .collect::<Result<Vec<_>>>()?;
    claim_sweep(&instances, 20, 3, &mut rng)
}

fn supermartingale(cfg: &SuiteConfig) -> Result<(CheckReport, CheckReport)> {
    let (inst, _) = planted_instance(&SyntheticSpec {
        n_samples: 20,
        dim: 30,
        s_true: 3,
        noise_sigma: 0.0,
        loss: LossKind::LeastSquares,
        seed: cfg.seed.wrapping_add(7),
    })?;
    let smoothness = smoothness_modulus(&inst, 3, SmoothnessMethod::SpectralUpperBound)?.modulus;
    let gamma = 0.9 / smoothness;
    let mut rng = substream(cfg.seed, "suite/supermartingale");
    let c = empirical_c(&inst, 3, 2000, &mut rng)?.value;
    let batch_size = batch_size_lower_bound(20, smoothness, gamma, c)?.min_batch;
    let config = SolverConfig {
        sparsity: 3,
        gamma,
        smoothness,
        batch_size,
        max_iters: 5000,
        seed: cfg.seed,
        c_constant: c,
        tie_rule: cfg.tie_rule,
        window: SolverConfig::DEFAULT_WINDOW,
    };
    let seeds: Vec<u64> = (0..20).map(|k| cfg.seed.wrapping_add(k)).collect();
    let trajectories = run_ensemble(&inst, &config, &seeds)
        .into_iter()
        .map(|r| r.map(|s| s.trajectory))
        .collect::<Result<Vec<_>>>()?;
    let settings = SupermartingaleSettings {
        expectation: ExpectationSettings {
            tie_rule: cfg.tie_rule,
            enumeration_cap: cfg.enumeration_cap,
            mc_draws: cfg.mc_draws,
            seed: cfg.seed,
        },
        ..Default::default()
    };
    let out = check_supermartingale(&inst, &config, &trajectories, &settings)?;
    Ok((out.conditional, out.tail))
}

/// Runs every check, or only `only`. Unknown names are rejected.
pub fn run_suite(cfg: &SuiteConfig, only: Option<&str>) -> Result<Vec<CheckReport>> {
    if let Some(name) = only {
        if !CHECK_NAMES.contains(&name) {
            return Err(invalid(format!(
                "unknown check `{name}`; available: {}",
                CHECK_NAMES.join(", ")
            )));
        }
    }
    if cfg.max_population < 2 {
        return Err(invalid("max_population must be at least 2"));
    }
    let want = |n: &str| only.is_none_or(|o| o == n);
    let mut out = Vec::new();
    if want("ht_optimality") {
        out.push(ht_optimality(cfg)?);
    }
    if want("inclusion_covariance") {
        out.push(inclusion_cov(cfg)?);
    }
    if want("unbiased_minibatch") {
        out.push(unbiased(cfg)?);
    }
    if want("sample_average_identity") {
        out.push(identity_sweep(cfg, false)?);
    }
    if want("distance_identity") {
        out.push(identity_sweep(cfg, true)?);
    }
    if want("gradient_fd") {
        out.push(gradient_fd(cfg)?);
    }
    if want("descent_lemma_exact_gradient") {
        out.push(descent_lemma(cfg, true)?);
    }
    if want("descent_lemma") {
        out.push(descent_lemma(cfg, false)?);
    }
    if want("expected_descent") {
        out.push(expectation_checks(cfg, false)?);
    }
    if want("variance_margin") {
        out.push(expectation_checks(cfg, true)?);
    }
    if want("claim_bound") {
        out.push(claim_bound(cfg)?);
    }
    if want("supermartingale_conditional") || want("supermartingale_tail") {
        let (cond, tail) = supermartingale(cfg)?;
        if want("supermartingale_conditional") {
            out.push(cond);
        }
        if want("supermartingale_tail") {
            out.push(tail);
        }
    }
    Ok(out)
}
