//! Acceptance criteria, one PASS/FAIL line each.
//!
//! Oracles live here and do not call the code paths they judge: objectives,
//! gradients, batch enumeration and the ratio bound are recomputed from the
//! raw design matrix. Library results are compared against them.
//!
//! Criteria listed in `KNOWN_FAILURES` still run and still print FAIL; they do
//! not fail the process unless `SIHT_STRICT=1` is set.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use itertools::Itertools;
use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use siht::hardthreshold::{hard_threshold, TieRule};
use siht::io::trajectory_csv;
use siht::objectives::{
    claim_c_bound, empirical_c, full_gradient, gradient_matrix, sample_gradient,
    smoothness_modulus, GradientMatrix, SmoothnessMethod,
};
use siht::rng::{seeded_rng, substream, SihtRng};
use siht::sampling::{batch_size_lower_bound, zeta, BatchSample};
use siht::solver::{iht_run, run_ensemble, siht_run, MONOTONE_SLACK};
use siht::suite::{run_suite, SuiteConfig};
use siht::synthetic::{planted_instance, SyntheticSpec};
use siht::verify::{
    check_distance_identity, check_expected_descent, check_sample_average_identity,
    check_supermartingale, check_variance_margin, report_csv, ExpectationSettings,
    SupermartingaleSettings,
};
use siht::{LossKind, ProblemInstance, SolverConfig, SparseIterate};

/// Ratio bound violations are genuine; see the project notes.
const KNOWN_FAILURES: &[&str] = &["AC9"];

struct Outcome {
    id: &'static str,
    title: &'static str,
    pass: bool,
    detail: String,
    elapsed: Duration,
}

// ---------------------------------------------------------------- oracles

fn row(inst: &ProblemInstance, i: usize) -> Vec<f64> {
    (0..inst.dim()).map(|j| inst.design()[(i, j)]).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| u * v).sum()
}

fn oracle_softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

fn oracle_sample_loss(inst: &ProblemInstance, i: usize, x: &[f64]) -> f64 {
    let t = dot(&row(inst, i), x);
    let y = inst.targets()[i];
    match inst.loss() {
        LossKind::LeastSquares => (t - y) * (t - y),
        LossKind::Logistic => oracle_softplus(t) - y * t,
    }
}

fn oracle_loss(inst: &ProblemInstance, x: &[f64]) -> f64 {
    (0..inst.n_samples())
        .map(|i| oracle_sample_loss(inst, i, x))
        .sum::<f64>()
        / inst.n_samples() as f64
}

/// Least-squares per-sample gradient `2 r_i V_i`.
fn oracle_ls_sample_grad(inst: &ProblemInstance, i: usize, x: &[f64]) -> Vec<f64> {
    let v = row(inst, i);
    let r = dot(&v, x) - inst.targets()[i];
    v.iter().map(|a| 2.0 * r * a).collect()
}

fn oracle_ls_batch_grad(inst: &ProblemInstance, batch: &[usize], x: &[f64]) -> Vec<f64> {
    let mut g = vec![0.0; inst.dim()];
    for &i in batch {
        for (gj, v) in g.iter_mut().zip(oracle_ls_sample_grad(inst, i, x)) {
            *gj += v;
        }
    }
    g.iter().map(|v| v / batch.len() as f64).collect()
}

fn oracle_step(
    inst: &ProblemInstance,
    x: &SparseIterate,
    gamma: f64,
    batch: &[usize],
) -> SparseIterate {
    let g = oracle_ls_batch_grad(inst, batch, x.vector());
    let z: Vec<f64> = x
        .vector()
        .iter()
        .zip(&g)
        .map(|(a, b)| a - gamma * b)
        .collect();
    hard_threshold(&z, x.support().len(), TieRule::LowestIndex).unwrap()
}

fn norm_sq_on(v: &[f64], idx: &[usize]) -> f64 {
    idx.iter().map(|&i| v[i] * v[i]).sum()
}

fn rel_gap(a: f64, b: f64, scale: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(scale).max(f64::MIN_POSITIVE)
}

fn random_matrix(rng: &mut SihtRng, n_samples: usize) -> GradientMatrix {
    let dim = rng.random_range(1..=5usize);
    let scale = 10f64.powf(rng.random_range(-2.0..2.0));
    let cols: Vec<Vec<f64>> = (0..n_samples)
        .map(|_| {
            (0..dim)
                .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
                .collect()
        })
        .collect();
    GradientMatrix::from_columns(&cols).unwrap()
}

fn columns(g: &GradientMatrix) -> Vec<Vec<f64>> {
    (0..g.count())
        .map(|i| g.columns().column(i).iter().copied().collect())
        .collect()
}

fn oracle_batch_mean(cols: &[Vec<f64>], batch: &[usize]) -> Vec<f64> {
    let mut m = vec![0.0; cols[0].len()];
    for &i in batch {
        for (a, v) in m.iter_mut().zip(&cols[i]) {
            *a += v;
        }
    }
    m.iter().map(|v| v / batch.len() as f64).collect()
}

fn planted(n_samples: usize, dim: usize, s_true: usize, sigma: f64, seed: u64) -> ProblemInstance {
    planted_instance(&SyntheticSpec {
        n_samples,
        dim,
        s_true,
        noise_sigma: sigma,
        loss: LossKind::LeastSquares,
        seed,
    })
    .unwrap()
    .0
}

fn random_feasible(rng: &mut SihtRng, n: usize, s: usize) -> SparseIterate {
    let x = siht::objectives::random_sparse_point(n, s, rng);
    hard_threshold(&x, s, TieRule::LowestIndex).unwrap()
}

// ---------------------------------------------------------------- criteria

fn ac1() -> Outcome {
    let start = Instant::now();
    let mut rng = seeded_rng(1001);
    let (mut cases, mut bad) = (0usize, 0usize);
    for v in 0..1000 {
        let n = rng.random_range(2..=10usize);
        let x: Vec<f64> = if v % 2 == 0 {
            (0..n).map(|_| rng.random_range(-3i32..=3) as f64).collect()
        } else {
            (0..n).map(|_| rng.sample(StandardNormal)).collect()
        };
        for s in 1..n {
            let best = (0..n)
                .combinations(s)
                .map(|sup| {
                    (0..n)
                        .filter(|i| !sup.contains(i))
                        .map(|i| x[i] * x[i])
                        .sum::<f64>()
                })
                .fold(f64::INFINITY, f64::min);
            for rule in [TieRule::LowestIndex, TieRule::HighestIndex] {
                let y = hard_threshold(&x, s, rule).unwrap();
                let d: f64 = x
                    .iter()
                    .zip(y.vector().iter())
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                cases += 1;
                bad += usize::from(d != best || y.vector().l0() > s);
            }
        }
    }
    let elapsed = start.elapsed();
    Outcome {
        id: "AC1",
        title: "hard thresholding matches exhaustive search",
        pass: bad == 0 && elapsed < Duration::from_secs(10),
        detail: format!("{cases} (vector, s, rule) cases, {bad} mismatches"),
        elapsed,
    }
}

/// Shared sweep for the two sampling identities.
fn identity_sweep(distance: bool, seed: u64) -> (usize, usize, f64) {
    let mut rng = seeded_rng(seed);
    let (mut cases, mut bad, mut worst) = (0usize, 0usize, 0.0f64);
    for n_samples in 2..=7usize {
        for _ in 0..50 {
            let g = random_matrix(&mut rng, n_samples);
            let cols = columns(&g);
            let mean = oracle_batch_mean(&cols, &(0..n_samples).collect::<Vec<_>>());
            let scale = cols.iter().map(|c| dot(c, c)).sum::<f64>() / n_samples as f64;
            for b in 1..=n_samples {
                let (mut e_sq, mut e_dev, mut count) = (0.0, 0.0, 0.0);
                for batch in (0..n_samples).combinations(b) {
                    let m = oracle_batch_mean(&cols, &batch);
                    e_sq += dot(&m, &m);
                    let d: Vec<f64> = m.iter().zip(&mean).map(|(a, c)| a - c).collect();
                    e_dev += dot(&d, &d);
                    count += 1.0;
                }
                e_sq /= count;
                e_dev /= count;
                let gap = if distance {
                    let r = check_distance_identity(&g, b, 1_000_000).unwrap();
                    let closed_centered = r.diagnostics[0].1;
                    bad += usize::from(!r.passed());
                    rel_gap(e_dev, r.lhs, scale)
                        .max(rel_gap(e_dev, r.rhs, scale))
                        .max(rel_gap(e_dev, closed_centered, scale))
                } else {
                    let r = check_sample_average_identity(&g, b, 1_000_000).unwrap();
                    bad += usize::from(!r.passed());
                    rel_gap(e_sq, r.lhs, scale).max(rel_gap(e_sq, r.rhs, scale))
                };
                worst = worst.max(gap);
                bad += usize::from(gap > 1e-10);
                cases += 1;
            }
        }
    }
    (cases, bad, worst)
}

fn ac2() -> Outcome {
    let start = Instant::now();
    let (cases, bad, worst) = identity_sweep(true, 2002);
    let elapsed = start.elapsed();
    Outcome {
        id: "AC2",
        title: "mini-batch deviation identity, three-way",
        pass: bad == 0 && elapsed < Duration::from_secs(30),
        detail: format!("{cases} (matrix, S_B) cases, {bad} failures, worst rel gap {worst:.3e}"),
        elapsed,
    }
}

fn ac3() -> Outcome {
    let start = Instant::now();
    let (cases, bad, worst) = identity_sweep(false, 3003);
    let elapsed = start.elapsed();
    Outcome {
        id: "AC3",
        title: "mini-batch second moment trace formula",
        pass: bad == 0 && elapsed < Duration::from_secs(30),
        detail: format!("{cases} (matrix, S_B) cases, {bad} failures, worst rel gap {worst:.3e}"),
        elapsed,
    }
}

fn fd_gap(analytic: &[f64], x: &[f64], f: impl Fn(&[f64]) -> f64) -> f64 {
    let mut p = x.to_vec();
    let mut err = 0.0f64;
    for j in 0..x.len() {
        let h = 1e-5 * (1.0 + x[j].abs());
        p[j] = x[j] + h;
        let up = f(&p);
        p[j] = x[j] - h;
        let down = f(&p);
        p[j] = x[j];
        err = err.max((analytic[j] - (up - down) / (2.0 * h)).abs());
    }
    err / analytic.iter().map(|v| v.abs()).fold(1.0, f64::max)
}

fn ac4() -> Outcome {
    let start = Instant::now();
    let mut rng = seeded_rng(4004);
    let (mut cases, mut bad, mut worst) = (0usize, 0usize, 0.0f64);
    for loss in [LossKind::LeastSquares, LossKind::Logistic] {
        let (inst, _) = planted_instance(&SyntheticSpec {
            n_samples: 12,
            dim: 7,
            s_true: 3,
            noise_sigma: 0.5,
            loss,
            seed: 4004,
        })
        .unwrap();
        for _ in 0..50 {
            let x: Vec<f64> = (0..7).map(|_| rng.sample(StandardNormal)).collect();
            let full = full_gradient(&inst, &x).unwrap();
            let mut gaps = vec![fd_gap(&full, &x, |p| oracle_loss(&inst, p))];
            for i in 0..inst.n_samples() {
                let g = sample_gradient(&inst, i, &x).unwrap();
                gaps.push(fd_gap(&g, &x, |p| oracle_sample_loss(&inst, i, p)));
            }
            for gap in gaps {
                worst = worst.max(gap);
                bad += usize::from(gap > 1e-6);
                cases += 1;
            }
        }
    }
    Outcome {
        id: "AC4",
        title: "gradients match central differences",
        pass: bad == 0,
        detail: format!(
            "{cases} gradients (both losses, full and per-sample), worst rel error {worst:.3e}"
        ),
        elapsed: start.elapsed(),
    }
}

struct DescentInstance {
    inst: ProblemInstance,
    smoothness: f64,
    gamma: f64,
    c: f64,
    batch_size: usize,
}

fn descent_instance() -> DescentInstance {
    let inst = planted(10, 8, 3, 0.1, 5005);
    let smoothness = smoothness_modulus(&inst, 3, SmoothnessMethod::SpectralUpperBound)
        .unwrap()
        .modulus;
    let gamma = 0.9 / smoothness;
    let c = empirical_c(&inst, 3, 2000, &mut substream(5005, "c"))
        .unwrap()
        .value;
    let batch_size = batch_size_lower_bound(10, smoothness, gamma, c)
        .unwrap()
        .min_batch;
    DescentInstance {
        inst,
        smoothness,
        gamma,
        c,
        batch_size,
    }
}

/// `(E f(Y(B)), E ‖∇_{I_Y} f(x)‖²)` over all batches of size `b`.
fn oracle_expectations(d: &DescentInstance, x: &SparseIterate, b: usize) -> (f64, f64) {
    let n_samples = d.inst.n_samples();
    let all: Vec<usize> = (0..n_samples).collect();
    let grad = oracle_ls_batch_grad(&d.inst, &all, x.vector());
    let (mut ef, mut eg, mut count) = (0.0, 0.0, 0.0);
    for batch in (0..n_samples).combinations(b) {
        let y = oracle_step(&d.inst, x, d.gamma, &batch);
        ef += oracle_loss(&d.inst, y.vector());
        eg += norm_sq_on(&grad, y.support().indices());
        count += 1.0;
    }
    (ef / count, eg / count)
}

fn ac5() -> Outcome {
    let start = Instant::now();
    let d = descent_instance();
    let mut rng = seeded_rng(5005);
    let all: Vec<usize> = (0..10).collect();
    let (mut bad, mut worst) = (0usize, f64::NEG_INFINITY);
    let mut below = vec![0usize; d.batch_size];
    let xs: Vec<SparseIterate> = (0..50).map(|_| random_feasible(&mut rng, 8, 3)).collect();
    for x in &xs {
        let fx = oracle_loss(&d.inst, x.vector());
        let grad = oracle_ls_batch_grad(&d.inst, &all, x.vector());
        let target = fx - 0.5 * d.gamma * norm_sq_on(&grad, x.support().indices());
        let tol = 1e-10 * (1.0 + fx.abs());
        let (ef, _) = oracle_expectations(&d, x, d.batch_size);
        let lib = check_expected_descent(
            &d.inst,
            x,
            d.gamma,
            d.smoothness,
            d.batch_size,
            d.c,
            &ExpectationSettings::default(),
        )
        .unwrap();
        worst = worst.max(ef - target);
        bad += usize::from(
            ef > target + tol || !lib.passed() || rel_gap(lib.lhs, ef, 1.0 + fx.abs()) > 1e-12,
        );
        // Not gated: the same inequality below the admissible batch size.
        for (b, holds) in below.iter_mut().enumerate().skip(1) {
            *holds += usize::from(oracle_expectations(&d, x, b).0 <= target + tol);
        }
    }
    let info: Vec<String> = below
        .iter()
        .enumerate()
        .skip(1)
        .map(|(b, h)| format!("S_B={b}:{h}/50"))
        .collect();
    let elapsed = start.elapsed();
    Outcome {
        id: "AC5",
        title: "expected one-step descent by enumeration",
        pass: bad == 0 && elapsed < Duration::from_secs(60),
        detail: format!(
            "N=10 n=8 s=3, c={:.4e}, S_B={} (C(10,S_B) batches), 50 points, {bad} failures, max E f(Y) - target {worst:.3e}; below bound (informational) {}",
            d.c,
            d.batch_size,
            if info.is_empty() { "none".into() } else { info.join(" ") }
        ),
        elapsed,
    }
}

fn ac6() -> Outcome {
    let start = Instant::now();
    let d = descent_instance();
    let mut rng = seeded_rng(6006);
    let n = 10.0;
    let lg = d.smoothness * d.gamma;
    let a = (1.0 - lg) / (1.0 + lg);
    let z = zeta(10, d.batch_size).unwrap();
    let coefficient = if z == 0.0 {
        f64::INFINITY
    } else {
        1.0 - d.c / n + a / z
    };
    let scaled = z * (1.0 - d.c / n) + a;
    let all: Vec<usize> = (0..10).collect();
    let mut bad = 0usize;
    for _ in 0..20 {
        let x = random_feasible(&mut rng, 8, 3);
        let fx = oracle_loss(&d.inst, x.vector());
        let grad = oracle_ls_batch_grad(&d.inst, &all, x.vector());
        let (ef, eg) = oracle_expectations(&d, &x, d.batch_size);
        let rhs = fx
            - 0.5 * d.gamma * norm_sq_on(&grad, x.support().indices())
            - 0.5 * d.gamma * (1.0 + lg) * scaled * eg;
        let ok = ef <= rhs + 1e-10 * (1.0 + fx.abs()) && coefficient >= 0.0;
        let lib = check_variance_margin(
            &d.inst,
            &x,
            d.gamma,
            d.smoothness,
            d.batch_size,
            d.c,
            &ExpectationSettings::default(),
        )
        .unwrap();
        bad += usize::from(!ok || lib.passed() != ok);
    }
    Outcome {
        id: "AC6",
        title: "variance-margin inequality and coefficient sign",
        pass: bad == 0,
        detail: format!(
            "S_B={}, zeta={z:.4e}, coefficient={coefficient:.4e}, 20 points, {bad} failures",
            d.batch_size
        ),
        elapsed: start.elapsed(),
    }
}

fn ac7() -> Outcome {
    let start = Instant::now();
    let inst = planted(50, 100, 5, 0.1, 7007);
    let l = smoothness_modulus(&inst, 5, SmoothnessMethod::SpectralUpperBound)
        .unwrap()
        .modulus;
    let (mut bad, mut strict_ups, mut max_up) = (0usize, 0usize, 0.0f64);
    let mut parts = Vec::new();
    for factor in [0.3, 0.6, 0.9] {
        let config = SolverConfig {
            sparsity: 5,
            gamma: factor / l,
            smoothness: l,
            batch_size: 50,
            max_iters: 2000,
            seed: 7,
            c_constant: 50.0,
            tie_rule: TieRule::LowestIndex,
            // Longer than the run: no early stop.
            window: 2001,
        };
        let res = siht_run(&inst, &config).unwrap();
        let f: Vec<f64> = res.trajectory.objectives().collect();
        let mut violations = 0;
        for w in f.windows(2) {
            if w[1] > w[0] {
                strict_ups += 1;
                max_up = max_up.max(w[1] - w[0]);
            }
            violations += usize::from(w[1] > w[0] + MONOTONE_SLACK * (1.0 + w[0].abs()));
        }
        let guarded = iht_run(&inst, &config).is_ok();
        bad += violations + usize::from(!guarded || res.trajectory.iterations() != 2000);
        parts.push(format!(
            "{factor}/L: f {:.6e} -> {:.6e}",
            f[0],
            f[f.len() - 1]
        ));
    }
    Outcome {
        id: "AC7",
        title: "full-batch objective never increases",
        pass: bad == 0,
        detail: format!(
            "{}; {bad} violations; rounding-level increases {strict_ups} (max {max_up:.1e})",
            parts.join(", ")
        ),
        elapsed: start.elapsed(),
    }
}

fn ac8() -> Outcome {
    let start = Instant::now();
    let (inst, x_star) = planted_instance(&SyntheticSpec {
        n_samples: 50,
        dim: 100,
        s_true: 5,
        noise_sigma: 0.0,
        loss: LossKind::LeastSquares,
        // Same instance and c stream as the CLI defaults.
        seed: 0,
    })
    .unwrap();
    let l = smoothness_modulus(&inst, 5, SmoothnessMethod::SpectralUpperBound)
        .unwrap()
        .modulus;
    let gamma = 0.9 / l;
    let c = empirical_c(&inst, 5, 2000, &mut substream(0, "siht/c"))
        .unwrap()
        .value;
    let batch_size = batch_size_lower_bound(50, l, gamma, c).unwrap().min_batch;
    let config = SolverConfig {
        sparsity: 5,
        gamma,
        smoothness: l,
        batch_size,
        max_iters: 20_000,
        seed: 0,
        c_constant: c,
        tie_rule: TieRule::LowestIndex,
        window: SolverConfig::DEFAULT_WINDOW,
    };
    let seeds: Vec<u64> = (0..20).collect();
    let results: Vec<_> = run_ensemble(&inst, &config, &seeds)
        .into_iter()
        .map(Result::unwrap)
        .collect();
    let planted_support: Vec<usize> = (0..100).filter(|&i| x_star[i] != 0.0).collect();
    let recovered = results
        .iter()
        .filter(|r| r.final_iterate.support().indices() == planted_support.as_slice())
        .count();
    let small_f = results
        .iter()
        .filter(|r| r.trajectory.rows.last().unwrap().objective < 1e-8)
        .count();
    let worst_f = results
        .iter()
        .map(|r| r.trajectory.rows.last().unwrap().objective)
        .fold(0.0, f64::max);
    let trajectories: Vec<_> = results.into_iter().map(|r| r.trajectory).collect();
    let out = check_supermartingale(
        &inst,
        &config,
        &trajectories,
        &SupermartingaleSettings::default(),
    )
    .unwrap();
    let tail = out.tail_passes(1e-6);
    let elapsed = start.elapsed();
    Outcome {
        id: "AC8",
        title: "supermartingale proxy on the reference problem",
        pass: tail >= 18 && out.conditional.passed() && elapsed < Duration::from_secs(300),
        detail: format!(
            "S_B={batch_size} (c={c:.4e}), tail criterion {tail}/20, conditional decrease {} at {} iterates ({}); informational: f<1e-8 on {small_f}/20 (largest final f {worst_f:.3e}), planted support on {recovered}/20",
            if out.conditional.passed() { "holds" } else { "violated" },
            out.per_iterate.len(),
            out.conditional.status.name()
        ),
        elapsed,
    }
}

/// Independent evaluation of the ratio bound through the eigenvalues of the
/// `N × N` Gram matrix `V_J V_Jᵀ`.
fn oracle_claim_bound(inst: &ProblemInstance, j: &[usize]) -> f64 {
    let n_samples = inst.n_samples();
    let vj = DMatrix::from_fn(n_samples, j.len(), |i, a| inst.design()[(i, j[a])]);
    let gram = &vj * vj.transpose();
    let eig: Vec<f64> = gram
        .symmetric_eigenvalues()
        .iter()
        .map(|v| v.abs())
        .collect();
    let top = eig.iter().copied().fold(0.0, f64::max);
    let smallest_nonzero = eig
        .iter()
        .copied()
        .filter(|&v| v > 1e-10 * top)
        .fold(f64::INFINITY, f64::min);
    let max_row = (0..n_samples)
        .map(|i| {
            j.iter()
                .map(|&c| vj[(i, j.iter().position(|&x| x == c).unwrap())].powi(2))
                .sum::<f64>()
        })
        .fold(0.0, f64::max);
    (n_samples * n_samples) as f64 * max_row / (smallest_nonzero * smallest_nonzero)
}

fn ac9() -> Outcome {
    let start = Instant::now();
    let mut rng = seeded_rng(9009);
    let (mut cases, mut violated, mut skipped, mut mismatched) = (0usize, 0usize, 0usize, 0usize);
    let mut by_size = vec![(0usize, 0usize); 9];
    let mut worst_ratio = 0.0f64;
    for k in 0..10 {
        let inst = planted(10, 8, 3, 0.1, 9000 + k);
        for _ in 0..20 {
            let size = rng.random_range(1..=8usize);
            let j = siht::objectives::random_support(8, size, &mut rng);
            let x = siht::objectives::random_sparse_point(8, 3, &mut rng);
            let bound = oracle_claim_bound(&inst, j.indices());
            let lib = claim_c_bound(&inst, &j, &x).unwrap();
            mismatched += usize::from(rel_gap(lib.bound, bound, 0.0) > 1e-6);
            let sum_sample: f64 = (0..10)
                .map(|i| norm_sq_on(&oracle_ls_sample_grad(&inst, i, &x), j.indices()))
                .sum();
            let all: Vec<usize> = (0..10).collect();
            let full = norm_sq_on(&oracle_ls_batch_grad(&inst, &all, &x), j.indices());
            if full == 0.0 {
                skipped += 1;
                continue;
            }
            cases += 1;
            by_size[size].0 += 1;
            if sum_sample > bound * full * (1.0 + 1e-12) {
                violated += 1;
                by_size[size].1 += 1;
                worst_ratio = worst_ratio.max(sum_sample / (bound * full));
            }
        }
    }
    let sizes: Vec<String> = by_size
        .iter()
        .enumerate()
        .skip(1)
        .map(|(s, (n, v))| format!("|J|={s}:{v}/{n}"))
        .collect();
    Outcome {
        id: "AC9",
        title: "data-dependent bound on the per-sample gradient ratio",
        pass: violated == 0 && mismatched == 0,
        detail: format!(
            "{cases} cases ({skipped} zero-gradient skipped), {violated} violations, worst lhs/rhs {worst_ratio:.3e}, {mismatched} bound mismatches; violations by size {}",
            sizes.join(" ")
        ),
        elapsed: start.elapsed(),
    }
}

fn ac10() -> Outcome {
    let start = Instant::now();
    let inst = planted(30, 40, 3, 0.1, 1010);
    let l = smoothness_modulus(&inst, 3, SmoothnessMethod::SpectralUpperBound)
        .unwrap()
        .modulus;
    let config = SolverConfig {
        sparsity: 3,
        gamma: 0.9 / l,
        smoothness: l,
        batch_size: 7,
        max_iters: 3000,
        seed: 11,
        c_constant: 30.0,
        tie_rule: TieRule::LowestIndex,
        window: SolverConfig::DEFAULT_WINDOW,
    };
    let dir = tempfile::tempdir().unwrap();
    let mut same = true;
    for run in 0..2 {
        let csv = trajectory_csv(&siht_run(&inst, &config).unwrap().trajectory);
        let report = report_csv(&run_suite(&SuiteConfig::default(), None).unwrap());
        std::fs::write(dir.path().join(format!("t{run}.csv")), csv).unwrap();
        std::fs::write(dir.path().join(format!("r{run}.csv")), report).unwrap();
    }
    for stem in ["t", "r"] {
        let a = std::fs::read(dir.path().join(format!("{stem}0.csv"))).unwrap();
        let b = std::fs::read(dir.path().join(format!("{stem}1.csv"))).unwrap();
        same &= a == b && !a.is_empty();
    }
    // A distinct seed must draw distinct batches.
    let other = siht_run(
        &inst,
        &SolverConfig {
            seed: 12,
            ..config.clone()
        },
    )
    .unwrap();
    let base = siht_run(&inst, &config).unwrap();
    let differs = other.trajectory.rows[1].batch != base.trajectory.rows[1].batch;
    let batch_ok = base.trajectory.rows[1..]
        .iter()
        .all(|r| BatchSample::new(30, r.batch.clone()).is_ok_and(|b| b.len() == 7));
    Outcome {
        id: "AC10",
        title: "byte-identical trajectory and report CSVs",
        pass: same && differs && batch_ok,
        detail: format!(
            "S_B=7 trajectory ({} rows) and full verify report compared across two runs: {}",
            base.trajectory.rows.len(),
            if same { "identical" } else { "different" }
        ),
        elapsed: start.elapsed(),
    }
}

fn main() -> ExitCode {
    let filters: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let strict = std::env::var("SIHT_STRICT").is_ok_and(|v| v == "1");
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("AC1", ac1),
        ("AC2", ac2),
        ("AC3", ac3),
        ("AC4", ac4),
        ("AC5", ac5),
        ("AC6", ac6),
        ("AC7", ac7),
        ("AC8", ac8),
        ("AC9", ac9),
        ("AC10", ac10),
    ];
    // Sanity check the oracle gradient against the library's matrix form once.
    let probe = planted(4, 3, 1, 0.1, 1);
    let gm = gradient_matrix(&probe, &[0.3, -0.2, 0.1]).unwrap();
    assert!(
        rel_gap(
            gm.columns()[(0, 0)],
            oracle_ls_sample_grad(&probe, 0, &[0.3, -0.2, 0.1])[0],
            1.0
        ) < 1e-14
    );

    let mut unexpected = 0;
    for (id, run) in criteria {
        if !filters.is_empty() && !filters.iter().any(|f| id == f || id.contains(f.as_str())) {
            continue;
        }
        let o = run();
        let known = KNOWN_FAILURES.contains(&o.id);
        let tag = match (o.pass, known) {
            (true, _) => "PASS",
            (false, true) => "FAIL (known)",
            (false, false) => "FAIL",
        };
        println!(
            "{:<5} {tag:<12} {} [{:.2}s]: {}",
            o.id,
            o.title,
            o.elapsed.as_secs_f64(),
            o.detail
        );
        if !o.pass && (!known || strict) {
            unexpected += 1;
        }
    }
    if unexpected > 0 {
        println!("{unexpected} criteria failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
