mod config;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use siht::io::{self, fmt_f64, join_indices};
use siht::objectives::{claim_c_estimate, empirical_c, smoothness_modulus, SmoothnessMethod};
use siht::rng::substream;
use siht::sampling::{batch_size_lower_bound, scaled_descent_coefficient, zeta, BatchSizeBound};
use siht::suite::run_suite;
use siht::synthetic::{planted_instance, SyntheticSpec};
use siht::verify::{report_csv, tail_oscillation};
use siht::{siht_run, ProblemInstance, SihtError, SolverConfig};

use config::{CSpec, ExperimentConfig, SmoothnessSpec, Source, StepSpec};

#[derive(Parser)]
#[command(
    name = "siht",
    version,
    about = "Mini-batch stochastic iterative hard thresholding"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a planted synthetic instance (V.csv, y.csv, ground_truth.csv).
    Gen(Common),
    /// Estimate L_s and c and print the admissible batch size.
    Bound(Common),
    /// Run the solver for every configured seed.
    Solve(Common),
    /// Run the checker suite and write report.csv.
    Verify(Common),
    /// Sweep batch sizes and step sizes over the configured seeds.
    Bench(Common),
}

#[derive(Args)]
struct Common {
    /// Flat key=value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Restrict `verify` to one check.
    #[arg(long)]
    only: Option<String>,
    /// Override a configuration key (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// List configuration keys and exit.
    #[arg(long)]
    list_keys: bool,
}

enum CliError {
    /// Bad arguments or input files: exit code 2.
    Input(String),
    /// Failed checks or runtime failures: exit code 1.
    Failure(String),
}

impl From<SihtError> for CliError {
    fn from(e: SihtError) -> Self {
        match e {
            SihtError::Degenerate(_)
            | SihtError::NonFiniteObjective { .. }
            | SihtError::MonotonicityViolation { .. } => CliError::Failure(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn load_config(common: &Common) -> CliResult<ExperimentConfig> {
    let mut cfg = ExperimentConfig::default();
    if let Some(path) = &common.config {
        cfg.apply_file(path).map_err(CliError::Input)?;
    }
    for s in &common.set {
        cfg.apply_override(s).map_err(CliError::Input)?;
    }
    if let Some(seed) = common.seed {
        cfg.set("seed", &seed.to_string())
            .map_err(CliError::Input)?;
    }
    if let Some(out) = &common.out {
        cfg.out = out.clone();
    }
    Ok(cfg)
}

fn synthetic_spec(cfg: &ExperimentConfig) -> Option<SyntheticSpec> {
    match cfg.source {
        Source::Synthetic {
            n_samples,
            dim,
            s_true,
            noise_sigma,
            ..
        } => Some(SyntheticSpec {
            n_samples,
            dim,
            s_true,
            noise_sigma,
            loss: cfg.loss,
            seed: cfg.instance_seed(),
        }),
        Source::Csv(_) => None,
    }
}

fn load_instance(cfg: &ExperimentConfig) -> CliResult<(ProblemInstance, Option<Vec<f64>>)> {
    match &cfg.source {
        Source::Csv(dir) => Ok((io::read_instance(dir, cfg.loss)?, None)),
        Source::Synthetic { .. } => {
            let spec = synthetic_spec(cfg).expect("synthetic source");
            let (inst, x) = planted_instance(&spec)?;
            Ok((inst, Some(x)))
        }
    }
}

fn sparsity(cfg: &ExperimentConfig) -> CliResult<usize> {
    match (cfg.sparsity, &cfg.source) {
        (Some(s), _) => Ok(s),
        (None, Source::Synthetic { s_true, .. }) => Ok(*s_true),
        (None, Source::Csv(_)) => Err(CliError::Input(
            "`sparsity` must be set when loading data from CSV".into(),
        )),
    }
}

/// Everything a run needs beyond the instance.
struct Plan {
    s: usize,
    smoothness: f64,
    smoothness_label: &'static str,
    gamma: f64,
    c: f64,
    c_label: &'static str,
    bound: Option<BatchSizeBound>,
}

fn smoothness(
    cfg: &ExperimentConfig,
    inst: &ProblemInstance,
    s: usize,
) -> CliResult<(f64, &'static str)> {
    match cfg.smoothness {
        SmoothnessSpec::Value(v) => Ok((v, "fixed")),
        SmoothnessSpec::Method(m) => Ok((smoothness_modulus(inst, s, m)?.modulus, m.name())),
    }
}

fn estimate_c(
    cfg: &ExperimentConfig,
    inst: &ProblemInstance,
    s: usize,
) -> CliResult<(f64, &'static str)> {
    let mut rng = substream(cfg.seed, "siht/c");
    match cfg.c {
        CSpec::Value(v) => Ok((v, "fixed")),
        CSpec::Empirical => Ok((
            empirical_c(inst, s, cfg.c_trials, &mut rng)?.value,
            "empirical_search",
        )),
        CSpec::Claim => Ok((
            claim_c_estimate(inst, s, cfg.c_trials, &mut rng)?.value,
            "claim_bound",
        )),
    }
}

fn plan_with_factor(
    cfg: &ExperimentConfig,
    inst: &ProblemInstance,
    step: StepSpec,
    c: (f64, &'static str),
) -> CliResult<Plan> {
    let s = sparsity(cfg)?;
    let (l, l_label) = smoothness(cfg, inst, s)?;
    let gamma = match step {
        StepSpec::Factor(f) => f / l,
        StepSpec::Absolute(g) => g,
    };
    let bound = if inst.n_samples() >= 2 {
        Some(batch_size_lower_bound(inst.n_samples(), l, gamma, c.0)?)
    } else {
        None
    };
    Ok(Plan {
        s,
        smoothness: l,
        smoothness_label: l_label,
        gamma,
        c: c.0,
        c_label: c.1,
        bound,
    })
}

fn solver_config(
    cfg: &ExperimentConfig,
    plan: &Plan,
    batch: Option<usize>,
    seed: u64,
) -> SolverConfig {
    let batch_size = batch.unwrap_or_else(|| plan.bound.map_or(1, |b| b.min_batch));
    SolverConfig {
        sparsity: plan.s,
        gamma: plan.gamma,
        smoothness: plan.smoothness,
        batch_size,
        max_iters: cfg.max_iters,
        seed,
        c_constant: plan.c,
        tie_rule: cfg.tie_rule,
        window: cfg.window,
    }
}

fn cmd_gen(cfg: &ExperimentConfig) -> CliResult<()> {
    let spec = synthetic_spec(cfg)
        .ok_or_else(|| CliError::Input("`gen` needs a synthetic source, not data_dir".into()))?;
    let (inst, x) = planted_instance(&spec)?;
    io::write_instance(&cfg.out, &inst, Some(&x))?;
    let nnz = x.iter().filter(|v| **v != 0.0).count();
    println!(
        "wrote {} ({} x {}, {} loss, {} planted nonzeros, seed {})",
        cfg.out.display(),
        inst.n_samples(),
        inst.dim(),
        inst.loss().name(),
        nnz,
        spec.seed
    );
    Ok(())
}

fn cmd_bound(cfg: &ExperimentConfig) -> CliResult<()> {
    let (inst, _) = load_instance(cfg)?;
    let s = sparsity(cfg)?;
    let n_samples = inst.n_samples();
    println!(
        "N = {n_samples}, n = {}, s = {s}, loss = {}",
        inst.dim(),
        inst.loss().name()
    );
    for m in [
        SmoothnessMethod::SpectralUpperBound,
        SmoothnessMethod::ExactRestricted,
    ] {
        match smoothness_modulus(&inst, s, m) {
            Ok(e) => println!("L_s[{}] = {}", m.name(), fmt_f64(e.modulus)),
            Err(e) => println!("L_s[{}] unavailable: {e}", m.name()),
        }
    }
    let mut rng = substream(cfg.seed, "siht/c");
    match empirical_c(&inst, s, cfg.c_trials, &mut rng) {
        Ok(c) => println!(
            "c[empirical_search] = {} (max ratio {}, {} used, {} skipped)",
            fmt_f64(c.value),
            fmt_f64(c.max_observed),
            c.used,
            c.skipped
        ),
        Err(e) => println!("c[empirical_search] unavailable: {e}"),
    }
    match claim_c_estimate(&inst, s, cfg.c_trials, &mut rng) {
        Ok(c) => println!("c[claim_bound] = {}", fmt_f64(c.value)),
        Err(e) => println!("c[claim_bound] unavailable: {e}"),
    }

    let c = estimate_c(cfg, &inst, s)?;
    let plan = plan_with_factor(cfg, &inst, cfg.step, c)?;
    println!(
        "using L_s = {} ({}), gamma = {}, c = {} ({})",
        fmt_f64(plan.smoothness),
        plan.smoothness_label,
        fmt_f64(plan.gamma),
        fmt_f64(plan.c),
        plan.c_label
    );
    let Some(bound) = plan.bound else {
        println!("S_B_min = 1 (N = 1)");
        return Ok(());
    };
    let lg = plan.smoothness * plan.gamma;
    let b = bound.min_batch;
    println!("degenerate = {}", bound.degenerate);
    if let Some(v) = bound.formula_value {
        println!("bound formula = {}", fmt_f64(v));
    }
    println!("S_B_min = {b}");
    println!("zeta = {}", fmt_f64(zeta(n_samples, b)?));
    println!("coefficient = {}", fmt_f64(bound.coefficient_at_min));
    println!(
        "scaled coefficient = {}",
        fmt_f64(scaled_descent_coefficient(n_samples, b, lg, plan.c)?)
    );
    let feasible = b <= n_samples && (bound.coefficient_nonnegative() || b == n_samples);
    println!("feasible = {feasible}");
    if feasible {
        Ok(())
    } else {
        Err(CliError::Failure("no feasible batch size".into()))
    }
}

fn cmd_solve(cfg: &ExperimentConfig) -> CliResult<()> {
    let (inst, x_star) = load_instance(cfg)?;
    let s = sparsity(cfg)?;
    let c = estimate_c(cfg, &inst, s)?;
    let plan = plan_with_factor(cfg, &inst, cfg.step, c)?;
    let seeds = cfg.solver_seeds();
    let base = solver_config(cfg, &plan, cfg.batch_size, cfg.seed);
    println!(
        "N = {}, n = {}, s = {}, L_s = {}, gamma = {}, c = {}, S_B = {}",
        inst.n_samples(),
        inst.dim(),
        plan.s,
        fmt_f64(plan.smoothness),
        fmt_f64(plan.gamma),
        fmt_f64(plan.c),
        base.batch_size
    );
    let results = siht::run_ensemble(&inst, &base, &seeds)
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;
    for r in &results {
        let path = cfg
            .out
            .join(format!("trajectory_seed{}.csv", r.trajectory.seed));
        io::write_text(&path, &io::trajectory_csv(&r.trajectory))?;
    }
    io::write_text(&cfg.out.join("summary.csv"), &io::summary_csv(&results))?;

    let planted: Option<Vec<usize>> =
        x_star.map(|x| (0..x.len()).filter(|&i| x[i] != 0.0).collect());
    let mut tail_ok = 0;
    for r in &results {
        let f: Vec<f64> = r.trajectory.objectives().collect();
        let osc = tail_oscillation(&f, cfg.window);
        let ok = osc.is_some_and(|o| o <= 1e-6);
        tail_ok += usize::from(ok);
        let recovered = planted
            .as_ref()
            .map(|p| {
                if p.as_slice() == r.final_iterate.support().indices() {
                    " recovered"
                } else {
                    ""
                }
            })
            .unwrap_or("");
        println!(
            "seed {}: f = {} after {} iterations ({}), support [{}]{}",
            r.trajectory.seed,
            fmt_f64(f[f.len() - 1]),
            r.trajectory.iterations(),
            r.stop_reason.name(),
            join_indices(r.final_iterate.support().indices()),
            recovered
        );
    }
    println!("tail criterion met on {tail_ok}/{} seeds", results.len());
    println!("wrote {}", cfg.out.display());
    Ok(())
}

fn cmd_verify(cfg: &ExperimentConfig, only: Option<&str>) -> CliResult<()> {
    let reports = run_suite(&cfg.suite, only)?;
    io::write_text(&cfg.out.join("report.csv"), &report_csv(&reports))?;
    let mut failed = 0;
    for r in &reports {
        println!(
            "{:<30} {:<10} gap {} tol {} trials {}",
            r.name,
            r.status.name(),
            fmt_f64(r.gap),
            fmt_f64(r.tolerance),
            r.trials
        );
        for (k, v) in &r.diagnostics {
            println!("    {k} = {}", fmt_f64(*v));
        }
        failed += usize::from(!r.passed());
    }
    println!("wrote {}", cfg.out.join("report.csv").display());
    if failed > 0 {
        Err(CliError::Failure(format!("{failed} check(s) failed")))
    } else {
        Ok(())
    }
}

fn cmd_bench(cfg: &ExperimentConfig) -> CliResult<()> {
    let start = Instant::now();
    let (inst, _) = load_instance(cfg)?;
    let s = sparsity(cfg)?;
    let c = estimate_c(cfg, &inst, s)?;
    let seeds = cfg.solver_seeds();
    let mut jobs = Vec::new();
    for &factor in &cfg.bench_gamma_factors {
        let plan = plan_with_factor(cfg, &inst, StepSpec::Factor(factor), c)?;
        for &batch in &cfg.bench_batch_sizes {
            for &seed in &seeds {
                jobs.push((factor, solver_config(cfg, &plan, batch, seed)));
            }
        }
    }
    let rows = jobs
        .par_iter()
        .map(|(factor, sc)| {
            let r = siht_run(&inst, sc)?;
            let f: Vec<f64> = r.trajectory.objectives().collect();
            let osc = tail_oscillation(&f, cfg.window).unwrap_or(f64::INFINITY);
            Ok(format!(
                "{},{},{},{},{},{},{}\n",
                fmt_f64(*factor),
                sc.batch_size,
                sc.seed,
                fmt_f64(f[f.len() - 1]),
                r.trajectory.iterations(),
                r.stop_reason.name(),
                fmt_f64(osc)
            ))
        })
        .collect::<Result<Vec<String>, SihtError>>()?;
    let mut csv = String::from(
        "gamma_factor,batch_size,seed,final_f,iterations,stop_reason,tail_oscillation\n",
    );
    csv.extend(rows);
    io::write_text(&cfg.out.join("bench.csv"), &csv)?;
    println!(
        "{} runs in {:.2} s; wrote {}",
        jobs.len(),
        start.elapsed().as_secs_f64(),
        cfg.out.join("bench.csv").display()
    );
    Ok(())
}

fn run(cli: Cli) -> CliResult<()> {
    let (common, name) = match &cli.command {
        Command::Gen(c) => (c, "gen"),
        Command::Bound(c) => (c, "bound"),
        Command::Solve(c) => (c, "solve"),
        Command::Verify(c) => (c, "verify"),
        Command::Bench(c) => (c, "bench"),
    };
    if common.list_keys {
        for (k, doc) in config::KEYS {
            println!("{k:<22} {doc}");
        }
        return Ok(());
    }
    if common.only.is_some() && name != "verify" {
        return Err(CliError::Input("--only applies to `verify`".into()));
    }
    let cfg = load_config(common)?;
    match cli.command {
        Command::Gen(_) => cmd_gen(&cfg),
        Command::Bound(_) => cmd_bound(&cfg),
        Command::Solve(_) => cmd_solve(&cfg),
        Command::Verify(ref c) => cmd_verify(&cfg, c.only.as_deref()),
        Command::Bench(_) => cmd_bench(&cfg),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Failure(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
