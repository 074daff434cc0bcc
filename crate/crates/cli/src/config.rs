//! Flat `key = value` experiment configuration.
//!
//! Lines are `key = value`; `#` starts a comment. Unknown keys are errors.
//! Later assignments win, so `--set` overrides are applied after the file.

use std::path::{Path, PathBuf};

use siht::hardthreshold::TieRule;
use siht::objectives::SmoothnessMethod;
use siht::suite::SuiteConfig;
use siht::types::LossKind;

pub const KEYS: &[(&str, &str)] = &[
    ("n_samples", "synthetic: number of samples N"),
    ("dim", "synthetic: dimension n"),
    ("s_true", "synthetic: nonzeros in the planted vector"),
    (
        "noise_sigma",
        "synthetic: additive noise level (least squares)",
    ),
    (
        "instance_seed",
        "synthetic: generator seed (defaults to `seed`)",
    ),
    (
        "data_dir",
        "load V.csv and y.csv from this directory instead of generating",
    ),
    ("loss", "least_squares | logistic"),
    ("sparsity", "sparsity level s (defaults to s_true)"),
    ("gamma", "absolute step size; overrides gamma_factor"),
    ("gamma_factor", "step size as a multiple of 1/L_s"),
    ("smoothness", "fixed L_s; overrides smoothness_method"),
    (
        "smoothness_method",
        "spectral_upper_bound | exact_restricted",
    ),
    (
        "batch_size",
        "integer, or `auto` for the smallest admissible size",
    ),
    ("c", "number, `empirical`, or `claim`"),
    ("c_trials", "random draws for c estimation"),
    ("max_iters", "iteration cap per run"),
    ("seed", "master seed"),
    ("seeds", "solver seeds: `a..b` (half-open) or a comma list"),
    ("tie_rule", "lowest_index | highest_index"),
    ("window", "stopping-rule window W"),
    ("out", "output directory"),
    ("max_population", "verify: largest N in the identity sweeps"),
    ("matrices_per_size", "verify: random matrices per (N, S_B)"),
    (
        "lemma_cases",
        "verify: random (x, g) pairs for the single-step inequality",
    ),
    (
        "enumeration_cap",
        "largest C(N, S_B) evaluated by enumeration",
    ),
    (
        "mc_draws",
        "Monte Carlo draws when enumeration is over the cap",
    ),
    (
        "bench_batch_sizes",
        "bench: comma list of batch sizes (`auto` allowed)",
    ),
    (
        "bench_gamma_factors",
        "bench: comma list of step-size factors",
    ),
];

#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    Synthetic {
        n_samples: usize,
        dim: usize,
        s_true: usize,
        noise_sigma: f64,
        instance_seed: Option<u64>,
    },
    Csv(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepSpec {
    Factor(f64),
    Absolute(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SmoothnessSpec {
    Method(SmoothnessMethod),
    Value(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CSpec {
    Empirical,
    Claim,
    Value(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub source: Source,
    pub loss: LossKind,
    pub sparsity: Option<usize>,
    pub step: StepSpec,
    pub smoothness: SmoothnessSpec,
    /// `None` selects the smallest admissible size.
    pub batch_size: Option<usize>,
    pub c: CSpec,
    pub c_trials: usize,
    pub max_iters: usize,
    pub seed: u64,
    pub seeds: Option<Vec<u64>>,
    pub tie_rule: TieRule,
    pub window: usize,
    pub out: PathBuf,
    pub suite: SuiteConfig,
    pub bench_batch_sizes: Vec<Option<usize>>,
    pub bench_gamma_factors: Vec<f64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            source: Source::Synthetic {
                n_samples: 50,
                dim: 100,
                s_true: 5,
                noise_sigma: 0.0,
                instance_seed: None,
            },
            loss: LossKind::LeastSquares,
            sparsity: None,
            step: StepSpec::Factor(0.9),
            smoothness: SmoothnessSpec::Method(SmoothnessMethod::SpectralUpperBound),
            batch_size: None,
            c: CSpec::Empirical,
            c_trials: 2000,
            max_iters: 20_000,
            seed: 0,
            seeds: None,
            tie_rule: TieRule::LowestIndex,
            window: 200,
            out: PathBuf::from("out"),
            suite: SuiteConfig::default(),
            bench_batch_sizes: vec![None],
            bench_gamma_factors: vec![0.3, 0.6, 0.9],
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, String>
where
    T::Err: std::fmt::Display,
{
    v.parse::<T>()
        .map_err(|e| format!("`{key}`: cannot parse `{v}`: {e}"))
}

fn parse_batch(key: &str, v: &str) -> Result<Option<usize>, String> {
    if v == "auto" {
        Ok(None)
    } else {
        parse_num(key, v).map(Some)
    }
}

pub fn parse_seeds(v: &str) -> Result<Vec<u64>, String> {
    if let Some((a, b)) = v.split_once("..") {
        let a: u64 = parse_num("seeds", a.trim())?;
        let b: u64 = parse_num("seeds", b.trim())?;
        if b <= a {
            return Err(format!("`seeds`: empty range `{v}`"));
        }
        return Ok((a..b).collect());
    }
    v.split(',').map(|t| parse_num("seeds", t.trim())).collect()
}

impl ExperimentConfig {
    fn synthetic_mut(
        &mut self,
    ) -> (
        &mut usize,
        &mut usize,
        &mut usize,
        &mut f64,
        &mut Option<u64>,
    ) {
        if let Source::Csv(_) = self.source {
            self.source = ExperimentConfig::default().source;
        }
        match &mut self.source {
            Source::Synthetic {
                n_samples,
                dim,
                s_true,
                noise_sigma,
                instance_seed,
            } => (n_samples, dim, s_true, noise_sigma, instance_seed),
            Source::Csv(_) => unreachable!(),
        }
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        let v = value.trim();
        match key {
            "n_samples" => *self.synthetic_mut().0 = parse_num(key, v)?,
            "dim" => *self.synthetic_mut().1 = parse_num(key, v)?,
            "s_true" => *self.synthetic_mut().2 = parse_num(key, v)?,
            "noise_sigma" => *self.synthetic_mut().3 = parse_num(key, v)?,
            "instance_seed" => *self.synthetic_mut().4 = Some(parse_num(key, v)?),
            "data_dir" => self.source = Source::Csv(PathBuf::from(v)),
            "loss" => self.loss = LossKind::parse(v).map_err(|e| e.to_string())?,
            "sparsity" => self.sparsity = Some(parse_num(key, v)?),
            "gamma" => self.step = StepSpec::Absolute(parse_num(key, v)?),
            "gamma_factor" => self.step = StepSpec::Factor(parse_num(key, v)?),
            "smoothness" => self.smoothness = SmoothnessSpec::Value(parse_num(key, v)?),
            "smoothness_method" => {
                self.smoothness = SmoothnessSpec::Method(match v {
                    "spectral_upper_bound" => SmoothnessMethod::SpectralUpperBound,
                    "exact_restricted" => SmoothnessMethod::ExactRestricted,
                    _ => return Err(format!("`smoothness_method`: unknown method `{v}`")),
                })
            }
            "batch_size" => self.batch_size = parse_batch(key, v)?,
            "c" => {
                self.c = match v {
                    "empirical" => CSpec::Empirical,
                    "claim" => CSpec::Claim,
                    _ => CSpec::Value(parse_num(key, v)?),
                }
            }
            "c_trials" => self.c_trials = parse_num(key, v)?,
            "max_iters" => self.max_iters = parse_num(key, v)?,
            "seed" => {
                self.seed = parse_num(key, v)?;
                self.suite.seed = self.seed;
            }
            "seeds" => self.seeds = Some(parse_seeds(v)?),
            "tie_rule" => self.tie_rule = TieRule::parse(v).map_err(|e| e.to_string())?,
            "window" => self.window = parse_num(key, v)?,
            "out" => self.out = PathBuf::from(v),
            "max_population" => self.suite.max_population = parse_num(key, v)?,
            "matrices_per_size" => self.suite.matrices_per_size = parse_num(key, v)?,
            "lemma_cases" => self.suite.lemma_cases = parse_num(key, v)?,
            "enumeration_cap" => self.suite.enumeration_cap = parse_num(key, v)?,
            "mc_draws" => self.suite.mc_draws = parse_num(key, v)?,
            "bench_batch_sizes" => {
                self.bench_batch_sizes = v
                    .split(',')
                    .map(|t| parse_batch(key, t.trim()))
                    .collect::<Result<_, _>>()?
            }
            "bench_gamma_factors" => {
                self.bench_gamma_factors = v
                    .split(',')
                    .map(|t| parse_num(key, t.trim()))
                    .collect::<Result<_, _>>()?
            }
            _ => return Err(format!("unknown configuration key `{key}`")),
        }
        if key == "tie_rule" {
            self.suite.tie_rule = self.tie_rule;
        }
        Ok(())
    }

    /// Applies `key = value` lines. `origin` names the source in errors.
    pub fn apply_text(&mut self, text: &str, origin: &str) -> Result<(), String> {
        for (ln, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| format!("{origin}:{}: expected `key = value`", ln + 1))?;
            self.set(k.trim(), v)
                .map_err(|e| format!("{origin}:{}: {e}", ln + 1))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        self.apply_text(&text, &path.display().to_string())
    }

    pub fn apply_override(&mut self, assignment: &str) -> Result<(), String> {
        let (k, v) = assignment
            .split_once('=')
            .ok_or_else(|| format!("--set expects KEY=VALUE, got `{assignment}`"))?;
        self.set(k.trim(), v)
    }

    pub fn solver_seeds(&self) -> Vec<u64> {
        self.seeds.clone().unwrap_or_else(|| vec![self.seed])
    }

    pub fn instance_seed(&self) -> u64 {
        match self.source {
            Source::Synthetic {
                instance_seed: Some(s),
                ..
            } => s,
            _ => self.seed,
        }
    }
}
