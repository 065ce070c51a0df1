//! Monte-Carlo experiment engine: dataset generators, MSE estimation,
//! parameter sweeps and the lower-bound family exploration.
//!
//! Trial `t` of every cell draws from `derive_stream(seed, t)`, so cells of
//! one sweep share their underlying uniforms (common random numbers) and a
//! run is bit-reproducible for any number of workers: per-trial results
//! are collected in trial order and reduced with a fixed pairwise tree.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::geometric_count_variance;
use crate::error::{param, Error, Result};
use crate::mechanisms::{true_mean, BoundedDataset, Mechanism, PreparedRun, PrivacyBudget};
use crate::noise::{derive_stream, two_sided_geometric_sample, GeometricParams, RandomStream};
use crate::numeric::pairwise_sum;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetKind {
    /// Every value equals the target mean.
    Constant,
    /// Values at the two bounds, mixed to hit the target mean.
    TwoPoint,
    /// `family_k` values at the upper bound and `size` at the lower bound.
    LowerBoundFamily,
}

impl DatasetKind {
    pub fn name(&self) -> &'static str {
        match self {
            DatasetKind::Constant => "constant",
            DatasetKind::TwoPoint => "two_point",
            DatasetKind::LowerBoundFamily => "lower_bound_family",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub kind: DatasetKind,
    pub size: usize,
    #[serde(default)]
    pub target_mean: f64,
    #[serde(default = "zero")]
    pub lower: f64,
    #[serde(default = "one")]
    pub upper: f64,
    /// Member index `i` of the lower-bound family (number of upper-bound values).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family_k: Option<usize>,
}

fn zero() -> f64 {
    0.0
}

fn one() -> f64 {
    1.0
}

impl DatasetSpec {
    pub fn constant(size: usize, target_mean: f64) -> Self {
        Self { kind: DatasetKind::Constant, size, target_mean, lower: 0.0, upper: 1.0, family_k: None }
    }

    pub fn two_point(size: usize, target_mean: f64) -> Self {
        Self { kind: DatasetKind::TwoPoint, size, target_mean, ..Self::constant(size, target_mean) }
    }

    /// `i` ones and `n` zeros.
    pub fn family_member(n: usize, i: usize) -> Self {
        Self {
            kind: DatasetKind::LowerBoundFamily,
            size: n,
            target_mean: i as f64 / (n + i) as f64,
            lower: 0.0,
            upper: 1.0,
            family_k: Some(i),
        }
    }

    pub fn with_bounds(mut self, lower: f64, upper: f64) -> Self {
        self.lower = lower;
        self.upper = upper;
        self
    }

    /// Number of values the generated dataset holds.
    pub fn generated_len(&self) -> usize {
        match self.kind {
            DatasetKind::LowerBoundFamily => self.size + self.family_k.unwrap_or(0),
            _ => self.size,
        }
    }
}

pub fn generate_dataset(spec: &DatasetSpec) -> Result<BoundedDataset> {
    let (lo, hi) = (spec.lower, spec.upper);
    crate::mechanisms::check_bounds(lo, hi)?;
    if spec.size == 0 {
        return param("dataset size must be positive");
    }
    let values = match spec.kind {
        DatasetKind::Constant | DatasetKind::TwoPoint => {
            let t = spec.target_mean;
            if !(t >= lo && t <= hi) {
                return Err(Error::Domain(format!("target mean {t} outside [{lo}, {hi}]")));
            }
            if spec.kind == DatasetKind::Constant {
                vec![t; spec.size]
            } else {
                let k = (spec.size as f64 * (t - lo) / (hi - lo)).round() as usize;
                let k = k.min(spec.size);
                let mut v = vec![hi; k];
                v.resize(spec.size, lo);
                v
            }
        }
        DatasetKind::LowerBoundFamily => {
            let i = spec
                .family_k
                .filter(|&i| i >= 1)
                .ok_or_else(|| Error::Parameter("lower_bound_family needs family_k >= 1".into()))?;
            let mut v = vec![hi; i];
            v.resize(spec.size + i, lo);
            v
        }
    };
    BoundedDataset::new(values, lo, hi)
}

/// Result of one Monte-Carlo cell. `normalized_mse` is `n² · mse`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MseReport {
    pub mechanism: String,
    pub epsilon: f64,
    pub dataset_kind: String,
    pub n: usize,
    pub target_mean: f64,
    pub trials: usize,
    pub mse: f64,
    pub normalized_mse: f64,
    pub stderr: f64,
    pub seed: u64,
}

/// Mean and standard error of squared errors, reduced deterministically.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MseSummary {
    pub mse: f64,
    pub stderr: f64,
    pub trials: usize,
}

fn thread_pool(workers: Option<usize>) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.unwrap_or(0))
        .build()
        .map_err(|e| Error::Parameter(format!("cannot build worker pool: {e}")))
}

/// Runs `trials` independent draws of `sample` on `derive_stream(seed, t)`
/// and summarizes `(sample - truth)²`.
///
/// `stderr` is the sample standard deviation of the squared errors over
/// `sqrt(trials)`; it is 0 for a single trial.
pub fn mse_of<F>(truth: f64, trials: usize, seed: u64, workers: Option<usize>, sample: F) -> Result<MseSummary>
where
    F: Fn(RandomStream) -> Result<f64> + Sync,
{
    if trials == 0 {
        return param("trials must be at least 1");
    }
    let pool = thread_pool(workers)?;
    let sq: Vec<f64> = pool.install(|| {
        (0..trials as u64)
            .into_par_iter()
            .map(|t| sample(derive_stream(seed, t)).map(|v| (v - truth) * (v - truth)))
            .collect::<Result<Vec<f64>>>()
    })?;
    let n = trials as f64;
    let mse = pairwise_sum(&sq) / n;
    let stderr = if trials > 1 {
        let dev: Vec<f64> = sq.iter().map(|s| (s - mse) * (s - mse)).collect();
        (pairwise_sum(&dev) / (n - 1.0)).sqrt() / n.sqrt()
    } else {
        0.0
    };
    Ok(MseSummary { mse, stderr, trials })
}

fn report(mech: &str, eps: f64, kind: &str, n: usize, target: f64, seed: u64, s: MseSummary) -> MseReport {
    let nf = n as f64;
    MseReport {
        mechanism: mech.to_string(),
        epsilon: eps,
        dataset_kind: kind.to_string(),
        n,
        target_mean: target,
        trials: s.trials,
        mse: s.mse,
        normalized_mse: nf * nf * s.mse,
        stderr: s.stderr,
        seed,
    }
}

fn mechanism_mse(
    d: &BoundedDataset,
    mech: Mechanism,
    eps: PrivacyBudget,
    trials: usize,
    seed: u64,
    workers: Option<usize>,
) -> Result<MseSummary> {
    let prepared = PreparedRun::new(d, eps, mech)?;
    mse_of(true_mean(d)?, trials, seed, workers, |s| prepared.run(s))
}

/// MSE of one mechanism on one dataset. The report labels the dataset
/// `custom` with its true mean as the target.
pub fn estimate_mse(d: &BoundedDataset, mech: Mechanism, eps: PrivacyBudget, trials: usize, seed: u64) -> Result<MseReport> {
    let s = mechanism_mse(d, mech, eps, trials, seed, None)?;
    Ok(report(mech.name(), eps.epsilon(), "custom", d.len(), true_mean(d)?, seed, s))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub mechanisms: Vec<Mechanism>,
    pub epsilons: Vec<f64>,
    pub dataset_specs: Vec<DatasetSpec>,
    pub trials: usize,
    pub seed: u64,
    /// Worker threads; `None` uses all cores. Results do not depend on it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return param("trials must be at least 1");
        }
        if self.mechanisms.is_empty() || self.epsilons.is_empty() || self.dataset_specs.is_empty() {
            return param("mechanisms, epsilons and dataset_specs must be non-empty");
        }
        for &e in &self.epsilons {
            PrivacyBudget::new(e)?;
        }
        if self.workers == Some(0) {
            return param("workers must be at least 1");
        }
        Ok(())
    }

    pub fn cell_count(&self) -> usize {
        self.mechanisms.len() * self.epsilons.len() * self.dataset_specs.len()
    }
}

/// Every `(mechanism, epsilon, dataset_spec)` cell, mechanism-major, in
/// config order.
pub fn sweep(config: &ExperimentConfig) -> Result<Vec<MseReport>> {
    config.validate()?;
    let datasets = config
        .dataset_specs
        .iter()
        .map(generate_dataset)
        .collect::<Result<Vec<_>>>()?;
    let mut out = Vec::with_capacity(config.cell_count());
    for &mech in &config.mechanisms {
        for &e in &config.epsilons {
            let eps = PrivacyBudget::new(e)?;
            for (spec, d) in config.dataset_specs.iter().zip(&datasets) {
                let s = mechanism_mse(d, mech, eps, config.trials, config.seed, config.workers).map_err(|err| {
                    Error::Cell {
                        cell: format!("{mech} eps={e} {} n={} mean={}", spec.kind.name(), d.len(), spec.target_mean),
                        source: Box::new(err),
                    }
                })?;
                out.push(report(mech.name(), e, spec.kind.name(), d.len(), true_mean(d)?, config.seed, s));
            }
        }
    }
    Ok(out)
}

/// Count estimators compared on the lower-bound family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FamilyEstimator {
    /// `n · mu_hat` from a mean estimator.
    Mechanism(Mechanism),
    /// The count plus two-sided geometric noise.
    GeometricCount,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FamilyWorstCase {
    /// `E[(N_hat - i)²]` for members `i = 1..=k`.
    pub per_member: Vec<f64>,
    pub worst: f64,
    /// `2 / eps²`.
    pub benchmark: f64,
}

/// Worst count MSE over the family `D_i` (`i` ones, `n` zeros), `i = 1..=k`.
pub fn worst_case_over_family(
    estimator: FamilyEstimator,
    eps: PrivacyBudget,
    n: usize,
    k: usize,
    trials: usize,
    seed: u64,
) -> Result<FamilyWorstCase> {
    if k == 0 || n == 0 {
        return param("family needs n >= 1 and k >= 1");
    }
    let nf = n as f64;
    let mut per_member = Vec::with_capacity(k);
    for i in 1..=k {
        let truth = i as f64;
        let s = match estimator {
            FamilyEstimator::Mechanism(mech) => {
                let d = generate_dataset(&DatasetSpec::family_member(n, i))?;
                let prepared = PreparedRun::new(&d, eps, mech)?;
                mse_of(truth, trials, seed, None, |s| prepared.run(s).map(|mu| nf * mu))?
            }
            FamilyEstimator::GeometricCount => {
                let g = GeometricParams::from_epsilon(eps.epsilon())?;
                mse_of(truth, trials, seed, None, |s| {
                    Ok(truth + two_sided_geometric_sample(&mut s.cursor(), &g) as f64)
                })?
            }
        };
        per_member.push(s.mse);
    }
    let worst = per_member.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e = eps.epsilon();
    Ok(FamilyWorstCase { per_member, worst, benchmark: 2.0 / (e * e) })
}

/// Family size used by the presets: `ceil((n / eps)^(1/3) / 2)`.
pub fn preset_family_k(n: usize, eps: f64) -> usize {
    ((n as f64 / eps).cbrt() / 2.0).ceil() as usize
}

/// Exact variance of the geometric count estimator, for comparison with
/// [`worst_case_over_family`].
pub fn geometric_family_mse(eps: f64) -> Result<f64> {
    geometric_count_variance(eps)
}

pub const PRESET_N: usize = 1000;
pub const PRESET_TRIALS: usize = 10_000;
pub const PRESET_EPSILONS: [f64; 5] = [0.1, 0.2, 0.5, 1.0, 2.0];
pub const PRESET_MEANS: [f64; 6] = [0.5, 0.25, 0.1, 0.02, 0.005, 0.002];
pub const FIG2B_EPSILON: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// Transformed estimator over the epsilon and mean grids.
    Fig2a,
    /// Transformed estimator at eps = 0.5, with normalized MSE over `2/eps²`.
    Fig2b,
    /// Shifted vs transformed, paired, with their MSE ratio.
    Fig2c,
}

impl Preset {
    pub fn name(&self) -> &'static str {
        match self {
            Preset::Fig2a => "fig2a",
            Preset::Fig2b => "fig2b",
            Preset::Fig2c => "fig2c",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "fig2a" => Ok(Preset::Fig2a),
            "fig2b" => Ok(Preset::Fig2b),
            "fig2c" => Ok(Preset::Fig2c),
            other => param(format!("unknown preset {other:?} (expected fig2a, fig2b or fig2c)")),
        }
    }

    pub fn config(&self, trials: usize, seed: u64) -> ExperimentConfig {
        let specs = PRESET_MEANS.iter().map(|&m| DatasetSpec::two_point(PRESET_N, m)).collect();
        let (mechanisms, epsilons) = match self {
            Preset::Fig2a => (vec![Mechanism::Transformed], PRESET_EPSILONS.to_vec()),
            Preset::Fig2b => (vec![Mechanism::Transformed], vec![FIG2B_EPSILON]),
            Preset::Fig2c => (vec![Mechanism::Shifted, Mechanism::Transformed], PRESET_EPSILONS.to_vec()),
        };
        ExperimentConfig { mechanisms, epsilons, dataset_specs: specs, trials, seed, workers: None }
    }
}
