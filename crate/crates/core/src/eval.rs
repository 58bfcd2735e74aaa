//! Experiment harness: fit on full data and on coresets built by each method
//! at matched size, and compare full-data objectives.

use std::time::Duration;

use crate::coreset::{build_coreset, lfkf_baseline, theoretical_sizes, uniform_baseline, SamplerConfig};
use crate::datagen::{generate, GenConfig};
use crate::em::{fit, FitConfig};
use crate::error::{Error, Result};
use crate::model::{Coreset, ModelBounds, TimeSeriesDataset};
use crate::rng::{self, Stage};
use crate::timing::Stopwatch;

/// `2 (v_coreset - v_full)`. Negative values are reported as they are.
pub fn likelihood_ratio(v_full: f64, v_coreset: f64) -> f64 {
    2.0 * (v_coreset - v_full)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    Crgmm,
    Uni,
    Lfkf,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Crgmm, Method::Uni, Method::Lfkf];

    pub fn name(self) -> &'static str {
        match self {
            Self::Crgmm => "crgmm",
            Self::Uni => "uni",
            Self::Lfkf => "lfkf",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.name() == s)
    }
}

/// How the two-stage sampler sizes are chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SizeSpec {
    /// From the error target with the given leading constants.
    Theoretical { c_entity: f64, c_time: f64 },
    /// Fixed entity and time sample counts for every epsilon.
    Explicit { m_entities: usize, l_times: usize },
}

impl SizeSpec {
    pub fn resolve(&self, epsilon: f64, k: usize, d: usize, bounds: &ModelBounds) -> Result<(usize, usize)> {
        match *self {
            Self::Theoretical { c_entity, c_time } => theoretical_sizes(epsilon, k, d, bounds, c_entity, c_time),
            Self::Explicit { m_entities, l_times } => {
                if m_entities == 0 || l_times == 0 {
                    return Err(Error::InvalidArgument("explicit sizes must be at least 1".into()));
                }
                Ok((m_entities, l_times))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub epsilons: Vec<f64>,
    pub reps: usize,
    pub fit: FitConfig,
    pub sizes: SizeSpec,
    /// Bounds handed to the sampler.
    pub bounds: ModelBounds,
    pub seed: u64,
    /// Fit every method on the identity coreset instead of sampling.
    pub identity_override: bool,
}

/// One (method, epsilon, repetition) outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct RepRecord {
    pub method: Method,
    pub epsilon: f64,
    pub rep: usize,
    /// Number of distinct entity-time pairs.
    pub size: usize,
    pub v_coreset: f64,
    pub gamma: f64,
    pub construction_time: Duration,
    pub fit_time: Duration,
}

/// Aggregate over repetitions for one method and epsilon.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodRow {
    pub method: Method,
    pub epsilon: f64,
    pub mean_size: f64,
    pub mean_v: f64,
    pub mean_gamma: f64,
    /// Unbiased standard deviation; zero with fewer than two repetitions.
    pub std_gamma: f64,
    /// Mean construction plus fit time.
    pub mean_time: Duration,
    pub succeeded: usize,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub v_full: f64,
    pub full_fit_time: Duration,
    pub rows: Vec<MethodRow>,
    pub records: Vec<RepRecord>,
}

impl ExperimentReport {
    pub fn row(&self, method: Method, epsilon: f64) -> Option<&MethodRow> {
        self.rows.iter().find(|r| r.method == method && r.epsilon == epsilon)
    }
}

/// Sample mean and unbiased standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn build(
    data: &TimeSeriesDataset,
    method: Method,
    sampler: &SamplerConfig,
    gamma: usize,
    k: usize,
    seed: u64,
) -> Result<Coreset> {
    match method {
        Method::Crgmm => Ok(build_coreset(data, sampler)?.coreset),
        Method::Uni => uniform_baseline(data, gamma, seed),
        Method::Lfkf => lfkf_baseline(data, gamma, k, seed),
    }
}

/// Runs every method at every epsilon on a fixed dataset.
///
/// The full-data fit happens once. Per repetition the CRGMM coreset is built
/// first and the baselines are given its number of pairs. A failed repetition
/// is counted in its row and left out of the aggregates.
pub fn run_on_dataset(data: &TimeSeriesDataset, config: &ExperimentConfig) -> Result<ExperimentReport> {
    if config.reps == 0 {
        return Err(Error::InvalidArgument("reps must be at least 1".into()));
    }
    if config.epsilons.is_empty() {
        return Err(Error::InvalidArgument("at least one epsilon is required".into()));
    }
    let full = fit(data, None, &config.fit)?;
    let v_full = full.objective;
    let k = config.fit.k;
    let identity = Coreset::identity(data);

    let mut records = Vec::new();
    let mut failures = std::collections::BTreeMap::<(usize, Method), usize>::new();
    for (e_idx, &epsilon) in config.epsilons.iter().enumerate() {
        let (m, l) = config.sizes.resolve(epsilon, k, data.dim(), &config.bounds)?;
        for rep in 0..config.reps {
            let seed = rng::derive_seed(config.seed, Stage::Experiment, ((e_idx as u64) << 32) | rep as u64);
            let mut sampler = SamplerConfig::new(m, l, config.bounds, k, seed)?;
            sampler.restarts = 1;
            let mut gamma_size = None;
            for method in Method::ALL {
                let clock = Stopwatch::start();
                let built = if config.identity_override {
                    Ok(identity.clone())
                } else {
                    let g = gamma_size.unwrap_or(1);
                    build(data, method, &sampler, g, k, seed)
                };
                let construction_time = clock.elapsed();
                let outcome = built.and_then(|cs| {
                    let result = fit(data, Some(&cs), &config.fit)?;
                    Ok((cs.size(), result))
                });
                match outcome {
                    Ok((size, result)) => {
                        if method == Method::Crgmm {
                            gamma_size = Some(size);
                        }
                        records.push(RepRecord {
                            method,
                            epsilon,
                            rep,
                            size,
                            v_coreset: result.objective,
                            gamma: likelihood_ratio(v_full, result.objective),
                            construction_time,
                            fit_time: result.wall_time,
                        });
                    }
                    Err(_) => {
                        *failures.entry((e_idx, method)).or_default() += 1;
                        if method == Method::Crgmm {
                            // Baselines have no size to match.
                            for other in [Method::Uni, Method::Lfkf] {
                                *failures.entry((e_idx, other)).or_default() += 1;
                            }
                            break;
                        }
                    }
                }
            }
        }
    }

    let mut rows = Vec::new();
    for (e_idx, &epsilon) in config.epsilons.iter().enumerate() {
        for method in Method::ALL {
            let mine: Vec<&RepRecord> = records
                .iter()
                .filter(|r| r.method == method && r.epsilon == epsilon)
                .collect();
            let gammas: Vec<f64> = mine.iter().map(|r| r.gamma).collect();
            let (mean_gamma, std_gamma) = mean_std(&gammas);
            let vs: Vec<f64> = mine.iter().map(|r| r.v_coreset).collect();
            let sizes: Vec<f64> = mine.iter().map(|r| r.size as f64).collect();
            let mean_time = if mine.is_empty() {
                Duration::ZERO
            } else {
                mine.iter().map(|r| r.construction_time + r.fit_time).sum::<Duration>() / mine.len() as u32
            };
            rows.push(MethodRow {
                method,
                epsilon,
                mean_size: mean_std(&sizes).0,
                mean_v: mean_std(&vs).0,
                mean_gamma,
                std_gamma,
                mean_time,
                succeeded: mine.len(),
                failures: failures.get(&(e_idx, method)).copied().unwrap_or(0),
            });
        }
    }
    Ok(ExperimentReport { v_full, full_fit_time: full.wall_time, rows, records })
}

/// Generates a panel and runs [`run_on_dataset`] on it.
pub fn run_experiment(gen: &GenConfig, config: &ExperimentConfig) -> Result<ExperimentReport> {
    let (data, _) = generate(gen)?;
    run_on_dataset(&data, config)
}
