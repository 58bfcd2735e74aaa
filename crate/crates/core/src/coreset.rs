//! Two-stage sensitivity sampling of entities and time periods, plus the
//! uniform and pooled-static baselines.
//!
//! Stage one clusters the entity means with k-means and samples `M` entities
//! i.i.d. with probability proportional to an upper bound `s(i)` on their
//! share of the normalized objective. Stage two samples `L` time periods of
//! every selected entity proportionally to `s_i(t)`. Duplicated draws are
//! merged by summing their weights.

use std::collections::BTreeMap;
use std::time::Duration;

use rand::Rng;

use crate::error::{Error, Result};
use crate::kmeans::{self, entity_summaries, kmeans_entities, sq_dist, EntitySummaries, KMeansResult, Points};
use crate::model::{Coreset, CoresetEntity, EntitySeries, ModelBounds, TimeSeriesDataset};
use crate::par;
use crate::rng::{self, Stage};
use crate::timing::Stopwatch;

/// Parameters of the two-stage sampler.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplerConfig {
    /// Number of entity draws `M`.
    pub m_entities: usize,
    /// Number of time draws `L` per selected entity.
    pub l_times: usize,
    pub bounds: ModelBounds,
    pub k: usize,
    pub restarts: usize,
    pub seed: u64,
    /// Return the identity coreset (all pairs, unit weights) instead of sampling.
    pub full_coverage: bool,
}

impl SamplerConfig {
    pub fn new(m_entities: usize, l_times: usize, bounds: ModelBounds, k: usize, seed: u64) -> Result<Self> {
        let cfg = Self {
            m_entities,
            l_times,
            bounds,
            k,
            restarts: kmeans::DEFAULT_RESTARTS,
            seed,
            full_coverage: false,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m_entities == 0 || self.l_times == 0 {
            return Err(Error::InvalidArgument("M and L must be at least 1".into()));
        }
        if self.k == 0 {
            return Err(Error::InvalidArgument("k must be at least 1".into()));
        }
        Ok(())
    }
}

/// Entity-level sensitivities and the k-means artifacts they derive from.
#[derive(Debug, Clone, PartialEq)]
pub struct EntitySensitivities {
    /// `s(i)`.
    pub s: Vec<f64>,
    /// `s^c(i) = 1 / |cluster of i|`.
    pub s_cluster: Vec<f64>,
    pub total: f64,
    pub kmeans: KMeansResult,
    pub summaries: EntitySummaries,
}

/// Time-level sensitivities of a single entity.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSensitivities {
    /// `s_i(t)`.
    pub s: Vec<f64>,
    /// `s_i^c(t)`.
    pub s_cluster: Vec<f64>,
    /// 1-means cost `OPT_i`.
    pub opt: f64,
}

impl TimeSensitivities {
    pub fn total(&self) -> f64 {
        self.s.iter().sum()
    }
}

/// Everything computed while building a coreset.
#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityProfile {
    pub entity: EntitySensitivities,
    /// Time sensitivities of the selected entities, keyed by entity id.
    pub times: BTreeMap<usize, TimeSensitivities>,
}

/// Computes `s^c(i)` and `s(i) = min{1, 4D(4||b_i - c_p(i)||^2 / (OPT + A) + 3 s^c(i)) / lambda}`.
///
/// When `OPT + A = 0` every entity sits on its center and the distance term is 0.
pub fn entity_sensitivities(
    data: &TimeSeriesDataset,
    k: usize,
    bounds: &ModelBounds,
    restarts: usize,
    seed: u64,
) -> Result<EntitySensitivities> {
    let summaries = entity_summaries(data);
    let km = kmeans_entities(&summaries.means, k, restarts, seed)?;
    let sizes = km.cluster_sizes();
    let denom = km.cost + summaries.total_offset;
    let scale = 4.0 * bounds.d_ratio() / bounds.lambda();
    let mut s = Vec::with_capacity(data.n_entities());
    let mut s_cluster = Vec::with_capacity(data.n_entities());
    for (i, &l) in km.assignment.iter().enumerate() {
        let sc = 1.0 / sizes[l] as f64;
        let dist = if denom > 0.0 {
            4.0 * sq_dist(summaries.means.row(i), km.centers.row(l)) / denom
        } else {
            0.0
        };
        s_cluster.push(sc);
        s.push((scale * (dist + 3.0 * sc)).min(1.0));
    }
    let total = s.iter().sum();
    Ok(EntitySensitivities { s, s_cluster, total, kmeans: km, summaries })
}

/// Computes `s_i^c(t) = 2||x_it - b_i||^2 / OPT_i + 6 / T_i` and
/// `s_i(t) = min{1, 4D/lambda (s_i^c(t) + s_i^c(t-1))}`, the lag term being
/// absent for the first period. With `OPT_i = 0` the distance term is 0.
pub fn time_sensitivities(entity: &EntitySeries, mean: &[f64], bounds: &ModelBounds) -> TimeSensitivities {
    let len = entity.len();
    let opt = kmeans::one_means_cost(entity, mean);
    let base = 6.0 / len as f64;
    let s_cluster: Vec<f64> = entity
        .rows()
        .map(|x| if opt > 0.0 { 2.0 * sq_dist(x, mean) / opt + base } else { base })
        .collect();
    let scale = 4.0 * bounds.d_ratio() / bounds.lambda();
    let s = (0..len)
        .map(|t| {
            let lagged = if t > 0 { s_cluster[t - 1] } else { 0.0 };
            (scale * (s_cluster[t] + lagged)).min(1.0)
        })
        .collect();
    TimeSensitivities { s, s_cluster, opt }
}

fn cumulative(s: &[f64]) -> (Vec<f64>, f64) {
    let mut cdf = Vec::with_capacity(s.len());
    let mut acc = 0.0;
    for &v in s {
        acc += v;
        cdf.push(acc);
    }
    (cdf, acc)
}

fn draw_index<R: Rng>(cdf: &[f64], total: f64, rng: &mut R) -> usize {
    let u = rng.random::<f64>() * total;
    cdf.partition_point(|&c| c <= u).min(cdf.len() - 1)
}

fn weigh(counts: BTreeMap<usize, usize>, s: &[f64], total: f64, draws: usize) -> Vec<(usize, f64)> {
    counts
        .into_iter()
        .map(|(j, c)| (j, c as f64 * (total / (draws as f64 * s[j]))))
        .collect()
}

/// Draws `draws` i.i.d. indices with probability `s_j / sum s`, weighting each
/// draw by `sum s / (draws * s_j)` and merging repeats. Output is sorted by index.
pub fn importance_sample<R: Rng>(s: &[f64], draws: usize, rng: &mut R) -> Vec<(usize, f64)> {
    let (cdf, total) = cumulative(s);
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for _ in 0..draws {
        *counts.entry(draw_index(&cdf, total, rng)).or_insert(0) += 1;
    }
    weigh(counts, s, total, draws)
}

/// Like [`importance_sample`], but keeps drawing until `distinct` different
/// indices have been seen (capped at the number of positive entries). The
/// weights use the number of draws actually made.
pub fn importance_sample_distinct<R: Rng>(s: &[f64], distinct: usize, rng: &mut R) -> Vec<(usize, f64)> {
    let (cdf, total) = cumulative(s);
    let target = distinct.min(s.iter().filter(|&&v| v > 0.0).count());
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    let mut draws = 0;
    while counts.len() < target {
        *counts.entry(draw_index(&cdf, total, rng)).or_insert(0) += 1;
        draws += 1;
    }
    weigh(counts, s, total, draws)
}

/// Entity stage: `M` weighted draws from `s`.
pub fn sample_entities(s: &[f64], m: usize, seed: u64) -> Vec<(usize, f64)> {
    let mut rng = rng::stream(seed, Stage::EntitySample, 0);
    importance_sample(s, m, &mut rng)
}

/// Time stage for one entity: `L` weighted draws from `s_i`. The stream is
/// keyed by the entity id.
pub fn sample_times(s_i: &[f64], l: usize, seed: u64, entity_id: usize) -> Vec<(usize, f64)> {
    let mut rng = rng::stream(seed, Stage::TimeSample, entity_id as u64);
    importance_sample(s_i, l, &mut rng)
}

/// Result of [`build_coreset`].
#[derive(Debug, Clone)]
pub struct CoresetBuild {
    pub coreset: Coreset,
    pub profile: SensitivityProfile,
    /// Wall time of the construction.
    pub construction_time: Duration,
}

/// Runs the two-stage sampler end to end.
pub fn build_coreset(data: &TimeSeriesDataset, config: &SamplerConfig) -> Result<CoresetBuild> {
    config.validate()?;
    let clock = Stopwatch::start();
    let entity = entity_sensitivities(data, config.k, &config.bounds, config.restarts, config.seed)?;
    let picked = if config.full_coverage {
        (0..data.n_entities()).map(|i| (i, 1.0)).collect()
    } else {
        sample_entities(&entity.s, config.m_entities, config.seed)
    };

    let stage_two: Vec<(TimeSensitivities, CoresetEntity)> = par::map(&picked, |&(id, weight)| {
        let series = &data.entities()[id];
        let sens = time_sensitivities(series, entity.summaries.means.row(id), &config.bounds);
        let times = if config.full_coverage {
            (0..series.len()).map(|t| (t, 1.0)).collect()
        } else {
            sample_times(&sens.s, config.l_times, config.seed, id)
        };
        (sens, CoresetEntity { id, weight, times })
    });

    let mut times = BTreeMap::new();
    let mut members = Vec::with_capacity(stage_two.len());
    for (sens, member) in stage_two {
        times.insert(member.id, sens);
        members.push(member);
    }
    let coreset = Coreset::new(members)?;
    Ok(CoresetBuild {
        coreset,
        profile: SensitivityProfile { entity, times },
        construction_time: clock.elapsed(),
    })
}

/// Sample sizes `(M, L)` from the error target, with user supplied leading
/// constants for the hidden factors.
///
/// `M = ceil(c_entity k D (k^4 d^4 + k^3 d^8) ln(k/lambda) / (lambda eps^2))`,
/// `L = ceil(c_time D d^8 ln(1/lambda) / (lambda eps^2))`.
pub fn theoretical_sizes(
    epsilon: f64,
    k: usize,
    d: usize,
    bounds: &ModelBounds,
    c_entity: f64,
    c_time: f64,
) -> Result<(usize, usize)> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::InvalidArgument(format!("epsilon must lie in (0,1], got {epsilon}")));
    }
    if !(c_entity > 0.0 && c_time > 0.0 && c_entity.is_finite() && c_time.is_finite()) {
        return Err(Error::InvalidArgument("size constants must be positive".into()));
    }
    if k == 0 || d == 0 {
        return Err(Error::InvalidArgument("k and d must be at least 1".into()));
    }
    let (kf, df) = (k as f64, d as f64);
    let (big_d, lambda) = (bounds.d_ratio(), bounds.lambda());
    let eps2 = epsilon * epsilon;
    let m = c_entity * kf * big_d * (kf.powi(4) * df.powi(4) + kf.powi(3) * df.powi(8)) * (kf / lambda).ln()
        / (lambda * eps2);
    let l = c_time * big_d * df.powi(8) * (1.0 / lambda).ln() / (lambda * eps2);
    let to_count = |v: f64| (v.ceil().min(usize::MAX as f64) as usize).max(1);
    Ok((to_count(m), to_count(l)))
}

fn group_pairs(pairs: impl IntoIterator<Item = ((usize, usize), f64)>) -> BTreeMap<usize, Vec<(usize, f64)>> {
    let mut grouped: BTreeMap<usize, Vec<(usize, f64)>> = BTreeMap::new();
    for ((i, t), w) in pairs {
        grouped.entry(i).or_default().push((t, w));
    }
    grouped
}

fn locate(offsets: &[usize], flat: usize) -> (usize, usize) {
    let i = offsets.partition_point(|&o| o <= flat) - 1;
    (i, flat - offsets[i])
}

fn pair_offsets(data: &TimeSeriesDataset) -> Vec<usize> {
    let mut offsets = Vec::with_capacity(data.n_entities());
    let mut acc = 0;
    for e in data.entities() {
        offsets.push(acc);
        acc += e.len();
    }
    offsets
}

/// Uniform baseline: `gamma` distinct pairs drawn uniformly without
/// replacement, with `w(i) = N / |I_S|` and `w_i(t) = T_i / |J_i|`.
/// `gamma` is capped at the number of pairs.
pub fn uniform_baseline(data: &TimeSeriesDataset, gamma: usize, seed: u64) -> Result<Coreset> {
    if gamma == 0 {
        return Err(Error::InvalidArgument("gamma must be at least 1".into()));
    }
    let total = data.total_observations();
    let mut rng = rng::stream(seed, Stage::Uniform, 0);
    let picked = rand::seq::index::sample(&mut rng, total, gamma.min(total));
    let offsets = pair_offsets(data);
    let grouped = group_pairs(picked.into_iter().map(|flat| (locate(&offsets, flat), 1.0)));
    let n = data.n_entities() as f64;
    let entity_weight = n / grouped.len() as f64;
    let members = grouped
        .into_iter()
        .map(|(id, times)| {
            let len = data.entities()[id].len() as f64;
            let w = len / times.len() as f64;
            CoresetEntity { id, weight: entity_weight, times: times.into_iter().map(|(t, _)| (t, w)).collect() }
        })
        .collect();
    Coreset::new(members)
}

/// Sensitivities of every pair when all observations are treated as
/// independent static points: `4 dist^2 / OPT + 3 / |cluster|`, where the
/// clustering is k-means over the pooled points. Also returns the clustering.
pub fn pooled_sensitivities(data: &TimeSeriesDataset, k: usize, seed: u64) -> Result<(Vec<f64>, KMeansResult)> {
    let coords: Vec<f64> = data.entities().iter().flat_map(|e| e.values().iter().copied()).collect();
    let pooled = Points::new(data.dim(), coords)?;
    let km = kmeans_entities(&pooled, k.min(pooled.len()), 1, rng::derive_seed(seed, Stage::LfkfKMeans, 0))?;
    let sizes = km.cluster_sizes();
    let s = (0..pooled.len())
        .map(|p| {
            let l = km.assignment[p];
            let dist = if km.cost > 0.0 { 4.0 * sq_dist(pooled.row(p), km.centers.row(l)) / km.cost } else { 0.0 };
            dist + 3.0 / sizes[l] as f64
        })
        .collect();
    Ok((s, km))
}

/// Pooled static baseline. Pairs are importance sampled i.i.d. from
/// [`pooled_sensitivities`] until `gamma` distinct pairs are drawn; each draw carries the importance weight
/// `u = sum s / (draws s_p)`. Entities get `w(i) = N / |I_S|` and time
/// periods `w_i(t) = u / w(i)`, so that `w(i) * w_i(t)` is the pooled weight.
pub fn lfkf_baseline(data: &TimeSeriesDataset, gamma: usize, k: usize, seed: u64) -> Result<Coreset> {
    if gamma == 0 {
        return Err(Error::InvalidArgument("gamma must be at least 1".into()));
    }
    let (s, _) = pooled_sensitivities(data, k, seed)?;
    let mut rng = rng::stream(seed, Stage::Lfkf, 0);
    let drawn = importance_sample_distinct(&s, gamma, &mut rng);
    let offsets = pair_offsets(data);
    let grouped = group_pairs(drawn.into_iter().map(|(flat, u)| (locate(&offsets, flat), u)));
    let entity_weight = data.n_entities() as f64 / grouped.len() as f64;
    let members = grouped
        .into_iter()
        .map(|(id, times)| CoresetEntity {
            id,
            weight: entity_weight,
            times: times.into_iter().map(|(t, u)| (t, u / entity_weight)).collect(),
        })
        .collect();
    Coreset::new(members)
}
