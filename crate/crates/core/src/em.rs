//! Weighted generalized EM for the AR(1) Gaussian mixture.
//!
//! The optimization objective on a coreset `S` is
//! `f'_S(alpha'(theta), theta) + phi(alpha, theta)`; full-data fitting runs the
//! same code on the identity coreset, where it coincides with `f`.
//!
//! Each iteration computes responsibilities in log space, then proposes
//! coordinate updates per component in the order mean, autocorrelation,
//! covariance, followed by the mixture weights. A proposal is accepted only if
//! it does not increase the objective; otherwise it is halved toward the
//! previous iterate up to [`MAX_HALVINGS`] times, and the run stops if no
//! halving helps. Proposals whose first-period quadratic form
//! `S^-1 - L S^-1 L` is indefinite are treated like increases: there the cost
//! can be made arbitrarily negative by shrinking the covariance.

use std::time::Duration;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::kmeans::{kmeans_weighted, Points};
use crate::model::{Component, Coreset, MixtureParams, ModelBounds, TimeSeriesDataset};
use crate::objective::{self, log_weights, mixture_neglog, psi_weighted};
use crate::par;
use crate::rng::{self, Stage};
use crate::timing::Stopwatch;

pub const MAX_HALVINGS: usize = 10;
/// Eigenvalue floor of covariance updates.
pub const EIGEN_FLOOR: f64 = 1e-8;
/// Ridge added to the pooled covariance at initialization.
pub const INIT_RIDGE: f64 = 1e-6;
/// A component whose responsibility mass drops below this is reinitialized.
pub const EMPTY_MASS: f64 = 1e-12;
const AR_SWEEPS: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    pub k: usize,
    pub max_iters: usize,
    /// Relative objective improvement below which the run stops.
    pub tol: f64,
    pub n_init: usize,
    pub seed: u64,
    pub bounds: ModelBounds,
    pub update_sigma: bool,
    pub update_ar: bool,
    /// Start from these parameters instead of the data-driven initialization.
    /// Only one run is made when set.
    pub initial: Option<MixtureParams>,
}

impl FitConfig {
    pub fn new(k: usize, bounds: ModelBounds, seed: u64) -> Self {
        Self {
            k,
            max_iters: 200,
            tol: 1e-6,
            n_init: 3,
            seed,
            bounds,
            update_sigma: true,
            update_ar: true,
            initial: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidArgument("k must be at least 1".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidArgument("max_iters must be at least 1".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidArgument("tol must be positive".into()));
        }
        if let Some(p) = &self.initial {
            if p.k() != self.k {
                return Err(Error::InvalidArgument("initial parameters disagree with k".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub params: MixtureParams,
    /// Full-data objective `f` at the fitted parameters.
    pub objective: f64,
    /// Final value of the optimization objective.
    pub fit_objective: f64,
    /// Optimization objective after every accepted iterate, starting with the
    /// initial parameters of the winning restart.
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub restart: usize,
    pub wall_time: Duration,
}

/// Mutable parameter state of one run.
#[derive(Debug, Clone)]
struct State {
    alpha: Vec<f64>,
    mu: Vec<DVector<f64>>,
    ar: Vec<DVector<f64>>,
    sigma: Vec<DMatrix<f64>>,
}

impl State {
    fn from_params(p: &MixtureParams) -> Self {
        Self {
            alpha: p.alpha().to_vec(),
            mu: p.components().iter().map(|c| DVector::from_column_slice(c.mu())).collect(),
            ar: p.components().iter().map(|c| DVector::from_column_slice(c.ar())).collect(),
            sigma: p.components().iter().map(|c| c.sigma().clone()).collect(),
        }
    }

    fn to_params(&self, bounds: &ModelBounds) -> Result<MixtureParams> {
        let cap = bounds.ar_cap();
        let comps = (0..self.alpha.len())
            .map(|l| {
                let ar = self.ar[l].iter().map(|a| a.clamp(0.0, cap)).collect();
                Component::new(self.mu[l].as_slice().to_vec(), self.sigma[l].clone(), ar, bounds)
            })
            .collect::<Result<Vec<_>>>()?;
        let sum: f64 = self.alpha.iter().sum();
        let alpha = self.alpha.iter().map(|a| (a / sum).clamp(0.0, 1.0)).collect();
        MixtureParams::new(alpha, comps)
    }

    /// `prev + step * (self - prev)`.
    fn toward(prev: &State, next: &State, step: f64) -> State {
        let mix = |a: f64, b: f64| a + step * (b - a);
        State {
            alpha: prev.alpha.iter().zip(&next.alpha).map(|(&a, &b)| mix(a, b)).collect(),
            mu: prev.mu.iter().zip(&next.mu).map(|(a, b)| a + (b - a) * step).collect(),
            ar: prev.ar.iter().zip(&next.ar).map(|(a, b)| a + (b - a) * step).collect(),
            sigma: prev.sigma.iter().zip(&next.sigma).map(|(a, b)| a + (b - a) * step).collect(),
        }
    }
}

/// Objective value plus per-entity responsibilities at one iterate.
struct Evaluation {
    objective: f64,
    /// `resp[j][l]` for the `j`-th coreset entity.
    resp: Vec<Vec<f64>>,
    /// Per-entity objective contribution, used to pick reinitialization points.
    entity_cost: Vec<f64>,
}

fn evaluate(data: &TimeSeriesDataset, cs: &Coreset, params: &MixtureParams) -> Result<Evaluation> {
    let alpha_prime = objective::normalized_weights(params);
    let log_coef = log_weights(&alpha_prime);
    let rows: Vec<(f64, Vec<f64>)> = par::map(cs.entities(), |ce| {
        let series = &data.entities()[ce.id];
        let costs: Vec<f64> = params.components().iter().map(|c| psi_weighted(series, &ce.times, c)).collect();
        let value = mixture_neglog(&log_coef, &costs, series.len());
        let scale = 0.5 / series.len() as f64;
        let resp = log_coef
            .iter()
            .zip(&costs)
            .map(|(&a, &c)| if a == f64::NEG_INFINITY { 0.0 } else { (a - scale * c + value).exp() })
            .collect();
        (ce.weight * value, resp)
    });
    let phi = -(data.n_entities() as f64) * objective::log_normalizer(params);
    let mut total = 0.0;
    let mut resp = Vec::with_capacity(rows.len());
    let mut entity_cost = Vec::with_capacity(rows.len());
    for (v, r) in rows {
        total += v;
        entity_cost.push(v);
        resp.push(r);
    }
    let objective = total + phi;
    if !objective.is_finite() {
        return Err(Error::Numeric(format!("objective evaluated to {objective}")));
    }
    Ok(Evaluation { objective, resp, entity_cost })
}

/// Weighted mean of the sampled periods of every coreset entity and the pooled
/// within-entity covariance.
fn view_statistics(data: &TimeSeriesDataset, cs: &Coreset) -> (Points, DMatrix<f64>) {
    let d = data.dim();
    let mut means = Vec::with_capacity(cs.entities().len() * d);
    let mut scatter = DMatrix::zeros(d, d);
    let mut mass = 0.0;
    for ce in cs.entities() {
        let series = &data.entities()[ce.id];
        let wsum: f64 = ce.times.iter().map(|(_, w)| w).sum();
        let mut b = DVector::zeros(d);
        for &(t, w) in &ce.times {
            b += DVector::from_column_slice(series.row(t)) * w;
        }
        if wsum > 0.0 {
            b /= wsum;
        }
        for &(t, w) in &ce.times {
            let z = DVector::from_column_slice(series.row(t)) - &b;
            scatter += &z * z.transpose() * (w * ce.weight);
        }
        mass += wsum * ce.weight;
        means.extend_from_slice(b.as_slice());
    }
    if mass > 0.0 {
        scatter /= mass;
    }
    let cov = scatter + DMatrix::identity(d, d) * INIT_RIDGE;
    (Points::new(d, means).expect("dimension is positive"), cov)
}

fn init_from_view(
    data: &TimeSeriesDataset,
    cs: &Coreset,
    k: usize,
    seed: u64,
    bounds: &ModelBounds,
) -> Result<MixtureParams> {
    let (means, cov) = view_statistics(data, cs);
    let weights: Vec<f64> = cs.entities().iter().map(|e| e.weight).collect();
    let km = kmeans_weighted(&means, Some(&weights), k, 1, seed)?;
    let d = data.dim();
    let comps = (0..k)
        .map(|l| Component::new(km.centers.row(l).to_vec(), cov.clone(), vec![0.0; d], bounds))
        .collect::<Result<Vec<_>>>()?;
    MixtureParams::new(vec![1.0 / k as f64; k], comps)
}

/// Initial parameters: k-means++ plus Lloyd over entity means for `mu`, the
/// pooled within-entity covariance plus `1e-6 I` for every `Sigma`, zero
/// autocorrelation and uniform weights.
pub fn init_params(data: &TimeSeriesDataset, k: usize, seed: u64, bounds: &ModelBounds) -> Result<MixtureParams> {
    init_from_view(data, &Coreset::identity(data), k, seed, bounds)
}

fn floor_eigenvalues(m: DMatrix<f64>) -> DMatrix<f64> {
    let sym = (&m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let vals = eig.eigenvalues.map(|v| if v.is_finite() { v.max(EIGEN_FLOOR) } else { EIGEN_FLOOR });
    let out = &eig.eigenvectors * DMatrix::from_diagonal(&vals) * eig.eigenvectors.transpose();
    (&out + out.transpose()) * 0.5
}

/// Sufficient statistics of one component for the mean step.
struct MeanStats {
    w_first: f64,
    sum_first: DVector<f64>,
    w_rest: f64,
    sum_rest: DVector<f64>,
}

/// Per-pair weights for component `l`: `w(i) r_il / T_i * w_i(t)`.
fn pair_weight(weight: f64, resp: f64, len: usize) -> f64 {
    weight * resp / len as f64
}

fn mean_step(
    data: &TimeSeriesDataset,
    cs: &Coreset,
    resp: &[Vec<f64>],
    l: usize,
    ar: &DVector<f64>,
    precision: &DMatrix<f64>,
) -> Option<DVector<f64>> {
    let d = data.dim();
    let parts: Vec<MeanStats> = par::map_range(cs.entities().len(), |j| {
        let ce = &cs.entities()[j];
        let series = &data.entities()[ce.id];
        let omega = pair_weight(ce.weight, resp[j][l], series.len());
        let mut st = MeanStats {
            w_first: 0.0,
            sum_first: DVector::zeros(d),
            w_rest: 0.0,
            sum_rest: DVector::zeros(d),
        };
        for &(t, w) in &ce.times {
            let c = omega * w;
            let x = series.row(t);
            if t == 0 {
                st.w_first += c;
                for r in 0..d {
                    st.sum_first[r] += c * x[r];
                }
            } else {
                let prev = series.row(t - 1);
                st.w_rest += c;
                for r in 0..d {
                    st.sum_rest[r] += c * (x[r] - ar[r] * prev[r]);
                }
            }
        }
        st
    });
    let mut total = MeanStats { w_first: 0.0, sum_first: DVector::zeros(d), w_rest: 0.0, sum_rest: DVector::zeros(d) };
    for p in parts {
        total.w_first += p.w_first;
        total.sum_first += p.sum_first;
        total.w_rest += p.w_rest;
        total.sum_rest += p.sum_rest;
    }
    let lam = DMatrix::from_diagonal(ar);
    let q_first = precision - &lam * precision * &lam;
    let b = DMatrix::identity(d, d) - &lam;
    let bp = &b * precision;
    let hessian = &q_first * total.w_first + &bp * &b * total.w_rest;
    let grad = &q_first * &total.sum_first + &bp * &total.sum_rest;
    let mu = hessian.lu().solve(&grad)?;
    mu.iter().all(|v| v.is_finite()).then_some(mu)
}

fn ar_step(
    data: &TimeSeriesDataset,
    cs: &Coreset,
    resp: &[Vec<f64>],
    l: usize,
    mu: &DVector<f64>,
    start: &DVector<f64>,
    precision: &DMatrix<f64>,
    cap: f64,
) -> DVector<f64> {
    let d = data.dim();
    // (S0, S1, C): first-period scatter, lagged scatter, lag-one cross moment.
    let parts: Vec<(DMatrix<f64>, DMatrix<f64>, DMatrix<f64>)> = par::map_range(cs.entities().len(), |j| {
        let ce = &cs.entities()[j];
        let series = &data.entities()[ce.id];
        let omega = pair_weight(ce.weight, resp[j][l], series.len());
        let mut s0 = DMatrix::zeros(d, d);
        let mut s1 = DMatrix::zeros(d, d);
        let mut cross = DMatrix::zeros(d, d);
        for &(t, w) in &ce.times {
            let c = omega * w;
            let z = DVector::from_column_slice(series.row(t)) - mu;
            if t == 0 {
                s0 += &z * z.transpose() * c;
            } else {
                let zp = DVector::from_column_slice(series.row(t - 1)) - mu;
                s1 += &zp * zp.transpose() * c;
                cross += &z * zp.transpose() * c;
            }
        }
        (s0, s1, cross)
    });
    let mut s0 = DMatrix::zeros(d, d);
    let mut s1 = DMatrix::zeros(d, d);
    let mut cross = DMatrix::zeros(d, d);
    for (a, b, c) in parts {
        s0 += a;
        s1 += b;
        cross += c;
    }
    let gram = precision.component_mul(&(s1 - s0));
    let pc = precision * cross;
    let lin = DVector::from_fn(d, |r, _| pc[(r, r)]);

    let mut delta = start.map(|a| a.clamp(0.0, cap));
    for _ in 0..AR_SWEEPS {
        for r in 0..d {
            let rest: f64 = (0..d).filter(|&s| s != r).map(|s| gram[(r, s)] * delta[s]).sum();
            let target = lin[r] - rest;
            let diag = gram[(r, r)];
            delta[r] = if diag > 0.0 {
                (target / diag).clamp(0.0, cap)
            } else {
                // Concave along this coordinate: take the better endpoint.
                let at_cap = diag * cap * cap - 2.0 * target * cap;
                if at_cap < 0.0 { cap } else { 0.0 }
            };
        }
    }
    delta
}

fn sigma_step(
    data: &TimeSeriesDataset,
    cs: &Coreset,
    resp: &[Vec<f64>],
    l: usize,
    mu: &DVector<f64>,
    ar: &DVector<f64>,
    mass: f64,
) -> DMatrix<f64> {
    let d = data.dim();
    let parts: Vec<DMatrix<f64>> = par::map_range(cs.entities().len(), |j| {
        let ce = &cs.entities()[j];
        let series = &data.entities()[ce.id];
        let omega = pair_weight(ce.weight, resp[j][l], series.len());
        let mut s = DMatrix::zeros(d, d);
        for &(t, w) in &ce.times {
            let c = omega * w;
            let z = DVector::from_column_slice(series.row(t)) - mu;
            if t == 0 {
                let lz = z.component_mul(ar);
                s += (&z * z.transpose() - &lz * lz.transpose()) * c;
            } else {
                let zp = DVector::from_column_slice(series.row(t - 1)) - mu;
                let v = &z - zp.component_mul(ar);
                s += &v * v.transpose() * c;
            }
        }
        s
    });
    let mut scatter = DMatrix::zeros(d, d);
    for p in parts {
        scatter += p;
    }
    floor_eigenvalues(scatter / mass)
}

fn m_step(
    data: &TimeSeriesDataset,
    cs: &Coreset,
    eval: &Evaluation,
    state: &State,
    config: &FitConfig,
    fallback_cov: &DMatrix<f64>,
) -> Result<State> {
    let k = state.alpha.len();
    let d = data.dim();
    let cap = config.bounds.ar_cap();
    let total_weight: f64 = cs.entities().iter().map(|e| e.weight).sum();
    let mut next = state.clone();
    let mut taken = vec![false; eval.entity_cost.len()];
    for l in 0..k {
        let mass: f64 = cs.entities().iter().zip(&eval.resp).map(|(e, r)| e.weight * r[l]).sum();
        if mass < EMPTY_MASS {
            // Reinitialize at the worst-fit entity not already used.
            let worst = (0..eval.entity_cost.len())
                .filter(|&j| !taken[j])
                .max_by(|&a, &b| eval.entity_cost[a].total_cmp(&eval.entity_cost[b]))
                .unwrap_or(0);
            taken[worst] = true;
            let ce = &cs.entities()[worst];
            let series = &data.entities()[ce.id];
            let mut b = DVector::zeros(d);
            let mut wsum = 0.0;
            for &(t, w) in &ce.times {
                b += DVector::from_column_slice(series.row(t)) * w;
                wsum += w;
            }
            next.mu[l] = b / wsum.max(f64::MIN_POSITIVE);
            next.ar[l] = DVector::zeros(d);
            next.sigma[l] = fallback_cov.clone();
            next.alpha[l] = 1.0 / k as f64;
            continue;
        }
        let precision = component_precision(&state.sigma[l])?;
        if let Some(mu) = mean_step(data, cs, &eval.resp, l, &state.ar[l], &precision) {
            next.mu[l] = mu;
        }
        if config.update_ar {
            next.ar[l] = ar_step(data, cs, &eval.resp, l, &next.mu[l], &state.ar[l], &precision, cap);
        }
        if config.update_sigma {
            next.sigma[l] = sigma_step(data, cs, &eval.resp, l, &next.mu[l], &next.ar[l], mass);
        }
        next.alpha[l] = mass / total_weight;
    }
    let sum: f64 = next.alpha.iter().sum();
    next.alpha.iter_mut().for_each(|a| *a /= sum);
    Ok(next)
}

fn component_precision(sigma: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    sigma
        .clone()
        .cholesky()
        .map(|c| c.inverse())
        .ok_or_else(|| Error::Singular("covariance lost positive definiteness".into()))
}

struct Run {
    params: MixtureParams,
    objective: f64,
    trace: Vec<f64>,
    iterations: usize,
}

fn run_once(data: &TimeSeriesDataset, cs: &Coreset, init: MixtureParams, config: &FitConfig) -> Result<Run> {
    let fallback_cov = init.components()[0].sigma().clone();
    let mut params = init;
    let mut eval = evaluate(data, cs, &params)?;
    let mut trace = vec![eval.objective];
    let mut iterations = 0;
    for _ in 0..config.max_iters {
        iterations += 1;
        let state = State::from_params(&params);
        let proposal = m_step(data, cs, &eval, &state, config, &fallback_cov)?;
        let mut accepted = None;
        let mut step = 1.0;
        for _ in 0..=MAX_HALVINGS {
            let candidate = State::toward(&state, &proposal, step);
            let admissible = candidate
                .to_params(&config.bounds)
                .ok()
                .filter(|p| p.components().iter().all(Component::first_period_form_is_psd));
            if let Some(p) = admissible {
                match evaluate(data, cs, &p) {
                    Ok(e) if e.objective <= eval.objective => {
                        accepted = Some((p, e));
                        break;
                    }
                    Ok(_) => {}
                    Err(Error::Numeric(_)) => {}
                    Err(e) => return Err(e),
                }
            }
            step *= 0.5;
        }
        let Some((p, e)) = accepted else { break };
        let improvement = eval.objective - e.objective;
        let scale = 1.0 + eval.objective.abs();
        params = p;
        eval = e;
        trace.push(eval.objective);
        if improvement <= config.tol * scale {
            break;
        }
    }
    Ok(Run { params, objective: eval.objective, trace, iterations })
}

/// Fits the mixture on `coreset`, or on the full data when `None`.
///
/// Returns the best of `n_init` restarts by optimization objective. The
/// reported `objective` is always the full-data `f` at the fitted parameters.
pub fn fit(data: &TimeSeriesDataset, coreset: Option<&Coreset>, config: &FitConfig) -> Result<FitResult> {
    config.validate()?;
    let clock = Stopwatch::start();
    let identity;
    let cs = match coreset {
        Some(c) => {
            c.validate_for(data)?;
            c
        }
        None => {
            identity = Coreset::identity(data);
            &identity
        }
    };
    if cs.entities().is_empty() {
        return Err(Error::InvalidArgument("coreset is empty".into()));
    }
    let restarts = if config.initial.is_some() { 1 } else { config.n_init.max(1) };
    let mut best: Option<(usize, Run)> = None;
    let mut last_err = None;
    for r in 0..restarts {
        let init = match &config.initial {
            Some(p) => p.clone(),
            None => init_from_view(data, cs, config.k, rng::derive_seed(config.seed, Stage::EmInit, r as u64), &config.bounds)?,
        };
        match run_once(data, cs, init, config) {
            Ok(run) => {
                if best.as_ref().is_none_or(|(_, b)| run.objective < b.objective) {
                    best = Some((r, run));
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    let (restart, run) = match best {
        Some(b) => b,
        None => return Err(last_err.unwrap_or_else(|| Error::Numeric("no restart succeeded".into()))),
    };
    let objective = objective::full_objective(data, &run.params);
    Ok(FitResult {
        params: run.params,
        objective,
        fit_objective: run.objective,
        trace: run.trace,
        iterations: run.iterations,
        restart,
        wall_time: clock.elapsed(),
    })
}

/// Optimal assignment of estimated to reference components by squared mean
/// distance (Hungarian method). Returns `perm` with estimated component
/// `perm[l]` matched to reference component `l`.
pub fn align_components(reference: &MixtureParams, estimate: &MixtureParams) -> Vec<usize> {
    let k = reference.k();
    let cost: Vec<Vec<f64>> = (0..k)
        .map(|a| {
            (0..estimate.k())
                .map(|b| {
                    let (x, y) = (reference.components()[a].mu(), estimate.components()[b].mu());
                    x.iter().zip(y).map(|(p, q)| (p - q) * (p - q)).sum()
                })
                .collect()
        })
        .collect();
    hungarian(&cost)
}

/// Minimum-cost assignment for a square cost matrix; `result[row] = column`.
pub fn hungarian(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    let inf = f64::INFINITY;
    // 1-based potentials formulation.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut result = vec![0; n];
    for j in 1..=n {
        if p[j] > 0 {
            result[p[j] - 1] = j - 1;
        }
    }
    result
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::CoresetEntity;
    use approx::assert_relative_eq;

    fn bounds() -> ModelBounds {
        ModelBounds::new(1.0, 0.01).unwrap()
    }

    fn brute_assignment(cost: &[Vec<f64>]) -> f64 {
        fn go(row: usize, used: &mut Vec<bool>, cost: &[Vec<f64>]) -> f64 {
            if row == cost.len() {
                return 0.0;
            }
            let mut best = f64::INFINITY;
            for c in 0..cost.len() {
                if !used[c] {
                    used[c] = true;
                    best = best.min(cost[row][c] + go(row + 1, used, cost));
                    used[c] = false;
                }
            }
            best
        }
        go(0, &mut vec![false; cost.len()], cost)
    }

    #[test]
    fn hungarian_matches_enumeration() {
        let cost = vec![
            vec![4.0, 1.0, 3.0, 2.5],
            vec![2.0, 0.0, 5.0, 1.0],
            vec![3.0, 2.0, 2.0, 7.0],
            vec![1.5, 6.0, 0.5, 2.0],
        ];
        let a = hungarian(&cost);
        let total: f64 = a.iter().enumerate().map(|(r, &c)| cost[r][c]).sum();
        assert_relative_eq!(total, brute_assignment(&cost));
    }

    #[test]
    fn fixed_structure_mean_is_weighted_mean_of_entity_means() {
        let data = TimeSeriesDataset::from_values(1, vec![vec![1.0, 2.0, 3.0], vec![5.0, 5.0, 8.0], vec![-1.0, 0.0, 1.0]])
            .unwrap();
        let weights = [2.0, 0.5, 1.0];
        let cs = Coreset::new(
            (0..3).map(|i| CoresetEntity { id: i, weight: weights[i], times: (0..3).map(|t| (t, 1.0)).collect() }).collect(),
        )
        .unwrap();
        let start = MixtureParams::new(
            vec![1.0],
            vec![Component::new(vec![0.0], DMatrix::identity(1, 1), vec![0.0], &bounds()).unwrap()],
        )
        .unwrap();
        let mut cfg = FitConfig::new(1, bounds(), 0);
        cfg.update_ar = false;
        cfg.update_sigma = false;
        cfg.initial = Some(start);
        let fit = fit(&data, Some(&cs), &cfg).unwrap();
        let means = [2.0, 6.0, 0.0];
        let expected: f64 = means.iter().zip(&weights).map(|(m, w)| m * w).sum::<f64>() / weights.iter().sum::<f64>();
        assert_relative_eq!(fit.params.components()[0].mu()[0], expected, epsilon = 1e-10);
        assert_eq!(fit.params.components()[0].ar(), &[0.0]);
        assert!(fit.trace.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn init_single_component_is_global_mean() {
        let data = TimeSeriesDataset::from_values(2, vec![vec![1.0, 0.0, 3.0, 2.0], vec![-1.0, 4.0, -1.0, 6.0]]).unwrap();
        let p = init_params(&data, 1, 5, &bounds()).unwrap();
        assert_relative_eq!(p.components()[0].mu()[0], 0.5, epsilon = 1e-14);
        assert_relative_eq!(p.components()[0].mu()[1], 3.0, epsilon = 1e-14);
        assert_eq!(p.alpha(), &[1.0]);
        assert_eq!(p, init_params(&data, 1, 5, &bounds()).unwrap());
        assert!(p.components()[0].sigma().clone().cholesky().is_some());
    }

    #[test]
    fn floor_keeps_covariance_positive() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let f = floor_eigenvalues(m);
        assert!(f.cholesky().is_some());
    }

    #[test]
    fn rejects_bad_config() {
        let data = TimeSeriesDataset::from_values(1, vec![vec![1.0, 2.0]]).unwrap();
        let mut cfg = FitConfig::new(1, bounds(), 0);
        cfg.tol = 0.0;
        assert!(fit(&data, None, &cfg).is_err());
        let cfg = FitConfig::new(2, bounds(), 0);
        assert!(fit(&data, None, &cfg).is_err());
    }
}
