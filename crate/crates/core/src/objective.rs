//! Exact evaluation of the clustering objectives.
//!
//! All mixture terms go through a max-shifted log-sum-exp over components
//! with positive weight; `psi` values are never exponentiated directly.

use crate::error::{Error, Result};
use crate::model::{Component, Coreset, EntitySeries, MixtureParams, TimeSeriesDataset};
use crate::par;

/// `ln(2 pi)`.
pub(crate) const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Cost of the single time period `t` of `entity` under `comp`.
///
/// For `t = 0` this is `u'S^-1 u - (Lu)'S^-1(Lu)` with `u = x_0 - mu`; for
/// `t >= 1` the quadratic form of the AR(1) residual
/// `(x_t - mu) - L(x_{t-1} - mu)`.
pub fn psi_it(entity: &EntitySeries, t: usize, comp: &Component) -> Result<f64> {
    if t >= entity.len() {
        return Err(Error::Index(format!(
            "time {t} out of range for entity {} of length {}",
            entity.id(),
            entity.len()
        )));
    }
    let mut buf = vec![0.0; comp.dim()];
    Ok(psi_at(entity, t, comp, &mut buf))
}

#[inline]
pub(crate) fn psi_at(entity: &EntitySeries, t: usize, comp: &Component, buf: &mut [f64]) -> f64 {
    let mu = comp.mu();
    let ar = comp.ar();
    let x = entity.row(t);
    if t == 0 {
        for r in 0..buf.len() {
            buf[r] = x[r] - mu[r];
        }
        let full = comp.quad(buf);
        for r in 0..buf.len() {
            buf[r] *= ar[r];
        }
        full - comp.quad(buf)
    } else {
        let prev = entity.row(t - 1);
        for r in 0..buf.len() {
            buf[r] = (x[r] - mu[r]) - ar[r] * (prev[r] - mu[r]);
        }
        comp.quad(buf)
    }
}

/// `psi_i = sum_t psi_it`.
pub fn psi_i(entity: &EntitySeries, comp: &Component) -> f64 {
    let mut buf = vec![0.0; comp.dim()];
    (0..entity.len()).map(|t| psi_at(entity, t, comp, &mut buf)).sum()
}

/// Weighted partial sum `sum_{(t, w)} w * psi_it`.
pub(crate) fn psi_weighted(entity: &EntitySeries, times: &[(usize, f64)], comp: &Component) -> f64 {
    let mut buf = vec![0.0; comp.dim()];
    times.iter().map(|&(t, w)| w * psi_at(entity, t, comp, &mut buf)).sum()
}

/// Plain squared-distance cost `sum_t ||x_t - mu||^2`.
pub fn psi_o(entity: &EntitySeries, mu: &[f64]) -> f64 {
    entity
        .rows()
        .map(|x| x.iter().zip(mu).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
        .sum()
}

/// Max-shifted `ln sum_j exp(terms_j)`, skipping `-inf` terms.
pub fn log_sum_exp(terms: &[f64]) -> f64 {
    let max = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let sum: f64 = terms
        .iter()
        .filter(|v| **v > f64::NEG_INFINITY)
        .map(|v| (v - max).exp())
        .sum();
    max + sum.ln()
}

/// `-ln sum_l exp(log_coef_l - cost_l / (2 T))`.
pub(crate) fn mixture_neglog(log_coef: &[f64], costs: &[f64], len: usize) -> f64 {
    let scale = 0.5 / len as f64;
    let terms: Vec<f64> = log_coef
        .iter()
        .zip(costs)
        .map(|(&a, &c)| if a == f64::NEG_INFINITY { a } else { a - scale * c })
        .collect();
    -log_sum_exp(&terms)
}

/// `ln alpha_l`, with `-inf` for components of zero weight.
pub(crate) fn log_weights(alpha: &[f64]) -> Vec<f64> {
    alpha
        .iter()
        .map(|&a| if a > 0.0 { a.ln() } else { f64::NEG_INFINITY })
        .collect()
}

/// Negative log average-likelihood of one entity, `f_i(alpha, theta)`.
pub fn entity_nll(entity: &EntitySeries, params: &MixtureParams) -> f64 {
    let log_coef: Vec<f64> = log_weights(params.alpha())
        .iter()
        .zip(params.components())
        .map(|(a, c)| a + c.log_norm())
        .collect();
    let costs: Vec<f64> = params.components().iter().map(|c| psi_i(entity, c)).collect();
    mixture_neglog(&log_coef, &costs, entity.len())
}

/// Full objective `f = sum_i f_i`.
pub fn full_objective(data: &TimeSeriesDataset, params: &MixtureParams) -> f64 {
    par::map(data.entities(), |e| entity_nll(e, params)).iter().sum()
}

/// Normalized objective `f'(alpha, theta)` for an arbitrary weight vector.
pub fn prime_objective(data: &TimeSeriesDataset, alpha: &[f64], components: &[Component]) -> f64 {
    let log_coef = log_weights(alpha);
    par::map(data.entities(), |e| {
        let costs: Vec<f64> = components.iter().map(|c| psi_i(e, c)).collect();
        mixture_neglog(&log_coef, &costs, e.len())
    })
    .iter()
    .sum()
}

/// `ln Z(alpha, theta)` where `Z = sum_l alpha_l (2 pi)^{-d/2} |Sigma_l|^{-1/2}`.
pub fn log_normalizer(params: &MixtureParams) -> f64 {
    let terms: Vec<f64> = log_weights(params.alpha())
        .iter()
        .zip(params.components())
        .map(|(a, c)| a + c.log_norm())
        .collect();
    log_sum_exp(&terms)
}

/// Normalized coefficients `alpha'` (summing to one) for `params`.
pub fn normalized_weights(params: &MixtureParams) -> Vec<f64> {
    let log_z = log_normalizer(params);
    let mut out: Vec<f64> = log_weights(params.alpha())
        .iter()
        .zip(params.components())
        .map(|(a, c)| (a + c.log_norm() - log_z).exp())
        .collect();
    let sum: f64 = out.iter().sum();
    out.iter_mut().for_each(|a| *a /= sum);
    out
}

/// The decomposition `f = f'(alpha', theta) + phi`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedObjective {
    /// `f'(alpha'(theta), theta)`.
    pub f_prime: f64,
    /// Offset `-N ln Z(alpha, theta)`.
    pub phi: f64,
    pub alpha_prime: Vec<f64>,
}

pub fn normalized_objective(data: &TimeSeriesDataset, params: &MixtureParams) -> NormalizedObjective {
    let alpha_prime = normalized_weights(params);
    let f_prime = prime_objective(data, &alpha_prime, params.components());
    let phi = -(data.n_entities() as f64) * log_normalizer(params);
    NormalizedObjective { f_prime, phi, alpha_prime }
}

/// Coreset objective `f'_S(alpha, theta)`.
///
/// The `1/(2 T_i)` scaling always uses the full series length of entity `i`.
pub fn coreset_objective(
    data: &TimeSeriesDataset,
    coreset: &Coreset,
    alpha: &[f64],
    components: &[Component],
) -> Result<f64> {
    coreset.validate_for(data)?;
    let log_coef = log_weights(alpha);
    Ok(par::map(coreset.entities(), |ce| {
        let entity = &data.entities()[ce.id];
        let costs: Vec<f64> = components.iter().map(|c| psi_weighted(entity, &ce.times, c)).collect();
        ce.weight * mixture_neglog(&log_coef, &costs, entity.len())
    })
    .iter()
    .sum())
}
