//! Panel data, mixture parameters and coresets.
//!
//! Observations are stored row-major: row `t` of an entity is the `d`-vector
//! observed at time `t`. Time indices are zero-based throughout the crate.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Symmetry tolerance applied to user supplied covariance matrices.
pub const SYMMETRY_TOL: f64 = 1e-10;

/// Tolerance on `sum(alpha) == 1`.
pub const SIMPLEX_TOL: f64 = 1e-12;

/// One entity's time series, a `T_i x d` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct EntitySeries {
    id: usize,
    dim: usize,
    values: Vec<f64>,
}

impl EntitySeries {
    /// Builds a series from row-major values. `values.len()` must be a
    /// positive multiple of `dim` and every value finite.
    pub fn new(id: usize, dim: usize, values: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidData("feature dimension must be at least 1".into()));
        }
        if values.is_empty() || !values.len().is_multiple_of(dim) {
            return Err(Error::InvalidData(format!(
                "entity {id}: {} values do not form rows of dimension {dim}",
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidData(format!(
                "entity {id}: non-finite value at row {}",
                pos / dim
            )));
        }
        Ok(Self { id, dim, values })
    }

    pub fn from_rows(id: usize, rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map(Vec::len).unwrap_or(0);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::InvalidData(format!("entity {id}: ragged rows")));
        }
        Self::new(id, dim, rows.concat())
    }

    pub fn id(&self) -> usize {
        self.id
    }

    /// Number of observations `T_i`.
    pub fn len(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn row(&self, t: usize) -> &[f64] {
        &self.values[t * self.dim..(t + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.dim)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// A panel of `N` entity series sharing the feature dimension `d`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesDataset {
    dim: usize,
    entities: Vec<EntitySeries>,
}

impl TimeSeriesDataset {
    /// Entity ids must equal their position in `entities`.
    pub fn new(dim: usize, entities: Vec<EntitySeries>) -> Result<Self> {
        if entities.is_empty() {
            return Err(Error::InvalidData("dataset has no entities".into()));
        }
        for (i, e) in entities.iter().enumerate() {
            if e.id() != i {
                return Err(Error::InvalidData(format!(
                    "entity ids must be dense: position {i} holds id {}",
                    e.id()
                )));
            }
            if e.dim() != dim {
                return Err(Error::InvalidData(format!(
                    "entity {i} has dimension {}, expected {dim}",
                    e.dim()
                )));
            }
        }
        Ok(Self { dim, entities })
    }

    /// Convenience constructor from per-entity row-major value vectors.
    pub fn from_values(dim: usize, series: Vec<Vec<f64>>) -> Result<Self> {
        let entities = series
            .into_iter()
            .enumerate()
            .map(|(i, v)| EntitySeries::new(i, dim, v))
            .collect::<Result<Vec<_>>>()?;
        Self::new(dim, entities)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_entities(&self) -> usize {
        self.entities.len()
    }

    /// `|P_X| = sum_i T_i`.
    pub fn total_observations(&self) -> usize {
        self.entities.iter().map(EntitySeries::len).sum()
    }

    pub fn entity(&self, id: usize) -> Option<&EntitySeries> {
        self.entities.get(id)
    }

    pub fn entities(&self) -> &[EntitySeries] {
        &self.entities
    }
}

/// Covariance condition bound `D` and autocorrelation gap `lambda`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelBounds {
    d_ratio: f64,
    lambda: f64,
}

impl ModelBounds {
    pub fn new(d_ratio: f64, lambda: f64) -> Result<Self> {
        if !(d_ratio >= 1.0 && d_ratio.is_finite()) {
            return Err(Error::InvalidArgument(format!("D must be >= 1, got {d_ratio}")));
        }
        if !(lambda > 0.0 && lambda < 1.0) {
            return Err(Error::InvalidArgument(format!("lambda must lie in (0,1), got {lambda}")));
        }
        Ok(Self { d_ratio, lambda })
    }

    /// Bounds whose `D` is the actual eigenvalue spread of `components`,
    /// `max_l lambda_max(Sigma_l) / min_l lambda_min(Sigma_l)`.
    pub fn from_components(components: &[Component], lambda: f64) -> Result<Self> {
        let mut hi = f64::NEG_INFINITY;
        let mut lo = f64::INFINITY;
        for c in components {
            let (min, max) = c.eigen_range();
            hi = hi.max(max);
            lo = lo.min(min);
        }
        Self::new((hi / lo).max(1.0), lambda)
    }

    pub fn d_ratio(&self) -> f64 {
        self.d_ratio
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Largest admissible autocorrelation coefficient, `1 - sqrt(lambda)`.
    pub fn ar_cap(&self) -> f64 {
        1.0 - self.lambda.sqrt()
    }
}

/// One mixture component `(mu, Sigma, Lambda)` with a cached Cholesky factor
/// of `Sigma`.
#[derive(Debug, Clone, PartialEq)]
pub struct Component {
    mu: Vec<f64>,
    sigma: DMatrix<f64>,
    ar: Vec<f64>,
    chol: Vec<f64>,
    log_det: f64,
}

impl Component {
    /// `sigma` is symmetrized as `(S + S^T)/2` after a symmetry check and must
    /// admit a Cholesky factorization. Every `ar` entry must lie in
    /// `[0, bounds.ar_cap()]`.
    pub fn new(mu: Vec<f64>, sigma: DMatrix<f64>, ar: Vec<f64>, bounds: &ModelBounds) -> Result<Self> {
        let d = mu.len();
        if d == 0 {
            return Err(Error::InvalidArgument("component mean is empty".into()));
        }
        if sigma.nrows() != d || sigma.ncols() != d || ar.len() != d {
            return Err(Error::InvalidArgument(format!(
                "component shapes disagree: mu {d}, sigma {}x{}, ar {}",
                sigma.nrows(),
                sigma.ncols(),
                ar.len()
            )));
        }
        if mu.iter().chain(sigma.iter()).chain(ar.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("component has non-finite entries".into()));
        }
        let cap = bounds.ar_cap();
        if let Some(a) = ar.iter().find(|&&a| !(0.0..=cap).contains(&a)) {
            return Err(Error::InvalidArgument(format!(
                "autocorrelation {a} outside [0, {cap}]"
            )));
        }
        for r in 0..d {
            for c in 0..r {
                let (a, b) = (sigma[(r, c)], sigma[(c, r)]);
                if (a - b).abs() > SYMMETRY_TOL * (1.0 + a.abs().max(b.abs())) {
                    return Err(Error::Singular(format!("sigma is not symmetric at ({r},{c})")));
                }
            }
        }
        let sigma = (&sigma + sigma.transpose()) * 0.5;
        let chol = sigma
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Singular("Cholesky factorization failed".into()))?;
        let l = chol.l();
        let mut flat = vec![0.0; d * d];
        let mut log_det = 0.0;
        for r in 0..d {
            for c in 0..=r {
                flat[r * d + c] = l[(r, c)];
            }
            log_det += 2.0 * l[(r, r)].ln();
        }
        if !log_det.is_finite() {
            return Err(Error::Singular("sigma has a non-finite log-determinant".into()));
        }
        Ok(Self { mu, sigma, ar, chol: flat, log_det })
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    /// Diagonal of `Lambda`.
    pub fn ar(&self) -> &[f64] {
        &self.ar
    }

    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    /// `ln((2 pi)^{-d/2} |Sigma|^{-1/2})`.
    pub fn log_norm(&self) -> f64 {
        -0.5 * self.dim() as f64 * crate::objective::LN_2PI - 0.5 * self.log_det
    }

    /// `v^T Sigma^{-1} v` through forward substitution with the cached factor.
    #[inline]
    pub fn quad(&self, v: &[f64]) -> f64 {
        let d = self.dim();
        let mut y = [0.0f64; 8];
        let mut heap;
        let y: &mut [f64] = if d <= 8 {
            &mut y[..d]
        } else {
            heap = vec![0.0; d];
            &mut heap
        };
        let mut acc = 0.0;
        for r in 0..d {
            let row = &self.chol[r * d..r * d + r];
            let mut s = v[r];
            for (c, lrc) in row.iter().enumerate() {
                s -= lrc * y[c];
            }
            let yr = s / self.chol[r * d + r];
            y[r] = yr;
            acc += yr * yr;
        }
        acc
    }

    /// Writes `L z` into `out`, where `L L^T = Sigma`.
    pub(crate) fn apply_factor(&self, z: &[f64], out: &mut [f64]) {
        let d = self.dim();
        for r in 0..d {
            out[r] = (0..=r).map(|c| self.chol[r * d + c] * z[c]).sum();
        }
    }

    /// Whether `S^-1 - L S^-1 L` is positive semidefinite, which makes the
    /// first-period cost nonnegative for every deviation. Always true when
    /// the covariance is diagonal or the autocorrelation is a multiple of the
    /// identity.
    pub fn first_period_form_is_psd(&self) -> bool {
        let p = self.precision();
        let lam = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&self.ar));
        let m = &p - &lam * &p * &lam;
        let sym = (&m + m.transpose()) * 0.5;
        let scale = sym.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let min = nalgebra::SymmetricEigen::new(sym).eigenvalues.min();
        min >= -1e-12 * scale
    }

    /// `Sigma^{-1}` as a dense matrix.
    pub fn precision(&self) -> DMatrix<f64> {
        let d = self.dim();
        let mut p = DMatrix::zeros(d, d);
        let mut e = vec![0.0; d];
        for c in 0..d {
            e.iter_mut().for_each(|x| *x = 0.0);
            e[c] = 1.0;
            // Solve L y = e, then L^T x = y.
            let mut y = vec![0.0; d];
            for r in 0..d {
                let mut s = e[r];
                for j in 0..r {
                    s -= self.chol[r * d + j] * y[j];
                }
                y[r] = s / self.chol[r * d + r];
            }
            let mut x = vec![0.0; d];
            for r in (0..d).rev() {
                let mut s = y[r];
                for j in r + 1..d {
                    s -= self.chol[j * d + r] * x[j];
                }
                x[r] = s / self.chol[r * d + r];
            }
            for r in 0..d {
                p[(r, c)] = x[r];
            }
        }
        p
    }

    /// `(lambda_min(Sigma), lambda_max(Sigma))`.
    pub fn eigen_range(&self) -> (f64, f64) {
        let eig = SymmetricEigen::new(self.sigma.clone());
        let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = eig.eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        (min, max)
    }
}

/// Mixture weights on the simplex and `k` components.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureParams {
    alpha: Vec<f64>,
    components: Vec<Component>,
}

impl MixtureParams {
    pub fn new(alpha: Vec<f64>, components: Vec<Component>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidArgument("mixture needs at least one component".into()));
        }
        if alpha.len() != components.len() {
            return Err(Error::InvalidArgument(format!(
                "{} weights for {} components",
                alpha.len(),
                components.len()
            )));
        }
        let d = components[0].dim();
        if components.iter().any(|c| c.dim() != d) {
            return Err(Error::InvalidArgument("components differ in dimension".into()));
        }
        if alpha.iter().any(|a| !(0.0..=1.0).contains(a)) {
            return Err(Error::InvalidArgument(format!("alpha {alpha:?} leaves [0,1]")));
        }
        let sum: f64 = alpha.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::InvalidArgument(format!("alpha sums to {sum}, not 1")));
        }
        Ok(Self { alpha, components })
    }

    pub fn k(&self) -> usize {
        self.alpha.len()
    }

    pub fn dim(&self) -> usize {
        self.components[0].dim()
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn into_parts(self) -> (Vec<f64>, Vec<Component>) {
        (self.alpha, self.components)
    }
}

/// A sampled entity together with its sampled time periods.
#[derive(Debug, Clone, PartialEq)]
pub struct CoresetEntity {
    pub id: usize,
    pub weight: f64,
    /// `(t, w_i(t))`, sorted by `t`.
    pub times: Vec<(usize, f64)>,
}

/// Weighted entity-time pairs with entity weights `w(i)` and per-entity time
/// weights `w_i(t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Coreset {
    entities: Vec<CoresetEntity>,
}

impl Coreset {
    /// Sorts entities and times; rejects duplicates, empty time sets and
    /// negative or non-finite weights.
    pub fn new(mut entities: Vec<CoresetEntity>) -> Result<Self> {
        entities.sort_by_key(|e| e.id);
        for pair in entities.windows(2) {
            if pair[0].id == pair[1].id {
                return Err(Error::InvalidData(format!("entity {} appears twice", pair[0].id)));
            }
        }
        for e in &mut entities {
            if !(e.weight.is_finite() && e.weight >= 0.0) {
                return Err(Error::InvalidData(format!("entity {} has weight {}", e.id, e.weight)));
            }
            if e.times.is_empty() {
                return Err(Error::InvalidData(format!("entity {} has no time periods", e.id)));
            }
            e.times.sort_by_key(|&(t, _)| t);
            for pair in e.times.windows(2) {
                if pair[0].0 == pair[1].0 {
                    return Err(Error::InvalidData(format!(
                        "entity {}: time {} appears twice",
                        e.id, pair[0].0
                    )));
                }
            }
            if let Some(&(t, w)) = e.times.iter().find(|(_, w)| !(w.is_finite() && *w >= 0.0)) {
                return Err(Error::InvalidData(format!("entity {}: time {t} has weight {w}", e.id)));
            }
        }
        Ok(Self { entities })
    }

    /// Every pair of `data` with unit weights.
    pub fn identity(data: &TimeSeriesDataset) -> Self {
        let entities = data
            .entities()
            .iter()
            .map(|e| CoresetEntity {
                id: e.id(),
                weight: 1.0,
                times: (0..e.len()).map(|t| (t, 1.0)).collect(),
            })
            .collect();
        Self { entities }
    }

    /// Checks that every index refers to an observation of `data`.
    pub fn validate_for(&self, data: &TimeSeriesDataset) -> Result<()> {
        for e in &self.entities {
            let series = data.entity(e.id).ok_or_else(|| {
                Error::Index(format!("entity {} not in dataset of {} entities", e.id, data.n_entities()))
            })?;
            if let Some(&(t, _)) = e.times.last() {
                if t >= series.len() {
                    return Err(Error::Index(format!(
                        "entity {}: time {t} beyond series length {}",
                        e.id,
                        series.len()
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn entities(&self) -> &[CoresetEntity] {
        &self.entities
    }

    pub fn entity_ids(&self) -> impl Iterator<Item = usize> + '_ {
        self.entities.iter().map(|e| e.id)
    }

    /// Number of distinct entity-time pairs, `sum_i |J_i|`.
    pub fn size(&self) -> usize {
        self.entities.iter().map(|e| e.times.len()).sum()
    }

    pub fn total_entity_weight(&self) -> f64 {
        self.entities.iter().map(|e| e.weight).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bounds() -> ModelBounds {
        ModelBounds::new(1.0, 0.25).unwrap()
    }

    #[test]
    fn first_period_form_sign() {
        let b = ModelBounds::new(1.0, 0.01).unwrap();
        let corr = DMatrix::from_row_slice(2, 2, &[1.0, 0.9, 0.9, 1.0]);
        // P - L P L with L = diag(0.9, 0) has determinant below zero here.
        let c = Component::new(vec![0.0; 2], corr.clone(), vec![0.9, 0.0], &b).unwrap();
        assert!(!c.first_period_form_is_psd());
        assert!(c.quad(&[1.0, -1.0]) > 0.0);
        let same = Component::new(vec![0.0; 2], corr, vec![0.5, 0.5], &b).unwrap();
        assert!(same.first_period_form_is_psd());
        let diag = Component::new(vec![0.0; 2], DMatrix::from_diagonal_element(2, 2, 3.0), vec![0.9, 0.0], &b).unwrap();
        assert!(diag.first_period_form_is_psd());
    }

    #[test]
    fn series_rejects_non_finite_and_ragged_input() {
        assert!(EntitySeries::new(0, 2, vec![1.0, f64::NAN]).is_err());
        assert!(EntitySeries::new(0, 2, vec![1.0, 2.0, 3.0]).is_err());
        assert!(EntitySeries::new(0, 2, vec![]).is_err());
        assert!(EntitySeries::from_rows(0, &[vec![1.0], vec![1.0, 2.0]]).is_err());
        let s = EntitySeries::from_rows(3, &[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.row(1), &[3.0, 4.0]);
    }

    #[test]
    fn dataset_requires_dense_ids() {
        let a = EntitySeries::new(0, 1, vec![1.0]).unwrap();
        let b = EntitySeries::new(2, 1, vec![1.0]).unwrap();
        assert!(TimeSeriesDataset::new(1, vec![a.clone(), b]).is_err());
        assert!(TimeSeriesDataset::new(1, vec![]).is_err());
        assert!(TimeSeriesDataset::new(2, vec![a]).is_err());
    }

    #[test]
    fn component_validates_sigma_and_ar() {
        let b = bounds();
        let eye = DMatrix::identity(2, 2);
        assert!(Component::new(vec![0.0; 2], eye.clone(), vec![0.0, 0.5], &b).is_ok());
        assert!(Component::new(vec![0.0; 2], eye.clone(), vec![0.0, 0.6], &b).is_err());
        assert!(Component::new(vec![0.0; 2], eye.clone(), vec![-0.1, 0.0], &b).is_err());
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.4, 1.0]);
        assert!(matches!(
            Component::new(vec![0.0; 2], asym, vec![0.0; 2], &b),
            Err(Error::Singular(_))
        ));
        let singular = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(matches!(
            Component::new(vec![0.0; 2], singular, vec![0.0; 2], &b),
            Err(Error::Singular(_))
        ));
    }

    #[test]
    fn quad_and_precision_agree_with_direct_inverse() {
        let sigma = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0]);
        let c = Component::new(vec![0.0; 3], sigma.clone(), vec![0.0; 3], &bounds()).unwrap();
        let inv = sigma.clone().try_inverse().unwrap();
        let v = nalgebra::DVector::from_vec(vec![1.0, -2.0, 0.5]);
        let direct = (v.transpose() * &inv * &v)[(0, 0)];
        assert!((c.quad(v.as_slice()) - direct).abs() < 1e-12);
        assert!((c.precision() - inv).abs().max() < 1e-12);
        assert!((c.log_det() - sigma.determinant().ln()).abs() < 1e-12);
    }

    #[test]
    fn mixture_alpha_must_be_on_simplex() {
        let c = Component::new(vec![0.0], DMatrix::identity(1, 1), vec![0.0], &bounds()).unwrap();
        assert!(MixtureParams::new(vec![0.5, 0.5], vec![c.clone(), c.clone()]).is_ok());
        assert!(MixtureParams::new(vec![0.5, 0.6], vec![c.clone(), c.clone()]).is_err());
        assert!(MixtureParams::new(vec![1.0], vec![c.clone(), c.clone()]).is_err());
        assert!(MixtureParams::new(vec![], vec![]).is_err());
    }

    #[test]
    fn coreset_validation() {
        let data = TimeSeriesDataset::from_values(1, vec![vec![1.0, 2.0], vec![3.0]]).unwrap();
        let ok = Coreset::new(vec![CoresetEntity { id: 0, weight: 1.0, times: vec![(1, 2.0)] }]).unwrap();
        assert!(ok.validate_for(&data).is_ok());
        let dangling = Coreset::new(vec![CoresetEntity { id: 1, weight: 1.0, times: vec![(1, 1.0)] }]).unwrap();
        assert!(matches!(dangling.validate_for(&data), Err(Error::Index(_))));
        let missing = Coreset::new(vec![CoresetEntity { id: 5, weight: 1.0, times: vec![(0, 1.0)] }]).unwrap();
        assert!(matches!(missing.validate_for(&data), Err(Error::Index(_))));
        assert!(Coreset::new(vec![CoresetEntity { id: 0, weight: -1.0, times: vec![(0, 1.0)] }]).is_err());
        assert!(Coreset::new(vec![CoresetEntity { id: 0, weight: 1.0, times: vec![] }]).is_err());
        assert_eq!(Coreset::identity(&data).size(), 3);
    }
}
