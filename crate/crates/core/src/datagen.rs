//! Synthetic panels drawn from a Gaussian mixture with AR(1) errors.
//!
//! Parameters: `alpha` uniform on the simplex, `mu ~ N(0, I)`,
//! `Sigma = (A A^T)^{-1}` with `A` uniform on `[0,1]^{d x d}`, and a diagonal
//! `Lambda` with entries uniform on `[0, 1 - sqrt(lambda)]`. Each entity picks
//! a component from `alpha` and evolves `e_t = Lambda e_{t-1} + N(0, Sigma)`,
//! `x_t = mu + e_t`.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

use crate::error::{Error, Result};
use crate::model::{Component, EntitySeries, MixtureParams, ModelBounds, TimeSeriesDataset};
use crate::par;
use crate::rng::{self, Stage};

const MAX_REDRAWS: usize = 100;
const SINGULAR_TOL: f64 = 1e-10;

/// Distribution of the pre-sample error `e_0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InitMode {
    /// Per-dimension stationary marginal `N(0, sigma_rr / (1 - Lambda_rr^2))`.
    #[default]
    Stationary,
    /// `e_0 = 0`.
    Zero,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenConfig {
    pub n_entities: usize,
    pub series_len: usize,
    pub d: usize,
    pub k: usize,
    pub lambda: f64,
    pub seed: u64,
    pub init: InitMode,
}

/// Named dataset shapes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// 500 entities x 500 periods.
    Synthetic1,
    /// 200 entities x 1250 periods.
    Synthetic2,
    /// 200 x 200, small enough for interactive runs and tests.
    Desk,
}

impl Preset {
    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "synthetic1" => Some(Self::Synthetic1),
            "synthetic2" => Some(Self::Synthetic2),
            "desk" => Some(Self::Desk),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Synthetic1 => "synthetic1",
            Self::Synthetic2 => "synthetic2",
            Self::Desk => "desk",
        }
    }

    pub fn config(self, seed: u64) -> GenConfig {
        let (n, t) = match self {
            Self::Synthetic1 => (500, 500),
            Self::Synthetic2 => (200, 1250),
            Self::Desk => (200, 200),
        };
        GenConfig { n_entities: n, series_len: t, d: 2, k: 3, lambda: 0.01, seed, init: InitMode::Stationary }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_entities == 0 || self.series_len == 0 || self.d == 0 || self.k == 0 {
            return Err(Error::InvalidArgument("N, T, d and k must all be at least 1".into()));
        }
        if !(self.lambda > 0.0 && self.lambda < 1.0) {
            return Err(Error::InvalidArgument(format!("lambda must lie in (0,1), got {}", self.lambda)));
        }
        Ok(())
    }

    fn ar_bounds(&self) -> Result<ModelBounds> {
        ModelBounds::new(1.0, self.lambda)
    }
}

/// Planted parameters and the component each entity was drawn from.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub params: MixtureParams,
    pub labels: Vec<usize>,
}

fn draw_covariance<R: Rng>(d: usize, rng: &mut R) -> DMatrix<f64> {
    for _ in 0..MAX_REDRAWS {
        let a = DMatrix::from_fn(d, d, |_, _| rng.random::<f64>());
        let gram = &a * a.transpose();
        let min_eig = SymmetricEigen::new(gram.clone()).eigenvalues.min();
        if min_eig <= SINGULAR_TOL {
            continue;
        }
        if let Some(inv) = gram.try_inverse() {
            let sym = (&inv + inv.transpose()) * 0.5;
            if sym.iter().all(|v| v.is_finite()) && sym.clone().cholesky().is_some() {
                return sym;
            }
        }
    }
    DMatrix::identity(d, d)
}

/// Draws mixture parameters for `config`.
pub fn draw_params(config: &GenConfig) -> Result<MixtureParams> {
    config.validate()?;
    let bounds = config.ar_bounds()?;
    let mut rng = rng::stream(config.seed, Stage::DrawParams, 0);

    let raw: Vec<f64> = (0..config.k).map(|_| Exp1.sample(&mut rng)).collect();
    let total: f64 = raw.iter().sum();
    let mut alpha: Vec<f64> = raw.iter().map(|v| v / total).collect();
    let drift: f64 = alpha.iter().sum::<f64>() - 1.0;
    alpha[0] = (alpha[0] - drift).clamp(0.0, 1.0);

    let cap = bounds.ar_cap();
    let mut components = Vec::with_capacity(config.k);
    for _ in 0..config.k {
        let mu: Vec<f64> = (0..config.d).map(|_| StandardNormal.sample(&mut rng)).collect();
        let mut sigma = draw_covariance(config.d, &mut rng);
        let ar: Vec<f64> = (0..config.d).map(|_| rng.random::<f64>() * cap).collect();
        let comp = match Component::new(mu.clone(), sigma.clone(), ar.clone(), &bounds) {
            Ok(c) => c,
            Err(_) => {
                sigma = DMatrix::identity(config.d, config.d);
                Component::new(mu, sigma, ar, &bounds)?
            }
        };
        components.push(comp);
    }
    MixtureParams::new(alpha, components)
}

fn draw_entity(config: &GenConfig, params: &MixtureParams, id: usize) -> (usize, Vec<f64>) {
    let mut rng = rng::stream(config.seed, Stage::DrawEntity, id as u64);
    let u = rng.random::<f64>();
    let mut acc = 0.0;
    let mut label = params.k() - 1;
    for (l, a) in params.alpha().iter().enumerate() {
        acc += a;
        if u < acc && *a > 0.0 {
            label = l;
            break;
        }
    }
    let comp = &params.components()[label];
    let d = comp.dim();
    let ar = comp.ar();
    let mut err: Vec<f64> = match config.init {
        InitMode::Zero => vec![0.0; d],
        InitMode::Stationary => (0..d)
            .map(|r| {
                let var = comp.sigma()[(r, r)] / (1.0 - ar[r] * ar[r]);
                let z: f64 = StandardNormal.sample(&mut rng);
                var.sqrt() * z
            })
            .collect(),
    };
    let mut z = vec![0.0; d];
    let mut shock = vec![0.0; d];
    let mut values = Vec::with_capacity(config.series_len * d);
    for _ in 0..config.series_len {
        z.iter_mut().for_each(|v| *v = StandardNormal.sample(&mut rng));
        comp.apply_factor(&z, &mut shock);
        for r in 0..d {
            err[r] = ar[r] * err[r] + shock[r];
            values.push(comp.mu()[r] + err[r]);
        }
    }
    (label, values)
}

/// Draws a panel from given parameters. Entities use independent streams
/// keyed by their id.
pub fn generate_with_params(config: &GenConfig, params: &MixtureParams) -> Result<(TimeSeriesDataset, Vec<usize>)> {
    config.validate()?;
    if params.dim() != config.d {
        return Err(Error::InvalidArgument(format!(
            "parameters have dimension {}, config asks for {}",
            params.dim(),
            config.d
        )));
    }
    let drawn = par::map_range(config.n_entities, |i| draw_entity(config, params, i));
    let mut labels = Vec::with_capacity(drawn.len());
    let mut entities = Vec::with_capacity(drawn.len());
    for (i, (label, values)) in drawn.into_iter().enumerate() {
        labels.push(label);
        entities.push(EntitySeries::new(i, config.d, values)?);
    }
    Ok((TimeSeriesDataset::new(config.d, entities)?, labels))
}

/// Draws parameters and a panel.
pub fn generate(config: &GenConfig) -> Result<(TimeSeriesDataset, GroundTruth)> {
    let params = draw_params(config)?;
    let (data, labels) = generate_with_params(config, &params)?;
    Ok((data, GroundTruth { params, labels }))
}
