#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use tsc_core::{Component, MixtureParams, ModelBounds, TimeSeriesDataset};

pub fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// Panel with `n` entities of random lengths in `1..=max_len`.
pub fn random_panel<R: Rng>(rng: &mut R, n: usize, max_len: usize, d: usize, spread: f64) -> TimeSeriesDataset {
    let series = (0..n)
        .map(|_| {
            let len = rng.random_range(1..=max_len);
            (0..len * d).map(|_| rng.random_range(-spread..spread)).collect()
        })
        .collect();
    TimeSeriesDataset::from_values(d, series).unwrap()
}

pub fn random_spd<R: Rng>(rng: &mut R, d: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
    &a * a.transpose() + DMatrix::identity(d, d) * 0.1
}

pub fn random_component<R: Rng>(rng: &mut R, d: usize, bounds: &ModelBounds) -> Component {
    let cap = bounds.ar_cap();
    let mu = (0..d).map(|_| rng.random_range(-3.0..3.0)).collect();
    let ar = (0..d).map(|_| rng.random_range(0.0..=cap)).collect();
    Component::new(mu, random_spd(rng, d), ar, bounds).unwrap()
}

pub fn random_alpha<R: Rng>(rng: &mut R, k: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..1.0)).collect();
    let sum: f64 = raw.iter().sum();
    let mut alpha: Vec<f64> = raw.iter().map(|v| v / sum).collect();
    let drift: f64 = alpha.iter().sum::<f64>() - 1.0;
    alpha[0] -= drift;
    alpha
}

pub fn random_params<R: Rng>(rng: &mut R, k: usize, d: usize, bounds: &ModelBounds) -> MixtureParams {
    let comps = (0..k).map(|_| random_component(rng, d, bounds)).collect();
    MixtureParams::new(random_alpha(rng, k), comps).unwrap()
}
