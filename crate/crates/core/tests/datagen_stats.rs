use nalgebra::DMatrix;
use tsc_core::datagen::{draw_params, generate, generate_with_params, GenConfig, InitMode};
use tsc_core::{Component, MixtureParams, ModelBounds};

fn single(ar: f64, n: usize, len: usize, seed: u64) -> (GenConfig, MixtureParams) {
    let bounds = ModelBounds::new(1.0, 0.01).unwrap();
    let comp = Component::new(vec![0.0], DMatrix::identity(1, 1), vec![ar], &bounds).unwrap();
    let cfg = GenConfig { n_entities: n, series_len: len, d: 1, k: 1, lambda: 0.01, seed, init: InitMode::Stationary };
    (cfg, MixtureParams::new(vec![1.0], vec![comp]).unwrap())
}

#[test]
fn white_noise_sample_mean_concentrates() {
    // N T = 10^4 and unit variance give a standard error of 0.01.
    let hits = (0..100)
        .filter(|&seed| {
            let (cfg, params) = single(0.0, 100, 100, seed);
            let (data, _) = generate_with_params(&cfg, &params).unwrap();
            let all: Vec<f64> = data.entities().iter().flat_map(|e| e.values().to_vec()).collect();
            let mean = all.iter().sum::<f64>() / all.len() as f64;
            mean.abs() <= 0.05
        })
        .count();
    assert!(hits >= 95, "{hits} of 100 seeds within 0.05");
}

#[test]
fn lag_one_autocorrelation_matches_coefficient() {
    for seed in 0..5 {
        let (cfg, params) = single(0.8, 1, 10_000, seed);
        let (data, _) = generate_with_params(&cfg, &params).unwrap();
        let x = data.entities()[0].values();
        let mean = x.iter().sum::<f64>() / x.len() as f64;
        let var: f64 = x.iter().map(|v| (v - mean) * (v - mean)).sum();
        let cov: f64 = x.windows(2).map(|w| (w[0] - mean) * (w[1] - mean)).sum();
        let acf = cov / var;
        assert!((acf - 0.8).abs() <= 0.05, "seed {seed}: acf {acf}");
    }
}

#[test]
fn stationary_start_has_stationary_variance() {
    // Var(x_0) = 1 / (1 - 0.8^2) under the stationary start, 1 under the zero start.
    let (cfg, params) = single(0.8, 20_000, 1, 4);
    let (data, _) = generate_with_params(&cfg, &params).unwrap();
    let first: Vec<f64> = data.entities().iter().map(|e| e.values()[0]).collect();
    let var = first.iter().map(|v| v * v).sum::<f64>() / first.len() as f64;
    assert!((var - 1.0 / 0.36).abs() < 0.1, "stationary var {var}");

    let cfg = GenConfig { init: InitMode::Zero, ..cfg };
    let (data, _) = generate_with_params(&cfg, &params).unwrap();
    let var = data.entities().iter().map(|e| e.values()[0].powi(2)).sum::<f64>() / 20_000.0;
    assert!((var - 1.0).abs() < 0.05, "zero-start var {var}");
}

#[test]
fn labels_follow_mixture_weights() {
    // Chi-square with 2 degrees of freedom, 0.01 level.
    const CRITICAL: f64 = 9.210;
    let mut passes = 0;
    for seed in 0..20 {
        let cfg = GenConfig { n_entities: 10_000, series_len: 1, d: 2, k: 3, lambda: 0.01, seed, init: InitMode::Stationary };
        let (_, truth) = generate(&cfg).unwrap();
        let mut counts = [0usize; 3];
        truth.labels.iter().for_each(|&l| counts[l] += 1);
        let stat: f64 = truth
            .params
            .alpha()
            .iter()
            .zip(counts)
            .map(|(&a, c)| {
                let expected = a * 10_000.0;
                (c as f64 - expected).powi(2) / expected
            })
            .sum();
        if stat <= CRITICAL {
            passes += 1;
        }
    }
    assert!(passes >= 18, "{passes} of 20 seeds pass");
}

#[test]
fn generated_parameters_respect_bounds_for_every_lambda() {
    for &lambda in &[0.01, 0.25, 0.81] {
        for seed in 0..20 {
            let cfg = GenConfig { n_entities: 1, series_len: 1, d: 3, k: 3, lambda, seed, init: InitMode::Stationary };
            let p = draw_params(&cfg).unwrap();
            let cap = 1.0 - lambda.sqrt();
            for c in p.components() {
                assert!(c.ar().iter().all(|&a| (0.0..=cap).contains(&a)));
            }
        }
    }
}
