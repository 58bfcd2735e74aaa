//! Browser bindings for an interactive coreset walkthrough: draw a panel,
//! sample a coreset and compare objectives along an autocorrelation sweep.
//!
//! The logic lives in [`DemoState`], which is plain Rust and tested natively.
//! [`Demo`] wraps it for JavaScript and returns JSON strings.

use serde::Serialize;
use tsc_core::coreset::{build_coreset, SamplerConfig};
use tsc_core::datagen::{generate, GenConfig, InitMode};
use tsc_core::objective::{coreset_objective, full_objective, log_normalizer, normalized_weights};
use tsc_core::{Component, Coreset, Error, MixtureParams, ModelBounds, Result, TimeSeriesDataset};
use wasm_bindgen::prelude::*;

/// Entity means and planted labels of a generated panel.
#[derive(Debug, Serialize)]
pub struct PanelView {
    pub n: usize,
    pub t: usize,
    pub means: Vec<[f64; 2]>,
    pub labels: Vec<usize>,
    pub planted_ar: Vec<Vec<f64>>,
}

/// Sampled coreset with the sensitivities that drove it.
#[derive(Debug, Serialize)]
pub struct CoresetView {
    pub sensitivities: Vec<f64>,
    pub total_sensitivity: f64,
    pub entity_ids: Vec<usize>,
    pub entity_weights: Vec<f64>,
    pub pairs: usize,
    pub full_pairs: usize,
    /// Time sensitivities of the first selected entity.
    pub first_entity_times: Vec<f64>,
}

/// Objective of the full panel and the coreset estimate at one parameter point.
#[derive(Debug, Serialize)]
pub struct SweepPoint {
    pub ar: f64,
    pub full: f64,
    pub coreset: f64,
    pub relative_error: f64,
}

pub struct DemoState {
    data: TimeSeriesDataset,
    truth: MixtureParams,
    labels: Vec<usize>,
    k: usize,
    lambda: f64,
    coreset: Option<Coreset>,
}

impl DemoState {
    pub fn new(n: usize, t: usize, k: usize, lambda: f64, seed: u64) -> Result<Self> {
        let config = GenConfig { n_entities: n, series_len: t, d: 2, k, lambda, seed, init: InitMode::Stationary };
        let (data, truth) = generate(&config)?;
        Ok(Self { data, truth: truth.params, labels: truth.labels, k, lambda, coreset: None })
    }

    pub fn panel(&self) -> PanelView {
        let means = self
            .data
            .entities()
            .iter()
            .map(|e| {
                let mut m = [0.0; 2];
                for row in e.rows() {
                    m[0] += row[0];
                    m[1] += row[1];
                }
                [m[0] / e.len() as f64, m[1] / e.len() as f64]
            })
            .collect();
        PanelView {
            n: self.data.n_entities(),
            t: self.data.entities().first().map_or(0, |e| e.len()),
            means,
            labels: self.labels.clone(),
            planted_ar: self.truth.components().iter().map(|c| c.ar().to_vec()).collect(),
        }
    }

    fn bounds(&self) -> Result<ModelBounds> {
        ModelBounds::from_components(self.truth.components(), self.lambda)
    }

    pub fn build_coreset(&mut self, m: usize, l: usize, seed: u64) -> Result<CoresetView> {
        let config = SamplerConfig::new(m, l, self.bounds()?, self.k, seed)?;
        let built = build_coreset(&self.data, &config)?;
        let cs = &built.coreset;
        let first_entity_times = cs
            .entities()
            .first()
            .and_then(|e| built.profile.times.get(&e.id))
            .map(|ts| ts.s.clone())
            .unwrap_or_default();
        let view = CoresetView {
            sensitivities: built.profile.entity.s.clone(),
            total_sensitivity: built.profile.entity.total,
            entity_ids: cs.entity_ids().collect(),
            entity_weights: cs.entities().iter().map(|e| e.weight).collect(),
            pairs: cs.size(),
            full_pairs: self.data.total_observations(),
            first_entity_times,
        };
        self.coreset = Some(built.coreset);
        Ok(view)
    }

    /// Sets every autocorrelation coefficient to a common value and compares
    /// the full objective with the coreset estimate, keeping the planted
    /// means, covariances and weights.
    pub fn sweep(&self, steps: usize) -> Result<Vec<SweepPoint>> {
        let coreset = self
            .coreset
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("build a coreset before sweeping".into()))?;
        let bounds = self.bounds()?;
        let cap = bounds.ar_cap();
        let steps = steps.max(2);
        (0..steps)
            .map(|s| {
                let ar = (cap * s as f64 / (steps - 1) as f64).min(cap);
                let components = self
                    .truth
                    .components()
                    .iter()
                    .map(|c| Component::new(c.mu().to_vec(), c.sigma().clone(), vec![ar; c.dim()], &bounds))
                    .collect::<Result<Vec<_>>>()?;
                let params = MixtureParams::new(self.truth.alpha().to_vec(), components)?;
                let full = full_objective(&self.data, &params);
                let phi = -(self.data.n_entities() as f64) * log_normalizer(&params);
                let estimate =
                    coreset_objective(&self.data, coreset, &normalized_weights(&params), params.components())? + phi;
                Ok(SweepPoint { ar, full, coreset: estimate, relative_error: (estimate - full).abs() / full.abs() })
            })
            .collect()
    }
}

fn js(err: impl std::fmt::Display) -> JsError {
    JsError::new(&err.to_string())
}

fn to_json<T: Serialize>(value: &T) -> std::result::Result<String, JsError> {
    serde_json::to_string(value).map_err(js)
}

#[wasm_bindgen]
pub struct Demo {
    state: DemoState,
}

#[wasm_bindgen]
impl Demo {
    /// Draws a two-dimensional panel of `n` entities with `t` periods each.
    #[wasm_bindgen(constructor)]
    pub fn new(n: usize, t: usize, k: usize, lambda: f64, seed: u64) -> std::result::Result<Demo, JsError> {
        Ok(Self { state: DemoState::new(n, t, k, lambda, seed).map_err(js)? })
    }

    pub fn panel(&self) -> std::result::Result<String, JsError> {
        to_json(&self.state.panel())
    }

    #[wasm_bindgen(js_name = buildCoreset)]
    pub fn build_coreset(&mut self, m: usize, l: usize, seed: u64) -> std::result::Result<String, JsError> {
        to_json(&self.state.build_coreset(m, l, seed).map_err(js)?)
    }

    pub fn sweep(&self, steps: usize) -> std::result::Result<String, JsError> {
        to_json(&self.state.sweep(steps).map_err(js)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn panel_has_one_mean_per_entity() {
        let state = DemoState::new(30, 10, 3, 0.2, 1).unwrap();
        let view = state.panel();
        assert_eq!(view.means.len(), 30);
        assert_eq!(view.labels.len(), 30);
        assert_eq!(view.planted_ar.len(), 3);
    }

    #[test]
    fn coreset_view_is_consistent() {
        let mut state = DemoState::new(40, 12, 2, 0.2, 2).unwrap();
        let view = state.build_coreset(10, 4, 3).unwrap();
        assert_eq!(view.sensitivities.len(), 40);
        assert_eq!(view.entity_ids.len(), view.entity_weights.len());
        assert!(view.pairs <= 40 * 4);
        assert_eq!(view.full_pairs, 480);
        assert!(view.sensitivities.iter().all(|&s| s > 0.0 && s <= 1.0));
    }

    #[test]
    fn sweep_requires_coreset_and_spans_cap() {
        let mut state = DemoState::new(40, 12, 2, 0.3, 4).unwrap();
        assert!(state.sweep(5).is_err());
        state.build_coreset(40, 12, 5).unwrap();
        let points = state.sweep(5).unwrap();
        assert_eq!(points.len(), 5);
        assert_eq!(points[0].ar, 0.0);
        assert!(points[4].ar == 1.0 - 0.3f64.sqrt());
        assert!(points.iter().all(|p| p.full.is_finite() && p.coreset.is_finite()));
    }

    #[test]
    fn demo_is_deterministic() {
        let mut a = DemoState::new(25, 8, 2, 0.3, 9).unwrap();
        let mut b = DemoState::new(25, 8, 2, 0.3, 9).unwrap();
        let va = serde_json::to_string(&a.build_coreset(8, 3, 1).unwrap()).unwrap();
        let vb = serde_json::to_string(&b.build_coreset(8, 3, 1).unwrap()).unwrap();
        assert_eq!(va, vb);
    }
}
