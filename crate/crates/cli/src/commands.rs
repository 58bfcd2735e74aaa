//! Subcommand implementations. Each returns a one-line summary for stdout.

use std::time::Duration;

use anyhow::{bail, Result};
use serde::Serialize;
use serde_json::json;
use tsc_core::coreset::{build_coreset, lfkf_baseline, theoretical_sizes, uniform_baseline, SamplerConfig};
use tsc_core::datagen::{generate as draw_panel, GenConfig, InitMode};
use tsc_core::em::{fit as fit_mixture, FitConfig};
use tsc_core::eval::{likelihood_ratio, run_on_dataset, ExperimentConfig, ExperimentReport, SizeSpec};
use tsc_core::objective::{full_objective, normalized_objective};
use tsc_core::{Coreset, ModelBounds};

use crate::args::{
    CoresetArgs, EvalArgs, ExperimentArgs, FitArgs, GenerateArgs, InitArg, MethodArg, SizeArgs, SolverArgs,
};
use crate::formats::{
    csv_bytes, encode_dataset, read_dataset, read_json, read_params, to_json, ArtifactWriter, CoresetFile, ParamsFile,
    RunManifest, TruthFile, FIT_SCHEMA, METRICS_SCHEMA, REPORT_SCHEMA, SCHEMA_VERSION,
};
use crate::UsageError;

fn manifest<T: Serialize>(command: &str, args: &T, seed: u64) -> Result<RunManifest> {
    Ok(RunManifest::new(command, serde_json::to_value(args)?, seed))
}

fn secs(d: Duration) -> f64 {
    d.as_secs_f64()
}

pub fn generate(args: &GenerateArgs) -> Result<String> {
    let config = match args.preset {
        Some(p) => {
            let mut c = p.preset().config(args.seed);
            if args.init == InitArg::Zero {
                c.init = InitMode::Zero;
            }
            c
        }
        None => {
            let (Some(n), Some(t)) = (args.n, args.t) else {
                bail!(UsageError("either --preset or both --n and --t are required".into()));
            };
            GenConfig {
                n_entities: n,
                series_len: t,
                d: args.d,
                k: args.k,
                lambda: args.lambda,
                seed: args.seed,
                init: match args.init {
                    InitArg::Stationary => InitMode::Stationary,
                    InitArg::Zero => InitMode::Zero,
                },
            }
        }
    };
    let (data, truth) = draw_panel(&config)?;
    let mut out = ArtifactWriter::new(&args.out, manifest("generate", args, args.seed)?)?;
    out.put(args.format.file_name(), &encode_dataset(&data, args.format)?)?;
    out.put("truth.json", &to_json(&TruthFile::new(&truth.params, config.lambda, &truth.labels))?)?;
    out.finish()?;
    Ok(format!("N={} total_observations={} d={}", data.n_entities(), data.total_observations(), data.dim()))
}

fn resolve_sizes(sizes: &SizeArgs, k: usize, d: usize, bounds: &ModelBounds) -> Result<(usize, usize)> {
    match (sizes.m, sizes.l, sizes.epsilon) {
        (Some(m), Some(l), _) => Ok((m, l)),
        (None, None, Some(eps)) => Ok(theoretical_sizes(eps, k, d, bounds, sizes.c_entity, sizes.c_time)?),
        _ => bail!(UsageError("give either --m and --l, or --epsilon".into())),
    }
}

pub fn coreset(args: &CoresetArgs) -> Result<String> {
    let data = read_dataset(&args.data)?;
    let bounds = ModelBounds::new(args.d_ratio, args.lambda)?;
    let mut out =
        ArtifactWriter::new(&args.out, manifest("coreset", args, args.seed)?.with_input("data", &args.data)?)?;
    let (file, elapsed) = match args.method {
        MethodArg::Crgmm => {
            let (m, l) = resolve_sizes(&args.sizes, args.k, data.dim(), &bounds)?;
            let mut cfg = SamplerConfig::new(m, l, bounds, args.k, args.seed)?;
            cfg.restarts = args.restarts;
            let built = build_coreset(&data, &cfg)?;
            let ent = &built.profile.entity;
            let weights: std::collections::BTreeMap<usize, f64> =
                built.coreset.entities().iter().map(|e| (e.id, e.weight)).collect();
            let rows = (0..data.n_entities()).map(|i| {
                vec![
                    i.to_string(),
                    ent.s[i].to_string(),
                    ent.s_cluster[i].to_string(),
                    ent.kmeans.assignment[i].to_string(),
                    weights.get(&i).copied().unwrap_or(0.0).to_string(),
                ]
            });
            out.put("sensitivities.csv", &csv_bytes(&["entity_id", "s", "s_cluster", "cluster", "weight"], rows)?)?;
            let time_rows = built.profile.times.iter().flat_map(|(&id, ts)| {
                (0..ts.s.len()).map(move |t| {
                    vec![id.to_string(), t.to_string(), ts.s[t].to_string(), ts.s_cluster[t].to_string()]
                })
            });
            out.put("time_sensitivities.csv", &csv_bytes(&["entity_id", "t", "s", "s_cluster"], time_rows)?)?;
            (CoresetFile::new(&built.coreset, "crgmm", args.seed, Some(m), Some(l)), built.construction_time)
        }
        MethodArg::Uni | MethodArg::Lfkf => {
            let Some(gamma) = args.gamma else {
                bail!(UsageError("--gamma is required for the baselines".into()));
            };
            let clock = std::time::Instant::now();
            let (cs, name) = if args.method == MethodArg::Uni {
                (uniform_baseline(&data, gamma, args.seed)?, "uni")
            } else {
                (lfkf_baseline(&data, gamma, args.k, args.seed)?, "lfkf")
            };
            (CoresetFile::new(&cs, name, args.seed, None, None), clock.elapsed())
        }
    };
    let size: usize = file.time_indices.iter().map(Vec::len).sum();
    out.put("coreset.json", &to_json(&file)?)?;
    out.put_unhashed("timings.json", &to_json(&json!({ "construction_seconds": secs(elapsed) }))?)?;
    out.finish()?;
    Ok(format!("method={} entities={} pairs={}", file.method, file.entity_ids.len(), size))
}

fn fit_config(solver: &SolverArgs, seed: u64) -> Result<FitConfig> {
    let bounds = ModelBounds::new(1.0, solver.lambda)?;
    let mut cfg = FitConfig::new(solver.k, bounds, seed);
    cfg.max_iters = solver.max_iters;
    cfg.tol = solver.tol;
    cfg.n_init = solver.n_init;
    cfg.update_sigma = !solver.fix_sigma;
    cfg.update_ar = !solver.fix_ar;
    cfg.validate()?;
    Ok(cfg)
}

pub fn fit(args: &FitArgs) -> Result<String> {
    let data = read_dataset(&args.data)?;
    let coreset: Option<Coreset> = match &args.coreset {
        Some(p) => Some(read_json::<CoresetFile>(p)?.to_coreset()?),
        None => None,
    };
    let cfg = fit_config(&args.solver, args.seed)?;
    let result = fit_mixture(&data, coreset.as_ref(), &cfg)?;
    let mut m = manifest("fit", args, args.seed)?.with_input("data", &args.data)?;
    if let Some(p) = &args.coreset {
        m = m.with_input("coreset", p)?;
    }
    let mut out = ArtifactWriter::new(&args.out, m)?;
    out.put("params.json", &to_json(&ParamsFile::new(&result.params, args.solver.lambda))?)?;
    let report = json!({
        "schema": FIT_SCHEMA,
        "schema_version": SCHEMA_VERSION,
        "objective": result.objective,
        "fit_objective": result.fit_objective,
        "iterations": result.iterations,
        "restart": result.restart,
        "trace": result.trace,
    });
    out.put("fit.json", &to_json(&report)?)?;
    out.put_unhashed("timings.json", &to_json(&json!({ "fit_seconds": secs(result.wall_time) }))?)?;
    out.finish()?;
    Ok(format!("objective={} iterations={}", result.objective, result.iterations))
}

pub fn eval(args: &EvalArgs) -> Result<String> {
    let data = read_dataset(&args.data)?;
    let params = read_params(&args.params)?;
    if params.dim() != data.dim() {
        bail!(UsageError(format!("parameters have dimension {}, dataset {}", params.dim(), data.dim())));
    }
    let v = full_objective(&data, &params);
    let split = normalized_objective(&data, &params);
    let mut metrics = json!({
        "schema": METRICS_SCHEMA,
        "schema_version": SCHEMA_VERSION,
        "objective": v,
        "normalized_objective": split.f_prime,
        "offset": split.phi,
    });
    let mut summary = format!("objective={v}");
    if let Some(path) = &args.reference {
        let reference = read_params(path)?;
        let v_ref = full_objective(&data, &reference);
        let gamma = likelihood_ratio(v_ref, v);
        metrics["reference_objective"] = json!(v_ref);
        metrics["likelihood_ratio"] = json!(gamma);
        summary.push_str(&format!(" likelihood_ratio={gamma}"));
    }
    if !v.is_finite() {
        bail!(tsc_core::Error::Numeric(format!("objective is {v}")));
    }
    let mut m = manifest("eval", args, args.seed)?.with_input("data", &args.data)?.with_input("params", &args.params)?;
    if let Some(p) = &args.reference {
        m = m.with_input("reference", p)?;
    }
    let mut out = ArtifactWriter::new(&args.out, m)?;
    out.put("metrics.json", &to_json(&metrics)?)?;
    out.finish()?;
    Ok(summary)
}

fn report_json(report: &ExperimentReport, epsilons: &[f64]) -> serde_json::Value {
    let rows: Vec<_> = report
        .rows
        .iter()
        .map(|r| {
            json!({
                "method": r.method.name(),
                "epsilon": r.epsilon,
                "mean_size": r.mean_size,
                "mean_objective": r.mean_v,
                "mean_likelihood_ratio": r.mean_gamma,
                "std_likelihood_ratio": r.std_gamma,
                "succeeded": r.succeeded,
                "failures": r.failures,
            })
        })
        .collect();
    let records: Vec<_> = report
        .records
        .iter()
        .map(|r| {
            json!({
                "method": r.method.name(),
                "epsilon": r.epsilon,
                "rep": r.rep,
                "size": r.size,
                "objective": r.v_coreset,
                "likelihood_ratio": r.gamma,
            })
        })
        .collect();
    json!({
        "schema": REPORT_SCHEMA,
        "schema_version": SCHEMA_VERSION,
        "full_objective": report.v_full,
        "epsilons": epsilons,
        "rows": rows,
        "records": records,
    })
}

pub fn experiment(args: &ExperimentArgs) -> Result<String> {
    let (data, planted) = match &args.data {
        Some(p) => (read_dataset(p)?, None),
        None => {
            let (d, truth) = draw_panel(&args.preset.preset().config(args.seed))?;
            (d, Some(truth.params))
        }
    };
    let d_ratio = match (args.d_ratio, &planted) {
        (Some(v), _) => v,
        (None, Some(p)) => ModelBounds::from_components(p.components(), args.solver.lambda)?.d_ratio(),
        (None, None) => 1.0,
    };
    let bounds = ModelBounds::new(d_ratio, args.solver.lambda)?;
    let sizes = match (args.sizes.m, args.sizes.l) {
        (Some(m), Some(l)) => SizeSpec::Explicit { m_entities: m, l_times: l },
        _ => SizeSpec::Theoretical { c_entity: args.sizes.c_entity, c_time: args.sizes.c_time },
    };
    let config = ExperimentConfig {
        epsilons: args.epsilons.clone(),
        reps: args.reps,
        fit: fit_config(&args.solver, args.seed)?,
        sizes,
        bounds,
        seed: args.seed,
        identity_override: args.identity,
    };
    let report = run_on_dataset(&data, &config)?;

    let mut m = manifest("experiment", args, args.seed)?;
    if let Some(p) = &args.data {
        m = m.with_input("data", p)?;
    }
    let mut out = ArtifactWriter::new(&args.out, m)?;
    out.put("report.json", &to_json(&report_json(&report, &args.epsilons))?)?;
    let summary_rows = report.rows.iter().map(|r| {
        vec![
            r.method.name().to_string(),
            r.epsilon.to_string(),
            r.mean_size.to_string(),
            r.mean_v.to_string(),
            r.mean_gamma.to_string(),
            r.std_gamma.to_string(),
            r.succeeded.to_string(),
            r.failures.to_string(),
        ]
    });
    out.put(
        "summary.csv",
        &csv_bytes(
            &["method", "epsilon", "mean_size", "mean_objective", "mean_gamma", "std_gamma", "succeeded", "failures"],
            summary_rows,
        )?,
    )?;
    let record_rows = report.records.iter().map(|r| {
        vec![
            r.method.name().to_string(),
            r.epsilon.to_string(),
            r.rep.to_string(),
            r.size.to_string(),
            r.v_coreset.to_string(),
            r.gamma.to_string(),
        ]
    });
    out.put(
        "records.csv",
        &csv_bytes(&["method", "epsilon", "rep", "size", "objective", "gamma"], record_rows)?,
    )?;
    let timings = json!({
        "full_fit_seconds": secs(report.full_fit_time),
        "records": report.records.iter().map(|r| json!({
            "method": r.method.name(),
            "epsilon": r.epsilon,
            "rep": r.rep,
            "construction_seconds": secs(r.construction_time),
            "fit_seconds": secs(r.fit_time),
        })).collect::<Vec<_>>(),
    });
    out.put_unhashed("timings.json", &to_json(&timings)?)?;
    out.finish()?;

    let mut line = format!("full_objective={}", report.v_full);
    for r in &report.rows {
        line.push_str(&format!(" {}@{}={:.4}", r.method.name(), r.epsilon, r.mean_gamma));
    }
    Ok(line)
}
