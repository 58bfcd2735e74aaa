//! On-disk formats. Every file carries a schema name and a `major.minor`
//! version; readers reject unknown majors.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use tsc_core::{Component, Coreset, CoresetEntity, EntitySeries, MixtureParams, ModelBounds, TimeSeriesDataset};

use crate::UsageError;

pub const SCHEMA_MAJOR: u32 = 1;
pub const SCHEMA_VERSION: &str = "1.0";

pub const DATASET_SCHEMA: &str = "tsc-dataset";
pub const CORESET_SCHEMA: &str = "tsc-coreset";
pub const PARAMS_SCHEMA: &str = "tsc-params";
pub const TRUTH_SCHEMA: &str = "tsc-truth";
pub const MANIFEST_SCHEMA: &str = "tsc-manifest";
pub const METRICS_SCHEMA: &str = "tsc-metrics";
pub const FIT_SCHEMA: &str = "tsc-fit";
pub const REPORT_SCHEMA: &str = "tsc-report";

const BIN_MAGIC: &[u8; 4] = b"TSCD";

/// Checks a schema name and version string against what this build reads.
pub fn check_schema(expected: &str, found: &str, version: &str) -> Result<()> {
    if found != expected {
        bail!(UsageError(format!("expected schema {expected}, found {found}")));
    }
    let major = version
        .split('.')
        .next()
        .and_then(|m| m.parse::<u32>().ok())
        .ok_or_else(|| UsageError(format!("malformed schema version {version:?}")))?;
    if major != SCHEMA_MAJOR {
        bail!(UsageError(format!(
            "{found} schema version {version} is not supported (expected major {SCHEMA_MAJOR})"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetFormat {
    Csv,
    Bin,
}

impl DatasetFormat {
    pub fn file_name(self) -> &'static str {
        match self {
            Self::Csv => "dataset.csv",
            Self::Bin => "dataset.bin",
        }
    }
}

pub fn dataset_to_csv(data: &TimeSeriesDataset) -> Result<Vec<u8>> {
    let mut out = format!("# {DATASET_SCHEMA} {SCHEMA_VERSION}\n").into_bytes();
    {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(&mut out);
        let mut header = vec!["entity_id".to_string(), "t".to_string()];
        header.extend((0..data.dim()).map(|j| format!("f{j}")));
        w.write_record(&header)?;
        for e in data.entities() {
            for (t, row) in e.rows().enumerate() {
                let mut rec = vec![e.id().to_string(), t.to_string()];
                rec.extend(row.iter().map(|v| v.to_string()));
                w.write_record(&rec)?;
            }
        }
        w.flush()?;
    }
    Ok(out)
}

pub fn dataset_from_csv(bytes: &[u8]) -> Result<TimeSeriesDataset> {
    let mut reader = BufReader::new(bytes);
    let mut first = String::new();
    reader.read_line(&mut first)?;
    let mut parts = first.trim_end().strip_prefix("# ").unwrap_or("").split(' ');
    let (name, version) = (parts.next().unwrap_or(""), parts.next().unwrap_or(""));
    check_schema(DATASET_SCHEMA, name, version)?;

    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header = rdr.headers()?.clone();
    let cols: Vec<&str> = header.iter().collect();
    if cols.len() < 3 || cols[0] != "entity_id" || cols[1] != "t" {
        bail!(UsageError(format!("dataset header must be entity_id,t,f0,..., found {}", cols.join(","))));
    }
    let dim = cols.len() - 2;
    for (j, c) in cols[2..].iter().enumerate() {
        if *c != format!("f{j}") {
            bail!(UsageError(format!("dataset column {} should be f{j}, found {c}", j + 2)));
        }
    }
    let mut series: Vec<Vec<f64>> = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let parse_index = |k: usize| -> Result<usize> {
            rec[k].parse().map_err(|_| UsageError(format!("row {}: bad index {:?}", line + 1, &rec[k])).into())
        };
        let (id, t) = (parse_index(0)?, parse_index(1)?);
        if id == series.len() && t == 0 {
            series.push(Vec::new());
        }
        let expected_t = series.last().map(|s| s.len() / dim).unwrap_or(0);
        if id + 1 != series.len() || t != expected_t {
            bail!(UsageError(format!(
                "row {}: rows must be sorted by (entity_id, t) with dense indices, found ({id}, {t})",
                line + 1
            )));
        }
        let current = series.last_mut().expect("pushed above");
        for k in 2..rec.len() {
            let v: f64 = rec[k]
                .parse()
                .map_err(|_| UsageError(format!("row {}: bad value {:?}", line + 1, &rec[k])))?;
            current.push(v);
        }
    }
    TimeSeriesDataset::from_values(dim, series).map_err(Into::into)
}

pub fn dataset_to_bin(data: &TimeSeriesDataset) -> Vec<u8> {
    let major = SCHEMA_MAJOR as u16;
    let mut out = Vec::with_capacity(24 + data.total_observations() * data.dim() * 8);
    out.extend_from_slice(BIN_MAGIC);
    out.extend_from_slice(&major.to_le_bytes());
    out.extend_from_slice(&0u16.to_le_bytes());
    out.extend_from_slice(&(data.dim() as u64).to_le_bytes());
    out.extend_from_slice(&(data.n_entities() as u64).to_le_bytes());
    for e in data.entities() {
        out.extend_from_slice(&(e.len() as u64).to_le_bytes());
        for v in e.values() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn dataset_from_bin(bytes: &[u8]) -> Result<TimeSeriesDataset> {
    let mut r = bytes;
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).context("truncated dataset header")?;
    if &magic != BIN_MAGIC {
        bail!(UsageError("not a binary dataset file".into()));
    }
    let mut u16buf = [0u8; 2];
    r.read_exact(&mut u16buf)?;
    let major = u16::from_le_bytes(u16buf);
    r.read_exact(&mut u16buf)?;
    let minor = u16::from_le_bytes(u16buf);
    check_schema(DATASET_SCHEMA, DATASET_SCHEMA, &format!("{major}.{minor}"))?;
    let read_u64 = |r: &mut &[u8]| -> Result<u64> {
        let mut b = [0u8; 8];
        r.read_exact(&mut b).context("truncated dataset")?;
        Ok(u64::from_le_bytes(b))
    };
    let dim = read_u64(&mut r)? as usize;
    let n = read_u64(&mut r)? as usize;
    let mut entities = Vec::with_capacity(n.min(1 << 20));
    for id in 0..n {
        let len = read_u64(&mut r)? as usize;
        let count = len.checked_mul(dim).filter(|&c| c.saturating_mul(8) <= r.len());
        let Some(count) = count else { bail!(UsageError(format!("entity {id}: truncated values"))) };
        let values = r[..count * 8].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        r = &r[count * 8..];
        entities.push(EntitySeries::new(id, dim, values)?);
    }
    if !r.is_empty() {
        bail!(UsageError("trailing bytes after dataset".into()));
    }
    TimeSeriesDataset::new(dim, entities).map_err(Into::into)
}

/// Reads either dataset format, detected from the first bytes.
pub fn read_dataset(path: &Path) -> Result<TimeSeriesDataset> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let parsed = if bytes.starts_with(BIN_MAGIC) { dataset_from_bin(&bytes) } else { dataset_from_csv(&bytes) };
    parsed.with_context(|| format!("parsing {}", path.display()))
}

pub fn encode_dataset(data: &TimeSeriesDataset, format: DatasetFormat) -> Result<Vec<u8>> {
    match format {
        DatasetFormat::Csv => dataset_to_csv(data),
        DatasetFormat::Bin => Ok(dataset_to_bin(data)),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoresetFile {
    pub schema: String,
    pub schema_version: String,
    pub method: String,
    pub seed: u64,
    #[serde(rename = "M")]
    pub m: Option<usize>,
    #[serde(rename = "L")]
    pub l: Option<usize>,
    pub entity_ids: Vec<usize>,
    pub entity_weights: Vec<f64>,
    pub time_indices: Vec<Vec<usize>>,
    pub time_weights: Vec<Vec<f64>>,
}

impl CoresetFile {
    pub fn new(coreset: &Coreset, method: &str, seed: u64, m: Option<usize>, l: Option<usize>) -> Self {
        let es = coreset.entities();
        Self {
            schema: CORESET_SCHEMA.into(),
            schema_version: SCHEMA_VERSION.into(),
            method: method.into(),
            seed,
            m,
            l,
            entity_ids: es.iter().map(|e| e.id).collect(),
            entity_weights: es.iter().map(|e| e.weight).collect(),
            time_indices: es.iter().map(|e| e.times.iter().map(|p| p.0).collect()).collect(),
            time_weights: es.iter().map(|e| e.times.iter().map(|p| p.1).collect()).collect(),
        }
    }

    pub fn to_coreset(&self) -> Result<Coreset> {
        check_schema(CORESET_SCHEMA, &self.schema, &self.schema_version)?;
        let n = self.entity_ids.len();
        if self.entity_weights.len() != n || self.time_indices.len() != n || self.time_weights.len() != n {
            bail!(UsageError("coreset arrays have mismatched lengths".into()));
        }
        let mut members = Vec::with_capacity(n);
        for j in 0..n {
            if self.time_indices[j].len() != self.time_weights[j].len() {
                bail!(UsageError(format!("entity {}: time arrays have mismatched lengths", self.entity_ids[j])));
            }
            members.push(CoresetEntity {
                id: self.entity_ids[j],
                weight: self.entity_weights[j],
                times: self.time_indices[j].iter().copied().zip(self.time_weights[j].iter().copied()).collect(),
            });
        }
        Ok(Coreset::new(members)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentFile {
    pub mu: Vec<f64>,
    /// Row-major `d x d`.
    pub sigma: Vec<f64>,
    pub ar: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamsFile {
    pub schema: String,
    pub schema_version: String,
    /// Bound parameter used to validate the autocorrelation entries.
    pub lambda: f64,
    pub alpha: Vec<f64>,
    pub components: Vec<ComponentFile>,
}

impl ParamsFile {
    pub fn new(params: &MixtureParams, lambda: f64) -> Self {
        Self {
            schema: PARAMS_SCHEMA.into(),
            schema_version: SCHEMA_VERSION.into(),
            lambda,
            alpha: params.alpha().to_vec(),
            components: params
                .components()
                .iter()
                .map(|c| ComponentFile {
                    mu: c.mu().to_vec(),
                    sigma: c.sigma().transpose().as_slice().to_vec(),
                    ar: c.ar().to_vec(),
                })
                .collect(),
        }
    }

    pub fn to_params(&self) -> Result<MixtureParams> {
        check_schema(PARAMS_SCHEMA, &self.schema, &self.schema_version)?;
        let bounds = ModelBounds::new(1.0, self.lambda)?;
        let comps = self
            .components
            .iter()
            .map(|c| {
                let d = c.mu.len();
                if c.sigma.len() != d * d {
                    bail!(UsageError(format!("sigma has {} entries, expected {}", c.sigma.len(), d * d)));
                }
                Ok(Component::new(c.mu.clone(), DMatrix::from_row_slice(d, d, &c.sigma), c.ar.clone(), &bounds)?)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(MixtureParams::new(self.alpha.clone(), comps)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthFile {
    pub schema: String,
    pub schema_version: String,
    pub params: ParamsFile,
    pub labels: Vec<usize>,
}

impl TruthFile {
    pub fn new(params: &MixtureParams, lambda: f64, labels: &[usize]) -> Self {
        Self {
            schema: TRUTH_SCHEMA.into(),
            schema_version: SCHEMA_VERSION.into(),
            params: ParamsFile::new(params, lambda),
            labels: labels.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema: String,
    pub schema_version: String,
    pub command: String,
    pub config: serde_json::Value,
    pub seed: u64,
    /// Input role to sha256 hex digest of the file contents.
    pub inputs: BTreeMap<String, String>,
    /// File name to sha256 hex digest.
    pub artifacts: BTreeMap<String, String>,
    pub tool_version: String,
    pub rng_version: String,
}

impl RunManifest {
    pub fn new(command: &str, config: serde_json::Value, seed: u64) -> Self {
        Self {
            schema: MANIFEST_SCHEMA.into(),
            schema_version: SCHEMA_VERSION.into(),
            command: command.into(),
            config,
            seed,
            inputs: BTreeMap::new(),
            artifacts: BTreeMap::new(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            rng_version: tsc_core::rng::RNG_VERSION.into(),
        }
    }
}

/// Reads mixture parameters from a params file or a ground-truth file.
pub fn read_params(path: &Path) -> Result<MixtureParams> {
    let value: serde_json::Value = read_json(path)?;
    let inner = if value.get("schema").and_then(|s| s.as_str()) == Some(TRUTH_SCHEMA) {
        let truth: TruthFile = serde_json::from_value(value).map_err(|e| UsageError(format!("{}: {e}", path.display())))?;
        check_schema(TRUTH_SCHEMA, &truth.schema, &truth.schema_version)?;
        truth.params
    } else {
        serde_json::from_value(value).map_err(|e| UsageError(format!("{}: {e}", path.display())))?
    };
    inner.to_params()
}

impl RunManifest {
    pub fn with_input(mut self, role: &str, path: &Path) -> Result<Self> {
        let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        self.inputs.insert(role.into(), sha256_hex(&bytes));
        Ok(self)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn to_json<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut out = serde_json::to_vec_pretty(value)?;
    out.push(b'\n');
    Ok(out)
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_slice(&bytes).map_err(|e| UsageError(format!("parsing {}: {e}", path.display())).into())
}

/// Collects artifacts of one command and writes them with a manifest.
pub struct ArtifactWriter<'a> {
    dir: &'a Path,
    manifest: RunManifest,
}

impl<'a> ArtifactWriter<'a> {
    pub fn new(dir: &'a Path, manifest: RunManifest) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self { dir, manifest })
    }

    /// Writes a deterministic artifact and records its hash.
    pub fn put(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        self.write(name, bytes)?;
        self.manifest.artifacts.insert(name.into(), sha256_hex(bytes));
        Ok(())
    }

    /// Writes a file that is not part of the reproducible set, such as timings.
    pub fn put_unhashed(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        self.write(name, bytes)
    }

    fn write(&self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        let mut f = fs::File::create(&path).with_context(|| format!("writing {}", path.display()))?;
        f.write_all(bytes)?;
        Ok(())
    }

    pub fn finish(self) -> Result<RunManifest> {
        let bytes = to_json(&self.manifest)?;
        self.write("manifest.json", &bytes)?;
        Ok(self.manifest)
    }
}

pub fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(&mut out);
        w.write_record(header)?;
        for r in rows {
            w.write_record(&r)?;
        }
        w.flush()?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> TimeSeriesDataset {
        TimeSeriesDataset::from_values(2, vec![vec![0.1, -2.0, 1.0 / 3.0, 4.5], vec![1e-300, 7.0]]).unwrap()
    }

    #[test]
    fn csv_round_trips_exactly() {
        let data = sample();
        let bytes = dataset_to_csv(&data).unwrap();
        let text = String::from_utf8(bytes.clone()).unwrap();
        assert!(text.starts_with("# tsc-dataset 1.0\nentity_id,t,f0,f1\n0,0,0.1,-2\n"));
        assert_eq!(dataset_from_csv(&bytes).unwrap(), data);
    }

    #[test]
    fn bin_round_trips_exactly() {
        let data = sample();
        assert_eq!(dataset_from_bin(&dataset_to_bin(&data)).unwrap(), data);
        let mut broken = dataset_to_bin(&data);
        broken.pop();
        assert!(dataset_from_bin(&broken).is_err());
    }

    #[test]
    fn unknown_major_is_rejected() {
        let text = b"# tsc-dataset 2.0\nentity_id,t,f0\n0,0,1\n";
        let err = dataset_from_csv(text).unwrap_err();
        assert!(err.downcast_ref::<UsageError>().is_some());
        assert!(check_schema(PARAMS_SCHEMA, PARAMS_SCHEMA, "1.7").is_ok());
        assert!(check_schema(PARAMS_SCHEMA, CORESET_SCHEMA, "1.0").is_err());
    }

    #[test]
    fn unsorted_rows_are_rejected() {
        let text = b"# tsc-dataset 1.0\nentity_id,t,f0\n0,1,1\n0,0,1\n";
        assert!(dataset_from_csv(text).is_err());
    }

    #[test]
    fn coreset_and_params_round_trip() {
        let cs = Coreset::new(vec![
            CoresetEntity { id: 1, weight: 0.1 + 0.2, times: vec![(0, 1.0 / 3.0)] },
            CoresetEntity { id: 0, weight: 2.0, times: vec![(1, 5.0), (0, 1.0)] },
        ])
        .unwrap();
        let file = CoresetFile::new(&cs, "crgmm", 4, Some(2), Some(2));
        let json = to_json(&file).unwrap();
        let back: CoresetFile = serde_json::from_slice(&json).unwrap();
        assert_eq!(back.to_coreset().unwrap(), cs);

        let bounds = ModelBounds::new(1.0, 0.01).unwrap();
        let sigma = DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]);
        let comp = Component::new(vec![0.5, -1.0], sigma, vec![0.2, 0.9], &bounds).unwrap();
        let params = MixtureParams::new(vec![1.0], vec![comp]).unwrap();
        let file = ParamsFile::new(&params, 0.01);
        assert_eq!(file.components[0].sigma, vec![2.0, 0.3, 0.3, 1.0]);
        let back: ParamsFile = serde_json::from_slice(&to_json(&file).unwrap()).unwrap();
        assert_eq!(back.to_params().unwrap(), params);
    }

    #[test]
    fn manifest_round_trips() {
        let mut m = RunManifest::new("fit", serde_json::json!({"k": 3, "tol": 1e-6}), 9);
        m.artifacts.insert("params.json".into(), sha256_hex(b"x"));
        let back: RunManifest = serde_json::from_slice(&to_json(&m).unwrap()).unwrap();
        assert_eq!(back, m);
    }
}
