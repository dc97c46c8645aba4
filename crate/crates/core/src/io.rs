//! File formats: count files (JSON or CSV plus metadata sidecar), density
//! matrices, parameters, run configuration, and deterministic JSON/CSV output.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::accidentals::DetectorContext;
use crate::error::{Error, Result};
use crate::fit::OptimizerConfig;
use crate::model::ErrorParams;
use crate::quantum::DensityMatrix;
use crate::tomography::{label_index, CoincidenceRecord, LABELS};
use crate::wavepacket::Geometry;

/// Significant digits kept in every emitted float.
pub const SIG_DIGITS: usize = 12;

pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", SIG_DIGITS - 1, x).parse().unwrap_or(x)
}

/// Shortest representation of `x` rounded to 12 significant digits.
pub fn fmt_float(x: f64) -> String {
    let r = round_sig(x);
    if r == 0.0 {
        // collapses −0
        return "0".into();
    }
    format!("{r}")
}

fn round_value(v: &mut Value) {
    match v {
        Value::Number(n) => {
            if n.is_f64() {
                if let Some(x) = n.as_f64() {
                    let r = round_sig(x);
                    let r = if r == 0.0 { 0.0 } else { r };
                    if let Some(num) = serde_json::Number::from_f64(r) {
                        *n = num;
                    }
                }
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_value),
        Value::Object(map) => map.values_mut().for_each(round_value),
        _ => {}
    }
}

pub fn to_value<T: Serialize>(value: &T) -> Result<Value> {
    serde_json::to_value(value).map_err(|e| Error::Config(format!("serialization failed: {e}")))
}

/// Pretty JSON with floats rounded to 12 significant digits and a trailing newline.
pub fn json_string(value: &Value) -> String {
    let mut v = value.clone();
    round_value(&mut v);
    let mut s = serde_json::to_string_pretty(&v).expect("a Value always serializes");
    s.push('\n');
    s
}

pub fn to_json_string<T: Serialize>(value: &T) -> Result<String> {
    Ok(json_string(&to_value(value)?))
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

fn parse_json<T: for<'de> Deserialize<'de>>(path: &Path, text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| {
        Error::parse(
            path.display().to_string(),
            format!("line {} column {}: {e}", e.line(), e.column()),
        )
    })
}

/// `<dir>/<stem><suffix>` next to `path`.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}{suffix}"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CountFile {
    pub order: Vec<String>,
    pub counts: Vec<u64>,
    pub alpha: [f64; 2],
    pub dark: [f64; 2],
    pub rep_rate_hz: f64,
    pub dead_time_s: f64,
}

/// Detector metadata of the CSV sidecar.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CountMeta {
    pub alpha: [f64; 2],
    pub dark: [f64; 2],
    pub rep_rate_hz: f64,
    pub dead_time_s: f64,
}

impl From<&DetectorContext> for CountMeta {
    fn from(c: &DetectorContext) -> Self {
        Self {
            alpha: [c.alpha_a, c.alpha_b],
            dark: [c.dark_a, c.dark_b],
            rep_rate_hz: c.rep_rate,
            dead_time_s: c.dead_time,
        }
    }
}

impl CountFile {
    pub fn from_record(rec: &CoincidenceRecord) -> Self {
        Self {
            order: LABELS.iter().map(|s| s.to_string()).collect(),
            counts: rec.counts.to_vec(),
            alpha: [rec.alpha_a, rec.alpha_b],
            dark: [rec.dark_a, rec.dark_b],
            rep_rate_hz: rec.rep_rate,
            dead_time_s: rec.dead_time,
        }
    }

    pub fn into_record(self, context: &str) -> Result<CoincidenceRecord> {
        if self.order.len() != self.counts.len() {
            return Err(Error::parse(
                context,
                format!("{} labels but {} counts", self.order.len(), self.counts.len()),
            ));
        }
        let pairs: Vec<(String, u64)> = self.order.into_iter().zip(self.counts).collect();
        let meta = CountMeta {
            alpha: self.alpha,
            dark: self.dark,
            rep_rate_hz: self.rep_rate_hz,
            dead_time_s: self.dead_time_s,
        };
        assemble_record(&pairs, &meta, context)
    }
}

fn assemble_record(pairs: &[(String, u64)], meta: &CountMeta, context: &str) -> Result<CoincidenceRecord> {
    let mut counts: [Option<u64>; 16] = [None; 16];
    for (label, n) in pairs {
        let idx = label_index(label.trim())
            .ok_or_else(|| Error::parse(context, format!("unknown basis label {label:?}")))?;
        if counts[idx].replace(*n).is_some() {
            return Err(Error::parse(context, format!("duplicate basis label {label:?}")));
        }
    }
    let mut out = [0u64; 16];
    for (i, c) in counts.iter().enumerate() {
        out[i] = c.ok_or_else(|| Error::parse(context, format!("missing basis label {:?}", LABELS[i])))?;
    }
    let rec = CoincidenceRecord {
        counts: out,
        alpha_a: meta.alpha[0],
        alpha_b: meta.alpha[1],
        dark_a: meta.dark[0],
        dark_b: meta.dark[1],
        rep_rate: meta.rep_rate_hz,
        dead_time: meta.dead_time_s,
    };
    rec.validate()?;
    Ok(rec)
}

fn is_csv(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

/// Reads a count file. `.csv` files hold `label,count` rows and need the
/// metadata sidecar `<stem>.meta.json`; anything else is parsed as JSON.
pub fn read_counts(path: &Path) -> Result<CoincidenceRecord> {
    let ctx = path.display().to_string();
    if !is_csv(path) {
        let file: CountFile = parse_json(path, &read_text(path)?)?;
        return file.into_record(&ctx);
    }
    let text = read_text(path)?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut pairs = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::parse(&ctx, e.to_string()))?;
        let line = record.position().map_or(row as u64 + 1, |p| p.line());
        if record.len() != 2 {
            return Err(Error::parse(&ctx, format!("line {line}: expected label,count")));
        }
        let label = record[0].to_string();
        if row == 0 && label.eq_ignore_ascii_case("label") {
            continue;
        }
        let n: u64 = record[1]
            .parse()
            .map_err(|_| Error::parse(&ctx, format!("line {line}, field count: {:?} is not a count", &record[1])))?;
        pairs.push((label, n));
    }
    let meta_path = sibling(path, ".meta.json");
    let meta: CountMeta = parse_json(&meta_path, &read_text(&meta_path)?)?;
    assemble_record(&pairs, &meta, &ctx)
}

pub fn counts_json(rec: &CoincidenceRecord) -> Result<String> {
    to_json_string(&CountFile::from_record(rec))
}

/// What a JSON or CSV input file turned out to contain.
#[derive(Debug, Clone)]
pub enum Input {
    Counts(CoincidenceRecord),
    Density(DensityMatrix),
}

/// Count files (CSV, or JSON with a "counts" key) or density matrices (JSON with "rho").
pub fn read_input(path: &Path) -> Result<Input> {
    if is_csv(path) {
        return Ok(Input::Counts(read_counts(path)?));
    }
    let text = read_text(path)?;
    let value: Value = parse_json(path, &text)?;
    if value.get("counts").is_some() {
        Ok(Input::Counts(parse_json::<CountFile>(path, &text)?.into_record(&path.display().to_string())?))
    } else if value.get("rho").is_some() {
        Ok(Input::Density(density_from_value(path, &value)?))
    } else {
        Err(Error::parse(
            path.display().to_string(),
            "expected a count file (\"counts\") or a density matrix (\"rho\")",
        ))
    }
}

/// The bare 4×4 array of [re, im] pairs, for embedding under a report key.
pub fn rho_array(rho: &DensityMatrix) -> Value {
    let mut v = serde_json::to_value(rho).expect("density matrices serialize");
    v["rho"].take()
}

fn density_from_value(path: &Path, value: &Value) -> Result<DensityMatrix> {
    let mut rho = value.get("rho").cloned().unwrap_or(Value::Null);
    if let Some(inner) = rho.get("rho") {
        rho = inner.clone();
    }
    serde_json::from_value(serde_json::json!({ "rho": rho }))
        .map_err(|e| Error::parse(path.display().to_string(), format!("field rho: {e}")))
}

pub fn read_density(path: &Path) -> Result<DensityMatrix> {
    let value: Value = parse_json(path, &read_text(path)?)?;
    density_from_value(path, &value)
}

/// Flat parameter JSON, or any report carrying it under "params".
pub fn read_params(path: &Path) -> Result<ErrorParams> {
    let value: Value = parse_json(path, &read_text(path)?)?;
    let inner = value.get("params").cloned().unwrap_or(value);
    serde_json::from_value(inner).map_err(|e| Error::parse(path.display().to_string(), e.to_string()))
}

/// Settings shared by every subcommand; all fields optional in the file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub optimizer: OptimizerConfig,
    pub wavepacket: Geometry,
    pub seed: Option<u64>,
    pub emit_plots: bool,
    /// Stability-scan size; falls back to `optimizer.n_runs`.
    pub n_runs: Option<usize>,
    /// Coincidence budget for `synth`.
    pub total_counts: Option<u64>,
    /// Detector metadata written by `synth`.
    pub detector: Option<CountMeta>,
}

pub fn read_config(path: &Path) -> Result<RunConfig> {
    let text = read_text(path)?;
    let cfg: RunConfig = serde_json::from_str(&text).map_err(|e| {
        Error::Config(format!("{}: line {} column {}: {e}", path.display(), e.line(), e.column()))
    })?;
    cfg.optimizer.validate()?;
    cfg.wavepacket.validate()?;
    Ok(cfg)
}

/// Matrix plot data: one row per element with real and imaginary parts.
pub fn matrix_csv(rho: &DensityMatrix) -> String {
    let mut out = String::from("row,col,re,im\n");
    for i in 0..4 {
        for j in 0..4 {
            let z = rho.get(i, j);
            out.push_str(&format!(
                "{},{},{},{}\n",
                LABELS[TIME_BIN[i]],
                LABELS[TIME_BIN[j]],
                fmt_float(z.re),
                fmt_float(z.im)
            ));
        }
    }
    out
}

const TIME_BIN: [usize; 4] = crate::tomography::TIME_BIN_INDICES;

/// `mu,rate` rows of measured single-count probabilities.
pub fn read_single_counts(path: &Path) -> Result<Vec<(f64, f64)>> {
    let ctx = path.display().to_string();
    let text = read_text(path)?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut points = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let line = row + 2;
        let record = record.map_err(|e| Error::parse(&ctx, format!("line {line}: {e}")))?;
        let field = |k: usize, name: &str| -> Result<f64> {
            record
                .get(k)
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| Error::parse(&ctx, format!("line {line}, field {name}: not a number")))
        };
        points.push((field(0, "mu")?, field(1, "rate")?));
    }
    Ok(points)
}
