use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::SystemTime;

use anyhow::Context;
use lerwlab::estimators::{EstimatorResult, CONVENTION};
use lerwlab::validation::CheckOutcome;
use serde::{Deserialize, Serialize};

use crate::args::Format;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub command_line: Vec<String>,
    pub master_seed: u64,
    pub workers: u32,
    pub convention: String,
    /// Only in the manifest file, so result files stay byte-identical
    /// across reruns.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time_seconds: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub host: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub finished_unix: Option<u64>,
}

impl RunManifest {
    pub fn new(command_line: Vec<String>, master_seed: u64, workers: u32) -> Self {
        RunManifest {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command_line,
            master_seed,
            workers,
            convention: CONVENTION.to_string(),
            wall_time_seconds: None,
            host: None,
            finished_unix: None,
        }
    }

    pub fn finished(&self, wall_time_seconds: f64) -> Self {
        RunManifest {
            wall_time_seconds: Some(wall_time_seconds),
            host: std::env::var("HOSTNAME").ok().filter(|h| !h.is_empty()),
            finished_unix: SystemTime::now().duration_since(SystemTime::UNIX_EPOCH).ok().map(|d| d.as_secs()),
            ..self.clone()
        }
    }
}

/// A result as written to json files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    #[serde(flatten)]
    pub result: EstimatorResult,
    pub manifest: RunManifest,
}

#[derive(Serialize)]
struct CsvRow<'a> {
    param: &'a str,
    estimate: f64,
    stderr: f64,
    n_samples: u64,
    seed: u64,
}

/// Keys that identify a result; they go into the csv `param` column.
const KEY_PARAMS: &[&str] = &["n", "radius", "m", "x_n.x", "x_n.y", "x_n.z"];

/// `label;key=value;...` over the identifying parameters.
pub fn param_label(r: &EstimatorResult) -> String {
    let mut s = r.label.clone();
    for key in KEY_PARAMS {
        if let Some(v) = r.param(key) {
            let _ = write!(s, ";{key}={v}");
        }
    }
    s
}

/// Inverse of [`param_label`] for the label and its numeric fields.
pub fn parse_param_label(s: &str) -> (String, Vec<(String, f64)>) {
    let mut parts = s.split(';');
    let label = parts.next().unwrap_or_default().to_string();
    let fields = parts
        .filter_map(|kv| kv.split_once('='))
        .filter_map(|(k, v)| v.parse().ok().map(|v| (k.to_string(), v)))
        .collect();
    (label, fields)
}

/// Abscissa for plots: the level when there is one, otherwise the radius.
fn plot_x(r: &EstimatorResult, index: usize) -> f64 {
    ["n", "radius", "m"].iter().find_map(|k| r.param(k)).unwrap_or(index as f64)
}

pub fn render_csv(results: &[EstimatorResult]) -> anyhow::Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(["param", "estimate", "stderr", "n_samples", "seed"])?;
    for r in results {
        let param = param_label(r);
        w.serialize(CsvRow {
            param: &param,
            estimate: r.estimate,
            stderr: r.stderr,
            n_samples: r.n_samples,
            seed: r.seed_manifest.master_seed,
        })?;
    }
    Ok(w.into_inner().map_err(|e| e.into_error())?)
}

pub fn render_json(results: &[EstimatorResult], manifest: &RunManifest) -> anyhow::Result<Vec<u8>> {
    let records: Vec<ResultRecord> =
        results.iter().map(|r| ResultRecord { result: r.clone(), manifest: manifest.clone() }).collect();
    let mut out = serde_json::to_vec_pretty(&records)?;
    out.push(b'\n');
    Ok(out)
}

/// `x<TAB>y<TAB>yerr` lines without a header.
pub fn render_tsv(results: &[EstimatorResult]) -> Vec<u8> {
    let mut s = String::new();
    for (i, r) in results.iter().enumerate() {
        let _ = writeln!(s, "{}\t{}\t{}", plot_x(r, i), r.estimate, r.stderr);
    }
    s.into_bytes()
}

/// Renders `results`; tsv-plot keeps only those labelled `plot_label`.
pub fn render(
    results: &[EstimatorResult],
    format: Format,
    manifest: &RunManifest,
    plot_label: Option<&str>,
) -> anyhow::Result<Vec<u8>> {
    match format {
        Format::Csv => render_csv(results),
        Format::Json => render_json(results, manifest),
        Format::TsvPlot => {
            let picked: Vec<EstimatorResult> =
                results.iter().filter(|r| plot_label.map_or(true, |l| r.label == l)).cloned().collect();
            Ok(render_tsv(&picked))
        }
    }
}

pub fn render_checks(checks: &[CheckOutcome], format: Format, manifest: &RunManifest) -> anyhow::Result<Vec<u8>> {
    match format {
        Format::Json => {
            #[derive(Serialize)]
            struct Report<'a> {
                checks: &'a [CheckOutcome],
                manifest: &'a RunManifest,
            }
            let mut out = serde_json::to_vec_pretty(&Report { checks, manifest })?;
            out.push(b'\n');
            Ok(out)
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["check", "passed", "detail"])?;
            for c in checks {
                w.write_record([c.name.as_str(), if c.passed { "true" } else { "false" }, c.detail.as_str()])?;
            }
            Ok(w.into_inner().map_err(|e| e.into_error())?)
        }
        Format::TsvPlot => {
            let mut s = String::new();
            for (i, c) in checks.iter().enumerate() {
                let _ = writeln!(s, "{i}\t{}\t0", c.passed as u8);
            }
            Ok(s.into_bytes())
        }
    }
}

pub fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}

/// Writes `bytes` to `out` (or stdout) and the finished manifest next to
/// the file. Returns the number of result bytes written.
pub fn write_artifact(bytes: &[u8], out: Option<&Path>, manifest: &RunManifest) -> anyhow::Result<u64> {
    match out {
        Some(path) => {
            fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))?;
            let m = manifest_path(path);
            let text = serde_json::to_string_pretty(manifest)? + "\n";
            fs::write(&m, text).with_context(|| format!("writing {}", m.display()))?;
        }
        None => {
            let mut stdout = io::stdout().lock();
            stdout.write_all(bytes).context("writing to stdout")?;
            stdout.flush().context("writing to stdout")?;
        }
    }
    Ok(bytes.len() as u64)
}
