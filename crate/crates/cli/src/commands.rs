use std::fs;
use std::path::Path;
use std::time::Instant;

use anyhow::{bail, Context};
use lerwlab::estimators::{
    es_and_length, estimate_bn, estimate_es, estimate_es_annulus, estimate_length, estimate_one_point_direct,
    estimate_one_point_factored, fit_alpha, scaling_rows, EstimatorResult, SamplingPlan, SeedManifest, SeriesPoint,
    BLOCK_SIZE, CONVENTION,
};
use lerwlab::validation::{monte_carlo_suite, oracle_suite, CheckOutcome, SIGMA_TOLERANCE};
use lerwlab::Oracle;

use crate::args::{Command, RunArgs, Suite};
use crate::output::{param_label, parse_param_label, render, render_checks, write_artifact, ResultRecord, RunManifest};

/// How a successful command ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    ChecksFailed,
}

/// Errors reported with exit code 1 alongside usage errors.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

fn plan(run: &RunArgs) -> SamplingPlan {
    SamplingPlan::new(run.seed, run.samples).with_workers(run.workers as usize)
}

fn oracle(run: &RunArgs) -> Oracle {
    match run.cap_sites {
        Some(cap) => Oracle::with_cap(cap as usize),
        None => Oracle::from_env(),
    }
}

fn effective_workers(run: &RunArgs) -> u32 {
    if run.workers > 0 {
        run.workers
    } else {
        std::thread::available_parallelism().map_or(1, |n| n.get() as u32)
    }
}

fn run_args(cmd: &Command) -> &RunArgs {
    match cmd {
        Command::Es { run, .. }
        | Command::EsAnnulus { run, .. }
        | Command::OnePoint { run, .. }
        | Command::Length { run, .. }
        | Command::Bn { run, .. }
        | Command::AlphaFit { run, .. }
        | Command::ScalingTable { run, .. }
        | Command::Validate { run, .. } => run,
    }
}

pub fn execute(cmd: Command, command_line: Vec<String>) -> anyhow::Result<Status> {
    let run = run_args(&cmd).clone();
    let manifest = RunManifest::new(command_line, run.seed, effective_workers(&run));
    let start = Instant::now();
    let p = plan(&run);
    let (results, plot_label): (Vec<EstimatorResult>, &str) = match cmd {
        Command::Es { radius, .. } => (vec![estimate_es(radius.radius(), &p)?], "es"),
        Command::EsAnnulus { m_exp, n_exp, .. } => {
            (vec![estimate_es_annulus(2f64.powf(m_exp), 2f64.powf(n_exp), &p)?], "es_annulus")
        }
        Command::OnePoint { radius, x, factored, .. } => {
            let n = radius.level().map_err(UsageError)?;
            if factored {
                (vec![estimate_one_point_factored(n, x, &p, &oracle(&run))?], "one_point_factored")
            } else {
                (vec![estimate_one_point_direct(n, x, &p)?], "one_point")
            }
        }
        Command::Length { radius, .. } => (vec![estimate_length(radius.radius(), &p)?], "length"),
        Command::Bn { radius, .. } => (vec![estimate_bn(radius.radius().log2(), &p)?], "b_n"),
        Command::AlphaFit { input, .. } => (vec![alpha_from_files(&input)?], "alpha"),
        Command::ScalingTable { n_min, n_max, alpha, .. } => (scaling(n_min, n_max, alpha, &p)?, "es_normalized"),
        Command::Validate { suite, input, .. } => {
            let checks = match suite {
                Suite::Oracle => oracle_suite(&oracle(&run))?,
                Suite::Mc => monte_carlo_suite(&oracle(&run), run.seed, run.samples, run.workers as usize)?,
                Suite::Compare => compare_files(&input)?,
            };
            let failed = checks.iter().any(|c| !c.passed);
            match &run.out {
                Some(path) => {
                    for c in &checks {
                        eprintln!("{c}");
                    }
                    let bytes = render_checks(&checks, run.format, &manifest)?;
                    write_artifact(&bytes, Some(path), &manifest.finished(start.elapsed().as_secs_f64()))?;
                }
                None => {
                    for c in &checks {
                        println!("{c}");
                    }
                }
            }
            return Ok(if failed { Status::ChecksFailed } else { Status::Ok });
        }
    };
    let bytes = render(&results, run.format, &manifest, Some(plot_label))?;
    let written = write_artifact(&bytes, run.out.as_deref(), &manifest.finished(start.elapsed().as_secs_f64()))?;
    log::info!("wrote {written} bytes in {:.2} s", start.elapsed().as_secs_f64());
    Ok(Status::Ok)
}

fn scaling(n_min: u32, n_max: u32, alpha: Option<f64>, plan: &SamplingPlan) -> anyhow::Result<Vec<EstimatorResult>> {
    if n_min > n_max {
        return Err(UsageError(format!("--n-min {n_min} is above --n-max {n_max}")).into());
    }
    let exps: Vec<f64> = (n_min..=n_max).map(f64::from).collect();
    let runs = exps
        .iter()
        .enumerate()
        .map(|(k, &n)| {
            log::info!("scaling table: radius 2^{n}");
            es_and_length(2f64.powf(n), &plan.offset(k as u64)).map(|r| (n, r))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut out = Vec::new();
    let alpha = match alpha {
        Some(a) => a,
        None => {
            let series: Vec<SeriesPoint> =
                runs.iter().map(|(n, r)| SeriesPoint { n: *n, es: r.es.estimate, stderr: r.es.stderr }).collect();
            let fit = fit_alpha(&series).context("fitting alpha for the normalized columns (or pass --alpha)")?;
            let manifest = plan.manifest();
            out.push(alpha_result(&fit, runs.iter().map(|(_, r)| r.es.n_samples).sum(), manifest, CONVENTION));
            fit.alpha
        }
    };
    let refs: Vec<_> = runs.iter().map(|(n, r)| (*n, &r.es, &r.length)).collect();
    let rows = scaling_rows(&refs, alpha);
    for ((n, run), row) in runs.iter().zip(&rows) {
        let tag = |r: EstimatorResult| r.with_param("n", *n).with_param("alpha", alpha);
        out.push(tag(run.es.clone()));
        out.push(tag(run.length.clone()));
        if let (Some(b), Some(se)) = (row.b_n, row.b_n_stderr) {
            out.push(tag(EstimatorResult { label: "b_n".into(), estimate: b, stderr: se, params: Default::default(), ..run.es.clone() }));
        }
        let scale = 2f64.powf(alpha * n);
        out.push(tag(EstimatorResult {
            label: "es_normalized".into(),
            estimate: row.es_normalized,
            stderr: row.es_stderr * scale,
            params: Default::default(),
            ..run.es.clone()
        }));
        let len_scale = 2f64.powf(n * (2.0 - alpha));
        out.push(tag(EstimatorResult {
            label: "length_normalized".into(),
            estimate: row.length_normalized,
            stderr: row.length_stderr / len_scale,
            params: Default::default(),
            ..run.length.clone()
        }));
    }
    Ok(out)
}

fn alpha_result(fit: &lerwlab::estimators::AlphaFit, n_samples: u64, seeds: SeedManifest, convention: &str) -> EstimatorResult {
    EstimatorResult {
        label: "alpha".into(),
        estimate: fit.alpha,
        stderr: fit.stderr,
        n_samples,
        params: Default::default(),
        seed_manifest: seeds,
        convention: convention.to_string(),
    }
    .with_param("ci_low", fit.ci_low)
    .with_param("ci_high", fit.ci_high)
    .with_param("intercept", fit.intercept)
    .with_param("reduced_chi2", fit.reduced_chi2)
    .with_param("dof", fit.dof as f64)
}

/// Results from a json file written by this tool, or from a csv file with
/// the `param,estimate,stderr,n_samples,seed` header. Csv rows carry no
/// convention.
pub fn read_results(path: &Path) -> anyhow::Result<Vec<(EstimatorResult, Option<String>)>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    if text.trim_start().starts_with('[') {
        let records: Vec<ResultRecord> =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        return Ok(records
            .into_iter()
            .map(|r| {
                let convention = r.result.convention.clone();
                (r.result, Some(convention))
            })
            .collect());
    }
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["param", "estimate", "stderr", "n_samples", "seed"] {
        bail!("{}: expected header param,estimate,stderr,n_samples,seed", path.display());
    }
    let mut out = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row.with_context(|| format!("{} row {}", path.display(), i + 2))?;
        let num = |k: usize| -> anyhow::Result<f64> {
            row[k].trim().parse().with_context(|| format!("{} row {}: {:?}", path.display(), i + 2, &row[k]))
        };
        let (label, fields) = parse_param_label(&row[0]);
        let seed = row[4].trim().parse().with_context(|| format!("{} row {}: seed", path.display(), i + 2))?;
        let mut r = EstimatorResult {
            label,
            estimate: num(1)?,
            stderr: num(2)?,
            n_samples: row[3].trim().parse().with_context(|| format!("{} row {}: n_samples", path.display(), i + 2))?,
            params: Default::default(),
            seed_manifest: SeedManifest { master_seed: seed, stream_start: 0, stream_end: 0, block_size: BLOCK_SIZE },
            convention: String::new(),
        };
        for (k, v) in fields {
            r.params.insert(k, v);
        }
        out.push((r, None));
    }
    Ok(out)
}

fn alpha_from_files(paths: &[std::path::PathBuf]) -> anyhow::Result<EstimatorResult> {
    let mut entries = Vec::new();
    for p in paths {
        entries.extend(read_results(p)?);
    }
    let conventions: Vec<&String> = entries.iter().filter_map(|(_, c)| c.as_ref()).collect();
    if conventions.windows(2).any(|w| w[0] != w[1]) {
        return Err(UsageError("input results were produced under different conventions".into()).into());
    }
    let convention = conventions.first().map_or(CONVENTION.to_string(), |c| c.to_string());
    let es: Vec<&EstimatorResult> = entries.iter().map(|(r, _)| r).filter(|r| r.label == "es").collect();
    let series: Vec<SeriesPoint> = es
        .iter()
        .filter_map(|r| {
            let n = r.param("n").or_else(|| r.param("radius").map(f64::log2))?;
            Some(SeriesPoint { n, es: r.estimate, stderr: r.stderr })
        })
        .collect();
    let fit = fit_alpha(&series)?;
    let seeds = es.first().map_or(
        SeedManifest { master_seed: 0, stream_start: 0, stream_end: 0, block_size: BLOCK_SIZE },
        |r| r.seed_manifest,
    );
    Ok(alpha_result(&fit, es.iter().map(|r| r.n_samples).sum(), seeds, &convention))
}

/// Compares every result of the later files with the result of the same
/// `param` in the first file, at 3 combined standard errors.
fn compare_files(paths: &[std::path::PathBuf]) -> anyhow::Result<Vec<CheckOutcome>> {
    if paths.len() < 2 {
        return Err(UsageError("the compare suite needs at least two --in files".into()).into());
    }
    let sets = paths.iter().map(|p| read_results(p)).collect::<anyhow::Result<Vec<_>>>()?;
    for (p, set) in paths.iter().zip(&sets) {
        if set.iter().any(|(_, c)| c.is_none()) {
            return Err(UsageError(format!("{}: comparison needs json results, which record their convention", p.display())).into());
        }
    }
    let base_convention = sets[0].first().and_then(|(_, c)| c.clone());
    for (p, set) in paths.iter().zip(&sets) {
        if set.iter().any(|(_, c)| *c != base_convention) {
            return Err(UsageError(format!(
                "{}: results use a different convention from {}; refusing to compare",
                p.display(),
                paths[0].display()
            ))
            .into());
        }
    }
    let mut checks = Vec::new();
    for (p, set) in paths.iter().zip(&sets).skip(1) {
        for (r, _) in set {
            let key = param_label(r);
            let Some((base, _)) = sets[0].iter().find(|(b, _)| param_label(b) == key) else {
                continue;
            };
            let sigma = (r.stderr * r.stderr + base.stderr * base.stderr).sqrt();
            let diff = r.estimate - base.estimate;
            checks.push(CheckOutcome::new(
                &format!("{key} in {}", p.display()),
                diff.abs() <= SIGMA_TOLERANCE * sigma,
                format!("{} vs {} (difference {diff:.3e}, combined stderr {sigma:.3e})", r.estimate, base.estimate),
            ));
        }
    }
    if checks.is_empty() {
        return Err(UsageError("no result appears in both the first and a later file".into()).into());
    }
    Ok(checks)
}
