//! Grid execution and output files.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use crate::config::ScenarioConfig;
use crate::error::SimError;
use crate::metrics::{RunSummary, Scheme, CSV_HEADER};
use crate::sim::{run, run_traced};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GridPoint {
    pub scheme: Scheme,
    pub m: u32,
    pub seed: u64,
}

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("run (scheme={}, M={}, seed={}) failed: {source}", .point.scheme.as_str(), .point.m, .point.seed)]
    Run { point: GridPoint, source: SimError },
    #[error("cannot write trace {path}: {source}")]
    TraceFile { path: PathBuf, source: io::Error },
    #[error("cannot start worker pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
}

#[derive(Debug, Clone, Default)]
pub struct SweepOptions {
    /// Worker threads; `None` uses rayon's default.
    pub jobs: Option<usize>,
    /// Directory receiving one JSONL trace per run.
    pub trace_dir: Option<PathBuf>,
}

/// Every (scheme, M, seed) combination, sorted.
pub fn grid(config: &ScenarioConfig) -> Vec<GridPoint> {
    let mut points: Vec<GridPoint> = config
        .schemes
        .iter()
        .flat_map(|&scheme| {
            config.m_list.iter().flat_map(move |&m| {
                config
                    .seeds
                    .iter()
                    .map(move |&seed| GridPoint { scheme, m, seed })
            })
        })
        .collect();
    points.sort();
    points.dedup();
    points
}

pub fn trace_path(dir: &Path, point: GridPoint) -> PathBuf {
    dir.join(format!(
        "{}_M{}_seed{}.jsonl",
        point.scheme.as_str(),
        point.m,
        point.seed
    ))
}

/// Runs a single grid point, optionally tracing into `trace_dir`.
pub fn run_point(
    config: &ScenarioConfig,
    point: GridPoint,
    trace_dir: Option<&Path>,
) -> Result<RunSummary, SweepError> {
    let rc = config.run_config(point.scheme, point.m, point.seed);
    let result = match trace_dir {
        Some(dir) => {
            let path = trace_path(dir, point);
            let file = File::create(&path).map_err(|source| SweepError::TraceFile {
                path: path.clone(),
                source,
            })?;
            run_traced(rc, Box::new(BufWriter::new(file)))
        }
        None => run(rc),
    };
    result.map_err(|source| SweepError::Run { point, source })
}

/// Runs the whole grid. Results come back sorted by (scheme, M, seed)
/// whatever order the workers finish in.
pub fn run_sweep(
    config: &ScenarioConfig,
    opts: &SweepOptions,
) -> Result<Vec<RunSummary>, SweepError> {
    let points = grid(config);
    if let Some(dir) = &opts.trace_dir {
        fs::create_dir_all(dir).map_err(|source| SweepError::TraceFile {
            path: dir.clone(),
            source,
        })?;
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(jobs) = opts.jobs {
        builder = builder.num_threads(jobs.max(1));
    }
    let pool = builder.build()?;
    let trace_dir = opts.trace_dir.as_deref();
    let results: Vec<Result<RunSummary, SweepError>> = pool.install(|| {
        points
            .par_iter()
            .map(|&p| run_point(config, p, trace_dir))
            .collect()
    });
    results.into_iter().collect()
}

pub fn csv_string(summaries: &[RunSummary]) -> String {
    let mut out = String::with_capacity(64 * (summaries.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for s in summaries {
        out.push_str(&s.csv_row());
        out.push('\n');
    }
    out
}

/// Two-column `M value` series averaged over seeds, one file per scheme and
/// metric. Grid points without a value (no URLLC delivery) are skipped.
pub fn plot_series(summaries: &[RunSummary]) -> Vec<(String, String)> {
    type Metric = (&'static str, fn(&RunSummary) -> Option<f64>);
    let metrics: [Metric; 3] = [
        ("urllc_delay_mean_us", |s| {
            s.urllc_delay.as_ref().map(|d| d.mean_us)
        }),
        ("urllc_delay_p99_us", |s| {
            s.urllc_delay.as_ref().map(|d| d.p99_us as f64)
        }),
        ("regular_throughput_bps", |s| Some(s.regular_throughput_bps)),
    ];
    let mut files = Vec::new();
    for scheme in [Scheme::Legacy, Scheme::Proposed] {
        let rows: Vec<&RunSummary> = summaries
            .iter()
            .filter(|s| s.meta.scheme == scheme)
            .collect();
        if rows.is_empty() {
            continue;
        }
        let mut ms: Vec<u32> = rows.iter().map(|s| s.meta.m).collect();
        ms.dedup();
        for (name, get) in metrics {
            let mut body = format!("# M {name} (mean over seeds), scheme={}\n", scheme.as_str());
            for &m in &ms {
                let values: Vec<f64> = rows
                    .iter()
                    .filter(|s| s.meta.m == m)
                    .filter_map(|s| get(s))
                    .collect();
                if values.is_empty() {
                    continue;
                }
                let mean = values.iter().sum::<f64>() / values.len() as f64;
                let _ = writeln!(body, "{m} {mean}");
            }
            files.push((format!("{}_{name}.dat", scheme.as_str()), body));
        }
    }
    files
}

/// Writes the CSV (to `csv_path`, or stdout) and optional plot files.
pub fn write_outputs(
    summaries: &[RunSummary],
    csv_path: Option<&Path>,
    plot_dir: Option<&Path>,
) -> io::Result<()> {
    let csv = csv_string(summaries);
    match csv_path {
        Some(path) => fs::write(path, csv)?,
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            lock.write_all(csv.as_bytes())?;
            lock.flush()?;
        }
    }
    if let Some(dir) = plot_dir {
        fs::create_dir_all(dir)?;
        for (name, body) in plot_series(summaries) {
            fs::write(dir.join(name), body)?;
        }
    }
    Ok(())
}
