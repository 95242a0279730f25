//! Grid sweeps over `tau`, `batch_size`, `omega` and `algorithm`.
//!
//! ```toml
//! seeds = [1, 2, 3]
//! output_dir = "sweep_out"
//! base_config = "base.toml"   # or an inline [base] table
//!
//! [axes]
//! tau = [1, 2, 5]
//! algorithm = ["dse_sgd", "dlsgd"]
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use dse_core::metrics::format_sig17;
use dse_core::Algorithm;
use rayon::prelude::*;
use serde::Deserialize;

use crate::config::{parse_config, RunConfig};
use crate::error::{HarnessError, Result};
use crate::run::{artifact_stem, execute, write_artifact};

pub const DEFAULT_CAP: usize = 1024;

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axes {
    #[serde(default)]
    pub tau: Vec<usize>,
    #[serde(default)]
    pub batch_size: Vec<usize>,
    #[serde(default)]
    pub omega: Vec<f64>,
    #[serde(default)]
    pub algorithm: Vec<Algorithm>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    base: Option<RunConfig>,
    base_config: Option<PathBuf>,
    #[serde(default)]
    axes: Axes,
    #[serde(default)]
    seeds: Vec<u64>,
    #[serde(default = "default_cap")]
    cap: usize,
    output_dir: Option<PathBuf>,
}

fn default_cap() -> usize {
    DEFAULT_CAP
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub base: RunConfig,
    pub axes: Axes,
    /// Empty means the base config's seed only.
    pub seeds: Vec<u64>,
    pub cap: usize,
    pub output_dir: PathBuf,
}

pub fn parse_sweep(path: &Path) -> Result<SweepSpec> {
    let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    parse_sweep_str(&text, path.parent().unwrap_or(Path::new(".")))
}

/// `base_config` paths are resolved against `rel_dir`.
pub fn parse_sweep_str(text: &str, rel_dir: &Path) -> Result<SweepSpec> {
    let raw: RawSweep = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
    let base = match (raw.base, raw.base_config) {
        (Some(b), None) => {
            b.check()?;
            b
        }
        (None, Some(p)) => parse_config(&rel_dir.join(p))?,
        _ => {
            return Err(HarnessError::Config(
                "sweep needs exactly one of [base] or base_config".into(),
            ))
        }
    };
    let output_dir = raw.output_dir.unwrap_or_else(|| base.output.dir.clone());
    let spec = SweepSpec {
        base,
        axes: raw.axes,
        seeds: raw.seeds,
        cap: raw.cap,
        output_dir,
    };
    let n = spec.grid().len();
    if n > spec.cap {
        return Err(HarnessError::Config(format!(
            "sweep has {n} runs, above the cap of {}",
            spec.cap
        )));
    }
    Ok(spec)
}

/// One grid point: the values of the swept axes plus the derived config.
#[derive(Debug, Clone)]
pub struct GridPoint {
    pub labels: Vec<String>,
    pub config: RunConfig,
}

impl SweepSpec {
    pub fn axis_names(&self) -> Vec<&'static str> {
        let a = &self.axes;
        [
            ("tau", a.tau.is_empty()),
            ("batch_size", a.batch_size.is_empty()),
            ("omega", a.omega.is_empty()),
            ("algorithm", a.algorithm.is_empty()),
        ]
        .into_iter()
        .filter(|(_, empty)| !empty)
        .map(|(n, _)| n)
        .collect()
    }

    /// Cartesian product in axis order, seeds innermost.
    pub fn grid(&self) -> Vec<GridPoint> {
        let mut points = vec![GridPoint {
            labels: Vec::new(),
            config: self.base.clone(),
        }];
        fn expand<V: Copy>(
            points: Vec<GridPoint>,
            values: &[V],
            label: impl Fn(V) -> String,
            set: impl Fn(&mut RunConfig, V),
        ) -> Vec<GridPoint> {
            if values.is_empty() {
                return points;
            }
            let mut out = Vec::with_capacity(points.len() * values.len());
            for p in points {
                for &v in values {
                    let mut q = p.clone();
                    q.labels.push(label(v));
                    set(&mut q.config, v);
                    out.push(q);
                }
            }
            out
        }
        let a = &self.axes;
        points = expand(points, &a.tau, |v| v.to_string(), |c, v| c.tau = v);
        points = expand(
            points,
            &a.batch_size,
            |v| v.to_string(),
            |c, v| c.batch_size = v,
        );
        points = expand(
            points,
            &a.omega,
            |v| v.to_string(),
            |c, v| c.problem.omega = v,
        );
        points = expand(
            points,
            &a.algorithm,
            |v| v.name().to_string(),
            |c, v| c.algorithm = v,
        );
        let seeds = if self.seeds.is_empty() {
            vec![self.base.seed]
        } else {
            self.seeds.clone()
        };
        points = expand(points, &seeds, |v| v.to_string(), |c, v| c.seed = v);
        for p in &mut points {
            p.config.output.dir = self.output_dir.clone();
        }
        points
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub labels: Vec<String>,
    pub status: String,
    pub final_loss: Option<f64>,
    pub final_grad_norm_sq: Option<f64>,
    pub min_loss: Option<f64>,
    pub comm_rounds_total: Option<usize>,
    /// CSV file name relative to the sweep directory.
    pub csv: Option<String>,
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub summary_path: PathBuf,
    pub rows: Vec<SummaryRow>,
}

/// Worker count from `DSE_THREADS`; zero (rayon's default) when unset.
pub fn threads_from_env() -> usize {
    std::env::var("DSE_THREADS")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(0)
}

fn run_point(p: &GridPoint) -> SummaryRow {
    let failed = |status: String| SummaryRow {
        labels: p.labels.clone(),
        status,
        final_loss: None,
        final_grad_norm_sq: None,
        min_loss: None,
        comm_rounds_total: None,
        csv: None,
    };
    let exec = match execute(&p.config) {
        Ok(e) => e,
        Err(e) => return failed(e.to_string()),
    };
    let name = format!("{}.csv", artifact_stem(&p.config));
    if let Err(e) = write_artifact(&p.config.output.dir.join(&name), exec.csv().as_bytes()) {
        return failed(e.to_string());
    }
    let last = exec.rows.last();
    let status = match &exec.divergence {
        None => "ok".to_string(),
        Some((it, _)) => format!("diverged at iteration {it}"),
    };
    SummaryRow {
        labels: p.labels.clone(),
        status,
        final_loss: last.map(|r| r.loss),
        final_grad_norm_sq: last.map(|r| r.grad_norm_sq),
        min_loss: exec.rows.iter().map(|r| r.loss).reduce(f64::min),
        comm_rounds_total: last.map(|r| r.comm_rounds),
        csv: Some(name),
    }
}

pub fn summary_csv(spec: &SweepSpec, rows: &[SummaryRow]) -> String {
    let mut header: Vec<&str> = spec.axis_names();
    header.extend([
        "seed",
        "status",
        "final_loss",
        "final_grad_norm_sq",
        "min_loss",
        "comm_rounds_total",
        "csv",
    ]);
    let mut out = header.join(",");
    out.push('\n');
    let num = |v: Option<f64>| v.map(format_sig17).unwrap_or_default();
    for r in rows {
        let mut fields = r.labels.clone();
        fields.push(r.status.replace([',', '\n'], ";"));
        fields.push(num(r.final_loss));
        fields.push(num(r.final_grad_norm_sq));
        fields.push(num(r.min_loss));
        fields.push(
            r.comm_rounds_total
                .map(|c| c.to_string())
                .unwrap_or_default(),
        );
        fields.push(r.csv.clone().unwrap_or_default());
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

/// Runs every grid point on `threads` workers (0 = rayon default). Failed
/// points are recorded in the summary and do not stop the sweep; the
/// summary is written in grid order.
pub fn sweep(spec: &SweepSpec, threads: usize) -> Result<SweepReport> {
    let grid = spec.grid();
    if grid.len() > spec.cap {
        return Err(HarnessError::Config(format!(
            "sweep has {} runs, above the cap of {}",
            grid.len(),
            spec.cap
        )));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| HarnessError::Io(e.to_string()))?;
    let rows: Vec<SummaryRow> = pool.install(|| grid.par_iter().map(run_point).collect());
    let summary_path = spec.output_dir.join("summary.csv");
    write_artifact(&summary_path, summary_csv(spec, &rows).as_bytes())?;
    Ok(SweepReport { summary_path, rows })
}
