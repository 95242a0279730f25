use std::fs;
use std::path::{Path, PathBuf};

use dse_core::metrics::CSV_HEADER;
use dse_core::problems::write_samples;
use dse_core::{Engine, MetricsRow64};
use sha2::{Digest, Sha256};

use crate::checkpoint;
use crate::config::{prepare, RunConfig};
use crate::error::{HarnessError, Result};

/// In-memory result of driving one config to its horizon (or to divergence).
#[derive(Debug, Clone)]
pub struct Execution {
    pub rows: Vec<MetricsRow64>,
    /// Node parameters at the end of the run.
    pub xs: Vec<Vec<f64>>,
    pub cadence: usize,
    pub warnings: Vec<String>,
    /// Set when the run stopped early on a non-finite value.
    pub divergence: Option<(usize, String)>,
}

impl Execution {
    pub fn csv(&self) -> String {
        metrics_csv(&self.rows, self.cadence)
    }
}

pub fn metrics_csv(rows: &[MetricsRow64], cadence: usize) -> String {
    let mut out = format!("# metrics_cadence={cadence}\n{CSV_HEADER}\n");
    for r in rows {
        out.push_str(&r.to_csv_line());
        out.push('\n');
    }
    out
}

/// Runs without touching the filesystem. Config errors are returned; a
/// divergence is recorded in the result with the rows logged before it.
pub fn execute(cfg: &RunConfig) -> Result<Execution> {
    let prep = prepare(cfg)?;
    let mut engine = Engine::new(
        cfg.algorithm,
        &prep.problem,
        &prep.mixing,
        prep.params,
        cfg.seed,
    )?;
    let cadence = cfg.cadence();
    let mut rows = Vec::new();
    let outcome = engine.run_with(cadence, cfg.metrics.wall_clock, |r| rows.push(*r));
    let divergence = match outcome {
        Ok(()) => None,
        Err(dse_core::Error::Divergence { iteration, what }) => Some((iteration, what)),
        Err(e) => return Err(e.into()),
    };
    Ok(Execution {
        rows,
        xs: engine.swarm().xs(),
        cadence,
        warnings: prep.warnings,
        divergence,
    })
}

/// Hex SHA-256 of the config with the output directory blanked, so the
/// same experiment gets the same file name wherever it is written.
pub fn config_hash(cfg: &RunConfig) -> String {
    let mut c = cfg.clone();
    c.output.dir = PathBuf::new();
    let json = serde_json::to_string(&c).expect("config serializes");
    let digest = Sha256::digest(json.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn artifact_stem(cfg: &RunConfig) -> String {
    format!("{}-{}", cfg.algorithm.name(), &config_hash(cfg)[..16])
}

/// Writes `bytes` to `path` unless a file with different content is already
/// there. Identical content is left alone.
pub fn write_artifact(path: &Path, bytes: &[u8]) -> Result<()> {
    match fs::read(path) {
        Ok(existing) if existing == bytes => return Ok(()),
        Ok(_) => {
            return Err(HarnessError::Io(format!(
                "{}: refusing to overwrite an artifact with different content",
                path.display()
            )))
        }
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
        Err(e) => return Err(HarnessError::io(path, e)),
    }
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| HarnessError::io(path, e))
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub csv_path: PathBuf,
    pub checkpoint_path: PathBuf,
    pub execution: Execution,
}

/// Runs and writes `<dir>/<algorithm>-<hash>.csv` and `.ckpt`. On divergence
/// the partial CSV is still written and the error carries the iteration.
pub fn run(cfg: &RunConfig) -> Result<RunReport> {
    let execution = execute(cfg)?;
    let stem = artifact_stem(cfg);
    let csv_path = cfg.output.dir.join(format!("{stem}.csv"));
    let checkpoint_path = cfg.output.dir.join(format!("{stem}.ckpt"));
    write_artifact(&csv_path, execution.csv().as_bytes())?;
    if let Some((iteration, what)) = &execution.divergence {
        return Err(HarnessError::Divergence {
            iteration: *iteration,
            what: what.clone(),
        });
    }
    write_artifact(&checkpoint_path, &checkpoint::encode(&execution.xs)?)?;
    Ok(RunReport {
        csv_path,
        checkpoint_path,
        execution,
    })
}

/// Writes each node's shard as `shard_<i>.csv` (features then label).
pub fn dump_shards(cfg: &RunConfig, dir: &Path) -> Result<Vec<PathBuf>> {
    let prep = prepare(cfg)?;
    let mut paths = Vec::new();
    for (i, o) in prep.problem.oracles().iter().enumerate() {
        let path = dir.join(format!("shard_{i}.csv"));
        write_artifact(&path, write_samples(&o.shard().samples).as_bytes())?;
        paths.push(path);
    }
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config_str;

    fn cfg(dir: &Path) -> RunConfig {
        let mut c = parse_config_str(crate::config::tests::MINIMAL).unwrap();
        c.output.dir = dir.to_path_buf();
        c
    }

    #[test]
    fn hash_ignores_output_dir() {
        let a = cfg(Path::new("a"));
        let b = cfg(Path::new("b"));
        assert_eq!(config_hash(&a), config_hash(&b));
        let mut c = a.clone();
        c.seed += 1;
        assert_ne!(config_hash(&a), config_hash(&c));
    }

    #[test]
    fn overwrite_with_different_content_refused() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.csv");
        write_artifact(&p, b"one").unwrap();
        write_artifact(&p, b"one").unwrap();
        let err = write_artifact(&p, b"two").unwrap_err();
        assert_eq!(err.exit_code(), 4);
        assert_eq!(fs::read(&p).unwrap(), b"one");
    }

    #[test]
    fn csv_layout() {
        let dir = tempfile::tempdir().unwrap();
        let report = run(&cfg(dir.path())).unwrap();
        let text = fs::read_to_string(&report.csv_path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("# metrics_cadence=1"));
        assert_eq!(lines.next(), Some(CSV_HEADER));
        assert_eq!(lines.count(), 101);
    }

    #[test]
    fn shards_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let c = cfg(dir.path());
        let paths = dump_shards(&c, dir.path()).unwrap();
        assert_eq!(paths.len(), 4);
        let prep = prepare(&c).unwrap();
        let text = fs::read_to_string(&paths[2]).unwrap();
        let back = dse_core::problems::read_samples::<f64>(&text).unwrap();
        assert_eq!(back, prep.problem.oracle(2).shard().samples);
    }
}
