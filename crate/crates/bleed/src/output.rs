//! `results.json` and `pnl_paths.csv`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::Context;
use bleed_core::mc::PnlEnsemble;
use serde::Serialize;
use serde_json::Value;

use crate::config::{CsvSampling, RunConfig};
use crate::runner::RunOutput;

pub const SCHEMA_VERSION: u32 = 1;
pub const RESULTS_FILE: &str = "results.json";
pub const PNL_FILE: &str = "pnl_paths.csv";

#[derive(Debug, Serialize)]
struct McEcho {
    n_paths: usize,
    n_steps: usize,
    antithetic: bool,
}

#[derive(Debug, Serialize)]
struct Timing {
    elapsed_seconds: f64,
    threads: usize,
}

#[derive(Debug, Serialize)]
struct ResultsDocument<'a> {
    schema_version: u32,
    experiment: &'a str,
    seed: u64,
    mc: McEcho,
    params: &'a Value,
    results: &'a Value,
    warnings: &'a [String],
    /// Last, so that everything above it is reproducible byte for byte.
    timing: Timing,
}

/// Renders `results.json` (pretty-printed, trailing newline).
pub fn render_results(config: &RunConfig, output: &RunOutput, elapsed_seconds: f64, threads: usize) -> String {
    let doc = ResultsDocument {
        schema_version: SCHEMA_VERSION,
        experiment: config.experiment.name(),
        seed: config.mc.seed,
        mc: McEcho {
            n_paths: config.mc.n_paths,
            n_steps: config.mc.n_steps,
            antithetic: config.mc.antithetic,
        },
        params: &config.params,
        results: &output.results,
        warnings: &output.warnings,
        timing: Timing {
            elapsed_seconds,
            threads,
        },
    };
    let mut s = serde_json::to_string_pretty(&doc).expect("results serialize to JSON");
    s.push('\n');
    s
}

/// Writes the P&L trajectories as `path_id,t,cum_pnl`, every `stride`-th
/// grid point plus the final one.
pub fn write_pnl_csv<W: Write>(out: W, ensemble: &PnlEnsemble, sampling: CsvSampling) -> anyhow::Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(["path_id", "t", "cum_pnl"])?;
    let stride = sampling.stride.max(1);
    for (id, path) in ensemble.paths.iter().enumerate() {
        let last = path.times.len().saturating_sub(1);
        for (k, (t, v)) in path.times.iter().zip(&path.cum_pnl).enumerate() {
            if k % stride == 0 || k == last {
                w.write_record([id.to_string(), t.to_string(), v.to_string()])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// One row of `pnl_paths.csv`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Deserialize)]
pub struct PnlRow {
    pub path_id: usize,
    pub t: f64,
    pub cum_pnl: f64,
}

pub fn read_pnl_csv(path: &Path) -> anyhow::Result<Vec<PnlRow>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("cannot open {}", path.display()))?;
    r.deserialize().map(|row| row.map_err(Into::into)).collect()
}

/// Writes the artifacts of a run into `dir` and returns their paths.
pub fn write_artifacts(
    dir: &Path,
    config: &RunConfig,
    output: &RunOutput,
    elapsed_seconds: f64,
    threads: usize,
) -> anyhow::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let results = dir.join(RESULTS_FILE);
    fs::write(&results, render_results(config, output, elapsed_seconds, threads))
        .with_context(|| format!("cannot write {}", results.display()))?;
    let mut written = vec![results];
    if let Some((ensemble, sampling)) = &output.pnl {
        let path = dir.join(PNL_FILE);
        let file = fs::File::create(&path).with_context(|| format!("cannot write {}", path.display()))?;
        write_pnl_csv(std::io::BufWriter::new(file), ensemble, *sampling)?;
        written.push(path);
    }
    Ok(written)
}
