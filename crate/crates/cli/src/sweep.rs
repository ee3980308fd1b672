//! Parameter sweeps over independent runs.
//!
//! Each value runs in its own subdirectory `<key>_<index>` of the output
//! directory. Runs execute on a bounded rayon pool; the summary is assembled
//! in value order, so output does not depend on scheduling.

use std::fs;
use std::io::Write;
use std::path::Path;

use ctp_core::report::fmt_f64;
use rayon::prelude::*;

use crate::config::{ScenarioConfig, SCALAR_KEYS};
use crate::error::RunError;
use crate::scenario::{run, Scenario, Summary};

/// Environment variable bounding the worker pool.
pub const THREADS_VAR: &str = "CTP_LAB_THREADS";

/// A parsed `key=v1,v2,...` sweep request.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub key: String,
    pub values: Vec<String>,
}

impl SweepSpec {
    pub fn parse(text: &str) -> Result<Self, RunError> {
        let (key, list) = text
            .split_once('=')
            .ok_or_else(|| RunError::Input(format!("sweep must look like `key=v1,v2,...`, found `{text}`")))?;
        let key = key.trim();
        if !SCALAR_KEYS.contains(&key) {
            return Err(RunError::Input(format!("sweep parameter `{key}` is not a recognized scalar")));
        }
        let values: Vec<String> = list
            .split(',')
            .map(str::trim)
            .filter(|v| !v.is_empty())
            .map(String::from)
            .collect();
        if values.is_empty() {
            return Err(RunError::Input(format!("sweep over `{key}` has an empty value list")));
        }
        Ok(Self {
            key: key.to_string(),
            values,
        })
    }
}

/// Worker count from the environment, or the available parallelism.
pub fn worker_count() -> Result<usize, RunError> {
    match std::env::var(THREADS_VAR) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(RunError::Input(format!("{THREADS_VAR} must be a positive integer, found `{v}`"))),
        },
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

/// Run the sweep and write `sweep_summary.csv`. All values are validated
/// before any run starts; the first failing run, in value order, is returned.
pub fn sweep(scenario: Scenario, base: &ScenarioConfig, spec: &SweepSpec) -> Result<Vec<Summary>, RunError> {
    let configs = spec
        .values
        .iter()
        .map(|v| {
            let mut cfg = base.clone();
            cfg.set(&spec.key, v)
                .map_err(|msg| RunError::Input(format!("sweep {}: {msg}", spec.key)))?;
            Ok(cfg)
        })
        .collect::<Result<Vec<_>, RunError>>()?;
    let root = base.output.clone();
    fs::create_dir_all(&root)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(worker_count()?)
        .build()
        .map_err(|e| RunError::Input(format!("cannot start worker pool: {e}")))?;
    let results: Vec<Result<Summary, RunError>> = pool.install(|| {
        configs
            .par_iter()
            .enumerate()
            .map(|(k, cfg)| run(scenario, cfg, &root.join(format!("{}_{k:03}", spec.key))))
            .collect()
    });
    let summaries = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    write_summary(&root, spec, &summaries)?;
    Ok(summaries)
}

fn write_summary(root: &Path, spec: &SweepSpec, summaries: &[Summary]) -> Result<(), RunError> {
    let mut w = std::io::BufWriter::new(fs::File::create(root.join("sweep_summary.csv"))?);
    let names: Vec<&str> = summaries.first().map(|s| s.iter().map(|(n, _)| *n).collect()).unwrap_or_default();
    writeln!(w, "run,{},{}", spec.key, names.join(","))?;
    for (k, (value, summary)) in spec.values.iter().zip(summaries).enumerate() {
        let cells: Vec<String> = summary.iter().map(|(_, v)| fmt_f64(*v)).collect();
        writeln!(w, "{}_{k:03},{value},{}", spec.key, cells.join(","))?;
    }
    w.flush()?;
    Ok(())
}
