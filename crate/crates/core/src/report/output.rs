use std::fs;
use std::path::Path;

use serde::Serialize;

use super::config::RunConfig;
use crate::error::{Error, Result};
use crate::sim::MetricsRecord;

pub const SUMMARY_FILE: &str = "summary.csv";
pub const PER_COHORT_FILE: &str = "per_cohort.csv";
pub const MANIFEST_FILE: &str = "manifest.toml";
pub const RESOLVED_CONFIG_FILE: &str = "resolved_config.toml";

pub const SUMMARY_HEADER: [&str; 6] = ["scenario", "method", "n", "mean_abs_bias", "mean_mse", "shrinkage"];
pub const PER_COHORT_HEADER: [&str; 9] = [
    "scenario", "method", "n", "cohort", "true_p", "mean_est", "bias", "variance", "mse",
];

#[derive(Serialize)]
struct Manifest<'a> {
    software: &'static str,
    version: &'static str,
    seed: u64,
    records: usize,
    files: [&'static str; 3],
    config: &'a RunConfig,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write_csv(path: &Path, header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<()> {
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(file);
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

/// Writes the summary and per-cohort tables, the manifest and the resolved
/// configuration into `dir`, creating it if needed.
///
/// Rows are sorted by scenario id, method, then cohort size, and numbers use
/// the shortest representation that round-trips, so identical records give
/// byte-identical files.
pub fn emit_results(records: &[MetricsRecord], config: &RunConfig, dir: &Path) -> Result<()> {
    if records.is_empty() {
        return Err(Error::Simulation("no metrics records to write".into()));
    }
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut sorted: Vec<&MetricsRecord> = records.iter().collect();
    sorted.sort_by(|a, b| {
        (&a.scenario_id, a.method.index(), a.n_per_cohort).cmp(&(&b.scenario_id, b.method.index(), b.n_per_cohort))
    });

    write_csv(
        &dir.join(SUMMARY_FILE),
        &SUMMARY_HEADER,
        sorted.iter().map(|r| {
            vec![
                r.scenario_id.clone(),
                r.method.name().to_string(),
                r.n_per_cohort.to_string(),
                r.mean_abs_bias.to_string(),
                r.mean_mse.to_string(),
                r.shrinkage.map(|s| s.to_string()).unwrap_or_default(),
            ]
        }),
    )?;

    write_csv(
        &dir.join(PER_COHORT_FILE),
        &PER_COHORT_HEADER,
        sorted.iter().flat_map(|r| {
            r.per_cohort.iter().enumerate().map(move |(i, c)| {
                vec![
                    r.scenario_id.clone(),
                    r.method.name().to_string(),
                    r.n_per_cohort.to_string(),
                    (i + 1).to_string(),
                    c.true_p.to_string(),
                    c.mean_est.to_string(),
                    c.bias.to_string(),
                    c.variance.to_string(),
                    c.mse.to_string(),
                ]
            })
        }),
    )?;

    let resolved = config.to_toml()?;
    let path = dir.join(RESOLVED_CONFIG_FILE);
    fs::write(&path, &resolved).map_err(io_err(&path))?;

    let manifest = Manifest {
        software: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        seed: config.seed,
        records: records.len(),
        files: [SUMMARY_FILE, PER_COHORT_FILE, RESOLVED_CONFIG_FILE],
        config,
    };
    let text = toml::to_string(&manifest).map_err(|e| Error::Simulation(format!("manifest: {e}")))?;
    let path = dir.join(MANIFEST_FILE);
    fs::write(&path, text).map_err(io_err(&path))?;
    Ok(())
}
