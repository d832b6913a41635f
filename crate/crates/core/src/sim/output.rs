//! CSV and JSON artifacts.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::{Error, Result};

use super::config::{ScenarioConfig, SCHEMA_VERSION};
use super::runner::{
    median_gaps, CellResult, MedianGap, RuntimeInfo, SimulationResult, SweepResult,
};

pub const DROPS_HEADER: [&str; 8] = [
    "drop",
    "precoder",
    "ue",
    "sinr_db",
    "capacity_bps_hz",
    "snr_db",
    "channel_model",
    "tau",
];

pub const SWEEP_HEADER: [&str; 9] = [
    "channel_model",
    "tau",
    "tx_power_dbm",
    "precoder",
    "mean_capacity_bps_hz",
    "sum_capacity_bps_hz",
    "median_sinr_db",
    "samples",
    "failures",
];

/// Long-format per-drop table: one row per (cell, drop, precoder, UE).
pub fn write_drops_csv<W: Write>(result: &SimulationResult, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(DROPS_HEADER)?;
    for cell in &result.cells {
        for r in &cell.records {
            for ue in 0..r.sinr_db.len() {
                w.write_record([
                    r.drop.to_string(),
                    r.precoder.as_str().to_string(),
                    ue.to_string(),
                    r.sinr_db[ue].to_string(),
                    r.capacity_bits[ue].to_string(),
                    r.snr_db[ue].to_string(),
                    cell.channel_model.as_str().to_string(),
                    cell.tau.to_string(),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_sweep_csv<W: Write>(sweep: &SweepResult, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(SWEEP_HEADER)?;
    for row in &sweep.rows {
        w.write_record([
            row.channel_model.as_str().to_string(),
            row.tau.to_string(),
            row.tx_power_dbm.to_string(),
            row.precoder.as_str().to_string(),
            row.mean_capacity_bps_hz.to_string(),
            row.sum_capacity_bps_hz.to_string(),
            row.median_sinr_db.to_string(),
            row.samples.to_string(),
            row.failures.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Aggregate document written next to the drops table.
#[derive(Debug, Serialize)]
pub struct Summary<'a> {
    pub schema_version: u32,
    pub version: &'a str,
    pub name: &'a str,
    pub master_seed: u64,
    pub config: &'a ScenarioConfig,
    pub cells: &'a [CellResult],
    pub median_gaps_db: Vec<MedianGap>,
    pub total_failures: usize,
    pub runtime: &'a RuntimeInfo,
}

impl<'a> Summary<'a> {
    pub fn new(result: &'a SimulationResult) -> Self {
        Summary {
            schema_version: SCHEMA_VERSION,
            version: &result.runtime.version,
            name: &result.config.name,
            master_seed: result.config.master_seed,
            config: &result.config,
            cells: &result.cells,
            median_gaps_db: median_gaps(result),
            total_failures: result.cells.iter().map(|c| c.failures.len()).sum(),
            runtime: &result.runtime,
        }
    }
}

pub fn summary_json(result: &SimulationResult) -> Result<String> {
    Ok(serde_json::to_string_pretty(&Summary::new(result))?)
}

/// Writes named artifacts into a directory, refusing to replace existing
/// files unless `force` is set.
#[derive(Debug, Clone)]
pub struct ArtifactWriter {
    dir: PathBuf,
    force: bool,
}

impl ArtifactWriter {
    /// Creates `dir` if needed.
    pub fn new(dir: impl Into<PathBuf>, force: bool) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(ArtifactWriter { dir, force })
    }

    pub fn path(&self, file_name: &str) -> PathBuf {
        self.dir.join(file_name)
    }

    /// Fails before anything is written if any target already exists.
    pub fn check(&self, file_names: &[&str]) -> Result<()> {
        if self.force {
            return Ok(());
        }
        for name in file_names {
            let path = self.path(name);
            if path.exists() {
                return Err(Error::WouldOverwrite(path));
            }
        }
        Ok(())
    }

    pub fn write_with<F>(&self, file_name: &str, f: F) -> Result<PathBuf>
    where
        F: FnOnce(&mut BufWriter<File>) -> Result<()>,
    {
        self.check(&[file_name])?;
        let path = self.path(file_name);
        let mut out = BufWriter::new(File::create(&path)?);
        f(&mut out)?;
        out.flush()?;
        Ok(path)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }
}

pub fn drops_file_name(name: &str) -> String {
    format!("{name}_drops.csv")
}

pub fn summary_file_name(name: &str) -> String {
    format!("{name}_summary.json")
}

pub fn sweep_file_name(name: &str) -> String {
    format!("{name}_sweep.csv")
}

/// Writes `<name>_drops.csv` and `<name>_summary.json`.
pub fn write_run_artifacts(
    result: &SimulationResult,
    out: &ArtifactWriter,
) -> Result<Vec<PathBuf>> {
    let name = &result.config.name;
    let drops = drops_file_name(name);
    let summary = summary_file_name(name);
    out.check(&[&drops, &summary])?;
    let json = summary_json(result)?;
    Ok(vec![
        out.write_with(&drops, |w| write_drops_csv(result, w))?,
        out.write_with(&summary, |w| Ok(w.write_all(json.as_bytes())?))?,
    ])
}

pub fn write_sweep_artifact(sweep: &SweepResult, out: &ArtifactWriter) -> Result<PathBuf> {
    out.write_with(&sweep_file_name(&sweep.config.name), |w| {
        write_sweep_csv(sweep, w)
    })
}
