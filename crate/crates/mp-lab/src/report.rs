//! Run reports and file outputs.
//!
//! Batches serialize to a columnar CSV (`trial,target_id,re,im`) with a JSON
//! header echoing the full config plus a content hash, so a run directory is
//! self-describing and reruns from the echoed config are bit-identical
//! (modulo the wall-clock field of the report).

use std::io::Write;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::fluct_mc::{FluctuationBatch, ResolventFieldBatch};
use crate::stats::{CovBlockReport, GofReport, IndependenceReport, VarianceReport};
use crate::Result;

pub const REPORT_VERSION: u32 = 1;

/// SHA-256 over the canonical JSON serialization of the resolved config.
pub fn config_hash(cfg: &RunConfig) -> String {
    let canonical = serde_json::to_string(cfg).expect("config serializes");
    hex::encode(Sha256::digest(canonical.as_bytes()))
}

#[derive(Debug, Clone, Serialize, Default)]
pub struct ReportSet {
    pub variance: Vec<VarianceReport>,
    pub gaussian_fit: Vec<GofReport>,
    pub independence: Vec<IndependenceReport>,
    pub covariance_blocks: Vec<CovBlockReport>,
}

impl ReportSet {
    pub fn all_pass(&self) -> bool {
        self.variance.iter().all(|r| r.pass)
            && self.independence.iter().all(|r| r.pass)
            && self.covariance_blocks.iter().all(|r| r.pass)
    }

    /// Gaussian-fit checks carry their own threshold at evaluation time;
    /// collect failures against it here.
    pub fn fit_pass(&self, min_p: f64) -> bool {
        self.gaussian_fit.iter().all(|r| r.p_value > min_p)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub version: u32,
    pub config: RunConfig,
    pub config_hash: String,
    pub seed: u64,
    pub wall_ms: u128,
    pub pass: bool,
    pub reports: ReportSet,
}

impl RunReport {
    pub fn write_json(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        serde_json::to_writer_pretty(&mut f, self)
            .map_err(|e| crate::LabError::Config(format!("report serialization: {e}")))?;
        f.write_all(b"\n")?;
        Ok(())
    }

    /// Flat CSV projection for spreadsheet inspection.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        writeln!(f, "test,id,estimate,predicted,statistic,pass")?;
        for r in &self.reports.variance {
            writeln!(
                f,
                "variance,{},{},{},{},{}",
                r.id, r.estimate, r.predicted, r.ratio, r.pass
            )?;
        }
        for r in &self.reports.gaussian_fit {
            writeln!(
                f,
                "gaussian_fit,{},{},{},{},{}",
                r.id,
                r.ks_statistic,
                r.variance_used,
                r.p_value,
                r.p_value > 0.01
            )?;
        }
        for r in &self.reports.independence {
            writeln!(
                f,
                "independence,{},{},{},{},{}",
                r.id,
                r.correlation.unwrap_or(f64::NAN),
                r.threshold,
                r.applicable,
                r.pass
            )?;
        }
        for r in &self.reports.covariance_blocks {
            writeln!(
                f,
                "covariance_block,{},{},{},{},{}",
                r.id,
                r.empirical.get(0, 0),
                r.predicted.get(0, 0),
                r.worst_deviation,
                r.pass
            )?;
        }
        Ok(())
    }
}

/// Write a fluctuation batch as `trial,target_id,re,im` rows.
pub fn write_entry_batch_csv(batch: &FluctuationBatch, path: &Path) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    writeln!(f, "trial,target_id,re,im")?;
    for (k, column) in batch.samples.iter().enumerate() {
        let label = batch.pair_label(k);
        for (t, v) in column.iter().enumerate() {
            writeln!(f, "{t},{label},{},{}", v.re, v.im)?;
        }
    }
    Ok(())
}

/// Write a resolvent-field batch as `trial,target_id,re,im` rows.
pub fn write_field_batch_csv(batch: &ResolventFieldBatch, path: &Path) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    writeln!(f, "trial,target_id,re,im")?;
    for (k, column) in batch.samples.iter().enumerate() {
        let label = batch.target_label(k);
        for (t, v) in column.iter().enumerate() {
            writeln!(f, "{t},{label},{},{}", v.re, v.im)?;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct BatchHeader<'a> {
    pub version: u32,
    pub kind: &'static str,
    pub config: &'a RunConfig,
    pub config_hash: String,
    pub seed: u64,
    pub trials: usize,
    pub failed_trials: usize,
    pub targets: Vec<String>,
}

/// JSON sidecar for a batch CSV: full config echo plus content hash.
pub fn write_batch_header(
    cfg: &RunConfig,
    seed: u64,
    kind: &'static str,
    trials: usize,
    failed_trials: usize,
    targets: Vec<String>,
    path: &Path,
) -> Result<()> {
    let header = BatchHeader {
        version: REPORT_VERSION,
        kind,
        config: cfg,
        config_hash: config_hash(cfg),
        seed,
        trials,
        failed_trials,
        targets,
    };
    let mut f = std::fs::File::create(path)?;
    serde_json::to_writer_pretty(&mut f, &header)
        .map_err(|e| crate::LabError::Config(format!("header serialization: {e}")))?;
    f.write_all(b"\n")?;
    Ok(())
}
