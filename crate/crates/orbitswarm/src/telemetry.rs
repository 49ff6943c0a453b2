//! CSV telemetry emission.
//!
//! Three files per run, with fixed headers that are part of the public
//! contract:
//!
//! - `robots.csv`: `t,id,x,y,theta,omega,e`
//! - `pairs.csv`: `t,i,j,distance,h,psi,lg_h_i,stage`
//! - `summary.csv`: `t,active,min_pairwise_distance,max_abs_omega,max_abs_e,saturations,singularities,inside_virtual_zone,collisions,overtaking_pairs`
//!
//! Floats are written with 17 significant digits so a parsed value
//! round-trips to the identical bit pattern; two runs of the same scenario
//! and seed produce byte-identical files. `record_stride` decimates which
//! steps are written (monitors always see every step).

use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::sim::{StepRecord, StepSink};

pub const ROBOTS_HEADER: &str = "t,id,x,y,theta,omega,e";
pub const PAIRS_HEADER: &str = "t,i,j,distance,h,psi,lg_h_i,stage";
pub const SUMMARY_HEADER: &str = "t,active,min_pairwise_distance,max_abs_omega,max_abs_e,saturations,singularities,inside_virtual_zone,collisions,overtaking_pairs";

#[derive(Debug, Error)]
pub enum TelemetryError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0} already exists; pass force to overwrite")]
    WouldOverwrite(PathBuf),
}

/// 17 significant digits: enough to reproduce any f64 exactly on parse.
fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

struct CsvFile {
    path: PathBuf,
    writer: BufWriter<File>,
}

impl CsvFile {
    fn create(path: PathBuf, header: &str, force: bool) -> Result<Self, TelemetryError> {
        if !force && path.exists() {
            return Err(TelemetryError::WouldOverwrite(path));
        }
        let file = OpenOptions::new()
            .write(true)
            .create(true)
            .truncate(true)
            .open(&path)
            .map_err(|source| TelemetryError::Io {
                path: path.clone(),
                source,
            })?;
        let mut writer = BufWriter::new(file);
        writeln!(writer, "{header}").map_err(|source| TelemetryError::Io {
            path: path.clone(),
            source,
        })?;
        Ok(CsvFile { path, writer })
    }

    fn line(&mut self, line: &str) -> Result<(), TelemetryError> {
        writeln!(self.writer, "{line}").map_err(|source| TelemetryError::Io {
            path: self.path.clone(),
            source,
        })
    }

    fn finish(mut self) -> Result<PathBuf, TelemetryError> {
        self.writer.flush().map_err(|source| TelemetryError::Io {
            path: self.path.clone(),
            source,
        })?;
        Ok(self.path)
    }
}

/// Step sink that writes the three CSV files, keeping every `stride`-th
/// step.
pub struct CsvSink {
    robots: CsvFile,
    pairs: CsvFile,
    summary: CsvFile,
    stride: u64,
    error: Option<TelemetryError>,
}

impl CsvSink {
    pub fn create(out_dir: &Path, stride: u32, force: bool) -> Result<Self, TelemetryError> {
        let stride = stride.max(1) as u64;
        Ok(CsvSink {
            robots: CsvFile::create(out_dir.join("robots.csv"), ROBOTS_HEADER, force)?,
            pairs: CsvFile::create(out_dir.join("pairs.csv"), PAIRS_HEADER, force)?,
            summary: CsvFile::create(out_dir.join("summary.csv"), SUMMARY_HEADER, force)?,
            stride,
            error: None,
        })
    }

    fn write_record(&mut self, record: &StepRecord) -> Result<(), TelemetryError> {
        if record.step % self.stride != 0 {
            return Ok(());
        }
        let t = fmt_f64(record.t);
        for robot in &record.robots {
            self.robots.line(&format!(
                "{t},{},{},{},{},{},{}",
                robot.id,
                fmt_f64(robot.pos.x),
                fmt_f64(robot.pos.y),
                fmt_f64(robot.theta),
                fmt_f64(robot.omega),
                fmt_f64(robot.path_error),
            ))?;
        }
        for pair in &record.pairs {
            self.pairs.line(&format!(
                "{t},{},{},{},{},{},{},{}",
                pair.i,
                pair.j,
                fmt_f64(pair.distance),
                fmt_f64(pair.h),
                fmt_f64(pair.psi),
                fmt_f64(pair.lg_h_i),
                pair.stage.as_u8(),
            ))?;
        }
        let agg = &record.aggregates;
        self.summary.line(&format!(
            "{t},{},{},{},{},{},{},{},{},{}",
            agg.active,
            fmt_opt(agg.min_pairwise_distance),
            fmt_opt(agg.max_abs_omega),
            fmt_opt(agg.max_abs_error),
            agg.saturations,
            agg.singularities,
            agg.inside_virtual_zone,
            agg.collisions,
            agg.overtaking_pairs,
        ))
    }

    /// Flushes all three files and returns their paths.
    pub fn finish(self) -> Result<Vec<PathBuf>, TelemetryError> {
        if let Some(err) = self.error {
            return Err(err);
        }
        Ok(vec![
            self.robots.finish()?,
            self.pairs.finish()?,
            self.summary.finish()?,
        ])
    }
}

impl StepSink for CsvSink {
    fn record(&mut self, record: &StepRecord) {
        if self.error.is_some() {
            return;
        }
        if let Err(err) = self.write_record(record) {
            self.error = Some(err);
        }
    }
}

/// Writes a record slice as CSV files into `out_dir` (every record, stride
/// 1) and returns the created paths.
pub fn emit_csv(
    records: &[StepRecord],
    out_dir: &Path,
    force: bool,
) -> Result<Vec<PathBuf>, TelemetryError> {
    let mut sink = CsvSink::create(out_dir, 1, force)?;
    for record in records {
        sink.record(record);
    }
    sink.finish()
}
