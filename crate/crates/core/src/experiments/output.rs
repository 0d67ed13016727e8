//! Result files.
//!
//! * purity series: CSV `t,P,P_stderr`, one row per kick from `t = 0`;
//! * distance tables: CSV `label,N,eps,distance`;
//! * phase-space grids: a 32-byte little-endian header (`b"LEWG"`, `u32`
//!   version, `u64` rows, `u64` cols, `u64` kind code) followed by
//!   `rows × cols` row-major `f64` values;
//! * `manifest.json`: config echo, seeds, derived quantities and a listing of
//!   every file with its row and byte counts.
//!
//! All writers produce identical bytes for identical inputs.

use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::observables::{DistributionKind, PhaseSpaceDistribution, PuritySeries};

pub const GRID_MAGIC: &[u8; 4] = b"LEWG";
pub const GRID_VERSION: u32 = 1;
pub const GRID_HEADER_BYTES: u64 = 32;
pub const PURITY_HEADER: [&str; 3] = ["t", "P", "P_stderr"];
pub const DISTANCE_HEADER: [&str; 4] = ["label", "N", "eps", "distance"];
pub const MANIFEST_NAME: &str = "manifest.json";

fn csv_err(e: csv::Error) -> Error {
    Error::Format(e.to_string())
}

pub fn write_purity_csv(path: &Path, series: &PuritySeries) -> Result<usize> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(PURITY_HEADER).map_err(csv_err)?;
    for ((t, p), se) in series.times.iter().zip(&series.values).zip(&series.stderr) {
        w.write_record([t.to_string(), p.to_string(), se.to_string()]).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(series.len())
}

/// `(t, P, P_stderr)` rows.
pub fn read_purity_csv(path: &Path) -> Result<Vec<(usize, f64, f64)>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let header: Vec<String> = r.headers().map_err(csv_err)?.iter().map(str::to_string).collect();
    if header != PURITY_HEADER {
        return Err(Error::Format(format!("{}: unexpected header {header:?}", path.display())));
    }
    r.deserialize().map(|row| row.map_err(csv_err)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistanceRow {
    pub label: String,
    #[serde(rename = "N")]
    pub n: usize,
    pub eps: f64,
    pub distance: f64,
}

pub fn write_distances_csv(path: &Path, rows: &[DistanceRow]) -> Result<usize> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for row in rows {
        w.serialize(row).map_err(csv_err)?;
    }
    if rows.is_empty() {
        w.write_record(DISTANCE_HEADER).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(rows.len())
}

pub fn read_distances_csv(path: &Path) -> Result<Vec<DistanceRow>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    r.deserialize().map(|row| row.map_err(csv_err)).collect()
}

/// Write any header plus rows of already formatted fields.
pub fn write_table_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<usize> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.write_record(row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(rows.len())
}

pub fn write_grid(path: &Path, kind: DistributionKind, values: &Array2<f64>) -> Result<u64> {
    let (rows, cols) = values.dim();
    let mut w = BufWriter::new(fs::File::create(path)?);
    w.write_all(GRID_MAGIC)?;
    w.write_all(&GRID_VERSION.to_le_bytes())?;
    w.write_all(&(rows as u64).to_le_bytes())?;
    w.write_all(&(cols as u64).to_le_bytes())?;
    w.write_all(&kind.code().to_le_bytes())?;
    for v in values.iter() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(grid_file_bytes(rows, cols))
}

pub fn grid_file_bytes(rows: usize, cols: usize) -> u64 {
    GRID_HEADER_BYTES + 8 * (rows * cols) as u64
}

pub fn read_grid(path: &Path) -> Result<(DistributionKind, Array2<f64>)> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    let fail = |msg: &str| Error::Format(format!("{}: {msg}", path.display()));
    if bytes.len() < GRID_HEADER_BYTES as usize || &bytes[..4] != GRID_MAGIC {
        return Err(fail("not a grid file (bad magic)"));
    }
    let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != GRID_VERSION {
        return Err(fail(&format!("unsupported version {version}")));
    }
    let (rows, cols) = (u64_at(8) as usize, u64_at(16) as usize);
    let kind = DistributionKind::from_code(u64_at(24)).ok_or_else(|| fail("unknown kind code"))?;
    if bytes.len() as u64 != grid_file_bytes(rows, cols) {
        return Err(fail(&format!("size {} does not match a {rows}×{cols} grid", bytes.len())));
    }
    let data: Vec<f64> = bytes[GRID_HEADER_BYTES as usize..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let values = Array2::from_shape_vec((rows, cols), data).map_err(|e| fail(&e.to_string()))?;
    Ok((kind, values))
}

/// Axis description stored next to a grid in the manifest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridAxes {
    pub kind: DistributionKind,
    pub x_min: f64,
    pub x_step: f64,
    pub p_min: f64,
    pub p_step: f64,
}

impl From<&PhaseSpaceDistribution> for GridAxes {
    fn from(d: &PhaseSpaceDistribution) -> Self {
        Self {
            kind: d.kind,
            x_min: d.x_min,
            x_step: d.x_step,
            p_min: d.p_min,
            p_step: d.p_step,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputRecord {
    /// Relative to the run directory.
    pub path: String,
    /// Data rows for CSV files, grid rows for grid files.
    pub rows: usize,
    pub bytes: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub experiment: String,
    pub code_version: String,
    pub seed: u64,
    pub config: ExperimentConfig,
    pub outputs: Vec<OutputRecord>,
    pub results: serde_json::Value,
    pub notes: Vec<String>,
}

/// Single writer for a run directory; records every file it writes.
#[derive(Debug)]
pub struct Emitter {
    dir: PathBuf,
    outputs: Vec<OutputRecord>,
}

impl Emitter {
    pub fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            outputs: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn record(&mut self, name: &str, rows: usize) -> Result<()> {
        let bytes = fs::metadata(self.dir.join(name))?.len();
        self.outputs.push(OutputRecord {
            path: name.to_string(),
            rows,
            bytes,
        });
        Ok(())
    }

    pub fn purity(&mut self, name: &str, series: &PuritySeries) -> Result<()> {
        let rows = write_purity_csv(&self.dir.join(name), series)?;
        self.record(name, rows)
    }

    pub fn distances(&mut self, name: &str, rows: &[DistanceRow]) -> Result<()> {
        let n = write_distances_csv(&self.dir.join(name), rows)?;
        self.record(name, n)
    }

    pub fn table(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
        let n = write_table_csv(&self.dir.join(name), header, rows)?;
        self.record(name, n)
    }

    pub fn grid(&mut self, name: &str, dist: &PhaseSpaceDistribution) -> Result<()> {
        write_grid(&self.dir.join(name), dist.kind, &dist.values)?;
        self.record(name, dist.shape().0)
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let text = serde_json::to_string_pretty(value)?;
        fs::write(self.dir.join(name), text + "\n")?;
        self.record(name, 1)
    }

    /// Write `manifest.json` and return the manifest.
    pub fn finish(
        self,
        config: &ExperimentConfig,
        results: serde_json::Value,
        notes: Vec<String>,
    ) -> Result<RunManifest> {
        let manifest = RunManifest {
            experiment: config.experiment.kind.to_string(),
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            seed: config.experiment.seed,
            config: config.clone(),
            outputs: self.outputs,
            results,
            notes,
        };
        let text = serde_json::to_string_pretty(&manifest)?;
        fs::write(self.dir.join(MANIFEST_NAME), text + "\n")?;
        Ok(manifest)
    }
}

pub fn read_manifest(dir: &Path) -> Result<RunManifest> {
    let text = fs::read_to_string(dir.join(MANIFEST_NAME))?;
    Ok(serde_json::from_str(&text)?)
}

/// Check that every listed output exists with the recorded size and row count.
pub fn verify_manifest(dir: &Path, manifest: &RunManifest) -> Result<()> {
    for out in &manifest.outputs {
        let path = dir.join(&out.path);
        let bytes = fs::metadata(&path)
            .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?
            .len();
        if bytes != out.bytes {
            return Err(Error::Format(format!("{}: {bytes} bytes, manifest says {}", out.path, out.bytes)));
        }
        let rows = if out.path.ends_with(".csv") {
            let mut r = csv::Reader::from_path(&path).map_err(csv_err)?;
            r.records().count()
        } else if out.path.ends_with(".bin") {
            read_grid(&path)?.1.nrows()
        } else {
            out.rows
        };
        if rows != out.rows {
            return Err(Error::Format(format!("{}: {rows} rows, manifest says {}", out.path, out.rows)));
        }
    }
    Ok(())
}
