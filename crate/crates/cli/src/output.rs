//! CSV tables, JSON summaries and the run manifest.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Read};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

/// Formats a float so that parsing it back gives the identical bits.
pub fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

/// Numeric table with named columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(headers: &[&str]) -> Self {
        Self {
            headers: headers.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.headers.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.headers.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(&self.headers)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|&x| fmt(x)))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let mut r = csv::Reader::from_path(path)?;
        let headers = r.headers()?.iter().map(str::to_string).collect();
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let row = rec
                .iter()
                .map(|s| {
                    s.parse::<f64>()
                        .map_err(|e| CliError::Config(format!("{}: '{s}': {e}", path.display())))
                })
                .collect::<Result<Vec<_>, _>>()?;
            rows.push(row);
        }
        Ok(Self { headers, rows })
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn file_digest(path: &Path) -> Result<String, CliError> {
    let mut hasher = Sha256::new();
    let mut buf = Vec::new();
    File::open(path)?.read_to_end(&mut buf)?;
    hasher.update(&buf);
    Ok(hex::encode(hasher.finalize()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub scenario: String,
    pub version: String,
    pub seed: u64,
    /// SHA-256 of the resolved configuration serialized as JSON.
    pub config_sha256: String,
    pub conventions: BTreeMap<String, String>,
    /// File name to SHA-256 of its contents.
    pub files: BTreeMap<String, String>,
}

/// Collects output files of one run inside `dir`.
pub struct OutputDir {
    dir: PathBuf,
    written: Vec<String>,
}

impl OutputDir {
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn path(&self) -> &Path {
        &self.dir
    }

    pub fn table(&mut self, name: &str, table: &Table) -> Result<(), CliError> {
        table.write(&self.dir.join(name))?;
        self.written.push(name.to_string());
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let w = BufWriter::new(File::create(self.dir.join(name))?);
        serde_json::to_writer_pretty(w, value)?;
        self.written.push(name.to_string());
        Ok(())
    }

    /// Writes `manifest.json` covering every file written so far.
    pub fn finish<C: Serialize>(
        self,
        scenario: &str,
        seed: u64,
        config: &C,
    ) -> Result<Manifest, CliError> {
        let config_sha256 = sha256_hex(&serde_json::to_vec(config)?);
        let mut files = BTreeMap::new();
        for name in &self.written {
            files.insert(name.clone(), file_digest(&self.dir.join(name))?);
        }
        let conventions = [
            (
                "units",
                "rates and detunings in rad/s, times in s, spectra in Hz",
            ),
            ("frame", "dynamics rotate at the cavity frequency"),
            ("inferred_frequency", "omega_f = omega_l - omega_beat"),
            (
                "fractional_difference",
                "d_f = (omega_f - omega_a) / omega_a",
            ),
            ("snr", "Lorentzian amplitude over fitted floor"),
            ("span", "Fourier span starts at the beginning of the pump"),
            (
                "cycle_time",
                "T_c labels samples for the Allan deviation; dead time is not simulated",
            ),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect();
        let manifest = Manifest {
            scenario: scenario.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            config_sha256,
            conventions,
            files,
        };
        let w = BufWriter::new(File::create(self.dir.join("manifest.json"))?);
        serde_json::to_writer_pretty(w, &manifest)?;
        Ok(manifest)
    }
}
