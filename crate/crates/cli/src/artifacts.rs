//! Output directory ownership, CSV field files, state files and the
//! manifest.

use std::collections::BTreeMap;
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use linbayes::fem::Mesh;
use nalgebra::DVector;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const LOCK_FILE: &str = ".linbayes.lock";

/// Fixed-width scientific notation with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Exclusive handle on an output directory, released on drop.
#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    lock: PathBuf,
}

impl OutputDir {
    pub fn acquire(root: &Path) -> CliResult<Self> {
        fs::create_dir_all(root).map_err(|e| CliError::io(root, e))?;
        let lock = root.join(LOCK_FILE);
        let mut file = OpenOptions::new().write(true).create_new(true).open(&lock).map_err(|e| {
            if e.kind() == std::io::ErrorKind::AlreadyExists {
                CliError::io(
                    &lock,
                    std::io::Error::new(
                        e.kind(),
                        "output directory is in use by another process (remove the lock file if that process is gone)",
                    ),
                )
            } else {
                CliError::io(&lock, e)
            }
        })?;
        writeln!(file, "{}", std::process::id()).map_err(|e| CliError::io(&lock, e))?;
        Ok(Self {
            root: root.to_path_buf(),
            lock,
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    /// Writes `bytes` to `name` and records its checksum.
    pub fn write(&self, manifest: &mut Manifest, name: &str, bytes: &[u8]) -> CliResult<()> {
        let path = self.path(name);
        fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
        manifest.files.insert(
            name.to_string(),
            FileRecord {
                sha256: sha256_hex(bytes),
                bytes: bytes.len() as u64,
            },
        );
        Ok(())
    }

    pub fn write_json<T: Serialize>(&self, manifest: &mut Manifest, name: &str, value: &T) -> CliResult<()> {
        let mut bytes = serde_json::to_vec_pretty(value).expect("state serializes");
        bytes.push(b'\n');
        self.write(manifest, name, &bytes)
    }

    /// Reads a state file, or reports the stage that produces it.
    pub fn read_state<T: DeserializeOwned>(&self, name: &str, producer: &str) -> CliResult<T> {
        let path = self.path(name);
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(CliError::missing(
                    producer,
                    format!("{} not found, run `{producer}` first", path.display()),
                ))
            }
            Err(e) => return Err(CliError::io(&path, e)),
        };
        serde_json::from_str(&text).map_err(|e| {
            CliError::missing(producer, format!("{} is unreadable ({e}), rerun `{producer}`", path.display()))
        })
    }

    pub fn load_manifest(&self) -> CliResult<Option<Manifest>> {
        let path = self.path(MANIFEST_FILE);
        match fs::read_to_string(&path) {
            Ok(text) => Ok(serde_json::from_str(&text).ok()),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(CliError::io(&path, e)),
        }
    }

    pub fn save_manifest(&self, manifest: &Manifest) -> CliResult<()> {
        let path = self.path(MANIFEST_FILE);
        let mut bytes = serde_json::to_vec_pretty(manifest).expect("manifest serializes");
        bytes.push(b'\n');
        fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))
    }
}

impl Drop for OutputDir {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.lock);
    }
}

fn csv_bytes(header: &[String], rows: impl Iterator<Item = Vec<String>>) -> Vec<u8> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::CRLF)
        .from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(&row).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

fn coord_header(mesh: &Mesh) -> Vec<String> {
    ["x", "y", "z"][..mesh.dim()].iter().map(|s| s.to_string()).collect()
}

/// Nodal fields as columns after the node coordinates, one row per node
/// in lexicographic order.
pub fn field_csv(mesh: &Mesh, columns: &[(&str, &DVector<f64>)]) -> Vec<u8> {
    let mut header = coord_header(mesh);
    header.extend(columns.iter().map(|(name, _)| name.to_string()));
    let rows = (0..mesh.num_nodes()).map(|i| {
        let mut row: Vec<String> = mesh.node(i).iter().map(|&x| fmt_f64(x)).collect();
        row.extend(columns.iter().map(|(_, v)| fmt_f64(v[i])));
        row
    });
    csv_bytes(&header, rows)
}

pub fn spectrum_csv(lambdas: &[f64]) -> Vec<u8> {
    let rows = lambdas
        .iter()
        .enumerate()
        .map(|(i, l)| vec![(i + 1).to_string(), fmt_f64(*l)]);
    csv_bytes(&["index".into(), "lambda".into()], rows)
}

pub fn observations_csv(observed: &DVector<f64>, predicted: &DVector<f64>) -> Vec<u8> {
    let rows = (0..observed.len()).map(|i| vec![i.to_string(), fmt_f64(observed[i]), fmt_f64(predicted[i])]);
    csv_bytes(&["index".into(), "observed".into(), "predicted_map".into()], rows)
}

pub fn seismogram_csv(traces: &[(f64, usize, f64)]) -> Vec<u8> {
    let rows = traces
        .iter()
        .map(|(t, r, v)| vec![fmt_f64(*t), r.to_string(), fmt_f64(*v)]);
    csv_bytes(&["time".into(), "receiver_id".into(), "value".into()], rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileRecord {
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub status: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub stage: String,
    pub exit_code: i32,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapSummary {
    pub converged: bool,
    pub termination: String,
    pub newton_iters: usize,
    pub cg_iters_total: usize,
    pub objective_history: Vec<f64>,
    pub gradnorm_history: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSummary {
    pub lambdas: Vec<f64>,
    pub residual_norms: Vec<f64>,
    pub discarded: Vec<f64>,
    pub rank: usize,
    pub rank_limited: bool,
    pub breakdown: bool,
    pub iterations: usize,
    pub truncation_estimate: f64,
    /// False when the Krylov space was exhausted and the tail is exact.
    pub truncation_is_estimate: bool,
    pub diagnostic: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub tool: String,
    pub tool_version: String,
    pub config_sha256: String,
    pub config: serde_json::Value,
    pub map_gradnorm_reduction: Option<f64>,
    pub map: Option<MapSummary>,
    pub spectrum: Option<SpectrumSummary>,
    pub stages: BTreeMap<String, StageRecord>,
    pub files: BTreeMap<String, FileRecord>,
    pub failure: Option<Failure>,
}

impl Manifest {
    pub fn new(config: serde_json::Value, config_sha256: String) -> Self {
        Self {
            schema_version: MANIFEST_SCHEMA_VERSION,
            tool: env!("CARGO_PKG_NAME").to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config_sha256,
            config,
            map_gradnorm_reduction: None,
            map: None,
            spectrum: None,
            stages: BTreeMap::new(),
            files: BTreeMap::new(),
            failure: None,
        }
    }
}
