//! On-disk formats: field dumps, checkpoints and dual states.
//!
//! A field dump is a JSON sidecar plus a raw little-endian payload of `(re, im)`
//! float64 pairs in row-major order. Every write goes to a temporary file first
//! and is renamed into place.

use crate::dual::DualState;
use crate::grid::{Domain, Field, GridError, GridSpec};
use crate::solver::{ConvergedRun, SolverCheckpoint};
use num_complex::Complex64;
use serde::{de::DeserializeOwned, Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fs;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IoError {
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("{path}: malformed content: {message}")]
    Format { path: PathBuf, message: String },
    #[error("{path}: checksum mismatch")]
    ChecksumMismatch { path: PathBuf },
    #[error(transparent)]
    Grid(#[from] GridError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |e| IoError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RealnessTag {
    Real,
    Complex,
}

/// Sidecar describing a field payload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldHeader {
    pub dim: usize,
    pub half_width: f64,
    pub points_per_axis: usize,
    pub realness_tag: RealnessTag,
    /// Payload path relative to the sidecar's directory.
    pub payload_file: String,
    #[serde(default = "space")]
    pub domain: Domain,
    pub sha256: String,
}

fn space() -> Domain {
    Domain::Space
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes `bytes` to `path` through a sibling temporary file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes).map_err(io_err(&tmp))?;
    fs::rename(&tmp, path).map_err(io_err(path))
}

fn encode(values: &[Complex64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(values.len() * 16);
    for v in values {
        out.extend_from_slice(&v.re.to_le_bytes());
        out.extend_from_slice(&v.im.to_le_bytes());
    }
    out
}

fn decode(bytes: &[u8]) -> Vec<Complex64> {
    bytes
        .chunks_exact(16)
        .map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().expect("8 bytes"));
            let im = f64::from_le_bytes(c[8..].try_into().expect("8 bytes"));
            Complex64::new(re, im)
        })
        .collect()
}

fn payload_name(sidecar: &Path) -> String {
    let stem = sidecar
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("field");
    format!("{stem}.bin")
}

/// Writes `<sidecar>` and its payload next to it. Returns the header.
pub fn write_field(sidecar: &Path, field: &Field) -> Result<FieldHeader, IoError> {
    let grid = field.grid();
    let payload = encode(field.values());
    let name = payload_name(sidecar);
    let dir = sidecar.parent().unwrap_or(Path::new(""));
    write_atomic(&dir.join(&name), &payload)?;
    let header = FieldHeader {
        dim: grid.dim(),
        half_width: grid.half_width(),
        points_per_axis: grid.points_per_axis(),
        realness_tag: if field.is_real() {
            RealnessTag::Real
        } else {
            RealnessTag::Complex
        },
        payload_file: name,
        domain: field.domain(),
        sha256: sha256_hex(&payload),
    };
    let text = serde_json::to_vec_pretty(&header).expect("header serializes");
    write_atomic(sidecar, &text)?;
    Ok(header)
}

fn field_from(dir: &Path, header: &FieldHeader) -> Result<Field, IoError> {
    let path = dir.join(&header.payload_file);
    let bytes = fs::read(&path).map_err(io_err(&path))?;
    if sha256_hex(&bytes) != header.sha256 {
        return Err(IoError::ChecksumMismatch { path });
    }
    let grid = GridSpec::new(header.dim, header.half_width, header.points_per_axis)?;
    if bytes.len() != 16 * grid.len() {
        return Err(IoError::Format {
            path,
            message: format!("expected {} bytes, got {}", 16 * grid.len(), bytes.len()),
        });
    }
    Ok(Field::from_parts(
        grid,
        header.domain,
        decode(&bytes),
        header.realness_tag == RealnessTag::Real,
    )?)
}

pub fn read_field(sidecar: &Path) -> Result<Field, IoError> {
    let text = fs::read(sidecar).map_err(io_err(sidecar))?;
    let header: FieldHeader = serde_json::from_slice(&text).map_err(|e| IoError::Format {
        path: sidecar.to_path_buf(),
        message: e.to_string(),
    })?;
    field_from(sidecar.parent().unwrap_or(Path::new("")), &header)
}

/// JSON body with a checksum of its canonical serialization.
#[derive(Serialize, Deserialize)]
struct Sealed<T> {
    sha256: String,
    body: T,
}

fn write_sealed<T: Serialize>(path: &Path, body: &T) -> Result<(), IoError> {
    let canonical = serde_json::to_vec(body).expect("body serializes");
    let sealed = Sealed {
        sha256: sha256_hex(&canonical),
        body,
    };
    write_atomic(
        path,
        &serde_json::to_vec_pretty(&sealed).expect("body serializes"),
    )
}

/// Any unreadable or altered content is reported as a checksum mismatch.
fn read_sealed<T: Serialize + DeserializeOwned>(path: &Path) -> Result<T, IoError> {
    let text = fs::read(path).map_err(io_err(path))?;
    let mismatch = || IoError::ChecksumMismatch {
        path: path.to_path_buf(),
    };
    let sealed: Sealed<T> = serde_json::from_slice(&text).map_err(|_| mismatch())?;
    let canonical = serde_json::to_vec(&sealed.body).expect("body serializes");
    if sha256_hex(&canonical) != sealed.sha256 {
        return Err(mismatch());
    }
    Ok(sealed.body)
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("state");
    path.with_file_name(format!("{stem}.{suffix}.json"))
}

/// A float stored as a JSON number when finite and as `"nan"`, `"inf"` or
/// `"-inf"` otherwise, so sentinels survive a round trip.
#[derive(Debug, Clone, Copy)]
struct Scalar(f64);

impl Serialize for Scalar {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let x = self.0;
        if x.is_finite() {
            s.serialize_f64(x)
        } else if x.is_nan() {
            s.serialize_str("nan")
        } else if x > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }
}

impl<'de> Deserialize<'de> for Scalar {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Number(f64),
            Text(String),
        }
        match Repr::deserialize(d)? {
            Repr::Number(x) => Ok(Scalar(x)),
            Repr::Text(t) => match t.as_str() {
                "nan" => Ok(Scalar(f64::NAN)),
                "inf" => Ok(Scalar(f64::INFINITY)),
                "-inf" => Ok(Scalar(f64::NEG_INFINITY)),
                other => Err(serde::de::Error::custom(format!("not a float: {other}"))),
            },
        }
    }
}

#[derive(Serialize, Deserialize)]
struct BestRecord {
    restart: usize,
    j_value: f64,
    crit_residual: f64,
    iterations: usize,
    shift: Vec<i64>,
    v: FieldHeader,
}

#[derive(Serialize, Deserialize)]
struct CheckpointBody {
    config_hash: String,
    seed: u64,
    restart: usize,
    iteration: usize,
    j_value: Scalar,
    crit_residual: Scalar,
    shift: Vec<i64>,
    rayleigh_prev: Scalar,
    rayleigh_steps: usize,
    rayleigh_decreases: usize,
    levels: Vec<f64>,
    w: FieldHeader,
    best: Option<BestRecord>,
}

/// Writes a checkpoint header at `path` with field dumps beside it. The header is
/// written last, so an interrupted save leaves the previous checkpoint readable.
pub fn save_checkpoint(
    path: &Path,
    ck: &SolverCheckpoint,
    config_hash: &str,
) -> Result<(), IoError> {
    let w = write_field(&sibling(path, "w"), &ck.w)?;
    let best = match &ck.best {
        Some(run) => Some(BestRecord {
            restart: run.restart,
            j_value: run.j_value,
            crit_residual: run.crit_residual,
            iterations: run.iterations,
            shift: run.shift.clone(),
            v: write_field(&sibling(path, "best"), &run.v)?,
        }),
        None => None,
    };
    let body = CheckpointBody {
        config_hash: config_hash.to_string(),
        seed: ck.seed,
        restart: ck.restart,
        iteration: ck.iteration,
        j_value: Scalar(ck.j_value),
        crit_residual: Scalar(ck.crit_residual),
        shift: ck.shift.clone(),
        rayleigh_prev: Scalar(ck.rayleigh_prev),
        rayleigh_steps: ck.rayleigh_steps,
        rayleigh_decreases: ck.rayleigh_decreases,
        levels: ck.levels.clone(),
        w,
        best,
    };
    write_sealed(path, &body)
}

/// Loads a checkpoint and the hash of the configuration that produced it.
pub fn load_checkpoint(path: &Path) -> Result<(SolverCheckpoint, String), IoError> {
    let body: CheckpointBody = read_sealed(path)?;
    let dir = path.parent().unwrap_or(Path::new(""));
    let best = match body.best {
        Some(b) => Some(ConvergedRun {
            restart: b.restart,
            v: field_from(dir, &b.v)?,
            j_value: b.j_value,
            crit_residual: b.crit_residual,
            iterations: b.iterations,
            shift: b.shift,
        }),
        None => None,
    };
    let ck = SolverCheckpoint {
        seed: body.seed,
        restart: body.restart,
        iteration: body.iteration,
        w: field_from(dir, &body.w)?,
        j_value: body.j_value.0,
        crit_residual: body.crit_residual.0,
        shift: body.shift,
        rayleigh_prev: body.rayleigh_prev.0,
        rayleigh_steps: body.rayleigh_steps,
        rayleigh_decreases: body.rayleigh_decreases,
        levels: body.levels,
        best,
    };
    Ok((ck, body.config_hash))
}

#[derive(Serialize, Deserialize)]
struct StateBody {
    j_value: Scalar,
    rayleigh: Scalar,
    crit_residual: Scalar,
    iteration: usize,
    v: FieldHeader,
}

pub fn save_state(path: &Path, state: &DualState) -> Result<(), IoError> {
    let v = write_field(&sibling(path, "v"), &state.v)?;
    let body = StateBody {
        j_value: Scalar(state.j_value),
        rayleigh: Scalar(state.rayleigh),
        crit_residual: Scalar(state.crit_residual),
        iteration: state.iteration,
        v,
    };
    write_sealed(path, &body)
}

pub fn load_state(path: &Path) -> Result<DualState, IoError> {
    let body: StateBody = read_sealed(path)?;
    let dir = path.parent().unwrap_or(Path::new(""));
    Ok(DualState {
        v: field_from(dir, &body.v)?,
        j_value: body.j_value.0,
        rayleigh: body.rayleigh.0,
        crit_residual: body.crit_residual.0,
        iteration: body.iteration,
    })
}
