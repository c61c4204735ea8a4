//! On-disk container for recordings and model artifacts.
//!
//! A container is a directory with a `header.json` and a raw little-endian
//! float payload. For recordings the payload is `data.f32le` holding
//! `n_channels x n_samples` values in channel-major order. The format is
//! deliberately trivial so any language can parse it.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{ConditionLabel, EventMarker, Outcome, Recording, Robot};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct HeaderEvent {
    sample_index: usize,
    outcome: Outcome,
    robot: Robot,
}

#[derive(Serialize, Deserialize)]
struct RecordingHeader {
    format_version: u32,
    sample_rate_hz: f64,
    channel_names: Vec<String>,
    events: Vec<HeaderEvent>,
}

/// Write `rec` as a container directory, creating it if needed.
/// Data is stored as `f32`; a round-trip is bit-exact for values that are
/// exactly representable in `f32` (anything that was loaded from a
/// container is).
pub fn save_recording(rec: &Recording, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let header = RecordingHeader {
        format_version: FORMAT_VERSION,
        sample_rate_hz: rec.sample_rate_hz,
        channel_names: rec.channel_names.clone(),
        events: rec
            .events
            .iter()
            .map(|ev| HeaderEvent {
                sample_index: ev.sample_index,
                outcome: ev.condition.outcome,
                robot: ev.condition.robot,
            })
            .collect(),
    };
    let header_path = dir.join("header.json");
    let json = serde_json::to_string_pretty(&header)
        .map_err(|e| Error::Format(format!("header serialization: {e}")))?;
    fs::write(&header_path, json).map_err(|e| Error::io(&header_path, e))?;

    let floats: Vec<f32> = rec.data.iter().map(|&v| v as f32).collect();
    write_f32le(&dir.join("data.f32le"), &floats)
}

/// Load a recording container written by [`save_recording`].
pub fn load_recording(dir: &Path) -> Result<Recording> {
    let header_path = dir.join("header.json");
    let text = fs::read_to_string(&header_path).map_err(|e| Error::io(&header_path, e))?;
    let header: RecordingHeader =
        serde_json::from_str(&text).map_err(|e| Error::Format(format!("header.json: {e}")))?;
    if header.format_version != FORMAT_VERSION {
        return Err(Error::Format(format!(
            "unknown format version {}",
            header.format_version
        )));
    }
    if !(header.sample_rate_hz > 0.0) || !header.sample_rate_hz.is_finite() {
        return Err(Error::Format(format!(
            "invalid sample rate {}",
            header.sample_rate_hz
        )));
    }
    let n_channels = header.channel_names.len();
    if n_channels == 0 {
        return Err(Error::Format("header declares zero channels".into()));
    }

    let floats = read_f32le(&dir.join("data.f32le"))?;
    if floats.is_empty() || floats.len() % n_channels != 0 {
        return Err(Error::Format(format!(
            "payload size mismatch: {} floats are not a positive multiple of {} channels",
            floats.len(),
            n_channels
        )));
    }
    let n_samples = floats.len() / n_channels;
    let data = Array2::from_shape_vec(
        (n_channels, n_samples),
        floats.into_iter().map(f64::from).collect(),
    )
    .expect("shape checked above");

    let events = header
        .events
        .iter()
        .map(|ev| EventMarker {
            sample_index: ev.sample_index,
            condition: ConditionLabel {
                outcome: ev.outcome,
                robot: ev.robot,
            },
        })
        .collect();

    Recording::new(data, header.sample_rate_hz, header.channel_names, events)
        .map_err(|e| Error::Format(format!("invalid container contents: {e}")))
}

/// Raw little-endian `f32` payload writer.
pub fn write_f32le(path: &Path, values: &[f32]) -> Result<()> {
    let mut bytes = Vec::with_capacity(values.len() * 4);
    for v in values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&bytes).map_err(|e| Error::io(path, e))
}

/// Raw little-endian `f32` payload reader.
pub fn read_f32le(path: &Path) -> Result<Vec<f32>> {
    let mut bytes = Vec::new();
    fs::File::open(path)
        .map_err(|e| Error::io(path, e))?
        .read_to_end(&mut bytes)
        .map_err(|e| Error::io(path, e))?;
    if bytes.len() % 4 != 0 {
        return Err(Error::Format(format!(
            "payload size mismatch: {} bytes is not a multiple of 4",
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}

/// Raw little-endian `f64` payload writer (used by classical model files).
pub fn write_f64le(path: &Path, values: &[f64]) -> Result<()> {
    let mut bytes = Vec::with_capacity(values.len() * 8);
    for v in values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&bytes).map_err(|e| Error::io(path, e))
}

/// Raw little-endian `f64` payload reader.
pub fn read_f64le(path: &Path) -> Result<Vec<f64>> {
    let mut bytes = Vec::new();
    fs::File::open(path)
        .map_err(|e| Error::io(path, e))?
        .read_to_end(&mut bytes)
        .map_err(|e| Error::io(path, e))?;
    if bytes.len() % 8 != 0 {
        return Err(Error::Format(format!(
            "payload size mismatch: {} bytes is not a multiple of 8",
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| {
            f64::from_le_bytes([c[0], c[1], c[2], c[3], c[4], c[5], c[6], c[7]])
        })
        .collect())
}
