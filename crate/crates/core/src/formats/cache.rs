use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::{write_atomic, FormatError};
use crate::dataset::FeatureStore;
use crate::dsp::MelSpectrogram;

pub const MEL_MAGIC: &[u8; 4] = b"MELF";
pub const MEL_VERSION: u32 = 1;

/// `<dir>/<set>.csv`.
pub fn feature_cache_path(dir: &Path, feature_set: &str) -> PathBuf {
    dir.join(format!("{feature_set}.csv"))
}

/// Header `track_id,<columns>`, one row per track in track-id order, values
/// with nine significant digits.
pub fn write_feature_cache(path: &Path, store: &FeatureStore) -> Result<(), FormatError> {
    let mut out = String::from("track_id");
    for c in store.columns() {
        out.push(',');
        out.push_str(c);
    }
    out.push('\n');
    for (id, values) in store.iter() {
        out.push_str(id);
        for v in values {
            write!(out, ",{v:.8e}").expect("writing to a String");
        }
        out.push('\n');
    }
    write_atomic(path, out.as_bytes())
}

pub fn read_feature_cache(path: &Path) -> Result<FeatureStore, FormatError> {
    let text = std::fs::read_to_string(path).map_err(|e| FormatError::io(path, e))?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| FormatError::malformed(path, "empty feature cache"))?;
    let mut fields = header.trim_start_matches('\u{feff}').split(',');
    if fields.next() != Some("track_id") {
        return Err(FormatError::malformed(path, "header must start with track_id"));
    }
    let mut store = FeatureStore::new(fields.map(str::to_string).collect());
    for (n, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let mut fields = line.split(',');
        let id = fields.next().unwrap_or_default();
        let values = fields
            .map(|f| f.trim().parse::<f32>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| FormatError::malformed(path, format!("line {}: {e}", n + 2)))?;
        store.insert(id, values)?;
    }
    Ok(store)
}

pub fn write_mel(path: &Path, mel: &MelSpectrogram) -> Result<(), FormatError> {
    let mut bytes = Vec::with_capacity(16 + 4 * mel.values.len());
    bytes.extend_from_slice(MEL_MAGIC);
    bytes.extend_from_slice(&MEL_VERSION.to_le_bytes());
    bytes.extend_from_slice(&(mel.n_mels as u32).to_le_bytes());
    bytes.extend_from_slice(&(mel.n_frames as u32).to_le_bytes());
    for v in &mel.values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    write_atomic(path, &bytes)
}

/// Reads a mel cache file. Band edges are not stored and come back as zero.
pub fn read_mel(path: &Path) -> Result<MelSpectrogram, FormatError> {
    let bytes = std::fs::read(path).map_err(|e| FormatError::io(path, e))?;
    if bytes.len() < 16 || &bytes[..4] != MEL_MAGIC {
        return Err(FormatError::malformed(path, "not a mel cache file"));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().expect("4 bytes"));
    if word(4) != MEL_VERSION {
        return Err(FormatError::malformed(path, format!("unsupported version {}", word(4))));
    }
    let (n_mels, n_frames) = (word(8) as usize, word(12) as usize);
    let body = &bytes[16..];
    if body.len() != 4 * n_mels * n_frames {
        return Err(FormatError::malformed(
            path,
            format!("{n_mels}x{n_frames} needs {} bytes, found {}", 4 * n_mels * n_frames, body.len()),
        ));
    }
    let values = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
        .collect();
    Ok(MelSpectrogram {
        n_mels,
        n_frames,
        values,
        f_min: 0.0,
        f_max: 0.0,
    })
}
