use std::path::{Path, PathBuf};

use anyhow::Context;
use log::{info, warn};
use matt_core::dataset::{load_metadata, FeatureStore};
use matt_core::dsp::{
    all_feature_set_names, feature_set_columns, feature_set_families, FeatureConfig, FeatureExtractor, FeatureFamily,
    StftConfig,
};
use matt_core::formats::{feature_cache_path, read_feature_cache, read_wav, write_feature_cache, write_mel};
use rayon::prelude::*;

use crate::config::{existing, pick, require, RunConfig};
use crate::{invalid, ExtractArgs};

const FULL_SET: &str = "1to9";

fn track_list(audio_dir: &Path, metadata: Option<&Path>) -> anyhow::Result<Vec<(String, PathBuf)>> {
    let mut tracks = Vec::new();
    if let Some(path) = metadata {
        let table = load_metadata(path).with_context(|| format!("reading {}", path.display()))?;
        for r in &table.records {
            let wav = audio_dir.join(format!("{}.wav", r.track_id));
            if !wav.exists() {
                return Err(invalid(format!("no audio for track {} ({})", r.track_id, wav.display())));
            }
            tracks.push((r.track_id.clone(), wav));
        }
    } else {
        let entries = std::fs::read_dir(audio_dir).with_context(|| format!("listing {}", audio_dir.display()))?;
        for entry in entries {
            let path = entry?.path();
            if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("wav")) {
                if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                    tracks.push((stem.to_string(), path.clone()));
                }
            }
        }
    }
    tracks.sort();
    Ok(tracks)
}

struct TrackPaths {
    summary: PathBuf,
    mel: PathBuf,
}

fn track_paths(feature_dir: &Path, id: &str) -> TrackPaths {
    TrackPaths {
        summary: feature_dir.join("tracks").join(format!("{id}.csv")),
        mel: feature_dir.join("mel").join(format!("{id}.mel")),
    }
}

/// Extracts one track unless both outputs exist, then returns its full
/// summary row as stored on disk.
fn process_track(
    extractor: &FeatureExtractor,
    feature_dir: &Path,
    id: &str,
    wav: &Path,
    force: bool,
) -> anyhow::Result<Vec<f32>> {
    let paths = track_paths(feature_dir, id);
    if force || !(paths.summary.exists() && paths.mel.exists()) {
        let signal = read_wav(wav)?;
        let features = extractor.extract(&signal).with_context(|| format!("track {id}"))?;
        let mut row = FeatureStore::new(feature_set_columns(FULL_SET)?);
        row.insert(id, features.feature_set(FULL_SET)?.into_iter().map(|v| v as f32).collect())?;
        write_mel(&paths.mel, &features.mel)?;
        write_feature_cache(&paths.summary, &row)?;
        info!("extracted {id}");
    } else {
        info!("reusing {id}");
    }
    let row = read_feature_cache(&paths.summary)?;
    row.get(id)
        .map(<[f32]>::to_vec)
        .ok_or_else(|| anyhow::anyhow!("{} does not contain track {id}", paths.summary.display()))
}

/// Column ranges of each family inside the full summary row.
fn family_offsets() -> Vec<(FeatureFamily, usize)> {
    let mut offset = 0;
    FeatureFamily::ALL
        .iter()
        .map(|&f| {
            let start = offset;
            offset += f.summary_len();
            (f, start)
        })
        .collect()
}

pub fn run(args: ExtractArgs, cfg: &RunConfig) -> anyhow::Result<()> {
    let audio_dir = existing(require(args.audio_dir, cfg.paths.audio_dir.clone(), "audio-dir")?, "audio dir")?;
    let feature_dir = require(args.feature_dir, cfg.paths.feature_dir.clone(), "feature-dir")?;
    let metadata = args
        .metadata
        .or(cfg.paths.metadata.clone())
        .map(|p| existing(p, "metadata"))
        .transpose()?;
    let f = &cfg.features;
    let defaults = FeatureConfig::default();
    let config = FeatureConfig {
        sample_rate_hz: pick(args.sample_rate, f.sample_rate, defaults.sample_rate_hz),
        stft: StftConfig {
            n_fft: pick(args.n_fft, f.n_fft, defaults.stft.n_fft),
            hop: pick(args.hop, f.hop, defaults.stft.hop),
            ..defaults.stft
        },
        n_mels: pick(args.n_mels, f.n_mels, defaults.n_mels),
        mel_frames: pick(args.mel_frames, f.mel_frames, defaults.mel_frames),
        ..defaults
    };
    let extractor = FeatureExtractor::new(config)?;
    let tracks = track_list(&audio_dir, metadata.as_deref())?;
    if tracks.is_empty() {
        return Err(invalid(format!("no .wav files in {}", audio_dir.display())));
    }
    let workers = pick(args.workers, f.workers, 0);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build()?;
    let results: Vec<_> = pool.install(|| {
        tracks
            .par_iter()
            .map(|(id, wav)| process_track(&extractor, &feature_dir, id, wav, args.force))
            .collect()
    });

    let mut rows = Vec::with_capacity(tracks.len());
    let mut failures = Vec::new();
    for ((id, _), result) in tracks.iter().zip(results) {
        match result {
            Ok(row) => rows.push((id, row)),
            Err(e) => {
                warn!("{id}: {e:#}");
                failures.push(format!("{id}: {e:#}"));
            }
        }
    }

    let offsets = family_offsets();
    for name in all_feature_set_names() {
        let mut store = FeatureStore::new(feature_set_columns(&name)?);
        let families = feature_set_families(&name)?;
        for (id, row) in &rows {
            let values = families
                .iter()
                .flat_map(|fam| {
                    let start = offsets.iter().find(|(f, _)| f == fam).expect("every family has an offset").1;
                    row[start..start + fam.summary_len()].iter().copied()
                })
                .collect();
            store.insert(id.as_str(), values)?;
        }
        write_feature_cache(&feature_cache_path(&feature_dir, &name), &store)?;
    }
    println!("extracted {} of {} tracks into {}", rows.len(), tracks.len(), feature_dir.display());
    if failures.is_empty() {
        Ok(())
    } else {
        anyhow::bail!("{} tracks failed:\n  {}", failures.len(), failures.join("\n  "))
    }
}
