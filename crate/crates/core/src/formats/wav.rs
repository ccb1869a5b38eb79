use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use super::FormatError;
use crate::dsp::{downmix_and_validate, AudioSignal};

/// Reads a 16-bit integer or 32-bit float WAV file with one or two channels,
/// averaging stereo to mono.
pub fn read_wav(path: &Path) -> Result<AudioSignal, FormatError> {
    let bad = |reason: String| FormatError::malformed(path, reason);
    let mut reader = WavReader::open(path).map_err(|e| match e {
        hound::Error::IoError(io) => FormatError::io(path, io),
        other => bad(other.to_string()),
    })?;
    let spec = reader.spec();
    if !(1..=2).contains(&spec.channels) {
        return Err(bad(format!("{} channels; only mono and stereo are supported", spec.channels)));
    }
    let interleaved: Vec<f32> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Int, 16) => reader
            .samples::<i16>()
            .map(|s| s.map(|v| v as f32 / 32768.0))
            .collect::<Result<_, _>>(),
        (SampleFormat::Float, 32) => reader.samples::<f32>().collect::<Result<_, _>>(),
        (fmt, bits) => return Err(bad(format!("unsupported sample format {fmt:?} {bits}-bit"))),
    }
    .map_err(|e| bad(e.to_string()))?;
    let n_ch = spec.channels as usize;
    let channels: Vec<Vec<f32>> = (0..n_ch)
        .map(|c| interleaved.iter().skip(c).step_by(n_ch).copied().collect())
        .collect();
    Ok(downmix_and_validate(&channels, spec.sample_rate)?)
}

/// Writes a mono 32-bit float WAV file.
pub fn write_wav(path: &Path, signal: &AudioSignal) -> Result<(), FormatError> {
    let spec = WavSpec {
        channels: 1,
        sample_rate: signal.sample_rate_hz(),
        bits_per_sample: 32,
        sample_format: SampleFormat::Float,
    };
    let to_err = |e: hound::Error| match e {
        hound::Error::IoError(io) => FormatError::io(path, io),
        other => FormatError::malformed(path, other.to_string()),
    };
    let mut writer = WavWriter::create(path, spec).map_err(to_err)?;
    for &s in signal.samples() {
        writer.write_sample(s).map_err(to_err)?;
    }
    writer.finalize().map_err(to_err)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.wav");
        let s = AudioSignal::new(vec![0.0, 0.25, -0.5, 1.0], 22_050).unwrap();
        write_wav(&path, &s).unwrap();
        assert_eq!(read_wav(&path).unwrap(), s);
    }

    #[test]
    fn stereo_int16_is_averaged() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.wav");
        let spec = WavSpec {
            channels: 2,
            sample_rate: 8000,
            bits_per_sample: 16,
            sample_format: SampleFormat::Int,
        };
        let mut w = WavWriter::create(&path, spec).unwrap();
        for (l, r) in [(16384i16, 0i16), (-16384, -16384)] {
            w.write_sample(l).unwrap();
            w.write_sample(r).unwrap();
        }
        w.finalize().unwrap();
        let s = read_wav(&path).unwrap();
        assert_eq!(s.samples(), &[0.25, -0.5]);
        assert_eq!(s.sample_rate_hz(), 8000);
    }

    #[test]
    fn garbage_is_malformed() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.wav");
        std::fs::write(&path, b"not a wav file at all").unwrap();
        assert!(matches!(read_wav(&path), Err(FormatError::Malformed { .. })));
    }
}
