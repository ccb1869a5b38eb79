//! Spectral shape descriptors and time-domain descriptors.

use super::{AudioSignal, DspError, FeatureFamily, FrameFeatureMatrix, MagnitudeSpectrogram};
use crate::numeric::Matrix;

pub const ROLLOFF_PERCENT: f64 = 0.85;
pub const CONTRAST_BANDS: usize = 6;
pub const CONTRAST_FMIN: f64 = 200.0;
pub const CONTRAST_QUANTILE: f64 = 0.02;

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDescriptors {
    pub centroid: FrameFeatureMatrix,
    pub bandwidth: FrameFeatureMatrix,
    pub contrast: FrameFeatureMatrix,
    pub rolloff: FrameFeatureMatrix,
}

fn row(values: Vec<f64>) -> Matrix {
    let n = values.len();
    Matrix::from_vec(1, n, values).expect("single row")
}

/// Magnitude-weighted mean frequency per frame; 0 for silent frames.
pub fn spectral_centroid(spec: &MagnitudeSpectrogram) -> Vec<f64> {
    let freqs = spec.bin_frequencies();
    (0..spec.n_frames())
        .map(|t| {
            let frame = spec.frame(t);
            let total: f64 = frame.iter().sum();
            if total <= 0.0 {
                return 0.0;
            }
            frame.iter().zip(&freqs).map(|(m, f)| m * f).sum::<f64>() / total
        })
        .collect()
}

/// Magnitude-weighted standard deviation of frequency around the centroid.
pub fn spectral_bandwidth(spec: &MagnitudeSpectrogram, centroid: &[f64]) -> Vec<f64> {
    let freqs = spec.bin_frequencies();
    (0..spec.n_frames())
        .map(|t| {
            let frame = spec.frame(t);
            let total: f64 = frame.iter().sum();
            if total <= 0.0 {
                return 0.0;
            }
            let var = frame
                .iter()
                .zip(&freqs)
                .map(|(m, f)| m * (f - centroid[t]).powi(2))
                .sum::<f64>()
                / total;
            var.sqrt()
        })
        .collect()
}

/// Lowest bin frequency whose cumulative magnitude reaches `percent` of the total.
pub fn spectral_rolloff(spec: &MagnitudeSpectrogram, percent: f64) -> Vec<f64> {
    (0..spec.n_frames())
        .map(|t| {
            let frame = spec.frame(t);
            let total: f64 = frame.iter().sum();
            if total <= 0.0 {
                return 0.0;
            }
            let target = percent * total;
            let mut acc = 0.0;
            for (k, m) in frame.iter().enumerate() {
                acc += m;
                if acc >= target {
                    return spec.bin_hz(k);
                }
            }
            spec.bin_hz(frame.len() - 1)
        })
        .collect()
}

/// Bin ranges of the octave sub-bands: `[0, fmin]`, `[fmin, 2 fmin]`, …, with
/// the last band running to Nyquist.
fn contrast_bands(spec: &MagnitudeSpectrogram, n_bands: usize, fmin: f64) -> Vec<Vec<usize>> {
    let freqs = spec.bin_frequencies();
    let mut edges = vec![0.0];
    edges.extend((0..=n_bands).map(|i| fmin * 2f64.powi(i as i32)));
    (0..=n_bands)
        .map(|b| {
            let (lo, hi) = (edges[b], edges[b + 1]);
            let mut idx: Vec<usize> = (0..freqs.len()).filter(|&k| freqs[k] >= lo && freqs[k] <= hi).collect();
            if idx.is_empty() {
                return idx;
            }
            if b > 0 && idx[0] > 0 {
                idx.insert(0, idx[0] - 1);
            }
            if b == n_bands {
                let last = *idx.last().expect("non-empty");
                idx.extend(last + 1..freqs.len());
            } else if idx.len() > 1 {
                idx.pop();
            }
            idx
        })
        .collect()
}

/// Per band: dB difference between the mean of the top and bottom
/// `quantile` fraction of magnitudes.
pub fn spectral_contrast(spec: &MagnitudeSpectrogram, n_bands: usize, fmin: f64, quantile: f64) -> Matrix {
    let bands = contrast_bands(spec, n_bands, fmin);
    let mut out = Matrix::zeros(n_bands + 1, spec.n_frames());
    let mut sorted = Vec::new();
    for t in 0..spec.n_frames() {
        let frame = spec.frame(t);
        for (b, idx) in bands.iter().enumerate() {
            if idx.is_empty() {
                continue;
            }
            sorted.clear();
            sorted.extend(idx.iter().map(|&k| frame[k]));
            sorted.sort_by(f64::total_cmp);
            let n = ((quantile * sorted.len() as f64).round() as usize).max(1);
            let valley = sorted[..n].iter().sum::<f64>() / n as f64;
            let peak = sorted[sorted.len() - n..].iter().sum::<f64>() / n as f64;
            let db = |x: f64| 10.0 * x.max(1e-10).log10();
            out.set(b, t, db(peak) - db(valley));
        }
    }
    out
}

pub fn spectral_descriptors(spec: &MagnitudeSpectrogram) -> Result<SpectralDescriptors, DspError> {
    let centroid = spectral_centroid(spec);
    let bandwidth = spectral_bandwidth(spec, &centroid);
    Ok(SpectralDescriptors {
        centroid: FrameFeatureMatrix::new(FeatureFamily::SpecCentroid, row(centroid))?,
        bandwidth: FrameFeatureMatrix::new(FeatureFamily::SpecBandwidth, row(bandwidth))?,
        contrast: FrameFeatureMatrix::new(
            FeatureFamily::SpecContrast,
            spectral_contrast(spec, CONTRAST_BANDS, CONTRAST_FMIN, CONTRAST_QUANTILE),
        )?,
        rolloff: FrameFeatureMatrix::new(FeatureFamily::SpecRolloff, row(spectral_rolloff(spec, ROLLOFF_PERCENT)))?,
    })
}

/// Frame start offsets without padding; a signal shorter than one frame is a
/// single frame of everything it has.
fn frame_starts(len: usize, frame: usize, hop: usize) -> Vec<usize> {
    if len <= frame {
        return vec![0];
    }
    (0..=(len - frame) / hop).map(|i| i * hop).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeDomainDescriptors {
    pub rms: FrameFeatureMatrix,
    pub zcr: FrameFeatureMatrix,
}

/// Per-frame RMS and zero-crossing rate (fraction of adjacent sample pairs
/// whose signs differ; zero counts as positive).
pub fn time_domain_descriptors(signal: &AudioSignal, frame: usize, hop: usize) -> Result<TimeDomainDescriptors, DspError> {
    if frame == 0 || hop == 0 {
        return Err(DspError::InvalidConfig("frame and hop must be positive".into()));
    }
    let x = signal.samples();
    let starts = frame_starts(x.len(), frame, hop);
    let mut rms = Vec::with_capacity(starts.len());
    let mut zcr = Vec::with_capacity(starts.len());
    for &s in &starts {
        let w = &x[s..(s + frame).min(x.len())];
        let energy: f64 = w.iter().map(|&v| (v as f64).powi(2)).sum();
        rms.push((energy / w.len() as f64).sqrt());
        let crossings = w.windows(2).filter(|p| (p[0] >= 0.0) != (p[1] >= 0.0)).count();
        zcr.push(if w.len() > 1 { crossings as f64 / (w.len() - 1) as f64 } else { 0.0 });
    }
    Ok(TimeDomainDescriptors {
        rms: FrameFeatureMatrix::new(FeatureFamily::Rms, row(rms))?,
        zcr: FrameFeatureMatrix::new(FeatureFamily::Zcr, row(zcr))?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::{stft, StftConfig};

    fn sine(freq: f64, amp: f64, len: usize) -> AudioSignal {
        let rate = 44_100u32;
        let s = (0..len)
            .map(|i| (amp * (2.0 * std::f64::consts::PI * freq * i as f64 / rate as f64).sin()) as f32)
            .collect();
        AudioSignal::new(s, rate).unwrap()
    }

    #[test]
    fn pure_tone_centroid_and_bandwidth() {
        let spec = stft(&sine(440.0, 0.5, 44_100), StftConfig::default()).unwrap();
        let bin = 44_100.0 / 2048.0;
        let c = spectral_centroid(&spec);
        let bw = spectral_bandwidth(&spec, &c);
        for t in 2..spec.n_frames() - 2 {
            assert!((c[t] - 440.0).abs() <= bin, "centroid {}", c[t]);
            assert!(bw[t] <= 2.0 * bin, "bandwidth {}", bw[t]);
        }
    }

    #[test]
    fn contrast_has_seven_bands() {
        let spec = stft(&sine(1000.0, 0.5, 20_000), StftConfig::default()).unwrap();
        let d = spectral_descriptors(&spec).unwrap();
        assert_eq!(d.contrast.values.rows(), 7);
        assert!(d.contrast.values.as_slice().iter().all(|v| v.is_finite() && *v >= 0.0));
    }

    #[test]
    fn silent_frames_follow_zero_convention() {
        let silent = AudioSignal::new(vec![0.0; 10_000], 44_100).unwrap();
        let spec = stft(&silent, StftConfig::default()).unwrap();
        let d = spectral_descriptors(&spec).unwrap();
        for m in [&d.centroid, &d.bandwidth, &d.rolloff, &d.contrast] {
            assert!(m.values.as_slice().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn rolloff_of_pure_tone_is_near_the_tone() {
        let spec = stft(&sine(3000.0, 0.5, 44_100), StftConfig::default()).unwrap();
        let r = spectral_rolloff(&spec, ROLLOFF_PERCENT);
        let bin = 44_100.0 / 2048.0;
        assert!((r[10] - 3000.0).abs() < 3.0 * bin, "rolloff {}", r[10]);
    }

    #[test]
    fn constant_signal_rms_and_zcr() {
        let s = AudioSignal::new(vec![0.5; 10_000], 44_100).unwrap();
        let d = time_domain_descriptors(&s, 2048, 512).unwrap();
        assert!(d.rms.values.as_slice().iter().all(|&v| (v - 0.5).abs() < 1e-12));
        assert!(d.zcr.values.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn alternating_signal_crosses_every_pair() {
        let s = AudioSignal::new((0..5000).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect(), 44_100).unwrap();
        let d = time_domain_descriptors(&s, 2048, 512).unwrap();
        assert!(d.zcr.values.as_slice().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn sine_rms_approaches_amplitude_over_root_two() {
        let amp = 0.8;
        let d = time_domain_descriptors(&sine(440.0, amp, 44_100), 2048, 512).unwrap();
        let target = amp / 2f64.sqrt();
        for &v in d.rms.values.as_slice() {
            assert!(((v - target) / target).abs() <= 0.01, "rms {v}");
        }
    }
}
