//! Pitch-class profiles (STFT, pseudo-CQT, CENS) and the tonal centroid.
//!
//! Pitch class 0 is C; A is 9.

use super::{DspError, FeatureFamily, FrameFeatureMatrix, MagnitudeSpectrogram};
use crate::numeric::Matrix;

/// Guard for every per-frame normalisation.
pub const NORM_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChromaVariant {
    Stft,
    Cqt,
    Cens,
}

/// MIDI note number of a frequency (A4 = 440 Hz = 69).
pub fn hz_to_midi(hz: f64) -> f64 {
    69.0 + 12.0 * (hz / 440.0).log2()
}

pub fn midi_to_hz(midi: f64) -> f64 {
    440.0 * 2f64.powf((midi - 69.0) / 12.0)
}

fn pitch_class(midi: f64) -> usize {
    (midi.round() as i64).rem_euclid(12) as usize
}

fn normalize_columns_max(m: &mut Matrix) {
    for t in 0..m.cols() {
        let max = (0..m.rows()).map(|r| m.get(r, t)).fold(0.0, f64::max);
        let d = max.max(NORM_EPS);
        for r in 0..m.rows() {
            m.set(r, t, m.get(r, t) / d);
        }
    }
}

fn normalize_columns_lp(m: &mut Matrix, p: i32) {
    for t in 0..m.cols() {
        let norm = match p {
            1 => (0..m.rows()).map(|r| m.get(r, t).abs()).sum::<f64>(),
            _ => (0..m.rows()).map(|r| m.get(r, t).powi(2)).sum::<f64>().sqrt(),
        };
        let d = norm.max(NORM_EPS);
        for r in 0..m.rows() {
            m.set(r, t, m.get(r, t) / d);
        }
    }
}

/// Folds the power of every non-DC bin onto its nearest pitch class and
/// max-normalises each frame.
pub fn chroma_stft(spec: &MagnitudeSpectrogram) -> FrameFeatureMatrix {
    let classes: Vec<Option<usize>> = (0..spec.n_bins())
        .map(|k| (k > 0).then(|| pitch_class(hz_to_midi(spec.bin_hz(k)))))
        .collect();
    let mut out = Matrix::zeros(12, spec.n_frames());
    for t in 0..spec.n_frames() {
        for (mag, pc) in spec.frame(t).iter().zip(&classes) {
            if let Some(pc) = *pc {
                let cur = out.get(pc, t);
                out.set(pc, t, cur + mag * mag);
            }
        }
    }
    normalize_columns_max(&mut out);
    FrameFeatureMatrix::new(FeatureFamily::ChromaStft, out).expect("12 rows")
}

/// Semitone-spaced triangular filters over the linear-frequency STFT bins,
/// approximating a constant-Q analysis.
#[derive(Debug, Clone, PartialEq)]
pub struct CqtFilterbank {
    /// Per note: pitch class and sparse (bin, weight) taps.
    notes: Vec<(usize, Vec<(usize, f64)>)>,
}

/// C1, the lowest analysed note.
pub const CQT_MIN_MIDI: i64 = 24;
pub const CQT_N_NOTES: i64 = 84;

impl CqtFilterbank {
    pub fn new(rate: u32, n_fft: usize) -> Self {
        let n_bins = n_fft / 2 + 1;
        let bin_hz = |k: usize| k as f64 * rate as f64 / n_fft as f64;
        let nyquist = rate as f64 / 2.0;
        let notes = (CQT_MIN_MIDI..CQT_MIN_MIDI + CQT_N_NOTES)
            .filter(|&n| midi_to_hz(n as f64 + 1.0) <= nyquist)
            .map(|n| {
                let (lo, c, hi) = (
                    midi_to_hz(n as f64 - 1.0),
                    midi_to_hz(n as f64),
                    midi_to_hz(n as f64 + 1.0),
                );
                let taps = (1..n_bins)
                    .filter_map(|k| {
                        let f = bin_hz(k);
                        let w = ((f - lo) / (c - lo)).min((hi - f) / (hi - c));
                        (w > 0.0).then_some((k, w))
                    })
                    .collect();
                ((n.rem_euclid(12)) as usize, taps)
            })
            .collect();
        Self { notes }
    }

    pub fn n_notes(&self) -> usize {
        self.notes.len()
    }

    pub fn chroma(&self, spec: &MagnitudeSpectrogram) -> FrameFeatureMatrix {
        let mut out = Matrix::zeros(12, spec.n_frames());
        for t in 0..spec.n_frames() {
            let frame = spec.frame(t);
            for (pc, taps) in &self.notes {
                let energy: f64 = taps.iter().map(|&(k, w)| w * frame[k]).sum();
                let cur = out.get(*pc, t);
                out.set(*pc, t, cur + energy);
            }
        }
        normalize_columns_max(&mut out);
        FrameFeatureMatrix::new(FeatureFamily::ChromaCqt, out).expect("12 rows")
    }
}

pub const CENS_SMOOTHING: usize = 41;

/// CENS from a CQT chroma: L1 normalise, quantise, smooth over time, L2 normalise.
pub fn chroma_cens(cqt_chroma: &FrameFeatureMatrix, window: usize) -> FrameFeatureMatrix {
    let mut c = cqt_chroma.values.clone();
    normalize_columns_lp(&mut c, 1);
    for v in c.as_mut_slice() {
        *v = [0.4, 0.2, 0.1, 0.05]
            .iter()
            .filter(|&&step| *v > step)
            .count() as f64
            * 0.25;
    }
    let n = c.cols();
    let half = window / 2;
    let mut smooth = Matrix::zeros(12, n);
    for r in 0..12 {
        let row = c.row(r);
        let mut prefix = vec![0.0; n + 1];
        for t in 0..n {
            prefix[t + 1] = prefix[t] + row[t];
        }
        for t in 0..n {
            let lo = t.saturating_sub(half);
            let hi = (t + window - half).min(n);
            // zero padding outside the signal: divide by the full window
            smooth.set(r, t, (prefix[hi] - prefix[lo]) / window as f64);
        }
    }
    normalize_columns_lp(&mut smooth, 2);
    FrameFeatureMatrix::new(FeatureFamily::ChromaCens, smooth).expect("12 rows")
}

pub fn chroma_features(
    spec: &MagnitudeSpectrogram,
    variant: ChromaVariant,
    cqt: &CqtFilterbank,
) -> FrameFeatureMatrix {
    match variant {
        ChromaVariant::Stft => chroma_stft(spec),
        ChromaVariant::Cqt => cqt.chroma(spec),
        ChromaVariant::Cens => chroma_cens(&cqt.chroma(spec), CENS_SMOOTHING),
    }
}

/// Radii of the fifths, minor-thirds and major-thirds circles.
pub const TONNETZ_RADII: [f64; 3] = [1.0, 1.0, 0.5];

/// The 6×12 tonal-centroid projection.
pub fn tonnetz_transform() -> Matrix {
    use std::f64::consts::PI;
    let angles = [7.0 * PI / 6.0, 3.0 * PI / 2.0, 2.0 * PI / 3.0];
    let mut phi = Matrix::zeros(6, 12);
    for pc in 0..12 {
        for (i, (&a, &r)) in angles.iter().zip(&TONNETZ_RADII).enumerate() {
            phi.set(2 * i, pc, r * (pc as f64 * a).sin());
            phi.set(2 * i + 1, pc, r * (pc as f64 * a).cos());
        }
    }
    phi
}

pub fn tonnetz(chroma: &FrameFeatureMatrix) -> Result<FrameFeatureMatrix, DspError> {
    if chroma.values.rows() != 12 {
        return Err(DspError::InvalidConfig(format!(
            "tonnetz needs a 12-row chroma, got {} rows",
            chroma.values.rows()
        )));
    }
    let mut c = chroma.values.clone();
    normalize_columns_lp(&mut c, 1);
    let phi = tonnetz_transform();
    let mut out = Matrix::zeros(6, c.cols());
    let mut column = [0.0; 12];
    for t in 0..c.cols() {
        for (r, v) in column.iter_mut().enumerate() {
            *v = c.get(r, t);
        }
        for (i, v) in phi.matvec(&column)?.into_iter().enumerate() {
            out.set(i, t, v);
        }
    }
    FrameFeatureMatrix::new(FeatureFamily::Tonnetz, out)
}
