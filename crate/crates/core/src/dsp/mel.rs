//! Slaney mel filterbank, log-mel spectrogram and MFCC.

use super::{DspError, FeatureFamily, FrameFeatureMatrix, MagnitudeSpectrogram};
use crate::numeric::Matrix;

const F_SP: f64 = 200.0 / 3.0;
const MIN_LOG_HZ: f64 = 1000.0;
const MIN_LOG_MEL: f64 = MIN_LOG_HZ / F_SP;

fn log_step() -> f64 {
    6.4f64.ln() / 27.0
}

/// Slaney mel scale: linear below 1 kHz, logarithmic above.
pub fn hz_to_mel(hz: f64) -> f64 {
    if hz < MIN_LOG_HZ {
        hz / F_SP
    } else {
        MIN_LOG_MEL + (hz / MIN_LOG_HZ).ln() / log_step()
    }
}

pub fn mel_to_hz(mel: f64) -> f64 {
    if mel < MIN_LOG_MEL {
        mel * F_SP
    } else {
        MIN_LOG_HZ * (log_step() * (mel - MIN_LOG_MEL)).exp()
    }
}

/// `n_mels + 2` edge frequencies equally spaced on the mel scale.
fn mel_edges(n_mels: usize, f_min: f64, f_max: f64) -> Vec<f64> {
    let (lo, hi) = (hz_to_mel(f_min), hz_to_mel(f_max));
    (0..n_mels + 2)
        .map(|i| mel_to_hz(lo + (hi - lo) * i as f64 / (n_mels + 1) as f64))
        .collect()
}

/// Area-normalised triangular filters, `n_mels × (n_fft/2 + 1)`.
pub fn mel_filterbank(n_mels: usize, f_min: f64, f_max: f64, rate: u32, n_fft: usize) -> Result<Matrix, DspError> {
    let nyquist = rate as f64 / 2.0;
    if f_max.is_nan() || f_max > nyquist {
        return Err(DspError::InvalidBand(format!("f_max {f_max} Hz exceeds Nyquist {nyquist} Hz")));
    }
    if !(0.0 <= f_min && f_min < f_max) {
        return Err(DspError::InvalidBand(format!("need 0 <= f_min < f_max, got {f_min}..{f_max}")));
    }
    if n_mels < 2 {
        return Err(DspError::InvalidConfig("need at least two mel bands".into()));
    }
    let n_bins = n_fft / 2 + 1;
    let bin_hz: Vec<f64> = (0..n_bins).map(|k| k as f64 * rate as f64 / n_fft as f64).collect();
    let edges = mel_edges(n_mels, f_min, f_max);
    let mut fb = Matrix::zeros(n_mels, n_bins);
    for m in 0..n_mels {
        let (left, centre, right) = (edges[m], edges[m + 1], edges[m + 2]);
        let norm = 2.0 / (right - left);
        for (k, &f) in bin_hz.iter().enumerate() {
            let rising = (f - left) / (centre - left);
            let falling = (right - f) / (right - centre);
            let w = rising.min(falling).max(0.0);
            if w > 0.0 {
                fb.set(m, k, w * norm);
            }
        }
        if fb.row(m).iter().all(|&w| w == 0.0) {
            return Err(DspError::InvalidConfig(format!(
                "mel filter {m} ({left:.1}-{right:.1} Hz) covers no FFT bin; use fewer mels or a longer FFT"
            )));
        }
    }
    Ok(fb)
}

/// Centre frequencies of the filters built by [`mel_filterbank`].
pub fn mel_centres(n_mels: usize, f_min: f64, f_max: f64) -> Vec<f64> {
    mel_edges(n_mels, f_min, f_max)[1..=n_mels].to_vec()
}

/// `10·log10(max(power, 1e-10))`, clamped below at `floor_db`.
pub fn power_to_db(power: f64, floor_db: f64) -> f64 {
    (10.0 * power.max(1e-10).log10()).max(floor_db)
}

/// Log-power mel energies, `n_mels × n_frames`, without any cropping.
pub fn log_mel_frames(spec: &MagnitudeSpectrogram, filterbank: &Matrix, floor_db: f64) -> Matrix {
    let n_mels = filterbank.rows();
    let mut out = Matrix::zeros(n_mels, spec.n_frames());
    let mut power = vec![0.0; spec.n_bins()];
    for t in 0..spec.n_frames() {
        for (p, m) in power.iter_mut().zip(spec.frame(t)) {
            *p = m * m;
        }
        for m in 0..n_mels {
            let e: f64 = filterbank.row(m).iter().zip(&power).map(|(w, p)| w * p).sum();
            out.set(m, t, power_to_db(e, floor_db));
        }
    }
    out
}

/// Fixed-size log-mel spectrogram.
#[derive(Debug, Clone, PartialEq)]
pub struct MelSpectrogram {
    pub n_mels: usize,
    pub n_frames: usize,
    /// Row-major `n_mels × n_frames` dB values.
    pub values: Vec<f32>,
    pub f_min: f64,
    pub f_max: f64,
}

impl MelSpectrogram {
    pub fn get(&self, mel: usize, frame: usize) -> f32 {
        self.values[mel * self.n_frames + frame]
    }
}

/// Crops (centred) or pads with `floor_db` (centred) to exactly `n_frames` columns.
pub fn fit_frames(log_mel: &Matrix, n_frames: usize, floor_db: f64) -> Matrix {
    let have = log_mel.cols();
    let mut out = Matrix::zeros(log_mel.rows(), n_frames);
    out.fill(floor_db);
    if have >= n_frames {
        let start = (have - n_frames) / 2;
        for m in 0..log_mel.rows() {
            out.row_mut(m).copy_from_slice(&log_mel.row(m)[start..start + n_frames]);
        }
    } else {
        let left = (n_frames - have) / 2;
        for m in 0..log_mel.rows() {
            out.row_mut(m)[left..left + have].copy_from_slice(log_mel.row(m));
        }
    }
    out
}

/// Orthonormal DCT-II of `x`, first `n_out` coefficients.
pub fn dct2_orthonormal(x: &[f64], n_out: usize) -> Vec<f64> {
    let n = x.len() as f64;
    (0..n_out)
        .map(|k| {
            let scale = if k == 0 { (1.0 / n).sqrt() } else { (2.0 / n).sqrt() };
            let sum: f64 = x
                .iter()
                .enumerate()
                .map(|(i, v)| v * (std::f64::consts::PI * k as f64 * (2 * i + 1) as f64 / (2.0 * n)).cos())
                .sum();
            scale * sum
        })
        .collect()
}

/// MFCCs: orthonormal DCT-II along the mel axis of each frame.
pub fn mfcc(log_mel: &Matrix, n_coeffs: usize) -> Result<FrameFeatureMatrix, DspError> {
    let n_mels = log_mel.rows();
    if n_coeffs > n_mels {
        return Err(DspError::InvalidConfig(format!(
            "{n_coeffs} coefficients requested from {n_mels} mel bands"
        )));
    }
    let n_frames = log_mel.cols();
    let mut out = Matrix::zeros(n_coeffs, n_frames);
    let mut column = vec![0.0; n_mels];
    for t in 0..n_frames {
        for (m, c) in column.iter_mut().enumerate() {
            *c = log_mel.get(m, t);
        }
        for (k, v) in dct2_orthonormal(&column, n_coeffs).into_iter().enumerate() {
            out.set(k, t, v);
        }
    }
    FrameFeatureMatrix::new(FeatureFamily::Mfcc, out)
}
