use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::{AudioSignal, DspError};
use crate::numeric::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StftConfig {
    pub n_fft: usize,
    pub hop: usize,
    /// Reflect-pad `n_fft / 2` samples on both sides so frame `t` is centred
    /// on sample `t * hop`.
    pub center: bool,
}

impl Default for StftConfig {
    fn default() -> Self {
        Self {
            n_fft: 2048,
            hop: 1024,
            center: true,
        }
    }
}

impl StftConfig {
    pub fn validate(&self) -> Result<(), DspError> {
        if self.n_fft < 2 || self.hop == 0 || self.hop > self.n_fft {
            return Err(DspError::InvalidConfig(format!(
                "need 0 < hop <= n_fft and n_fft >= 2, got n_fft {} hop {}",
                self.n_fft, self.hop
            )));
        }
        Ok(())
    }

    pub fn n_bins(&self) -> usize {
        self.n_fft / 2 + 1
    }

    /// Number of frames for a signal of `len` samples.
    pub fn n_frames(&self, len: usize) -> Option<usize> {
        let padded = if self.center { len + 2 * (self.n_fft / 2) } else { len };
        (padded >= self.n_fft).then(|| 1 + (padded - self.n_fft) / self.hop)
    }
}

/// Periodic Hann window.
pub fn hann_window(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos())
        .collect()
}

/// Mirror index into `0..len` without repeating the edge sample.
pub(crate) fn reflect_index(i: isize, len: usize) -> usize {
    if len == 1 {
        return 0;
    }
    let period = 2 * (len as isize - 1);
    let mut j = i.rem_euclid(period);
    if j >= len as isize {
        j = period - j;
    }
    j as usize
}

/// Non-negative magnitudes stored frame by frame: row `t` is frame `t`,
/// column `k` is frequency bin `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct MagnitudeSpectrogram {
    frames: Matrix,
    pub config: StftConfig,
    pub sample_rate_hz: u32,
}

impl MagnitudeSpectrogram {
    pub fn n_frames(&self) -> usize {
        self.frames.rows()
    }

    pub fn n_bins(&self) -> usize {
        self.frames.cols()
    }

    pub fn frame(&self, t: usize) -> &[f64] {
        self.frames.row(t)
    }

    pub fn get(&self, bin: usize, frame: usize) -> f64 {
        self.frames.get(frame, bin)
    }

    /// Centre frequency of bin `k` in Hz.
    pub fn bin_hz(&self, k: usize) -> f64 {
        k as f64 * self.sample_rate_hz as f64 / self.config.n_fft as f64
    }

    pub fn bin_frequencies(&self) -> Vec<f64> {
        (0..self.n_bins()).map(|k| self.bin_hz(k)).collect()
    }
}

/// STFT with a planned FFT and a precomputed window; cheap to share.
#[derive(Clone)]
pub struct Stft {
    config: StftConfig,
    window: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Stft {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Stft").field("config", &self.config).finish()
    }
}

impl Stft {
    pub fn new(config: StftConfig) -> Result<Self, DspError> {
        config.validate()?;
        let fft = FftPlanner::new().plan_fft_forward(config.n_fft);
        Ok(Self {
            config,
            window: hann_window(config.n_fft),
            fft,
        })
    }

    pub fn config(&self) -> StftConfig {
        self.config
    }

    pub fn window(&self) -> &[f64] {
        &self.window
    }

    pub fn magnitudes(&self, signal: &AudioSignal) -> Result<MagnitudeSpectrogram, DspError> {
        let cfg = self.config;
        let samples = signal.samples();
        let n_frames = cfg.n_frames(samples.len()).ok_or(DspError::AudioTooShort {
            samples: samples.len(),
            needed: cfg.n_fft,
        })?;
        let pad = if cfg.center { (cfg.n_fft / 2) as isize } else { 0 };
        let n_bins = cfg.n_bins();
        let mut out = Matrix::zeros(n_frames, n_bins);
        let mut buf = vec![Complex::new(0.0, 0.0); cfg.n_fft];
        let mut scratch = vec![Complex::new(0.0, 0.0); self.fft.get_inplace_scratch_len()];
        for t in 0..n_frames {
            let start = (t * cfg.hop) as isize - pad;
            for (n, (slot, w)) in buf.iter_mut().zip(&self.window).enumerate() {
                let idx = reflect_index(start + n as isize, samples.len());
                *slot = Complex::new(samples[idx] as f64 * w, 0.0);
            }
            self.fft.process_with_scratch(&mut buf, &mut scratch);
            for (m, c) in out.row_mut(t).iter_mut().zip(&buf[..n_bins]) {
                *m = c.norm();
            }
        }
        Ok(MagnitudeSpectrogram {
            frames: out,
            config: cfg,
            sample_rate_hz: signal.sample_rate_hz(),
        })
    }
}

pub fn stft(signal: &AudioSignal, cfg: StftConfig) -> Result<MagnitudeSpectrogram, DspError> {
    Stft::new(cfg)?.magnitudes(signal)
}
