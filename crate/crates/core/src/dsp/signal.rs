use super::DspError;

/// Samples above this magnitude are treated as corrupt.
pub const CLIP_TOLERANCE: f32 = 1e-3;

/// Validated mono PCM.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioSignal {
    samples: Vec<f32>,
    sample_rate_hz: u32,
}

impl AudioSignal {
    pub fn new(samples: Vec<f32>, sample_rate_hz: u32) -> Result<Self, DspError> {
        if sample_rate_hz == 0 {
            return Err(DspError::InvalidConfig("sample rate must be positive".into()));
        }
        if samples.is_empty() {
            return Err(DspError::EmptyAudio);
        }
        if let Some((i, s)) = samples
            .iter()
            .enumerate()
            .find(|(_, s)| !s.is_finite() || s.abs() > 1.0 + CLIP_TOLERANCE)
        {
            return Err(DspError::CorruptAudio(format!("sample {i} is {s}")));
        }
        Ok(Self {
            samples,
            sample_rate_hz,
        })
    }

    pub fn samples(&self) -> &[f32] {
        &self.samples
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz as f64
    }
}

/// Averages one or two equal-length channels into a validated mono signal.
pub fn downmix_and_validate<C: AsRef<[f32]>>(channels: &[C], rate: u32) -> Result<AudioSignal, DspError> {
    match channels {
        [] => Err(DspError::EmptyAudio),
        [mono] => AudioSignal::new(mono.as_ref().to_vec(), rate),
        [left, right] => {
            let (l, r) = (left.as_ref(), right.as_ref());
            if l.len() != r.len() {
                return Err(DspError::InvalidConfig(format!(
                    "channel lengths differ: {} vs {}",
                    l.len(),
                    r.len()
                )));
            }
            // validate before averaging so NaN/inf in either channel is caught
            if let Some(s) = l.iter().chain(r).find(|s| !s.is_finite()) {
                return Err(DspError::CorruptAudio(format!("non-finite sample {s}")));
            }
            AudioSignal::new(l.iter().zip(r).map(|(a, b)| 0.5 * (a + b)).collect(), rate)
        }
        more => Err(DspError::InvalidConfig(format!(
            "{} channels; only mono or stereo is supported",
            more.len()
        ))),
    }
}
