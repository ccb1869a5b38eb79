//! Audio feature extraction: STFT, log-mel spectrogram, MFCC, chroma
//! (STFT, pseudo-CQT, CENS), tonnetz, spectral and time-domain descriptors,
//! and their seven-statistic summaries.

mod chroma;
mod mel;
mod signal;
mod spectral;
mod stats;
mod stft;

pub use chroma::{
    chroma_cens, chroma_features, chroma_stft, hz_to_midi, midi_to_hz, tonnetz, tonnetz_transform, ChromaVariant,
    CqtFilterbank, CENS_SMOOTHING, TONNETZ_RADII,
};
pub use mel::{
    dct2_orthonormal, fit_frames, hz_to_mel, log_mel_frames, mel_centres, mel_filterbank, mel_to_hz, mfcc,
    power_to_db, MelSpectrogram,
};
pub use signal::{downmix_and_validate, AudioSignal, CLIP_TOLERANCE};
pub use spectral::{
    spectral_bandwidth, spectral_centroid, spectral_contrast, spectral_descriptors, spectral_rolloff,
    time_domain_descriptors, SpectralDescriptors, TimeDomainDescriptors,
};
pub use stats::{describe, summarize, SummaryFeatureVector, STATISTICS};
pub use stft::{hann_window, stft, MagnitudeSpectrogram, Stft, StftConfig};

use crate::numeric::{Matrix, NumericError};

#[derive(Debug, thiserror::Error)]
pub enum DspError {
    #[error("empty audio")]
    EmptyAudio,
    #[error("corrupt audio: {0}")]
    CorruptAudio(String),
    #[error("audio too short: {samples} samples, need {needed}")]
    AudioTooShort { samples: usize, needed: usize },
    #[error("invalid band: {0}")]
    InvalidBand(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("empty feature matrix")]
    EmptyFeature,
    #[error("sample rate {got} Hz does not match configured {expected} Hz")]
    RateMismatch { expected: u32, got: u32 },
    #[error("unknown feature set `{0}`")]
    UnknownFeatureSet(String),
}

impl From<NumericError> for DspError {
    fn from(e: NumericError) -> Self {
        DspError::InvalidConfig(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FeatureFamily {
    ChromaStft,
    ChromaCqt,
    ChromaCens,
    Tonnetz,
    Mfcc,
    SpecCentroid,
    SpecBandwidth,
    SpecContrast,
    SpecRolloff,
    Rms,
    Zcr,
}

impl FeatureFamily {
    pub const ALL: [FeatureFamily; 11] = [
        FeatureFamily::ChromaStft,
        FeatureFamily::ChromaCqt,
        FeatureFamily::ChromaCens,
        FeatureFamily::Tonnetz,
        FeatureFamily::Mfcc,
        FeatureFamily::SpecCentroid,
        FeatureFamily::SpecBandwidth,
        FeatureFamily::SpecContrast,
        FeatureFamily::SpecRolloff,
        FeatureFamily::Rms,
        FeatureFamily::Zcr,
    ];

    /// Rows per frame.
    pub fn d_base(&self) -> usize {
        match self {
            Self::ChromaStft | Self::ChromaCqt | Self::ChromaCens => 12,
            Self::Tonnetz => 6,
            Self::Mfcc => 20,
            Self::SpecContrast => 7,
            Self::SpecCentroid | Self::SpecBandwidth | Self::SpecRolloff | Self::Rms | Self::Zcr => 1,
        }
    }

    pub fn summary_len(&self) -> usize {
        STATISTICS.len() * self.d_base()
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::ChromaStft => "chroma_stft",
            Self::ChromaCqt => "chroma_cqt",
            Self::ChromaCens => "chroma_cens",
            Self::Tonnetz => "tonnetz",
            Self::Mfcc => "mfcc",
            Self::SpecCentroid => "spec_centroid",
            Self::SpecBandwidth => "spec_bandwidth",
            Self::SpecContrast => "spec_contrast",
            Self::SpecRolloff => "spec_rolloff",
            Self::Rms => "rms",
            Self::Zcr => "zcr",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|f| f.name() == name)
    }
}

/// Per-frame values of one feature family, `d_base × n_frames`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameFeatureMatrix {
    pub family: FeatureFamily,
    pub values: Matrix,
}

impl FrameFeatureMatrix {
    pub fn new(family: FeatureFamily, values: Matrix) -> Result<Self, DspError> {
        if values.rows() != family.d_base() {
            return Err(DspError::InvalidConfig(format!(
                "{} expects {} rows, got {}",
                family.name(),
                family.d_base(),
                values.rows()
            )));
        }
        if !values.is_finite() {
            return Err(DspError::InvalidConfig(format!("{} has non-finite values", family.name())));
        }
        Ok(Self { family, values })
    }
}

/// Families of each named feature set, in concatenation order.
///
/// Single families are available by name, by their numbered row (`"1"` is
/// STFT chroma, `"2"` tonnetz, … `"9"` zero-crossing rate), and as the
/// combinations `"3+6"`, `"3+6+4"` and `"1to9"` (all three chroma variants).
pub fn feature_set_families(name: &str) -> Result<Vec<FeatureFamily>, DspError> {
    use FeatureFamily::*;
    let numbered = |n: &str| -> Option<FeatureFamily> {
        Some(match n {
            "1" => ChromaStft,
            "2" => Tonnetz,
            "3" => Mfcc,
            "4" => SpecCentroid,
            "5" => SpecBandwidth,
            "6" => SpecContrast,
            "7" => SpecRolloff,
            "8" => Rms,
            "9" => Zcr,
            _ => return None,
        })
    };
    if name == "1to9" {
        return Ok(FeatureFamily::ALL.to_vec());
    }
    if let Some(f) = FeatureFamily::from_name(name) {
        return Ok(vec![f]);
    }
    name.split('+')
        .map(|part| numbered(part).ok_or_else(|| DspError::UnknownFeatureSet(name.to_string())))
        .collect()
}

/// Published feature-set names written by feature extraction.
pub const FEATURE_SETS: [&str; 3] = ["3+6", "3+6+4", "1to9"];

/// Every feature-set name extraction writes: each family plus [`FEATURE_SETS`].
pub fn all_feature_set_names() -> Vec<String> {
    FeatureFamily::ALL
        .iter()
        .map(|f| f.name().to_string())
        .chain(FEATURE_SETS.iter().map(|s| s.to_string()))
        .collect()
}

pub fn feature_set_columns(name: &str) -> Result<Vec<String>, DspError> {
    Ok(feature_set_families(name)?
        .into_iter()
        .flat_map(SummaryFeatureVector::column_names)
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureConfig {
    pub sample_rate_hz: u32,
    pub stft: StftConfig,
    pub n_mels: usize,
    pub f_min: f64,
    /// `None` means Nyquist.
    pub f_max: Option<f64>,
    pub mel_frames: usize,
    pub db_floor: f64,
    pub n_mfcc: usize,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            sample_rate_hz: 44_100,
            stft: StftConfig::default(),
            n_mels: 96,
            f_min: 0.0,
            f_max: None,
            mel_frames: 1360,
            db_floor: -80.0,
            n_mfcc: 20,
        }
    }
}

impl FeatureConfig {
    pub fn f_max(&self) -> f64 {
        self.f_max.unwrap_or(self.sample_rate_hz as f64 / 2.0)
    }
}

/// Summaries of all families of one track plus its fixed-size mel-spectrogram.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtractedFeatures {
    pub summaries: Vec<SummaryFeatureVector>,
    pub mel: MelSpectrogram,
}

impl ExtractedFeatures {
    pub fn summary(&self, family: FeatureFamily) -> &SummaryFeatureVector {
        self.summaries
            .iter()
            .find(|s| s.family == family)
            .expect("every family is extracted")
    }

    /// Concatenated summaries of a named feature set.
    pub fn feature_set(&self, name: &str) -> Result<Vec<f64>, DspError> {
        Ok(feature_set_families(name)?
            .into_iter()
            .flat_map(|f| self.summary(f).values.iter().copied())
            .collect())
    }
}

/// Feature extractor with its filterbanks and FFT plan built once.
///
/// Extraction only reads this struct, so one extractor can serve many
/// threads.
#[derive(Debug, Clone)]
pub struct FeatureExtractor {
    config: FeatureConfig,
    stft: Stft,
    mel_fb: Matrix,
    cqt: CqtFilterbank,
}

impl FeatureExtractor {
    pub fn new(config: FeatureConfig) -> Result<Self, DspError> {
        let stft = Stft::new(config.stft)?;
        let mel_fb = mel_filterbank(
            config.n_mels,
            config.f_min,
            config.f_max(),
            config.sample_rate_hz,
            config.stft.n_fft,
        )?;
        if config.n_mfcc > config.n_mels {
            return Err(DspError::InvalidConfig("n_mfcc exceeds n_mels".into()));
        }
        let cqt = CqtFilterbank::new(config.sample_rate_hz, config.stft.n_fft);
        Ok(Self {
            config,
            stft,
            mel_fb,
            cqt,
        })
    }

    pub fn config(&self) -> &FeatureConfig {
        &self.config
    }

    fn check_rate(&self, signal: &AudioSignal) -> Result<(), DspError> {
        if signal.sample_rate_hz() != self.config.sample_rate_hz {
            return Err(DspError::RateMismatch {
                expected: self.config.sample_rate_hz,
                got: signal.sample_rate_hz(),
            });
        }
        Ok(())
    }

    fn fixed_mel(&self, log_mel: &Matrix) -> MelSpectrogram {
        let fixed = fit_frames(log_mel, self.config.mel_frames, self.config.db_floor);
        MelSpectrogram {
            n_mels: fixed.rows(),
            n_frames: fixed.cols(),
            values: fixed.as_slice().iter().map(|&v| v as f32).collect(),
            f_min: self.config.f_min,
            f_max: self.config.f_max(),
        }
    }

    /// Log-mel spectrogram cropped or padded to the configured frame count.
    pub fn log_mel_spectrogram(&self, signal: &AudioSignal) -> Result<MelSpectrogram, DspError> {
        self.check_rate(signal)?;
        let spec = self.stft.magnitudes(signal)?;
        Ok(self.fixed_mel(&log_mel_frames(&spec, &self.mel_fb, self.config.db_floor)))
    }

    /// Per-frame values of every family.
    pub fn frame_features(&self, signal: &AudioSignal) -> Result<(Vec<FrameFeatureMatrix>, Matrix), DspError> {
        self.check_rate(signal)?;
        let spec = self.stft.magnitudes(signal)?;
        let log_mel = log_mel_frames(&spec, &self.mel_fb, self.config.db_floor);
        let chroma_stft = chroma_stft(&spec);
        let chroma_cqt = self.cqt.chroma(&spec);
        let chroma_cens = chroma_cens(&chroma_cqt, CENS_SMOOTHING);
        let tonnetz = tonnetz(&chroma_cqt)?;
        let mfcc = mfcc(&log_mel, self.config.n_mfcc)?;
        let spectral = spectral_descriptors(&spec)?;
        let time = time_domain_descriptors(signal, self.config.stft.n_fft, self.config.stft.hop)?;
        let frames = vec![
            chroma_stft,
            chroma_cqt,
            chroma_cens,
            tonnetz,
            mfcc,
            spectral.centroid,
            spectral.bandwidth,
            spectral.contrast,
            spectral.rolloff,
            time.rms,
            time.zcr,
        ];
        Ok((frames, log_mel))
    }

    pub fn extract(&self, signal: &AudioSignal) -> Result<ExtractedFeatures, DspError> {
        let (frames, log_mel) = self.frame_features(signal)?;
        let summaries = frames.iter().map(summarize).collect::<Result<Vec<_>, _>>()?;
        Ok(ExtractedFeatures {
            summaries,
            mel: self.fixed_mel(&log_mel),
        })
    }
}

pub fn extract_feature_sets(signal: &AudioSignal, config: &FeatureConfig) -> Result<ExtractedFeatures, DspError> {
    FeatureExtractor::new(config.clone())?.extract(signal)
}
