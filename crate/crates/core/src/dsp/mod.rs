//! Time-frequency analysis of mono waveforms: STFT, spectral centroid and
//! rolloff, MFCCs (raw and standardized) and chroma.

mod features;
mod mfcc;
mod stft;
pub mod wav;

pub use features::{chromagram, pitch_class, spectral_centroid, spectral_rolloff};
pub use mfcc::{dct_ii_orthonormal, hz_to_mel, mel_filterbank, mel_to_hz, mfcc, mfcc_feature_scaled};
pub use stft::stft;

use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DspError {
    #[error("audio too short: {len} samples, need at least one window of {window}")]
    InputTooShort { len: usize, window: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("empty waveform")]
    Empty,
    #[error("unsupported codec in {path}: {reason}")]
    UnsupportedCodec { path: PathBuf, reason: String },
    #[error("cannot read {path}: {reason}")]
    Read { path: PathBuf, reason: String },
    #[error("cannot write {path}: {reason}")]
    Write { path: PathBuf, reason: String },
}

pub type Result<T> = std::result::Result<T, DspError>;

/// Mono audio with samples in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl Waveform {
    /// Builds a waveform, clamping samples into `[-1, 1]`.
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if samples.is_empty() {
            return Err(DspError::Empty);
        }
        if sample_rate == 0 {
            return Err(DspError::InvalidParameter("sample rate must be positive".into()));
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(DspError::InvalidParameter("non-finite sample".into()));
        }
        let samples = samples.into_iter().map(|s| s.clamp(-1.0, 1.0)).collect();
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    /// Averages interleaved channels down to mono.
    pub fn from_interleaved(data: &[f64], channels: usize, sample_rate: u32) -> Result<Self> {
        if channels == 0 {
            return Err(DspError::InvalidParameter("zero channels".into()));
        }
        let mono = data
            .chunks_exact(channels)
            .map(|frame| frame.iter().sum::<f64>() / channels as f64)
            .collect();
        Self::new(mono, sample_rate)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    pub fn scaled(&self, gain: f64) -> Result<Self> {
        Self::new(self.samples.iter().map(|s| s * gain).collect(), self.sample_rate)
    }

    /// Integer-factor decimation by block averaging.
    pub fn decimate(&self, factor: u32) -> Result<Self> {
        if factor == 0 {
            return Err(DspError::InvalidParameter("decimation factor 0".into()));
        }
        if factor == 1 {
            return Ok(self.clone());
        }
        let f = factor as usize;
        let samples = self
            .samples
            .chunks(f)
            .map(|c| c.iter().sum::<f64>() / c.len() as f64)
            .collect();
        Self::new(samples, self.sample_rate / factor)
    }

    /// Brings the waveform to `target` Hz when that needs at most an
    /// integer decimation.
    pub fn at_rate(&self, target: u32) -> Result<Self> {
        if self.sample_rate == target {
            Ok(self.clone())
        } else if target > 0 && self.sample_rate.is_multiple_of(target) {
            self.decimate(self.sample_rate / target)
        } else {
            Err(DspError::InvalidParameter(format!(
                "cannot convert {} Hz to {target} Hz by integer decimation",
                self.sample_rate
            )))
        }
    }
}

/// Hann-windowed magnitude spectrogram, `frames × bins`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    magnitudes: Vec<f64>,
    frames: usize,
    bins: usize,
    window_size: usize,
    hop: usize,
    sample_rate: u32,
    bin_frequencies: Vec<f64>,
}

impl Spectrogram {
    /// Builds a spectrogram from raw magnitudes. `bins` is derived from
    /// `window_size`.
    pub fn from_magnitudes(
        magnitudes: Vec<f64>,
        window_size: usize,
        hop: usize,
        sample_rate: u32,
    ) -> Result<Self> {
        let bins = window_size / 2 + 1;
        if window_size < 2 || magnitudes.is_empty() || !magnitudes.len().is_multiple_of(bins) {
            return Err(DspError::InvalidParameter(format!(
                "{} magnitudes do not tile {bins} bins",
                magnitudes.len()
            )));
        }
        if magnitudes.iter().any(|m| *m < 0.0 || !m.is_finite()) {
            return Err(DspError::InvalidParameter("magnitudes must be finite and ≥ 0".into()));
        }
        let bin_frequencies = (0..bins)
            .map(|k| k as f64 * sample_rate as f64 / window_size as f64)
            .collect();
        Ok(Self {
            frames: magnitudes.len() / bins,
            magnitudes,
            bins,
            window_size,
            hop,
            sample_rate,
            bin_frequencies,
        })
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn window_size(&self) -> usize {
        self.window_size
    }

    pub fn hop(&self) -> usize {
        self.hop
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn bin_frequencies(&self) -> &[f64] {
        &self.bin_frequencies
    }

    /// Frequency resolution in Hz.
    pub fn bin_width(&self) -> f64 {
        self.sample_rate as f64 / self.window_size as f64
    }

    pub fn frame(&self, i: usize) -> &[f64] {
        &self.magnitudes[i * self.bins..(i + 1) * self.bins]
    }

    pub fn magnitudes(&self) -> &[f64] {
        &self.magnitudes
    }

    /// Energy of frame `i` recovered from its one-sided spectrum, i.e. the
    /// full-spectrum Parseval sum `(1/N) Σ_k |X_k|²` with mirrored bins
    /// counted twice.
    pub fn frame_energy(&self, i: usize) -> f64 {
        let f = self.frame(i);
        let n = self.window_size;
        let mut total = 0.0;
        for (k, m) in f.iter().enumerate() {
            let weight = if k == 0 || (n.is_multiple_of(2) && k == n / 2) { 1.0 } else { 2.0 };
            total += weight * m * m;
        }
        total / n as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    Centroid,
    Rolloff,
    Mfcc,
    MfccScaled,
    Chroma,
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FeatureKind::Centroid => "centroid",
            FeatureKind::Rolloff => "rolloff",
            FeatureKind::Mfcc => "mfcc",
            FeatureKind::MfccScaled => "mfcc_scaled",
            FeatureKind::Chroma => "chroma",
        })
    }
}

/// Per-frame feature vectors, `frames × channels`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSeries {
    kind: FeatureKind,
    frames: usize,
    channels: usize,
    values: Vec<f64>,
}

impl FeatureSeries {
    pub fn new(kind: FeatureKind, frames: usize, channels: usize, values: Vec<f64>) -> Result<Self> {
        if frames == 0 || channels == 0 || values.len() != frames * channels {
            return Err(DspError::InvalidParameter(format!(
                "{} values for {frames} frames × {channels} channels",
                values.len()
            )));
        }
        Ok(Self {
            kind,
            frames,
            channels,
            values,
        })
    }

    pub fn kind(&self) -> FeatureKind {
        self.kind
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn frame(&self, i: usize) -> &[f64] {
        &self.values[i * self.channels..(i + 1) * self.channels]
    }

    pub fn get(&self, frame: usize, channel: usize) -> f64 {
        self.values[frame * self.channels + channel]
    }

    /// Resamples the frame axis by nearest neighbour; `rate > 1` shortens.
    pub fn time_stretched(&self, rate: f64) -> Result<Self> {
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(DspError::InvalidParameter(format!("stretch rate {rate}")));
        }
        let frames = ((self.frames as f64 / rate).round() as usize).max(1);
        let mut values = Vec::with_capacity(frames * self.channels);
        for i in 0..frames {
            let src = ((i as f64 * rate) as usize).min(self.frames - 1);
            values.extend_from_slice(self.frame(src));
        }
        Self::new(self.kind, frames, self.channels, values)
    }
}

/// STFT and feature parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DspConfig {
    pub sample_rate: u32,
    pub window_size: usize,
    pub hop: usize,
    pub n_mels: usize,
    pub n_mfcc: usize,
    pub rolloff_fraction: f64,
}

impl Default for DspConfig {
    fn default() -> Self {
        Self {
            sample_rate: 22050,
            window_size: 2048,
            hop: 512,
            n_mels: 128,
            n_mfcc: 20,
            rolloff_fraction: 0.85,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn waveform_contract() {
        assert!(matches!(Waveform::new(vec![], 8000), Err(DspError::Empty)));
        assert!(Waveform::new(vec![0.1], 0).is_err());
        let w = Waveform::new(vec![2.0, -3.0, 0.5], 8000).unwrap();
        assert_eq!(w.samples(), &[1.0, -1.0, 0.5]);
    }

    #[test]
    fn stereo_downmix_averages() {
        let w = Waveform::from_interleaved(&[1.0, 0.0, 0.5, -0.5], 2, 8000).unwrap();
        assert_eq!(w.samples(), &[0.5, 0.0]);
    }

    #[test]
    fn decimation() {
        let w = Waveform::new(vec![0.0, 0.2, 0.4, 0.6], 44100).unwrap();
        let d = w.at_rate(22050).unwrap();
        assert_eq!(d.sample_rate(), 22050);
        assert!((d.samples()[1] - 0.5).abs() < 1e-15);
        assert!(w.at_rate(16000).is_err());
    }

    #[test]
    fn bin_frequencies_span_dc_to_nyquist() {
        let s = Spectrogram::from_magnitudes(vec![0.0; 5], 8, 4, 8000).unwrap();
        assert_eq!(s.bin_frequencies(), &[0.0, 1000.0, 2000.0, 3000.0, 4000.0]);
    }

    #[test]
    fn stretch_changes_frame_count() {
        let f = FeatureSeries::new(FeatureKind::Chroma, 10, 2, (0..20).map(f64::from).collect())
            .unwrap();
        assert_eq!(f.time_stretched(2.0).unwrap().frames(), 5);
        assert_eq!(f.time_stretched(0.5).unwrap().frames(), 20);
        assert_eq!(f.time_stretched(1.0).unwrap(), f);
    }
}
