//! Audio-image representations: fixed-size RGB rasters of a waveform and of
//! its spectral features.

mod colormap;
mod png_io;
mod render;

pub use colormap::{Colormap, VIRIDIS};
pub use png_io::{encode_png, read_png, write_png};
pub use render::{render_heatmap, render_matrix, render_waveplot, BACKGROUND, INK};

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsp::{self, DspConfig, DspError, FeatureSeries, Waveform};
use crate::tensor::Tensor;

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("{kind} representation failed: {source}")]
    Representation {
        kind: RepresentationKind,
        #[source]
        source: DspError,
    },
    #[error("resolution {0} is below the minimum of 32")]
    Resolution(usize),
    #[error("{path}: {reason}")]
    Io { path: PathBuf, reason: String },
}

/// Packed 8-bit RGB raster, row-major from the top-left pixel.
#[derive(Clone, PartialEq, Eq)]
pub struct RgbImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl fmt::Debug for RgbImage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "RgbImage({}×{})", self.width, self.height)
    }
}

impl RgbImage {
    pub fn filled(width: usize, height: usize, color: [u8; 3]) -> Self {
        Self {
            width,
            height,
            pixels: color.iter().copied().cycle().take(width * height * 3).collect(),
        }
    }

    pub fn from_pixels(width: usize, height: usize, pixels: Vec<u8>) -> Option<Self> {
        (pixels.len() == width * height * 3 && width > 0 && height > 0).then_some(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    pub fn put(&mut self, x: usize, y: usize, c: [u8; 3]) {
        let i = (y * self.width + x) * 3;
        self.pixels[i..i + 3].copy_from_slice(&c);
    }

    /// `[height, width, 3]` tensor scaled from `0..=255` to `[-1, 1]`.
    pub fn to_tensor(&self) -> Tensor {
        let data = self.pixels.iter().map(|&p| p as f64 / 127.5 - 1.0).collect();
        Tensor::new(vec![self.height, self.width, 3], data).expect("consistent layout")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RepresentationKind {
    Waveplot,
    Centroid,
    Rolloff,
    Mfcc,
    MfccScaled,
    Chroma,
}

impl RepresentationKind {
    pub const ALL: [RepresentationKind; 6] = [
        RepresentationKind::Waveplot,
        RepresentationKind::Centroid,
        RepresentationKind::Rolloff,
        RepresentationKind::Mfcc,
        RepresentationKind::MfccScaled,
        RepresentationKind::Chroma,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RepresentationKind::Waveplot => "waveplot",
            RepresentationKind::Centroid => "centroid",
            RepresentationKind::Rolloff => "rolloff",
            RepresentationKind::Mfcc => "mfcc",
            RepresentationKind::MfccScaled => "mfcc_scaled",
            RepresentationKind::Chroma => "chroma",
        }
    }
}

impl fmt::Display for RepresentationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RepresentationKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                let valid: Vec<_> = Self::ALL.iter().map(|k| k.name()).collect();
                format!("unknown representation '{s}' (expected one of {})", valid.join(", "))
            })
    }
}

/// One rendered representation of one audio clip.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioImage {
    pub image: RgbImage,
    pub kind: RepresentationKind,
    pub source_id: String,
}

impl AudioImage {
    /// `<source_id>.<kind>.png`
    pub fn file_name(&self) -> String {
        format!("{}.{}.png", self.source_id, self.kind)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImageConfig {
    pub resolution: usize,
    pub colormap: Colormap,
    pub dsp: DspConfig,
}

impl Default for ImageConfig {
    fn default() -> Self {
        Self {
            resolution: 224,
            colormap: Colormap::Viridis,
            dsp: DspConfig::default(),
        }
    }
}

/// Spectral features shared by the five non-waveplot representations,
/// computed lazily so a single requested kind costs only what it needs.
struct Analysis<'a> {
    wave: &'a Waveform,
    cfg: &'a DspConfig,
    spectrum: Option<dsp::Spectrogram>,
    mfcc: Option<FeatureSeries>,
}

impl<'a> Analysis<'a> {
    fn spectrogram(&mut self) -> Result<&dsp::Spectrogram, DspError> {
        if self.spectrum.is_none() {
            self.spectrum = Some(dsp::stft(self.wave, self.cfg.window_size, self.cfg.hop)?);
        }
        Ok(self.spectrum.as_ref().expect("just set"))
    }

    fn mfcc(&mut self) -> Result<&FeatureSeries, DspError> {
        if self.mfcc.is_none() {
            let (n_mels, n_mfcc) = (self.cfg.n_mels, self.cfg.n_mfcc);
            let m = dsp::mfcc(self.spectrogram()?, n_mels, n_mfcc)?;
            self.mfcc = Some(m);
        }
        Ok(self.mfcc.as_ref().expect("just set"))
    }

    fn series(&mut self, kind: RepresentationKind) -> Result<FeatureSeries, DspError> {
        match kind {
            RepresentationKind::Waveplot => unreachable!("waveplot has no feature series"),
            RepresentationKind::Centroid => Ok(dsp::spectral_centroid(self.spectrogram()?)),
            RepresentationKind::Rolloff => {
                let fraction = self.cfg.rolloff_fraction;
                dsp::spectral_rolloff(self.spectrogram()?, fraction)
            }
            RepresentationKind::Mfcc => Ok(self.mfcc()?.clone()),
            RepresentationKind::MfccScaled => dsp::mfcc_feature_scaled(self.mfcc()?),
            RepresentationKind::Chroma => dsp::chromagram(self.spectrogram()?),
        }
    }
}

/// Feature series behind a non-waveplot representation.
pub fn feature_series(
    w: &Waveform,
    kind: RepresentationKind,
    cfg: &DspConfig,
) -> Result<FeatureSeries, ImageError> {
    let wave = w
        .at_rate(cfg.sample_rate)
        .map_err(|source| ImageError::Representation { kind, source })?;
    let mut analysis = Analysis {
        wave: &wave,
        cfg,
        spectrum: None,
        mfcc: None,
    };
    analysis
        .series(kind)
        .map_err(|source| ImageError::Representation { kind, source })
}

/// Renders the requested representations in the order given.
pub fn extract_kinds(
    w: &Waveform,
    source_id: &str,
    kinds: &[RepresentationKind],
    cfg: &ImageConfig,
) -> Result<Vec<AudioImage>, ImageError> {
    if cfg.resolution < 32 {
        return Err(ImageError::Resolution(cfg.resolution));
    }
    let wave = w.at_rate(cfg.dsp.sample_rate).map_err(|source| ImageError::Representation {
        kind: kinds.first().copied().unwrap_or(RepresentationKind::Waveplot),
        source,
    })?;
    let mut analysis = Analysis {
        wave: &wave,
        cfg: &cfg.dsp,
        spectrum: None,
        mfcc: None,
    };
    kinds
        .iter()
        .map(|&kind| {
            let image = match kind {
                RepresentationKind::Waveplot => render_waveplot(&wave, cfg.resolution),
                _ => {
                    let series = analysis
                        .series(kind)
                        .map_err(|source| ImageError::Representation { kind, source })?;
                    render_heatmap(&series, cfg.resolution, cfg.colormap)
                }
            };
            Ok(AudioImage {
                image,
                kind,
                source_id: source_id.to_string(),
            })
        })
        .collect()
}

/// All six representations, in [`RepresentationKind::ALL`] order.
pub fn extract_all(
    w: &Waveform,
    source_id: &str,
    cfg: &ImageConfig,
) -> Result<Vec<AudioImage>, ImageError> {
    extract_kinds(w, source_id, &RepresentationKind::ALL, cfg)
}
