//! The complete two-stream model: audio-image and video tokenizers, one
//! encoder per stream and the fusion head.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::audio_image::{Colormap, RepresentationKind};
use crate::dsp::DspConfig;
use crate::error::{Error, Result};
use crate::fusion::{FusionConfig, FusionHead, FusionOutput, Modality};
use crate::nn::Forward;
use crate::params::ParamStore;
use crate::tensor::{Tensor, Var};
use crate::tokenizer::{patchify, tubeletize, TokenizerParams};
use crate::transformer::{AttentionRecord, Encoder, EncoderConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AudioMode {
    /// One representation per model.
    #[default]
    Single,
    /// All six representations through the shared audio encoder, readouts
    /// averaged before fusion.
    AllSixAveraged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub num_classes: usize,
    pub image_size: usize,
    pub patch_size: usize,
    pub representation: RepresentationKind,
    pub audio_mode: AudioMode,
    pub colormap: Colormap,
    pub video_frames: usize,
    pub frame_size: usize,
    pub channels: usize,
    pub tubelet: [usize; 3],
    pub encoder: EncoderConfig,
    pub fusion: FusionConfig,
    pub modality: Modality,
    pub dsp: DspConfig,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            num_classes: 4,
            image_size: 32,
            patch_size: 8,
            representation: RepresentationKind::Chroma,
            audio_mode: AudioMode::Single,
            colormap: Colormap::Viridis,
            video_frames: 4,
            frame_size: 32,
            channels: 3,
            tubelet: [2, 8, 8],
            encoder: EncoderConfig::default(),
            fusion: FusionConfig::default(),
            modality: Modality::Both,
            dsp: DspConfig::default(),
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        self.encoder.validate()?;
        if self.num_classes < 2 {
            return Err(Error::Config(format!(
                "need at least 2 classes, got {}",
                self.num_classes
            )));
        }
        if self.channels == 0 {
            return Err(Error::Config("channel count must be positive".into()));
        }
        let div = |what: &str, size: usize, part: usize| {
            if part == 0 || size == 0 || !size.is_multiple_of(part) {
                Err(Error::Config(format!(
                    "{what} size {part} does not evenly divide {size}"
                )))
            } else {
                Ok(())
            }
        };
        div("patch", self.image_size, self.patch_size)?;
        div("tubelet time", self.video_frames, self.tubelet[0])?;
        div("tubelet height", self.frame_size, self.tubelet[1])?;
        div("tubelet width", self.frame_size, self.tubelet[2])?;
        Ok(())
    }

    pub fn audio_tokens(&self) -> usize {
        (self.image_size / self.patch_size).pow(2)
    }

    pub fn video_tokens(&self) -> usize {
        let [t, h, w] = self.tubelet;
        (self.video_frames / t) * (self.frame_size / h) * (self.frame_size / w)
    }

    /// Representations the audio stream consumes, in order.
    pub fn audio_kinds(&self) -> Vec<RepresentationKind> {
        match self.audio_mode {
            AudioMode::Single => vec![self.representation],
            AudioMode::AllSixAveraged => RepresentationKind::ALL.to_vec(),
        }
    }

    pub fn uses_audio(&self) -> bool {
        self.modality != Modality::VideoOnly
    }

    pub fn uses_video(&self) -> bool {
        self.modality != Modality::AudioOnly
    }
}

/// Preprocessed inputs of one sample: audio images as `[S, S, 3]` tensors
/// (one per entry of [`ModelConfig::audio_kinds`]) and a `[T, S, S, C]` clip.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelInput {
    pub audio: Vec<Tensor>,
    pub video: Tensor,
}

pub struct ModelOutput {
    pub fusion: FusionOutput,
    pub audio_attention: Option<AttentionRecord>,
    pub video_attention: Option<AttentionRecord>,
}

pub const AUDIO: &str = "audio";
pub const VIDEO: &str = "video";

#[derive(Debug, Clone)]
pub struct Model {
    cfg: ModelConfig,
    audio_tok: TokenizerParams,
    video_tok: TokenizerParams,
    audio_enc: Encoder,
    video_enc: Encoder,
    head: FusionHead,
}

impl Model {
    pub fn new(cfg: ModelConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            audio_tok: TokenizerParams::new(&format!("{AUDIO}.tokens")),
            video_tok: TokenizerParams::new(&format!("{VIDEO}.tokens")),
            audio_enc: Encoder::new(&format!("{AUDIO}.encoder"), cfg.encoder.clone())?,
            video_enc: Encoder::new(&format!("{VIDEO}.encoder"), cfg.encoder.clone())?,
            head: FusionHead::new(&cfg.fusion, cfg.encoder.dim, cfg.num_classes, cfg.modality)?,
            cfg,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.cfg
    }

    /// Fresh parameters drawn from a generator seeded with `seed`.
    pub fn init(&self, seed: u64) -> Result<ParamStore> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamStore::new();
        let d = self.cfg.encoder.dim;
        if self.cfg.uses_audio() {
            let len = self.cfg.patch_size.pow(2) * 3;
            self.audio_tok
                .register(&mut params, len, self.cfg.audio_tokens(), d, &mut rng)?;
            self.audio_enc.register(&mut params, &mut rng)?;
        }
        if self.cfg.uses_video() {
            let len = self.cfg.tubelet.iter().product::<usize>() * self.cfg.channels;
            self.video_tok
                .register(&mut params, len, self.cfg.video_tokens(), d, &mut rng)?;
            self.video_enc.register(&mut params, &mut rng)?;
        }
        self.head.register(&mut params, &mut rng)?;
        Ok(params)
    }

    /// Verifies that `params` has exactly the layout [`Model::init`] makes.
    pub fn check_params(&self, params: &ParamStore) -> Result<()> {
        let fresh = self.init(0)?;
        if !fresh.same_layout(params) {
            return Err(Error::Config(format!(
                "parameters do not match the model configuration ({} expected tensors, {} given, {} classes configured)",
                fresh.len(),
                params.len(),
                self.cfg.num_classes
            )));
        }
        Ok(())
    }

    fn check_input(&self, input: &ModelInput) -> Result<()> {
        if self.cfg.uses_audio() {
            let want = self.cfg.audio_kinds().len();
            if input.audio.len() != want {
                return Err(Error::Config(format!(
                    "expected {want} audio images, got {}",
                    input.audio.len()
                )));
            }
            let s = self.cfg.image_size;
            for a in &input.audio {
                if a.shape() != [s, s, 3] {
                    return Err(Error::Config(format!(
                        "audio image shape {:?}, expected [{s}, {s}, 3]",
                        a.shape()
                    )));
                }
            }
        }
        if self.cfg.uses_video() {
            let (t, s, c) = (self.cfg.video_frames, self.cfg.frame_size, self.cfg.channels);
            if input.video.shape() != [t, s, s, c] {
                return Err(Error::Config(format!(
                    "video shape {:?}, expected [{t}, {s}, {s}, {c}]",
                    input.video.shape()
                )));
            }
        }
        Ok(())
    }

    /// Audio-stream tokens of one audio image, `[N+1, d]`.
    pub fn audio_tokens(&self, fw: &mut Forward<'_>, image: &Tensor) -> Result<Var> {
        let p = self.cfg.patch_size;
        let grid = patchify(image, (p, p))?;
        self.audio_tok.tokens(fw, grid.patches())
    }

    pub fn video_tokens(&self, fw: &mut Forward<'_>, video: &Tensor) -> Result<Var> {
        let [t, h, w] = self.cfg.tubelet;
        let grid = tubeletize(video, (t, h, w))?;
        self.video_tok.tokens(fw, grid.tubelets())
    }

    pub fn audio_encoder(&self) -> &Encoder {
        &self.audio_enc
    }

    pub fn video_encoder(&self) -> &Encoder {
        &self.video_enc
    }

    pub fn forward(&self, fw: &mut Forward<'_>, input: &ModelInput, record: bool) -> Result<ModelOutput> {
        self.check_input(input)?;
        let mut audio_attention = None;
        let audio = if self.cfg.uses_audio() {
            let mut readouts = Vec::with_capacity(input.audio.len());
            for (i, image) in input.audio.iter().enumerate() {
                let tokens = self.audio_tokens(fw, image)?;
                let enc = self.audio_enc.encode(fw, tokens, record && i == 0)?;
                if i == 0 {
                    audio_attention = enc.attention;
                }
                readouts.push(enc.cls);
            }
            Some(if readouts.len() == 1 {
                readouts[0]
            } else {
                let stacked = fw.tape.concat_rows(&readouts)?;
                let m = fw.tape.mean_rows(stacked);
                fw.tape.reshape(m, &[1, self.cfg.encoder.dim])?
            })
        } else {
            None
        };
        let mut video_attention = None;
        let video = if self.cfg.uses_video() {
            let tokens = self.video_tokens(fw, &input.video)?;
            let enc = self.video_enc.encode(fw, tokens, record)?;
            video_attention = enc.attention;
            Some(enc.cls)
        } else {
            None
        };
        Ok(ModelOutput {
            fusion: self.head.fuse(fw, audio, video)?,
            audio_attention,
            video_attention,
        })
    }
}
