//! Audio/video fusion head: per-modality projections, single-head cross
//! attention over the two embeddings, a GELU MLP and linear classifiers.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::Forward;
use crate::params::{normal_tensor, ParamStore};
use crate::tensor::{FlopClass, Tensor, Var};

/// Which encoder streams feed the head.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modality {
    #[default]
    Both,
    AudioOnly,
    VideoOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FusionConfig {
    /// Shared fusion width; `None` uses the encoder width.
    pub dim: Option<usize>,
    pub cross_attention: bool,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            dim: None,
            cross_attention: true,
        }
    }
}

pub struct FusionOutput {
    pub logits: Var,
    /// Present only when both modalities are fused.
    pub aux_audio: Option<Var>,
    pub aux_video: Option<Var>,
    pub fused: Var,
}

const P: &str = "fusion";

fn n(leaf: &str) -> String {
    format!("{P}.{leaf}")
}

#[derive(Debug, Clone)]
pub struct FusionHead {
    input_dim: usize,
    dim: usize,
    classes: usize,
    modality: Modality,
    cross_attention: bool,
}

impl FusionHead {
    pub fn new(
        cfg: &FusionConfig,
        input_dim: usize,
        classes: usize,
        modality: Modality,
    ) -> Result<Self> {
        if classes < 2 {
            return Err(Error::Config(format!(
                "need at least 2 classes, got {classes}"
            )));
        }
        let dim = cfg.dim.unwrap_or(input_dim);
        if dim == 0 {
            return Err(Error::Config("fusion width must be positive".into()));
        }
        Ok(Self {
            input_dim,
            dim,
            classes,
            modality,
            cross_attention: cfg.cross_attention && modality == Modality::Both,
        })
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn register(&self, params: &mut ParamStore, rng: &mut impl Rng) -> Result<()> {
        let (d, f, c) = (self.input_dim, self.dim, self.classes);
        let mut gauss = |p: &mut ParamStore, name: &str, shape: &[usize], std: f64| {
            p.insert(n(name), normal_tensor(shape, std, rng))
        };
        let zeros = |p: &mut ParamStore, name: &str, len: usize| p.insert(n(name), Tensor::zeros(&[len]));
        let fan_in = |rows: usize| 1.0 / (rows as f64).sqrt();
        let both = self.modality == Modality::Both;
        if self.modality != Modality::VideoOnly {
            gauss(params, "proj_audio.weight", &[d, f], fan_in(d))?;
            zeros(params, "proj_audio.bias", f)?;
        }
        if self.modality != Modality::AudioOnly {
            gauss(params, "proj_video.weight", &[d, f], fan_in(d))?;
            zeros(params, "proj_video.bias", f)?;
        }
        if self.cross_attention {
            for w in ["attn.wq", "attn.wk", "attn.wv"] {
                gauss(params, w, &[f, f], fan_in(f))?;
            }
        }
        let joined = if both { 2 * f } else { f };
        gauss(params, "mlp.w1", &[joined, f], fan_in(joined))?;
        zeros(params, "mlp.b1", f)?;
        gauss(params, "mlp.w2", &[f, f], fan_in(f))?;
        zeros(params, "mlp.b2", f)?;
        let heads: &[&str] = if both { &["head", "aux_audio", "aux_video"] } else { &["head"] };
        for h in heads {
            gauss(params, &format!("{h}.weight"), &[f, c], 0.02)?;
            zeros(params, &format!("{h}.bias"), c)?;
        }
        Ok(())
    }

    fn check_width(&self, fw: &Forward<'_>, x: Var, which: &str) -> Result<()> {
        let shape = fw.tape.value(x).shape();
        if shape != [1, self.input_dim] {
            return Err(Error::Config(format!(
                "{which} embedding has shape {shape:?}, fusion expects [1, {}]",
                self.input_dim
            )));
        }
        Ok(())
    }

    fn project(&self, fw: &mut Forward<'_>, x: Var, which: &str) -> Result<Var> {
        self.check_width(fw, x, which)?;
        Ok(fw.linear(
            FlopClass::Fusion,
            x,
            &n(&format!("proj_{which}.weight")),
            Some(&n(&format!("proj_{which}.bias"))),
        )?)
    }

    /// Cross attention over `[a; v]` with a residual: row 0 is the audio
    /// query's result, row 1 the video query's.
    fn cross_attend(&self, fw: &mut Forward<'_>, a: Var, v: Var) -> Result<(Var, Var)> {
        let s = fw.tape.concat_rows(&[a, v])?;
        let q = fw.linear(FlopClass::Fusion, s, &n("attn.wq"), None)?;
        let k = fw.linear(FlopClass::Fusion, s, &n("attn.wk"), None)?;
        let val = fw.linear(FlopClass::Fusion, s, &n("attn.wv"), None)?;
        let t = &mut fw.tape;
        let kt = t.transpose(k)?;
        let scores = t.matmul_as(FlopClass::Fusion, q, kt)?;
        let scores = t.scale(scores, 1.0 / (self.dim as f64).sqrt());
        let att = t.softmax(scores)?;
        let mixed = t.matmul_as(FlopClass::Fusion, att, val)?;
        let out = t.add(s, mixed)?;
        Ok((t.slice_rows(out, 0, 1)?, t.slice_rows(out, 1, 1)?))
    }

    fn head(&self, fw: &mut Forward<'_>, x: Var, which: &str) -> Result<Var> {
        Ok(fw.linear(
            FlopClass::Classifier,
            x,
            &n(&format!("{which}.weight")),
            Some(&n(&format!("{which}.bias"))),
        )?)
    }

    /// Fuses `[1, d]` readout embeddings. The embedding of a modality that
    /// this head does not use is ignored and may be `None`.
    pub fn fuse(&self, fw: &mut Forward<'_>, audio: Option<Var>, video: Option<Var>) -> Result<FusionOutput> {
        let need = |x: Option<Var>, which: &str| {
            x.ok_or_else(|| Error::Config(format!("fusion head needs a {which} embedding")))
        };
        let (joined, aux) = match self.modality {
            Modality::Both => {
                let a = self.project(fw, need(audio, "audio")?, "audio")?;
                let v = self.project(fw, need(video, "video")?, "video")?;
                let (ra, rv) = if self.cross_attention {
                    self.cross_attend(fw, a, v)?
                } else {
                    (a, v)
                };
                let joined = fw.tape.concat_cols(&[ra, rv])?;
                let aa = self.head(fw, a, "aux_audio")?;
                let av = self.head(fw, v, "aux_video")?;
                (joined, Some((aa, av)))
            }
            Modality::AudioOnly => (self.project(fw, need(audio, "audio")?, "audio")?, None),
            Modality::VideoOnly => (self.project(fw, need(video, "video")?, "video")?, None),
        };
        let h = fw.linear(FlopClass::Fusion, joined, &n("mlp.w1"), Some(&n("mlp.b1")))?;
        let h = fw.tape.gelu(h);
        let fused = fw.linear(FlopClass::Fusion, h, &n("mlp.w2"), Some(&n("mlp.b2")))?;
        let logits = self.head(fw, fused, "head")?;
        Ok(FusionOutput {
            logits,
            aux_audio: aux.map(|a| a.0),
            aux_video: aux.map(|a| a.1),
            fused,
        })
    }
}

/// `CE(logits) + λa·CE(aux_audio) + λv·CE(aux_video)`; auxiliary terms are
/// skipped when the output has no auxiliary heads.
pub fn multimodal_loss(
    fw: &mut Forward<'_>,
    out: &FusionOutput,
    label: usize,
    lambda_audio: f64,
    lambda_video: f64,
) -> Result<Var> {
    if lambda_audio < 0.0 || lambda_video < 0.0 {
        return Err(Error::Config(format!(
            "loss weights must be non-negative, got {lambda_audio} and {lambda_video}"
        )));
    }
    let t = &mut fw.tape;
    let mut loss = t.cross_entropy(out.logits, label)?;
    for (aux, lambda) in [(out.aux_audio, lambda_audio), (out.aux_video, lambda_video)] {
        if let Some(aux) = aux {
            let ce = t.cross_entropy(aux, label)?;
            let ce = t.scale(ce, lambda);
            loss = t.add(loss, ce)?;
        }
    }
    Ok(loss)
}

/// Index of the largest logit; the lowest index wins ties.
pub fn predict(logits: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in logits.iter().enumerate() {
        if v > logits[best] {
            best = i;
        }
    }
    best
}
