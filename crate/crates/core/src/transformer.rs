//! Pre-norm transformer encoder with multi-head self-attention.

use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::Forward;
use crate::params::{normal_tensor, ParamStore};
use crate::tensor::{FlopClass, FlopCounter, Tensor, Var};

pub const LN_EPS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Readout {
    #[default]
    Cls,
    MeanPool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncoderConfig {
    pub layers: usize,
    pub dim: usize,
    pub heads: usize,
    pub mlp_ratio: usize,
    pub dropout: f64,
    pub readout: Readout,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self {
            layers: 4,
            dim: 64,
            heads: 4,
            mlp_ratio: 4,
            dropout: 0.1,
            readout: Readout::Cls,
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.layers == 0 {
            return Err(Error::Config("encoder needs at least one layer".into()));
        }
        if self.heads == 0 || self.dim == 0 || !self.dim.is_multiple_of(self.heads) {
            return Err(Error::Config(format!(
                "token width {} is not divisible by {} heads",
                self.dim, self.heads
            )));
        }
        if self.mlp_ratio == 0 {
            return Err(Error::Config("mlp_ratio must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!(
                "dropout {} outside [0, 1)",
                self.dropout
            )));
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.dim / self.heads
    }

    pub fn hidden(&self) -> usize {
        self.dim * self.mlp_ratio
    }
}

/// Attention matrices indexed `[layer][head]`, each `[n, n]`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AttentionRecord {
    pub layers: Vec<Vec<Tensor>>,
}

impl AttentionRecord {
    pub fn get(&self, layer: usize, head: usize) -> Option<&Tensor> {
        self.layers.get(layer).and_then(|l| l.get(head))
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn num_heads(&self) -> usize {
        self.layers.first().map_or(0, Vec::len)
    }
}

pub struct Encoded {
    /// `[1, d]` readout embedding.
    pub cls: Var,
    /// `[n, d]` normalized output tokens.
    pub tokens: Var,
    pub attention: Option<AttentionRecord>,
}

/// A named encoder: its parameters live under `prefix`.
#[derive(Debug, Clone)]
pub struct Encoder {
    prefix: String,
    cfg: EncoderConfig,
}

impl Encoder {
    pub fn new(prefix: &str, cfg: EncoderConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            prefix: prefix.to_string(),
            cfg,
        })
    }

    pub fn config(&self) -> &EncoderConfig {
        &self.cfg
    }

    fn name(&self, layer: usize, leaf: &str) -> String {
        format!("{}.layers.{layer}.{leaf}", self.prefix)
    }

    /// Registers all layer weights. Output projections start at zero so each
    /// block begins as the identity map.
    pub fn register(&self, params: &mut ParamStore, rng: &mut impl Rng) -> Result<()> {
        let (d, h) = (self.cfg.dim, self.cfg.hidden());
        for l in 0..self.cfg.layers {
            let mut put = |leaf: &str, t: Tensor| params.insert(self.name(l, leaf), t);
            put("ln1.gain", Tensor::ones(&[d]))?;
            put("ln1.bias", Tensor::zeros(&[d]))?;
            put("attn.wq", normal_tensor(&[d, d], 0.02, rng))?;
            put("attn.bq", Tensor::zeros(&[d]))?;
            put("attn.wk", normal_tensor(&[d, d], 0.02, rng))?;
            put("attn.wv", normal_tensor(&[d, d], 0.02, rng))?;
            put("attn.bv", Tensor::zeros(&[d]))?;
            put("attn.wo", Tensor::zeros(&[d, d]))?;
            put("attn.bo", Tensor::zeros(&[d]))?;
            put("ln2.gain", Tensor::ones(&[d]))?;
            put("ln2.bias", Tensor::zeros(&[d]))?;
            put("mlp.w1", normal_tensor(&[d, h], 0.02, rng))?;
            put("mlp.b1", Tensor::zeros(&[h]))?;
            put("mlp.w2", Tensor::zeros(&[h, d]))?;
            put("mlp.b2", Tensor::zeros(&[d]))?;
        }
        params.insert(format!("{}.norm.gain", self.prefix), Tensor::ones(&[d]))?;
        params.insert(format!("{}.norm.bias", self.prefix), Tensor::zeros(&[d]))?;
        Ok(())
    }

    fn layernorm(&self, fw: &mut Forward<'_>, x: Var, gain: &str, bias: &str) -> Result<Var> {
        let g = fw.param(gain)?;
        let b = fw.param(bias)?;
        Ok(fw.tape.layernorm(x, g, b, LN_EPS)?)
    }

    /// Multi-head self-attention over `[n, d]` tokens, output projection
    /// included. Returns the per-head attention matrices when `record`.
    pub fn mhsa(
        &self,
        fw: &mut Forward<'_>,
        layer: usize,
        x: Var,
        record: bool,
    ) -> Result<(Var, Vec<Tensor>)> {
        let n = |leaf: &str| self.name(layer, leaf);
        let q = fw.linear(FlopClass::AttentionProjection, x, &n("attn.wq"), Some(&n("attn.bq")))?;
        let k = fw.linear(FlopClass::AttentionProjection, x, &n("attn.wk"), None)?;
        let v = fw.linear(FlopClass::AttentionProjection, x, &n("attn.wv"), Some(&n("attn.bv")))?;
        let dh = self.cfg.head_dim();
        let scale = 1.0 / (dh as f64).sqrt();
        let mut heads = Vec::with_capacity(self.cfg.heads);
        let mut maps = Vec::new();
        for h in 0..self.cfg.heads {
            let t = &mut fw.tape;
            let qh = t.slice_cols(q, h * dh, dh)?;
            let kh = t.slice_cols(k, h * dh, dh)?;
            let vh = t.slice_cols(v, h * dh, dh)?;
            let kt = t.transpose(kh)?;
            let scores = t.matmul_as(FlopClass::AttentionScore, qh, kt)?;
            let scores = t.scale(scores, scale);
            let a = t.softmax(scores)?;
            if record {
                maps.push(t.value(a).clone());
            }
            heads.push(t.matmul_as(FlopClass::AttentionMix, a, vh)?);
        }
        let mixed = fw.tape.concat_cols(&heads)?;
        let out = fw.linear(FlopClass::AttentionProjection, mixed, &n("attn.wo"), Some(&n("attn.bo")))?;
        Ok((out, maps))
    }

    /// One pre-norm block: `x + drop(mhsa(ln x))`, then `+ drop(mlp(ln ·))`.
    pub fn layer(
        &self,
        fw: &mut Forward<'_>,
        layer: usize,
        x: Var,
        record: bool,
    ) -> Result<(Var, Vec<Tensor>)> {
        let n = |leaf: &str| self.name(layer, leaf);
        let p = self.cfg.dropout;
        let h = self.layernorm(fw, x, &n("ln1.gain"), &n("ln1.bias"))?;
        let (a, maps) = self.mhsa(fw, layer, h, record)?;
        let a = fw.dropout(a, p)?;
        let x = fw.tape.add(x, a)?;
        let h = self.layernorm(fw, x, &n("ln2.gain"), &n("ln2.bias"))?;
        let h = fw.linear(FlopClass::Mlp, h, &n("mlp.w1"), Some(&n("mlp.b1")))?;
        let h = fw.tape.gelu(h);
        let h = fw.linear(FlopClass::Mlp, h, &n("mlp.w2"), Some(&n("mlp.b2")))?;
        let h = fw.dropout(h, p)?;
        Ok((fw.tape.add(x, h)?, maps))
    }

    /// Runs all layers and the final layer norm over `[n, d]` tokens whose
    /// first row is the CLS token.
    pub fn encode(&self, fw: &mut Forward<'_>, tokens: Var, record: bool) -> Result<Encoded> {
        let width = fw.tape.value(tokens).last_dim();
        if width != self.cfg.dim {
            return Err(Error::Config(format!(
                "tokens have width {width}, encoder expects {}",
                self.cfg.dim
            )));
        }
        let mut x = tokens;
        let mut rec = AttentionRecord::default();
        for l in 0..self.cfg.layers {
            let (y, maps) = self.layer(fw, l, x, record)?;
            x = y;
            rec.layers.push(maps);
        }
        let norm_g = format!("{}.norm.gain", self.prefix);
        let norm_b = format!("{}.norm.bias", self.prefix);
        let out = self.layernorm(fw, x, &norm_g, &norm_b)?;
        let cls = match self.cfg.readout {
            Readout::Cls => fw.tape.slice_rows(out, 0, 1)?,
            Readout::MeanPool => {
                let m = fw.tape.mean_rows(out);
                fw.tape.reshape(m, &[1, self.cfg.dim])?
            }
        };
        Ok(Encoded {
            cls,
            tokens: out,
            attention: record.then_some(rec),
        })
    }
}

/// Multiply-accumulates of one eval-mode encoder pass over `n` tokens,
/// with freshly initialized weights and zero inputs.
pub fn measure_macs(cfg: &EncoderConfig, n: usize) -> Result<FlopCounter> {
    let enc = Encoder::new("profile", cfg.clone())?;
    let mut params = ParamStore::new();
    enc.register(&mut params, &mut rand_chacha::ChaCha8Rng::seed_from_u64(0))?;
    let mut fw = Forward::eval(&params);
    let x = fw.input(Tensor::zeros(&[n, cfg.dim]));
    enc.encode(&mut fw, x, false)?;
    Ok(fw.tape.flops().clone())
}
