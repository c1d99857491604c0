//! Binary checkpoint format.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "MVRT" | u32 version | u64 header length | JSON header
//! tensor block: params | tensor block: Adam m | tensor block: Adam v
//! tensor block: best params (count 0 when absent)
//! ```
//!
//! A tensor block is a `u32` count followed by, per tensor, a `u32` name
//! length, UTF-8 name, `u32` rank, `u64` dims and `f64` values.

use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::AdamState;
use super::trainer::TrainState;
use super::TrainConfig;
use crate::error::{Error, Result};
use crate::model::ModelConfig;
use crate::params::ParamStore;
use crate::tensor::Tensor;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"MVRT";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub class_names: Vec<String>,
    pub state: TrainState,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    model: ModelConfig,
    train: TrainConfig,
    class_names: Vec<String>,
    epoch: usize,
    adam_step: u64,
    rng_seed: [u8; 32],
    rng_stream: u64,
    rng_word_pos: String,
    best_accuracy: Option<f64>,
    best_epoch: usize,
    since_best: usize,
}

fn put_block(out: &mut Vec<u8>, tensors: &[(&str, &Tensor)]) {
    out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for (name, t) in tensors {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(t.shape().len() as u32).to_le_bytes());
        for &d in t.shape() {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for &v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> std::result::Result<&'a [u8], String> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| format!("truncated at byte {}", self.pos))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> std::result::Result<u32, String> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> std::result::Result<u64, String> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn block(&mut self) -> std::result::Result<Vec<(String, Tensor)>, String> {
        let count = self.u32()?;
        let mut out = Vec::new();
        for _ in 0..count {
            let len = self.u32()? as usize;
            let name = String::from_utf8(self.take(len)?.to_vec()).map_err(|e| e.to_string())?;
            let rank = self.u32()? as usize;
            let shape = (0..rank)
                .map(|_| self.u64().map(|d| d as usize))
                .collect::<std::result::Result<Vec<_>, _>>()?;
            let n = shape.iter().try_fold(1usize, |a, &d| a.checked_mul(d));
            let n = n.ok_or_else(|| format!("tensor {name} is too large"))?;
            let raw = self.take(n.checked_mul(8).ok_or("tensor too large")?)?;
            let data = raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect();
            let t = Tensor::new(shape, data).map_err(|e| format!("tensor {name}: {e}"))?;
            out.push((name, t));
        }
        Ok(out)
    }
}

fn store_from(entries: Vec<(String, Tensor)>) -> std::result::Result<ParamStore, String> {
    let mut p = ParamStore::new();
    for (n, t) in entries {
        p.insert(n, t).map_err(|e| e.to_string())?;
    }
    Ok(p)
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let s = &self.state;
        let header = Header {
            model: self.model.clone(),
            train: self.train.clone(),
            class_names: self.class_names.clone(),
            epoch: s.epoch,
            adam_step: s.adam.step,
            rng_seed: s.rng.get_seed(),
            rng_stream: s.rng.get_stream(),
            rng_word_pos: s.rng.get_word_pos().to_string(),
            best_accuracy: s.best_accuracy,
            best_epoch: s.best_epoch,
            since_best: s.since_best,
        };
        let json = serde_json::to_vec(&header).expect("header serializes");
        let mut out = Vec::new();
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        let named: Vec<(&str, &Tensor)> = s.params.iter().collect();
        put_block(&mut out, &named);
        let m: Vec<(&str, &Tensor)> = named.iter().map(|(n, _)| *n).zip(&s.adam.m).collect();
        let v: Vec<(&str, &Tensor)> = named.iter().map(|(n, _)| *n).zip(&s.adam.v).collect();
        put_block(&mut out, &m);
        put_block(&mut out, &v);
        let best: Vec<(&str, &Tensor)> = s.best_params.as_ref().map_or_else(Vec::new, |b| b.iter().collect());
        put_block(&mut out, &best);
        out
    }

    /// Parses checkpoint bytes; `path` only labels errors.
    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        let fail = |reason: String| Error::Format {
            path: path.to_path_buf(),
            what: "checkpoint",
            reason,
        };
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4).map_err(&fail)? != CHECKPOINT_MAGIC {
            return Err(fail("bad magic bytes".into()));
        }
        let version = r.u32().map_err(&fail)?;
        if version != CHECKPOINT_VERSION {
            return Err(fail(format!("unsupported format version {version}")));
        }
        let hlen = r.u64().map_err(&fail)? as usize;
        let header: Header =
            serde_json::from_slice(r.take(hlen).map_err(&fail)?).map_err(|e| fail(e.to_string()))?;
        let params = store_from(r.block().map_err(&fail)?).map_err(&fail)?;
        let m: Vec<Tensor> = r.block().map_err(&fail)?.into_iter().map(|(_, t)| t).collect();
        let v: Vec<Tensor> = r.block().map_err(&fail)?.into_iter().map(|(_, t)| t).collect();
        let best = r.block().map_err(&fail)?;
        if r.pos != bytes.len() {
            return Err(fail(format!("{} trailing bytes", bytes.len() - r.pos)));
        }
        let same = |ts: &[Tensor]| {
            ts.len() == params.len() && ts.iter().zip(params.iter()).all(|(a, (_, b))| a.shape() == b.shape())
        };
        if !same(&m) || !same(&v) {
            return Err(fail("optimizer moments do not match parameters".into()));
        }
        let best_params = if best.is_empty() {
            None
        } else {
            Some(store_from(best).map_err(&fail)?)
        };
        let mut rng = ChaCha8Rng::from_seed(header.rng_seed);
        rng.set_stream(header.rng_stream);
        rng.set_word_pos(header.rng_word_pos.parse::<u128>().map_err(|e| fail(e.to_string()))?);
        Ok(Self {
            model: header.model,
            train: header.train,
            class_names: header.class_names,
            state: TrainState {
                params,
                adam: AdamState {
                    m,
                    v,
                    step: header.adam_step,
                },
                epoch: header.epoch,
                rng,
                best_accuracy: header.best_accuracy,
                best_epoch: header.best_epoch,
                best_params,
                since_best: header.since_best,
            },
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes, path)
    }

    /// Parameters to use for inference: the best-so-far set when recorded.
    pub fn inference_params(&self) -> &ParamStore {
        self.state.best_params.as_ref().unwrap_or(&self.state.params)
    }
}
