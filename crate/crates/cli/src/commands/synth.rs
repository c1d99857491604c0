use std::path::PathBuf;

use avfuse_core::training::{synth_dataset, Split, SynthConfig};
use clap::Args;
use serde::{Deserialize, Serialize};

use super::require;
use crate::failure::{CliResult, Failure};

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct SynthArgs {
    /// Dataset root; the manifest is written as `<out>/<split>.jsonl`.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    /// Number of classes [default: 4].
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classes: Option<usize>,
    /// Samples per class [default: 16].
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_class: Option<usize>,
    /// `train` or `test` [default: train].
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<String>,
    /// Clip length in seconds [default: 1.0].
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration: Option<f64>,
    /// Video frames per clip [default: 4].
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frames: Option<usize>,
    /// Video frame side in pixels [default: 32].
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame_size: Option<usize>,
}

pub fn synth(seed: Option<u64>, a: &SynthArgs) -> CliResult<()> {
    let out = require(&a.out, "out")?;
    let d = SynthConfig::default();
    let split = match a.split.as_deref().unwrap_or("train") {
        "train" => Split::Train,
        "test" => Split::Test,
        other => return Err(Failure::config(format!("unknown split '{other}' (expected train or test)"))),
    };
    let cfg = SynthConfig {
        num_classes: a.classes.unwrap_or(d.num_classes),
        per_class: a.per_class.unwrap_or(d.per_class),
        seed: seed.unwrap_or(d.seed),
        split,
        duration_secs: a.duration.unwrap_or(d.duration_secs),
        frames: a.frames.unwrap_or(d.frames),
        frame_size: a.frame_size.unwrap_or(d.frame_size),
        ..d
    };
    if cfg.per_class == 0 {
        return Err(Failure::config("--per-class must be positive"));
    }
    if !(cfg.duration_secs > 0.0 && cfg.duration_secs.is_finite()) {
        return Err(Failure::config(format!("--duration must be positive, got {}", cfg.duration_secs)));
    }
    if cfg.frames == 0 || cfg.frame_size < 4 {
        return Err(Failure::config("need at least one frame of at least 4×4 pixels"));
    }
    let (path, manifest) = synth_dataset(out, &cfg)?;
    eprintln!(
        "generated {} samples over {} classes",
        manifest.entries.len(),
        manifest.num_classes()
    );
    println!("{}", path.display());
    Ok(())
}
