mod attention;
mod eval;
mod extract;
mod flops;
mod synth;
mod train;

use std::fs;
use std::path::{Path, PathBuf};

use avfuse_core::model::ModelConfig;

use crate::config::read_toml;
use crate::failure::{CliResult, Failure};

pub use attention::{attention, AttentionArgs};
pub use eval::{eval, EvalArgs};
pub use extract::{extract, ExtractArgs};
pub use flops::{flops, FlopsArgs};
pub use synth::{synth, SynthArgs};
pub use train::{train, TrainArgs};

fn require<'a, T>(value: &'a Option<T>, flag: &str) -> CliResult<&'a T> {
    value
        .as_ref()
        .ok_or_else(|| Failure::config(format!("missing required --{flag}")))
}

fn model_config(path: &Path) -> CliResult<ModelConfig> {
    let cfg: ModelConfig = read_toml(path, "model config")?;
    cfg.validate()?;
    Ok(cfg)
}

fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| Failure::io(dir, e))
}

fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> CliResult<()> {
    fs::write(path, bytes).map_err(|e| Failure::io(path, e))
}

/// Writes through a sibling temporary file so readers never see a partial file.
fn replace_file(path: &Path, bytes: impl AsRef<[u8]>) -> CliResult<()> {
    let mut tmp = PathBuf::from(path);
    tmp.set_extension("partial");
    write_file(&tmp, bytes)?;
    fs::rename(&tmp, path).map_err(|e| Failure::io(path, e))
}
