use std::fs;
use std::path::{Path, PathBuf};

use avfuse_core::model::ModelConfig;
use avfuse_core::training::{
    load_samples, Checkpoint, DatasetManifest, EpochMetrics, Sample, TrainConfig, TrainState, Trainer,
};
use clap::Args;
use serde::{Deserialize, Serialize};

use super::{create_dir, model_config, replace_file, require};
use crate::config::read_toml;
use crate::failure::{CliResult, Failure};

pub const CHECKPOINT_FILE: &str = "checkpoint.mvrt";
pub const METRICS_FILE: &str = "metrics.csv";

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct TrainArgs {
    /// Training manifest (JSON lines).
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest: Option<PathBuf>,
    /// Held-out manifest for per-epoch accuracy; the training set is used when absent.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eval_manifest: Option<PathBuf>,
    /// Model configuration (TOML). Without it the defaults are used with the
    /// manifest's class count.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_config: Option<PathBuf>,
    /// Training configuration (TOML); absent keys take their defaults.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train_config: Option<PathBuf>,
    /// Output directory for `checkpoint.mvrt` and `metrics.csv`.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    /// Continue from a checkpoint written by an earlier run.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resume: Option<PathBuf>,
    /// Stop after this many epochs in this invocation; resume later with --resume.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop_after: Option<usize>,
}

struct Setup {
    trainer: Trainer,
    state: TrainState,
    class_names: Vec<String>,
}

fn configs(seed: Option<u64>, a: &TrainArgs, classes: usize) -> CliResult<(Option<ModelConfig>, TrainConfig)> {
    let model = a.model_config.as_deref().map(model_config).transpose()?;
    let mut train: TrainConfig = match &a.train_config {
        Some(p) => read_toml(p, "train config")?,
        None => TrainConfig::default(),
    };
    if let Some(s) = seed {
        train.seed = s;
    }
    train.validate()?;
    if let Some(m) = &model {
        if m.num_classes != classes {
            return Err(Failure::config(format!(
                "model config has {} classes but the manifest lists {classes}",
                m.num_classes
            )));
        }
    }
    Ok((model, train))
}

fn setup(seed: Option<u64>, a: &TrainArgs, manifest: &DatasetManifest) -> CliResult<Setup> {
    let classes = manifest.num_classes();
    let (model, train) = configs(seed, a, classes)?;
    let Some(resume) = &a.resume else {
        let model = model.unwrap_or_else(|| ModelConfig {
            num_classes: classes,
            ..ModelConfig::default()
        });
        let trainer = Trainer::new(model, train)?;
        let state = trainer.init_state()?;
        return Ok(Setup {
            trainer,
            state,
            class_names: manifest.class_names.clone(),
        });
    };
    let ck = Checkpoint::load(resume)?;
    if model.as_ref().is_some_and(|m| *m != ck.model) {
        return Err(Failure::config("--model-config differs from the checkpoint being resumed"));
    }
    let mut train = if a.train_config.is_some() { train } else { ck.train.clone() };
    if let Some(s) = seed {
        train.seed = s;
    }
    if train != ck.train {
        return Err(Failure::config("training configuration differs from the checkpoint being resumed"));
    }
    if ck.class_names != manifest.class_names {
        return Err(Failure::config(format!(
            "checkpoint classes {:?} differ from manifest classes {:?}",
            ck.class_names, manifest.class_names
        )));
    }
    let trainer = Trainer::new(ck.model, ck.train)?;
    trainer.model().check_params(&ck.state.params)?;
    Ok(Setup {
        trainer,
        state: ck.state,
        class_names: ck.class_names,
    })
}

/// Rows of an earlier metrics log for epochs before `epoch`.
fn earlier_rows(path: &Path, epoch: usize) -> Vec<String> {
    let Ok(text) = fs::read_to_string(path) else {
        return Vec::new();
    };
    text.lines()
        .skip(1)
        .filter(|l| {
            l.split(',')
                .next()
                .and_then(|e| e.parse::<usize>().ok())
                .is_some_and(|e| e < epoch)
        })
        .map(String::from)
        .collect()
}

fn load(path: &Path, model: &ModelConfig, exec: avfuse_core::parallel::Execution) -> CliResult<(DatasetManifest, Vec<Sample>)> {
    let m = DatasetManifest::load(path)?;
    let samples = load_samples(&m, model, exec)?;
    Ok((m, samples))
}

pub fn train(seed: Option<u64>, a: &TrainArgs) -> CliResult<()> {
    let manifest_path = require(&a.manifest, "manifest")?;
    let out = require(&a.out, "out")?;
    let manifest = DatasetManifest::load(manifest_path)?;
    let Setup {
        trainer,
        mut state,
        class_names,
    } = setup(seed, a, &manifest)?;
    let exec = trainer.config().execution;
    let (_, train_set) = load(manifest_path, trainer.model().config(), exec)?;
    let eval_set = match &a.eval_manifest {
        None => Vec::new(),
        Some(p) => {
            let (m, s) = load(p, trainer.model().config(), exec)?;
            if m.class_names != class_names {
                return Err(Failure::config(format!(
                    "{} lists classes {:?}, training uses {:?}",
                    p.display(),
                    m.class_names,
                    class_names
                )));
            }
            s
        }
    };
    eprint!(
        "effective model configuration:\n{}effective training configuration:\n{}",
        toml::to_string(trainer.model().config()).unwrap_or_default(),
        toml::to_string(trainer.config()).unwrap_or_default()
    );
    eprintln!(
        "training on {} samples ({} held out), {} parameters",
        train_set.len(),
        eval_set.len(),
        state.params.scalar_count()
    );

    create_dir(out)?;
    let metrics_path = out.join(METRICS_FILE);
    let ckpt_path = out.join(CHECKPOINT_FILE);
    let mut log = vec![EpochMetrics::HEADER.to_string()];
    log.extend(earlier_rows(&metrics_path, state.epoch));
    let save = |state: &TrainState, log: &[String]| -> CliResult<()> {
        let ck = Checkpoint {
            model: trainer.model().config().clone(),
            train: trainer.config().clone(),
            class_names: class_names.clone(),
            state: state.clone(),
        };
        replace_file(&ckpt_path, ck.to_bytes())?;
        replace_file(&metrics_path, log.join("\n") + "\n")
    };

    let mut ran = 0;
    while !trainer.should_stop(&state) && a.stop_after.is_none_or(|n| ran < n) {
        let m = trainer.run_epoch(&mut state, &train_set, &eval_set)?;
        ran += 1;
        log.push(m.csv_row());
        save(&state, &log)?;
        eprintln!(
            "epoch {:>3}  lr {:.6}  loss {:.4}  accuracy {:.4}",
            m.epoch, m.lr, m.train_loss, m.eval_accuracy
        );
    }
    if ran == 0 {
        save(&state, &log)?;
    }
    let stop = if !trainer.should_stop(&state) {
        "paused"
    } else if state.epoch < trainer.config().max_epochs {
        "stopped early"
    } else {
        "finished"
    };
    eprintln!(
        "{stop} after {} epochs; best accuracy {:.4} at epoch {}",
        state.epoch,
        state.best_accuracy.unwrap_or(0.0),
        state.best_epoch
    );
    println!("{}", ckpt_path.display());
    Ok(())
}
