use std::path::PathBuf;

use avfuse_core::training::{evaluate, load_samples, Checkpoint, DatasetManifest};
use clap::Args;
use serde::{Deserialize, Serialize};

use super::{create_dir, model_config, require, write_file};
use crate::failure::{CliResult, Failure};

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct EvalArgs {
    /// Manifest to evaluate on.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest: Option<PathBuf>,
    /// Checkpoint written by `train`; its best-so-far parameters are used.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoint: Option<PathBuf>,
    /// Optional model configuration that must match the checkpoint.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_config: Option<PathBuf>,
    /// Directory for `confusion.csv` [default: current directory].
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

pub fn eval(a: &EvalArgs) -> CliResult<()> {
    let ck = Checkpoint::load(require(&a.checkpoint, "checkpoint")?)?;
    let manifest = DatasetManifest::load(require(&a.manifest, "manifest")?)?;
    if let Some(p) = &a.model_config {
        let m = model_config(p)?;
        if m != ck.model {
            return Err(Failure::config(format!(
                "{} does not match the checkpoint's model configuration",
                p.display()
            )));
        }
    }
    if manifest.num_classes() != ck.model.num_classes {
        return Err(Failure::config(format!(
            "manifest lists {} classes but the checkpoint was trained on {}",
            manifest.num_classes(),
            ck.model.num_classes
        )));
    }
    if manifest.class_names != ck.class_names {
        eprintln!("warning: manifest class names differ from the checkpoint's; matching by index");
    }
    let model = avfuse_core::model::Model::new(ck.model.clone())?;
    let params = ck.inference_params();
    model.check_params(params)?;
    let samples = load_samples(&manifest, &ck.model, ck.train.execution)?;
    let result = evaluate(&model, params, &samples, ck.train.execution)?;

    let out = a.out.clone().unwrap_or_else(|| PathBuf::from("."));
    create_dir(&out)?;
    let path = out.join("confusion.csv");
    write_file(&path, result.confusion.to_csv(&ck.class_names))?;
    eprintln!(
        "{} of {} correct; confusion matrix in {}",
        result.confusion.trace(),
        result.confusion.total(),
        path.display()
    );
    println!("accuracy: {:.6}", result.accuracy);
    Ok(())
}
