use std::path::PathBuf;

use avfuse_core::audio_image::{encode_png, extract_kinds, AudioImage, Colormap, ImageConfig, RepresentationKind};
use avfuse_core::dsp::wav::read_wav;
use avfuse_core::parallel::{self, Execution};
use avfuse_core::training::DatasetManifest;
use clap::Args;
use serde::{Deserialize, Serialize};

use super::{create_dir, require, write_file};
use crate::failure::{CliResult, Failure};

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct ExtractArgs {
    /// A single WAV file; images are named after its file stem.
    #[arg(long, conflicts_with = "manifest")]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub audio: Option<PathBuf>,
    /// A JSON-lines manifest; every entry's audio is rendered.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest: Option<PathBuf>,
    /// Output directory for `<id>.<kind>.png` files.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    /// Square image side in pixels (at least 32) [default: 224].
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolution: Option<usize>,
    /// Comma-separated representations [default: all six].
    #[arg(long, value_delimiter = ',')]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kinds: Option<Vec<String>>,
    /// `viridis` or `gray` [default: viridis].
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub colormap: Option<String>,
}

pub(super) fn parse_colormap(name: Option<&str>) -> CliResult<Colormap> {
    match name.unwrap_or("viridis") {
        "viridis" => Ok(Colormap::Viridis),
        "gray" => Ok(Colormap::Gray),
        other => Err(Failure::config(format!("unknown colormap '{other}' (expected viridis or gray)"))),
    }
}

fn sources(a: &ExtractArgs) -> CliResult<Vec<(String, PathBuf)>> {
    match (&a.audio, &a.manifest) {
        (Some(wav), None) => {
            let id = wav
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .ok_or_else(|| Failure::config(format!("{} has no file name", wav.display())))?;
            Ok(vec![(id, wav.clone())])
        }
        (None, Some(m)) => {
            let m = DatasetManifest::load(m)?;
            Ok(m.entries.iter().map(|e| (e.id.clone(), m.resolve(&e.audio))).collect())
        }
        _ => Err(Failure::config("give exactly one of --audio or --manifest")),
    }
}

pub fn extract(a: &ExtractArgs) -> CliResult<()> {
    let out = require(&a.out, "out")?;
    let kinds: Vec<RepresentationKind> = match &a.kinds {
        None => RepresentationKind::ALL.to_vec(),
        Some(list) => list
            .iter()
            .map(|k| k.trim().parse().map_err(Failure::config))
            .collect::<CliResult<_>>()?,
    };
    if kinds.is_empty() {
        return Err(Failure::config("--kinds is empty"));
    }
    let cfg = ImageConfig {
        resolution: a.resolution.unwrap_or(224),
        colormap: parse_colormap(a.colormap.as_deref())?,
        ..ImageConfig::default()
    };
    let jobs = sources(a)?;
    let rendered: Vec<CliResult<Vec<AudioImage>>> = parallel::map(Execution::Parallel, &jobs, |(id, path)| {
        let wave = read_wav(path).map_err(avfuse_core::Error::from)?;
        Ok(extract_kinds(&wave, id, &kinds, &cfg).map_err(avfuse_core::Error::from)?)
    });
    let images: Vec<AudioImage> = rendered
        .into_iter()
        .collect::<CliResult<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    create_dir(out)?;
    for img in &images {
        let path = out.join(img.file_name());
        write_file(&path, encode_png(&img.image))?;
        println!("{}", path.display());
    }
    eprintln!("wrote {} images from {} clips to {}", images.len(), jobs.len(), out.display());
    Ok(())
}
