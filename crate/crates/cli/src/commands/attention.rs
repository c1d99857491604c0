use std::fmt::Write as _;
use std::path::PathBuf;

use avfuse_core::audio_image::{encode_png, extract_kinds, render_matrix, ImageConfig};
use avfuse_core::dsp::wav::read_wav;
use avfuse_core::model::Model;
use avfuse_core::nn::Forward;
use avfuse_core::tensor::Tensor;
use avfuse_core::training::{load_video, Checkpoint};
use clap::Args;
use serde::{Deserialize, Serialize};

use super::extract::parse_colormap;
use super::{create_dir, require, write_file};
use crate::failure::{CliResult, Failure};

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct AttentionArgs {
    /// Checkpoint written by `train`.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoint: Option<PathBuf>,
    /// A WAV file (audio stream) or a directory of PNG frames (video stream).
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    /// Encoder layer, counted from 0 [default: 0].
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layer: Option<usize>,
    /// Attention head, counted from 0 [default: 0].
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub head: Option<usize>,
    /// Output directory.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    /// Heatmap side in pixels [default: 256].
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolution: Option<usize>,
    /// `viridis` or `gray` [default: viridis].
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub colormap: Option<String>,
}

/// One matrix row per line, values in shortest round-trip form.
pub fn matrix_csv(m: &Tensor) -> String {
    let mut s = String::new();
    for r in 0..m.rows() {
        for (j, v) in m.row(r).iter().enumerate() {
            if j > 0 {
                s.push(',');
            }
            let _ = write!(s, "{v}");
        }
        s.push('\n');
    }
    s
}

pub fn attention(a: &AttentionArgs) -> CliResult<()> {
    let ck = Checkpoint::load(require(&a.checkpoint, "checkpoint")?)?;
    let input = require(&a.input, "input")?;
    let out = require(&a.out, "out")?;
    let cfg = &ck.model;
    let (layer, head) = (a.layer.unwrap_or(0), a.head.unwrap_or(0));
    let (layers, heads) = (cfg.encoder.layers, cfg.encoder.heads);
    if layer >= layers || head >= heads {
        return Err(Failure::config(format!(
            "layer {layer}, head {head} out of range: valid layers are 0..={}, valid heads are 0..={}",
            layers - 1,
            heads - 1
        )));
    }
    let resolution = a.resolution.unwrap_or(256);
    if resolution == 0 {
        return Err(Failure::config("--resolution must be positive"));
    }
    let colormap = parse_colormap(a.colormap.as_deref())?;

    let model = Model::new(cfg.clone())?;
    let params = ck.inference_params();
    model.check_params(params)?;
    let mut fw = Forward::eval(params);
    let (stream, record) = if input.is_dir() {
        if !cfg.uses_video() {
            return Err(Failure::config("the checkpoint has no video stream"));
        }
        let clip = load_video(input, cfg.video_frames, cfg.frame_size, cfg.channels)?;
        let tokens = model.video_tokens(&mut fw, &clip)?;
        ("video", model.video_encoder().encode(&mut fw, tokens, true)?.attention)
    } else {
        if !cfg.uses_audio() {
            return Err(Failure::config("the checkpoint has no audio stream"));
        }
        let wave = read_wav(input).map_err(avfuse_core::Error::from)?;
        let icfg = ImageConfig {
            resolution: cfg.image_size,
            colormap: cfg.colormap,
            dsp: cfg.dsp.clone(),
        };
        let kind = cfg.audio_kinds()[0];
        let stem = input.file_stem().map_or("input".into(), |s| s.to_string_lossy());
        let image = extract_kinds(&wave, &stem, &[kind], &icfg).map_err(avfuse_core::Error::from)?;
        let tokens = model.audio_tokens(&mut fw, &image[0].image.to_tensor())?;
        ("audio", model.audio_encoder().encode(&mut fw, tokens, true)?.attention)
    };
    let record = record.expect("attention was recorded");
    let m = record.get(layer, head).expect("indices validated");
    let n = m.rows();

    let base = format!("attention_{stream}_l{layer}_h{head}");
    let png = encode_png(&render_matrix(m.data(), n, n, resolution, colormap));
    create_dir(out)?;
    let csv_path = out.join(format!("{base}.csv"));
    let png_path = out.join(format!("{base}.png"));
    write_file(&csv_path, matrix_csv(m))?;
    write_file(&png_path, png)?;
    eprintln!("{stream} attention, layer {layer}, head {head}: {n}×{n}");
    println!("{}", csv_path.display());
    println!("{}", png_path.display());
    Ok(())
}
