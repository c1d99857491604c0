//! JSON-lines manifests and sample preprocessing.
//!
//! A manifest `<name>.jsonl` holds one `{"id", "audio", "video", "label"}`
//! object per line. Class names live one per line in `classes.txt` beside
//! it. Paths are resolved against the manifest's directory; a video is a
//! directory of PNG frames with numeric file stems.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::audio_image::{extract_kinds, read_png, ImageConfig};
use crate::dsp::wav::read_wav;
use crate::error::{Error, Result};
use crate::model::{ModelConfig, ModelInput};
use crate::parallel::{self, Execution};
use crate::tensor::Tensor;

pub const CLASSES_FILE: &str = "classes.txt";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }

    /// A manifest whose file stem mentions "test" is a test split.
    pub fn from_path(path: &Path) -> Split {
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("");
        if stem.to_ascii_lowercase().contains("test") {
            Split::Test
        } else {
            Split::Train
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub id: String,
    pub audio: PathBuf,
    pub video: PathBuf,
    pub label: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub entries: Vec<ManifestEntry>,
    pub class_names: Vec<String>,
    pub split: Split,
    /// Directory that relative entry paths are resolved against.
    pub root: PathBuf,
}

impl DatasetManifest {
    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.root.join(p)
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let root = path.parent().map_or_else(PathBuf::new, Path::to_path_buf);
        let classes_path = root.join(CLASSES_FILE);
        let class_text = fs::read_to_string(&classes_path).map_err(|e| Error::io(&classes_path, e))?;
        let class_names: Vec<String> = class_text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(String::from)
            .collect();
        if class_names.len() < 2 {
            return Err(Error::Format {
                path: classes_path,
                what: "class list",
                reason: format!("needs at least 2 classes, found {}", class_names.len()),
            });
        }
        let mut entries = Vec::new();
        let mut seen = HashSet::new();
        for (n, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let fmt_err = |reason: String| Error::Format {
                path: path.to_path_buf(),
                what: "manifest",
                reason: format!("line {}: {reason}", n + 1),
            };
            let e: ManifestEntry = serde_json::from_str(line).map_err(|e| fmt_err(e.to_string()))?;
            if e.label >= class_names.len() {
                return Err(fmt_err(format!(
                    "label {} outside 0..{}",
                    e.label,
                    class_names.len()
                )));
            }
            if !seen.insert(e.id.clone()) {
                return Err(fmt_err(format!("duplicate id {}", e.id)));
            }
            entries.push(e);
        }
        if entries.is_empty() {
            return Err(Error::Format {
                path: path.to_path_buf(),
                what: "manifest",
                reason: "no entries".into(),
            });
        }
        let manifest = Self {
            entries,
            class_names,
            split: Split::from_path(path),
            root,
        };
        for e in &manifest.entries {
            for (p, what) in [(&e.audio, "audio file"), (&e.video, "video directory")] {
                let full = manifest.resolve(p);
                if !full.exists() {
                    return Err(Error::io(&full, format!("{what} not found")).in_sample(&e.id));
                }
            }
        }
        Ok(manifest)
    }

    /// Writes `<dir>/<split>.jsonl` and `<dir>/classes.txt`.
    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let mut body = String::new();
        for e in &self.entries {
            body.push_str(&serde_json::to_string(e).expect("plain struct serializes"));
            body.push('\n');
        }
        let path = dir.join(format!("{}.jsonl", self.split.name()));
        fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
        let classes = dir.join(CLASSES_FILE);
        let mut names = self.class_names.join("\n");
        names.push('\n');
        fs::write(&classes, names).map_err(|e| Error::io(&classes, e))?;
        Ok(path)
    }
}

/// A decoded, model-ready sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub id: String,
    pub label: usize,
    pub input: ModelInput,
}

fn frame_index(path: &Path) -> Option<u64> {
    if path.extension().and_then(|e| e.to_str()) != Some("png") {
        return None;
    }
    let stem = path.file_stem()?.to_str()?;
    let digits: String = stem.chars().filter(char::is_ascii_digit).collect();
    digits.parse().ok()
}

/// Loads a `[frames, size, size, channels]` clip from a directory of
/// numbered PNGs, uniformly subsampled in time and nearest-neighbour
/// resized. Pixels map to `[-1, 1]`; one channel means luma.
pub fn load_video(dir: &Path, frames: usize, size: usize, channels: usize) -> Result<Tensor> {
    let listing = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut files: Vec<(u64, PathBuf)> = listing
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter_map(|p| frame_index(&p).map(|i| (i, p)))
        .collect();
    if files.is_empty() {
        return Err(Error::io(dir, "no numbered PNG frames"));
    }
    if channels != 1 && channels != 3 {
        return Err(Error::Config(format!("video channels must be 1 or 3, got {channels}")));
    }
    files.sort();
    let mut data = Vec::with_capacity(frames * size * size * channels);
    for t in 0..frames {
        let path = &files[t * files.len() / frames].1;
        let img = read_png(path)?;
        let (w, h) = (img.width(), img.height());
        for y in 0..size {
            for x in 0..size {
                let px = img.get(x * w / size, y * h / size);
                if channels == 3 {
                    data.extend(px.iter().map(|&v| v as f64 / 127.5 - 1.0));
                } else {
                    let luma = (px[0] as f64 + px[1] as f64 + px[2] as f64) / 3.0;
                    data.push(luma / 127.5 - 1.0);
                }
            }
        }
    }
    Ok(Tensor::new(vec![frames, size, size, channels], data)?)
}

fn load_one(m: &DatasetManifest, e: &ManifestEntry, cfg: &ModelConfig) -> Result<Sample> {
    let audio = if cfg.uses_audio() {
        let wave = read_wav(&m.resolve(&e.audio))?;
        let icfg = ImageConfig {
            resolution: cfg.image_size,
            colormap: cfg.colormap,
            dsp: cfg.dsp.clone(),
        };
        extract_kinds(&wave, &e.id, &cfg.audio_kinds(), &icfg)?
            .iter()
            .map(|a| a.image.to_tensor())
            .collect()
    } else {
        Vec::new()
    };
    let video = if cfg.uses_video() {
        load_video(&m.resolve(&e.video), cfg.video_frames, cfg.frame_size, cfg.channels)?
    } else {
        Tensor::zeros(&[1])
    };
    Ok(Sample {
        id: e.id.clone(),
        label: e.label,
        input: ModelInput { audio, video },
    })
}

/// Decodes every manifest entry. Work is spread over threads under
/// [`Execution::Parallel`]; the result order always follows the manifest.
pub fn load_samples(m: &DatasetManifest, cfg: &ModelConfig, exec: Execution) -> Result<Vec<Sample>> {
    if m.num_classes() != cfg.num_classes {
        return Err(Error::Config(format!(
            "manifest lists {} classes but the model is configured for {}",
            m.num_classes(),
            cfg.num_classes
        )));
    }
    parallel::map(exec, &m.entries, |e| load_one(m, e, cfg).map_err(|err| err.in_sample(&e.id)))
        .into_iter()
        .collect()
}
