//! Seeded synthetic audio/video dataset.
//!
//! Class `c` of `C` pairs a tone at `220·2^(c·step/12)` Hz, with
//! `step = max(1, ⌊12 / C⌋)` semitones, and a square that travels across the
//! frame at angle `2πc / C`. Each sample jitters pitch (±0.25 semitone),
//! amplitude, phase and start position, and adds Gaussian noise to both
//! modalities.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::dataset::{DatasetManifest, ManifestEntry, Split};
use crate::audio_image::{write_png, RgbImage};
use crate::dsp::{wav::write_wav, Waveform};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub num_classes: usize,
    pub per_class: usize,
    pub seed: u64,
    pub split: Split,
    pub sample_rate: u32,
    pub duration_secs: f64,
    pub frames: usize,
    pub frame_size: usize,
    pub audio_noise: f64,
    /// Pixel noise standard deviation, in 0–255 units.
    pub video_noise: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            num_classes: 4,
            per_class: 16,
            seed: 0,
            split: Split::Train,
            sample_rate: 22050,
            duration_secs: 1.0,
            frames: 4,
            frame_size: 32,
            audio_noise: 0.05,
            video_noise: 12.0,
        }
    }
}

pub const NOTE_NAMES: [&str; 12] = ["A", "A#", "B", "C", "C#", "D", "D#", "E", "F", "F#", "G", "G#"];

fn class_step(classes: usize) -> usize {
    (12 / classes).max(1)
}

/// Base tone frequency of a class.
pub fn class_frequency(class: usize, classes: usize) -> f64 {
    220.0 * 2f64.powf((class * class_step(classes)) as f64 / 12.0)
}

fn class_name(class: usize, classes: usize) -> String {
    let note = NOTE_NAMES[(class * class_step(classes)) % 12];
    let deg = 360 * class / classes;
    format!("c{class}_{note}_dir{deg}")
}

fn tone(class: usize, cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> Result<Waveform> {
    let semis = rng.random_range(-0.25..0.25);
    let f = class_frequency(class, cfg.num_classes) * 2f64.powf(semis / 12.0);
    let amp = rng.random_range(0.35..0.55);
    let phase = rng.random_range(0.0..2.0 * PI);
    let noise = Normal::new(0.0, cfg.audio_noise).expect("finite std");
    let rate = cfg.sample_rate as f64;
    let n = (cfg.duration_secs * rate).round() as usize;
    let samples = (0..n)
        .map(|i| {
            let t = i as f64 / rate;
            let x = amp * (2.0 * PI * f * t + phase).sin()
                + 0.3 * amp * (4.0 * PI * f * t + phase).sin();
            x + noise.sample(rng)
        })
        .collect();
    Ok(Waveform::new(samples, cfg.sample_rate)?)
}

fn frames(class: usize, cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> Vec<RgbImage> {
    let s = cfg.frame_size as f64;
    let side = (cfg.frame_size / 4).max(2) as f64;
    let angle = 2.0 * PI * class as f64 / cfg.num_classes as f64;
    let speed = s / 10.0;
    let (dx, dy) = (speed * angle.cos(), speed * angle.sin());
    let mid = (cfg.frames as f64 - 1.0) / 2.0;
    let jx = rng.random_range(-s / 16.0..s / 16.0);
    let jy = rng.random_range(-s / 16.0..s / 16.0);
    let noise = Normal::new(0.0, cfg.video_noise).expect("finite std");
    (0..cfg.frames)
        .map(|t| {
            let cx = s / 2.0 + jx + dx * (t as f64 - mid);
            let cy = s / 2.0 + jy + dy * (t as f64 - mid);
            let mut img = RgbImage::filled(cfg.frame_size, cfg.frame_size, [0, 0, 0]);
            for y in 0..cfg.frame_size {
                for x in 0..cfg.frame_size {
                    let inside = ((x as f64 + 0.5) - cx).abs() <= side / 2.0
                        && ((y as f64 + 0.5) - cy).abs() <= side / 2.0;
                    let base = if inside { [230.0, 200.0, 60.0] } else { [20.0, 30.0, 60.0] };
                    let px = base.map(|b| (b + noise.sample(rng)).round().clamp(0.0, 255.0) as u8);
                    img.put(x, y, px);
                }
            }
            img
        })
        .collect()
}

/// Generates `num_classes · per_class` samples under `out`, writing
/// `<split>/<id>.wav`, `<split>/<id>/NNN.png` frames, `<split>.jsonl` and
/// `classes.txt`. Returns the manifest path and contents.
pub fn synth_dataset(out: &Path, cfg: &SynthConfig) -> Result<(PathBuf, DatasetManifest)> {
    if cfg.num_classes < 2 {
        return Err(Error::Config(format!(
            "need at least 2 classes, got {}",
            cfg.num_classes
        )));
    }
    if cfg.per_class == 0 || cfg.frames == 0 || cfg.frame_size < 4 {
        return Err(Error::Config(
            "per_class and frames must be positive and frame_size at least 4".into(),
        ));
    }
    if !(cfg.audio_noise >= 0.0 && cfg.video_noise >= 0.0) {
        return Err(Error::Config("noise levels must be non-negative".into()));
    }
    let split_dir = out.join(cfg.split.name());
    fs::create_dir_all(&split_dir).map_err(|e| Error::io(&split_dir, e))?;
    let stream_base = match cfg.split {
        Split::Train => 0,
        Split::Test => 1 << 32,
    };
    let mut entries = Vec::new();
    for class in 0..cfg.num_classes {
        for k in 0..cfg.per_class {
            let index = class * cfg.per_class + k;
            let id = format!("{}_{index:04}", cfg.split.name());
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(stream_base + index as u64);
            let wave = tone(class, cfg, &mut rng)?;
            let audio = PathBuf::from(cfg.split.name()).join(format!("{id}.wav"));
            write_wav(&out.join(&audio), &wave)?;
            let video = PathBuf::from(cfg.split.name()).join(&id);
            let vdir = out.join(&video);
            fs::create_dir_all(&vdir).map_err(|e| Error::io(&vdir, e))?;
            for (t, img) in frames(class, cfg, &mut rng).iter().enumerate() {
                write_png(&vdir.join(format!("{t:03}.png")), img)?;
            }
            entries.push(ManifestEntry {
                id,
                audio,
                video,
                label: class,
            });
        }
    }
    let manifest = DatasetManifest {
        entries,
        class_names: (0..cfg.num_classes).map(|c| class_name(c, cfg.num_classes)).collect(),
        split: cfg.split,
        root: out.to_path_buf(),
    };
    let path = manifest.write(out)?;
    Ok((path, manifest))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::pitch_class;

    #[test]
    fn class_tones_have_distinct_pitch_classes() {
        for classes in [2, 3, 4, 6, 12] {
            let pcs: std::collections::HashSet<_> =
                (0..classes).map(|c| pitch_class(class_frequency(c, classes))).collect();
            assert_eq!(pcs.len(), classes);
        }
    }

    #[test]
    fn names_are_unique() {
        let names: std::collections::HashSet<_> = (0..8).map(|c| class_name(c, 8)).collect();
        assert_eq!(names.len(), 8);
    }
}
