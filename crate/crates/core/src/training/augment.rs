//! Optional training-time augmentation of preprocessed inputs.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelInput;
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentConfig {
    pub random_crop: bool,
    /// Side of the crop window as a fraction of the image side.
    pub crop_fraction: f64,
    pub time_stretch: bool,
    /// Stretch rates are drawn uniformly from `[min, max]`.
    pub stretch_range: [f64; 2],
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            random_crop: false,
            crop_fraction: 0.875,
            time_stretch: false,
            stretch_range: [0.8, 1.25],
        }
    }
}

impl AugmentConfig {
    pub fn enabled(&self) -> bool {
        self.random_crop || self.time_stretch
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.crop_fraction > 0.0 && self.crop_fraction <= 1.0) {
            return Err(Error::Config(format!(
                "crop_fraction {} outside (0, 1]",
                self.crop_fraction
            )));
        }
        let [lo, hi] = self.stretch_range;
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return Err(Error::Config(format!("invalid stretch range [{lo}, {hi}]")));
        }
        Ok(())
    }

    /// Augments the audio images of `input` in place.
    pub fn apply(&self, input: &mut ModelInput, rng: &mut impl Rng) {
        for img in &mut input.audio {
            if self.time_stretch {
                let [lo, hi] = self.stretch_range;
                let rate = if lo == hi { lo } else { rng.random_range(lo..=hi) };
                *img = time_stretch_columns(img, rate);
            }
            if self.random_crop {
                *img = random_crop(img, self.crop_fraction, rng);
            }
        }
    }
}

/// Crops a random `fraction`-sized window of an `[H, W, C]` image and scales
/// it back to `H × W` by nearest neighbour.
pub fn random_crop(img: &Tensor, fraction: f64, rng: &mut impl Rng) -> Tensor {
    let [h, w, c] = [img.shape()[0], img.shape()[1], img.shape()[2]];
    let ch = ((h as f64 * fraction).round() as usize).clamp(1, h);
    let cw = ((w as f64 * fraction).round() as usize).clamp(1, w);
    let y0 = rng.random_range(0..=h - ch);
    let x0 = rng.random_range(0..=w - cw);
    let src = img.data();
    Tensor::from_fn(&[h, w, c], |i| {
        let (y, x, k) = (i / (w * c), (i / c) % w, i % c);
        let sy = y0 + y * ch / h;
        let sx = x0 + x * cw / w;
        src[(sy * w + sx) * c + k]
    })
}

/// Resamples the time (column) axis of an `[H, W, C]` image: output column
/// `x` reads input column `⌊x·rate⌋`, clamped to the last column.
pub fn time_stretch_columns(img: &Tensor, rate: f64) -> Tensor {
    let [h, w, c] = [img.shape()[0], img.shape()[1], img.shape()[2]];
    let src = img.data();
    Tensor::from_fn(&[h, w, c], |i| {
        let (y, x, k) = (i / (w * c), (i / c) % w, i % c);
        let sx = ((x as f64 * rate) as usize).min(w - 1);
        src[(y * w + sx) * c + k]
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_settings() {
        let img = Tensor::from_fn(&[8, 8, 3], |i| i as f64);
        assert_eq!(time_stretch_columns(&img, 1.0), img);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(random_crop(&img, 1.0, &mut rng), img);
    }

    #[test]
    fn double_rate_skips_columns() {
        let img = Tensor::from_fn(&[1, 4, 1], |i| i as f64);
        assert_eq!(time_stretch_columns(&img, 2.0).data(), &[0.0, 2.0, 3.0, 3.0]);
    }

    #[test]
    fn rejects_bad_ranges() {
        let cfg = AugmentConfig {
            stretch_range: [1.2, 0.9],
            ..AugmentConfig::default()
        };
        assert!(cfg.validate().is_err());
        assert!(!AugmentConfig::default().enabled());
    }
}
