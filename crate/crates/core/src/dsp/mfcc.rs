use super::{DspError, FeatureKind, FeatureSeries, Result, Spectrogram};

/// Floor applied before the logarithm of mel energies.
pub const LOG_FLOOR: f64 = 1e-10;

/// Floor on the per-channel standard deviation in feature scaling.
pub const STD_FLOOR: f64 = 1e-8;

/// HTK mel scale.
pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular filters with centres evenly spaced in mel between 0 Hz and
/// Nyquist, evaluated at each STFT bin frequency. Returns `n_mels` rows of
/// `window_size / 2 + 1` weights.
pub fn mel_filterbank(n_mels: usize, window_size: usize, sample_rate: u32) -> Vec<Vec<f64>> {
    let bins = window_size / 2 + 1;
    let nyquist = sample_rate as f64 / 2.0;
    let top = hz_to_mel(nyquist);
    let edges: Vec<f64> = (0..n_mels + 2)
        .map(|i| mel_to_hz(top * i as f64 / (n_mels + 1) as f64))
        .collect();
    let bin_hz: Vec<f64> = (0..bins)
        .map(|k| k as f64 * sample_rate as f64 / window_size as f64)
        .collect();
    (0..n_mels)
        .map(|m| {
            let (lo, centre, hi) = (edges[m], edges[m + 1], edges[m + 2]);
            bin_hz
                .iter()
                .map(|&f| {
                    let rising = (f - lo) / (centre - lo);
                    let falling = (hi - f) / (hi - centre);
                    rising.min(falling).max(0.0)
                })
                .collect()
        })
        .collect()
}

/// First `n_out` coefficients of the orthonormal DCT-II of `input`.
pub fn dct_ii_orthonormal(input: &[f64], n_out: usize) -> Vec<f64> {
    let n = input.len() as f64;
    (0..n_out)
        .map(|k| {
            let scale = if k == 0 { (1.0 / n).sqrt() } else { (2.0 / n).sqrt() };
            let sum: f64 = input
                .iter()
                .enumerate()
                .map(|(i, x)| {
                    x * (std::f64::consts::PI * k as f64 * (2.0 * i as f64 + 1.0) / (2.0 * n)).cos()
                })
                .sum();
            scale * sum
        })
        .collect()
}

/// Mel-frequency cepstral coefficients from the power spectrum.
pub fn mfcc(s: &Spectrogram, n_mels: usize, n_mfcc: usize) -> Result<FeatureSeries> {
    if n_mfcc == 0 || n_mfcc > n_mels {
        return Err(DspError::InvalidParameter(format!(
            "need 1 ≤ n_mfcc ({n_mfcc}) ≤ n_mels ({n_mels})"
        )));
    }
    let bank = mel_filterbank(n_mels, s.window_size(), s.sample_rate());
    let mut values = Vec::with_capacity(s.frames() * n_mfcc);
    let mut log_mel = vec![0.0; n_mels];
    for f in 0..s.frames() {
        let frame = s.frame(f);
        for (out, filter) in log_mel.iter_mut().zip(&bank) {
            let energy: f64 = filter.iter().zip(frame).map(|(w, m)| w * m * m).sum();
            *out = energy.max(LOG_FLOOR).ln();
        }
        values.extend(dct_ii_orthonormal(&log_mel, n_mfcc));
    }
    FeatureSeries::new(FeatureKind::Mfcc, s.frames(), n_mfcc, values)
}

/// Standardizes each coefficient over frames to zero mean, unit variance.
pub fn mfcc_feature_scaled(m: &FeatureSeries) -> Result<FeatureSeries> {
    if m.kind() != FeatureKind::Mfcc {
        return Err(DspError::InvalidParameter(format!(
            "feature scaling expects mfcc input, got {}",
            m.kind()
        )));
    }
    if m.frames() < 2 {
        return Err(DspError::InvalidParameter(format!(
            "feature scaling needs at least 2 frames, got {}",
            m.frames()
        )));
    }
    let (frames, channels) = (m.frames(), m.channels());
    let mut values = m.values().to_vec();
    for c in 0..channels {
        let mean = (0..frames).map(|f| m.get(f, c)).sum::<f64>() / frames as f64;
        let var = (0..frames).map(|f| (m.get(f, c) - mean).powi(2)).sum::<f64>() / frames as f64;
        let std = var.sqrt();
        for f in 0..frames {
            values[f * channels + c] = if std < STD_FLOOR {
                0.0
            } else {
                (m.get(f, c) - mean) / std
            };
        }
    }
    FeatureSeries::new(FeatureKind::MfccScaled, frames, channels, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::{stft, Waveform};
    use proptest::prelude::*;

    #[test]
    fn mel_scale_round_trip() {
        for hz in [0.0, 100.0, 700.0, 4000.0, 11025.0] {
            assert!((mel_to_hz(hz_to_mel(hz)) - hz).abs() < 1e-9);
        }
        assert!((hz_to_mel(700.0) - 2595.0 * 2f64.log10()).abs() < 1e-12);
    }

    #[test]
    fn dct_of_constant_has_only_dc() {
        let c = dct_ii_orthonormal(&[-4.2; 128], 20);
        assert!((c[0] - (-4.2 * 128f64.sqrt())).abs() < 1e-9);
        for (k, v) in c.iter().enumerate().skip(1) {
            assert!(v.abs() < 1e-9, "coefficient {k} = {v}");
        }
    }

    #[test]
    fn dct_is_orthonormal() {
        let x: Vec<f64> = (0..16).map(|i| (i as f64 * 0.37).sin()).collect();
        let c = dct_ii_orthonormal(&x, 16);
        let e1: f64 = x.iter().map(|v| v * v).sum();
        let e2: f64 = c.iter().map(|v| v * v).sum();
        assert!((e1 - e2).abs() < 1e-12);
    }

    #[test]
    fn silence_hits_the_floor() {
        let w = Waveform::new(vec![0.0; 4096], 22050).unwrap();
        let s = stft(&w, 2048, 512).unwrap();
        let m = mfcc(&s, 128, 20).unwrap();
        for f in 0..m.frames() {
            assert!((m.get(f, 0) - 128f64.sqrt() * LOG_FLOOR.ln()).abs() < 1e-9);
            for c in 1..20 {
                assert!(m.get(f, c).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn filters_cover_every_band() {
        let bank = mel_filterbank(128, 2048, 22050);
        assert_eq!(bank.len(), 128);
        for (i, f) in bank.iter().enumerate() {
            assert!(f.iter().any(|w| *w > 0.0), "filter {i} is empty");
            assert!(f.iter().all(|w| (0.0..=1.0).contains(w)));
        }
    }

    #[test]
    fn n_mfcc_bounds() {
        let s = Spectrogram::from_magnitudes(vec![1.0; 9], 16, 4, 16000).unwrap();
        assert!(mfcc(&s, 8, 9).is_err());
        assert!(mfcc(&s, 8, 0).is_err());
    }

    #[test]
    fn scaling_constant_channel_is_zero() {
        let m = FeatureSeries::new(FeatureKind::Mfcc, 3, 2, vec![1.0, 5.0, 2.0, 5.0, 3.0, 5.0])
            .unwrap();
        let s = mfcc_feature_scaled(&m).unwrap();
        assert_eq!(s.kind(), FeatureKind::MfccScaled);
        for f in 0..3 {
            assert_eq!(s.get(f, 1), 0.0);
        }
    }

    #[test]
    fn scaling_needs_two_frames() {
        let m = FeatureSeries::new(FeatureKind::Mfcc, 1, 2, vec![1.0, 2.0]).unwrap();
        assert!(mfcc_feature_scaled(&m).is_err());
    }

    proptest! {
        #[test]
        fn scaling_standardizes(values in prop::collection::vec(-50.0f64..50.0, 12..60)) {
            let frames = values.len() / 3;
            let m = FeatureSeries::new(FeatureKind::Mfcc, frames, 3, values[..frames * 3].to_vec()).unwrap();
            let s = mfcc_feature_scaled(&m).unwrap();
            for c in 0..3 {
                let col: Vec<f64> = (0..frames).map(|f| s.get(f, c)).collect();
                let orig: Vec<f64> = (0..frames).map(|f| m.get(f, c)).collect();
                let spread = orig.iter().cloned().fold(f64::MIN, f64::max)
                    - orig.iter().cloned().fold(f64::MAX, f64::min);
                let mean = col.iter().sum::<f64>() / frames as f64;
                prop_assert!(mean.abs() < 1e-9);
                if spread > 1e-3 {
                    let var = col.iter().map(|v| v * v).sum::<f64>() / frames as f64;
                    prop_assert!((var.sqrt() - 1.0).abs() < 1e-6);
                }
            }
        }

        #[test]
        fn scaling_is_affine_invariant(
            values in prop::collection::vec(-20.0f64..20.0, 10..40),
            a in 0.1f64..10.0,
            b in -5.0f64..5.0,
        ) {
            let frames = values.len() / 2;
            let v = values[..frames * 2].to_vec();
            let m = FeatureSeries::new(FeatureKind::Mfcc, frames, 2, v.clone()).unwrap();
            let m2 = FeatureSeries::new(FeatureKind::Mfcc, frames, 2, v.iter().map(|x| a * x + b).collect()).unwrap();
            let s1 = mfcc_feature_scaled(&m).unwrap();
            let s2 = mfcc_feature_scaled(&m2).unwrap();
            for (x, y) in s1.values().iter().zip(s2.values()) {
                prop_assert!((x - y).abs() < 1e-6);
            }
        }
    }
}
