use super::{DspError, FeatureKind, FeatureSeries, Result, Spectrogram};

/// Lowest frequency folded into the chromagram (C1).
const CHROMA_MIN_HZ: f64 = 32.703;

/// Magnitude-weighted mean frequency per frame; silent frames give 0.
pub fn spectral_centroid(s: &Spectrogram) -> FeatureSeries {
    let freqs = s.bin_frequencies();
    let values = (0..s.frames())
        .map(|f| {
            let frame = s.frame(f);
            let total: f64 = frame.iter().sum();
            if total > 0.0 {
                frame.iter().zip(freqs).map(|(m, hz)| m * hz).sum::<f64>() / total
            } else {
                0.0
            }
        })
        .collect();
    FeatureSeries::new(FeatureKind::Centroid, s.frames(), 1, values).expect("one value per frame")
}

/// Lowest bin frequency whose cumulative magnitude reaches `fraction` of the
/// frame total; silent frames give 0.
pub fn spectral_rolloff(s: &Spectrogram, fraction: f64) -> Result<FeatureSeries> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(DspError::InvalidParameter(format!(
            "rolloff fraction {fraction} outside (0, 1)"
        )));
    }
    let freqs = s.bin_frequencies();
    let values = (0..s.frames())
        .map(|f| {
            let frame = s.frame(f);
            let total: f64 = frame.iter().sum();
            if total <= 0.0 {
                return 0.0;
            }
            let threshold = fraction * total;
            let mut cumulative = 0.0;
            for (m, hz) in frame.iter().zip(freqs) {
                cumulative += m;
                if cumulative >= threshold {
                    return *hz;
                }
            }
            *freqs.last().expect("at least one bin")
        })
        .collect();
    FeatureSeries::new(FeatureKind::Rolloff, s.frames(), 1, values)
}

/// Pitch class of `hz` with C = 0 and A = 9 (A4 = 440 Hz).
pub fn pitch_class(hz: f64) -> usize {
    let semitones = (12.0 * (hz / 440.0).log2()).round() as i64;
    (semitones + 9).rem_euclid(12) as usize
}

/// Bin energy folded into 12 pitch classes, each frame scaled to max 1.
pub fn chromagram(s: &Spectrogram) -> Result<FeatureSeries> {
    if s.sample_rate() < 8000 {
        return Err(DspError::InvalidParameter(format!(
            "chroma needs a sample rate of at least 8000 Hz, got {}",
            s.sample_rate()
        )));
    }
    let classes: Vec<Option<usize>> = s
        .bin_frequencies()
        .iter()
        .map(|&hz| (hz >= CHROMA_MIN_HZ).then(|| pitch_class(hz)))
        .collect();
    let mut values = vec![0.0; s.frames() * 12];
    for f in 0..s.frames() {
        let row = &mut values[f * 12..(f + 1) * 12];
        for (m, class) in s.frame(f).iter().zip(&classes) {
            if let Some(c) = class {
                row[*c] += m * m;
            }
        }
        let max = row.iter().copied().fold(0.0, f64::max);
        if max > 0.0 {
            row.iter_mut().for_each(|v| *v /= max);
        }
    }
    FeatureSeries::new(FeatureKind::Chroma, s.frames(), 12, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::{stft, Waveform};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sine(freq: f64, secs: f64, amp: f64) -> Waveform {
        let n = (22050.0 * secs) as usize;
        Waveform::new(
            (0..n)
                .map(|i| amp * (2.0 * std::f64::consts::PI * freq * i as f64 / 22050.0).sin())
                .collect(),
            22050,
        )
        .unwrap()
    }

    fn one_hot_spectrum(k: usize) -> Spectrogram {
        let mut m = vec![0.0; 9];
        m[k] = 3.5;
        Spectrogram::from_magnitudes(m, 16, 4, 16000).unwrap()
    }

    #[test]
    fn centroid_of_single_bin() {
        let s = one_hot_spectrum(3);
        assert_eq!(spectral_centroid(&s).values(), &[s.bin_frequencies()[3]]);
    }

    #[test]
    fn centroid_of_flat_spectrum() {
        let s = Spectrogram::from_magnitudes(vec![0.7; 9], 16, 4, 16000).unwrap();
        let mean = s.bin_frequencies().iter().sum::<f64>() / 9.0;
        assert!((spectral_centroid(&s).values()[0] - mean).abs() < 1e-9);
    }

    #[test]
    fn centroid_of_silence_is_zero() {
        let s = Spectrogram::from_magnitudes(vec![0.0; 18], 16, 4, 16000).unwrap();
        assert_eq!(spectral_centroid(&s).values(), &[0.0, 0.0]);
        assert_eq!(spectral_rolloff(&s, 0.85).unwrap().values(), &[0.0, 0.0]);
    }

    #[test]
    fn centroid_of_1khz_tone() {
        let s = stft(&sine(1000.0, 1.0, 0.5), 2048, 512).unwrap();
        for c in spectral_centroid(&s).values() {
            assert!((c - 1000.0).abs() <= s.bin_width(), "centroid {c}");
        }
    }

    #[test]
    fn rolloff_single_and_two_bins() {
        let s = one_hot_spectrum(5);
        assert_eq!(spectral_rolloff(&s, 0.85).unwrap().values(), &[s.bin_frequencies()[5]]);

        let mut m = vec![0.0; 9];
        m[2] = 1.0;
        m[6] = 1.0;
        let s = Spectrogram::from_magnitudes(m, 16, 4, 16000).unwrap();
        assert_eq!(spectral_rolloff(&s, 0.85).unwrap().values(), &[s.bin_frequencies()[6]]);
    }

    #[test]
    fn rolloff_fraction_checked() {
        let s = one_hot_spectrum(1);
        assert!(spectral_rolloff(&s, 0.0).is_err());
        assert!(spectral_rolloff(&s, 1.0).is_err());
    }

    #[test]
    fn white_noise_rolloff_near_expected() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let samples: Vec<f64> = (0..2048 + 512 * 149).map(|_| rng.random_range(-0.5..0.5)).collect();
        let w = Waveform::new(samples, 22050).unwrap();
        let s = stft(&w, 2048, 512).unwrap();
        assert!(s.frames() >= 100);
        let mut r = spectral_rolloff(&s, 0.85).unwrap().values().to_vec();
        r.sort_by(f64::total_cmp);
        let median = r[r.len() / 2];
        let target = 0.85 * 11025.0;
        assert!((median - target).abs() / target < 0.05, "median {median}");
    }

    #[test]
    fn pitch_classes() {
        assert_eq!(pitch_class(440.0), 9);
        assert_eq!(pitch_class(523.25), 0);
        assert_eq!(pitch_class(261.63), 0);
        assert_eq!(pitch_class(220.0), 9);
        assert_eq!(pitch_class(246.94), 11);
    }

    #[test]
    fn chroma_tones() {
        for (freq, class) in [(440.0, 9), (523.25, 0)] {
            let s = stft(&sine(freq, 0.5, 0.5), 2048, 512).unwrap();
            let c = chromagram(&s).unwrap();
            assert_eq!(c.channels(), 12);
            for f in 0..c.frames() {
                let frame = c.frame(f);
                let argmax = (0..12).max_by(|&a, &b| frame[a].total_cmp(&frame[b])).unwrap();
                assert_eq!(argmax, class, "{freq} Hz frame {f}");
                assert_eq!(frame[argmax], 1.0);
                assert!(frame.iter().all(|v| (0.0..=1.0).contains(v)));
            }
        }
    }

    #[test]
    fn chroma_of_silence() {
        let s = stft(&Waveform::new(vec![0.0; 4096], 22050).unwrap(), 2048, 512).unwrap();
        assert!(chromagram(&s).unwrap().values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn chroma_needs_reasonable_rate() {
        let s = Spectrogram::from_magnitudes(vec![1.0; 9], 16, 4, 4000).unwrap();
        assert!(chromagram(&s).is_err());
    }
}
