//! DSP outputs compared against direct, unoptimized reference computations.

use std::f64::consts::PI;

use avfuse_core::dsp::{
    chromagram, dct_ii_orthonormal, mfcc, pitch_class, spectral_centroid, stft, Waveform,
};

const RATE: u32 = 22050;
const N: usize = 2048;
const HOP: usize = 512;

fn sine(freq: f64, samples: usize) -> Waveform {
    Waveform::new(
        (0..samples)
            .map(|i| 0.5 * (2.0 * PI * freq * i as f64 / RATE as f64).sin())
            .collect(),
        RATE,
    )
    .unwrap()
}

/// Magnitudes of a periodic-Hann-windowed frame by the defining DFT sum.
fn naive_frame(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    (0..=n / 2)
        .map(|k| {
            let (mut re, mut im) = (0.0, 0.0);
            for (t, &v) in x.iter().enumerate() {
                let w = 0.5 - 0.5 * (2.0 * PI * t as f64 / n as f64).cos();
                let ang = -2.0 * PI * (k * t) as f64 / n as f64;
                re += w * v * ang.cos();
                im += w * v * ang.sin();
            }
            re.hypot(im)
        })
        .collect()
}

#[test]
fn stft_matches_direct_dft() {
    let w = sine(440.0, 5000);
    let s = stft(&w, N, HOP).unwrap();
    assert_eq!(s.frames(), 1 + (5000 - N) / HOP);
    for f in [0, s.frames() - 1] {
        let reference = naive_frame(&w.samples()[f * HOP..f * HOP + N]);
        for (a, b) in s.frame(f).iter().zip(&reference) {
            assert!((a - b).abs() < 1e-9 * (1.0 + b.abs()), "{a} vs {b}");
        }
    }
}

#[test]
fn sine_440_peaks_at_bin_41() {
    let s = stft(&sine(440.0, RATE as usize), N, HOP).unwrap();
    for f in 0..s.frames() {
        let row = s.frame(f);
        let arg = (0..row.len()).max_by(|&a, &b| row[a].total_cmp(&row[b])).unwrap();
        assert_eq!(arg, 41);
    }
}

#[test]
fn centroid_of_1khz_within_one_bin() {
    let s = stft(&sine(1000.0, RATE as usize), N, HOP).unwrap();
    let c = spectral_centroid(&s);
    let bin = RATE as f64 / N as f64;
    for f in 0..c.frames() {
        assert!((c.get(f, 0) - 1000.0).abs() < bin, "frame {f}: {}", c.get(f, 0));
    }
}

#[test]
fn c5_chroma_is_c() {
    let s = stft(&sine(523.2511, RATE as usize), N, HOP).unwrap();
    let ch = chromagram(&s).unwrap();
    let c = pitch_class(523.2511);
    assert_eq!(c, 0, "chroma classes start at C");
    for f in 0..ch.frames() {
        let row = ch.frame(f);
        let arg = (0..12).max_by(|&a, &b| row[a].total_cmp(&row[b])).unwrap();
        assert_eq!(arg, c);
    }
}

#[test]
fn constant_log_mel_leaves_only_dc() {
    for level in [-23.0, 0.0, 3.5] {
        let c = dct_ii_orthonormal(&[level; 128], 20);
        for v in &c[1..] {
            assert!(v.abs() < 1e-9);
        }
    }
}

/// Independent MFCC: mel edges via the natural-log mel formula, explicit
/// triangle construction, an orthonormal DCT basis built row by row.
fn reference_mfcc(mags: &[f64], n_mels: usize, n_mfcc: usize) -> Vec<f64> {
    let mel = |f: f64| 1127.0 * (1.0 + f / 700.0).ln();
    let inv = |m: f64| 700.0 * ((m / 1127.0).exp() - 1.0);
    let top = mel(RATE as f64 / 2.0);
    let pts: Vec<f64> = (0..n_mels + 2).map(|i| inv(top * i as f64 / (n_mels + 1) as f64)).collect();
    let mut log_mel = vec![0.0; n_mels];
    for m in 0..n_mels {
        let mut e = 0.0;
        for (k, mag) in mags.iter().enumerate() {
            let f = k as f64 * RATE as f64 / N as f64;
            let w = if f > pts[m] && f <= pts[m + 1] {
                (f - pts[m]) / (pts[m + 1] - pts[m])
            } else if f > pts[m + 1] && f < pts[m + 2] {
                (pts[m + 2] - f) / (pts[m + 2] - pts[m + 1])
            } else {
                0.0
            };
            e += w * mag * mag;
        }
        log_mel[m] = e.max(1e-10).ln();
    }
    (0..n_mfcc)
        .map(|k| {
            let basis: Vec<f64> = (0..n_mels)
                .map(|i| (PI / n_mels as f64 * (i as f64 + 0.5) * k as f64).cos())
                .collect();
            let norm = basis.iter().map(|b| b * b).sum::<f64>().sqrt();
            basis.iter().zip(&log_mel).map(|(b, x)| b * x).sum::<f64>() / norm
        })
        .collect()
}

#[test]
fn mfcc_440_matches_reference() {
    let w = sine(440.0, 4096);
    let s = stft(&w, N, HOP).unwrap();
    let m = mfcc(&s, 128, 20).unwrap();
    for f in 0..s.frames() {
        let reference = reference_mfcc(&naive_frame(&w.samples()[f * HOP..f * HOP + N]), 128, 20);
        for (c, r) in reference.iter().enumerate() {
            let got = m.get(f, c);
            assert!((got - r).abs() < 1e-6 * (1.0 + r.abs()), "frame {f} coef {c}: {got} vs {r}");
        }
    }
}
