use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::{DspError, Result, Spectrogram, Waveform};

/// Periodic Hann window of length `n`.
pub(crate) fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos())
        .collect()
}

/// Magnitude STFT without padding: `1 + (len − window) / hop` frames.
pub fn stft(w: &Waveform, window_size: usize, hop: usize) -> Result<Spectrogram> {
    if !window_size.is_power_of_two() || window_size < 2 {
        return Err(DspError::InvalidParameter(format!(
            "window size {window_size} is not a power of two"
        )));
    }
    if hop == 0 || hop > window_size {
        return Err(DspError::InvalidParameter(format!(
            "hop {hop} must be in 1..={window_size}"
        )));
    }
    let samples = w.samples();
    if samples.len() < window_size {
        return Err(DspError::InputTooShort {
            len: samples.len(),
            window: window_size,
        });
    }
    let frames = 1 + (samples.len() - window_size) / hop;
    let bins = window_size / 2 + 1;
    let window = hann(window_size);
    let fft = FftPlanner::<f64>::new().plan_fft_forward(window_size);

    let mut magnitudes = Vec::with_capacity(frames * bins);
    let mut buf = vec![Complex::new(0.0, 0.0); window_size];
    for f in 0..frames {
        let start = f * hop;
        for (b, (s, win)) in buf
            .iter_mut()
            .zip(samples[start..start + window_size].iter().zip(&window))
        {
            *b = Complex::new(s * win, 0.0);
        }
        fft.process(&mut buf);
        magnitudes.extend(buf[..bins].iter().map(|c| c.norm()));
    }
    Spectrogram::from_magnitudes(magnitudes, window_size, hop, w.sample_rate())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sine(freq: f64, rate: u32, secs: f64, amp: f64) -> Waveform {
        let n = (rate as f64 * secs) as usize;
        let samples = (0..n)
            .map(|i| amp * (2.0 * std::f64::consts::PI * freq * i as f64 / rate as f64).sin())
            .collect();
        Waveform::new(samples, rate).unwrap()
    }

    #[test]
    fn frame_count() {
        let w = Waveform::new(vec![0.0; 5000], 22050).unwrap();
        let s = stft(&w, 2048, 512).unwrap();
        assert_eq!(s.frames(), 1 + (5000 - 2048) / 512);
        assert_eq!(s.bins(), 1025);
    }

    #[test]
    fn silence_is_silent() {
        let w = Waveform::new(vec![0.0; 4096], 22050).unwrap();
        let s = stft(&w, 2048, 512).unwrap();
        assert!(s.magnitudes().iter().all(|m| *m == 0.0));
    }

    #[test]
    fn too_short() {
        let w = Waveform::new(vec![0.0; 100], 22050).unwrap();
        assert!(matches!(
            stft(&w, 2048, 512),
            Err(DspError::InputTooShort { len: 100, window: 2048 })
        ));
    }

    #[test]
    fn bad_parameters() {
        let w = Waveform::new(vec![0.0; 4096], 22050).unwrap();
        assert!(stft(&w, 1000, 512).is_err());
        assert!(stft(&w, 1024, 2048).is_err());
        assert!(stft(&w, 1024, 0).is_err());
    }

    #[test]
    fn sine_peaks_at_closed_form_bin() {
        let w = sine(440.0, 22050, 1.0, 0.8);
        let s = stft(&w, 2048, 512).unwrap();
        let expected = (440.0f64 * 2048.0 / 22050.0).round() as usize;
        assert_eq!(expected, 41);
        for f in 0..s.frames() {
            let frame = s.frame(f);
            let argmax = (0..frame.len())
                .max_by(|&a, &b| frame[a].total_cmp(&frame[b]))
                .unwrap();
            assert_eq!(argmax, expected, "frame {f}");
        }
    }

    #[test]
    fn parseval_against_time_domain_energy() {
        let w = sine(1234.5, 22050, 0.3, 0.6);
        let noisy: Vec<f64> = w
            .samples()
            .iter()
            .enumerate()
            .map(|(i, s)| s + 0.1 * ((i * 7919 % 1000) as f64 / 1000.0 - 0.5))
            .collect();
        let w = Waveform::new(noisy, 22050).unwrap();
        let s = stft(&w, 1024, 256).unwrap();
        let win = hann(1024);
        for f in 0..s.frames() {
            let direct: f64 = w.samples()[f * 256..f * 256 + 1024]
                .iter()
                .zip(&win)
                .map(|(x, h)| (x * h) * (x * h))
                .sum();
            let rel = (s.frame_energy(f) - direct).abs() / direct;
            assert!(rel < 1e-6, "frame {f}: rel {rel}");
        }
    }
}
