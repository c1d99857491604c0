//! PCM WAV input and output.

use std::fs::File;
use std::io::{BufReader, Read};
use std::path::Path;

use super::{DspError, Result, Waveform};

/// Reads integer PCM or 32-bit float WAV, downmixing to mono.
pub fn read_wav(path: &Path) -> Result<Waveform> {
    let read_err = |reason: String| DspError::Read {
        path: path.to_path_buf(),
        reason,
    };
    let mut head = [0u8; 4];
    File::open(path)
        .and_then(|mut f| f.read_exact(&mut head))
        .map_err(|e| read_err(e.to_string()))?;
    if let Some(codec) = sniff_compressed(&head) {
        return Err(DspError::UnsupportedCodec {
            path: path.to_path_buf(),
            reason: format!("{codec} data is not PCM WAV"),
        });
    }

    let reader = hound::WavReader::new(BufReader::new(
        File::open(path).map_err(|e| read_err(e.to_string()))?,
    ))
    .map_err(|e| match e {
        hound::Error::Unsupported => DspError::UnsupportedCodec {
            path: path.to_path_buf(),
            reason: "only PCM integer and 32-bit float WAV are supported".into(),
        },
        other => read_err(other.to_string()),
    })?;
    let spec = reader.spec();
    let samples: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Float, 32) => reader
            .into_samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<std::result::Result<_, _>>(),
        (hound::SampleFormat::Int, bits @ 8..=32) => {
            let scale = (1u64 << (bits - 1)) as f64;
            reader
                .into_samples::<i32>()
                .map(|s| s.map(|v| v as f64 / scale))
                .collect::<std::result::Result<_, _>>()
        }
        (format, bits) => {
            return Err(DspError::UnsupportedCodec {
                path: path.to_path_buf(),
                reason: format!("{bits}-bit {format:?} samples"),
            })
        }
    }
    .map_err(|e| read_err(e.to_string()))?;
    Waveform::from_interleaved(&samples, spec.channels as usize, spec.sample_rate)
}

fn sniff_compressed(head: &[u8; 4]) -> Option<&'static str> {
    match head {
        b"fLaC" => Some("FLAC"),
        b"OggS" => Some("Ogg"),
        [b'I', b'D', b'3', _] | [0xFF, 0xFB | 0xF3 | 0xF2, _, _] => Some("MP3"),
        b"caff" => Some("CAF"),
        _ => None,
    }
}

/// Writes 16-bit mono PCM.
pub fn write_wav(path: &Path, w: &Waveform) -> Result<()> {
    let write_err = |e: hound::Error| DspError::Write {
        path: path.to_path_buf(),
        reason: e.to_string(),
    };
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: w.sample_rate(),
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut writer = hound::WavWriter::create(path, spec).map_err(write_err)?;
    for s in w.samples() {
        let v = (s * 32767.0).round().clamp(-32768.0, 32767.0) as i16;
        writer.write_sample(v).map_err(write_err)?;
    }
    writer.finalize().map_err(write_err)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_16_bit() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.wav");
        let w = Waveform::new(vec![0.0, 0.5, -0.5, 0.999], 16000).unwrap();
        write_wav(&path, &w).unwrap();
        let back = read_wav(&path).unwrap();
        assert_eq!(back.sample_rate(), 16000);
        for (a, b) in w.samples().iter().zip(back.samples()) {
            assert!((a - b).abs() < 1.0 / 16384.0);
        }
    }

    #[test]
    fn float_stereo_is_downmixed() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.wav");
        let spec = hound::WavSpec {
            channels: 2,
            sample_rate: 8000,
            bits_per_sample: 32,
            sample_format: hound::SampleFormat::Float,
        };
        let mut wr = hound::WavWriter::create(&path, spec).unwrap();
        for s in [0.5f32, -0.5, 1.0, 0.0] {
            wr.write_sample(s).unwrap();
        }
        wr.finalize().unwrap();
        let w = read_wav(&path).unwrap();
        assert_eq!(w.samples(), &[0.0, 0.5]);
    }

    #[test]
    fn compressed_input_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.flac");
        std::fs::write(&path, b"fLaC\0\0\0\x22rest").unwrap();
        assert!(matches!(read_wav(&path), Err(DspError::UnsupportedCodec { .. })));
    }

    #[test]
    fn missing_file_is_a_read_error() {
        assert!(matches!(
            read_wav(Path::new("/nonexistent/none.wav")),
            Err(DspError::Read { .. })
        ));
    }
}
