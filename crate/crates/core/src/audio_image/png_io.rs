use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use super::{ImageError, RgbImage};

/// Encodes 8-bit RGB without alpha. Output depends only on the pixels.
pub fn encode_png(img: &RgbImage) -> Vec<u8> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, img.width() as u32, img.height() as u32);
        enc.set_color(png::ColorType::Rgb);
        enc.set_depth(png::BitDepth::Eight);
        let mut writer = enc.write_header().expect("in-memory write");
        writer.write_image_data(img.pixels()).expect("in-memory write");
    }
    out
}

pub fn write_png(path: &Path, img: &RgbImage) -> Result<(), ImageError> {
    let io_err = |e: std::io::Error| ImageError::Io {
        path: path.to_path_buf(),
        reason: e.to_string(),
    };
    let mut f = BufWriter::new(File::create(path).map_err(io_err)?);
    f.write_all(&encode_png(img)).map_err(io_err)?;
    f.flush().map_err(io_err)
}

/// Decodes any 8- or 16-bit PNG into RGB, dropping alpha.
pub fn read_png(path: &Path) -> Result<RgbImage, ImageError> {
    let err = |reason: String| ImageError::Io {
        path: path.to_path_buf(),
        reason,
    };
    let file = File::open(path).map_err(|e| err(e.to_string()))?;
    let mut decoder = png::Decoder::new(BufReader::new(file));
    decoder.set_transformations(png::Transformations::normalize_to_color8());
    let mut reader = decoder.read_info().map_err(|e| err(e.to_string()))?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| err("image too large".into()))?;
    let mut buf = vec![0; size];
    let info = reader.next_frame(&mut buf).map_err(|e| err(e.to_string()))?;
    let (w, h) = (info.width as usize, info.height as usize);
    let data = &buf[..info.buffer_size()];
    let channels = match info.color_type {
        png::ColorType::Grayscale => 1,
        png::ColorType::GrayscaleAlpha => 2,
        png::ColorType::Rgb => 3,
        png::ColorType::Rgba => 4,
        png::ColorType::Indexed => return Err(err("palette not expanded".into())),
    };
    let mut pixels = Vec::with_capacity(w * h * 3);
    for px in data.chunks_exact(channels) {
        match channels {
            1 | 2 => pixels.extend_from_slice(&[px[0]; 3]),
            _ => pixels.extend_from_slice(&px[..3]),
        }
    }
    RgbImage::from_pixels(w, h, pixels).ok_or_else(|| err("pixel count mismatch".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn png_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.png");
        let pixels: Vec<u8> = (0..5 * 3 * 3).map(|i| (i * 17 % 256) as u8).collect();
        let img = RgbImage::from_pixels(5, 3, pixels).unwrap();
        write_png(&path, &img).unwrap();
        assert_eq!(read_png(&path).unwrap(), img);
        assert_eq!(encode_png(&img), std::fs::read(&path).unwrap());
    }
}
