use super::{Colormap, RgbImage};
use crate::dsp::{FeatureSeries, Waveform};

/// Matplotlib's default line colour.
pub const INK: [u8; 3] = [31, 119, 180];
pub const BACKGROUND: [u8; 3] = [255, 255, 255];

/// Row of amplitude `a` when `+1` is the top row and `−1` the bottom row.
fn amplitude_row(a: f64, height: usize) -> usize {
    (((1.0 - a) * (height - 1) as f64 / 2.0).round() as usize).min(height - 1)
}

/// Filled amplitude envelope on white. Each column covers an equal share of
/// the samples and is inked symmetrically between `±max|x|` of that share.
pub fn render_waveplot(w: &Waveform, resolution: usize) -> RgbImage {
    let mut img = RgbImage::filled(resolution, resolution, BACKGROUND);
    let n = w.len();
    let mut envelope: Vec<Option<f64>> = vec![None; resolution];
    for (i, s) in w.samples().iter().enumerate() {
        let col = i * resolution / n;
        let e = envelope[col].get_or_insert(0.0);
        *e = e.max(s.abs());
    }
    for (x, e) in envelope.iter().enumerate() {
        let Some(e) = e else { continue };
        let top = amplitude_row(*e, resolution);
        let bottom = amplitude_row(-*e, resolution);
        for y in top..=bottom {
            img.put(x, y, INK);
        }
    }
    img
}

/// Min-max normalizes `values` (constant input maps to 0.5) and rasterizes a
/// `cols × rows` grid with nearest-neighbour sampling. `value(col, row)`
/// indexes the grid; row 0 is drawn at the bottom when `origin_bottom`.
pub(crate) fn render_grid(
    cols: usize,
    rows: usize,
    value: impl Fn(usize, usize) -> f64,
    resolution: usize,
    colormap: Colormap,
    origin_bottom: bool,
) -> RgbImage {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for c in 0..cols {
        for r in 0..rows {
            let v = value(c, r);
            if v.is_finite() {
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
    }
    let normalize = |v: f64| {
        if !v.is_finite() {
            0.0
        } else if hi > lo {
            (v - lo) / (hi - lo)
        } else {
            0.5
        }
    };
    let mut img = RgbImage::filled(resolution, resolution, [0, 0, 0]);
    for y in 0..resolution {
        let from_top = y * rows / resolution;
        let r = if origin_bottom { rows - 1 - from_top } else { from_top };
        for x in 0..resolution {
            let c = x * cols / resolution;
            img.put(x, y, colormap.map(normalize(value(c, r))));
        }
    }
    img
}

/// Frames along x, channels along y with channel 0 at the bottom.
pub fn render_heatmap(f: &FeatureSeries, resolution: usize, colormap: Colormap) -> RgbImage {
    render_grid(
        f.frames(),
        f.channels(),
        |frame, channel| f.get(frame, channel),
        resolution,
        colormap,
        true,
    )
}

/// A `rows × cols` matrix with row 0 at the top (query rows of an attention
/// matrix read top to bottom).
pub fn render_matrix(
    data: &[f64],
    rows: usize,
    cols: usize,
    resolution: usize,
    colormap: Colormap,
) -> RgbImage {
    render_grid(cols, rows, |c, r| data[r * cols + c], resolution, colormap, false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::FeatureKind;
    use proptest::prelude::*;

    fn ink_rows(img: &RgbImage) -> Vec<usize> {
        (0..img.height())
            .filter(|&y| (0..img.width()).any(|x| img.get(x, y) != BACKGROUND))
            .collect()
    }

    #[test]
    fn silent_waveplot_inks_only_the_centre_row() {
        let w = Waveform::new(vec![0.0; 1000], 8000).unwrap();
        let img = render_waveplot(&w, 32);
        let rows = ink_rows(&img);
        assert_eq!(rows, vec![amplitude_row(0.0, 32)]);
        assert!((0..32).all(|x| img.get(x, rows[0]) == INK));
    }

    #[test]
    fn square_wave_fills_every_column() {
        let w = Waveform::new((0..640).map(|i| if i % 20 < 10 { 1.0 } else { -1.0 }).collect(), 8000)
            .unwrap();
        let img = render_waveplot(&w, 32);
        for x in 0..32 {
            assert!((0..32).all(|y| img.get(x, y) == INK), "column {x}");
        }
    }

    #[test]
    fn short_audio_leaves_unoccupied_columns_blank() {
        let w = Waveform::new(vec![0.5; 8], 8000).unwrap();
        let img = render_waveplot(&w, 32);
        let inked = (0..32).filter(|&x| (0..32).any(|y| img.get(x, y) == INK)).count();
        assert_eq!(inked, 8);
    }

    #[test]
    fn constant_series_is_midpoint() {
        let f = FeatureSeries::new(FeatureKind::Centroid, 5, 1, vec![440.0; 5]).unwrap();
        let img = render_heatmap(&f, 32, Colormap::Viridis);
        let mid = Colormap::Viridis.map(0.5);
        assert!(img.pixels().chunks(3).all(|p| p == mid));
    }

    #[test]
    fn two_by_two_checkerboard() {
        // frame 0 = [0, 1], frame 1 = [1, 0]
        let f = FeatureSeries::new(FeatureKind::Chroma, 2, 2, vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        let img = render_heatmap(&f, 4, Colormap::Viridis);
        let (lo, hi) = (Colormap::Viridis.map(0.0), Colormap::Viridis.map(1.0));
        for y in 0..4 {
            for x in 0..4 {
                let left = x < 2;
                let top = y < 2;
                // top rows show channel 1; bottom rows channel 0
                let want = if left == top { hi } else { lo };
                assert_eq!(img.get(x, y), want, "pixel ({x}, {y})");
            }
        }
    }

    #[test]
    fn matrix_row_zero_on_top() {
        let img = render_matrix(&[1.0, 1.0, 0.0, 0.0], 2, 2, 2, Colormap::Gray);
        assert_eq!(img.get(0, 0), [255; 3]);
        assert_eq!(img.get(0, 1), [0; 3]);
    }

    proptest! {
        #[test]
        fn waveplot_sign_symmetric(samples in prop::collection::vec(-1.0f64..1.0, 1..400)) {
            let w = Waveform::new(samples.clone(), 8000).unwrap();
            let neg = Waveform::new(samples.iter().map(|s| -s).collect(), 8000).unwrap();
            prop_assert_eq!(render_waveplot(&w, 32), render_waveplot(&neg, 32));
        }

        #[test]
        fn heatmap_affine_invariant(
            values in prop::collection::vec(-100.0f64..100.0, 24),
            a in 0.5f64..4.0,
            b in -10.0f64..10.0,
        ) {
            let f = FeatureSeries::new(FeatureKind::Mfcc, 8, 3, values.clone()).unwrap();
            let g = FeatureSeries::new(FeatureKind::Mfcc, 8, 3, values.iter().map(|v| a * v + b).collect()).unwrap();
            let (i1, i2) = (render_heatmap(&f, 16, Colormap::Gray), render_heatmap(&g, 16, Colormap::Gray));
            // Rounding can move a value sitting on a table boundary by one entry.
            for (p, q) in i1.pixels().iter().zip(i2.pixels()) {
                prop_assert!((*p as i32 - *q as i32).abs() <= 1);
            }
        }
    }

    #[test]
    fn heatmap_affine_invariant_exactly_on_dyadic_values() {
        let values: Vec<f64> = (0..24).map(|i| ((i * 7) % 24) as f64 * 0.25).collect();
        let f = FeatureSeries::new(FeatureKind::Mfcc, 8, 3, values.clone()).unwrap();
        let g = FeatureSeries::new(FeatureKind::Mfcc, 8, 3, values.iter().map(|v| 4.0 * v - 2.0).collect())
            .unwrap();
        assert_eq!(render_heatmap(&f, 16, Colormap::Viridis), render_heatmap(&g, 16, Colormap::Viridis));
    }
}
