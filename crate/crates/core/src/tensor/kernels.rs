//! Slice-level numeric kernels shared by [`Tensor`](super::Tensor) and the tape.
//!
//! All matrices are row-major. Every kernel produces bit-identical results
//! with or without the `parallel` feature: parallel paths only split work by
//! output row and never reorder a reduction.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Below this many multiply-accumulates a matmul stays on the calling thread.
#[cfg(feature = "parallel")]
const PARALLEL_MACS: usize = 1 << 18;

/// `out[m×n] = a[m×k] · b[k×n]`. `out` is overwritten.
pub fn matmul(a: &[f64], b: &[f64], out: &mut [f64], m: usize, k: usize, n: usize) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(out.len(), m * n);
    let row = |(i, out_row): (usize, &mut [f64])| {
        out_row.fill(0.0);
        let a_row = &a[i * k..(i + 1) * k];
        for (p, &av) in a_row.iter().enumerate() {
            if av == 0.0 {
                continue;
            }
            let b_row = &b[p * n..(p + 1) * n];
            for (o, &bv) in out_row.iter_mut().zip(b_row) {
                *o += av * bv;
            }
        }
    };
    #[cfg(feature = "parallel")]
    if m * k * n >= PARALLEL_MACS && m > 1 {
        out.par_chunks_mut(n).enumerate().for_each(row);
        return;
    }
    out.chunks_mut(n).enumerate().for_each(row);
}

pub fn transpose(a: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut out = vec![0.0; a.len()];
    for r in 0..rows {
        for c in 0..cols {
            out[c * rows + r] = a[r * cols + c];
        }
    }
    out
}

/// Max-subtracted softmax applied independently to each row of width `n`.
pub fn softmax_rows(x: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    for (src, dst) in x.chunks(n).zip(out.chunks_mut(n)) {
        let max = src.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for (d, &s) in dst.iter_mut().zip(src) {
            *d = (s - max).exp();
            total += *d;
        }
        for d in dst.iter_mut() {
            *d /= total;
        }
    }
    out
}

/// Vector-Jacobian product of row softmax given its output `y`.
pub fn softmax_rows_backward(y: &[f64], dy: &[f64], n: usize) -> Vec<f64> {
    let mut dx = vec![0.0; y.len()];
    for ((yr, dyr), dxr) in y.chunks(n).zip(dy.chunks(n)).zip(dx.chunks_mut(n)) {
        let dot: f64 = yr.iter().zip(dyr).map(|(a, b)| a * b).sum();
        for ((d, &yv), &g) in dxr.iter_mut().zip(yr).zip(dyr) {
            *d = yv * (g - dot);
        }
    }
    dx
}

const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Exact Gaussian-error linear unit, `x·Φ(x)`.
pub fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + libm::erf(x * FRAC_1_SQRT_2))
}

/// `d/dx gelu(x) = Φ(x) + x·φ(x)`.
pub fn gelu_grad(x: f64) -> f64 {
    let cdf = 0.5 * (1.0 + libm::erf(x * FRAC_1_SQRT_2));
    let pdf = (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    cdf + x * pdf
}

/// Row-wise layer normalization. Returns `(output, normalized, inv_std)`;
/// the latter two are what the backward pass needs.
pub fn layernorm_rows(
    x: &[f64],
    gain: &[f64],
    bias: &[f64],
    eps: f64,
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let d = gain.len();
    let rows = x.len() / d;
    let mut out = vec![0.0; x.len()];
    let mut xhat = vec![0.0; x.len()];
    let mut inv_std = vec![0.0; rows];
    for r in 0..rows {
        let src = &x[r * d..(r + 1) * d];
        let mean = src.iter().sum::<f64>() / d as f64;
        let var = src.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
        let istd = 1.0 / (var + eps).sqrt();
        inv_std[r] = istd;
        for j in 0..d {
            let h = (src[j] - mean) * istd;
            xhat[r * d + j] = h;
            out[r * d + j] = h * gain[j] + bias[j];
        }
    }
    (out, xhat, inv_std)
}

/// Gradients of layer normalization w.r.t. input, gain and bias.
pub fn layernorm_rows_backward(
    xhat: &[f64],
    inv_std: &[f64],
    gain: &[f64],
    dy: &[f64],
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let d = gain.len();
    let mut dx = vec![0.0; xhat.len()];
    let mut dgain = vec![0.0; d];
    let mut dbias = vec![0.0; d];
    for (r, &istd) in inv_std.iter().enumerate() {
        let base = r * d;
        let mut mean_g = 0.0;
        let mut mean_gx = 0.0;
        for j in 0..d {
            let g = dy[base + j] * gain[j];
            mean_g += g;
            mean_gx += g * xhat[base + j];
            dgain[j] += dy[base + j] * xhat[base + j];
            dbias[j] += dy[base + j];
        }
        mean_g /= d as f64;
        mean_gx /= d as f64;
        for j in 0..d {
            let g = dy[base + j] * gain[j];
            dx[base + j] = istd * (g - mean_g - xhat[base + j] * mean_gx);
        }
    }
    (dx, dgain, dbias)
}

/// Numerically stable `log Σ exp(x)`.
pub fn log_sum_exp(x: &[f64]) -> f64 {
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + x.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softmax_uniform_and_shift() {
        let y = softmax_rows(&[0.0, 0.0, 0.0], 3);
        for v in y {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
        let a = softmax_rows(&[0.3, -1.2, 2.5, 0.0], 4);
        let b = softmax_rows(&[100.3, 98.8, 102.5, 100.0], 4);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn softmax_matches_direct_evaluation() {
        let y = softmax_rows(&[1.0, 2.0, 3.0], 3);
        let e: Vec<f64> = [1.0f64, 2.0, 3.0].iter().map(|v| v.exp()).collect();
        let total: f64 = e.iter().sum();
        for (got, want) in y.iter().zip(e.iter().map(|v| v / total)) {
            assert!((got - want).abs() < 1e-15, "{got} vs {want}");
        }
        // 0.09003057317038046, 0.24472847105479767, 0.6652409557748219
        assert!((y[0] - 0.090_030_573_170_380_46).abs() < 1e-15);
        assert!((y[2] - 0.665_240_955_774_821_9).abs() < 1e-15);
    }

    #[test]
    fn gelu_values() {
        assert_eq!(gelu(0.0), 0.0);
        assert!((gelu(10.0) - 10.0).abs() < 1e-9);
        assert!(gelu(-10.0).abs() < 1e-9);
        // x·Φ(x) at 1: Φ(1) = 0.8413447460685429
        assert!((gelu(1.0) - 0.841_344_746_068_542_9).abs() < 1e-15);
    }

    #[test]
    fn gelu_grad_matches_central_difference() {
        let h = 1e-6;
        for &x in &[-2.0, -0.3, 0.5, 1.7] {
            let fd = (gelu(x + h) - gelu(x - h)) / (2.0 * h);
            assert!((gelu_grad(x) - fd).abs() < 1e-6, "x={x}");
        }
    }

    #[test]
    fn layernorm_constant_row_is_zero() {
        let (y, _, _) = layernorm_rows(&[3.0; 5], &[1.0; 5], &[0.0; 5], 1e-5);
        assert!(y.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn matmul_kernel_skips_nothing_it_should_not() {
        let a = [0.0, 2.0, 1.0, 0.0];
        let b = [1.0, 2.0, 3.0, 4.0];
        let mut out = [9.0; 4];
        matmul(&a, &b, &mut out, 2, 2, 2);
        assert_eq!(out, [6.0, 8.0, 1.0, 2.0]);
    }
}
