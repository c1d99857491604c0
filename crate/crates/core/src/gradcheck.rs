//! Central finite-difference gradient estimates.
//!
//! These helpers only ever evaluate the loss; they never touch the tape's
//! backward pass, so they can serve as an independent check on it.

use crate::params::ParamStore;
use crate::parallel::{self, Execution};
use crate::tensor::Tensor;

/// Default finite-difference step at 64-bit precision.
pub const STEP: f64 = 1e-6;

/// Floor applied to the denominator of [`relative_error`].
pub const REL_FLOOR: f64 = 1e-8;

/// `(f(x + h·e_i) − f(x − h·e_i)) / 2h` for every coordinate `i`.
pub fn central_difference(x: &Tensor, h: f64, f: impl Fn(&Tensor) -> f64) -> Tensor {
    let mut probe = x.clone();
    let mut out = Tensor::zeros(x.shape());
    for i in 0..x.len() {
        let orig = probe.data()[i];
        probe.data_mut()[i] = orig + h;
        let up = f(&probe);
        probe.data_mut()[i] = orig - h;
        let down = f(&probe);
        probe.data_mut()[i] = orig;
        out.data_mut()[i] = (up - down) / (2.0 * h);
    }
    out
}

/// Elementwise relative error `|a − b| / max(|a|, |b|, 1e-8)`.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(REL_FLOOR)
}

/// Largest [`rel_err`] over all elements.
pub fn relative_error(a: &Tensor, b: &Tensor) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| rel_err(*x, *y))
        .fold(0.0, f64::max)
}

/// Agreement between analytic and numeric gradients of one parameter.
#[derive(Debug, Clone)]
pub struct ParamGradError {
    pub name: String,
    /// `‖a − n‖₂ / max(‖a‖₂, ‖n‖₂, 1e-8)` over the whole tensor.
    pub rel_error: f64,
    /// Largest elementwise [`rel_err`] within the tensor.
    pub max_elementwise: f64,
    pub analytic_norm: f64,
    pub numeric_norm: f64,
}

/// Result of [`check_params`], one entry per parameter tensor.
#[derive(Debug, Clone)]
pub struct GradReport {
    pub params: Vec<ParamGradError>,
    /// Number of scalar coordinates probed.
    pub checked: usize,
}

impl GradReport {
    /// Worst tensor-level relative error.
    pub fn max_rel_error(&self) -> f64 {
        self.params.iter().map(|p| p.rel_error).fold(0.0, f64::max)
    }

    pub fn worst(&self) -> Option<&ParamGradError> {
        self.params.iter().max_by(|a, b| a.rel_error.total_cmp(&b.rel_error))
    }
}

/// Compares `analytic` gradients (aligned with `params`) against central
/// differences of `loss` at every scalar coordinate of every parameter.
pub fn check_params<F>(
    params: &ParamStore,
    analytic: &crate::params::Gradients,
    h: f64,
    exec: Execution,
    loss: F,
) -> GradReport
where
    F: Fn(&ParamStore) -> f64 + Sync,
{
    let coords: Vec<(usize, usize)> = (0..params.len())
        .flat_map(|p| (0..params.by_index(p).1.len()).map(move |i| (p, i)))
        .collect();
    let numeric = parallel::map(exec, &coords, |&(p, i)| {
        let mut probe = params.clone();
        let orig = probe.by_index(p).1.data()[i];
        probe.by_index_mut(p).data_mut()[i] = orig + h;
        let up = loss(&probe);
        probe.by_index_mut(p).data_mut()[i] = orig - h;
        let down = loss(&probe);
        (up - down) / (2.0 * h)
    });
    let mut out = Vec::with_capacity(params.len());
    let mut offset = 0;
    for p in 0..params.len() {
        let (name, t) = params.by_index(p);
        let fd = &numeric[offset..offset + t.len()];
        offset += t.len();
        let ad: Vec<f64> = (0..t.len())
            .map(|i| analytic.get(p).map_or(0.0, |g| g.data()[i]))
            .collect();
        let norm = |v: &mut dyn Iterator<Item = f64>| v.map(|x| x * x).sum::<f64>().sqrt();
        let diff = norm(&mut ad.iter().zip(fd).map(|(a, n)| a - n));
        let an = norm(&mut ad.iter().copied());
        let nn = norm(&mut fd.iter().copied());
        out.push(ParamGradError {
            name: name.to_string(),
            rel_error: diff / an.max(nn).max(REL_FLOOR),
            max_elementwise: ad.iter().zip(fd).map(|(a, n)| rel_err(*a, *n)).fold(0.0, f64::max),
            analytic_norm: an,
            numeric_norm: nn,
        });
    }
    GradReport {
        params: out,
        checked: coords.len(),
    }
}
