#![allow(dead_code)]

use auvrl::approx::{Activation, Mlp};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

pub const FD_STEP: f64 = 1e-5;

/// Central finite differences of `f` at `x`.
pub fn central_diff(x: &[f64], h: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = probe[i];
            probe[i] = orig + h;
            let up = f(&probe);
            probe[i] = orig - h;
            let down = f(&probe);
            probe[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Largest componentwise deviation relative to the largest reference component.
pub fn relative_error(analytic: &[f64], reference: &[f64]) -> f64 {
    assert_eq!(analytic.len(), reference.len());
    let scale = analytic
        .iter()
        .chain(reference)
        .fold(0.0f64, |m, v| m.max(v.abs()));
    let diff = analytic
        .iter()
        .zip(reference)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

pub fn random_vec<R: Rng>(rng: &mut R, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-scale..scale)).collect()
}

/// Evaluates `net` from its documented flat layout with dense matrices.
pub fn reference_forward(net: &Mlp, x: &[f64]) -> Vec<f64> {
    let widths = net.widths();
    let params = net.params();
    let mut v = DVector::from_column_slice(x);
    let mut off = 0;
    for (l, act) in net.activations().iter().enumerate() {
        let (fan_in, fan_out) = (widths[l], widths[l + 1]);
        let w = DMatrix::from_row_slice(fan_out, fan_in, &params[off..off + fan_in * fan_out]);
        off += fan_in * fan_out;
        let b = DVector::from_column_slice(&params[off..off + fan_out]);
        off += fan_out;
        let z = w * v + b;
        v = z.map(|z| match act {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
            Activation::Linear => z,
        });
    }
    v.as_slice().to_vec()
}
