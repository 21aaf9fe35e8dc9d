//! Spectral normalization by power iteration.
//!
//! The weight `[co, ci, kh, kw]` is viewed as a `co × (ci·kh·kw)` matrix
//! `W`. A persistent left singular vector estimate `u` (length `co`) is
//! refined by power iteration; the normalized weight is `W / σ̂` with
//! `σ̂ = uᵀ W v`, `v = Wᵀu / ‖Wᵀu‖`. Only `σ̂`'s dependence on `W` is
//! differentiated; `u` and `v` are constants of the forward pass.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::autodiff::{Graph, Var};
use crate::error::{Error, Result};
use crate::tensor::{Float, Tensor};

const MIN_NORM: f64 = 1e-12;

/// Persistent power-iteration state of one normalized weight.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralNormState<T: Float> {
    /// `[1, 1, 1, co]`, unit length.
    pub u: Tensor<T>,
    pub n_power_iterations: usize,
}

impl<T: Float> SpectralNormState<T> {
    pub fn new(out_channels: usize, rng: &mut impl Rng) -> Self {
        SpectralNormState {
            u: random_unit(out_channels, rng),
            n_power_iterations: 1,
        }
    }
}

/// Random unit vector of length `len` as a `[1, 1, 1, len]` tensor.
pub fn random_unit<T: Float>(len: usize, rng: &mut impl Rng) -> Tensor<T> {
    loop {
        let v: Vec<f64> = (0..len).map(|_| StandardNormal.sample(rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > MIN_NORM {
            let data = v.into_iter().map(|x| T::lit(x / norm)).collect();
            return Tensor::from_vec([1, 1, 1, len], data).expect("unit vector");
        }
    }
}

fn matrix_dims(w: &Tensor<impl Float>) -> (usize, usize) {
    let s = w.shape();
    (s.n(), s.c() * s.h() * s.w())
}

/// `(v, ‖Wᵀu‖)` with `v = Wᵀu / ‖Wᵀu‖` (zero when the norm vanishes).
fn right_vector<T: Float>(w: &Tensor<T>, u: &[T]) -> (Vec<f64>, f64) {
    let (rows, cols) = matrix_dims(w);
    let wd = w.data();
    let mut v = vec![0.0f64; cols];
    for r in 0..rows {
        let ur = u[r].f64();
        for (vj, &wv) in v.iter_mut().zip(&wd[r * cols..(r + 1) * cols]) {
            *vj += ur * wv.f64();
        }
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > MIN_NORM {
        v.iter_mut().for_each(|x| *x /= norm);
    } else {
        v.iter_mut().for_each(|x| *x = 0.0);
    }
    (v, norm)
}

/// One power-iteration step. Returns the updated `u` and the estimate
/// `σ̂ = uᵀ W v` computed with the updated pair.
pub fn power_step<T: Float>(w: &Tensor<T>, u: &Tensor<T>) -> (Tensor<T>, f64) {
    let (rows, cols) = matrix_dims(w);
    assert_eq!(u.numel(), rows, "u length must equal out channels");
    let (v, _) = right_vector(w, u.data());
    let wd = w.data();
    let wv: Vec<f64> = (0..rows)
        .map(|r| wd[r * cols..(r + 1) * cols].iter().zip(&v).map(|(&a, &b)| a.f64() * b).sum())
        .collect();
    let norm = wv.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm <= MIN_NORM {
        // W v = 0: keep the previous estimate, σ̂ is zero
        return (u.clone(), 0.0);
    }
    let data = wv.iter().map(|x| T::lit(x / norm)).collect();
    // uᵀ W v with u = Wv/‖Wv‖ is ‖Wv‖
    (Tensor::from_vec([1, 1, 1, rows], data).expect("u"), norm)
}

/// Differentiable `W / max(σ̂, 1e-12)` for the current `u`.
pub fn normalize<T: Float>(g: &Graph<T>, weight: Var, u: &Tensor<T>) -> Result<Var> {
    let w = g.value(weight);
    let (rows, _) = matrix_dims(&w);
    if u.numel() != rows {
        return Err(Error::ShapeMismatch {
            op: "spectral_norm",
            lhs: w.shape(),
            rhs: u.shape(),
        });
    }
    let (v, _) = right_vector(&w, u.data());
    let outer: Vec<T> = (0..rows)
        .flat_map(|r| {
            let ur = u.data()[r].f64();
            v.iter().map(move |&vj| T::lit(ur * vj))
        })
        .collect();
    let outer = g.constant(Tensor::from_vec(w.shape(), outer)?);
    let sigma = g.sum(g.mul(weight, outer)?);
    let sigma = g.clip(sigma, MIN_NORM, f64::INFINITY);
    g.div(weight, sigma)
}

/// Applies spectral normalization with a standalone state, running the
/// state's power iterations first when `update` is set.
pub fn spectral_norm_apply<T: Float>(
    g: &Graph<T>,
    weight: Var,
    state: &mut SpectralNormState<T>,
    update: bool,
) -> Result<Var> {
    if update {
        let w = g.value(weight);
        for _ in 0..state.n_power_iterations {
            state.u = power_step(&w, &state.u).0;
        }
    }
    normalize(g, weight, &state.u)
}

/// Current `σ̂` for a weight and `u` without touching any graph.
pub fn sigma_estimate<T: Float>(w: &Tensor<T>, u: &Tensor<T>) -> f64 {
    let (rows, cols) = matrix_dims(w);
    let (v, _) = right_vector(w, u.data());
    let wd = w.data();
    (0..rows)
        .map(|r| u.data()[r].f64() * wd[r * cols..(r + 1) * cols].iter().zip(&v).map(|(&a, &b)| a.f64() * b).sum::<f64>())
        .sum()
}
