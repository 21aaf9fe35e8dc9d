use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Graph, Var};
use crate::error::{Error, Result};
use crate::tensor::{Float, Shape, Tensor};

/// Padding applied before a convolution, the same width on every side.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Padding {
    Valid,
    Zeros(usize),
    Reflect(usize),
}

#[derive(Clone, Copy)]
struct Geometry {
    ci: usize,
    h: usize,
    w: usize,
    kh: usize,
    kw: usize,
    stride: usize,
    pad: usize,
    ho: usize,
    wo: usize,
}

impl Geometry {
    /// The patch matrix equals the input itself.
    fn is_pointwise(&self) -> bool {
        self.kh == 1 && self.kw == 1 && self.stride == 1 && self.pad == 0
    }
    fn k(&self) -> usize {
        self.ci * self.kh * self.kw
    }
    fn p(&self) -> usize {
        self.ho * self.wo
    }
}

/// Unfolds one sample into a `[ci·kh·kw, ho·wo]` patch matrix.
fn im2col<T: Float>(x: &[T], g: &Geometry, cols: &mut [T]) {
    let p = g.p();
    for c in 0..g.ci {
        let plane = &x[c * g.h * g.w..(c + 1) * g.h * g.w];
        for ki in 0..g.kh {
            for kj in 0..g.kw {
                let row = ((c * g.kh + ki) * g.kw + kj) * p;
                for oy in 0..g.ho {
                    let iy = (oy * g.stride + ki) as isize - g.pad as isize;
                    let dst = &mut cols[row + oy * g.wo..row + (oy + 1) * g.wo];
                    if iy < 0 || iy >= g.h as isize {
                        dst.fill(T::zero());
                        continue;
                    }
                    let src = &plane[iy as usize * g.w..(iy as usize + 1) * g.w];
                    if g.pad == 0 {
                        if g.stride == 1 {
                            dst.copy_from_slice(&src[kj..kj + g.wo]);
                        } else {
                            for (ox, d) in dst.iter_mut().enumerate() {
                                *d = src[ox * g.stride + kj];
                            }
                        }
                        continue;
                    }
                    for (ox, d) in dst.iter_mut().enumerate() {
                        let ix = (ox * g.stride + kj) as isize - g.pad as isize;
                        *d = if ix < 0 || ix >= g.w as isize { T::zero() } else { src[ix as usize] };
                    }
                }
            }
        }
    }
}

fn unfold<T: Float>(x: &[T], g: &Geometry) -> Vec<T> {
    let mut cols = vec![T::zero(); g.k() * g.p()];
    im2col(x, g, &mut cols);
    cols
}

/// Adjoint of [`im2col`]: scatter-adds patches back into the sample.
fn col2im<T: Float>(cols: &[T], g: &Geometry, dx: &mut [T]) {
    let p = g.p();
    for c in 0..g.ci {
        let plane = &mut dx[c * g.h * g.w..(c + 1) * g.h * g.w];
        for ki in 0..g.kh {
            for kj in 0..g.kw {
                let row = ((c * g.kh + ki) * g.kw + kj) * p;
                for oy in 0..g.ho {
                    let iy = (oy * g.stride + ki) as isize - g.pad as isize;
                    if iy < 0 || iy >= g.h as isize {
                        continue;
                    }
                    let src = &cols[row + oy * g.wo..row + (oy + 1) * g.wo];
                    if g.pad == 0 && g.stride == 1 {
                        let dst = &mut plane[iy as usize * g.w + kj..iy as usize * g.w + kj + g.wo];
                        for (d, &v) in dst.iter_mut().zip(src) {
                            *d += v;
                        }
                        continue;
                    }
                    for (ox, &v) in src.iter().enumerate() {
                        let ix = (ox * g.stride + kj) as isize - g.pad as isize;
                        if ix >= 0 && (ix as usize) < g.w {
                            plane[iy as usize * g.w + ix as usize] += v;
                        }
                    }
                }
            }
        }
    }
}

impl<T: Float> Graph<T> {
    /// 2-D cross-correlation. `weight` is `[co, ci, kh, kw]`, `bias` is
    /// `[1, co, 1, 1]`.
    pub fn conv2d(&self, input: Var, weight: Var, bias: Option<Var>, stride: usize, padding: Padding) -> Result<Var> {
        let (input, pad) = match padding {
            Padding::Valid => (input, 0),
            Padding::Zeros(p) => (input, p),
            Padding::Reflect(p) => (self.reflection_pad(input, [p; 4])?, 0),
        };
        let (xv, wv) = (self.value(input), self.value(weight));
        let (sx, sw) = (xv.shape(), wv.shape());
        if sw.c() != sx.c() {
            return Err(Error::ShapeMismatch {
                op: "conv2d",
                lhs: sx,
                rhs: sw,
            });
        }
        if stride == 0 {
            return Err(Error::InvalidArgument("conv2d stride must be ≥ 1".into()));
        }
        let (hp, wp) = (sx.h() + 2 * pad, sx.w() + 2 * pad);
        if sw.h() > hp || sw.w() > wp {
            return Err(Error::InvalidShape {
                op: "conv2d",
                detail: format!("kernel {sw} larger than padded input {sx} (+{pad})"),
            });
        }
        let geo = Geometry {
            ci: sx.c(),
            h: sx.h(),
            w: sx.w(),
            kh: sw.h(),
            kw: sw.w(),
            stride,
            pad,
            ho: (hp - sw.h()) / stride + 1,
            wo: (wp - sw.w()) / stride + 1,
        };
        let co = sw.n();
        let bv = match bias {
            Some(b) => {
                let bv = self.value(b);
                if bv.shape() != Shape::new(1, co, 1, 1) {
                    return Err(Error::ShapeMismatch {
                        op: "conv2d bias",
                        lhs: sw,
                        rhs: bv.shape(),
                    });
                }
                Some(bv)
            }
            None => None,
        };
        let out_shape = Shape::new(sx.n(), co, geo.ho, geo.wo);
        let (k, p) = (geo.k(), geo.p());
        let in_per = sx.numel() / sx.n().max(1);
        let mut out = vec![T::zero(); out_shape.numel()];
        {
            let (xd, wd, bd) = (xv.data(), wv.data(), bv.as_ref().map(|b| b.data()));
            out.par_chunks_mut(co * p).enumerate().for_each(|(n, o)| {
                let xn = &xd[n * in_per..(n + 1) * in_per];
                let unfolded;
                let cols = if geo.is_pointwise() {
                    xn
                } else {
                    unfolded = unfold(xn, &geo);
                    &unfolded[..]
                };
                if let Some(bd) = bd {
                    for (row, &b) in o.chunks_mut(p).zip(bd) {
                        row.fill(b);
                    }
                }
                let beta = if bd.is_some() { T::one() } else { T::zero() };
                T::gemm(co, k, p, wd, (k, 1), cols, (p, 1), beta, o, (p, 1));
            });
        }
        let value = Tensor::from_vec(out_shape, out)?;

        let mut parents = vec![input, weight];
        parents.extend(bias);
        Ok(self.record(value, &parents, move |g, needs| {
            let (gd, xd, wd) = (g.data(), xv.data(), wv.data());
            let per_out = co * p;
            let gx = needs[0].then(|| {
                let mut dx = vec![T::zero(); sx.numel()];
                dx.par_chunks_mut(in_per).enumerate().for_each(|(n, dxn)| {
                    let go = &gd[n * per_out..(n + 1) * per_out];
                    if geo.is_pointwise() {
                        T::gemm(k, co, p, wd, (1, k), go, (p, 1), T::zero(), dxn, (p, 1));
                    } else {
                        let mut dcols = vec![T::zero(); k * p];
                        T::gemm(k, co, p, wd, (1, k), go, (p, 1), T::zero(), &mut dcols, (p, 1));
                        col2im(&dcols, &geo, dxn);
                    }
                });
                Tensor::from_vec(sx, dx).expect("conv dx")
            });
            let gw = needs[1].then(|| {
                let partials: Vec<Vec<T>> = (0..sx.n())
                    .into_par_iter()
                    .map(|n| {
                        let xn = &xd[n * in_per..(n + 1) * in_per];
                        let unfolded;
                        let cols = if geo.is_pointwise() {
                            xn
                        } else {
                            unfolded = unfold(xn, &geo);
                            &unfolded[..]
                        };
                        let mut dw = vec![T::zero(); co * k];
                        T::gemm(co, p, k, &gd[n * per_out..(n + 1) * per_out], (p, 1), cols, (1, p), T::zero(), &mut dw, (k, 1));
                        dw
                    })
                    .collect();
                // fixed summation order keeps the result independent of thread count
                let mut dw = vec![T::zero(); co * k];
                for part in partials {
                    for (a, b) in dw.iter_mut().zip(part) {
                        *a += b;
                    }
                }
                Tensor::from_vec(sw, dw).expect("conv dw")
            });
            let gb = (needs.len() > 2 && needs[2]).then(|| {
                let mut db = vec![T::zero(); co];
                for n in 0..sx.n() {
                    for (c, d) in db.iter_mut().enumerate() {
                        let base = n * per_out + c * p;
                        *d += gd[base..base + p].iter().copied().sum::<T>();
                    }
                }
                Tensor::from_vec(Shape::new(1, co, 1, 1), db).expect("conv db")
            });
            let mut grads = vec![gx, gw];
            if needs.len() > 2 {
                grads.push(gb);
            }
            grads
        }))
    }
}
