use super::{Graph, Var};
use crate::error::{Error, Result};
use crate::tensor::{Float, Shape, Tensor};

/// `out[n, co, h·r+i, w·r+j] = in[n, co·r² + i·r + j, h, w]`
fn d2s<T: Float>(x: &Tensor<T>, r: usize) -> Tensor<T> {
    let s = x.shape();
    let co = s.c() / (r * r);
    let out_shape = Shape::new(s.n(), co, s.h() * r, s.w() * r);
    let mut out = Tensor::zeros(out_shape);
    let src = x.data();
    let dst = out.data_mut();
    for n in 0..s.n() {
        for c in 0..s.c() {
            let (oc, rem) = (c / (r * r), c % (r * r));
            let (i, j) = (rem / r, rem % r);
            for h in 0..s.h() {
                for w in 0..s.w() {
                    dst[out_shape.index(n, oc, h * r + i, w * r + j)] = src[s.index(n, c, h, w)];
                }
            }
        }
    }
    out
}

/// Inverse of [`d2s`].
fn s2d<T: Float>(x: &Tensor<T>, r: usize) -> Tensor<T> {
    let s = x.shape();
    let out_shape = Shape::new(s.n(), s.c() * r * r, s.h() / r, s.w() / r);
    let mut out = Tensor::zeros(out_shape);
    let src = x.data();
    let dst = out.data_mut();
    for n in 0..out_shape.n() {
        for c in 0..out_shape.c() {
            let (ic, rem) = (c / (r * r), c % (r * r));
            let (i, j) = (rem / r, rem % r);
            for h in 0..out_shape.h() {
                for w in 0..out_shape.w() {
                    dst[out_shape.index(n, c, h, w)] = src[s.index(n, ic, h * r + i, w * r + j)];
                }
            }
        }
    }
    out
}

/// Index into `[0, len)` mirrored across the edge element (no repetition).
fn reflect(i: isize, len: usize) -> usize {
    let len = len as isize;
    let mut i = i;
    if i < 0 {
        i = -i;
    }
    if i >= len {
        i = 2 * (len - 1) - i;
    }
    i as usize
}

impl<T: Float> Graph<T> {
    /// Moves `r×r` channel blocks into spatial positions.
    pub fn depth_to_space(&self, x: Var, r: usize) -> Result<Var> {
        let xv = self.value(x);
        let s = xv.shape();
        if r == 0 || !s.c().is_multiple_of(r * r) {
            return Err(Error::InvalidShape {
                op: "depth_to_space",
                detail: format!("{} channels not divisible by r²={}", s.c(), r * r),
            });
        }
        let value = d2s(&xv, r);
        Ok(self.record(value, &[x], move |g, _| vec![Some(s2d(g, r))]))
    }

    /// Inverse of [`Graph::depth_to_space`].
    pub fn space_to_depth(&self, x: Var, r: usize) -> Result<Var> {
        let xv = self.value(x);
        let s = xv.shape();
        if r == 0 || !s.h().is_multiple_of(r) || !s.w().is_multiple_of(r) {
            return Err(Error::InvalidShape {
                op: "space_to_depth",
                detail: format!("spatial extent {}x{} not divisible by {r}", s.h(), s.w()),
            });
        }
        let value = s2d(&xv, r);
        Ok(self.record(value, &[x], move |g, _| vec![Some(d2s(g, r))]))
    }

    /// Mirror padding `(top, bottom, left, right)`; each width must be
    /// smaller than the padded extent.
    pub fn reflection_pad(&self, x: Var, pad: [usize; 4]) -> Result<Var> {
        let xv = self.value(x);
        let s = xv.shape();
        let [top, bottom, left, right] = pad;
        if top.max(bottom) >= s.h() || left.max(right) >= s.w() {
            return Err(Error::InvalidShape {
                op: "reflection_pad",
                detail: format!("pad {pad:?} too wide for {s}"),
            });
        }
        if pad == [0; 4] {
            return Ok(x);
        }
        let out_shape = Shape::new(s.n(), s.c(), s.h() + top + bottom, s.w() + left + right);
        let (oh, ow) = (out_shape.h(), out_shape.w());
        // source index of every output pixel within one plane
        let map: Vec<usize> = (0..oh)
            .flat_map(|i| {
                let si = reflect(i as isize - top as isize, s.h());
                (0..ow).map(move |j| si * s.w() + reflect(j as isize - left as isize, s.w()))
            })
            .collect();
        let mut out = Vec::with_capacity(out_shape.numel());
        for plane in xv.data().chunks(s.plane()) {
            out.extend(map.iter().map(|&k| plane[k]));
        }
        let value = Tensor::from_vec(out_shape, out)?;
        Ok(self.record(value, &[x], move |g, _| {
            let mut dx = vec![T::zero(); s.numel()];
            for (dp, gp) in dx.chunks_mut(s.plane()).zip(g.data().chunks(oh * ow)) {
                for (&k, &gv) in map.iter().zip(gp) {
                    dp[k] += gv;
                }
            }
            vec![Some(Tensor::from_vec(s, dx).expect("pad grad"))]
        }))
    }

    /// Concatenates along the channel axis.
    pub fn concat_channels(&self, parts: &[Var]) -> Result<Var> {
        let values: Vec<_> = parts.iter().map(|&p| self.value(p)).collect();
        let first = values
            .first()
            .ok_or_else(|| Error::InvalidArgument("concat of zero tensors".into()))?
            .shape();
        let mut channels = Vec::with_capacity(values.len());
        for v in &values {
            let s = v.shape();
            if s.n() != first.n() || s.h() != first.h() || s.w() != first.w() {
                return Err(Error::ShapeMismatch {
                    op: "concat_channels",
                    lhs: first,
                    rhs: s,
                });
            }
            channels.push(s.c());
        }
        let total: usize = channels.iter().sum();
        let out_shape = Shape::new(first.n(), total, first.h(), first.w());
        let p = first.plane();
        let mut out = Vec::with_capacity(out_shape.numel());
        for n in 0..first.n() {
            for (v, &c) in values.iter().zip(&channels) {
                out.extend_from_slice(&v.data()[n * c * p..(n + 1) * c * p]);
            }
        }
        let value = Tensor::from_vec(out_shape, out)?;
        Ok(self.record(value, parts, move |g, needs| {
            let mut grads: Vec<Vec<T>> = channels.iter().map(|&c| Vec::with_capacity(first.n() * c * p)).collect();
            let gd = g.data();
            let mut off = 0;
            for _ in 0..first.n() {
                for (buf, &c) in grads.iter_mut().zip(&channels) {
                    buf.extend_from_slice(&gd[off..off + c * p]);
                    off += c * p;
                }
            }
            grads
                .into_iter()
                .zip(&channels)
                .zip(needs)
                .map(|((buf, &c), &need)| {
                    need.then(|| Tensor::from_vec(Shape::new(first.n(), c, first.h(), first.w()), buf).expect("concat grad"))
                })
                .collect()
        }))
    }

    /// Channels `start..start + len`.
    pub fn slice_channels(&self, x: Var, start: usize, len: usize) -> Result<Var> {
        let xv = self.value(x);
        let s = xv.shape();
        if start + len > s.c() || len == 0 {
            return Err(Error::InvalidShape {
                op: "slice_channels",
                detail: format!("channels {start}..{} of {s}", start + len),
            });
        }
        let p = s.plane();
        let out_shape = Shape::new(s.n(), len, s.h(), s.w());
        let mut out = Vec::with_capacity(out_shape.numel());
        for n in 0..s.n() {
            let base = (n * s.c() + start) * p;
            out.extend_from_slice(&xv.data()[base..base + len * p]);
        }
        let value = Tensor::from_vec(out_shape, out)?;
        Ok(self.record(value, &[x], move |g, _| {
            let mut dx = vec![T::zero(); s.numel()];
            for n in 0..s.n() {
                let base = (n * s.c() + start) * p;
                dx[base..base + len * p].copy_from_slice(&g.data()[n * len * p..(n + 1) * len * p]);
            }
            vec![Some(Tensor::from_vec(s, dx).expect("slice grad"))]
        }))
    }

    pub fn reshape(&self, x: Var, shape: impl Into<Shape>) -> Result<Var> {
        let xv = self.value(x);
        let from = xv.shape();
        let value = (*xv).clone().reshape(shape)?;
        Ok(self.record(value, &[x], move |g, _| {
            vec![Some(g.clone().reshape(from).expect("reshape grad"))]
        }))
    }
}
