use super::{Graph, Var};
use crate::error::{Error, Result};
use crate::tensor::{Float, Shape, Tensor};

/// Broadcast result of two shapes: each extent must match or be 1.
pub(crate) fn broadcast_shape(op: &'static str, a: Shape, b: Shape) -> Result<Shape> {
    let mut out = [0; 4];
    for i in 0..4 {
        let (x, y) = (a.0[i], b.0[i]);
        out[i] = if x == y || y == 1 {
            x
        } else if x == 1 {
            y
        } else {
            return Err(Error::ShapeMismatch { op, lhs: a, rhs: b });
        };
    }
    Ok(Shape(out))
}

/// Strides of `s` viewed inside `out`, zero along broadcast axes.
fn view_strides(s: Shape, out: Shape) -> [usize; 4] {
    let [_, c, h, w] = s.0;
    let dense = [c * h * w, h * w, w, 1];
    let mut st = [0; 4];
    for i in 0..4 {
        st[i] = if s.0[i] == out.0[i] { dense[i] } else { 0 };
    }
    st
}

fn for_each_broadcast(out: Shape, a: Shape, b: Shape, mut f: impl FnMut(usize, usize, usize)) {
    let sa = view_strides(a, out);
    let sb = view_strides(b, out);
    let mut o = 0;
    for n in 0..out.n() {
        for c in 0..out.c() {
            for h in 0..out.h() {
                let base_a = n * sa[0] + c * sa[1] + h * sa[2];
                let base_b = n * sb[0] + c * sb[1] + h * sb[2];
                for w in 0..out.w() {
                    f(o, base_a + w * sa[3], base_b + w * sb[3]);
                    o += 1;
                }
            }
        }
    }
}

fn zip_broadcast<T: Float>(a: &Tensor<T>, b: &Tensor<T>, out: Shape, f: impl Fn(T, T) -> T) -> Tensor<T> {
    if a.shape() == out && b.shape() == out {
        let data = a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect();
        return Tensor::from_vec(out, data).expect("same-shape zip");
    }
    let mut data = vec![T::zero(); out.numel()];
    let (ad, bd) = (a.data(), b.data());
    for_each_broadcast(out, a.shape(), b.shape(), |o, ia, ib| data[o] = f(ad[ia], bd[ib]));
    Tensor::from_vec(out, data).expect("broadcast zip")
}

/// Sums a gradient of the broadcast shape back down to `target`.
pub(crate) fn reduce_to<T: Float>(grad: &Tensor<T>, target: Shape) -> Tensor<T> {
    if grad.shape() == target {
        return grad.clone();
    }
    let mut acc = Tensor::zeros(target);
    let st = view_strides(target, grad.shape());
    let out = grad.shape();
    let g = grad.data();
    let a = acc.data_mut();
    let mut o = 0;
    for n in 0..out.n() {
        for c in 0..out.c() {
            for h in 0..out.h() {
                let base = n * st[0] + c * st[1] + h * st[2];
                for w in 0..out.w() {
                    a[base + w * st[3]] += g[o];
                    o += 1;
                }
            }
        }
    }
    acc
}

#[derive(Clone, Copy)]
enum Binary {
    Add,
    Sub,
    Mul,
    Div,
}

impl<T: Float> Graph<T> {
    fn binary(&self, op: Binary, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        let name = match op {
            Binary::Add => "add",
            Binary::Sub => "sub",
            Binary::Mul => "mul",
            Binary::Div => "div",
        };
        let out = broadcast_shape(name, av.shape(), bv.shape())?;
        let value = match op {
            Binary::Add => zip_broadcast(&av, &bv, out, |x, y| x + y),
            Binary::Sub => zip_broadcast(&av, &bv, out, |x, y| x - y),
            Binary::Mul => zip_broadcast(&av, &bv, out, |x, y| x * y),
            Binary::Div => zip_broadcast(&av, &bv, out, |x, y| x / y),
        };
        Ok(self.record(value, &[a, b], move |g, needs| {
            let (sa, sb) = (av.shape(), bv.shape());
            let ga = needs[0].then(|| match op {
                Binary::Add | Binary::Sub => reduce_to(g, sa),
                Binary::Mul => reduce_to(&zip_broadcast(g, &bv, out, |g, y| g * y), sa),
                Binary::Div => reduce_to(&zip_broadcast(g, &bv, out, |g, y| g / y), sa),
            });
            let gb = needs[1].then(|| match op {
                Binary::Add => reduce_to(g, sb),
                Binary::Sub => reduce_to(&g.map(|v| -v), sb),
                Binary::Mul => reduce_to(&zip_broadcast(g, &av, out, |g, x| g * x), sb),
                Binary::Div => {
                    // d(a/b)/db = -a/b²
                    let q = zip_broadcast(&av, &bv, out, |x, y| -x / (y * y));
                    reduce_to(&zip_broadcast(g, &q, out, |g, q| g * q), sb)
                }
            });
            vec![ga, gb]
        }))
    }

    /// Elementwise sum with broadcasting over size-1 axes.
    pub fn add(&self, a: Var, b: Var) -> Result<Var> {
        self.binary(Binary::Add, a, b)
    }

    pub fn sub(&self, a: Var, b: Var) -> Result<Var> {
        self.binary(Binary::Sub, a, b)
    }

    pub fn mul(&self, a: Var, b: Var) -> Result<Var> {
        self.binary(Binary::Mul, a, b)
    }

    pub fn div(&self, a: Var, b: Var) -> Result<Var> {
        self.binary(Binary::Div, a, b)
    }

    /// `y = f(x)` with `dy/dx = df(x)`.
    fn unary(&self, x: Var, f: impl Fn(T) -> T, df: impl Fn(T) -> T + 'static) -> Var {
        let xv = self.value(x);
        let value = xv.map(f);
        self.record(value, &[x], move |g, _| {
            let data = g.data().iter().zip(xv.data()).map(|(&g, &x)| g * df(x)).collect();
            vec![Some(Tensor::from_vec(g.shape(), data).expect("unary grad"))]
        })
    }

    pub fn neg(&self, x: Var) -> Var {
        self.unary(x, |v| -v, |_| -T::one())
    }

    pub fn scale(&self, x: Var, s: f64) -> Var {
        let s = T::lit(s);
        self.unary(x, move |v| v * s, move |_| s)
    }

    pub fn add_scalar(&self, x: Var, s: f64) -> Var {
        let s = T::lit(s);
        self.unary(x, move |v| v + s, |_| T::one())
    }

    pub fn square(&self, x: Var) -> Var {
        self.unary(x, |v| v * v, |v| v + v)
    }

    /// `|x|`, with subgradient 0 at 0.
    pub fn abs(&self, x: Var) -> Var {
        self.unary(
            x,
            |v| v.abs(),
            |v| {
                if v > T::zero() {
                    T::one()
                } else if v < T::zero() {
                    -T::one()
                } else {
                    T::zero()
                }
            },
        )
    }

    /// `√x`; the derivative at `x ≤ 0` is taken as 0.
    pub fn sqrt(&self, x: Var) -> Var {
        self.unary(
            x,
            |v| v.max(T::zero()).sqrt(),
            |v| {
                if v > T::zero() {
                    T::lit(0.5) / v.sqrt()
                } else {
                    T::zero()
                }
            },
        )
    }

    pub fn exp(&self, x: Var) -> Var {
        self.unary(x, |v| v.exp(), |v| v.exp())
    }

    pub fn powf(&self, x: Var, p: f64) -> Var {
        let pt = T::lit(p);
        self.unary(x, move |v| v.powf(pt), move |v| pt * v.powf(pt - T::one()))
    }

    /// Leaky rectifier without any parameter bookkeeping.
    pub fn leaky_relu_raw(&self, x: Var, slope: f64) -> Var {
        let s = T::lit(slope);
        self.unary(
            x,
            move |v| if v > T::zero() { v } else { v * s },
            move |v| if v > T::zero() { T::one() } else { s },
        )
    }

    /// Clamp to `[lo, hi]`; derivative 1 strictly inside, 0 elsewhere.
    pub fn clip(&self, x: Var, lo: f64, hi: f64) -> Var {
        let (l, h) = (T::lit(lo), T::lit(hi));
        self.unary(
            x,
            move |v| v.max(l).min(h),
            move |v| if v > l && v < h { T::one() } else { T::zero() },
        )
    }
}
