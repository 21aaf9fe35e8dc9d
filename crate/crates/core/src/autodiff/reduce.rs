use super::{Graph, Var};
use crate::tensor::{Float, Shape, Tensor};

impl<T: Float> Graph<T> {
    /// Sum of all elements, as a `[1, 1, 1, 1]` value.
    pub fn sum(&self, x: Var) -> Var {
        let xv = self.value(x);
        let shape = xv.shape();
        let value = Tensor::scalar(xv.sum());
        self.record(value, &[x], move |g, _| vec![Some(Tensor::full(shape, g.item()))])
    }

    /// Mean of all elements.
    pub fn mean(&self, x: Var) -> Var {
        let xv = self.value(x);
        let shape = xv.shape();
        let count = T::lit(shape.numel() as f64);
        let value = Tensor::scalar(xv.sum() / count);
        self.record(value, &[x], move |g, _| vec![Some(Tensor::full(shape, g.item() / count))])
    }

    /// Per-`(n, c)` spatial mean, shape `[n, c, 1, 1]`.
    pub fn mean_hw(&self, x: Var) -> Var {
        let xv = self.value(x);
        let s = xv.shape();
        let p = s.plane();
        let inv = T::one() / T::lit(p as f64);
        let data: Vec<T> = xv
            .data()
            .chunks(p)
            .map(|plane| plane.iter().copied().sum::<T>() * inv)
            .collect();
        let value = Tensor::from_vec(Shape::new(s.n(), s.c(), 1, 1), data).expect("mean_hw");
        self.record(value, &[x], move |g, _| {
            let mut out = Vec::with_capacity(s.numel());
            for &gv in g.data() {
                out.extend(std::iter::repeat_n(gv * inv, p));
            }
            vec![Some(Tensor::from_vec(s, out).expect("mean_hw grad"))]
        })
    }

    /// Softmax along the last axis; every `(n, c, h)` row sums to one.
    pub fn softmax_rows(&self, x: Var) -> Var {
        let xv = self.value(x);
        let s = xv.shape();
        let w = s.w();
        let mut out = xv.data().to_vec();
        for row in out.chunks_mut(w) {
            let max = row.iter().copied().fold(T::neg_infinity(), T::max);
            let mut total = T::zero();
            for v in row.iter_mut() {
                *v = (*v - max).exp();
                total += *v;
            }
            for v in row.iter_mut() {
                *v = *v / total;
            }
        }
        let value = Tensor::from_vec(s, out).expect("softmax");
        let y = value.clone();
        self.record(value, &[x], move |g, _| {
            let mut dx = vec![T::zero(); s.numel()];
            for ((dr, yr), gr) in dx.chunks_mut(w).zip(y.data().chunks(w)).zip(g.data().chunks(w)) {
                let dot: T = yr.iter().zip(gr).map(|(&y, &g)| y * g).sum();
                for ((d, &y), &g) in dr.iter_mut().zip(yr).zip(gr) {
                    *d = y * (g - dot);
                }
            }
            vec![Some(Tensor::from_vec(s, dx).expect("softmax grad"))]
        })
    }
}
