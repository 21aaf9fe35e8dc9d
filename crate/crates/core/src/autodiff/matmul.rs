use super::{Graph, Var};
use crate::error::{Error, Result};
use crate::tensor::{Float, Shape, Tensor};

/// Row/column strides of a stored `rows×cols` matrix, optionally viewed transposed.
fn view(rows: usize, cols: usize, transposed: bool) -> ((usize, usize), (usize, usize)) {
    if transposed {
        ((cols, rows), (1, cols))
    } else {
        ((rows, cols), (cols, 1))
    }
}

impl<T: Float> Graph<T> {
    /// Matrix product over the last two axes, batched over `(n, c)`.
    ///
    /// `ta`/`tb` multiply by the transpose of the stored matrix instead.
    pub fn matmul_batched(&self, a: Var, b: Var, ta: bool, tb: bool) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        let (sa, sb) = (av.shape(), bv.shape());
        let ((m, k), a_st) = view(sa.h(), sa.w(), ta);
        let ((k2, p), b_st) = view(sb.h(), sb.w(), tb);
        if sa.n() != sb.n() || sa.c() != sb.c() || k != k2 {
            return Err(Error::ShapeMismatch {
                op: "matmul_batched",
                lhs: sa,
                rhs: sb,
            });
        }
        let batches = sa.n() * sa.c();
        let out_shape = Shape::new(sa.n(), sa.c(), m, p);
        let (la, lb, lc) = (m * k, k * p, m * p);
        let mut out = vec![T::zero(); out_shape.numel()];
        for i in 0..batches {
            T::gemm(
                m,
                k,
                p,
                &av.data()[i * la..(i + 1) * la],
                a_st,
                &bv.data()[i * lb..(i + 1) * lb],
                b_st,
                T::zero(),
                &mut out[i * lc..(i + 1) * lc],
                (p, 1),
            );
        }
        let value = Tensor::from_vec(out_shape, out)?;
        Ok(self.record(value, &[a, b], move |g, needs| {
            let gd = g.data();
            let ga = needs[0].then(|| {
                let mut da = vec![T::zero(); sa.numel()];
                for i in 0..batches {
                    // d op(A) = dC · op(B)ᵀ
                    T::gemm(
                        m,
                        p,
                        k,
                        &gd[i * lc..(i + 1) * lc],
                        (p, 1),
                        &bv.data()[i * lb..(i + 1) * lb],
                        (b_st.1, b_st.0),
                        T::zero(),
                        &mut da[i * la..(i + 1) * la],
                        a_st,
                    );
                }
                Tensor::from_vec(sa, da).expect("matmul grad a")
            });
            let gb = needs[1].then(|| {
                let mut db = vec![T::zero(); sb.numel()];
                for i in 0..batches {
                    // d op(B) = op(A)ᵀ · dC
                    T::gemm(
                        k,
                        m,
                        p,
                        &av.data()[i * la..(i + 1) * la],
                        (a_st.1, a_st.0),
                        &gd[i * lc..(i + 1) * lc],
                        (p, 1),
                        T::zero(),
                        &mut db[i * lb..(i + 1) * lb],
                        b_st,
                    );
                }
                Tensor::from_vec(sb, db).expect("matmul grad b")
            });
            vec![ga, gb]
        }))
    }
}
