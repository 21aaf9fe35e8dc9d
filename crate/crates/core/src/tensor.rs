//! Dense 4-D tensors in `(batch, channel, height, width)` layout.
//!
//! Every value in the crate is a [`Tensor`]: images, feature maps, conv
//! weights (`[co, ci, kh, kw]`), per-channel vectors (`[1, c, 1, 1]`) and
//! scalars (`[1, 1, 1, 1]`). Training runs in `f32`; gradient oracles run
//! the same code in `f64`.

use std::fmt;
use std::io::{Read, Write};
use std::iter::Sum;
use std::ops::{AddAssign, MulAssign, SubAssign};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Element type of a tensor. Implemented for `f32` and `f64`.
pub trait Float:
    num_traits::Float
    + Default
    + fmt::Debug
    + fmt::Display
    + Send
    + Sync
    + Sum
    + AddAssign
    + SubAssign
    + MulAssign
    + 'static
{
    const BITS: u32;

    fn lit(v: f64) -> Self;
    fn f64(self) -> f64;

    /// `c = a·b + beta·c` on strided row/column views.
    ///
    /// Shapes: `a` is `m×k`, `b` is `k×n`, `c` is `m×n`.
    #[allow(clippy::too_many_arguments)]
    fn gemm(
        m: usize,
        k: usize,
        n: usize,
        a: &[Self],
        a_strides: (usize, usize),
        b: &[Self],
        b_strides: (usize, usize),
        beta: Self,
        c: &mut [Self],
        c_strides: (usize, usize),
    );
}

fn span(rows: usize, cols: usize, (rs, cs): (usize, usize)) -> usize {
    if rows == 0 || cols == 0 {
        0
    } else {
        (rows - 1) * rs + (cols - 1) * cs + 1
    }
}

macro_rules! impl_float {
    ($t:ty, $bits:expr, $gemm:path) => {
        impl Float for $t {
            const BITS: u32 = $bits;

            #[inline]
            fn lit(v: f64) -> Self {
                v as $t
            }

            #[inline]
            fn f64(self) -> f64 {
                self as f64
            }

            fn gemm(
                m: usize,
                k: usize,
                n: usize,
                a: &[Self],
                a_strides: (usize, usize),
                b: &[Self],
                b_strides: (usize, usize),
                beta: Self,
                c: &mut [Self],
                c_strides: (usize, usize),
            ) {
                assert!(span(m, k, a_strides) <= a.len(), "gemm: lhs view out of bounds");
                assert!(span(k, n, b_strides) <= b.len(), "gemm: rhs view out of bounds");
                assert!(span(m, n, c_strides) <= c.len(), "gemm: output view out of bounds");
                if m == 0 || n == 0 {
                    return;
                }
                // SAFETY: all three views were bounds-checked above and `c`
                // is uniquely borrowed.
                unsafe {
                    $gemm(
                        m,
                        k,
                        n,
                        1.0,
                        a.as_ptr(),
                        a_strides.0 as isize,
                        a_strides.1 as isize,
                        b.as_ptr(),
                        b_strides.0 as isize,
                        b_strides.1 as isize,
                        beta,
                        c.as_mut_ptr(),
                        c_strides.0 as isize,
                        c_strides.1 as isize,
                    );
                }
            }
        }
    };
}

impl_float!(f32, 32, matrixmultiply::sgemm);
impl_float!(f64, 64, matrixmultiply::dgemm);

/// `(n, c, h, w)` extents.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Shape(pub [usize; 4]);

impl Shape {
    pub const SCALAR: Shape = Shape([1, 1, 1, 1]);

    pub const fn new(n: usize, c: usize, h: usize, w: usize) -> Self {
        Shape([n, c, h, w])
    }

    pub fn n(&self) -> usize {
        self.0[0]
    }
    pub fn c(&self) -> usize {
        self.0[1]
    }
    pub fn h(&self) -> usize {
        self.0[2]
    }
    pub fn w(&self) -> usize {
        self.0[3]
    }

    pub fn numel(&self) -> usize {
        self.0.iter().product()
    }

    /// Elements per `(n, c)` plane.
    pub fn plane(&self) -> usize {
        self.h() * self.w()
    }

    pub fn index(&self, n: usize, c: usize, h: usize, w: usize) -> usize {
        ((n * self.c() + c) * self.h() + h) * self.w() + w
    }
}

impl fmt::Debug for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [n, c, h, w] = self.0;
        write!(f, "[{n}, {c}, {h}, {w}]")
    }
}

impl From<[usize; 4]> for Shape {
    fn from(v: [usize; 4]) -> Self {
        Shape(v)
    }
}

#[derive(Clone, PartialEq)]
pub struct Tensor<T = f32> {
    shape: Shape,
    data: Vec<T>,
}

impl<T: Float> fmt::Debug for Tensor<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        const SHOWN: usize = 8;
        write!(f, "Tensor{}(", self.shape)?;
        for (i, v) in self.data.iter().take(SHOWN).enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{v}")?;
        }
        if self.data.len() > SHOWN {
            write!(f, ", ...")?;
        }
        write!(f, ")")
    }
}

impl<T: Float> Tensor<T> {
    pub fn from_vec(shape: impl Into<Shape>, data: Vec<T>) -> Result<Self> {
        let shape = shape.into();
        if shape.numel() != data.len() {
            return Err(Error::InvalidShape {
                op: "from_vec",
                detail: format!("{shape} needs {} values, got {}", shape.numel(), data.len()),
            });
        }
        Ok(Tensor { shape, data })
    }

    pub fn zeros(shape: impl Into<Shape>) -> Self {
        Self::full(shape, T::zero())
    }

    pub fn ones(shape: impl Into<Shape>) -> Self {
        Self::full(shape, T::one())
    }

    pub fn full(shape: impl Into<Shape>, value: T) -> Self {
        let shape = shape.into();
        Tensor {
            data: vec![value; shape.numel()],
            shape,
        }
    }

    pub fn scalar(value: T) -> Self {
        Self::full(Shape::SCALAR, value)
    }

    /// Builds a tensor by evaluating `f(n, c, h, w)` at every index.
    pub fn from_fn(shape: impl Into<Shape>, mut f: impl FnMut(usize, usize, usize, usize) -> T) -> Self {
        let shape = shape.into();
        let mut data = Vec::with_capacity(shape.numel());
        let [sn, sc, sh, sw] = shape.0;
        for n in 0..sn {
            for c in 0..sc {
                for h in 0..sh {
                    for w in 0..sw {
                        data.push(f(n, c, h, w));
                    }
                }
            }
        }
        Tensor { shape, data }
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn at(&self, n: usize, c: usize, h: usize, w: usize) -> T {
        self.data[self.shape.index(n, c, h, w)]
    }

    pub fn set(&mut self, n: usize, c: usize, h: usize, w: usize, v: T) {
        let i = self.shape.index(n, c, h, w);
        self.data[i] = v;
    }

    /// The single value of a one-element tensor.
    pub fn item(&self) -> T {
        assert_eq!(self.data.len(), 1, "item() on tensor of shape {}", self.shape);
        self.data[0]
    }

    /// Contiguous `(n, c)` plane.
    pub fn plane(&self, n: usize, c: usize) -> &[T] {
        let p = self.shape.plane();
        let start = (n * self.shape.c() + c) * p;
        &self.data[start..start + p]
    }

    pub fn reshape(mut self, shape: impl Into<Shape>) -> Result<Self> {
        let shape = shape.into();
        if shape.numel() != self.data.len() {
            return Err(Error::InvalidShape {
                op: "reshape",
                detail: format!("{} -> {shape}", self.shape),
            });
        }
        self.shape = shape;
        Ok(self)
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Tensor {
            shape: self.shape,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn cast<U: Float>(&self) -> Tensor<U> {
        Tensor {
            shape: self.shape,
            data: self.data.iter().map(|v| U::lit(v.f64())).collect(),
        }
    }

    pub fn sum(&self) -> T {
        self.data.iter().copied().sum()
    }

    pub fn mean(&self) -> T {
        self.sum() / T::lit(self.data.len() as f64)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn max_abs_diff(&self, other: &Tensor<T>) -> T {
        assert_eq!(self.shape, other.shape);
        self.data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| (a - b).abs())
            .fold(T::zero(), T::max)
    }

    /// Elementwise `self += other`.
    pub fn add_assign(&mut self, other: &Tensor<T>) {
        assert_eq!(self.shape, other.shape, "add_assign shape mismatch");
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    /// Stacks equally-shaped tensors along the batch axis.
    pub fn stack(items: &[Tensor<T>]) -> Result<Self> {
        let first = items
            .first()
            .ok_or_else(|| Error::InvalidArgument("stack of zero tensors".into()))?;
        let s = first.shape;
        let mut data = Vec::with_capacity(s.numel() * items.len());
        let mut n = 0;
        for t in items {
            if t.shape.0[1..] != s.0[1..] {
                return Err(Error::ShapeMismatch {
                    op: "stack",
                    lhs: s,
                    rhs: t.shape,
                });
            }
            n += t.shape.n();
            data.extend_from_slice(&t.data);
        }
        Ok(Tensor {
            shape: Shape::new(n, s.c(), s.h(), s.w()),
            data,
        })
    }

    /// Splits the batch axis into single-sample tensors.
    pub fn unstack(&self) -> Vec<Tensor<T>> {
        let s = self.shape;
        let per = s.numel() / s.n().max(1);
        self.data
            .chunks(per.max(1))
            .take(s.n())
            .map(|chunk| Tensor {
                shape: Shape::new(1, s.c(), s.h(), s.w()),
                data: chunk.to_vec(),
            })
            .collect()
    }
}

const VTEN_MAGIC: &[u8; 4] = b"VTEN";

impl<T: Float> Tensor<T> {
    /// VTEN encoding: magic, four little-endian u32 extents, raw f32 data.
    pub fn write_vten(&self, mut out: impl Write) -> std::io::Result<()> {
        let mut buf = Vec::with_capacity(20 + 4 * self.data.len());
        buf.extend_from_slice(VTEN_MAGIC);
        for d in self.shape.0 {
            buf.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in &self.data {
            buf.extend_from_slice(&(v.f64() as f32).to_le_bytes());
        }
        out.write_all(&buf)
    }

    pub fn read_vten(mut input: impl Read, origin: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        input
            .read_to_end(&mut bytes)
            .map_err(|e| Error::io(format!("reading {}", origin.display()), e))?;
        if bytes.len() < 4 || &bytes[..4] != VTEN_MAGIC {
            return Err(Error::BadMagic {
                path: origin.to_path_buf(),
                expected: "VTEN",
                found: String::from_utf8_lossy(&bytes[..bytes.len().min(4)]).into_owned(),
            });
        }
        if bytes.len() < 20 {
            return Err(Error::Truncated {
                path: origin.to_path_buf(),
                section: "header",
                expected: 20,
                got: bytes.len(),
            });
        }
        let mut dims = [0usize; 4];
        for (i, d) in dims.iter_mut().enumerate() {
            let off = 4 + 4 * i;
            *d = u32::from_le_bytes(bytes[off..off + 4].try_into().unwrap()) as usize;
        }
        let shape = Shape(dims);
        let payload = &bytes[20..];
        let expected = shape.numel() * 4;
        if payload.len() < expected {
            return Err(Error::Truncated {
                path: origin.to_path_buf(),
                section: "data",
                expected,
                got: payload.len(),
            });
        }
        if payload.len() > expected {
            return Err(Error::SizeMismatch {
                path: origin.to_path_buf(),
                detail: format!("{} trailing bytes after {shape} payload", payload.len() - expected),
            });
        }
        let data = payload
            .chunks_exact(4)
            .map(|c| T::lit(f32::from_le_bytes(c.try_into().unwrap()) as f64))
            .collect();
        Ok(Tensor { shape, data })
    }

    pub fn save_vten(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)
            .map_err(|e| Error::io(format!("creating {}", path.display()), e))?;
        self.write_vten(std::io::BufWriter::new(file))
            .map_err(|e| Error::io(format!("writing {}", path.display()), e))
    }

    pub fn load_vten(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)
            .map_err(|e| Error::io(format!("opening {}", path.display()), e))?;
        Self::read_vten(std::io::BufReader::new(file), path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_index_is_row_major() {
        let s = Shape::new(2, 3, 4, 5);
        assert_eq!(s.index(0, 0, 0, 1), 1);
        assert_eq!(s.index(0, 0, 1, 0), 5);
        assert_eq!(s.index(0, 1, 0, 0), 20);
        assert_eq!(s.index(1, 0, 0, 0), 60);
        assert_eq!(s.index(1, 2, 3, 4), s.numel() - 1);
    }

    #[test]
    fn from_vec_rejects_wrong_length() {
        assert!(Tensor::<f32>::from_vec([1, 1, 2, 2], vec![0.0; 3]).is_err());
    }

    #[test]
    fn vten_round_trip_is_bitwise() {
        let t = Tensor::<f32>::from_fn([2, 3, 1, 4], |n, c, _, w| {
            (n as f32 - 0.3) * (c as f32 + 1.7).powi(3) / (w as f32 + 0.1)
        });
        let mut buf = Vec::new();
        t.write_vten(&mut buf).unwrap();
        assert_eq!(&buf[..4], b"VTEN");
        assert_eq!(buf.len(), 20 + 4 * t.numel());
        let back = Tensor::<f32>::read_vten(&buf[..], Path::new("mem")).unwrap();
        assert_eq!(back.shape(), t.shape());
        for (a, b) in back.data().iter().zip(t.data()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn vten_detects_corruption() {
        let t = Tensor::<f32>::ones([1, 1, 2, 2]);
        let mut buf = Vec::new();
        t.write_vten(&mut buf).unwrap();
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(
            Tensor::<f32>::read_vten(&bad[..], Path::new("x")),
            Err(Error::BadMagic { .. })
        ));
        assert!(matches!(
            Tensor::<f32>::read_vten(&buf[..buf.len() - 2], Path::new("x")),
            Err(Error::Truncated { .. })
        ));
    }

    #[test]
    fn gemm_respects_strides() {
        // a = [[1,2],[3,4]], b = [[5,6],[7,8]]
        let a = [1.0f64, 2.0, 3.0, 4.0];
        let b = [5.0f64, 6.0, 7.0, 8.0];
        let mut c = [0.0f64; 4];
        f64::gemm(2, 2, 2, &a, (2, 1), &b, (2, 1), 0.0, &mut c, (2, 1));
        assert_eq!(c, [19.0, 22.0, 43.0, 50.0]);
        // aᵀ·b
        f64::gemm(2, 2, 2, &a, (1, 2), &b, (2, 1), 0.0, &mut c, (2, 1));
        assert_eq!(c, [26.0, 30.0, 38.0, 44.0]);
    }

    #[test]
    fn stack_and_unstack_invert() {
        let a = Tensor::<f32>::full([1, 2, 2, 2], 1.0);
        let b = Tensor::<f32>::full([1, 2, 2, 2], 2.0);
        let s = Tensor::stack(&[a.clone(), b.clone()]).unwrap();
        assert_eq!(s.shape(), Shape::new(2, 2, 2, 2));
        assert_eq!(s.unstack(), vec![a, b]);
    }
}
