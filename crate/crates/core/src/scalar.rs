//! Scalar abstraction shared by the image kernels and the network.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Real scalar type: `f32` for storage and training, `f64` for oracles and gradient checks.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Sum
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    fn of(v: f64) -> Self;

    fn f64(self) -> f64;

    /// `c = a * b + beta * c` for an `m x k` by `k x n` product with explicit strides.
    fn gemm(m: usize, k: usize, n: usize, a: Strided<'_, Self>, b: Strided<'_, Self>, beta: Self, c: &mut [Self]);
}

/// Read-only matrix view: element `(i, j)` is `data[i * row_stride + j * col_stride]`.
#[derive(Debug, Clone, Copy)]
pub struct Strided<'a, T> {
    pub data: &'a [T],
    pub row_stride: usize,
    pub col_stride: usize,
}

impl<'a, T> Strided<'a, T> {
    pub fn row_major(data: &'a [T], cols: usize) -> Self {
        Self { data, row_stride: cols, col_stride: 1 }
    }

    pub fn transposed(data: &'a [T], cols: usize) -> Self {
        Self { data, row_stride: 1, col_stride: cols }
    }

    fn check(&self, r: usize, c: usize) {
        if r > 0 && c > 0 {
            assert!((r - 1) * self.row_stride + (c - 1) * self.col_stride < self.data.len(), "gemm operand out of bounds");
        }
    }
}

fn check_gemm<T>(m: usize, k: usize, n: usize, a: &Strided<'_, T>, b: &Strided<'_, T>, c: &[T]) {
    a.check(m, k);
    b.check(k, n);
    assert!(c.len() >= m * n, "gemm output too small");
}

impl Real for f32 {
    #[inline(always)]
    fn of(v: f64) -> Self {
        v as f32
    }

    #[inline(always)]
    fn f64(self) -> f64 {
        self as f64
    }

    fn gemm(m: usize, k: usize, n: usize, a: Strided<'_, Self>, b: Strided<'_, Self>, beta: Self, c: &mut [Self]) {
        check_gemm(m, k, n, &a, &b, c);
        // SAFETY: every index touched is bounds-checked by `check_gemm`.
        unsafe {
            matrixmultiply::sgemm(
                m, k, n, 1.0,
                a.data.as_ptr(), a.row_stride as isize, a.col_stride as isize,
                b.data.as_ptr(), b.row_stride as isize, b.col_stride as isize,
                beta, c.as_mut_ptr(), n as isize, 1,
            );
        }
    }
}

impl Real for f64 {
    #[inline(always)]
    fn of(v: f64) -> Self {
        v
    }

    #[inline(always)]
    fn f64(self) -> f64 {
        self
    }

    fn gemm(m: usize, k: usize, n: usize, a: Strided<'_, Self>, b: Strided<'_, Self>, beta: Self, c: &mut [Self]) {
        check_gemm(m, k, n, &a, &b, c);
        // SAFETY: every index touched is bounds-checked by `check_gemm`.
        unsafe {
            matrixmultiply::dgemm(
                m, k, n, 1.0,
                a.data.as_ptr(), a.row_stride as isize, a.col_stride as isize,
                b.data.as_ptr(), b.row_stride as isize, b.col_stride as isize,
                beta, c.as_mut_ptr(), n as isize, 1,
            );
        }
    }
}

/// Affinely map `values` onto [0,1]. A constant slice maps to all zeros.
pub fn rescale_unit<T: Real>(values: &mut [T]) {
    let (lo, hi) = values
        .iter()
        .fold((T::infinity(), T::neg_infinity()), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let span = hi - lo;
    if !(span > T::zero()) {
        values.iter_mut().for_each(|v| *v = T::zero());
        return;
    }
    for v in values.iter_mut() {
        *v = ((*v - lo) / span).max(T::zero()).min(T::one());
    }
}
