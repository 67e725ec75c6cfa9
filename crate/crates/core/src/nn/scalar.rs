//! Floating-point abstraction so the same engine runs in `f32` for training
//! and in `f64` for finite-difference gradient checks.

use core::fmt::Debug;
use core::ops::{AddAssign, MulAssign, SubAssign};

use num_traits::Float;

pub trait Scalar: Float + Debug + Default + Send + Sync + AddAssign + SubAssign + MulAssign + 'static {
    fn of(v: f64) -> Self;
    fn as_f64(self) -> f64;
    fn of_f32(v: f32) -> Self;
    fn as_f32(self) -> f32;

    /// `C = alpha * A·B + beta * C` on raw strided storage.
    ///
    /// # Safety
    /// All pointers must be valid for the given shapes and strides.
    #[allow(clippy::too_many_arguments)]
    unsafe fn gemm_raw(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: *const Self,
        rsa: isize,
        csa: isize,
        b: *const Self,
        rsb: isize,
        csb: isize,
        beta: Self,
        c: *mut Self,
        rsc: isize,
        csc: isize,
    );
}

impl Scalar for f32 {
    fn of(v: f64) -> Self {
        v as f32
    }
    fn as_f64(self) -> f64 {
        f64::from(self)
    }
    fn of_f32(v: f32) -> Self {
        v
    }
    fn as_f32(self) -> f32 {
        self
    }
    unsafe fn gemm_raw(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: *const Self,
        rsa: isize,
        csa: isize,
        b: *const Self,
        rsb: isize,
        csb: isize,
        beta: Self,
        c: *mut Self,
        rsc: isize,
        csc: isize,
    ) {
        matrixmultiply::sgemm(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc)
    }
}

impl Scalar for f64 {
    fn of(v: f64) -> Self {
        v
    }
    fn as_f64(self) -> f64 {
        self
    }
    fn of_f32(v: f32) -> Self {
        f64::from(v)
    }
    fn as_f32(self) -> f32 {
        self as f32
    }
    unsafe fn gemm_raw(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: *const Self,
        rsa: isize,
        csa: isize,
        b: *const Self,
        rsb: isize,
        csb: isize,
        beta: Self,
        c: *mut Self,
        rsc: isize,
        csc: isize,
    ) {
        matrixmultiply::dgemm(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc)
    }
}

/// Read-only strided matrix view.
#[derive(Clone, Copy)]
pub(crate) struct View<'a, F> {
    data: &'a [F],
    rows: usize,
    cols: usize,
    rs: usize,
    cs: usize,
}

impl<'a, F: Scalar> View<'a, F> {
    /// Dense row-major `rows × cols`.
    pub fn new(data: &'a [F], rows: usize, cols: usize) -> Self {
        Self { data, rows, cols, rs: cols, cs: 1 }
    }

    /// Row-major rows spaced `row_stride` apart, e.g. one timestep of a
    /// `[B, T, C]` sequence.
    pub fn strided(data: &'a [F], rows: usize, cols: usize, row_stride: usize) -> Self {
        Self { data, rows, cols, rs: row_stride, cs: 1 }
    }

    pub fn t(self) -> Self {
        Self { data: self.data, rows: self.cols, cols: self.rows, rs: self.cs, cs: self.rs }
    }

    fn check(&self) {
        if self.rows > 0 && self.cols > 0 {
            let last = (self.rows - 1) * self.rs + (self.cols - 1) * self.cs;
            assert!(last < self.data.len(), "matrix view out of bounds");
        }
    }
}

pub(crate) struct ViewMut<'a, F> {
    data: &'a mut [F],
    rows: usize,
    cols: usize,
    rs: usize,
}

impl<'a, F: Scalar> ViewMut<'a, F> {
    pub fn new(data: &'a mut [F], rows: usize, cols: usize) -> Self {
        Self { data, rows, cols, rs: cols }
    }
}

/// `c = a·b + beta·c` (beta is 0 for overwrite, 1 for accumulate).
pub(crate) fn gemm<F: Scalar>(a: View<'_, F>, b: View<'_, F>, beta: F, c: ViewMut<'_, F>) {
    assert_eq!(a.cols, b.rows, "inner dimensions differ");
    assert_eq!(a.rows, c.rows, "output rows differ");
    assert_eq!(b.cols, c.cols, "output cols differ");
    a.check();
    b.check();
    if c.rows > 0 && c.cols > 0 {
        assert!((c.rows - 1) * c.rs + c.cols - 1 < c.data.len(), "output view out of bounds");
    }
    if c.rows == 0 || c.cols == 0 {
        return;
    }
    if a.cols == 0 {
        for r in 0..c.rows {
            for v in &mut c.data[r * c.rs..r * c.rs + c.cols] {
                *v = if beta == F::zero() { F::zero() } else { *v * beta };
            }
        }
        return;
    }
    // SAFETY: every view was bounds-checked above against its backing slice.
    unsafe {
        F::gemm_raw(
            a.rows,
            a.cols,
            b.cols,
            F::one(),
            a.data.as_ptr(),
            a.rs as isize,
            a.cs as isize,
            b.data.as_ptr(),
            b.rs as isize,
            b.cs as isize,
            beta,
            c.data.as_mut_ptr(),
            c.rs as isize,
            1,
        );
    }
}

/// Adds column sums of a row-major `rows × cols` matrix into `out`.
pub(crate) fn add_col_sums<F: Scalar>(m: &[F], rows: usize, cols: usize, out: &mut [F]) {
    for r in 0..rows {
        for (o, &v) in out.iter_mut().zip(&m[r * cols..(r + 1) * cols]) {
            *o += v;
        }
    }
}

/// Adds `bias` to every row.
pub(crate) fn add_row_bias<F: Scalar>(m: &mut [F], cols: usize, bias: &[F]) {
    for row in m.chunks_exact_mut(cols) {
        for (v, &b) in row.iter_mut().zip(bias) {
            *v += b;
        }
    }
}

#[inline]
pub(crate) fn sigmoid<F: Scalar>(x: F) -> F {
    F::one() / (F::one() + (-x).exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gemm_transposes() {
        // a: 2x3, b: 2x3 -> a·bᵀ = 2x2
        let a = [1.0f64, 2.0, 3.0, 4.0, 5.0, 6.0];
        let b = [1.0f64, 0.0, 1.0, 0.0, 1.0, 0.0];
        let mut c = [0.0f64; 4];
        gemm(View::new(&a, 2, 3), View::new(&b, 2, 3).t(), 0.0, ViewMut::new(&mut c, 2, 2));
        assert_eq!(c, [4.0, 2.0, 10.0, 5.0]);
        // accumulate
        gemm(View::new(&a, 2, 3), View::new(&b, 2, 3).t(), 1.0, ViewMut::new(&mut c, 2, 2));
        assert_eq!(c, [8.0, 4.0, 20.0, 10.0]);
    }

    #[test]
    fn strided_rows() {
        // [B=2, T=2, C=2]; take timestep 1 of each batch row
        let seq = [0.0f32, 0.0, 1.0, 2.0, 0.0, 0.0, 3.0, 4.0];
        let eye = [1.0f32, 0.0, 0.0, 1.0];
        let mut out = [0.0f32; 4];
        gemm(View::strided(&seq[2..], 2, 2, 4), View::new(&eye, 2, 2), 0.0, ViewMut::new(&mut out, 2, 2));
        assert_eq!(out, [1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    #[should_panic]
    fn out_of_bounds_view_panics() {
        let a = [1.0f32; 3];
        let mut c = [0.0f32; 4];
        gemm(View::new(&a, 2, 2), View::new(&a, 2, 2), 0.0, ViewMut::new(&mut c, 2, 2));
    }
}
