//! Matrix-product kernels over row-major buffers.

/// Left operands sparser than this use the zero-skipping kernel.
pub(crate) const SPARSE_DENSITY: f64 = 0.1;

/// `C = A B + beta C` with `A: m x k`, `B: k x n`, `C: m x n`. Operand layouts
/// are given by (row stride, column stride) pairs, so transposes are free.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    a_strides: (isize, isize),
    b: &[f64],
    b_strides: (isize, isize),
    c: &mut [f64],
    beta: f64,
) {
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        for x in c.iter_mut() {
            *x *= beta;
        }
        return;
    }
    assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    // SAFETY: the asserts above bound every index the strides can reach for
    // the contiguous row- or column-major layouts used by the callers.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            a_strides.0,
            a_strides.1,
            b.as_ptr(),
            b_strides.0,
            b_strides.1,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

pub(crate) fn density(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 1.0;
    }
    values.iter().filter(|v| **v != 0.0).count() as f64 / values.len() as f64
}

/// `C = A B` skipping zero entries of the row-major `A: m x k`.
pub(crate) fn sparse_lhs_matmul(m: usize, k: usize, n: usize, a: &[f64], b: &[f64], c: &mut [f64]) {
    c[..m * n].fill(0.0);
    for i in 0..m {
        let out = &mut c[i * n..(i + 1) * n];
        for (kk, &aik) in a[i * k..(i + 1) * k].iter().enumerate() {
            if aik != 0.0 {
                for (o, bv) in out.iter_mut().zip(&b[kk * n..(kk + 1) * n]) {
                    *o += aik * bv;
                }
            }
        }
    }
}

/// `G_B += A^T G` skipping zero entries of `A: m x k`, with `G: m x n`.
pub(crate) fn sparse_lhs_transpose_accumulate(m: usize, k: usize, n: usize, a: &[f64], g: &[f64], gb: &mut [f64]) {
    for i in 0..m {
        let grow = &g[i * n..(i + 1) * n];
        for (kk, &aik) in a[i * k..(i + 1) * k].iter().enumerate() {
            if aik != 0.0 {
                for (o, gv) in gb[kk * n..(kk + 1) * n].iter_mut().zip(grow) {
                    *o += aik * gv;
                }
            }
        }
    }
}
