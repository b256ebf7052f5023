//! Row-major matrix products that accumulate into the output.
//!
//! The products are blocked, single-threaded kernels from `matrixmultiply`;
//! for a given machine they are deterministic. [`dot`] sums eight partial
//! sums in a fixed order.

use crate::Scalar;

fn check(what: &str, have: usize, need: usize) {
    assert!(have >= need, "gemm: {what} holds {have} elements, needs {need}");
}

/// `c[m×n] += a[m×k] · b[k×n]`
pub fn gemm_nn<S: Scalar>(m: usize, n: usize, k: usize, a: &[S], b: &[S], c: &mut [S]) {
    check("a", a.len(), m * k);
    check("b", b.len(), k * n);
    check("c", c.len(), m * n);
    S::gemm_strided(m, k, n, a, [k as isize, 1], b, [n as isize, 1], c);
}

/// `c[m×n] += aᵀ · b` with `a` stored as `[k×m]` and `b` as `[k×n]`.
pub fn gemm_tn<S: Scalar>(m: usize, n: usize, k: usize, a: &[S], b: &[S], c: &mut [S]) {
    check("a", a.len(), k * m);
    check("b", b.len(), k * n);
    check("c", c.len(), m * n);
    S::gemm_strided(m, k, n, a, [1, m as isize], b, [n as isize, 1], c);
}

/// `c[m×n] += a · bᵀ` with `a` stored as `[m×k]` and `b` as `[n×k]`.
pub fn gemm_nt<S: Scalar>(m: usize, n: usize, k: usize, a: &[S], b: &[S], c: &mut [S]) {
    check("a", a.len(), m * k);
    check("b", b.len(), n * k);
    check("c", c.len(), m * n);
    S::gemm_strided(m, k, n, a, [k as isize, 1], b, [1, k as isize], c);
}

#[inline]
pub fn dot<S: Scalar>(a: &[S], b: &[S]) -> S {
    let n = a.len().min(b.len());
    let chunks = n / 8;
    let mut acc = [S::ZERO; 8];
    for c in 0..chunks {
        let aa = &a[c * 8..c * 8 + 8];
        let bb = &b[c * 8..c * 8 + 8];
        for l in 0..8 {
            acc[l] += aa[l] * bb[l];
        }
    }
    let mut tail = S::ZERO;
    for i in chunks * 8..n {
        tail += a[i] * b[i];
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}
