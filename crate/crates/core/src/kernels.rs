// Plain row-major GEMM kernels. Summation order is fixed, so results are
// bit-reproducible for a given shape.

use crate::scalar::Scalar;

/// c[m×p] += a[m×k] · b[k×p]
pub(crate) fn gemm_nn<T: Scalar>(m: usize, k: usize, p: usize, a: &[T], b: &[T], c: &mut [T]) {
    debug_assert!(a.len() >= m * k && b.len() >= k * p && c.len() >= m * p);
    for i in 0..m {
        let crow = &mut c[i * p..(i + 1) * p];
        let arow = &a[i * k..(i + 1) * k];
        for (l, &av) in arow.iter().enumerate() {
            let brow = &b[l * p..(l + 1) * p];
            for (cv, &bv) in crow.iter_mut().zip(brow) {
                *cv += av * bv;
            }
        }
    }
}

/// c[m×p] += a[m×k] · b[p×k]ᵀ
pub(crate) fn gemm_nt<T: Scalar>(m: usize, k: usize, p: usize, a: &[T], b: &[T], c: &mut [T]) {
    debug_assert!(a.len() >= m * k && b.len() >= p * k && c.len() >= m * p);
    for i in 0..m {
        let arow = &a[i * k..(i + 1) * k];
        for j in 0..p {
            let brow = &b[j * k..(j + 1) * k];
            c[i * p + j] += dot(arow, brow);
        }
    }
}

/// c[k×p] += a[m×k]ᵀ · b[m×p]
pub(crate) fn gemm_tn<T: Scalar>(m: usize, k: usize, p: usize, a: &[T], b: &[T], c: &mut [T]) {
    debug_assert!(a.len() >= m * k && b.len() >= m * p && c.len() >= k * p);
    for i in 0..m {
        let arow = &a[i * k..(i + 1) * k];
        let brow = &b[i * p..(i + 1) * p];
        for (l, &av) in arow.iter().enumerate() {
            let crow = &mut c[l * p..(l + 1) * p];
            for (cv, &bv) in crow.iter_mut().zip(brow) {
                *cv += av * bv;
            }
        }
    }
}

/// Eight-lane dot product; lanes are folded in a fixed order.
#[inline]
pub(crate) fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    let n = a.len().min(b.len());
    let mut acc = [T::zero(); 8];
    let chunks = n / 8;
    for c in 0..chunks {
        let o = c * 8;
        for lane in 0..8 {
            acc[lane] += a[o + lane] * b[o + lane];
        }
    }
    let mut tail = T::zero();
    for i in chunks * 8..n {
        tail += a[i] * b[i];
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}
