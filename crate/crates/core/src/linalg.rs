//! Small dense kernels used on the hot path of the probability engine.
//!
//! The state matrices themselves are `nalgebra` values; the routines here work
//! on flat row-major scratch buffers so the exponential subset loop never
//! allocates.

use nalgebra::DMatrix;
use num_complex::Complex64;

pub type CMatrix = DMatrix<Complex64>;

/// In-place Cholesky factorisation of a real symmetric `n x n` row-major
/// matrix. Returns the product of the diagonal of `L`, i.e. `sqrt(det A)`,
/// or `None` when a non-positive pivot shows `A` is not positive definite.
///
/// Only the lower triangle is read.
pub fn cholesky_sqrt_det(a: &mut [f64], n: usize) -> Option<f64> {
    debug_assert!(a.len() >= n * n);
    let mut prod = 1.0;
    for j in 0..n {
        let (upper, lower) = a.split_at_mut((j + 1) * n);
        let row_j = &mut upper[j * n..];
        let d = row_j[j] - dot(&row_j[..j], &row_j[..j]);
        if !(d > 0.0) {
            return None;
        }
        let ljj = d.sqrt();
        row_j[j] = ljj;
        prod *= ljj;
        let inv = 1.0 / ljj;
        let rj = &upper[j * n..j * n + j];
        for row_i in lower[..(n - j - 1) * n].chunks_exact_mut(n) {
            let s = dot(&row_i[..j], rj);
            row_i[j] = (row_i[j] - s) * inv;
        }
    }
    Some(prod)
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    // Four independent accumulators let the compiler keep the FMA pipes busy.
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let k = 4 * c;
        acc[0] += a[k] * b[k];
        acc[1] += a[k + 1] * b[k + 1];
        acc[2] += a[k + 2] * b[k + 2];
        acc[3] += a[k + 3] * b[k + 3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for k in 4 * chunks..a.len() {
        s += a[k] * b[k];
    }
    s
}

/// Determinant of a general complex `n x n` row-major matrix by LU
/// factorisation with partial pivoting. The buffer is overwritten.
pub fn lu_determinant(a: &mut [Complex64], n: usize) -> Complex64 {
    let mut det = Complex64::new(1.0, 0.0);
    for col in 0..n {
        let mut piv = col;
        let mut best = a[col * n + col].norm();
        for row in (col + 1)..n {
            let v = a[row * n + col].norm();
            if v > best {
                best = v;
                piv = row;
            }
        }
        if best == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        if piv != col {
            for k in 0..n {
                a.swap(col * n + k, piv * n + k);
            }
            det = -det;
        }
        let p = a[col * n + col];
        det *= p;
        for row in (col + 1)..n {
            let f = a[row * n + col] / p;
            if f == Complex64::new(0.0, 0.0) {
                continue;
            }
            for k in (col + 1)..n {
                let upd = f * a[col * n + k];
                a[row * n + k] -= upd;
            }
        }
    }
    det
}

/// `max_ij |(U U^dagger - I)_ij|`.
pub fn unitarity_defect(u: &CMatrix) -> f64 {
    if u.nrows() != u.ncols() {
        return f64::INFINITY;
    }
    let prod = u * u.adjoint();
    let mut worst = 0.0f64;
    for i in 0..prod.nrows() {
        for j in 0..prod.ncols() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((prod[(i, j)] - Complex64::new(target, 0.0)).norm());
        }
    }
    worst
}

/// Entrywise maximum absolute difference of two equally shaped matrices.
pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn cholesky_matches_known_determinant() {
        // det = 4*3 - 2*2 = 8
        let mut a = vec![4.0, 2.0, 2.0, 3.0];
        let s = cholesky_sqrt_det(&mut a, 2).unwrap();
        assert_relative_eq!(s * s, 8.0, epsilon = 1e-14);
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let mut a = vec![1.0, 2.0, 2.0, 1.0];
        assert!(cholesky_sqrt_det(&mut a, 2).is_none());
    }

    #[test]
    fn lu_and_cholesky_agree_on_spd() {
        let n = 7;
        let mut m = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                m[i * n + j] = 1.0 / (1.0 + (i as f64 - j as f64).abs()) + if i == j { n as f64 } else { 0.0 };
            }
        }
        let mut c: Vec<Complex64> = m.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        let lu = lu_determinant(&mut c, n);
        let s = cholesky_sqrt_det(&mut m.clone(), n).unwrap();
        assert_relative_eq!(lu.re, s * s, max_relative = 1e-12);
        assert!(lu.im.abs() < 1e-9);
    }

    #[test]
    fn lu_handles_pivoting() {
        let mut a = vec![
            Complex64::new(0.0, 0.0),
            Complex64::new(1.0, 0.0),
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 0.0),
        ];
        assert_relative_eq!(lu_determinant(&mut a, 2).re, -1.0);
    }
}
