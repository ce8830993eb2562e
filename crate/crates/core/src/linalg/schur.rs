use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64 as C64;

use super::{DenseMatrix, Scalar};
use crate::{Error, Result};

/// Complex Schur form `A = Q T Q*` with `Q` unitary and `T` upper triangular.
#[derive(Debug, Clone)]
pub struct ComplexSchur {
    pub q: DenseMatrix<C64>,
    pub t: DenseMatrix<C64>,
}

/// Reflector `I - 2 v v*` mapping `x` onto a multiple of `e_1`.
/// Returns `None` when `x` is already zero below its first entry.
fn householder_vector(x: &[C64]) -> Option<(Vec<C64>, C64)> {
    let norm_x = super::norm2(x);
    let tail = super::norm2(&x[1..]);
    if norm_x == 0.0 || tail == 0.0 {
        return None;
    }
    let phase = if x[0].norm() == 0.0 {
        C64::new(1.0, 0.0)
    } else {
        x[0] / x[0].norm()
    };
    let alpha = -phase * norm_x;
    let mut v = x.to_vec();
    v[0] -= alpha;
    let vn = super::norm2(&v);
    v.iter_mut().for_each(|z| *z /= vn);
    Some((v, alpha))
}

/// Applies `(I - 2vv*)` from the left to rows `off..off+v.len()`, columns `c0..`.
fn reflect_rows(a: &mut DenseMatrix<C64>, v: &[C64], off: usize, c0: usize) {
    for j in c0..a.cols() {
        let mut s = C64::zero();
        for (i, vi) in v.iter().enumerate() {
            s += vi.conj() * a[(off + i, j)];
        }
        let s = s * 2.0;
        for (i, vi) in v.iter().enumerate() {
            a[(off + i, j)] -= *vi * s;
        }
    }
}

/// Applies `(I - 2vv*)` from the right to columns `off..off+v.len()`, rows `r0..r1`.
fn reflect_cols(a: &mut DenseMatrix<C64>, v: &[C64], off: usize, r0: usize, r1: usize) {
    for i in r0..r1 {
        let mut s = C64::zero();
        for (j, vj) in v.iter().enumerate() {
            s += a[(i, off + j)] * *vj;
        }
        let s = s * 2.0;
        for (j, vj) in v.iter().enumerate() {
            a[(i, off + j)] -= s * vj.conj();
        }
    }
}

/// Householder QR of a square complex matrix: `A = U R`.
pub fn householder_qr(a: &DenseMatrix<C64>) -> (DenseMatrix<C64>, DenseMatrix<C64>) {
    assert!(a.is_square());
    let n = a.rows();
    let mut r = a.clone();
    let mut u = DenseMatrix::<C64>::identity(n);
    for k in 0..n.saturating_sub(1) {
        let x: Vec<C64> = (k..n).map(|i| r[(i, k)]).collect();
        if let Some((v, alpha)) = householder_vector(&x) {
            reflect_rows(&mut r, &v, k, k);
            reflect_cols(&mut u, &v, k, 0, n);
            r[(k, k)] = alpha;
            for i in k + 1..n {
                r[(i, k)] = C64::zero();
            }
        }
    }
    (u, r)
}

fn reduce_to_hessenberg(h: &mut DenseMatrix<C64>, q: &mut DenseMatrix<C64>) {
    let n = h.rows();
    for k in 0..n.saturating_sub(2) {
        let x: Vec<C64> = (k + 1..n).map(|i| h[(i, k)]).collect();
        if let Some((v, alpha)) = householder_vector(&x) {
            reflect_rows(h, &v, k + 1, k);
            reflect_cols(h, &v, k + 1, 0, n);
            reflect_cols(q, &v, k + 1, 0, n);
            h[(k + 1, k)] = alpha;
            for i in k + 2..n {
                h[(i, k)] = C64::zero();
            }
        }
    }
}

/// Eigenvalues of the 2×2 block `[[a, b], [c, d]]` nearest to `d`.
fn wilkinson_shift(a: C64, b: C64, c: C64, d: C64) -> C64 {
    let half_tr = (a + d) * 0.5;
    let disc = ((a - d) * 0.5) * ((a - d) * 0.5) + b * c;
    let root = disc.sqrt();
    let l1 = half_tr + root;
    let l2 = half_tr - root;
    if (l1 - d).norm() <= (l2 - d).norm() {
        l1
    } else {
        l2
    }
}

/// Complex Schur decomposition by Hessenberg reduction and shifted QR sweeps.
pub fn complex_schur(a: &DenseMatrix<C64>) -> Result<ComplexSchur> {
    assert!(a.is_square());
    let n = a.rows();
    let mut t = a.clone();
    let mut q = DenseMatrix::<C64>::identity(n);
    if n <= 1 {
        return Ok(ComplexSchur { q, t });
    }
    reduce_to_hessenberg(&mut t, &mut q);

    let max_iter_per_eig = 60;
    let mut hi = n - 1;
    let mut iter = 0usize;
    let mut total = 0usize;
    let mut rot: Vec<(C64, C64)> = vec![(C64::zero(), C64::zero()); n];
    while hi > 0 {
        // Locate the start of the active unreduced block.
        let mut lo = hi;
        while lo > 0 {
            let sub = t[(lo, lo - 1)].norm();
            let diag = t[(lo - 1, lo - 1)].norm() + t[(lo, lo)].norm();
            let tiny = if diag == 0.0 {
                f64::MIN_POSITIVE
            } else {
                f64::EPSILON * diag
            };
            if sub <= tiny {
                t[(lo, lo - 1)] = C64::zero();
                break;
            }
            lo -= 1;
        }
        if lo == hi {
            hi -= 1;
            iter = 0;
            continue;
        }
        iter += 1;
        total += 1;
        if iter > max_iter_per_eig {
            return Err(Error::NoConvergence { iterations: total });
        }
        let mu = if iter.is_multiple_of(11) {
            // Exceptional shift to break cycles.
            t[(hi, hi)] + C64::new(0.75 * t[(hi, hi - 1)].norm(), 0.25 * t[(hi, hi - 1)].norm())
        } else {
            wilkinson_shift(
                t[(hi - 1, hi - 1)],
                t[(hi - 1, hi)],
                t[(hi, hi - 1)],
                t[(hi, hi)],
            )
        };
        for k in lo..=hi {
            t[(k, k)] -= mu;
        }
        // Left Givens sweep: reduce the block to upper triangular R.
        for k in lo..hi {
            let x = t[(k, k)];
            let y = t[(k + 1, k)];
            let r = x.norm().hypot(y.norm());
            let (c, s) = if r == 0.0 {
                (C64::new(1.0, 0.0), C64::zero())
            } else {
                (x / r, y / r)
            };
            rot[k] = (c, s);
            for j in k..n {
                let a1 = t[(k, j)];
                let a2 = t[(k + 1, j)];
                t[(k, j)] = c.conj() * a1 + s.conj() * a2;
                t[(k + 1, j)] = -s * a1 + c * a2;
            }
        }
        // Right sweep: R Q, plus accumulation into the Schur vectors.
        for k in lo..hi {
            let (c, s) = rot[k];
            let apply = |m: &mut DenseMatrix<C64>, rows: usize| {
                for i in 0..rows {
                    let a1 = m[(i, k)];
                    let a2 = m[(i, k + 1)];
                    m[(i, k)] = c * a1 + s * a2;
                    m[(i, k + 1)] = -s.conj() * a1 + c.conj() * a2;
                }
            };
            apply(&mut t, (k + 2).min(hi + 1));
            apply(&mut q, n);
        }
        for k in lo..=hi {
            t[(k, k)] += mu;
        }
    }
    for i in 1..n {
        for j in 0..i {
            t[(i, j)] = C64::zero();
        }
    }
    Ok(ComplexSchur { q, t })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(n: usize, seed: u64) -> DenseMatrix<C64> {
        let mut state = seed;
        let mut next = || {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        DenseMatrix::from_fn(n, n, |_, _| C64::new(next(), 0.0))
    }

    #[test]
    fn schur_reconstructs_real_matrix() {
        for n in [1, 2, 3, 7, 20] {
            let a = sample(n, n as u64 + 3);
            let s = complex_schur(&a).unwrap();
            let back = s.q.matmul(&s.t).matmul(&s.q.adjoint());
            assert!(
                back.sub(&a).norm_fro() < 1e-12 * a.norm_fro().max(1.0),
                "n={n}"
            );
            let qq = s.q.adjoint().matmul(&s.q);
            assert!(qq.sub(&DenseMatrix::identity(n)).norm_fro() < 1e-12);
        }
    }

    #[test]
    fn rotation_has_imaginary_eigenvalues() {
        let a = DenseMatrix::from_row_major(
            2,
            2,
            vec![
                C64::new(0.0, 0.0),
                C64::new(-1.0, 0.0),
                C64::new(1.0, 0.0),
                C64::new(0.0, 0.0),
            ],
        );
        let s = complex_schur(&a).unwrap();
        let mut ev = [s.t[(0, 0)], s.t[(1, 1)]];
        ev.sort_by(|a, b| a.im.partial_cmp(&b.im).unwrap());
        assert!((ev[0] - C64::new(0.0, -1.0)).norm() < 1e-14);
        assert!((ev[1] - C64::new(0.0, 1.0)).norm() < 1e-14);
    }

    #[test]
    fn qr_is_unitary_times_triangular() {
        let a = sample(6, 11);
        let (u, r) = householder_qr(&a);
        assert!(u.matmul(&r).sub(&a).norm_fro() < 1e-13);
        assert!(
            u.adjoint()
                .matmul(&u)
                .sub(&DenseMatrix::identity(6))
                .norm_fro()
                < 1e-13
        );
        for i in 1..6 {
            for j in 0..i {
                assert_eq!(r[(i, j)], C64::zero());
            }
        }
    }
}
