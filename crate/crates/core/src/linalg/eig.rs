use alloc::vec;
use alloc::vec::Vec;

use super::DenseMatrix;
use crate::{Error, Result};

/// Eigenvalues of a real symmetric matrix in ascending order.
///
/// Householder tridiagonalization followed by implicit QL; only the lower
/// triangle of `a` is read.
pub fn symmetric_eigenvalues(a: &DenseMatrix<f64>) -> Result<Vec<f64>> {
    assert!(a.is_square());
    let n = a.rows();
    if n == 0 {
        return Ok(Vec::new());
    }
    // Working copy, symmetrized from the lower triangle.
    let mut w = DenseMatrix::from_fn(n, n, |i, j| if i >= j { a[(i, j)] } else { a[(j, i)] });
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    for k in 0..n.saturating_sub(2) {
        let m = n - k - 1;
        let mut xnorm = 0.0;
        for i in 0..m {
            v[i] = w[(k + 1 + i, k)];
            xnorm += v[i] * v[i];
        }
        let xnorm = xnorm.sqrt();
        if xnorm == 0.0 {
            continue;
        }
        let alpha = if v[0] > 0.0 { -xnorm } else { xnorm };
        v[0] -= alpha;
        let vnorm = v[..m].iter().map(|x| x * x).sum::<f64>().sqrt();
        if vnorm == 0.0 {
            continue;
        }
        v[..m].iter_mut().for_each(|x| *x /= vnorm);
        let mut kappa = 0.0;
        for i in 0..m {
            let mut s = 0.0;
            for j in 0..m {
                s += w[(k + 1 + i, k + 1 + j)] * v[j];
            }
            p[i] = s;
            kappa += v[i] * s;
        }
        for i in 0..m {
            p[i] -= kappa * v[i];
        }
        for i in 0..m {
            for j in 0..m {
                w[(k + 1 + i, k + 1 + j)] -= 2.0 * (v[i] * p[j] + p[i] * v[j]);
            }
        }
        w[(k + 1, k)] = alpha;
        w[(k, k + 1)] = alpha;
        for i in 1..m {
            w[(k + 1 + i, k)] = 0.0;
            w[(k, k + 1 + i)] = 0.0;
        }
    }
    let mut d: Vec<f64> = (0..n).map(|i| w[(i, i)]).collect();
    let mut e: Vec<f64> = (0..n)
        .map(|i| if i + 1 < n { w[(i + 1, i)] } else { 0.0 })
        .collect();
    tridiagonal_ql(&mut d, &mut e)?;
    d.sort_by(|a, b| a.partial_cmp(b).unwrap_or(core::cmp::Ordering::Equal));
    Ok(d)
}

/// Implicit QL on a symmetric tridiagonal matrix; `e[i]` couples `i` and `i+1`.
fn tridiagonal_ql(d: &mut [f64], e: &mut [f64]) -> Result<()> {
    let n = d.len();
    const MAX_ITER: usize = 60;
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > MAX_ITER {
                return Err(Error::NoConvergence { iterations: iter });
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut underflow = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}

/// Singular values of a real matrix in descending order (one-sided Jacobi).
pub fn singular_values(a: &DenseMatrix<f64>) -> Vec<f64> {
    let (m, n) = (a.rows(), a.cols());
    // Columns stored contiguously.
    let mut cols: Vec<Vec<f64>> = (0..n)
        .map(|j| (0..m).map(|i| a[(i, j)]).collect())
        .collect();
    for _sweep in 0..60 {
        let mut rotated = false;
        for i in 0..n {
            for j in i + 1..n {
                let (alpha, beta, gamma) = cols[i]
                    .iter()
                    .zip(&cols[j])
                    .fold((0.0, 0.0, 0.0), |(a, b, g), (x, y)| {
                        (a + x * x, b + y * y, g + x * y)
                    });
                if gamma == 0.0 || gamma.abs() <= 1e-15 * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let (left, right) = cols.split_at_mut(j);
                for (x, y) in left[i].iter_mut().zip(right[0].iter_mut()) {
                    let (xi, yj) = (*x, *y);
                    *x = c * xi - s * yj;
                    *y = s * xi + c * yj;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sv: Vec<f64> = cols
        .iter()
        .map(|c| c.iter().map(|x| x * x).sum::<f64>().sqrt())
        .collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap_or(core::cmp::Ordering::Equal));
    sv
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigenvalues_of_laplacian_stencil() {
        // tridiag(-1, 2, -1) of size n has eigenvalues 2 - 2cos(kπ/(n+1)).
        let n = 9;
        let a = DenseMatrix::from_fn(n, n, |i, j| match i.abs_diff(j) {
            0 => 2.0,
            1 => -1.0,
            _ => 0.0,
        });
        let ev = symmetric_eigenvalues(&a).unwrap();
        for (k, l) in ev.iter().enumerate() {
            let exact =
                2.0 - 2.0 * (((k + 1) as f64) * core::f64::consts::PI / (n as f64 + 1.0)).cos();
            assert!((l - exact).abs() < 1e-13, "{l} vs {exact}");
        }
    }

    #[test]
    fn eigenvalues_of_dense_symmetric() {
        let a =
            DenseMatrix::from_row_major(3, 3, vec![4.0, 1.0, 2.0, 1.0, 3.0, 0.5, 2.0, 0.5, 5.0]);
        let ev = symmetric_eigenvalues(&a).unwrap();
        let trace: f64 = ev.iter().sum();
        assert!((trace - 12.0).abs() < 1e-12);
        let sumsq: f64 = ev.iter().map(|x| x * x).sum();
        // ‖A‖_F² = Σ λ²
        assert!((sumsq - a.norm_fro().powi(2)).abs() < 1e-11);
    }

    #[test]
    fn singular_values_of_rank_deficient() {
        let a =
            DenseMatrix::from_row_major(3, 3, vec![1.0, 2.0, 3.0, 2.0, 4.0, 6.0, 1.0, 0.0, 1.0]);
        let sv = singular_values(&a);
        assert!(sv[2] < 1e-14 * sv[0]);
        let fro: f64 = sv.iter().map(|s| s * s).sum();
        assert!((fro - a.norm_fro().powi(2)).abs() < 1e-12);
    }
}
