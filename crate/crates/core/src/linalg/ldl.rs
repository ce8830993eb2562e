use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use super::{CsrMatrix, Scalar};
use crate::{Error, Result};

/// Symbolic LDLᵀ analysis of a structurally symmetric pattern under a
/// fill-reducing permutation. Shared by every numeric factorization on the
/// same pattern.
#[derive(Debug, Clone)]
pub struct SymbolicLdl {
    n: usize,
    /// `perm[new] = old`
    perm: Vec<usize>,
    parent: Vec<usize>,
    col_ptr: Vec<usize>,
    /// For permuted column `k`: `(row i <= k, slot in the pattern's value array)`.
    upper: Vec<Vec<(usize, usize)>>,
}

const NONE: usize = usize::MAX;

impl SymbolicLdl {
    /// `pattern` must be structurally symmetric; `perm[new] = old`.
    pub fn analyze(pattern: &CsrMatrix, perm: Vec<usize>) -> Self {
        let n = pattern.rows();
        assert_eq!(pattern.cols(), n);
        assert_eq!(perm.len(), n);
        let mut pinv = vec![0usize; n];
        for (new, &old) in perm.iter().enumerate() {
            pinv[old] = new;
        }
        let mut upper: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
        let mut slot = 0usize;
        for old_i in 0..n {
            let (cols, _) = pattern.row(old_i);
            for &old_j in cols {
                let (i, j) = (pinv[old_i], pinv[old_j]);
                if i <= j {
                    upper[j].push((i, slot));
                }
                slot += 1;
            }
        }
        let mut parent = vec![NONE; n];
        let mut flag = vec![NONE; n];
        let mut counts = vec![0usize; n];
        for k in 0..n {
            flag[k] = k;
            for &(i0, _) in &upper[k] {
                let mut i = i0;
                while i < k && flag[i] != k {
                    if parent[i] == NONE {
                        parent[i] = k;
                    }
                    counts[i] += 1;
                    flag[i] = k;
                    i = parent[i];
                }
            }
        }
        let mut col_ptr = vec![0usize; n + 1];
        for k in 0..n {
            col_ptr[k + 1] = col_ptr[k] + counts[k];
        }
        Self {
            n,
            perm,
            parent,
            col_ptr,
            upper,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Multiply-add count of the numeric factorization, `Σ_k c_k²`.
    pub fn factor_flops(&self) -> usize {
        (0..self.n)
            .map(|k| {
                let c = self.col_ptr[k + 1] - self.col_ptr[k];
                c * c
            })
            .sum()
    }

    /// Number of strictly-lower nonzeros in `L`.
    pub fn factor_nnz(&self) -> usize {
        self.col_ptr[self.n]
    }
}

/// Numeric `P A Pᵀ = L D Lᵀ` (transpose, not conjugate transpose), valid for
/// real symmetric and complex symmetric matrices. No pivoting is done, so a
/// tiny pivot aborts the factorization.
#[derive(Debug, Clone)]
pub struct SparseLdl<T> {
    sym: Arc<SymbolicLdl>,
    li: Vec<usize>,
    lx: Vec<T>,
    d: Vec<T>,
}

impl<T: Scalar> SparseLdl<T> {
    /// `values` follow the storage order of the pattern used in
    /// [`SymbolicLdl::analyze`]. Fails when `|d_k| <= rel_floor * max|a_ij|`.
    pub fn factor(sym: Arc<SymbolicLdl>, values: &[T], rel_floor: f64) -> Result<Self> {
        let n = sym.n;
        let amax = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let floor = rel_floor * amax;
        let nnz = sym.factor_nnz();
        let mut li = vec![0usize; nnz];
        let mut lx = vec![T::zero(); nnz];
        let mut d = vec![T::zero(); n];
        let mut y = vec![T::zero(); n];
        let mut pattern = vec![0usize; n];
        let mut flag = vec![NONE; n];
        let mut lnz = vec![0usize; n];
        for k in 0..n {
            let mut top = n;
            flag[k] = k;
            for &(i0, s) in &sym.upper[k] {
                y[i0] += values[s];
                let mut len = 0;
                let mut i = i0;
                while flag[i] != k {
                    pattern[len] = i;
                    len += 1;
                    flag[i] = k;
                    i = sym.parent[i];
                }
                while len > 0 {
                    top -= 1;
                    len -= 1;
                    pattern[top] = pattern[len];
                }
            }
            let mut dk = y[k];
            y[k] = T::zero();
            for &i in &pattern[top..n] {
                let yi = y[i];
                y[i] = T::zero();
                let start = sym.col_ptr[i];
                let end = start + lnz[i];
                for p in start..end {
                    let r = li[p];
                    y[r] -= lx[p] * yi;
                }
                let l_ki = yi / d[i];
                dk -= l_ki * yi;
                li[end] = k;
                lx[end] = l_ki;
                lnz[i] += 1;
            }
            if dk.abs() == 0.0 || dk.abs() <= floor {
                return Err(Error::Singular {
                    row: k,
                    pivot: dk.abs(),
                });
            }
            d[k] = dk;
        }
        Ok(Self { sym, li, lx, d })
    }

    pub fn solve_in_place(&self, b: &mut [T]) {
        let n = self.sym.n;
        assert_eq!(b.len(), n);
        let mut x: Vec<T> = self.sym.perm.iter().map(|&old| b[old]).collect();
        for j in 0..n {
            let xj = x[j];
            for p in self.sym.col_ptr[j]..self.sym.col_ptr[j + 1] {
                x[self.li[p]] -= self.lx[p] * xj;
            }
        }
        for j in 0..n {
            x[j] = x[j] / self.d[j];
        }
        for j in (0..n).rev() {
            let mut s = x[j];
            for p in self.sym.col_ptr[j]..self.sym.col_ptr[j + 1] {
                s -= self.lx[p] * x[self.li[p]];
            }
            x[j] = s;
        }
        for (new, &old) in self.sym.perm.iter().enumerate() {
            b[old] = x[new];
        }
    }
}

/// Nested-dissection ordering of a tensor-product index grid
/// (`index = i0 + n0 * i1`) whose couplings reach at most `radius` cells
/// in every direction. One-dimensional grids keep the natural order.
pub fn nested_dissection_order(shape: &[usize], radius: usize) -> Vec<usize> {
    let total: usize = shape.iter().product();
    if shape.len() < 2 || radius == 0 {
        return (0..total).collect();
    }
    assert_eq!(shape.len(), 2, "only 1D and 2D grids are supported");
    let (nx, ny) = (shape[0], shape[1]);
    let mut out = Vec::with_capacity(total);
    dissect(0, nx, 0, ny, nx, radius, &mut out);
    out
}

fn dissect(x0: usize, x1: usize, y0: usize, y1: usize, nx: usize, r: usize, out: &mut Vec<usize>) {
    let (w, h) = (x1 - x0, y1 - y0);
    let leaf = |out: &mut Vec<usize>| {
        for y in y0..y1 {
            for x in x0..x1 {
                out.push(x + nx * y);
            }
        }
    };
    if w * h <= 4 * (r + 1) * (r + 1) {
        leaf(out);
        return;
    }
    if w >= h {
        if w < r + 2 {
            leaf(out);
            return;
        }
        let mid = x0 + (w - r) / 2;
        dissect(x0, mid, y0, y1, nx, r, out);
        dissect(mid + r, x1, y0, y1, nx, r, out);
        for y in y0..y1 {
            for x in mid..mid + r {
                out.push(x + nx * y);
            }
        }
    } else {
        if h < r + 2 {
            leaf(out);
            return;
        }
        let mid = y0 + (h - r) / 2;
        dissect(x0, x1, y0, mid, nx, r, out);
        dissect(x0, x1, mid + r, y1, nx, r, out);
        for y in mid..mid + r {
            for x in x0..x1 {
                out.push(x + nx * y);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::DenseMatrix;
    use num_complex::Complex64 as C64;

    fn grid_laplacian(nx: usize, ny: usize) -> CsrMatrix {
        let mut t = Vec::new();
        for y in 0..ny {
            for x in 0..nx {
                let i = x + nx * y;
                t.push((i, i, 4.5));
                if x + 1 < nx {
                    t.push((i, i + 1, -1.0));
                    t.push((i + 1, i, -1.0));
                }
                if y + 1 < ny {
                    t.push((i, i + nx, -1.0));
                    t.push((i + nx, i, -1.0));
                }
            }
        }
        CsrMatrix::from_triplets(nx * ny, nx * ny, &t)
    }

    #[test]
    fn ordering_is_a_permutation() {
        for (nx, ny, r) in [(1, 1, 1), (7, 5, 1), (30, 30, 2), (13, 40, 3)] {
            let mut p = nested_dissection_order(&[nx, ny], r);
            p.sort_unstable();
            assert_eq!(p, (0..nx * ny).collect::<Vec<_>>());
        }
    }

    #[test]
    fn complex_symmetric_solve_matches_dense() {
        let (nx, ny) = (9, 11);
        let a = grid_laplacian(nx, ny);
        let shift = C64::new(0.3, 1.7);
        let values: Vec<C64> = a
            .iter()
            .map(|(i, j, v)| {
                if i == j {
                    C64::new(v, 0.0) * shift
                } else {
                    C64::new(v, 0.0)
                }
            })
            .collect();
        let sym = Arc::new(SymbolicLdl::analyze(
            &a,
            nested_dissection_order(&[nx, ny], 1),
        ));
        let f = SparseLdl::factor(sym, &values, 1e-13).unwrap();
        let n = nx * ny;
        let b: Vec<C64> = (0..n)
            .map(|i| C64::new((i as f64).cos(), (i as f64 * 0.3).sin()))
            .collect();
        let mut x = b.clone();
        f.solve_in_place(&mut x);
        let mut dense = DenseMatrix::<C64>::zeros(n, n);
        for ((i, j, _), v) in a.iter().zip(&values) {
            dense[(i, j)] = *v;
        }
        let r = dense.matvec(&x);
        for (ri, bi) in r.iter().zip(&b) {
            assert!((ri - bi).norm() < 1e-12);
        }
    }

    #[test]
    fn dissection_reduces_fill() {
        let (nx, ny) = (40, 40);
        let a = grid_laplacian(nx, ny);
        let natural = SymbolicLdl::analyze(&a, (0..nx * ny).collect());
        let nd = SymbolicLdl::analyze(&a, nested_dissection_order(&[nx, ny], 1));
        assert!(nd.factor_nnz() < natural.factor_nnz());
    }
}
