use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64 as C64;

use super::CsrMatrix;
use crate::{Error, Result};

const NONE: usize = usize::MAX;

#[derive(Debug, Clone)]
struct Node {
    /// Variables eliminated at this node.
    own: Vec<usize>,
    /// Later-eliminated variables coupled to this subtree.
    bnd: Vec<usize>,
    children: Vec<usize>,
    /// Front position in the parent of every `bnd` entry.
    parent_map: Vec<usize>,
    /// `(front row, front col, slot in the pattern's value array)`.
    entries: Vec<(u32, u32, usize)>,
}

/// Symbolic multifrontal analysis of a matrix on a 2D tensor index grid
/// (`index = i0 + n0 * i1`) coupling indices at most `radius` apart in each
/// direction, using geometric nested dissection. Fronts are dense.
#[derive(Debug, Clone)]
pub struct FrontalTree {
    n: usize,
    /// Postorder: children precede parents.
    nodes: Vec<Node>,
}

impl FrontalTree {
    pub fn analyze(pattern: &CsrMatrix, shape: [usize; 2], radius: usize) -> Self {
        let (nx, ny) = (shape[0], shape[1]);
        let n = nx * ny;
        assert_eq!(pattern.rows(), n, "pattern does not match the grid");
        let r = radius.max(1);
        let mut nodes = Vec::new();
        if n > 0 {
            build(
                &mut nodes,
                Box2 {
                    x0: 0,
                    x1: nx,
                    y0: 0,
                    y1: ny,
                },
                nx,
                ny,
                r,
            );
        }
        let mut parent = vec![NONE; nodes.len()];
        for (i, node) in nodes.iter().enumerate() {
            for &c in &node.children {
                parent[c] = i;
            }
        }
        let ptr = pattern.row_ptr();
        let mut pos = vec![NONE; n];
        for node in nodes.iter_mut() {
            for (k, &v) in node.own.iter().chain(&node.bnd).enumerate() {
                pos[v] = k;
            }
            let k_own = node.own.len();
            let mut entries = Vec::new();
            for (a, &v) in node.own.iter().enumerate() {
                let (cols, _) = pattern.row(v);
                for (off, &w) in cols.iter().enumerate() {
                    // Variables outside the front were eliminated in a descendant.
                    let b = pos[w];
                    if b == NONE {
                        continue;
                    }
                    entries.push((a as u32, b as u32, ptr[v] + off));
                    if b >= k_own {
                        let (wc, _) = pattern.row(w);
                        let k = wc
                            .binary_search(&v)
                            .expect("pattern must be structurally symmetric");
                        entries.push((b as u32, a as u32, ptr[w] + k));
                    }
                }
            }
            node.entries = entries;
            for &v in node.own.iter().chain(&node.bnd) {
                pos[v] = NONE;
            }
        }
        for i in 0..nodes.len() {
            let p = parent[i];
            if p == NONE {
                assert!(nodes[i].bnd.is_empty(), "root front has boundary variables");
                continue;
            }
            let pn = &nodes[p];
            for (k, &v) in pn.own.iter().chain(&pn.bnd).enumerate() {
                pos[v] = k;
            }
            let map: Vec<usize> = nodes[i]
                .bnd
                .iter()
                .map(|&v| {
                    assert!(
                        pos[v] != NONE,
                        "boundary variable missing from the parent front"
                    );
                    pos[v]
                })
                .collect();
            for &v in pn.own.iter().chain(&pn.bnd) {
                pos[v] = NONE;
            }
            nodes[i].parent_map = map;
        }
        Self { n, nodes }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Multiply-add count of one numeric factorization.
    pub fn factor_flops(&self) -> usize {
        self.nodes
            .iter()
            .map(|nd| {
                let (k, m) = (nd.own.len(), nd.bnd.len());
                k * k * k / 3 + m * k * k / 2 + m * m * k / 2
            })
            .sum()
    }

    /// Stored entries of the triangular factor.
    pub fn factor_nnz(&self) -> usize {
        self.nodes
            .iter()
            .map(|nd| {
                let (k, m) = (nd.own.len(), nd.bnd.len());
                k * (k - 1) / 2 + m * k
            })
            .sum()
    }

    pub fn max_front(&self) -> usize {
        self.nodes
            .iter()
            .map(|nd| nd.own.len() + nd.bnd.len())
            .max()
            .unwrap_or(0)
    }
}

#[derive(Clone, Copy)]
struct Box2 {
    x0: usize,
    x1: usize,
    y0: usize,
    y1: usize,
}

fn build(nodes: &mut Vec<Node>, b: Box2, nx: usize, ny: usize, r: usize) -> usize {
    let (w, h) = (b.x1 - b.x0, b.y1 - b.y0);
    let cells = |bx: Box2| {
        let mut v = Vec::with_capacity((bx.x1 - bx.x0) * (bx.y1 - bx.y0));
        for y in bx.y0..bx.y1 {
            for x in bx.x0..bx.x1 {
                v.push(x + nx * y);
            }
        }
        v
    };
    let leaf = w * h <= LEAF_CELLS || (w < r + 2 && h < r + 2);
    let (own, children) = if leaf {
        (cells(b), Vec::new())
    } else if w >= h && w >= r + 2 {
        let mid = b.x0 + (w - r) / 2;
        let c1 = build(nodes, Box2 { x1: mid, ..b }, nx, ny, r);
        let c2 = build(nodes, Box2 { x0: mid + r, ..b }, nx, ny, r);
        (
            cells(Box2 {
                x0: mid,
                x1: mid + r,
                ..b
            }),
            vec![c1, c2],
        )
    } else {
        let mid = b.y0 + (h - r) / 2;
        let c1 = build(nodes, Box2 { y1: mid, ..b }, nx, ny, r);
        let c2 = build(nodes, Box2 { y0: mid + r, ..b }, nx, ny, r);
        (
            cells(Box2 {
                y0: mid,
                y1: mid + r,
                ..b
            }),
            vec![c1, c2],
        )
    };
    // Everything outside the box within `r` cells of it.
    let (ex0, ex1) = (b.x0.saturating_sub(r), (b.x1 + r).min(nx));
    let (ey0, ey1) = (b.y0.saturating_sub(r), (b.y1 + r).min(ny));
    let mut bnd = Vec::new();
    for y in ey0..ey1 {
        for x in ex0..ex1 {
            let inside = (b.x0..b.x1).contains(&x) && (b.y0..b.y1).contains(&y);
            if !inside {
                bnd.push(x + nx * y);
            }
        }
    }
    nodes.push(Node {
        own,
        bnd,
        children,
        parent_map: Vec::new(),
        entries: Vec::new(),
    });
    nodes.len() - 1
}

/// Leaf boxes at most this many cells are factored as one dense front.
const LEAF_CELLS: usize = 9;

#[derive(Debug, Clone)]
struct NodeFactor {
    /// `k × k`, strictly lower part holds `L11`, diagonal holds `D`.
    l11: Vec<C64>,
    /// `m × k`
    l21: Vec<C64>,
}

/// Numeric multifrontal `A = L D Lᵀ` (transpose, no conjugation, no
/// pivoting) for complex symmetric matrices.
#[derive(Debug, Clone)]
pub struct FrontalLdl {
    tree: Arc<FrontalTree>,
    factors: Vec<NodeFactor>,
}

/// Lower-triangular Schur complement handed to the parent, split into real
/// and imaginary planes (`m × m`, row-major).
type Update = (Vec<f64>, Vec<f64>);

impl FrontalLdl {
    /// `values` follow the storage order of the analyzed pattern. Fails when
    /// a pivot falls below `rel_floor * max|a_ij|`.
    pub fn factor(tree: Arc<FrontalTree>, values: &[C64], rel_floor: f64) -> Result<Self> {
        let amax = values
            .iter()
            .fold(0.0f64, |m, v| m.max(v.norm_sqr()))
            .sqrt();
        let floor = rel_floor * amax;
        let mut updates: Vec<Option<Update>> = vec![None; tree.nodes.len()];
        let mut factors = Vec::with_capacity(tree.nodes.len());
        let (mut re, mut im) = (Vec::new(), Vec::new());
        for (id, node) in tree.nodes.iter().enumerate() {
            let (k, m) = (node.own.len(), node.bnd.len());
            let f = k + m;
            // Only the lower triangle is ever read.
            re.resize(re.len().max(f * f), 0.0);
            im.resize(im.len().max(f * f), 0.0);
            for i in 0..f {
                re[i * f..i * f + i + 1].fill(0.0);
                im[i * f..i * f + i + 1].fill(0.0);
            }
            for &(r, c, s) in &node.entries {
                if r >= c {
                    let at = r as usize * f + c as usize;
                    re[at] += values[s].re;
                    im[at] += values[s].im;
                }
            }
            for &c in &node.children {
                let (ur, ui) = updates[c].take().expect("child processed before parent");
                let map = &tree.nodes[c].parent_map;
                let mc = map.len();
                for (i, &pi) in map.iter().enumerate() {
                    for (j, &pj) in map[..=i].iter().enumerate() {
                        let at = if pi >= pj { pi * f + pj } else { pj * f + pi };
                        re[at] += ur[i * mc + j];
                        im[at] += ui[i * mc + j];
                    }
                }
            }
            eliminate(&mut re, &mut im, f, k, floor, &node.own)?;
            let at = |i: usize, j: usize| C64::new(re[i * f + j], im[i * f + j]);
            let mut l11 = vec![C64::new(0.0, 0.0); k * k];
            for i in 0..k {
                for j in 0..=i {
                    l11[i * k + j] = at(i, j);
                }
            }
            let mut l21 = Vec::with_capacity(m * k);
            for i in k..f {
                l21.extend((0..k).map(|j| at(i, j)));
            }
            if m > 0 {
                let (mut ur, mut ui) = (vec![0.0; m * m], vec![0.0; m * m]);
                for i in 0..m {
                    let src = (k + i) * f + k;
                    ur[i * m..i * m + i + 1].copy_from_slice(&re[src..src + i + 1]);
                    ui[i * m..i * m + i + 1].copy_from_slice(&im[src..src + i + 1]);
                }
                updates[id] = Some((ur, ui));
            }
            factors.push(NodeFactor { l11, l21 });
        }
        Ok(Self { tree, factors })
    }

    pub fn dim(&self) -> usize {
        self.tree.n
    }

    pub fn solve_in_place(&self, b: &mut [C64]) {
        assert_eq!(b.len(), self.tree.n);
        let mut z = Vec::new();
        // L y = b, children first.
        for (node, fac) in self.tree.nodes.iter().zip(&self.factors) {
            let k = node.own.len();
            z.clear();
            z.extend(node.own.iter().map(|&v| b[v]));
            for i in 0..k {
                let row = &fac.l11[i * k..i * k + i];
                let s = dot(row, &z[..i]);
                z[i] -= s;
            }
            for (i, &v) in node.bnd.iter().enumerate() {
                b[v] -= dot(&fac.l21[i * k..(i + 1) * k], &z);
            }
            for (i, &v) in node.own.iter().enumerate() {
                b[v] = z[i] / fac.l11[i * k + i];
            }
        }
        // Lᵀ x = D⁻¹ y, parents first.
        for (node, fac) in self.tree.nodes.iter().zip(&self.factors).rev() {
            let k = node.own.len();
            z.clear();
            z.extend(node.own.iter().map(|&v| b[v]));
            for (i, &v) in node.bnd.iter().enumerate() {
                let xv = b[v];
                let row = &fac.l21[i * k..(i + 1) * k];
                for (zl, &l) in z.iter_mut().zip(row) {
                    *zl -= l * xv;
                }
            }
            for i in (0..k).rev() {
                let zi = z[i];
                let row = &fac.l11[i * k..i * k + i];
                for (zl, &l) in z[..i].iter_mut().zip(row) {
                    *zl -= l * zi;
                }
            }
            for (i, &v) in node.own.iter().enumerate() {
                b[v] = z[i];
            }
        }
    }
}

#[inline]
fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter()
        .zip(b)
        .fold(C64::new(0.0, 0.0), |s, (&x, &y)| s + x * y)
}

/// Eliminates the leading `k` variables of a dense complex symmetric front
/// of order `f` stored as lower-triangular real and imaginary planes. On
/// return the first `k` columns hold `L` with `D` on the diagonal and the
/// trailing block holds the Schur complement.
fn eliminate(
    re: &mut [f64],
    im: &mut [f64],
    f: usize,
    k: usize,
    floor: f64,
    own: &[usize],
) -> Result<()> {
    // Column copies of `L·D` for the current panel, one plane pair per pivot.
    let mut wr = vec![0.0; PANEL * f];
    let mut wi = vec![0.0; PANEL * f];
    let mut j0 = 0;
    while j0 < k {
        let jb = PANEL.min(k - j0);
        let end = j0 + jb;
        for t in 0..jb {
            let j = j0 + t;
            let (dr, di) = (re[j * f + j], im[j * f + j]);
            let dn = dr * dr + di * di;
            let dabs = dn.sqrt();
            if dabs == 0.0 || dabs <= floor {
                return Err(Error::Singular {
                    row: own[j],
                    pivot: dabs,
                });
            }
            let (ir, ii) = (dr / dn, -di / dn);
            let (pr, pi) = (&mut wr[t * f..(t + 1) * f], &mut wi[t * f..(t + 1) * f]);
            for i in j + 1..f {
                let (a, b) = (re[i * f + j], im[i * f + j]);
                pr[i] = a;
                pi[i] = b;
                re[i * f + j] = a * ir - b * ii;
                im[i * f + j] = a * ii + b * ir;
            }
            // Update the remaining panel columns only.
            for i in j + 1..f {
                let (lr, li) = (re[i * f + j], im[i * f + j]);
                for c in j + 1..end.min(i + 1) {
                    re[i * f + c] -= lr * pr[c] - li * pi[c];
                    im[i * f + c] -= lr * pi[c] + li * pr[c];
                }
            }
        }
        // Rank-`jb` update of the trailing lower triangle, two rows at a
        // time so each panel column is loaded once per pair.
        let mut i = end;
        while i < f {
            let pair = jb == PANEL && i + 1 < f;
            let rows = if pair { 2 } else { 1 };
            let mut lr = [[0.0; PANEL]; 2];
            let mut li = [[0.0; PANEL]; 2];
            for (r, (lr, li)) in lr.iter_mut().zip(li.iter_mut()).enumerate().take(rows) {
                for t in 0..jb {
                    lr[t] = re[(i + r) * f + j0 + t];
                    li[t] = im[(i + r) * f + j0 + t];
                }
            }
            if pair {
                let n = i + 1 - end;
                let (a0, a1, a2, a3) = (
                    col(&wr, f, end, n + 1, 0),
                    col(&wr, f, end, n + 1, 1),
                    col(&wr, f, end, n + 1, 2),
                    col(&wr, f, end, n + 1, 3),
                );
                let (b0, b1, b2, b3) = (
                    col(&wi, f, end, n + 1, 0),
                    col(&wi, f, end, n + 1, 1),
                    col(&wi, f, end, n + 1, 2),
                    col(&wi, f, end, n + 1, 3),
                );
                let (head_r, tail_r) = re.split_at_mut((i + 1) * f);
                let (head_i, tail_i) = im.split_at_mut((i + 1) * f);
                let (xr, yr) = (
                    &mut head_r[i * f + end..i * f + end + n],
                    &mut tail_r[end..end + n + 1],
                );
                let (xi, yi) = (
                    &mut head_i[i * f + end..i * f + end + n],
                    &mut tail_i[end..end + n + 1],
                );
                let ([p, q], [u, v]) = (lr, li);
                for c in 0..n {
                    let (w0, w1, w2, w3) = (a0[c], a1[c], a2[c], a3[c]);
                    let (z0, z1, z2, z3) = (b0[c], b1[c], b2[c], b3[c]);
                    xr[c] -= (p[0] * w0 - u[0] * z0 + p[1] * w1 - u[1] * z1)
                        + (p[2] * w2 - u[2] * z2 + p[3] * w3 - u[3] * z3);
                    xi[c] -= (p[0] * z0 + u[0] * w0 + p[1] * z1 + u[1] * w1)
                        + (p[2] * z2 + u[2] * w2 + p[3] * z3 + u[3] * w3);
                    yr[c] -= (q[0] * w0 - v[0] * z0 + q[1] * w1 - v[1] * z1)
                        + (q[2] * w2 - v[2] * z2 + q[3] * w3 - v[3] * z3);
                    yi[c] -= (q[0] * z0 + v[0] * w0 + q[1] * z1 + v[1] * w1)
                        + (q[2] * z2 + v[2] * w2 + q[3] * z3 + v[3] * w3);
                }
                let c = n;
                yr[c] -= (q[0] * a0[c] - v[0] * b0[c] + q[1] * a1[c] - v[1] * b1[c])
                    + (q[2] * a2[c] - v[2] * b2[c] + q[3] * a3[c] - v[3] * b3[c]);
                yi[c] -= (q[0] * b0[c] + v[0] * a0[c] + q[1] * b1[c] + v[1] * a1[c])
                    + (q[2] * b2[c] + v[2] * a2[c] + q[3] * b3[c] + v[3] * a3[c]);
            } else {
                let n = i + 1 - end;
                let (xr, xi) = (
                    &mut re[i * f + end..i * f + i + 1],
                    &mut im[i * f + end..i * f + i + 1],
                );
                for t in 0..jb {
                    let (a, b) = (col(&wr, f, end, n, t), col(&wi, f, end, n, t));
                    let (l, m) = (lr[0][t], li[0][t]);
                    for c in 0..n {
                        xr[c] -= l * a[c] - m * b[c];
                        xi[c] -= l * b[c] + m * a[c];
                    }
                }
            }
            i += rows;
        }
        j0 = end;
    }
    Ok(())
}

#[inline]
fn col(w: &[f64], f: usize, start: usize, n: usize, t: usize) -> &[f64] {
    &w[t * f + start..t * f + start + n]
}

/// Pivots eliminated together before each trailing update.
const PANEL: usize = 4;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::DenseMatrix;

    fn stencil(nx: usize, ny: usize, r: usize) -> CsrMatrix {
        let mut t = Vec::new();
        for y in 0..ny {
            for x in 0..nx {
                let i = x + nx * y;
                for dy in -(r as isize)..=r as isize {
                    for dx in -(r as isize)..=r as isize {
                        let (xx, yy) = (x as isize + dx, y as isize + dy);
                        if xx < 0 || yy < 0 || xx >= nx as isize || yy >= ny as isize {
                            continue;
                        }
                        let j = xx as usize + nx * yy as usize;
                        let v = if i == j {
                            4.0 * ((2 * r + 1) * (2 * r + 1)) as f64
                        } else {
                            -1.0 - 0.01 * (i + j) as f64
                        };
                        t.push((i, j, v));
                    }
                }
            }
        }
        CsrMatrix::from_triplets(nx * ny, nx * ny, &t)
    }

    #[test]
    fn complex_symmetric_solve_matches_dense() {
        for (nx, ny, r) in [(3, 4, 1), (17, 13, 2), (20, 20, 3), (9, 30, 2)] {
            let a = stencil(nx, ny, r);
            let shift = C64::new(0.3, 1.7);
            let vals: Vec<C64> = a
                .iter()
                .map(|(_, _, v)| shift * v - C64::new(v * 0.1, 0.0))
                .collect();
            let tree = Arc::new(FrontalTree::analyze(&a, [nx, ny], r));
            let f = FrontalLdl::factor(tree, &vals, 1e-14).unwrap();
            let n = nx * ny;
            let x: Vec<C64> = (0..n)
                .map(|i| C64::new((i % 7) as f64 - 3.0, (i % 5) as f64))
                .collect();
            let dense = DenseMatrix::from_fn(n, n, |i, j| {
                let (c, v) = a.row(i);
                c.binary_search(&j).map_or(C64::new(0.0, 0.0), |k| {
                    shift * v[k] - C64::new(v[k] * 0.1, 0.0)
                })
            });
            let mut b = dense.matvec(&x);
            f.solve_in_place(&mut b);
            let err = b
                .iter()
                .zip(&x)
                .map(|(p, q)| (p - q).norm())
                .fold(0.0, f64::max);
            assert!(err < 1e-10, "{nx}x{ny} r={r}: {err}");
        }
    }

    #[test]
    fn zero_pivot_is_reported() {
        let a =
            CsrMatrix::from_triplets(4, 4, &[(0, 0, 0.0), (1, 1, 1.0), (2, 2, 1.0), (3, 3, 1.0)]);
        let tree = Arc::new(FrontalTree::analyze(&a, [2, 2], 1));
        let vals: Vec<C64> = a.iter().map(|(_, _, v)| C64::new(v, 0.0)).collect();
        assert!(FrontalLdl::factor(tree, &vals, 1e-14).is_err());
    }
}
