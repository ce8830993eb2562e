//! Open knot vectors and constrained univariate B-spline spaces.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::param;
use crate::{Error, Result};

/// Open knot vector: both end knots repeated exactly `degree + 1` times.
#[derive(Debug, Clone, PartialEq)]
pub struct KnotVector {
    degree: usize,
    knots: Vec<f64>,
}

impl KnotVector {
    pub fn new(degree: usize, knots: Vec<f64>) -> Result<Self> {
        if degree == 0 {
            return Err(param("degree must be at least 1"));
        }
        let p = degree;
        if knots.len() < 2 * (p + 1) {
            return Err(param("knot vector too short for an open knot vector"));
        }
        if knots.iter().any(|k| !k.is_finite()) || knots.windows(2).any(|w| w[1] < w[0]) {
            return Err(param("knots must be finite and nondecreasing"));
        }
        let (a, b) = (knots[0], knots[knots.len() - 1]);
        if !(a < b) {
            return Err(param("knot interval is empty"));
        }
        let n = knots.len();
        let open_start = knots[..=p].iter().all(|&k| k == a) && knots[p + 1] > a;
        let open_end = knots[n - p - 1..].iter().all(|&k| k == b) && knots[n - p - 2] < b;
        if !open_start || !open_end {
            return Err(param("knot vector is not open"));
        }
        let mut run = 1;
        for w in knots[p..n - p].windows(2) {
            if w[1] == w[0] {
                run += 1;
                if run > p && w[0] != a && w[0] != b {
                    return Err(param("interior knot multiplicity exceeds the degree"));
                }
            } else {
                run = 1;
            }
        }
        Ok(Self { degree, knots })
    }

    #[inline]
    pub fn degree(&self) -> usize {
        self.degree
    }

    #[inline]
    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// Number of basis functions `m`.
    #[inline]
    pub fn n_basis(&self) -> usize {
        self.knots.len() - self.degree - 1
    }

    pub fn interval(&self) -> (f64, f64) {
        (self.knots[0], self.knots[self.knots.len() - 1])
    }

    /// Distinct knot values (the breakpoints).
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        for &k in &self.knots {
            if out.last() != Some(&k) {
                out.push(k);
            }
        }
        out
    }

    /// Non-degenerate knot spans `(left, right, span_index)`, where
    /// `span_index` is the largest `s` with `knots[s] == left`.
    pub fn spans(&self) -> Vec<(f64, f64, usize)> {
        let p = self.degree;
        let m = self.n_basis();
        (p..m)
            .filter(|&s| self.knots[s + 1] > self.knots[s])
            .map(|s| (self.knots[s], self.knots[s + 1], s))
            .collect()
    }

    /// Largest knot span length.
    pub fn mesh_size(&self) -> f64 {
        self.knots
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(0.0, f64::max)
    }

    /// Span index containing `x`; right-continuous inside, left limit at `b`.
    pub fn find_span(&self, x: f64) -> Result<usize> {
        let (a, b) = self.interval();
        if !(x >= a && x <= b) {
            return Err(Error::Domain { x, a, b });
        }
        let p = self.degree;
        let m = self.n_basis();
        if x >= self.knots[m] {
            return Ok(m - 1);
        }
        // Largest s in [p, m-1] with knots[s] <= x.
        let (mut lo, mut hi) = (p, m);
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if self.knots[mid] <= x {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(lo)
    }
}

/// Uniform open knot vector on `[a, b]` with `n_elements` spans, interior
/// knots repeated `degree - regularity` times (so the splines are
/// `C^regularity` there).
pub fn make_knot_vector(
    n_elements: usize,
    degree: usize,
    regularity: usize,
    interval: (f64, f64),
) -> Result<KnotVector> {
    let (a, b) = interval;
    if n_elements == 0 {
        return Err(param("need at least one element"));
    }
    if degree == 0 {
        return Err(param("degree must be at least 1"));
    }
    if regularity + 1 > degree {
        return Err(param(alloc::format!(
            "regularity {regularity} must lie in [0, degree - 1 = {}]",
            degree - 1
        )));
    }
    if !(a < b) {
        return Err(param("interval must satisfy a < b"));
    }
    let mult = degree - regularity;
    let mut knots = vec![a; degree + 1];
    for k in 1..n_elements {
        let x = a + (b - a) * (k as f64) / (n_elements as f64);
        knots.extend(core::iter::repeat_n(x, mult));
    }
    knots.extend(core::iter::repeat_n(b, degree + 1));
    KnotVector::new(degree, knots)
}

/// Values and derivatives of the `degree + 1` B-splines that may be nonzero
/// at `x`. Row `r` of the table holds the `r`-th derivatives; column `c`
/// belongs to basis function `first + c`.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisEval {
    pub first: usize,
    pub table: Vec<Vec<f64>>,
}

/// Cox–de Boor evaluation with the knot-difference derivative recurrence.
pub fn eval_basis(kv: &KnotVector, x: f64, max_derivative: usize) -> Result<BasisEval> {
    let span = kv.find_span(x)?;
    let p = kv.degree;
    let u = &kv.knots;

    // ndu[j][r]: basis values (upper triangle incl. diagonal) and knot
    // differences (strict lower triangle), as in the classic tableau.
    let mut ndu = vec![vec![0.0; p + 1]; p + 1];
    let mut left = vec![0.0; p + 1];
    let mut right = vec![0.0; p + 1];
    ndu[0][0] = 1.0;
    for j in 1..=p {
        left[j] = x - u[span + 1 - j];
        right[j] = u[span + j] - x;
        let mut saved = 0.0;
        for r in 0..j {
            ndu[j][r] = right[r + 1] + left[j - r];
            let temp = ndu[r][j - 1] / ndu[j][r];
            ndu[r][j] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        ndu[j][j] = saved;
    }

    let mut table = vec![vec![0.0; p + 1]; max_derivative + 1];
    for j in 0..=p {
        table[0][j] = ndu[j][p];
    }
    let nd = max_derivative.min(p);
    let mut a = [vec![0.0; p + 1], vec![0.0; p + 1]];
    for r in 0..=p {
        let (mut s1, mut s2) = (0usize, 1usize);
        a[0][0] = 1.0;
        for k in 1..=nd {
            let mut d = 0.0;
            let rk = r as isize - k as isize;
            let pk = p - k;
            if r >= k {
                a[s2][0] = a[s1][0] / ndu[pk + 1][rk as usize];
                d = a[s2][0] * ndu[rk as usize][pk];
            }
            let j1 = if rk >= -1 { 1 } else { (-rk) as usize };
            let j2 = if r as isize - 1 <= pk as isize {
                k - 1
            } else {
                p - r
            };
            for j in j1..=j2 {
                let idx = (rk + j as isize) as usize;
                a[s2][j] = (a[s1][j] - a[s1][j - 1]) / ndu[pk + 1][idx];
                d += a[s2][j] * ndu[idx][pk];
            }
            if r <= pk {
                a[s2][k] = -a[s1][k - 1] / ndu[pk + 1][r];
                d += a[s2][k] * ndu[r][pk];
            }
            table[k][r] = d;
            core::mem::swap(&mut s1, &mut s2);
        }
    }
    let mut factor = p as f64;
    for k in 1..=nd {
        for v in table[k].iter_mut() {
            *v *= factor;
        }
        factor *= (p - k) as f64;
    }
    Ok(BasisEval {
        first: span - p,
        table,
    })
}

/// Homogeneous constraints applied at the interval ends.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Constraint {
    None,
    /// `u(a) = 0`
    ZeroStart,
    /// `u(b) = 0`
    ZeroEnd,
    /// `u = u' = 0` at both ends
    ClampedBoth,
}

/// Spline space spanned by the retained basis functions of a knot vector.
#[derive(Debug, Clone, PartialEq)]
pub struct SplineSpace1D {
    knot_vector: KnotVector,
    constraint: Constraint,
    active: Vec<usize>,
    position: Vec<Option<usize>>,
    mesh_size: f64,
}

/// Builds the constrained space; clamping drops the first two and last two
/// basis functions, a zero end condition drops one.
pub fn build_space(kv: KnotVector, constraint: Constraint) -> Result<SplineSpace1D> {
    let m = kv.n_basis();
    let range = match constraint {
        Constraint::None => 0..m,
        Constraint::ZeroStart => 1..m,
        Constraint::ZeroEnd => 0..m.saturating_sub(1),
        Constraint::ClampedBoth => {
            if m < 5 {
                return Err(param(alloc::format!(
                    "clamped space needs at least 5 basis functions, have {m}"
                )));
            }
            2..m - 2
        }
    };
    if range.is_empty() {
        return Err(param("constrained space has dimension 0"));
    }
    let active: Vec<usize> = range.collect();
    let mut position = vec![None; m];
    for (k, &g) in active.iter().enumerate() {
        position[g] = Some(k);
    }
    let mesh_size = kv.mesh_size();
    Ok(SplineSpace1D {
        knot_vector: kv,
        constraint,
        active,
        position,
        mesh_size,
    })
}

impl SplineSpace1D {
    #[inline]
    pub fn knot_vector(&self) -> &KnotVector {
        &self.knot_vector
    }

    #[inline]
    pub fn degree(&self) -> usize {
        self.knot_vector.degree
    }

    #[inline]
    pub fn constraint(&self) -> Constraint {
        self.constraint
    }

    /// Global basis indices kept by the constraint, ascending.
    pub fn active_indices(&self) -> &[usize] {
        &self.active
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.active.len()
    }

    #[inline]
    pub fn mesh_size(&self) -> f64 {
        self.mesh_size
    }

    /// Local (constrained) index of global basis function `global`.
    #[inline]
    pub fn local_index(&self, global: usize) -> Option<usize> {
        self.position.get(global).copied().flatten()
    }

    /// Like [`eval_basis`], but pairs each column with its local index
    /// (`None` for functions removed by the constraint).
    pub fn eval(
        &self,
        x: f64,
        max_derivative: usize,
    ) -> Result<(Vec<Option<usize>>, Vec<Vec<f64>>)> {
        let e = eval_basis(&self.knot_vector, x, max_derivative)?;
        let idx = (0..=self.degree())
            .map(|c| self.local_index(e.first + c))
            .collect();
        Ok((idx, e.table))
    }

    /// Derivative of order `deriv` of `Σ_k coeffs[k] φ_k` at `x`.
    pub fn eval_function(&self, coeffs: &[f64], x: f64, deriv: usize) -> Result<f64> {
        if coeffs.len() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                got: coeffs.len(),
            });
        }
        let (idx, table) = self.eval(x, deriv)?;
        Ok(idx
            .iter()
            .zip(&table[deriv])
            .filter_map(|(i, v)| i.map(|i| coeffs[i] * v))
            .sum())
    }

    /// True when both spaces share the same breakpoints.
    pub fn same_breakpoints(&self, other: &Self) -> bool {
        let (a, b) = (
            self.knot_vector.breakpoints(),
            other.knot_vector.breakpoints(),
        );
        let scale = self.knot_vector.interval().1.abs().max(1.0);
        a.len() == b.len()
            && a.iter()
                .zip(&b)
                .all(|(x, y)| (x - y).abs() <= 1e-14 * scale)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn knot_vector_examples() {
        let kv = make_knot_vector(1, 1, 0, (0.0, 1.0)).unwrap();
        assert_eq!(kv.knots(), &[0.0, 0.0, 1.0, 1.0]);
        assert_eq!(kv.n_basis(), 2);

        let kv = make_knot_vector(2, 2, 1, (0.0, 1.0)).unwrap();
        assert_eq!(kv.knots(), &[0.0, 0.0, 0.0, 0.5, 1.0, 1.0, 1.0]);
        assert_eq!(kv.n_basis(), 4);

        let kv = make_knot_vector(2, 3, 1, (0.0, 1.0)).unwrap();
        assert_eq!(
            kv.knots(),
            &[0.0, 0.0, 0.0, 0.0, 0.5, 0.5, 1.0, 1.0, 1.0, 1.0]
        );
        assert_eq!(kv.n_basis(), 10 - 3 - 1);
    }

    #[test]
    fn invalid_regularity_is_rejected() {
        assert!(matches!(
            make_knot_vector(3, 2, 2, (0.0, 1.0)),
            Err(Error::Parameter(_))
        ));
        assert!(make_knot_vector(3, 2, 1, (1.0, 1.0)).is_err());
        assert!(KnotVector::new(2, vec![0.0, 0.0, 1.0, 1.0, 1.0, 1.0]).is_err());
        assert!(KnotVector::new(1, vec![0.0, 0.0, 0.5, 0.5, 1.0, 1.0]).is_err());
    }

    #[test]
    fn hat_functions_at_midpoint() {
        let kv = make_knot_vector(1, 1, 0, (0.0, 1.0)).unwrap();
        let e = eval_basis(&kv, 0.5, 0).unwrap();
        assert_eq!(e.first, 0);
        assert_eq!(e.table[0], vec![0.5, 0.5]);
    }

    #[test]
    fn quadratic_at_interior_knot() {
        // Hand-run recursion: B_0(0.5) = 0, B_1 = B_2 = 0.5, B_3 = 0.
        let kv = make_knot_vector(2, 2, 1, (0.0, 1.0)).unwrap();
        let e = eval_basis(&kv, 0.5, 0).unwrap();
        let mut full = [0.0; 4];
        for (c, v) in e.table[0].iter().enumerate() {
            full[e.first + c] = *v;
        }
        for (got, want) in full.iter().zip([0.0, 0.5, 0.5, 0.0]) {
            assert!((got - want).abs() < 1e-15);
        }
    }

    #[test]
    fn right_endpoint_uses_left_limit() {
        let kv = make_knot_vector(4, 3, 2, (0.0, 2.0)).unwrap();
        let e = eval_basis(&kv, 2.0, 1).unwrap();
        assert_eq!(e.first, kv.n_basis() - 4);
        assert!((e.table[0][3] - 1.0).abs() < 1e-15);
        assert!((e.table[0].iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn outside_interval_is_domain_error() {
        let kv = make_knot_vector(2, 2, 1, (0.0, 1.0)).unwrap();
        assert!(matches!(
            eval_basis(&kv, 1.0 + 1e-12, 0),
            Err(Error::Domain { .. })
        ));
        assert!(matches!(
            eval_basis(&kv, -0.1, 0),
            Err(Error::Domain { .. })
        ));
    }

    #[test]
    fn derivatives_above_degree_vanish() {
        let kv = make_knot_vector(3, 2, 1, (0.0, 1.0)).unwrap();
        let e = eval_basis(&kv, 0.4, 4).unwrap();
        assert!(e.table[3].iter().chain(&e.table[4]).all(|&v| v == 0.0));
        // second derivatives of a quadratic partition of unity sum to zero
        assert!(e.table[2].iter().sum::<f64>().abs() < 1e-12);
    }

    #[test]
    fn constrained_dimensions() {
        let kv = make_knot_vector(8, 2, 1, (0.0, 1.0)).unwrap();
        assert_eq!(kv.n_basis(), 10);
        assert_eq!(build_space(kv, Constraint::ClampedBoth).unwrap().dim(), 6);

        let kv = make_knot_vector(4, 3, 2, (0.0, 1.0)).unwrap();
        assert_eq!(kv.n_basis(), 7);
        let s = build_space(kv, Constraint::ZeroStart).unwrap();
        assert_eq!(s.dim(), 6);
        assert_eq!(s.active_indices(), &[1, 2, 3, 4, 5, 6]);

        let kv = make_knot_vector(2, 2, 1, (0.0, 1.0)).unwrap();
        assert!(matches!(
            build_space(kv, Constraint::ClampedBoth),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn mesh_size_is_largest_span() {
        let kv = KnotVector::new(1, vec![0.0, 0.0, 0.1, 0.5, 1.0, 1.0]).unwrap();
        let s = build_space(kv, Constraint::None).unwrap();
        assert!((s.mesh_size() - 0.5).abs() < 1e-15);
    }
}
