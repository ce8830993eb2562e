use alloc::vec;
use alloc::vec::Vec;

use super::cases::ManufacturedCase;
use crate::quadrature::gauss_rule;
use crate::splines::SplineSpace1D;
use crate::system::SpaceTimeSystem;
use crate::{Error, Result};

/// Relative space-time errors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpaceTimeErrors {
    /// `L²(0,T; L²(Ω))`
    pub l2l2: f64,
    /// `(‖∇e‖² + ‖∂_t e‖²)^{1/2}`
    pub h1mix: f64,
    /// `(‖∂_t e‖² + ‖Δe‖²)^{1/2}`
    pub x: f64,
}

/// Relative spatial errors of the trace at the final time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FinalTimeErrors {
    pub l2: f64,
    /// `‖∇e‖`
    pub h1: f64,
    /// `‖Δe‖`
    pub h2: f64,
}

/// Basis values at the quadrature points of one direction.
pub(crate) struct Tabulation {
    pub(crate) points: Vec<f64>,
    pub(crate) weights: Vec<f64>,
    /// Per point: local indices of the `p + 1` candidate functions.
    idx: Vec<Vec<Option<usize>>>,
    /// Per point: `vals[q][k][c]`, derivative `k` of candidate `c`.
    vals: Vec<Vec<Vec<f64>>>,
    pub(crate) dim: usize,
}

impl Tabulation {
    /// Gauss rule with `degree + 3` points on every span.
    pub(crate) fn new(space: &SplineSpace1D, max_derivative: usize) -> Result<Self> {
        let rule = gauss_rule(space.degree() + 3)?;
        let mut t = Self {
            points: Vec::new(),
            weights: Vec::new(),
            idx: Vec::new(),
            vals: Vec::new(),
            dim: space.dim(),
        };
        for w in space.knot_vector().breakpoints().windows(2) {
            for (x, wt) in rule.mapped(w[0], w[1]) {
                let (idx, table) = space.eval(x, max_derivative)?;
                t.points.push(x);
                t.weights.push(wt);
                t.idx.push(idx);
                t.vals.push(table);
            }
        }
        Ok(t)
    }

    /// Single point evaluation (used for traces).
    pub(crate) fn at(space: &SplineSpace1D, x: f64, max_derivative: usize) -> Result<Self> {
        let (idx, table) = space.eval(x, max_derivative)?;
        Ok(Self {
            points: vec![x],
            weights: vec![1.0],
            idx: vec![idx],
            vals: vec![table],
            dim: space.dim(),
        })
    }

    fn len(&self) -> usize {
        self.points.len()
    }

    /// `Σ_c coeff[idx_c] · vals[q][k][c]` along one strided line.
    #[inline]
    fn contract(&self, q: usize, k: usize, coeffs: &[f64], stride: usize, offset: usize) -> f64 {
        self.idx[q]
            .iter()
            .zip(&self.vals[q][k])
            .filter_map(|(i, v)| i.map(|i| coeffs[offset + i * stride] * v))
            .sum()
    }
}

/// Field values `(u, ∂_0 u, ∂_1 u, Δu)` on the tensor grid of spatial
/// quadrature points, first direction fastest.
pub(crate) fn eval_spatial(tabs: &[Tabulation], w: &[f64], derivatives: bool) -> Vec<[f64; 4]> {
    match tabs.len() {
        1 => {
            let t = &tabs[0];
            (0..t.len())
                .map(|q| {
                    let u = t.contract(q, 0, w, 1, 0);
                    if derivatives {
                        let ux = t.contract(q, 1, w, 1, 0);
                        [u, ux, 0.0, t.contract(q, 2, w, 1, 0)]
                    } else {
                        [u, 0.0, 0.0, 0.0]
                    }
                })
                .collect()
        }
        _ => {
            let (tx, ty) = (&tabs[0], &tabs[1]);
            let n0 = tx.dim;
            let nk = if derivatives { 3 } else { 1 };
            let mut out = Vec::with_capacity(tx.len() * ty.len());
            let mut v = vec![vec![0.0; n0]; nk];
            for qy in 0..ty.len() {
                // Contract the second direction first: v_k[i0] = Σ_b w[i0 + n0 b] N_b^(k)(y).
                for (k, vk) in v.iter_mut().enumerate() {
                    for (i0, slot) in vk.iter_mut().enumerate() {
                        *slot = ty.contract(qy, k, w, n0, i0);
                    }
                }
                for qx in 0..tx.len() {
                    let u = tx.contract(qx, 0, &v[0], 1, 0);
                    if derivatives {
                        let ux = tx.contract(qx, 1, &v[0], 1, 0);
                        let uxx = tx.contract(qx, 2, &v[0], 1, 0);
                        let uy = tx.contract(qx, 0, &v[1], 1, 0);
                        let uyy = tx.contract(qx, 0, &v[2], 1, 0);
                        out.push([u, ux, uy, uxx + uyy]);
                    } else {
                        out.push([u, 0.0, 0.0, 0.0]);
                    }
                }
            }
            out
        }
    }
}

/// Points and weights of the tensor spatial grid, same order as [`eval_spatial`].
fn spatial_points(tabs: &[Tabulation]) -> Vec<([f64; 2], f64)> {
    match tabs.len() {
        1 => tabs[0]
            .points
            .iter()
            .zip(&tabs[0].weights)
            .map(|(&x, &w)| ([x, 0.0], w))
            .collect(),
        _ => {
            let mut out = Vec::new();
            for (&y, &wy) in tabs[1].points.iter().zip(&tabs[1].weights) {
                for (&x, &wx) in tabs[0].points.iter().zip(&tabs[0].weights) {
                    out.push(([x, y], wx * wy));
                }
            }
            out
        }
    }
}

fn check_case(sys: &SpaceTimeSystem, coeffs: &[f64], case: &ManufacturedCase) -> Result<()> {
    if coeffs.len() != sys.n_dof() {
        return Err(Error::Dimension {
            expected: sys.n_dof(),
            got: coeffs.len(),
        });
    }
    if case.dim() != sys.spatial.dim() {
        return Err(Error::Dimension {
            expected: sys.spatial.dim(),
            got: case.dim(),
        });
    }
    Ok(())
}

fn ratio(err: f64, reference: f64) -> f64 {
    if reference > 0.0 {
        (err / reference).sqrt()
    } else {
        err.sqrt()
    }
}

/// Relative errors of `u_h = Σ coeffs[i_s + n_s i_t] φ_{i_s} ψ_{i_t}`.
pub fn error_norms_spacetime(
    coeffs: &[f64],
    sys: &SpaceTimeSystem,
    case: &ManufacturedCase,
) -> Result<SpaceTimeErrors> {
    check_case(sys, coeffs, case)?;
    let ns = sys.n_s();
    let stabs: Vec<Tabulation> = sys
        .spatial
        .spaces
        .iter()
        .map(|s| Tabulation::new(s, 2))
        .collect::<Result<_>>()?;
    let ttab = Tabulation::new(&sys.trial_time, 1)?;
    let pts = spatial_points(&stabs);
    // [‖e‖², ‖∇e‖², ‖∂_t e‖², ‖Δe‖²] and the same for u.
    let mut e = [0.0f64; 4];
    let mut r = [0.0f64; 4];
    let mut w = vec![0.0; ns];
    let mut wt = vec![0.0; ns];
    for q in 0..ttab.len() {
        let t = ttab.points[q];
        let tw = ttab.weights[q];
        w.iter_mut().for_each(|v| *v = 0.0);
        wt.iter_mut().for_each(|v| *v = 0.0);
        for (c, i) in ttab.idx[q].iter().enumerate() {
            if let Some(i) = *i {
                let (v0, v1) = (ttab.vals[q][0][c], ttab.vals[q][1][c]);
                let col = &coeffs[i * ns..(i + 1) * ns];
                for ((a, b), &x) in w.iter_mut().zip(wt.iter_mut()).zip(col) {
                    *a += v0 * x;
                    *b += v1 * x;
                }
            }
        }
        let fu = eval_spatial(&stabs, &w, true);
        let ft = eval_spatial(&stabs, &wt, false);
        for ((&(x, sw), a), b) in pts.iter().zip(&fu).zip(&ft) {
            let xs = &x[..case.dim()];
            let wgt = sw * tw;
            let u = case.u(xs, t);
            let g = case.grad(xs, t);
            let ut = case.u_t(xs, t);
            let lap = case.laplacian(xs, t);
            let (d0, d1, d2, dt, dl) = (a[0] - u, a[1] - g[0], a[2] - g[1], b[0] - ut, a[3] - lap);
            e[0] += wgt * d0 * d0;
            e[1] += wgt * (d1 * d1 + d2 * d2);
            e[2] += wgt * dt * dt;
            e[3] += wgt * dl * dl;
            r[0] += wgt * u * u;
            r[1] += wgt * (g[0] * g[0] + g[1] * g[1]);
            r[2] += wgt * ut * ut;
            r[3] += wgt * lap * lap;
        }
    }
    Ok(SpaceTimeErrors {
        l2l2: ratio(e[0], r[0]),
        h1mix: ratio(e[1] + e[2], r[1] + r[2]),
        x: ratio(e[2] + e[3], r[2] + r[3]),
    })
}

/// Spatial coefficients of `u_h(·, t)` by evaluating the temporal basis.
pub fn spatial_trace(coeffs: &[f64], sys: &SpaceTimeSystem, t: f64) -> Result<Vec<f64>> {
    let ns = sys.n_s();
    if coeffs.len() != sys.n_dof() {
        return Err(Error::Dimension {
            expected: sys.n_dof(),
            got: coeffs.len(),
        });
    }
    let tab = Tabulation::at(&sys.trial_time, t, 0)?;
    let mut w = vec![0.0; ns];
    for (c, i) in tab.idx[0].iter().enumerate() {
        if let Some(i) = *i {
            let v = tab.vals[0][0][c];
            for (a, &x) in w.iter_mut().zip(&coeffs[i * ns..(i + 1) * ns]) {
                *a += v * x;
            }
        }
    }
    Ok(w)
}

/// The last temporal coefficient column, equal to the trace at `t = T`
/// for an open knot vector.
pub fn final_time_slice(coeffs: &[f64], sys: &SpaceTimeSystem) -> Vec<f64> {
    let ns = sys.n_s();
    let nt = sys.n_t();
    coeffs[(nt - 1) * ns..nt * ns].to_vec()
}

/// Relative spatial errors of `w` (spatial coefficients) against `u(·, t)`.
pub fn spatial_errors(
    w: &[f64],
    spaces: &[SplineSpace1D],
    case: &ManufacturedCase,
    t: f64,
) -> Result<FinalTimeErrors> {
    let ns: usize = spaces.iter().map(|s| s.dim()).product();
    if w.len() != ns {
        return Err(Error::Dimension {
            expected: ns,
            got: w.len(),
        });
    }
    if case.dim() != spaces.len() {
        return Err(Error::Dimension {
            expected: spaces.len(),
            got: case.dim(),
        });
    }
    let tabs: Vec<Tabulation> = spaces
        .iter()
        .map(|s| Tabulation::new(s, 2))
        .collect::<Result<_>>()?;
    let vals = eval_spatial(&tabs, w, true);
    let (mut e, mut r) = ([0.0f64; 3], [0.0f64; 3]);
    for (&(x, wgt), a) in spatial_points(&tabs).iter().zip(&vals) {
        let xs = &x[..case.dim()];
        let (u, g, lap) = (case.u(xs, t), case.grad(xs, t), case.laplacian(xs, t));
        let (d0, d1, d2, dl) = (a[0] - u, a[1] - g[0], a[2] - g[1], a[3] - lap);
        e[0] += wgt * d0 * d0;
        e[1] += wgt * (d1 * d1 + d2 * d2);
        e[2] += wgt * dl * dl;
        r[0] += wgt * u * u;
        r[1] += wgt * (g[0] * g[0] + g[1] * g[1]);
        r[2] += wgt * lap * lap;
    }
    Ok(FinalTimeErrors {
        l2: ratio(e[0], r[0]),
        h1: ratio(e[1], r[1]),
        h2: ratio(e[2], r[2]),
    })
}

/// Final-time errors through the space-time trace at `t = T`.
pub fn error_norms_final_time(
    coeffs: &[f64],
    sys: &SpaceTimeSystem,
    case: &ManufacturedCase,
) -> Result<FinalTimeErrors> {
    check_case(sys, coeffs, case)?;
    let t_end = sys.config.final_time;
    let w = spatial_trace(coeffs, sys, t_end)?;
    spatial_errors(&w, &sys.spatial.spaces, case, t_end)
}
