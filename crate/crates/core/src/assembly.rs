//! Gram matrices of spline spaces, the temporal and spatial operators, and
//! the space-time load vector.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::error::param;
use crate::linalg::{CsrMatrix, DenseMatrix};
use crate::quadrature::gauss_rule;
use crate::splines::{Constraint, SplineSpace1D};
use crate::{Error, Result};

/// `entries[i][j] = ∫ Dᵃφ_i^test · Dᵇφ_j^trial`; rows are test functions.
#[derive(Debug, Clone, PartialEq)]
pub struct Gram1D {
    pub deriv_row: usize,
    pub deriv_col: usize,
    pub matrix: CsrMatrix,
}

/// Gram matrix with `max(degree) + 1` Gauss points per knot span.
pub fn assemble_gram_1d(
    test: &SplineSpace1D,
    trial: &SplineSpace1D,
    a: usize,
    b: usize,
) -> Result<Gram1D> {
    let n = test.degree().max(trial.degree()) + 1;
    assemble_gram_1d_with_points(test, trial, a, b, n)
}

pub fn assemble_gram_1d_with_points(
    test: &SplineSpace1D,
    trial: &SplineSpace1D,
    a: usize,
    b: usize,
    n_points: usize,
) -> Result<Gram1D> {
    if !test.same_breakpoints(trial) {
        return Err(param("test and trial spaces have different breakpoints"));
    }
    if a > test.degree() || b > trial.degree() {
        return Err(param(alloc::format!(
            "derivative orders ({a}, {b}) exceed degrees ({}, {})",
            test.degree(),
            trial.degree()
        )));
    }
    let rule = gauss_rule(n_points)?;
    let mut triplets = Vec::new();
    let breaks = test.knot_vector().breakpoints();
    for w in breaks.windows(2) {
        let (x0, x1) = (w[0], w[1]);
        for (x, wt) in rule.mapped(x0, x1) {
            let (ri, rv) = test.eval(x, a)?;
            let (ci, cv) = trial.eval(x, b)?;
            for (i, vi) in ri.iter().zip(&rv[a]) {
                let Some(i) = *i else { continue };
                for (j, vj) in ci.iter().zip(&cv[b]) {
                    let Some(j) = *j else { continue };
                    triplets.push((i, j, wt * vi * vj));
                }
            }
        }
    }
    Ok(Gram1D {
        deriv_row: a,
        deriv_col: b,
        matrix: CsrMatrix::from_triplets(test.dim(), trial.dim(), &triplets),
    })
}

/// How the temporal factor multiplying the spatial stiffness is modified.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stabilization {
    None,
    /// Penalty `δ h_t^{2p_t} (∂_t^{p_t} ·, ∂_t^{p_t} ·)`.
    IgaPenalty,
    /// Elementwise L² projection of the test function onto discontinuous
    /// polynomials of degree `p_t - 1`.
    FemProjection,
}

impl Stabilization {
    pub fn name(self) -> &'static str {
        match self {
            Stabilization::None => "none",
            Stabilization::IgaPenalty => "iga",
            Stabilization::FemProjection => "fem",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "none" => Some(Stabilization::None),
            "iga" | "iga_penalty" => Some(Stabilization::IgaPenalty),
            "fem" | "fem_projection" => Some(Stabilization::FemProjection),
            _ => None,
        }
    }
}

/// Dense temporal Gram matrices; rows are the test space (zero at `T`),
/// columns the trial space (zero at `0`).
#[derive(Debug, Clone, PartialEq)]
pub struct TemporalMatrices {
    pub mass: DenseMatrix<f64>,
    pub stiffness: DenseMatrix<f64>,
    pub penalty: DenseMatrix<f64>,
    pub mode: Stabilization,
    pub delta: f64,
    pub h_t: f64,
}

impl TemporalMatrices {
    /// `M_t - P_t`, the factor multiplying the spatial stiffness.
    pub fn stabilized_mass(&self) -> DenseMatrix<f64> {
        self.mass.sub(&self.penalty)
    }

    pub fn dim(&self) -> usize {
        self.mass.rows()
    }
}

pub fn assemble_temporal(
    trial: &SplineSpace1D,
    test: &SplineSpace1D,
    delta: f64,
    mode: Stabilization,
) -> Result<TemporalMatrices> {
    if !(delta >= 0.0) {
        return Err(param("penalty parameter δ must be nonnegative"));
    }
    if trial.degree() != test.degree() {
        return Err(param("temporal trial and test degrees differ"));
    }
    let p_t = trial.degree();
    let mass = assemble_gram_1d(test, trial, 0, 0)?.matrix.to_dense();
    let stiffness = assemble_gram_1d(test, trial, 1, 1)?.matrix.to_dense();
    let h_t = trial.mesh_size();
    let penalty = match mode {
        Stabilization::None => DenseMatrix::zeros(test.dim(), trial.dim()),
        Stabilization::IgaPenalty => assemble_gram_1d(test, trial, p_t, p_t)?
            .matrix
            .to_dense()
            .scaled(delta * h_t.powi(2 * p_t as i32)),
        Stabilization::FemProjection => mass.sub(&projected_mass(test, trial, p_t - 1)?),
    };
    Ok(TemporalMatrices {
        mass,
        stiffness,
        penalty,
        mode,
        delta,
        h_t,
    })
}

/// `∫ (Πψ_j^trial)(Πψ_i^test)` with `Π` the elementwise L² projection onto
/// polynomials of degree `proj_degree`, using a local Legendre basis.
pub fn projected_mass(
    test: &SplineSpace1D,
    trial: &SplineSpace1D,
    proj_degree: usize,
) -> Result<DenseMatrix<f64>> {
    if !test.same_breakpoints(trial) {
        return Err(param("test and trial spaces have different breakpoints"));
    }
    let n_points = test.degree().max(trial.degree()) + proj_degree / 2 + 2;
    let rule = gauss_rule(n_points)?;
    let mut out = DenseMatrix::zeros(test.dim(), trial.dim());
    let breaks = test.knot_vector().breakpoints();
    let nl = proj_degree + 1;
    for w in breaks.windows(2) {
        let (x0, x1) = (w[0], w[1]);
        let h = x1 - x0;
        // moments[k][c] = ∫_e ψ_c L_k, keyed by local index.
        let mut test_mom: Vec<(usize, Vec<f64>)> = Vec::new();
        let mut trial_mom: Vec<(usize, Vec<f64>)> = Vec::new();
        let accumulate = |space: &SplineSpace1D,
                          moms: &mut Vec<(usize, Vec<f64>)>,
                          x: f64,
                          wt: f64,
                          leg: &[f64]|
         -> Result<()> {
            let (idx, vals) = space.eval(x, 0)?;
            for (i, v) in idx.iter().zip(&vals[0]) {
                let Some(i) = *i else { continue };
                let slot = match moms.iter().position(|(g, _)| *g == i) {
                    Some(s) => s,
                    None => {
                        moms.push((i, vec![0.0; leg.len()]));
                        moms.len() - 1
                    }
                };
                for (m, l) in moms[slot].1.iter_mut().zip(leg) {
                    *m += wt * v * l;
                }
            }
            Ok(())
        };
        let mut leg = vec![0.0; nl];
        for (x, wt) in rule.mapped(x0, x1) {
            let xi = (2.0 * x - x0 - x1) / h;
            legendre_values(xi, &mut leg);
            accumulate(test, &mut test_mom, x, wt, &leg)?;
            accumulate(trial, &mut trial_mom, x, wt, &leg)?;
        }
        for (i, mi) in &test_mom {
            for (j, mj) in &trial_mom {
                let mut s = 0.0;
                for k in 0..nl {
                    s += mi[k] * mj[k] * (2.0 * k as f64 + 1.0) / h;
                }
                out[(*i, *j)] += s;
            }
        }
    }
    Ok(out)
}

fn legendre_values(x: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    out[0] = 1.0;
    if out.len() > 1 {
        out[1] = x;
    }
    for k in 2..out.len() {
        let kf = k as f64;
        out[k] = ((2.0 * kf - 1.0) * x * out[k - 1] - (kf - 1.0) * out[k - 2]) / kf;
    }
}

/// Spatial mass and bi-Laplacian stiffness on an axis-aligned box.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialOperators {
    pub spaces: Vec<SplineSpace1D>,
    pub mass: CsrMatrix,
    pub stiffness: CsrMatrix,
}

impl SpatialOperators {
    pub fn dim(&self) -> usize {
        self.spaces.len()
    }

    /// `n_s`, the product of the per-direction dimensions.
    pub fn n_s(&self) -> usize {
        self.mass.rows()
    }

    /// Per-direction dimensions; index `i0 + n0 * i1` in 2D.
    pub fn shape(&self) -> Vec<usize> {
        self.spaces.iter().map(|s| s.dim()).collect()
    }

    pub fn h_s(&self) -> f64 {
        self.spaces
            .iter()
            .map(|s| s.mesh_size())
            .fold(0.0, f64::max)
    }

    pub fn degree(&self) -> usize {
        self.spaces.iter().map(|s| s.degree()).max().unwrap_or(0)
    }
}

/// Assembles `M_x` and `K_x = ∫ Δφ_i Δφ_j` for one or two clamped directions.
pub fn assemble_spatial(spaces: &[SplineSpace1D]) -> Result<SpatialOperators> {
    if spaces.is_empty() || spaces.len() > 2 {
        return Err(param("spatial dimension must be 1 or 2"));
    }
    for s in spaces {
        if s.constraint() != Constraint::ClampedBoth {
            return Err(param("spatial spaces must be clamped (u = ∂u/∂n = 0)"));
        }
        if s.degree() < 2 {
            return Err(param("clamped spatial spaces need degree ≥ 2"));
        }
    }
    let g = |s: &SplineSpace1D, a, b| assemble_gram_1d(s, s, a, b).map(|g| g.matrix);
    let (mass, stiffness) = if spaces.len() == 1 {
        (g(&spaces[0], 0, 0)?, g(&spaces[0], 2, 2)?)
    } else {
        let (x, y) = (&spaces[0], &spaces[1]);
        let (x00, x02, x20, x22) = (g(x, 0, 0)?, g(x, 0, 2)?, g(x, 2, 0)?, g(x, 2, 2)?);
        let (y00, y02, y20, y22) = (g(y, 0, 0)?, g(y, 0, 2)?, g(y, 2, 0)?, g(y, 2, 2)?);
        let mass = y00.kron(&x00);
        let stiffness = y00
            .kron(&x22)
            .add(&y20.kron(&x02))
            .add(&y02.kron(&x20))
            .add(&y22.kron(&x00));
        (mass, stiffness)
    };
    Ok(SpatialOperators {
        spaces: spaces.to_vec(),
        mass,
        stiffness,
    })
}

/// Closed-form scalar function of one variable.
pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// One product term `g(t) Π_l w_l(x_l)`.
#[derive(Clone)]
pub struct ForcingTerm {
    pub time: ScalarFn,
    pub space: Vec<ScalarFn>,
}

/// `f(x, t) = Σ_k g_k(t) Π_l w_{k,l}(x_l)`.
#[derive(Clone, Default)]
pub struct SeparableForcing {
    pub terms: Vec<ForcingTerm>,
}

impl fmt::Debug for SeparableForcing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SeparableForcing({} terms)", self.terms.len())
    }
}

impl SeparableForcing {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn term(mut self, time: ScalarFn, space: Vec<ScalarFn>) -> Self {
        self.terms.push(ForcingTerm { time, space });
        self
    }

    pub fn eval(&self, x: &[f64], t: f64) -> f64 {
        self.terms
            .iter()
            .map(|term| {
                (term.time)(t)
                    * term
                        .space
                        .iter()
                        .zip(x)
                        .map(|(w, &xi)| w(xi))
                        .product::<f64>()
            })
            .sum()
    }
}

/// `∫ g φ_i` for every basis function, `degree + 2` points per span.
pub fn project_1d(space: &SplineSpace1D, g: &dyn Fn(f64) -> f64) -> Result<Vec<f64>> {
    let rule = gauss_rule(space.degree() + 2)?;
    let mut out = vec![0.0; space.dim()];
    for w in space.knot_vector().breakpoints().windows(2) {
        for (x, wt) in rule.mapped(w[0], w[1]) {
            let gx = g(x);
            let (idx, vals) = space.eval(x, 0)?;
            for (i, v) in idx.iter().zip(&vals[0]) {
                if let Some(i) = i {
                    out[*i] += wt * gx * v;
                }
            }
        }
    }
    Ok(out)
}

/// Space-time load vector, ordered `i_s + n_s * i_t`.
pub fn assemble_load(
    spatial: &[SplineSpace1D],
    temporal_test: &SplineSpace1D,
    f: &SeparableForcing,
) -> Result<Vec<f64>> {
    let n_s: usize = spatial.iter().map(|s| s.dim()).product();
    let n_t = temporal_test.dim();
    let mut out = vec![0.0; n_s * n_t];
    for term in &f.terms {
        if term.space.len() != spatial.len() {
            return Err(Error::Dimension {
                expected: spatial.len(),
                got: term.space.len(),
            });
        }
        let tv = project_1d(temporal_test, &*term.time)?;
        // Space factor, first direction fastest.
        let mut sv = vec![1.0];
        for (space, w) in spatial.iter().zip(&term.space) {
            let v = project_1d(space, &**w)?;
            let mut next = Vec::with_capacity(sv.len() * v.len());
            for &outer in &v {
                for &inner in &sv {
                    next.push(outer * inner);
                }
            }
            sv = next;
        }
        for (it, &g) in tv.iter().enumerate() {
            for (is, &w) in sv.iter().enumerate() {
                out[is + n_s * it] += g * w;
            }
        }
    }
    Ok(out)
}
