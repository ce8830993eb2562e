//! The Kronecker-structured space-time system, the tabulated stability and
//! penalty constants, and the CFL diagnostic.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::assembly::{
    assemble_load, assemble_spatial, assemble_temporal, SeparableForcing, SpatialOperators,
    Stabilization, TemporalMatrices,
};
use crate::error::param;
use crate::linalg::{
    cholesky, nested_dissection_order, symmetric_eigenvalues, CsrMatrix, DenseMatrix, SparseLdl,
    SymbolicLdl,
};
use crate::splines::{build_space, make_knot_vector, Constraint, SplineSpace1D};
use crate::{Error, Result};

/// Exact positive rational.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Rational {
    pub num: u64,
    pub den: u64,
}

impl Rational {
    pub const fn new(num: u64, den: u64) -> Self {
        Self { num, den }
    }

    pub fn to_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den == 1 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

const RHO: [Rational; 6] = [
    Rational::new(12, 1),
    Rational::new(10, 1),
    Rational::new(168, 17),
    Rational::new(306, 31),
    Rational::new(2349, 238),
    Rational::new(7797, 790),
];

const DELTA: [Rational; 6] = [
    Rational::new(1, 12),
    Rational::new(1, 120),
    Rational::new(17, 20160),
    Rational::new(5, 58529),
    Rational::new(2, 231067),
    Rational::new(1, 1140271),
];

/// Stability threshold `ρ_p` of the maximal-regularity temporal scheme:
/// the unstabilized ODE discretization with eigenvalue `μ` is stable iff
/// `h_t < sqrt(ρ_p / μ)`.
pub fn rho_lookup(p_t: usize) -> Result<Rational> {
    RHO.get(p_t.wrapping_sub(1))
        .copied()
        .ok_or(Error::UnsupportedDegree(p_t))
}

/// Smallest penalty constant `δ_p` giving unconditional stability.
pub fn delta_lookup(p_t: usize) -> Result<Rational> {
    DELTA
        .get(p_t.wrapping_sub(1))
        .copied()
        .ok_or(Error::UnsupportedDegree(p_t))
}

/// Discretization parameters on the box `(0, length)^dim × (0, final_time)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretizationConfig {
    pub dim: usize,
    pub degree_space: usize,
    pub degree_time: usize,
    /// Defaults to `degree_space - 1`.
    pub regularity_space: Option<usize>,
    /// Defaults to `degree_time - 1`.
    pub regularity_time: Option<usize>,
    /// Elements per spatial direction.
    pub elements_space: usize,
    pub elements_time: usize,
    pub final_time: f64,
    pub length: f64,
    pub stabilization: Stabilization,
    /// Defaults to `10^{-p_t}` for the penalty; ignored otherwise.
    pub delta: Option<f64>,
}

impl Default for DiscretizationConfig {
    fn default() -> Self {
        Self {
            dim: 1,
            degree_space: 2,
            degree_time: 2,
            regularity_space: None,
            regularity_time: None,
            elements_space: 8,
            elements_time: 8,
            final_time: 1.0,
            length: 1.0,
            stabilization: Stabilization::IgaPenalty,
            delta: None,
        }
    }
}

impl DiscretizationConfig {
    /// Same degree `p` and `h_s = h_t = 1/n` on the unit cube, maximal regularity.
    pub fn uniform(dim: usize, p: usize, n: usize, stabilization: Stabilization) -> Self {
        Self {
            dim,
            degree_space: p,
            degree_time: p,
            elements_space: n,
            elements_time: n,
            stabilization,
            ..Self::default()
        }
    }

    pub fn effective_regularity_space(&self) -> usize {
        self.regularity_space
            .unwrap_or(self.degree_space.saturating_sub(1))
    }

    pub fn effective_regularity_time(&self) -> usize {
        self.regularity_time
            .unwrap_or(self.degree_time.saturating_sub(1))
    }

    pub fn effective_delta(&self) -> f64 {
        match self.stabilization {
            Stabilization::IgaPenalty => self
                .delta
                .unwrap_or_else(|| 10f64.powi(-(self.degree_time as i32))),
            _ => 0.0,
        }
    }

    pub fn spatial_spaces(&self) -> Result<Vec<SplineSpace1D>> {
        if !(1..=2).contains(&self.dim) {
            return Err(param("spatial dimension must be 1 or 2"));
        }
        if !(self.length > 0.0) {
            return Err(param("domain length must be positive"));
        }
        let kv = make_knot_vector(
            self.elements_space,
            self.degree_space,
            self.effective_regularity_space(),
            (0.0, self.length),
        )?;
        let s = build_space(kv, Constraint::ClampedBoth)?;
        Ok(vec![s; self.dim])
    }

    /// `(trial, test)`: zero at `t = 0`, zero at `t = T`.
    pub fn temporal_spaces(&self) -> Result<(SplineSpace1D, SplineSpace1D)> {
        if !(self.final_time > 0.0) {
            return Err(param("final time must be positive"));
        }
        let kv = make_knot_vector(
            self.elements_time,
            self.degree_time,
            self.effective_regularity_time(),
            (0.0, self.final_time),
        )?;
        Ok((
            build_space(kv.clone(), Constraint::ZeroStart)?,
            build_space(kv, Constraint::ZeroEnd)?,
        ))
    }

    /// `(n_s, n_t)` without assembling anything.
    pub fn sizes(&self) -> Result<(usize, usize)> {
        let s = self.spatial_spaces()?;
        let (trial, _) = self.temporal_spaces()?;
        Ok((s.iter().map(|x| x.dim()).product(), trial.dim()))
    }
}

/// `A = (M_t - P_t) ⊗ K_x - K_t ⊗ M_x` with load vector, unknowns ordered
/// space-fastest (`i_s + n_s * i_t`).
#[derive(Debug, Clone)]
pub struct SpaceTimeSystem {
    pub config: DiscretizationConfig,
    pub temporal: TemporalMatrices,
    pub spatial: SpatialOperators,
    pub trial_time: SplineSpace1D,
    pub test_time: SplineSpace1D,
    pub rhs: Vec<f64>,
    stab_mass: DenseMatrix<f64>,
}

pub fn build_system(
    cfg: &DiscretizationConfig,
    forcing: &SeparableForcing,
) -> Result<SpaceTimeSystem> {
    let spaces = cfg.spatial_spaces()?;
    let (trial_time, test_time) = cfg.temporal_spaces()?;
    let spatial = assemble_spatial(&spaces)?;
    let temporal = assemble_temporal(
        &trial_time,
        &test_time,
        cfg.effective_delta(),
        cfg.stabilization,
    )?;
    let rhs = assemble_load(&spaces, &test_time, forcing)?;
    Ok(SpaceTimeSystem::from_parts(
        cfg.clone(),
        temporal,
        spatial,
        trial_time,
        test_time,
        rhs,
    ))
}

impl SpaceTimeSystem {
    pub fn from_parts(
        config: DiscretizationConfig,
        temporal: TemporalMatrices,
        spatial: SpatialOperators,
        trial_time: SplineSpace1D,
        test_time: SplineSpace1D,
        rhs: Vec<f64>,
    ) -> Self {
        let stab_mass = temporal.stabilized_mass();
        Self {
            config,
            temporal,
            spatial,
            trial_time,
            test_time,
            rhs,
            stab_mass,
        }
    }

    pub fn n_s(&self) -> usize {
        self.spatial.n_s()
    }

    pub fn n_t(&self) -> usize {
        self.temporal.dim()
    }

    pub fn n_dof(&self) -> usize {
        self.n_s() * self.n_t()
    }

    /// `M_t - P_t`.
    pub fn stabilized_mass(&self) -> &DenseMatrix<f64> {
        &self.stab_mass
    }

    /// Replaces the right-hand side (same ordering as [`Self::rhs`]).
    pub fn with_rhs(mut self, rhs: Vec<f64>) -> Result<Self> {
        if rhs.len() != self.n_dof() {
            return Err(Error::Dimension {
                expected: self.n_dof(),
                got: rhs.len(),
            });
        }
        self.rhs = rhs;
        Ok(self)
    }

    /// Matrix-free `A x` via `(B ⊗ C) vec(X) = vec(C X Bᵀ)`.
    pub fn apply_operator(&self, x: &[f64]) -> Result<Vec<f64>> {
        let (ns, nt) = (self.n_s(), self.n_t());
        if x.len() != ns * nt {
            return Err(Error::Dimension {
                expected: ns * nt,
                got: x.len(),
            });
        }
        let mut kx = vec![0.0; ns * nt];
        let mut mx = vec![0.0; ns * nt];
        for j in 0..nt {
            let col = &x[j * ns..(j + 1) * ns];
            self.spatial
                .stiffness
                .matvec_into(col, &mut kx[j * ns..(j + 1) * ns]);
            self.spatial
                .mass
                .matvec_into(col, &mut mx[j * ns..(j + 1) * ns]);
        }
        let mut y = vec![0.0; ns * nt];
        let (s, kt) = (&self.stab_mass, &self.temporal.stiffness);
        for i in 0..nt {
            let dst = &mut y[i * ns..(i + 1) * ns];
            for j in 0..nt {
                let (a, b) = (s[(i, j)], kt[(i, j)]);
                if a == 0.0 && b == 0.0 {
                    continue;
                }
                let (kc, mc) = (&kx[j * ns..(j + 1) * ns], &mx[j * ns..(j + 1) * ns]);
                for ((d, &k), &m) in dst.iter_mut().zip(kc).zip(mc) {
                    *d += a * k - b * m;
                }
            }
        }
        Ok(y)
    }

    /// Explicit Kronecker expansion of `A`, refused above `cap` unknowns.
    pub fn assemble_dense(&self, cap: usize) -> Result<DenseMatrix<f64>> {
        let (ns, nt) = (self.n_s(), self.n_t());
        let n = ns * nt;
        if n > cap {
            return Err(Error::Size { size: n, cap });
        }
        let mut a = DenseMatrix::zeros(n, n);
        let k = &self.spatial.stiffness;
        let m = &self.spatial.mass;
        for it in 0..nt {
            for jt in 0..nt {
                let (s, kt) = (self.stab_mass[(it, jt)], self.temporal.stiffness[(it, jt)]);
                if s == 0.0 && kt == 0.0 {
                    continue;
                }
                for is in 0..ns {
                    let (kc, kv) = k.row(is);
                    for (&js, &v) in kc.iter().zip(kv) {
                        a[(it * ns + is, jt * ns + js)] += s * v;
                    }
                    let (mc, mv) = m.row(is);
                    for (&js, &v) in mc.iter().zip(mv) {
                        a[(it * ns + is, jt * ns + js)] -= kt * v;
                    }
                }
            }
        }
        Ok(a)
    }
}

/// Default cap on the number of unknowns for dense debugging paths.
pub const DEFAULT_DENSE_CAP: usize = 20_000;

/// Result of the CFL diagnostic.
#[derive(Debug, Clone, PartialEq)]
pub struct CflReport {
    /// Largest `λ` with `K_x v = λ M_x v` (units length⁻⁴).
    pub lambda_max: f64,
    pub rho: Rational,
    /// `sqrt(ρ / λ_max)`.
    pub h_t_max: f64,
    pub h_t: f64,
    pub satisfied: bool,
    /// The tabulated `ρ` assumes maximal temporal regularity; the report is
    /// advisory when the temporal splines are less smooth.
    pub advisory: bool,
    /// `h_t_max / h_s²`, the empirical counterpart of `sqrt(ρ / C_Ω)`.
    pub ratio_to_hs2: f64,
}

/// Dense route below this many spatial unknowns, power iteration above.
pub const DENSE_EIGEN_LIMIT: usize = 2000;

pub fn cfl_check(
    spatial: &SpatialOperators,
    p_t: usize,
    h_t: f64,
    regularity_time: usize,
) -> Result<CflReport> {
    let rho = rho_lookup(p_t)?;
    let lambda_max =
        max_generalized_eigenvalue(&spatial.stiffness, &spatial.mass, &spatial.shape())?;
    let h_t_max = (rho.to_f64() / lambda_max).sqrt();
    let h_s = spatial.h_s();
    Ok(CflReport {
        lambda_max,
        rho,
        h_t_max,
        h_t,
        satisfied: h_t < h_t_max,
        advisory: regularity_time + 1 < p_t,
        ratio_to_hs2: h_t_max / (h_s * h_s),
    })
}

/// All eigenvalues of the symmetric-definite pencil `(K, M)`, ascending.
pub fn generalized_eigenvalues_dense(
    k: &DenseMatrix<f64>,
    m: &DenseMatrix<f64>,
) -> Result<Vec<f64>> {
    let l = cholesky(m)?;
    let n = l.rows();
    // C = L⁻¹ K L⁻ᵀ by two triangular solves.
    let mut y = k.clone();
    for j in 0..n {
        for i in 0..n {
            let mut s = y[(i, j)];
            for r in 0..i {
                s -= l[(i, r)] * y[(r, j)];
            }
            y[(i, j)] = s / l[(i, i)];
        }
    }
    let yt = y.transpose();
    let mut c = yt.clone();
    for j in 0..n {
        for i in 0..n {
            let mut s = c[(i, j)];
            for r in 0..i {
                s -= l[(i, r)] * c[(r, j)];
            }
            c[(i, j)] = s / l[(i, i)];
        }
    }
    symmetric_eigenvalues(&c)
}

/// Largest eigenvalue of `(K, M)` with `M` SPD.
pub fn max_generalized_eigenvalue(k: &CsrMatrix, m: &CsrMatrix, shape: &[usize]) -> Result<f64> {
    let n = k.rows();
    if n == 1 {
        return Ok(k.get(0, 0) / m.get(0, 0));
    }
    if n <= DENSE_EIGEN_LIMIT {
        let ev = generalized_eigenvalues_dense(&k.to_dense(), &m.to_dense())?;
        return Ok(*ev.last().unwrap());
    }
    power_iteration(k, m, shape, 1e-8, 20_000)
}

/// Power iteration on `M⁻¹K` with a sparse Cholesky of `M`; stops when the
/// Rayleigh quotient changes by at most `tol` relative.
pub fn power_iteration(
    k: &CsrMatrix,
    m: &CsrMatrix,
    shape: &[usize],
    tol: f64,
    max_iter: usize,
) -> Result<f64> {
    let n = k.rows();
    let pattern = m.clone();
    let radius = n_radius(m, shape);
    let sym = Arc::new(SymbolicLdl::analyze(
        &pattern,
        nested_dissection_order(shape, radius),
    ));
    let vals: Vec<f64> = m.iter().map(|(_, _, v)| v).collect();
    let chol = SparseLdl::factor(sym, &vals, 1e-14)?;
    // Deterministic start vector with all modes present.
    let mut v: Vec<f64> = (0..n)
        .map(|i| 1.0 + 0.1 * ((i as f64) * 0.754_877_666).sin())
        .collect();
    let mut lambda = 0.0;
    for it in 1..=max_iter {
        let mut w = k.matvec(&v);
        chol.solve_in_place(&mut w);
        let kw = k.quadratic_form(&w);
        let mw = m.quadratic_form(&w);
        let next = kw / mw;
        let norm = mw.sqrt();
        w.iter_mut().for_each(|x| *x /= norm);
        v = w;
        if it > 1 && (next - lambda).abs() <= tol * next.abs() {
            return Ok(next);
        }
        lambda = next;
    }
    Err(Error::NoConvergence {
        iterations: max_iter,
    })
}

/// Coupling radius of a tensor grid pattern (max index offset per direction).
pub(crate) fn n_radius(a: &CsrMatrix, shape: &[usize]) -> usize {
    let n0 = shape.first().copied().unwrap_or(1).max(1);
    a.iter()
        .map(|(i, j, _)| {
            let dx = (i % n0).abs_diff(j % n0);
            let dy = (i / n0).abs_diff(j / n0);
            dx.max(dy)
        })
        .max()
        .unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tables_are_exact() {
        assert_eq!(rho_lookup(1).unwrap(), Rational::new(12, 1));
        assert_eq!(rho_lookup(3).unwrap(), Rational::new(168, 17));
        assert_eq!(rho_lookup(6).unwrap(), Rational::new(7797, 790));
        assert_eq!(delta_lookup(1).unwrap(), Rational::new(1, 12));
        assert_eq!(delta_lookup(2).unwrap(), Rational::new(1, 120));
        assert_eq!(delta_lookup(4).unwrap(), Rational::new(5, 58529));
        assert!(matches!(rho_lookup(0), Err(Error::UnsupportedDegree(0))));
        assert!(matches!(delta_lookup(7), Err(Error::UnsupportedDegree(7))));
    }

    #[test]
    fn sizes_of_small_config() {
        let mut cfg = DiscretizationConfig::uniform(1, 2, 8, Stabilization::IgaPenalty);
        cfg.elements_time = 4;
        let sys = build_system(&cfg, &SeparableForcing::zero()).unwrap();
        assert_eq!((sys.n_s(), sys.n_t(), sys.n_dof()), (6, 5, 30));
        assert_eq!(cfg.effective_delta(), 1e-2);
    }

    #[test]
    fn explicit_delta_and_unstabilized_penalty() {
        let mut cfg = DiscretizationConfig::uniform(1, 3, 6, Stabilization::None);
        cfg.delta = Some(0.5);
        let sys = build_system(&cfg, &SeparableForcing::zero()).unwrap();
        assert_eq!(sys.temporal.penalty.max_abs(), 0.0);
        assert_eq!(cfg.effective_delta(), 0.0);
        cfg.stabilization = Stabilization::IgaPenalty;
        assert_eq!(cfg.effective_delta(), 0.5);
    }

    #[test]
    fn apply_rejects_wrong_length() {
        let cfg = DiscretizationConfig::uniform(1, 2, 6, Stabilization::IgaPenalty);
        let sys = build_system(&cfg, &SeparableForcing::zero()).unwrap();
        assert!(matches!(
            sys.apply_operator(&[1.0]),
            Err(Error::Dimension { .. })
        ));
        let zero = sys.apply_operator(&vec![0.0; sys.n_dof()]).unwrap();
        assert!(zero.iter().all(|&v| v == 0.0));
        assert!(matches!(sys.assemble_dense(3), Err(Error::Size { .. })));
    }

    #[test]
    fn cfl_single_dof_uses_ratio() {
        let mut cfg = DiscretizationConfig::uniform(1, 2, 3, Stabilization::None);
        cfg.elements_time = 2;
        let sys = build_system(&cfg, &SeparableForcing::zero()).unwrap();
        assert_eq!(sys.n_s(), 1);
        let rep = cfl_check(&sys.spatial, 2, 0.5, 1).unwrap();
        let want = sys.spatial.stiffness.get(0, 0) / sys.spatial.mass.get(0, 0);
        assert!((rep.lambda_max - want).abs() <= 1e-12 * want);
        assert!(!rep.advisory);
        let huge = cfl_check(&sys.spatial, 2, rep.h_t_max * 1.0001, 1).unwrap();
        assert!(!huge.satisfied);
        assert!(cfl_check(&sys.spatial, 3, 0.1, 0).unwrap().advisory);
    }
}
