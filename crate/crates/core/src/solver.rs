//! Direct solver for the Kronecker-structured space-time system.
//!
//! The temporal pencil `(K_t, M_t - P_t)` is brought to simultaneous upper
//! triangular form `C K_t D = E`, `C (M_t - P_t) D = F` with `C`, `D`
//! unitary. Writing `B = E⁻¹F`, the system becomes block upper triangular
//! with diagonal blocks `B[k,k] K_x - M_x`, which are solved by backward
//! substitution with one sparse factorization per distinct diagonal value.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::linalg::{
    complex_schur, householder_qr, nested_dissection_order, norm2, singular_values, BandLu,
    CsrMatrix, DenseMatrix, FrontalLdl, FrontalTree, Lu, SparseLdl, SymbolicLdl,
};
use crate::system::{n_radius, SpaceTimeSystem, DEFAULT_DENSE_CAP};
use crate::{Error, Result, C64};

/// Relative floor on the smallest singular value of `K_t`.
pub const KT_SINGULAR_FLOOR: f64 = 1e-12;
/// Relative pivot floor for the spatial diagonal blocks.
pub const BLOCK_PIVOT_FLOOR: f64 = 1e-13;
/// Diagonal values of `B` closer than this share a factorization.
pub const SHARE_TOLERANCE: f64 = 1e-14;
/// A diagonal value this close to the conjugate of a factored one reuses
/// the conjugated factorization.
pub const PAIR_TOLERANCE: f64 = 1e-8;
const REFINEMENT_STEPS: usize = 4;
const REFINEMENT_TOLERANCE: f64 = 1e-13;

/// `C K_t D = E`, `C (M_t - P_t) D = F`, `B = E⁻¹ F`.
#[derive(Debug, Clone)]
pub struct TemporalFactorization {
    pub c: DenseMatrix<C64>,
    pub d: DenseMatrix<C64>,
    pub e: DenseMatrix<C64>,
    pub f: DenseMatrix<C64>,
    pub b: DenseMatrix<C64>,
}

impl TemporalFactorization {
    pub fn dim(&self) -> usize {
        self.b.rows()
    }

    /// Diagonal of `B`, the generalized eigenvalues of `(M_t - P_t, K_t)`.
    pub fn eigenvalues(&self) -> Vec<C64> {
        (0..self.dim()).map(|k| self.b[(k, k)]).collect()
    }

    /// `(‖C K D - E‖_F / ‖K‖_F, ‖C S D - F‖_F / ‖S‖_F)`.
    pub fn reconstruction_residuals(
        &self,
        kt: &DenseMatrix<f64>,
        s: &DenseMatrix<f64>,
    ) -> (f64, f64) {
        let rel = |a: &DenseMatrix<f64>, target: &DenseMatrix<C64>| {
            let ac = a.map(C64::from);
            let r = self.c.matmul(&ac).matmul(&self.d).sub(target).norm_fro();
            r / a.norm_fro().max(f64::MIN_POSITIVE)
        };
        (rel(kt, &self.e), rel(s, &self.f))
    }

    /// `(‖C*C - I‖_F, ‖D*D - I‖_F)`.
    pub fn unitarity_defects(&self) -> (f64, f64) {
        let defect = |x: &DenseMatrix<C64>| {
            x.adjoint()
                .matmul(x)
                .sub(&DenseMatrix::identity(x.rows()))
                .norm_fro()
        };
        (defect(&self.c), defect(&self.d))
    }
}

/// Factors the temporal pencil. `K_t` must be numerically invertible.
///
/// With `Z = K_t⁻¹ S = Q T Q*` (complex Schur) and `K_t Q = U R` (QR), the
/// choice `C = U*`, `D = Q`, `E = R`, `F = R T` gives `B = T`.
pub fn factorize_temporal(
    kt: &DenseMatrix<f64>,
    s: &DenseMatrix<f64>,
) -> Result<TemporalFactorization> {
    let n = kt.rows();
    if !kt.is_square() || s.rows() != n || s.cols() != n {
        return Err(Error::Dimension {
            expected: n,
            got: s.rows(),
        });
    }
    if n == 0 {
        return Err(Error::Parameter("empty temporal space".into()));
    }
    let sv = singular_values(kt);
    let (smax, smin) = (sv[0], sv[n - 1]);
    if !(smin > KT_SINGULAR_FLOOR * smax) {
        return Err(Error::Factorization(alloc::format!(
            "K_t is numerically singular (σ_min/σ_max = {:.3e})",
            smin / smax
        )));
    }
    let ktc = kt.map(C64::from);
    let lu = Lu::new(&ktc, 0.0)?;
    let z = lu.solve_matrix(&s.map(C64::from));
    let schur = complex_schur(&z)?;
    let (u, r) = householder_qr(&ktc.matmul(&schur.q));
    let mut b = schur.t;
    for i in 0..n {
        for j in 0..i {
            b[(i, j)] = C64::new(0.0, 0.0);
        }
    }
    let f = r.matmul(&b);
    Ok(TemporalFactorization {
        c: u.adjoint(),
        d: schur.q,
        e: r,
        f,
        b,
    })
}

/// Outcome of a solve.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub solution: Vec<f64>,
    /// `‖A x - f‖₂ / ‖f‖₂` through the matrix-free operator.
    pub relative_residual: f64,
    /// `‖Im x‖₂ / ‖x‖₂` before the real part is taken.
    pub imag_discard_norm: f64,
    pub flops_estimate: u64,
    /// Filled in by callers that own a clock.
    pub wall_time: Option<f64>,
    /// Number of sparse spatial factorizations actually computed.
    pub spatial_factorizations: usize,
    /// True when the dense oracle replaced the fast path.
    pub dense_fallback: bool,
}

/// Factorization of one spatial block `μ K_x - M_x`.
pub enum BlockFactor {
    Ldl(SparseLdl<C64>),
    Frontal(FrontalLdl),
    Band(BandLu<C64>),
}

impl BlockFactor {
    pub fn solve_in_place(&self, x: &mut [C64]) {
        match self {
            Self::Ldl(f) => f.solve_in_place(x),
            Self::Frontal(f) => f.solve_in_place(x),
            Self::Band(f) => f.solve_in_place(x),
        }
    }
}

/// Factors `μ K_x - M_x` for arbitrary complex `μ` on a shared pattern.
pub struct SpatialBlockSolver {
    pattern: CsrMatrix,
    k_vals: Vec<f64>,
    m_vals: Vec<f64>,
    ordering: Ordering,
    bands: (usize, usize),
}

enum Ordering {
    /// One-dimensional grids: natural (banded) order.
    Natural(Arc<SymbolicLdl>),
    /// Two-dimensional grids: nested dissection with dense fronts.
    Dissection(Arc<FrontalTree>),
}

impl SpatialBlockSolver {
    pub fn new(k: &CsrMatrix, m: &CsrMatrix, shape: &[usize]) -> Self {
        let pattern = k.add(&m.scaled(0.0));
        let k_vals = pattern.iter().map(|(i, j, _)| k.get(i, j)).collect();
        let m_vals = pattern.iter().map(|(i, j, _)| m.get(i, j)).collect();
        let radius = n_radius(&pattern, shape);
        let ordering = if shape.len() == 2 {
            Ordering::Dissection(Arc::new(FrontalTree::analyze(
                &pattern,
                [shape[0], shape[1]],
                radius,
            )))
        } else {
            let order = nested_dissection_order(shape, radius);
            Ordering::Natural(Arc::new(SymbolicLdl::analyze(&pattern, order)))
        };
        let bands = pattern.bandwidths();
        Self {
            pattern,
            k_vals,
            m_vals,
            ordering,
            bands,
        }
    }

    pub fn dim(&self) -> usize {
        self.pattern.rows()
    }

    /// Multiply-add count of one numeric factorization.
    pub fn factor_flops(&self) -> usize {
        match &self.ordering {
            Ordering::Natural(s) => s.factor_flops(),
            Ordering::Dissection(t) => t.factor_flops(),
        }
    }

    /// Stored entries of `L` under the fill-reducing order.
    pub fn factor_nnz(&self) -> usize {
        match &self.ordering {
            Ordering::Natural(s) => s.factor_nnz(),
            Ordering::Dissection(t) => t.factor_nnz(),
        }
    }

    /// `b - (μ K - M) x`.
    pub fn residual(&self, mu: C64, x: &[C64], b: &[C64]) -> Vec<C64> {
        let mut r = b.to_vec();
        for (((i, j, _), &kv), &mv) in self.pattern.iter().zip(&self.k_vals).zip(&self.m_vals) {
            r[i] -= (mu * kv - mv) * x[j];
        }
        r
    }

    /// `k` only labels the error.
    pub fn factor(&self, k: usize, mu: C64) -> Result<BlockFactor> {
        let vals: Vec<C64> = self
            .k_vals
            .iter()
            .zip(&self.m_vals)
            .map(|(&kv, &mv)| mu * kv - mv)
            .collect();
        let direct = match &self.ordering {
            Ordering::Natural(s) => {
                SparseLdl::factor(s.clone(), &vals, BLOCK_PIVOT_FLOOR).map(BlockFactor::Ldl)
            }
            Ordering::Dissection(t) => {
                FrontalLdl::factor(t.clone(), &vals, BLOCK_PIVOT_FLOOR).map(BlockFactor::Frontal)
            }
        };
        if let Ok(f) = direct {
            return Ok(f);
        }
        let entries = self
            .pattern
            .iter()
            .zip(&vals)
            .map(|((i, j, _), &v)| (i, j, v));
        BandLu::factor(
            self.dim(),
            self.bands.0,
            self.bands.1,
            entries,
            BLOCK_PIVOT_FLOOR,
        )
        .map(BlockFactor::Band)
        .map_err(|_| Error::SingularBlock {
            k,
            re: mu.re,
            im: mu.im,
        })
    }
}

fn conj_solve(f: &BlockFactor, x: &mut [C64]) {
    x.iter_mut().for_each(|z| *z = z.conj());
    f.solve_in_place(x);
    x.iter_mut().for_each(|z| *z = z.conj());
}

/// Output of the fast solve before any residual check.
#[derive(Debug, Clone, PartialEq)]
pub struct RawSolution {
    pub solution: Vec<f64>,
    pub imag_discard_norm: f64,
    pub spatial_factorizations: usize,
}

/// Algorithm 1 on an already factored temporal pencil, with the residual
/// check through the matrix-free operator. Residuals above
/// `REFINE_ABOVE` trigger a few steps of iterative refinement that reuse
/// the spatial factorizations.
pub fn solve(sys: &SpaceTimeSystem, fact: &TemporalFactorization) -> Result<SolveReport> {
    let mut solver = KroneckerSolver::new(sys, fact)?;
    let x = solver.solve_complex(&sys.rhs)?;
    let imag_discard_norm = imag_ratio(&x);
    let mut solution: Vec<f64> = x.iter().map(|z| z.re).collect();
    let mut res = relative_residual(sys, &solution)?;
    for _ in 0..RESIDUAL_REFINEMENTS {
        if !(res > REFINE_ABOVE) {
            break;
        }
        let ax = sys.apply_operator(&solution)?;
        let r: Vec<f64> = sys.rhs.iter().zip(&ax).map(|(f, a)| f - a).collect();
        let dx = solver.solve_complex(&r)?;
        let next: Vec<f64> = solution.iter().zip(&dx).map(|(x, d)| x + d.re).collect();
        let next_res = relative_residual(sys, &next)?;
        if !(next_res < res) {
            break;
        }
        solution = next;
        res = next_res;
    }
    Ok(SolveReport {
        solution,
        relative_residual: res,
        imag_discard_norm,
        flops_estimate: system_flops(sys),
        wall_time: None,
        spatial_factorizations: solver.factorizations(),
        dense_fallback: false,
    })
}

const REFINE_ABOVE: f64 = 1e-11;
const RESIDUAL_REFINEMENTS: usize = 3;

fn imag_ratio(x: &[C64]) -> f64 {
    let xn = norm2(x);
    let imag: Vec<f64> = x.iter().map(|z| z.im).collect();
    if xn > 0.0 {
        norm2(&imag) / xn
    } else {
        0.0
    }
}

/// Steps 2 to 4 of the block solve, single right-hand side.
pub fn algorithm1(sys: &SpaceTimeSystem, fact: &TemporalFactorization) -> Result<RawSolution> {
    let mut solver = KroneckerSolver::new(sys, fact)?;
    let x = solver.solve_complex(&sys.rhs)?;
    Ok(RawSolution {
        solution: x.iter().map(|z| z.re).collect(),
        imag_discard_norm: imag_ratio(&x),
        spatial_factorizations: solver.factorizations(),
    })
}

/// Algorithm 1 that keeps its spatial block factorizations, so further
/// right-hand sides cost only substitutions.
pub struct KroneckerSolver<'a> {
    sys: &'a SpaceTimeSystem,
    fact: &'a TemporalFactorization,
    blocks: SpatialBlockSolver,
    /// `E⁻¹ C`
    g: DenseMatrix<C64>,
    cache: Vec<(C64, BlockFactor)>,
}

impl<'a> KroneckerSolver<'a> {
    pub fn new(sys: &'a SpaceTimeSystem, fact: &'a TemporalFactorization) -> Result<Self> {
        if fact.dim() != sys.n_t() {
            return Err(Error::Dimension {
                expected: sys.n_t(),
                got: fact.dim(),
            });
        }
        Ok(Self {
            sys,
            fact,
            blocks: SpatialBlockSolver::new(
                &sys.spatial.stiffness,
                &sys.spatial.mass,
                &sys.spatial.shape(),
            ),
            g: upper_solve_matrix(&fact.e, &fact.c),
            cache: Vec::new(),
        })
    }

    /// Distinct spatial factorizations computed so far.
    pub fn factorizations(&self) -> usize {
        self.cache.len()
    }

    /// Complex solution of `A x = rhs` before the real part is taken.
    pub fn solve_complex(&mut self, rhs: &[f64]) -> Result<Vec<C64>> {
        let (ns, nt) = (self.sys.n_s(), self.sys.n_t());
        if rhs.len() != ns * nt {
            return Err(Error::Dimension {
                expected: ns * nt,
                got: rhs.len(),
            });
        }
        let fact = self.fact;
        let kx = &self.sys.spatial.stiffness;

        // Step 2: s1 = (E⁻¹ C ⊗ I) f.
        let f: Vec<C64> = rhs.iter().map(|&v| C64::from(v)).collect();
        let mut s = temporal_apply(&self.g, &f, ns);

        // Step 3: backward block substitution on (B ⊗ K_x - I ⊗ M_x) s2 = s1.
        let mut ky = vec![C64::new(0.0, 0.0); ns * nt];
        for k in (0..nt).rev() {
            let rhs = &mut s[k * ns..(k + 1) * ns];
            for j in k + 1..nt {
                let bkj = fact.b[(k, j)];
                if bkj == C64::new(0.0, 0.0) {
                    continue;
                }
                let y = &ky[j * ns..(j + 1) * ns];
                for (r, &v) in rhs.iter_mut().zip(y) {
                    *r -= bkj * v;
                }
            }
            let mu = fact.b[(k, k)];
            self.block_solve(k, mu, rhs)?;
            kx.matvec_into(rhs, &mut ky[k * ns..(k + 1) * ns]);
        }

        // Step 4: x = (D ⊗ I) s2.
        Ok(temporal_apply(&fact.d, &s, ns))
    }

    /// `(μ K_x - M_x) x = b` in place, reusing a cached factor when `μ` or
    /// its conjugate has been seen.
    fn block_solve(&mut self, k: usize, mu: C64, rhs: &mut [C64]) -> Result<()> {
        let tol = SHARE_TOLERANCE * mu.norm().max(1.0);
        let pair_tol = PAIR_TOLERANCE * mu.norm().max(1.0);
        if let Some((_, f)) = self.cache.iter().find(|(key, _)| (*key - mu).norm() <= tol) {
            f.solve_in_place(rhs);
            return Ok(());
        }
        if let Some((_, f)) = self
            .cache
            .iter()
            .find(|(key, _)| (key.conj() - mu).norm() <= pair_tol)
        {
            // conj(μ̄ K - M) = μ K - M up to the pairing tolerance; the
            // conjugated factor drives a short iterative refinement.
            let b = rhs.to_vec();
            let bn = norm2(&b);
            conj_solve(f, rhs);
            let mut last = f64::INFINITY;
            for _ in 0..REFINEMENT_STEPS {
                let mut dx = self.blocks.residual(mu, rhs, &b);
                let r = norm2(&dx);
                // Done, or stalled at the rounding floor.
                if r <= REFINEMENT_TOLERANCE * bn || r > 0.5 * last {
                    break;
                }
                last = r;
                conj_solve(f, &mut dx);
                rhs.iter_mut().zip(&dx).for_each(|(x, d)| *x += *d);
            }
            return Ok(());
        }
        let f = self.blocks.factor(k, mu)?;
        f.solve_in_place(rhs);
        self.cache.push((mu, f));
        Ok(())
    }
}

/// Factorizes and solves, falling back to the dense oracle when `K_t` is
/// numerically singular and the system fits under `dense_cap`.
pub fn solve_system(sys: &SpaceTimeSystem, dense_cap: usize) -> Result<SolveReport> {
    match factorize_temporal(&sys.temporal.stiffness, sys.stabilized_mass()) {
        Ok(fact) => solve(sys, &fact),
        Err(Error::Factorization(msg)) => {
            if sys.n_dof() > dense_cap {
                return Err(Error::Factorization(msg));
            }
            let solution = solve_dense_oracle(sys, dense_cap)?;
            let relative_residual = relative_residual(sys, &solution)?;
            Ok(SolveReport {
                solution,
                relative_residual,
                imag_discard_norm: 0.0,
                flops_estimate: system_flops(sys),
                wall_time: None,
                spatial_factorizations: 0,
                dense_fallback: true,
            })
        }
        Err(e) => Err(e),
    }
}

/// Dense LU with partial pivoting on the explicitly expanded operator.
pub fn solve_dense_oracle(sys: &SpaceTimeSystem, cap: usize) -> Result<Vec<f64>> {
    let a = sys.assemble_dense(cap.min(DEFAULT_DENSE_CAP.max(cap)))?;
    let lu = Lu::new(&a, 0.0)?;
    Ok(lu.solve(&sys.rhs))
}

/// `‖A x - f‖₂ / ‖f‖₂`, or `‖A x‖₂` when `f = 0`.
pub fn relative_residual(sys: &SpaceTimeSystem, x: &[f64]) -> Result<f64> {
    let ax = sys.apply_operator(x)?;
    let r: Vec<f64> = ax.iter().zip(&sys.rhs).map(|(a, b)| a - b).collect();
    let fnorm = norm2(&sys.rhs);
    Ok(if fnorm > 0.0 {
        norm2(&r) / fnorm
    } else {
        norm2(&r)
    })
}

/// Predicted operation count of the factorization and solve.
pub fn flops_model(n_s: usize, n_t: usize, p: usize, d: usize) -> u64 {
    let (ns, nt, p) = (n_s as f64, n_t as f64, p as f64);
    let c1 = if d <= 1 {
        ns * (p + 1.0) * (p + 1.0)
    } else {
        p * p * p * ns.powf(1.5) + ns * (p + 1.0) * (p + 1.0)
    };
    let c2 = ns * (2.0 * p + 1.0).powi(d.max(1) as i32);
    let total = nt * nt * nt
        + nt * nt * p
        + nt * p * p
        + ns * nt * p
        + ns * nt * nt
        + c1 * nt
        + c2 * nt * nt;
    total.round() as u64
}

/// [`flops_model`] for the sizes of `sys`.
pub fn system_flops(sys: &SpaceTimeSystem) -> u64 {
    flops_model(
        sys.n_s(),
        sys.n_t(),
        sys.spatial.degree(),
        sys.spatial.dim(),
    )
}

/// `E⁻¹ X` for upper triangular `E`.
fn upper_solve_matrix(e: &DenseMatrix<C64>, x: &DenseMatrix<C64>) -> DenseMatrix<C64> {
    let n = e.rows();
    let mut y = x.clone();
    for j in 0..x.cols() {
        for i in (0..n).rev() {
            let mut s = y[(i, j)];
            for r in i + 1..n {
                s -= e[(i, r)] * y[(r, j)];
            }
            y[(i, j)] = s / e[(i, i)];
        }
    }
    y
}

/// `(G ⊗ I_ns) v` on space-fastest vectors.
fn temporal_apply(g: &DenseMatrix<C64>, v: &[C64], ns: usize) -> Vec<C64> {
    let nt = g.rows();
    let mut out = vec![C64::new(0.0, 0.0); ns * g.rows()];
    for i in 0..nt {
        let dst = &mut out[i * ns..(i + 1) * ns];
        for j in 0..g.cols() {
            let gij = g[(i, j)];
            if gij == C64::new(0.0, 0.0) {
                continue;
            }
            for (o, &x) in dst.iter_mut().zip(&v[j * ns..(j + 1) * ns]) {
                *o += gij * x;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{SeparableForcing, Stabilization};
    use crate::system::{build_system, DiscretizationConfig};

    fn rhs_system(cfg: &DiscretizationConfig) -> SpaceTimeSystem {
        let sys = build_system(cfg, &SeparableForcing::zero()).unwrap();
        let n = sys.n_dof();
        let rhs = (0..n).map(|i| ((i * 7 + 3) % 11) as f64 - 5.0).collect();
        sys.with_rhs(rhs).unwrap()
    }

    #[test]
    fn scalar_pencil() {
        let kt = DenseMatrix::from_row_major(1, 1, vec![2.0]);
        let s = DenseMatrix::from_row_major(1, 1, vec![3.0]);
        let f = factorize_temporal(&kt, &s).unwrap();
        assert!((f.b[(0, 0)] - C64::new(1.5, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn singular_kt_is_reported() {
        let kt = DenseMatrix::from_row_major(2, 2, vec![1.0, 2.0, 2.0, 4.0]);
        let s = DenseMatrix::identity(2);
        assert!(matches!(
            factorize_temporal(&kt, &s),
            Err(Error::Factorization(_))
        ));
    }

    #[test]
    fn solve_matches_dense_small() {
        let mut cfg = DiscretizationConfig::uniform(1, 2, 8, Stabilization::IgaPenalty);
        cfg.elements_time = 4;
        let sys = rhs_system(&cfg);
        let rep = solve_system(&sys, DEFAULT_DENSE_CAP).unwrap();
        let dense = solve_dense_oracle(&sys, DEFAULT_DENSE_CAP).unwrap();
        let scale = dense.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let err = rep
            .solution
            .iter()
            .zip(&dense)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(err <= 1e-8 * scale, "err {err}");
        assert!(rep.relative_residual <= 1e-10);
        assert!(rep.imag_discard_norm <= 1e-8);
        assert!(!rep.dense_fallback);
    }

    #[test]
    fn flops_model_growth_and_monotonicity() {
        let a = flops_model(900, 33, 2, 2) as f64;
        let b = flops_model(3600, 65, 2, 2) as f64;
        assert!(b / a <= 16.5);
        assert!(flops_model(10, 3, 2, 1) <= flops_model(11, 3, 2, 1));
        assert!(flops_model(10, 3, 2, 1) <= flops_model(10, 4, 2, 1));
        assert!(flops_model(10, 3, 2, 1) <= flops_model(10, 3, 3, 1));
    }
}
