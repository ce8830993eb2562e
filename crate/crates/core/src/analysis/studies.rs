use alloc::string::String;
use alloc::vec::Vec;

use super::cases::ManufacturedCase;
use super::norms::{
    error_norms_final_time, error_norms_spacetime, final_time_slice, spatial_errors,
    FinalTimeErrors, SpaceTimeErrors,
};
use crate::assembly::Stabilization;
use crate::linalg::norm_inf;
use crate::solver::{
    algorithm1, factorize_temporal, relative_residual, solve_dense_oracle, solve_system,
    system_flops,
};
use crate::system::{build_system, DiscretizationConfig, DEFAULT_DENSE_CAP};
use crate::{Error, Result};

/// Monotonic clock in seconds, supplied by callers that have one.
pub type Clock = fn() -> f64;

/// Options shared by every study cell.
#[derive(Debug, Clone, Copy)]
pub struct CellOptions {
    pub dense_cap: usize,
    /// Also solve with the dense oracle when the system fits under `dense_cap`.
    pub crosscheck_dense: bool,
    pub clock: Option<Clock>,
}

impl Default for CellOptions {
    fn default() -> Self {
        Self {
            dense_cap: DEFAULT_DENSE_CAP,
            crosscheck_dense: false,
            clock: None,
        }
    }
}

/// Everything measured for one discretization.
#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub case: String,
    pub config: DiscretizationConfig,
    pub n_s: usize,
    pub n_t: usize,
    pub n_dof: usize,
    pub errors: SpaceTimeErrors,
    pub final_errors: FinalTimeErrors,
    /// Final-time errors recomputed from the last coefficient column.
    pub final_errors_slice: FinalTimeErrors,
    pub relative_residual: f64,
    pub imag_discard_norm: f64,
    pub flops_estimate: u64,
    pub spatial_factorizations: usize,
    pub dense_fallback: bool,
    /// Relative ∞-norm distance to the dense oracle, when requested.
    pub dense_discrepancy: Option<f64>,
    /// Seconds spent in factorization and solve, when a clock was given.
    pub solve_time: Option<f64>,
}

impl CellResult {
    pub fn h(&self) -> f64 {
        self.config.length / self.config.elements_space as f64
    }
}

/// Build, solve and measure one configuration.
pub fn run_cell(
    case: &ManufacturedCase,
    cfg: &DiscretizationConfig,
    opts: &CellOptions,
) -> Result<CellResult> {
    if case.dim() != cfg.dim {
        return Err(Error::Dimension {
            expected: cfg.dim,
            got: case.dim(),
        });
    }
    let sys = build_system(cfg, &case.forcing)?;
    let start = opts.clock.map(|c| c());
    let rep = solve_system(&sys, opts.dense_cap)?;
    let solve_time = opts.clock.zip(start).map(|(c, s)| c() - s);
    let dense_discrepancy = if opts.crosscheck_dense && sys.n_dof() <= opts.dense_cap {
        let dense = solve_dense_oracle(&sys, opts.dense_cap)?;
        let diff: Vec<f64> = dense
            .iter()
            .zip(&rep.solution)
            .map(|(a, b)| a - b)
            .collect();
        Some(norm_inf(&diff) / norm_inf(&dense).max(f64::MIN_POSITIVE))
    } else {
        None
    };
    let errors = error_norms_spacetime(&rep.solution, &sys, case)?;
    let final_errors = error_norms_final_time(&rep.solution, &sys, case)?;
    let slice = final_time_slice(&rep.solution, &sys);
    let final_errors_slice = spatial_errors(&slice, &sys.spatial.spaces, case, cfg.final_time)?;
    Ok(CellResult {
        case: case.name.clone(),
        config: cfg.clone(),
        n_s: sys.n_s(),
        n_t: sys.n_t(),
        n_dof: sys.n_dof(),
        errors,
        final_errors,
        final_errors_slice,
        relative_residual: rep.relative_residual,
        imag_discard_norm: rep.imag_discard_norm,
        flops_estimate: rep.flops_estimate,
        spatial_factorizations: rep.spatial_factorizations,
        dense_fallback: rep.dense_fallback,
        dense_discrepancy,
        solve_time,
    })
}

/// `log₂(e_coarse / e_fine) / log₂(h_coarse / h_fine)`.
pub fn observed_rate(e_coarse: f64, e_fine: f64, h_coarse: f64, h_fine: f64) -> f64 {
    (e_coarse / e_fine).log2() / (h_coarse / h_fine).log2()
}

/// Observed rates against the previous (coarser) row of the same degree.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rates {
    pub l2l2: f64,
    pub h1mix: f64,
    pub x: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub cell: CellResult,
    pub rates: Option<Rates>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceTable {
    /// Orders cells by degree, then by decreasing `h`, and attaches rates
    /// between consecutive refinements.
    pub fn from_cells(mut cells: Vec<CellResult>) -> Self {
        cells.sort_by(|a, b| {
            (a.config.degree_space, a.config.elements_space)
                .cmp(&(b.config.degree_space, b.config.elements_space))
        });
        let mut rows: Vec<ConvergenceRow> = Vec::with_capacity(cells.len());
        for cell in cells {
            let rates = rows
                .last()
                .filter(|prev| prev.cell.config.degree_space == cell.config.degree_space)
                .map(|prev| {
                    let (a, b) = (&prev.cell, &cell);
                    let (ha, hb) = (a.h(), b.h());
                    Rates {
                        l2l2: observed_rate(a.errors.l2l2, b.errors.l2l2, ha, hb),
                        h1mix: observed_rate(a.errors.h1mix, b.errors.h1mix, ha, hb),
                        x: observed_rate(a.errors.x, b.errors.x, ha, hb),
                    }
                });
            rows.push(ConvergenceRow { cell, rates });
        }
        Self { rows }
    }

    /// Rates between the two finest meshes of degree `p`.
    pub fn finest_rates(&self, p: usize) -> Option<Rates> {
        self.rows
            .iter()
            .rev()
            .find(|r| r.cell.config.degree_space == p)
            .and_then(|r| r.rates)
    }

    pub fn degree_rows(&self, p: usize) -> impl Iterator<Item = &ConvergenceRow> {
        self.rows
            .iter()
            .filter(move |r| r.cell.config.degree_space == p)
    }
}

/// Uniform `h_s = h_t = length / n` configurations at maximal regularity.
pub fn plan_convergence(
    dim: usize,
    degrees: &[usize],
    elements: &[usize],
    mode: Stabilization,
) -> Vec<DiscretizationConfig> {
    let mut out = Vec::new();
    for &p in degrees {
        for &n in elements {
            out.push(DiscretizationConfig::uniform(dim, p, n, mode));
        }
    }
    out
}

pub fn convergence_study(
    case: &ManufacturedCase,
    degrees: &[usize],
    elements: &[usize],
    mode: Stabilization,
    opts: &CellOptions,
) -> Result<ConvergenceTable> {
    let cells = plan_convergence(case.dim(), degrees, elements, mode)
        .iter()
        .map(|cfg| run_cell(case, cfg, opts))
        .collect::<Result<Vec<_>>>()?;
    Ok(ConvergenceTable::from_cells(cells))
}

/// Temporal smoothness relative to the degree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TimeRegularity {
    /// `C^{p-1}`
    Maximal,
    /// `C^{p-2}`
    Reduced,
    /// `C^0`
    Continuous,
}

impl TimeRegularity {
    pub const ALL: [TimeRegularity; 3] = [Self::Maximal, Self::Reduced, Self::Continuous];

    pub fn value(self, p: usize) -> usize {
        match self {
            Self::Maximal => p.saturating_sub(1),
            Self::Reduced => p.saturating_sub(2),
            Self::Continuous => 0,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Self::Maximal => "C^{p-1}",
            Self::Reduced => "C^{p-2}",
            Self::Continuous => "C^0",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "max" | "p-1" | "C^{p-1}" => Some(Self::Maximal),
            "p-2" | "C^{p-2}" => Some(Self::Reduced),
            "0" | "c0" | "C^0" => Some(Self::Continuous),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stability {
    Stable,
    Unstable,
}

impl Stability {
    pub fn name(self) -> &'static str {
        match self {
            Self::Stable => "stable",
            Self::Unstable => "unstable",
        }
    }
}

/// Blow-up threshold of the classifier.
pub const BLOWUP_LIMIT: f64 = 1e3;
/// Growth from the coarsest to the finest mesh that counts as unstable.
pub const GROWTH_LIMIT: f64 = 10.0;

/// `errors` ordered from the coarsest to the finest mesh. Unstable when the
/// finest error exceeds ten times the coarsest, when any error exceeds 10³,
/// or when any entry is not finite (a failed solve).
pub fn classify(errors: &[f64]) -> Stability {
    let bad = errors.iter().any(|e| !e.is_finite() || *e > BLOWUP_LIMIT);
    match (errors.first(), errors.last()) {
        _ if bad => Stability::Unstable,
        (Some(&first), Some(&last)) if last > GROWTH_LIMIT * first => Stability::Unstable,
        _ => Stability::Stable,
    }
}

/// Reference behaviour: penalty with maximal temporal smoothness and
/// projection with continuous splines are stable; everything else is not.
pub fn expected_stability(mode: Stabilization, reg: TimeRegularity, p: usize) -> Stability {
    let r = reg.value(p);
    match mode {
        Stabilization::IgaPenalty if r + 1 == p => Stability::Stable,
        Stabilization::FemProjection if r == 0 => Stability::Stable,
        _ => Stability::Unstable,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityRow {
    pub mode: Stabilization,
    pub degree: usize,
    pub regularity_space: usize,
    pub regularity_time: TimeRegularity,
    pub elements: Vec<usize>,
    /// `None` where the solve failed.
    pub errors: Vec<Option<SpaceTimeErrors>>,
    pub classification: Stability,
    pub expected: Stability,
}

impl StabilityRow {
    /// X-norm errors along the sweep, infinite for failed solves.
    pub fn x_errors(&self) -> Vec<f64> {
        self.errors
            .iter()
            .map(|e| e.map_or(f64::INFINITY, |e| e.x))
            .collect()
    }

    pub fn matches_expectation(&self) -> bool {
        self.classification == self.expected
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub rows: Vec<StabilityRow>,
}

impl StabilityReport {
    pub fn all_match(&self) -> bool {
        self.rows.iter().all(StabilityRow::matches_expectation)
    }
}

/// The configuration of one stability cell.
pub fn stability_config(
    dim: usize,
    p: usize,
    n: usize,
    mode: Stabilization,
    reg: TimeRegularity,
) -> DiscretizationConfig {
    let mut cfg = DiscretizationConfig::uniform(dim, p, n, mode);
    cfg.regularity_time = Some(reg.value(p));
    cfg
}

/// Collects per-cell outcomes (same order as `elements`) into a row.
pub fn stability_row(
    mode: Stabilization,
    p: usize,
    reg: TimeRegularity,
    elements: &[usize],
    outcomes: Vec<Option<SpaceTimeErrors>>,
) -> StabilityRow {
    let mut row = StabilityRow {
        mode,
        degree: p,
        regularity_space: p - 1,
        regularity_time: reg,
        elements: elements.to_vec(),
        errors: outcomes,
        classification: Stability::Stable,
        expected: expected_stability(mode, reg, p),
    };
    row.classification = classify(&row.x_errors());
    row
}

pub fn stability_study(
    case: &ManufacturedCase,
    p: usize,
    elements: &[usize],
    modes: &[Stabilization],
    regularities: &[TimeRegularity],
    opts: &CellOptions,
) -> Result<StabilityReport> {
    let mut rows = Vec::new();
    for &mode in modes {
        for &reg in regularities {
            let outcomes = elements
                .iter()
                .map(|&n| {
                    let cfg = stability_config(case.dim(), p, n, mode, reg);
                    run_cell(case, &cfg, opts).ok().map(|c| c.errors)
                })
                .collect();
            rows.push(stability_row(mode, p, reg, elements, outcomes));
        }
    }
    Ok(StabilityReport { rows })
}

/// Errors of the unstabilized scheme along a temporal refinement sweep at a
/// fixed spatial mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct CflSweep {
    pub h_s: f64,
    pub h_t_max: f64,
    /// `(h_t, X-norm error, classification)`, increasing `h_t`.
    pub points: Vec<(f64, f64, Stability)>,
    /// Largest `h_t` below the first unstable one, and that unstable `h_t`.
    pub bracket: Option<(f64, f64)>,
}

impl CflSweep {
    /// Geometric mean of the bracket.
    pub fn empirical_boundary(&self) -> Option<f64> {
        self.bracket.map(|(a, b)| (a * b).sqrt())
    }
}

/// Runs the unstabilized scheme at fixed `n_space` for every entry of
/// `time_elements`. Each point is classified against the error at the
/// smallest `h_t` with the same thresholds as [`classify`].
pub fn cfl_sweep(
    case: &ManufacturedCase,
    p: usize,
    n_space: usize,
    time_elements: &[usize],
    opts: &CellOptions,
) -> Result<CflSweep> {
    let mut cfg = DiscretizationConfig::uniform(case.dim(), p, n_space, Stabilization::None);
    let sys = build_system(&cfg, &case.forcing)?;
    let report = crate::system::cfl_check(
        &sys.spatial,
        p,
        sys.temporal.h_t,
        cfg.effective_regularity_time(),
    )?;
    let mut pts: Vec<(f64, f64)> = Vec::new();
    for &nt in time_elements {
        cfg.elements_time = nt;
        let h_t = cfg.final_time / nt as f64;
        let err = run_cell(case, &cfg, opts).map_or(f64::INFINITY, |c| c.errors.x);
        pts.push((h_t, err));
    }
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let reference = pts.first().map_or(f64::NAN, |p| p.1);
    let points: Vec<(f64, f64, Stability)> = pts
        .iter()
        .map(|&(h, e)| {
            let unstable = !e.is_finite() || e > BLOWUP_LIMIT || e > GROWTH_LIMIT * reference;
            (
                h,
                e,
                if unstable {
                    Stability::Unstable
                } else {
                    Stability::Stable
                },
            )
        })
        .collect();
    let first_bad = points.iter().position(|p| p.2 == Stability::Unstable);
    let bracket = match first_bad {
        Some(i) if i > 0 => Some((points[i - 1].0, points[i].0)),
        _ => None,
    };
    Ok(CflSweep {
        h_s: sys.spatial.h_s(),
        h_t_max: report.h_t_max,
        points,
        bracket,
    })
}

/// Mesh choice for a fixed total number of unknowns.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DofMatch {
    pub elements: usize,
    pub n_s: usize,
    pub n_t: usize,
    pub n_dof: usize,
}

/// Element count `n` (`h_s = h_t = 1/n`) whose `N_dof` is nearest `target`;
/// ties go to the smaller mesh.
pub fn dof_matched_elements(
    dim: usize,
    p: usize,
    reg_time: usize,
    target: usize,
) -> Result<DofMatch> {
    let mut best: Option<DofMatch> = None;
    for n in 1..=4096usize {
        let mut cfg = DiscretizationConfig::uniform(dim, p, n, Stabilization::None);
        cfg.regularity_time = Some(reg_time);
        let Ok((n_s, n_t)) = cfg.sizes() else {
            continue;
        };
        let m = DofMatch {
            elements: n,
            n_s,
            n_t,
            n_dof: n_s * n_t,
        };
        let better = best.is_none_or(|b| m.n_dof.abs_diff(target) < b.n_dof.abs_diff(target));
        if better {
            best = Some(m);
        }
        if m.n_dof > 2 * target.max(1) {
            break;
        }
    }
    best.ok_or_else(|| Error::Parameter("no mesh reaches the requested size".into()))
}

/// One side of the equal-size comparison between the two stabilizations.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub degree: usize,
    pub mode: Stabilization,
    pub regularity_time: usize,
    pub mesh: DofMatch,
    pub cell: CellResult,
}

/// Penalty with maximal smoothness against projection with `C^0` time
/// splines, each at the mesh whose size is nearest `target`.
pub fn compare_dof_matched(
    case: &ManufacturedCase,
    degrees: &[usize],
    target: usize,
    opts: &CellOptions,
) -> Result<Vec<ComparisonRow>> {
    let mut rows = Vec::new();
    for &p in degrees {
        for (mode, reg) in [
            (Stabilization::IgaPenalty, p - 1),
            (Stabilization::FemProjection, 0),
        ] {
            let mesh = dof_matched_elements(case.dim(), p, reg, target)?;
            let mut cfg = DiscretizationConfig::uniform(case.dim(), p, mesh.elements, mode);
            cfg.regularity_time = Some(reg);
            let cell = run_cell(case, &cfg, opts)?;
            rows.push(ComparisonRow {
                degree: p,
                mode,
                regularity_time: reg,
                mesh,
                cell,
            });
        }
    }
    Ok(rows)
}

/// One refinement level of the timing study.
#[derive(Debug, Clone, PartialEq)]
pub struct TimingRow {
    pub degree: usize,
    pub elements: usize,
    pub n_s: usize,
    pub n_t: usize,
    pub n_dof: usize,
    /// Median over the runs, in seconds.
    pub wall_time: f64,
    pub growth_factor: Option<f64>,
    pub flops_estimate: u64,
    pub flops_growth: Option<f64>,
    pub relative_residual: f64,
}

/// Times the factorization and block solve (assembly excluded) for each
/// level, taking the median of `runs` repetitions.
pub fn timing_study(
    case: &ManufacturedCase,
    degrees: &[usize],
    elements: &[usize],
    runs: usize,
    clock: Clock,
) -> Result<Vec<TimingRow>> {
    if elements.len() < 3 {
        return Err(Error::Parameter(
            "timing study needs at least 3 refinement levels".into(),
        ));
    }
    let mut out: Vec<TimingRow> = Vec::new();
    for &p in degrees {
        let mut prev: Option<(f64, u64)> = None;
        for &n in elements {
            let cfg = DiscretizationConfig::uniform(case.dim(), p, n, Stabilization::IgaPenalty);
            let sys = build_system(&cfg, &case.forcing)?;
            let mut times = Vec::with_capacity(runs.max(1));
            let mut solution = Vec::new();
            for _ in 0..runs.max(1) {
                let t0 = clock();
                let fact = factorize_temporal(&sys.temporal.stiffness, sys.stabilized_mass())?;
                let raw = algorithm1(&sys, &fact)?;
                times.push(clock() - t0);
                solution = raw.solution;
            }
            let wall_time = median(&mut times);
            let flops = system_flops(&sys);
            let relative_residual = relative_residual(&sys, &solution)?;
            out.push(TimingRow {
                degree: p,
                elements: n,
                n_s: sys.n_s(),
                n_t: sys.n_t(),
                n_dof: sys.n_dof(),
                wall_time,
                growth_factor: prev.map(|(t, _)| wall_time / t),
                flops_estimate: flops,
                flops_growth: prev.map(|(_, f)| flops as f64 / f as f64),
                relative_residual,
            });
            prev = Some((wall_time, flops));
        }
    }
    Ok(out)
}

pub fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
