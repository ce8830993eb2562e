//! Study drivers: build the cell list from a [`StudyConfig`], run the cells
//! (in parallel when asked), and lay the results out as artifacts.

use std::fmt::Write as _;

use rayon::prelude::*;

use bihw_core::analysis::{
    compare_dof_matched, run_cell, stability_row, timing_study, CellOptions, CellResult,
    ConvergenceTable, ManufacturedCase, Rates,
};
use bihw_core::assembly::Stabilization;
use bihw_core::system::{build_system, cfl_check, DiscretizationConfig};

use crate::config::{regularity_token, StudyConfig};
use crate::output::{num, opt_num, Artifacts, DataFile, Table};
use crate::{clock, CliError};

const CELL_COLUMNS: &[&str] = &[
    "case",
    "dim",
    "p_s",
    "p_t",
    "reg_s",
    "reg_t",
    "mode",
    "delta",
    "n_el_s",
    "n_el_t",
    "h_s",
    "h_t",
    "n_s",
    "n_t",
    "n_dof",
    "err_l2l2",
    "err_h1mix",
    "err_x",
    "rate_l2l2",
    "rate_h1mix",
    "rate_x",
    "final_l2",
    "final_h1",
    "final_h2",
    "relative_residual",
    "imag_discard",
    "flops_estimate",
    "spatial_factorizations",
    "dense_fallback",
    "dense_discrepancy",
    "wall_time",
];

fn discretization(
    cfg: &StudyConfig,
    dim: usize,
    p: usize,
    n: usize,
    mode: Stabilization,
) -> DiscretizationConfig {
    let mut d = DiscretizationConfig::uniform(dim, p, n, mode);
    d.regularity_space = cfg.regularity_space;
    d.regularity_time = cfg.regularity_time;
    d.delta = cfg.delta;
    d.final_time = cfg.final_time;
    d.elements_time = ((cfg.final_time * n as f64).round() as usize).max(1);
    d
}

fn cell_row(c: &CellResult, rates: Option<Rates>) -> Vec<String> {
    let d = &c.config;
    vec![
        c.case.clone(),
        d.dim.to_string(),
        d.degree_space.to_string(),
        d.degree_time.to_string(),
        d.effective_regularity_space().to_string(),
        d.effective_regularity_time().to_string(),
        d.stabilization.name().to_string(),
        if d.stabilization == Stabilization::IgaPenalty {
            num(d.effective_delta())
        } else {
            String::new()
        },
        d.elements_space.to_string(),
        d.elements_time.to_string(),
        num(d.length / d.elements_space as f64),
        num(d.final_time / d.elements_time as f64),
        c.n_s.to_string(),
        c.n_t.to_string(),
        c.n_dof.to_string(),
        num(c.errors.l2l2),
        num(c.errors.h1mix),
        num(c.errors.x),
        opt_num(rates.map(|r| r.l2l2)),
        opt_num(rates.map(|r| r.h1mix)),
        opt_num(rates.map(|r| r.x)),
        num(c.final_errors.l2),
        num(c.final_errors.h1),
        num(c.final_errors.h2),
        num(c.relative_residual),
        num(c.imag_discard_norm),
        c.flops_estimate.to_string(),
        c.spatial_factorizations.to_string(),
        c.dense_fallback.to_string(),
        opt_num(c.dense_discrepancy),
        opt_num(c.solve_time),
    ]
}

fn norm_files() -> [DataFile; 3] {
    [
        DataFile::new("l2l2", ("h", "relative_error")),
        DataFile::new("h1mix", ("h", "relative_error")),
        DataFile::new("x", ("h", "relative_error")),
    ]
}

fn push_norms(files: &mut [DataFile; 3], label: &str, c: &CellResult) {
    let h = c.h();
    files[0].series(label).push((h, c.errors.l2l2));
    files[1].series(label).push((h, c.errors.h1mix));
    files[2].series(label).push((h, c.errors.x));
}

fn header(cfg: &StudyConfig, opts: &CellOptions) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "study = {}", cfg.kind.name());
    let _ = writeln!(s, "case = {}", cfg.case);
    let _ = writeln!(s, "dense_cap = {}", opts.dense_cap);
    let _ = writeln!(s, "jobs = {}", cfg.jobs);
    s
}

fn run_parallel<T: Send, R: Send>(
    jobs: usize,
    items: Vec<T>,
    f: impl Fn(T) -> R + Sync + Send,
) -> Result<Vec<R>, CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Config(format!("cannot start {jobs} worker threads: {e}")))?;
    Ok(pool.install(|| items.into_par_iter().map(f).collect()))
}

pub fn solve(
    cfg: &StudyConfig,
    case: &ManufacturedCase,
    opts: &CellOptions,
) -> Result<Artifacts, CliError> {
    let d = discretization(cfg, case.dim(), cfg.degrees[0], cfg.elements[0], cfg.mode);
    let cell = run_cell(case, &d, opts)?;
    let sys = build_system(&d, &case.forcing)?;
    let cfl = cfl_check(
        &sys.spatial,
        d.degree_time,
        sys.temporal.h_t,
        d.effective_regularity_time(),
    )?;

    let mut table = Table::new("solve", CELL_COLUMNS);
    table.push(cell_row(&cell, None));
    let mut files = norm_files();
    push_norms(&mut files, &format!("p={}", d.degree_space), &cell);

    let mut s = header(cfg, opts);
    let _ = writeln!(s, "mode = {}", d.stabilization.name());
    let _ = writeln!(s, "degree = {}", d.degree_space);
    let _ = writeln!(s, "regularity_space = {}", d.effective_regularity_space());
    let _ = writeln!(s, "regularity_time = {}", d.effective_regularity_time());
    let _ = writeln!(s, "elements_space = {}", d.elements_space);
    let _ = writeln!(s, "elements_time = {}", d.elements_time);
    let _ = writeln!(s, "n_dof = {}", cell.n_dof);
    let _ = writeln!(s, "relative_residual = {}", num(cell.relative_residual));
    let _ = writeln!(s, "imag_discard_norm = {}", num(cell.imag_discard_norm));
    let _ = writeln!(s, "flops_estimate = {}", cell.flops_estimate);
    let _ = writeln!(
        s,
        "spatial_factorizations = {}",
        cell.spatial_factorizations
    );
    let _ = writeln!(s, "dense_fallback = {}", cell.dense_fallback);
    if let Some(x) = cell.dense_discrepancy {
        let _ = writeln!(s, "dense_discrepancy = {}", num(x));
    }
    let _ = writeln!(s, "wall_time = {}", opt_num(cell.solve_time));
    let _ = writeln!(s, "err_l2l2 = {}", num(cell.errors.l2l2));
    let _ = writeln!(s, "err_h1mix = {}", num(cell.errors.h1mix));
    let _ = writeln!(s, "err_x = {}", num(cell.errors.x));
    let _ = writeln!(s, "final_l2 = {}", num(cell.final_errors.l2));
    let _ = writeln!(s, "final_h1 = {}", num(cell.final_errors.h1));
    let _ = writeln!(s, "final_h2 = {}", num(cell.final_errors.h2));
    let _ = writeln!(s, "cfl_lambda_max = {}", num(cfl.lambda_max));
    let _ = writeln!(s, "cfl_rho = {}", cfl.rho);
    let _ = writeln!(s, "cfl_h_t_max = {}", num(cfl.h_t_max));
    let _ = writeln!(s, "cfl_h_t = {}", num(cfl.h_t));
    let _ = writeln!(s, "cfl_satisfied = {}", cfl.satisfied);
    let _ = writeln!(s, "cfl_advisory = {}", cfl.advisory);
    let _ = writeln!(s, "cfl_ratio_to_hs2 = {}", num(cfl.ratio_to_hs2));
    Ok(Artifacts {
        table,
        data: files.into(),
        summary: s,
    })
}

pub fn convergence(
    cfg: &StudyConfig,
    case: &ManufacturedCase,
    opts: &CellOptions,
) -> Result<Artifacts, CliError> {
    let mut plan = Vec::new();
    for &p in &cfg.degrees {
        for &n in &cfg.elements {
            plan.push(discretization(cfg, case.dim(), p, n, cfg.mode));
        }
    }
    let cells = run_parallel(cfg.jobs, plan, |d| run_cell(case, &d, opts))?
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;
    let tab = ConvergenceTable::from_cells(cells);

    let mut table = Table::new("convergence", CELL_COLUMNS);
    let mut files = norm_files();
    for row in &tab.rows {
        table.push(cell_row(&row.cell, row.rates));
        push_norms(
            &mut files,
            &format!("p={}", row.cell.config.degree_space),
            &row.cell,
        );
    }

    let mut s = header(cfg, opts);
    let _ = writeln!(s, "mode = {}", cfg.mode.name());
    for &p in &cfg.degrees {
        let rows: Vec<_> = tab.degree_rows(p).collect();
        let monotone = rows.windows(2).all(|w| {
            let (a, b) = (&w[0].cell.errors, &w[1].cell.errors);
            b.l2l2 < a.l2l2 && b.h1mix < a.h1mix && b.x < a.x
        });
        let max_residual = rows
            .iter()
            .map(|r| r.cell.relative_residual)
            .fold(0.0, f64::max);
        let _ = writeln!(s, "p{p}_errors_decrease = {monotone}");
        let _ = writeln!(s, "p{p}_max_relative_residual = {}", num(max_residual));
        if let Some(r) = tab.finest_rates(p) {
            let _ = writeln!(s, "p{p}_finest_rate_l2l2 = {}", num(r.l2l2));
            let _ = writeln!(s, "p{p}_finest_rate_h1mix = {}", num(r.h1mix));
            let _ = writeln!(s, "p{p}_finest_rate_x = {}", num(r.x));
        }
    }
    Ok(Artifacts {
        table,
        data: files.into(),
        summary: s,
    })
}

const STABILITY_COLUMNS: &[&str] = &[
    "case",
    "p",
    "mode",
    "reg_s",
    "regularity",
    "reg_t",
    "n_el",
    "h",
    "status",
    "err_l2l2",
    "err_h1mix",
    "err_x",
    "classification",
    "expected",
    "matches",
];

pub fn stability(
    cfg: &StudyConfig,
    case: &ManufacturedCase,
    opts: &CellOptions,
) -> Result<Artifacts, CliError> {
    let mut plan = Vec::new();
    for &p in &cfg.degrees {
        for &mode in &cfg.modes {
            for &reg in &cfg.regularities {
                for &n in &cfg.elements {
                    plan.push((p, mode, reg, n));
                }
            }
        }
    }
    let outcomes = run_parallel(cfg.jobs, plan.clone(), |(p, mode, reg, n)| {
        let mut d = discretization(cfg, case.dim(), p, n, mode);
        d.regularity_time = Some(reg.value(p));
        run_cell(case, &d, opts).map(|c| c.errors)
    })?;

    let mut table = Table::new("stability", STABILITY_COLUMNS);
    let mut files = norm_files();
    let mut s = header(cfg, opts);
    let _ = writeln!(s, "# mode regularity p classification expected matches");
    let mut all_match = true;
    for (chunk, plan_chunk) in outcomes
        .chunks(cfg.elements.len())
        .zip(plan.chunks(cfg.elements.len()))
    {
        let (p, mode, reg, _) = plan_chunk[0];
        // Meshes too coarse to carry any unknown are left out of the sweep.
        let (elements, errs): (Vec<usize>, Vec<_>) = cfg
            .elements
            .iter()
            .zip(chunk)
            .filter(|(_, r)| !matches!(r, Err(bihw_core::Error::Parameter(_))))
            .map(|(&n, r)| (n, r.as_ref().ok().copied()))
            .unzip();
        let row = stability_row(mode, p, reg, &elements, errs);
        all_match &= row.matches_expectation();
        let label = format!("p={p} mode={} reg={}", mode.name(), regularity_token(reg));
        for (&n, outcome) in cfg.elements.iter().zip(chunk) {
            let h = 1.0 / n as f64;
            let (status, e) = match outcome {
                Ok(e) => ("ok".to_string(), Some(*e)),
                Err(err @ bihw_core::Error::Parameter(_)) => {
                    (format!("skipped: {err}").replace(',', ";"), None)
                }
                Err(err) => (format!("failed: {err}").replace(',', ";"), None),
            };
            table.push(vec![
                case.name.clone(),
                p.to_string(),
                mode.name().into(),
                cfg.regularity_space.unwrap_or(p - 1).to_string(),
                row.regularity_time.label().into(),
                reg.value(p).to_string(),
                n.to_string(),
                num(h),
                status,
                opt_num(e.map(|e| e.l2l2)),
                opt_num(e.map(|e| e.h1mix)),
                opt_num(e.map(|e| e.x)),
                row.classification.name().into(),
                row.expected.name().into(),
                row.matches_expectation().to_string(),
            ]);
            let err = e.unwrap_or(bihw_core::analysis::SpaceTimeErrors {
                l2l2: f64::NAN,
                h1mix: f64::NAN,
                x: f64::NAN,
            });
            files[0].series(label.clone()).push((h, err.l2l2));
            files[1].series(label.clone()).push((h, err.h1mix));
            files[2].series(label.clone()).push((h, err.x));
        }
        let _ = writeln!(
            s,
            "{} {} {} {} {} {}",
            mode.name(),
            reg.label(),
            p,
            row.classification.name(),
            row.expected.name(),
            row.matches_expectation()
        );
    }
    let _ = writeln!(s, "all_rows_match = {all_match}");
    Ok(Artifacts {
        table,
        data: files.into(),
        summary: s,
    })
}

const TIMING_COLUMNS: &[&str] = &[
    "case",
    "p",
    "n_el",
    "h",
    "n_s",
    "n_t",
    "n_dof",
    "flops_estimate",
    "flops_growth",
    "relative_residual",
    "wall_time",
    "wall_time_growth",
];

pub fn timing(
    cfg: &StudyConfig,
    case: &ManufacturedCase,
    opts: &CellOptions,
) -> Result<Artifacts, CliError> {
    let rows = timing_study(case, &cfg.degrees, &cfg.elements, cfg.runs, clock::now)?;
    let mut table = Table::new("timing", TIMING_COLUMNS);
    let mut wall = DataFile::new("wall_time", ("n_dof", "seconds"));
    let mut flops = DataFile::new("flops", ("n_dof", "flops_estimate"));
    let mut s = header(cfg, opts);
    let _ = writeln!(s, "runs = {}", cfg.runs);
    let _ = writeln!(s, "# p n_el n_dof wall_time growth flops_growth");
    for r in &rows {
        table.push(vec![
            case.name.clone(),
            r.degree.to_string(),
            r.elements.to_string(),
            num(1.0 / r.elements as f64),
            r.n_s.to_string(),
            r.n_t.to_string(),
            r.n_dof.to_string(),
            r.flops_estimate.to_string(),
            opt_num(r.flops_growth),
            num(r.relative_residual),
            num(r.wall_time),
            opt_num(r.growth_factor),
        ]);
        let label = format!("p={}", r.degree);
        wall.series(label.clone())
            .push((r.n_dof as f64, r.wall_time));
        flops
            .series(label)
            .push((r.n_dof as f64, r.flops_estimate as f64));
        let _ = writeln!(
            s,
            "{} {} {} {} {} {}",
            r.degree,
            r.elements,
            r.n_dof,
            num(r.wall_time),
            opt_num(r.growth_factor),
            opt_num(r.flops_growth)
        );
    }
    for &p in &cfg.degrees {
        let worst = rows
            .iter()
            .filter(|r| r.degree == p)
            .filter_map(|r| r.growth_factor)
            .fold(0.0, f64::max);
        let _ = writeln!(s, "p{p}_max_growth = {}", num(worst));
    }
    Ok(Artifacts {
        table,
        data: vec![wall, flops],
        summary: s,
    })
}

const COMPARE_COLUMNS: &[&str] = &[
    "case",
    "p",
    "mode",
    "reg_t",
    "n_el",
    "n_s",
    "n_t",
    "n_dof",
    "target_dof",
    "err_l2l2",
    "err_h1mix",
    "err_x",
    "final_l2",
    "final_h1",
    "final_h2",
    "relative_residual",
    "wall_time",
];

pub fn compare(
    cfg: &StudyConfig,
    case: &ManufacturedCase,
    opts: &CellOptions,
) -> Result<Artifacts, CliError> {
    let per_degree = run_parallel(cfg.jobs, cfg.degrees.clone(), |p| {
        compare_dof_matched(case, &[p], cfg.target_dof, opts)
    })?;
    let mut table = Table::new("compare", COMPARE_COLUMNS);
    let mut files = [
        DataFile::new("final_l2", ("p", "relative_error")),
        DataFile::new("final_h1", ("p", "relative_error")),
        DataFile::new("final_h2", ("p", "relative_error")),
    ];
    let mut s = header(cfg, opts);
    let _ = writeln!(s, "target_dof = {}", cfg.target_dof);
    let _ = writeln!(s, "# p mode reg_t n_el n_dof final_l2 final_h1 final_h2");
    for rows in per_degree {
        for r in rows? {
            let c = &r.cell;
            table.push(vec![
                case.name.clone(),
                r.degree.to_string(),
                r.mode.name().into(),
                r.regularity_time.to_string(),
                r.mesh.elements.to_string(),
                r.mesh.n_s.to_string(),
                r.mesh.n_t.to_string(),
                r.mesh.n_dof.to_string(),
                cfg.target_dof.to_string(),
                num(c.errors.l2l2),
                num(c.errors.h1mix),
                num(c.errors.x),
                num(c.final_errors.l2),
                num(c.final_errors.h1),
                num(c.final_errors.h2),
                num(c.relative_residual),
                opt_num(c.solve_time),
            ]);
            let p = r.degree as f64;
            files[0].series(r.mode.name()).push((p, c.final_errors.l2));
            files[1].series(r.mode.name()).push((p, c.final_errors.h1));
            files[2].series(r.mode.name()).push((p, c.final_errors.h2));
            let _ = writeln!(
                s,
                "{} {} {} {} {} {} {} {}",
                r.degree,
                r.mode.name(),
                r.regularity_time,
                r.mesh.elements,
                r.mesh.n_dof,
                num(c.final_errors.l2),
                num(c.final_errors.h1),
                num(c.final_errors.h2)
            );
        }
    }
    Ok(Artifacts {
        table,
        data: files.into(),
        summary: s,
    })
}
