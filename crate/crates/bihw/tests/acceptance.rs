//! End-to-end acceptance checks. Each test prints one `PASS` or `FAIL` line
//! (straight to stdout, so it shows even when output is captured) and then
//! asserts. All tests hold one lock so the timing check runs alone.

use std::io::Write as _;
use std::sync::Mutex;

use bihw::clock;
use bihw_core::analysis::{
    cfl_sweep, manufactured_case, stability_study, timing_study, CellOptions, ConvergenceTable,
    Stability, TimeRegularity,
};
use bihw_core::assembly::{
    assemble_gram_1d, assemble_gram_1d_with_points, assemble_spatial, assemble_temporal,
    SeparableForcing, Stabilization,
};
use bihw_core::linalg::DenseMatrix;
use bihw_core::solver::{factorize_temporal, relative_residual, solve};
use bihw_core::splines::{build_space, eval_basis, make_knot_vector, Constraint};
use bihw_core::system::{
    build_system, cfl_check, delta_lookup, rho_lookup, DiscretizationConfig, Rational,
    SpaceTimeSystem,
};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

static SERIAL: Mutex<()> = Mutex::new(());

fn report(criterion: u32, pass: bool, detail: &str) {
    let line = format!(
        "{} criterion {criterion}: {detail}\n",
        if pass { "PASS" } else { "FAIL" }
    );
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(line.as_bytes());
    let _ = out.flush();
}

fn to_na(m: &DenseMatrix<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(m.rows(), m.cols(), |i, j| m[(i, j)])
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

#[test]
fn criterion_1_constant_tables() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let rho = [
        (12, 1),
        (10, 1),
        (168, 17),
        (306, 31),
        (2349, 238),
        (7797, 790),
    ];
    let delta = [
        (1, 12),
        (1, 120),
        (17, 20160),
        (5, 58529),
        (2, 231067),
        (1, 1140271),
    ];
    let mut ok = true;
    for p in 1..=6 {
        let (rn, rd) = rho[p - 1];
        let (dn, dd) = delta[p - 1];
        ok &= rho_lookup(p) == Ok(Rational::new(rn, rd));
        ok &= delta_lookup(p) == Ok(Rational::new(dn, dd));
    }
    ok &= rho_lookup(0).is_err() && rho_lookup(7).is_err() && delta_lookup(7).is_err();
    report(1, ok, "rho and delta tables match exactly for p_t = 1..6");
    assert!(ok);
}

/// Random stable configuration with at most `max_dof` unknowns.
fn random_system(rng: &mut ChaCha8Rng, mode: Stabilization, max_dof: usize) -> SpaceTimeSystem {
    loop {
        let dim = rng.gen_range(1..=2);
        let p = rng.gen_range(2..=4);
        let reg = if mode == Stabilization::FemProjection {
            0
        } else {
            p - 1
        };
        let mut cfg = DiscretizationConfig {
            dim,
            degree_space: p,
            degree_time: p,
            regularity_time: Some(reg),
            elements_space: rng.gen_range(3..=if dim == 1 { 24 } else { 8 }),
            elements_time: rng.gen_range(1..=12),
            stabilization: mode,
            ..Default::default()
        };
        let Ok(sys) = build_system(&cfg, &SeparableForcing::zero()) else {
            continue;
        };
        if mode == Stabilization::None {
            let limit = cfl_check(&sys.spatial, p, 1.0, reg).unwrap().h_t_max;
            cfg.elements_time = (1.0 / (0.9 * limit)).ceil() as usize;
        }
        let Ok(sys) = build_system(&cfg, &SeparableForcing::zero()) else {
            continue;
        };
        if sys.n_dof() > max_dof {
            continue;
        }
        let rhs = (0..sys.n_dof()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        return sys.with_rhs(rhs).unwrap();
    }
}

#[test]
fn criterion_2_oracle_equivalence() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let t0 = clock::now();
    let modes = [
        Stabilization::None,
        Stabilization::IgaPenalty,
        Stabilization::FemProjection,
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut worst_err, mut worst_res) = (0.0f64, 0.0f64);
    let mut seen = (
        std::collections::BTreeSet::new(),
        std::collections::BTreeSet::new(),
        [false; 3],
    );
    for i in 0..20 {
        let mode = modes[i % 3];
        let sys = random_system(&mut rng, mode, 2000);
        seen.0.insert(sys.config.dim);
        seen.1.insert(sys.config.degree_space);
        seen.2[i % 3] = true;
        let fact = factorize_temporal(&sys.temporal.stiffness, sys.stabilized_mass()).unwrap();
        let fast = solve(&sys, &fact).unwrap();
        let a = to_na(&sys.assemble_dense(20_000).unwrap());
        let dense = a
            .lu()
            .solve(&DVector::from_column_slice(&sys.rhs))
            .expect("dense LU");
        let diff: Vec<f64> = fast
            .solution
            .iter()
            .zip(dense.iter())
            .map(|(x, y)| x - y)
            .collect();
        worst_err = worst_err.max(inf_norm(&diff) / inf_norm(dense.as_slice()));
        worst_res = worst_res.max(relative_residual(&sys, &fast.solution).unwrap());
    }
    let elapsed = clock::now() - t0;
    let covered = seen.0.len() == 2 && seen.1.len() == 3 && seen.2.iter().all(|&b| b);
    let ok = worst_err <= 1e-8 && worst_res <= 1e-9 && covered;
    report(
        2,
        ok,
        &format!("20 systems, max rel inf-norm gap {worst_err:.2e} (<= 1e-8), max residual {worst_res:.2e} (<= 1e-9), {elapsed:.1}s"),
    );
    assert!(ok);
}

#[test]
fn criterion_3_convergence_rates() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let case = manufactured_case("square2d").unwrap();
    let opts = CellOptions::default();
    let table = bihw_core::analysis::convergence_study(
        &case,
        &[2, 3],
        &[4, 8, 16, 32],
        Stabilization::IgaPenalty,
        &opts,
    )
    .unwrap();
    let r2 = table.finest_rates(2).unwrap();
    let r3 = table.finest_rates(3).unwrap();
    let ok = r2.x >= 2.0 - 1.0 - 0.2
        && r3.x >= 3.0 - 1.0 - 0.2
        && r2.h1mix >= 2.0 - 0.2
        && r3.h1mix >= 3.0 - 0.2
        && r2.l2l2 >= 2.0 - 0.3
        && r3.l2l2 >= 3.0 + 1.0 - 0.3;
    report(
        3,
        ok,
        &format!(
            "finest rates p=2 (L2L2 {:.2}, H1mix {:.2}, X {:.2}); p=3 (L2L2 {:.2}, H1mix {:.2}, X {:.2})",
            r2.l2l2, r2.h1mix, r2.x, r3.l2l2, r3.h1mix, r3.x
        ),
    );
    assert!(ok);
    assert!(monotone(&table, 2) && monotone(&table, 3));
}

fn monotone(t: &ConvergenceTable, p: usize) -> bool {
    let rows: Vec<_> = t.degree_rows(p).collect();
    rows.windows(2).all(|w| {
        w[1].cell.errors.x < w[0].cell.errors.x && w[1].cell.errors.l2l2 < w[0].cell.errors.l2l2
    })
}

#[test]
fn criterion_4_stability_matrix() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let case = manufactured_case("square2d").unwrap();
    let modes = [
        Stabilization::None,
        Stabilization::IgaPenalty,
        Stabilization::FemProjection,
    ];
    let regs = [
        TimeRegularity::Maximal,
        TimeRegularity::Reduced,
        TimeRegularity::Continuous,
    ];
    let rep = stability_study(
        &case,
        2,
        &[4, 8, 16, 32],
        &modes,
        &regs,
        &CellOptions::default(),
    )
    .unwrap();
    let want = |mode: Stabilization, reg: TimeRegularity| match (mode, reg) {
        (Stabilization::IgaPenalty, TimeRegularity::Maximal) => Stability::Stable,
        (Stabilization::FemProjection, TimeRegularity::Continuous) => Stability::Stable,
        // Reduced equals C^0 at p = 2.
        (Stabilization::FemProjection, TimeRegularity::Reduced) => Stability::Stable,
        _ => Stability::Unstable,
    };
    let mut ok = true;
    let mut detail = Vec::new();
    for row in &rep.rows {
        let good = row.classification == want(row.mode, row.regularity_time);
        ok &= good;
        detail.push(format!(
            "{}/{}={}",
            row.mode.name(),
            row.regularity_time.label(),
            row.classification.name()
        ));
    }
    report(4, ok, &detail.join(" "));
    assert!(ok);
}

#[test]
fn criterion_5_stabilization_identity() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let mut worst = 0.0f64;
    for n in [1, 2, 5, 8, 16, 33] {
        let kv = make_knot_vector(n, 1, 0, (0.0, 1.0)).unwrap();
        let trial = build_space(kv.clone(), Constraint::ZeroStart).unwrap();
        let test = build_space(kv, Constraint::ZeroEnd).unwrap();
        let pen = assemble_temporal(&trial, &test, 1.0 / 12.0, Stabilization::IgaPenalty).unwrap();
        let fem = assemble_temporal(&trial, &test, 0.0, Stabilization::FemProjection).unwrap();
        let gap = to_na(&pen.stabilized_mass()) - to_na(&fem.stabilized_mass());
        worst = worst.max(gap.norm() / to_na(&pen.mass).norm());
    }
    let ok = worst <= 1e-13;
    report(
        5,
        ok,
        &format!("max relative Frobenius gap {worst:.2e} (<= 1e-13)"),
    );
    assert!(ok);
}

#[test]
fn criterion_6_solver_scaling() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let case = manufactured_case("square2d").unwrap();
    let rows = timing_study(&case, &[2], &[8, 16, 32], 3, clock::now).unwrap();
    let growth: Vec<f64> = rows.iter().filter_map(|r| r.growth_factor).collect();
    let flops: Vec<f64> = rows.iter().filter_map(|r| r.flops_growth).collect();
    let ok = growth.len() == 2 && growth.iter().all(|&g| g <= 16.0);
    report(
        6,
        ok,
        &format!(
            "wall-time growth {:?} (<= 16), model flop growth {:?}, times {:?} s",
            growth
                .iter()
                .map(|g| (g * 100.0).round() / 100.0)
                .collect::<Vec<_>>(),
            flops
                .iter()
                .map(|g| (g * 100.0).round() / 100.0)
                .collect::<Vec<_>>(),
            rows.iter()
                .map(|r| (r.wall_time * 1e4).round() / 1e4)
                .collect::<Vec<_>>()
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_7_cfl_boundary() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let case = manufactured_case("line1d").unwrap();
    let steps: Vec<usize> = (0..30)
        .map(|k| (4.0 * 2f64.powf(k as f64 / 4.0)).round() as usize)
        .collect();
    let sweep = cfl_sweep(&case, 2, 8, &steps, &CellOptions::default()).unwrap();
    let boundary = sweep.empirical_boundary();
    let ratio = boundary.map(|b| b / sweep.h_t_max);
    let ok = ratio.is_some_and(|r| (0.5..=2.0).contains(&r));
    report(
        7,
        ok,
        &format!(
            "h_t_max {:.4e}, empirical boundary {:?}, ratio {:?} (within a factor 2)",
            sweep.h_t_max, boundary, ratio
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_8_property_suites() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut failures = Vec::new();

    // Partition of unity and nonnegativity.
    let mut pou = 0.0f64;
    for _ in 0..20 {
        let p = rng.gen_range(1..=5);
        let kv =
            make_knot_vector(rng.gen_range(1..=12), p, rng.gen_range(0..p), (-0.5, 2.0)).unwrap();
        for _ in 0..1000 {
            let ev = eval_basis(&kv, rng.gen_range(-0.5..=2.0), 0).unwrap();
            pou = pou.max((ev.table[0].iter().sum::<f64>() - 1.0).abs());
            if ev.table[0].iter().any(|&v| v < 0.0) {
                failures.push("negative basis value");
            }
        }
    }
    if pou > 1e-13 {
        failures.push("partition of unity");
    }

    // Clamped functions vanish with their slope at both ends.
    for p in 2..=5 {
        for n in 3..=8 {
            let kv = make_knot_vector(n, p, p - 1, (0.0, 1.0)).unwrap();
            let Ok(space) = build_space(kv, Constraint::ClampedBoth) else {
                continue;
            };
            let c: Vec<f64> = (0..space.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            for x in [0.0, 1.0] {
                for d in 0..2 {
                    if space.eval_function(&c, x, d).unwrap().abs() > 1e-13 {
                        failures.push("clamped boundary nullity");
                    }
                }
            }
        }
    }

    // SPD spatial mass and stiffness.
    for (d, p, n) in [(1, 2, 8), (1, 4, 6), (2, 2, 5), (2, 3, 4)] {
        let kv = make_knot_vector(n, p, p - 1, (0.0, 1.0)).unwrap();
        let s = build_space(kv, Constraint::ClampedBoth).unwrap();
        let ops = assemble_spatial(&vec![s; d]).unwrap();
        for m in [&ops.mass, &ops.stiffness] {
            let dense = to_na(&m.to_dense());
            if (&dense - dense.transpose()).amax() > 1e-12 * dense.amax()
                || dense.cholesky().is_none()
            {
                failures.push("SPD spatial operators");
            }
        }
    }

    // Gauss rules with p+1 points are exact for the Gram integrands.
    for p in 1..=5 {
        for reg in 0..p {
            let s = build_space(
                make_knot_vector(5, p, reg, (0.0, 1.0)).unwrap(),
                Constraint::None,
            )
            .unwrap();
            for (a, b) in [(0, 0), (1, 1), (0, 2), (2, 2)] {
                if b > p {
                    continue;
                }
                let base = assemble_gram_1d(&s, &s, a, b).unwrap().matrix.to_dense();
                let rich = assemble_gram_1d_with_points(&s, &s, a, b, p + 3)
                    .unwrap()
                    .matrix
                    .to_dense();
                if (to_na(&base) - to_na(&rich)).amax() > 1e-13 * to_na(&rich).amax() {
                    failures.push("quadrature exactness");
                }
            }
        }
    }

    // Matrix-free operator against an explicit Kronecker expansion.
    for _ in 0..12 {
        let mode = [
            Stabilization::None,
            Stabilization::IgaPenalty,
            Stabilization::FemProjection,
        ][rng.gen_range(0..3)];
        let sys = random_system(&mut rng, mode, 600);
        let a = to_na(sys.stabilized_mass()).kronecker(&to_na(&sys.spatial.stiffness.to_dense()))
            - to_na(&sys.temporal.stiffness).kronecker(&to_na(&sys.spatial.mass.to_dense()));
        for _ in 0..5 {
            let x: Vec<f64> = (0..sys.n_dof()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let y = DVector::from_vec(sys.apply_operator(&x).unwrap());
            let z = &a * DVector::from_vec(x);
            if (&y - &z).norm() > 1e-12 * z.norm() {
                failures.push("Kronecker apply");
            }
        }
    }

    // Generalized Schur factors reproduce the temporal pencil.
    let mut recon = 0.0f64;
    for n in [1, 3, 6, 12, 20] {
        let kt = DenseMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        let s = DenseMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        let f = factorize_temporal(&kt, &s).unwrap();
        let (rk, rs) = f.reconstruction_residuals(&kt, &s);
        let (uc, ud) = f.unitarity_defects();
        recon = recon.max(rk).max(rs).max(uc).max(ud);
    }
    if recon > 1e-11 {
        failures.push("factorization reconstruction");
    }

    failures.dedup();
    let ok = failures.is_empty();
    report(
        8,
        ok,
        &if ok {
            format!("all property suites hold (partition of unity {pou:.1e}, reconstruction {recon:.1e})")
        } else {
            format!("violated: {}", failures.join(", "))
        },
    );
    assert!(ok);
}
