use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use bihw::output::strip_wall_time;

fn bihw(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_bihw"));
    cmd.args(args).env_remove("BIHW_MAX_DENSE");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn summary_value(dir: &Path, key: &str) -> Option<String> {
    let text = fs::read_to_string(dir.join("summary.txt")).unwrap();
    text.lines().find_map(|l| {
        l.strip_prefix(key)?
            .trim_start()
            .strip_prefix('=')
            .map(|v| v.trim().to_string())
    })
}

fn csv_rows(dir: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = fs::read_to_string(dir.join("results.csv")).unwrap();
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines
        .map(|l| l.split(',').map(String::from).collect())
        .collect();
    (header, rows)
}

#[test]
fn solve_writes_artifacts_with_small_residual() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("solve");
    let o = bihw(
        &[
            "solve",
            "--case",
            "line1d",
            "--p",
            "2",
            "--h",
            "0.125",
            "--out",
            out.to_str().unwrap(),
        ],
        &[],
    );
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    for f in [
        "results.csv",
        "summary.txt",
        "effective.cfg",
        "l2l2.dat",
        "h1mix.dat",
        "x.dat",
    ] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    let res: f64 = summary_value(&out, "relative_residual")
        .unwrap()
        .parse()
        .unwrap();
    assert!(res <= 1e-9, "residual {res}");
    let csv = fs::read_to_string(out.join("results.csv")).unwrap();
    assert!(csv.starts_with("# bihw-results schema=v1 study=solve\n"));
}

#[test]
fn configuration_errors_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("missing.cfg");
    let o = bihw(&["convergence", "--config", missing.to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"));

    let bad = tmp.path().join("bad.cfg");
    fs::write(&bad, "[convergence]\nresolution = 3\n").unwrap();
    assert_eq!(
        bihw(&["convergence", "--config", bad.to_str().unwrap()], &[])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        bihw(&["solve", "--mode", "explicit"], &[]).status.code(),
        Some(2)
    );
    assert_eq!(bihw(&["solve", "--h", "0.3"], &[]).status.code(), Some(2));
    let o = bihw(
        &["solve", "--out", tmp.path().to_str().unwrap()],
        &[("BIHW_MAX_DENSE", "lots")],
    );
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn help_prints_schema() {
    let o = bihw(&["--help"], &[]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8_lossy(&o.stdout);
    for word in [
        "solve",
        "convergence",
        "stability",
        "timing",
        "regularity_time",
        "BIHW_MAX_DENSE",
    ] {
        assert!(text.contains(word), "help lacks {word}");
    }
}

#[test]
fn repeated_runs_are_identical_apart_from_wall_time() {
    let tmp = tempfile::tempdir().unwrap();
    let run = |name: &str, jobs: &str| {
        let out = tmp.path().join(name);
        let args = [
            "convergence",
            "--case",
            "line1d",
            "--p",
            "2,3",
            "--h",
            "1/4,1/8,1/16",
            "--jobs",
            jobs,
            "--out",
            out.to_str().unwrap(),
        ];
        assert_eq!(bihw(&args, &[]).status.code(), Some(0));
        strip_wall_time(&fs::read_to_string(out.join("results.csv")).unwrap())
    };
    let a = run("a", "1");
    assert_eq!(a, run("b", "1"));
    assert_eq!(a, run("c", "2"));
    assert_eq!(a.lines().count(), 2 + 6);
}

#[test]
fn effective_config_reproduces_results() {
    let tmp = tempfile::tempdir().unwrap();
    let first = tmp.path().join("first");
    let args = [
        "convergence",
        "--case",
        "line1d",
        "--p",
        "2",
        "--h",
        "0.25,0.125",
        "--mode",
        "fem",
        "--regularity-time",
        "0",
        "--out",
        first.to_str().unwrap(),
    ];
    assert_eq!(bihw(&args, &[]).status.code(), Some(0));
    let second = tmp.path().join("second");
    let cfg = first.join("effective.cfg");
    let o = bihw(
        &[
            "convergence",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            second.to_str().unwrap(),
        ],
        &[],
    );
    assert_eq!(o.status.code(), Some(0));
    let read = |d: &Path| strip_wall_time(&fs::read_to_string(d.join("results.csv")).unwrap());
    assert_eq!(read(&first), read(&second));
    let (header, rows) = csv_rows(&second);
    let col = |name: &str| header.iter().position(|h| h == name).unwrap();
    assert!(rows
        .iter()
        .all(|r| r[col("mode")] == "fem" && r[col("reg_t")] == "0"));
}

#[test]
fn stability_reproduces_the_classification_table() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("stab");
    let o = bihw(
        &[
            "stability",
            "--case",
            "square2d",
            "--modes",
            "none,iga,fem",
            "--out",
            out.to_str().unwrap(),
        ],
        &[],
    );
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let (header, rows) = csv_rows(&out);
    let col = |name: &str| header.iter().position(|h| h == name).unwrap();
    let expected = |mode: &str, reg: &str| match (mode, reg) {
        ("iga", "C^{p-1}") => "stable",
        ("fem", "C^0") | ("fem", "C^{p-2}") => "stable",
        _ => "unstable",
    };
    assert_eq!(rows.len(), 9 * 5);
    for r in &rows {
        assert_eq!(
            r[col("classification")],
            expected(&r[col("mode")], &r[col("regularity")]),
            "{r:?}"
        );
    }
}

#[test]
fn dense_cap_comes_from_the_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let with = tmp.path().join("with");
    let args =
        |d: &Path| ["solve", "--crosscheck-dense", "--out", d.to_str().unwrap()].map(String::from);
    let o = bihw(
        &args(&with).iter().map(String::as_str).collect::<Vec<_>>(),
        &[],
    );
    assert_eq!(o.status.code(), Some(0));
    let gap: f64 = summary_value(&with, "dense_discrepancy")
        .unwrap()
        .parse()
        .unwrap();
    assert!(gap <= 1e-8, "{gap}");

    let without = tmp.path().join("without");
    let o = bihw(
        &args(&without)
            .iter()
            .map(String::as_str)
            .collect::<Vec<_>>(),
        &[("BIHW_MAX_DENSE", "10")],
    );
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(summary_value(&without, "dense_discrepancy"), None);
    assert_eq!(summary_value(&without, "dense_cap").as_deref(), Some("10"));
}

#[test]
fn timing_and_compare_run() {
    let tmp = tempfile::tempdir().unwrap();
    let t = tmp.path().join("timing");
    let o = bihw(
        &[
            "timing",
            "--case",
            "line1d",
            "--h",
            "1/8,1/16,1/32",
            "--runs",
            "1",
            "--out",
            t.to_str().unwrap(),
        ],
        &[],
    );
    assert_eq!(o.status.code(), Some(0));
    let (header, rows) = csv_rows(&t);
    assert_eq!(rows.len(), 3);
    assert!(header.iter().any(|h| h == "wall_time_growth"));
    assert!(t.join("wall_time.dat").is_file());

    let c = tmp.path().join("compare");
    let o = bihw(
        &[
            "compare",
            "--p",
            "2,3",
            "--target-dof",
            "600",
            "--out",
            c.to_str().unwrap(),
        ],
        &[],
    );
    assert_eq!(o.status.code(), Some(0));
    let (header, rows) = csv_rows(&c);
    assert_eq!(rows.len(), 4);
    let col = header.iter().position(|h| h == "n_dof").unwrap();
    for r in rows {
        let n: usize = r[col].parse().unwrap();
        assert!(n.abs_diff(600) < 300, "{n}");
    }
}
