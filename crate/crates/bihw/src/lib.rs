//! Command-line studies for the space-time biharmonic wave solver.
//!
//! [`run`] parses arguments, merges an optional config file with the flags,
//! runs one study and writes `results.csv`, `summary.txt`, `effective.cfg`
//! and one `*.dat` file per error norm into the output directory.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use bihw_core::analysis::{manufactured_case, CellOptions};
use bihw_core::system::DEFAULT_DENSE_CAP;

pub mod config;
pub mod output;
pub mod studies;

use config::{RawConfig, StudyConfig, StudyKind};

/// Environment variable overriding the dense-solver size cap.
pub const MAX_DENSE_ENV: &str = "BIHW_MAX_DENSE";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Numerical(#[from] bihw_core::Error),
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

impl CliError {
    /// 2 for anything the user can fix in the configuration, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        use bihw_core::Error as E;
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(E::Parameter(_) | E::UnsupportedDegree(_) | E::UnknownCase(_)) => 2,
            CliError::Numerical(_) | CliError::Io { .. } => 1,
        }
    }
}

pub mod clock {
    use std::sync::OnceLock;
    use std::time::Instant;

    static START: OnceLock<Instant> = OnceLock::new();

    /// Seconds since the first call.
    pub fn now() -> f64 {
        START.get_or_init(Instant::now).elapsed().as_secs_f64()
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "bihw",
    version,
    about = "Space-time isogeometric studies for u_tt + Δ²u = f with clamped boundaries"
)]
#[command(after_help = config::schema_text())]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve one configuration and report residual, errors and CFL data.
    Solve(StudyArgs),
    /// Errors and observed rates over a sequence of halved meshes.
    Convergence(StudyArgs),
    /// Stable/unstable classification for each stabilization and temporal regularity.
    Stability(StudyArgs),
    /// Wall time of the factorization and solve under refinement.
    Timing(StudyArgs),
    /// Penalty against projection stabilization at a matched number of unknowns.
    Compare(StudyArgs),
}

#[derive(Debug, Args)]
#[command(after_help = config::schema_text())]
struct StudyArgs {
    /// Config file; flags override its values.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// square2d | line1d
    #[arg(long)]
    case: Option<String>,
    /// Degrees, comma separated.
    #[arg(long, value_name = "LIST")]
    p: Option<String>,
    /// Mesh sizes, comma separated (0.125 or 1/8).
    #[arg(long, value_name = "LIST")]
    h: Option<String>,
    /// none | iga | fem
    #[arg(long)]
    mode: Option<String>,
    /// Stabilizations swept by the stability study.
    #[arg(long, value_name = "LIST")]
    modes: Option<String>,
    /// Temporal regularities swept by the stability study (max, p-2, c0).
    #[arg(long, value_name = "LIST")]
    regularities: Option<String>,
    #[arg(long, value_name = "K")]
    regularity_space: Option<String>,
    #[arg(long, value_name = "K")]
    regularity_time: Option<String>,
    /// Penalty weight of the iga stabilization.
    #[arg(long)]
    delta: Option<String>,
    #[arg(long, value_name = "T")]
    final_time: Option<String>,
    /// Timing repetitions.
    #[arg(long)]
    runs: Option<String>,
    #[arg(long, value_name = "N")]
    target_dof: Option<String>,
    /// Worker threads for independent cells.
    #[arg(long, value_name = "N")]
    jobs: Option<String>,
    #[arg(long, value_name = "DIR")]
    out: Option<String>,
    /// Cross-check against dense LU where the system fits under the cap.
    #[arg(long)]
    crosscheck_dense: bool,
    /// Add h = 1/64 to the default 2D sweeps.
    #[arg(long)]
    finest: bool,
}

impl StudyArgs {
    fn overrides(&self) -> BTreeMap<String, String> {
        let pairs = [
            ("case", &self.case),
            ("p", &self.p),
            ("h", &self.h),
            ("mode", &self.mode),
            ("modes", &self.modes),
            ("regularities", &self.regularities),
            ("regularity_space", &self.regularity_space),
            ("regularity_time", &self.regularity_time),
            ("delta", &self.delta),
            ("final_time", &self.final_time),
            ("runs", &self.runs),
            ("target_dof", &self.target_dof),
            ("jobs", &self.jobs),
            ("out", &self.out),
        ];
        let mut map: BTreeMap<String, String> = pairs
            .into_iter()
            .filter_map(|(k, v)| v.as_ref().map(|v| (k.to_string(), v.clone())))
            .collect();
        if self.crosscheck_dense {
            map.insert("crosscheck_dense".into(), "true".into());
        }
        if self.finest {
            map.insert("finest".into(), "true".into());
        }
        map
    }
}

/// Reads `BIHW_MAX_DENSE`, falling back to the library default.
pub fn dense_cap() -> Result<usize, CliError> {
    match std::env::var(MAX_DENSE_ENV) {
        Ok(v) => v.trim().parse().map_err(|_| {
            CliError::Config(format!(
                "{MAX_DENSE_ENV} = {v}: expected a non-negative integer"
            ))
        }),
        Err(std::env::VarError::NotPresent) => Ok(DEFAULT_DENSE_CAP),
        Err(e) => Err(CliError::Config(format!("{MAX_DENSE_ENV}: {e}"))),
    }
}

/// Builds the effective configuration of one invocation.
pub fn load(
    kind: StudyKind,
    file: Option<&std::path::Path>,
    flags: BTreeMap<String, String>,
) -> Result<StudyConfig, CliError> {
    let mut map = match file {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                CliError::Config(format!("cannot read config {}: {e}", path.display()))
            })?;
            RawConfig::parse(&text)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
                .for_kind(kind)
        }
        None => BTreeMap::new(),
    };
    map.extend(flags);
    StudyConfig::resolve(kind, &map)
}

/// Runs a study from a resolved configuration and writes its artifacts.
pub fn execute(cfg: &StudyConfig) -> Result<(), CliError> {
    let case = manufactured_case(&cfg.case)?;
    let opts = CellOptions {
        dense_cap: dense_cap()?,
        crosscheck_dense: cfg.crosscheck_dense,
        clock: Some(clock::now),
    };
    let artifacts = match cfg.kind {
        StudyKind::Solve => studies::solve(cfg, &case, &opts)?,
        StudyKind::Convergence => studies::convergence(cfg, &case, &opts)?,
        StudyKind::Stability => studies::stability(cfg, &case, &opts)?,
        StudyKind::Timing => studies::timing(cfg, &case, &opts)?,
        StudyKind::Compare => studies::compare(cfg, &case, &opts)?,
    };
    artifacts.write(&cfg.out, &cfg.to_config_string())
}

/// Entry point of the binary. Returns the process exit code: 0 on success,
/// 1 on a numerical failure, 2 on a configuration error. Errors go to
/// stderr prefixed with `error:`.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let (kind, args) = match &cli.command {
        Command::Solve(a) => (StudyKind::Solve, a),
        Command::Convergence(a) => (StudyKind::Convergence, a),
        Command::Stability(a) => (StudyKind::Stability, a),
        Command::Timing(a) => (StudyKind::Timing, a),
        Command::Compare(a) => (StudyKind::Compare, a),
    };
    let result = load(kind, args.config.as_deref(), args.overrides()).and_then(|cfg| {
        execute(&cfg)?;
        Ok(cfg)
    });
    match result {
        Ok(cfg) => {
            println!("wrote {}", cfg.out.display());
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn help_and_usage_errors_have_documented_codes() {
        let code = |argv: &[&str]| Cli::try_parse_from(argv).map_or_else(|e| e.exit_code(), |_| 0);
        assert_eq!(code(&["bihw", "--help"]), 0);
        assert_eq!(code(&["bihw", "solve", "--help"]), 0);
        assert_eq!(code(&["bihw", "frobnicate"]), 2);
        assert_eq!(code(&["bihw", "solve", "--jobs"]), 2);
        let flags = BTreeMap::from([("p".to_string(), "9".to_string())]);
        assert_eq!(
            load(StudyKind::Solve, None, flags).unwrap_err().exit_code(),
            2
        );
    }

    #[test]
    fn flags_override_file_values() {
        let dir = std::env::temp_dir().join(format!("bihw-load-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("c.cfg");
        std::fs::write(&path, "p = 3\n[solve]\nh = 1/4\n").unwrap();
        let mut flags = BTreeMap::new();
        flags.insert("p".to_string(), "2".to_string());
        let cfg = load(StudyKind::Solve, Some(&path), flags).unwrap();
        assert_eq!((cfg.degrees, cfg.elements), (vec![2], vec![4]));
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn numerical_and_config_errors_map_to_codes() {
        assert_eq!(CliError::Config("x".into()).exit_code(), 2);
        assert_eq!(
            CliError::from(bihw_core::Error::UnknownCase("x".into())).exit_code(),
            2
        );
        assert_eq!(
            CliError::from(bihw_core::Error::NoConvergence { iterations: 3 }).exit_code(),
            1
        );
    }
}
