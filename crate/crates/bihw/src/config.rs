//! Study configuration: flat `key = value` text with optional `[study]`
//! sections.
//!
//! Keys before the first section header apply to every study. A section
//! named after a study kind (`[solve]`, `[convergence]`, ...) overrides
//! them for that study only. Lines starting with `#` or `;` are comments.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use bihw_core::analysis::{manufactured_case, TimeRegularity, CASE_NAMES};
use bihw_core::assembly::Stabilization;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StudyKind {
    Solve,
    Convergence,
    Stability,
    Timing,
    Compare,
}

impl StudyKind {
    pub const ALL: [StudyKind; 5] = [
        Self::Solve,
        Self::Convergence,
        Self::Stability,
        Self::Timing,
        Self::Compare,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Solve => "solve",
            Self::Convergence => "convergence",
            Self::Stability => "stability",
            Self::Timing => "timing",
            Self::Compare => "compare",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }
}

/// `(key, default, meaning)` for every accepted key.
pub const SCHEMA: &[(&str, &str, &str)] = &[
    ("case", "line1d for solve/compare, square2d otherwise", "manufactured solution: square2d | line1d"),
    ("p", "2 (convergence and compare: 2,3)", "comma-separated spline degrees, used in space and time"),
    (
        "h",
        "solve 1/8; convergence 1/2..1/32 in 2D, 1/2..1/64 in 1D; stability 1/2..1/32; timing 1/8,1/16,1/32",
        "comma-separated mesh sizes h_s = h_t, each 1/n for an integer n (decimals or fractions)",
    ),
    ("mode", "iga", "stabilization for solve/convergence: none | iga | fem"),
    ("modes", "none,iga,fem", "stabilizations swept by the stability study"),
    ("regularities", "max,p-2,c0", "temporal regularities swept by the stability study"),
    ("regularity_space", "default (p-1)", "spatial continuity C^k"),
    ("regularity_time", "default (p-1)", "temporal continuity C^k for solve/convergence"),
    ("delta", "default (tabulated per degree)", "penalty weight of the iga stabilization"),
    ("final_time", "1", "length T of the time interval"),
    ("runs", "3", "timing repetitions, the median is reported"),
    ("target_dof", "8400", "unknowns per degree in the equal-size comparison"),
    ("jobs", "1", "worker threads for independent study cells"),
    ("out", "bihw-out", "output directory"),
    ("crosscheck_dense", "false", "also solve with dense LU when the system fits under the cap"),
    ("finest", "false", "add h = 1/64 to the default 2D sweeps"),
];

pub fn schema_text() -> String {
    let mut s = String::from("Configuration keys (file or flags; flags win):\n");
    for (key, default, meaning) in SCHEMA {
        let _ = writeln!(s, "  {key:<17} {meaning}\n  {:<17} default: {default}", "");
    }
    s.push_str(
        "\nFile format: `key = value` lines. Keys before any section apply to all\n\
         studies; `[solve]`, `[convergence]`, `[stability]`, `[timing]` and\n\
         `[compare]` sections override them for one study. Unknown keys are errors.\n\
         BIHW_MAX_DENSE overrides the dense-solver size cap (default 20000).\n",
    );
    s
}

/// Raw key/value pairs of one config file, split by section.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawConfig {
    pub global: BTreeMap<String, String>,
    pub sections: BTreeMap<String, BTreeMap<String, String>>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut raw = RawConfig::default();
        let mut section: Option<String> = None;
        for (no, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                let name = name.trim();
                if StudyKind::parse(name).is_none() {
                    return Err(CliError::Config(format!(
                        "line {}: unknown section [{name}]",
                        no + 1
                    )));
                }
                raw.sections.entry(name.to_string()).or_default();
                section = Some(name.to_string());
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::Config(format!(
                    "line {}: expected `key = value`",
                    no + 1
                )));
            };
            let key = key.trim().replace('-', "_");
            if !SCHEMA.iter().any(|(k, _, _)| *k == key) {
                return Err(CliError::Config(format!(
                    "line {}: unknown key `{key}`",
                    no + 1
                )));
            }
            let map = match &section {
                Some(s) => raw.sections.get_mut(s).expect("section inserted above"),
                None => &mut raw.global,
            };
            map.insert(key, value.trim().to_string());
        }
        Ok(raw)
    }

    /// Global keys overlaid with the section for `kind`.
    pub fn for_kind(&self, kind: StudyKind) -> BTreeMap<String, String> {
        let mut out = self.global.clone();
        if let Some(sec) = self.sections.get(kind.name()) {
            out.extend(sec.iter().map(|(k, v)| (k.clone(), v.clone())));
        }
        out
    }
}

/// Fully resolved settings of one study run.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub kind: StudyKind,
    pub case: String,
    pub degrees: Vec<usize>,
    /// Elements per direction, `h = 1/n`.
    pub elements: Vec<usize>,
    pub mode: Stabilization,
    pub modes: Vec<Stabilization>,
    pub regularities: Vec<TimeRegularity>,
    pub regularity_space: Option<usize>,
    pub regularity_time: Option<usize>,
    pub delta: Option<f64>,
    pub final_time: f64,
    pub runs: usize,
    pub target_dof: usize,
    pub jobs: usize,
    pub out: PathBuf,
    pub crosscheck_dense: bool,
    pub finest: bool,
}

fn bad(key: &str, value: &str, why: &str) -> CliError {
    CliError::Config(format!("{key} = {value}: {why}"))
}

fn list<T>(key: &str, value: &str, f: impl Fn(&str) -> Option<T>) -> Result<Vec<T>, CliError> {
    let items: Vec<&str> = value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .collect();
    if items.is_empty() {
        return Err(bad(key, value, "empty list"));
    }
    items
        .into_iter()
        .map(|s| f(s).ok_or_else(|| bad(key, s, "invalid entry")))
        .collect()
}

/// Element count for a mesh size written as `1/8` or `0.125`; `None` unless
/// `1/h` is a positive integer.
pub fn parse_h(s: &str) -> Option<usize> {
    let h = match s.split_once('/') {
        Some((a, b)) => a.trim().parse::<f64>().ok()? / b.trim().parse::<f64>().ok()?,
        None => s.parse::<f64>().ok()?,
    };
    if !(h.is_finite() && h > 0.0 && h <= 1.0) {
        return None;
    }
    let n = (1.0 / h).round();
    ((n * h - 1.0).abs() < 1e-9).then_some(n as usize)
}

fn parse_bool(s: &str) -> Option<bool> {
    match s.to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Some(true),
        "false" | "no" | "off" | "0" => Some(false),
        _ => None,
    }
}

fn optional<T>(
    key: &str,
    value: &str,
    f: impl Fn(&str) -> Option<T>,
) -> Result<Option<T>, CliError> {
    if value == "default" {
        return Ok(None);
    }
    f(value)
        .map(Some)
        .ok_or_else(|| bad(key, value, "invalid value"))
}

pub fn regularity_token(r: TimeRegularity) -> &'static str {
    match r {
        TimeRegularity::Maximal => "max",
        TimeRegularity::Reduced => "p-2",
        TimeRegularity::Continuous => "c0",
    }
}

fn halvings(from: usize, to: usize) -> Vec<usize> {
    let mut v = vec![from];
    while *v.last().unwrap() < to {
        v.push(v.last().unwrap() * 2);
    }
    v
}

impl StudyConfig {
    /// Validates `map` (already merged from file and flags) and fills in
    /// defaults.
    pub fn resolve(kind: StudyKind, map: &BTreeMap<String, String>) -> Result<Self, CliError> {
        if let Some(k) = map.keys().find(|k| !SCHEMA.iter().any(|(s, _, _)| s == k)) {
            return Err(CliError::Config(format!("unknown key `{k}`")));
        }
        let get = |k: &str| map.get(k).map(String::as_str);
        let default_case = match kind {
            StudyKind::Solve | StudyKind::Compare => "line1d",
            _ => "square2d",
        };
        let case = get("case").unwrap_or(default_case).to_string();
        if !CASE_NAMES.contains(&case.as_str()) {
            return Err(bad("case", &case, "expected square2d or line1d"));
        }
        let dim = manufactured_case(&case)
            .map_err(|e| CliError::Config(e.to_string()))?
            .dim();

        let degrees = match get("p") {
            Some(v) => list("p", v, |s| {
                s.parse::<usize>().ok().filter(|p| (2..=6).contains(p))
            })?,
            None if matches!(kind, StudyKind::Convergence | StudyKind::Compare) => vec![2, 3],
            None => vec![2],
        };

        let finest = get("finest").map_or(Ok(false), |v| {
            parse_bool(v).ok_or_else(|| bad("finest", v, "expected a boolean"))
        })?;
        let elements = match get("h") {
            Some(v) => list("h", v, parse_h)?,
            None => match kind {
                StudyKind::Solve => vec![8],
                StudyKind::Timing => vec![8, 16, 32],
                StudyKind::Convergence if dim == 1 || finest => halvings(2, 64),
                _ if finest && dim == 2 => halvings(2, 64),
                _ => halvings(2, 32),
            },
        };
        let mut elements = elements;
        elements.sort_unstable();
        elements.dedup();
        if kind == StudyKind::Solve && (degrees.len() != 1 || elements.len() != 1) {
            return Err(CliError::Config(
                "solve takes exactly one p and one h".into(),
            ));
        }
        if kind == StudyKind::Timing && elements.len() < 3 {
            return Err(CliError::Config(
                "timing needs at least three values of h".into(),
            ));
        }

        let mode = match get("mode") {
            Some(v) => Stabilization::parse(v)
                .ok_or_else(|| bad("mode", v, "expected none, iga or fem"))?,
            None => Stabilization::IgaPenalty,
        };
        let modes = match get("modes") {
            Some(v) => list("modes", v, Stabilization::parse)?,
            None => vec![
                Stabilization::None,
                Stabilization::IgaPenalty,
                Stabilization::FemProjection,
            ],
        };
        let regularities = match get("regularities") {
            Some(v) => list("regularities", v, TimeRegularity::parse)?,
            None => TimeRegularity::ALL.to_vec(),
        };
        let uint = |s: &str| s.parse::<usize>().ok();
        let regularity_space =
            get("regularity_space").map_or(Ok(None), |v| optional("regularity_space", v, uint))?;
        let regularity_time =
            get("regularity_time").map_or(Ok(None), |v| optional("regularity_time", v, uint))?;
        for &p in &degrees {
            if regularity_space.is_some_and(|r| r == 0 || r >= p) {
                return Err(CliError::Config(format!(
                    "regularity_space must lie in 1..{p} for p = {p}"
                )));
            }
            if regularity_time.is_some_and(|r| r >= p) {
                return Err(CliError::Config(format!(
                    "regularity_time must lie in 0..{p} for p = {p}"
                )));
            }
        }
        let positive = |s: &str| s.parse::<f64>().ok().filter(|x| x.is_finite() && *x > 0.0);
        let delta = get("delta").map_or(Ok(None), |v| optional("delta", v, positive))?;
        let final_time = get("final_time").map_or(Ok(1.0), |v| {
            positive(v).ok_or_else(|| bad("final_time", v, "expected a positive number"))
        })?;
        let count = |key: &str, default: usize| -> Result<usize, CliError> {
            get(key).map_or(Ok(default), |v| {
                v.parse::<usize>()
                    .ok()
                    .filter(|n| *n > 0)
                    .ok_or_else(|| bad(key, v, "expected a positive integer"))
            })
        };
        let flag = |key: &str| -> Result<bool, CliError> {
            get(key).map_or(Ok(false), |v| {
                parse_bool(v).ok_or_else(|| bad(key, v, "expected a boolean"))
            })
        };
        Ok(StudyConfig {
            kind,
            case,
            degrees,
            elements,
            mode,
            modes,
            regularities,
            regularity_space,
            regularity_time,
            delta,
            final_time,
            runs: count("runs", 3)?,
            target_dof: count("target_dof", 8400)?,
            jobs: count("jobs", 1)?,
            out: PathBuf::from(get("out").unwrap_or("bihw-out")),
            crosscheck_dense: flag("crosscheck_dense")?,
            finest,
        })
    }

    /// The effective configuration as a config file with one section.
    /// Reading it back with [`RawConfig::parse`] and [`StudyConfig::resolve`]
    /// yields `self` again.
    pub fn to_config_string(&self) -> String {
        let join = |v: Vec<String>| v.join(",");
        let opt = |o: Option<String>| o.unwrap_or_else(|| "default".into());
        let mut s = String::from("# effective configuration written by bihw\n");
        let _ = writeln!(s, "[{}]", self.kind.name());
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("case", self.case.clone());
        kv(
            "p",
            join(self.degrees.iter().map(usize::to_string).collect()),
        );
        kv(
            "h",
            join(self.elements.iter().map(|n| format!("1/{n}")).collect()),
        );
        kv("mode", self.mode.name().into());
        kv(
            "modes",
            join(self.modes.iter().map(|m| m.name().to_string()).collect()),
        );
        kv(
            "regularities",
            join(
                self.regularities
                    .iter()
                    .map(|r| regularity_token(*r).to_string())
                    .collect(),
            ),
        );
        kv(
            "regularity_space",
            opt(self.regularity_space.map(|r| r.to_string())),
        );
        kv(
            "regularity_time",
            opt(self.regularity_time.map(|r| r.to_string())),
        );
        kv("delta", opt(self.delta.map(|d| d.to_string())));
        kv("final_time", self.final_time.to_string());
        kv("runs", self.runs.to_string());
        kv("target_dof", self.target_dof.to_string());
        kv("jobs", self.jobs.to_string());
        kv("out", self.out.display().to_string());
        kv("crosscheck_dense", self.crosscheck_dense.to_string());
        kv("finest", self.finest.to_string());
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn resolve(kind: StudyKind, text: &str) -> Result<StudyConfig, CliError> {
        StudyConfig::resolve(kind, &RawConfig::parse(text)?.for_kind(kind))
    }

    #[test]
    fn defaults_depend_on_study() {
        let s = resolve(StudyKind::Solve, "").unwrap();
        assert_eq!(
            (s.case.as_str(), s.degrees.clone(), s.elements.clone()),
            ("line1d", vec![2], vec![8])
        );
        let c = resolve(StudyKind::Convergence, "").unwrap();
        assert_eq!(c.elements, vec![2, 4, 8, 16, 32]);
        assert_eq!(c.degrees, vec![2, 3]);
        let c = resolve(StudyKind::Convergence, "case = line1d").unwrap();
        assert_eq!(c.elements.last(), Some(&64));
        let c = resolve(StudyKind::Stability, "finest = yes").unwrap();
        assert_eq!(c.elements.last(), Some(&64));
        assert_eq!(c.modes.len(), 3);
    }

    #[test]
    fn sections_override_globals() {
        let text = "p = 3\n[timing]\np = 2\nruns = 5\n[convergence]\nh = 0.25, 1/8\n";
        let t = resolve(StudyKind::Timing, text).unwrap();
        assert_eq!((t.degrees.clone(), t.runs), (vec![2], 5));
        let c = resolve(StudyKind::Convergence, text).unwrap();
        assert_eq!(
            (c.degrees.clone(), c.elements.clone()),
            (vec![3], vec![4, 8])
        );
    }

    #[test]
    fn rejects_bad_input() {
        for text in [
            "colour = red",
            "[plot]\n",
            "h = 0.3",
            "p = 1",
            "mode = implicit",
            "just words",
            "regularity_time = 2",
            "jobs = 0",
        ] {
            assert!(
                matches!(
                    resolve(StudyKind::Convergence, text),
                    Err(CliError::Config(_))
                ),
                "{text}"
            );
        }
        assert!(resolve(StudyKind::Solve, "h = 1/4, 1/8").is_err());
        assert!(resolve(StudyKind::Timing, "h = 1/4, 1/8").is_err());
    }

    #[test]
    fn effective_config_round_trips() {
        let text = "case = line1d\np = 2,3\nh = 1/4,0.125\nmode = fem\nregularity_time = 0\ndelta = 0.003\nfinal_time = 0.5\njobs = 2";
        for kind in StudyKind::ALL {
            let Ok(cfg) = resolve(kind, text) else {
                continue;
            };
            let again = resolve(kind, &cfg.to_config_string()).unwrap();
            assert_eq!(cfg, again);
        }
    }

    #[test]
    fn mesh_sizes_parse() {
        assert_eq!(parse_h("0.125"), Some(8));
        assert_eq!(parse_h("1/32"), Some(32));
        assert_eq!(parse_h("1"), Some(1));
        assert_eq!(parse_h("0.3"), None);
        assert_eq!(parse_h("2"), None);
    }
}
