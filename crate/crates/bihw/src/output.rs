//! CSV, gnuplot data and summary artifacts.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::CliError;

/// Bumped whenever a column is added, removed or reordered.
pub const CSV_SCHEMA_VERSION: u32 = 1;

/// Columns whose name starts with this prefix hold clock readings.
pub const WALL_TIME_PREFIX: &str = "wall_time";

/// One CSV table with a fixed column list.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub study: &'static str,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(study: &'static str, columns: &[&'static str]) -> Self {
        Self {
            study,
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(
            row.len(),
            self.columns.len(),
            "row width must match the {} schema",
            self.study
        );
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut s = format!(
            "# bihw-results schema=v{CSV_SCHEMA_VERSION} study={}\n",
            self.study
        );
        s.push_str(&self.columns.join(","));
        s.push('\n');
        for row in &self.rows {
            s.push_str(&row.join(","));
            s.push('\n');
        }
        s
    }
}

/// Fixed-width scientific notation; non-finite values print as `nan` or `inf`.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{x:.10e}")
    }
}

pub fn opt_num(x: Option<f64>) -> String {
    x.map_or_else(String::new, num)
}

/// Gnuplot data: one two-column block per series, blocks separated by two
/// blank lines so that `index` selects them.
#[derive(Debug, Clone, PartialEq)]
pub struct DataFile {
    pub name: String,
    pub columns: (&'static str, &'static str),
    pub blocks: Vec<(String, Vec<(f64, f64)>)>,
}

impl DataFile {
    pub fn new(name: impl Into<String>, columns: (&'static str, &'static str)) -> Self {
        Self {
            name: name.into(),
            columns,
            blocks: Vec::new(),
        }
    }

    pub fn series(&mut self, label: impl Into<String>) -> &mut Vec<(f64, f64)> {
        let label = label.into();
        if let Some(i) = self.blocks.iter().position(|b| b.0 == label) {
            return &mut self.blocks[i].1;
        }
        self.blocks.push((label, Vec::new()));
        &mut self.blocks.last_mut().unwrap().1
    }

    pub fn render(&self) -> String {
        let mut s = format!("# {} {}\n", self.columns.0, self.columns.1);
        for (i, (label, pts)) in self.blocks.iter().enumerate() {
            if i > 0 {
                s.push_str("\n\n");
            }
            let _ = writeln!(s, "# {label}");
            for (x, y) in pts {
                let _ = writeln!(s, "{} {}", num(*x), num(*y));
            }
        }
        s
    }
}

/// Everything a study writes.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifacts {
    pub table: Table,
    pub data: Vec<DataFile>,
    pub summary: String,
}

impl Artifacts {
    /// Writes `results.csv`, `summary.txt`, the `*.dat` files and
    /// `effective.cfg` into `dir`, creating it if needed.
    pub fn write(&self, dir: &Path, effective_config: &str) -> Result<(), CliError> {
        let io = |path: PathBuf| move |source| CliError::Io { path, source };
        fs::create_dir_all(dir).map_err(io(dir.to_path_buf()))?;
        let mut files = vec![
            ("results.csv".to_string(), self.table.to_csv()),
            ("summary.txt".to_string(), self.summary.clone()),
            ("effective.cfg".to_string(), effective_config.to_string()),
        ];
        files.extend(
            self.data
                .iter()
                .map(|d| (format!("{}.dat", d.name), d.render())),
        );
        for (name, text) in files {
            let path = dir.join(name);
            fs::write(&path, text).map_err(io(path.clone()))?;
        }
        Ok(())
    }
}

/// Drops the clock columns from a CSV produced by [`Table::to_csv`], so
/// two runs can be compared byte for byte.
pub fn strip_wall_time(csv: &str) -> String {
    let mut lines = csv.lines();
    let mut out = String::new();
    let mut keep: Vec<bool> = Vec::new();
    for line in lines.by_ref() {
        if !line.starts_with('#') {
            keep = line
                .split(',')
                .map(|c| !c.starts_with(WALL_TIME_PREFIX))
                .collect();
            out.push_str(
                &line
                    .split(',')
                    .filter(|c| !c.starts_with(WALL_TIME_PREFIX))
                    .collect::<Vec<_>>()
                    .join(","),
            );
            out.push('\n');
            break;
        }
        out.push_str(line);
        out.push('\n');
    }
    for line in lines {
        let fields: Vec<&str> = line
            .split(',')
            .zip(&keep)
            .filter(|(_, k)| **k)
            .map(|(f, _)| f)
            .collect();
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_has_versioned_header() {
        let mut t = Table::new("solve", &["a", "wall_time"]);
        t.push(vec!["1".into(), "0.5".into()]);
        let csv = t.to_csv();
        assert_eq!(
            csv,
            "# bihw-results schema=v1 study=solve\na,wall_time\n1,0.5\n"
        );
        assert_eq!(
            strip_wall_time(&csv),
            "# bihw-results schema=v1 study=solve\na\n1\n"
        );
    }

    #[test]
    fn data_blocks_are_separated() {
        let mut d = DataFile::new("x", ("h", "error"));
        d.series("p=2").push((0.5, 1.0));
        d.series("p=3").push((0.5, 2.0));
        d.series("p=2").push((0.25, 0.5));
        let text = d.render();
        assert_eq!(text.matches("\n\n\n").count(), 1);
        assert!(text.starts_with("# h error\n# p=2\n5.0000000000e-1 1.0000000000e0\n2.5"));
    }

    #[test]
    fn number_format_is_stable() {
        assert_eq!(num(1.0 / 3.0), "3.3333333333e-1");
        assert_eq!(num(f64::NAN), "nan");
        assert_eq!(num(f64::NEG_INFINITY), "-inf");
        assert_eq!(opt_num(None), "");
    }
}
