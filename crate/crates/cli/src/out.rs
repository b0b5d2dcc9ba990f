//! Deterministic file writers. Two runs with the same resolved config
//! must produce byte-identical artifacts, so nothing time- or
//! machine-dependent is ever written, floats use the shortest expansion
//! that round-trips, and all iteration orders are fixed.

use crate::CliResult;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

/// Shortest decimal expansion that parses back to the same f64. Rust's
/// float Display guarantees exactly that.
pub fn f(x: f64) -> String {
    format!("{x}")
}

/// Option<f64> as a CSV cell: empty when absent.
pub fn opt_f(x: Option<f64>) -> String {
    x.map(|v| f(v)).unwrap_or_default()
}

pub struct OutDir {
    dir: PathBuf,
}

impl OutDir {
    pub fn create(dir: &str) -> CliResult<OutDir> {
        std::fs::create_dir_all(dir)?;
        Ok(OutDir { dir: PathBuf::from(dir) })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn write(&self, name: &str, content: &str) -> CliResult<PathBuf> {
        let path = self.path(name);
        std::fs::write(&path, content)?;
        Ok(path)
    }

    /// Serializes with serde_json's stable field ordering plus a trailing
    /// newline.
    pub fn write_json<T: serde::Serialize>(&self, name: &str, value: &T) -> CliResult<PathBuf> {
        let mut text = serde_json::to_string_pretty(value)
            .map_err(|e| crate::CliError::Run(format!("json encoding: {e}")))?;
        text.push('\n');
        self.write(name, &text)
    }
}

/// Assembles a CSV with a fixed header; rows are written in call order.
pub struct Csv {
    text: String,
    columns: usize,
}

impl Csv {
    pub fn new(header: &str) -> Csv {
        let mut text = String::new();
        let _ = writeln!(text, "{header}");
        Csv { text, columns: header.split(',').count() }
    }

    pub fn row(&mut self, cells: &[String]) {
        debug_assert_eq!(cells.len(), self.columns, "row width must match the header");
        let _ = writeln!(self.text, "{}", cells.join(","));
    }

    pub fn finish(self) -> String {
        self.text
    }
}

/// A minimal gnuplot stub for a CSV artifact, emitted only on request.
pub fn gnuplot_stub(csv_name: &str, x_col: usize, y_col: usize, title: &str) -> String {
    format!(
        "set datafile separator ','\nset key autotitle columnhead\nset title '{title}'\nplot '{csv_name}' using {x_col}:{y_col} with lines\n"
    )
}

pub fn read_bytes(path: &Path) -> CliResult<Vec<u8>> {
    Ok(std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_formatting_roundtrips() {
        for &x in &[0.1, 1.0 / 3.0, 2.0f64.sqrt(), 1e-300, -0.0, 12345.6789e17] {
            let s = f(x);
            let back: f64 = s.parse().unwrap();
            assert_eq!(back.to_bits(), x.to_bits(), "{s} must parse back to the same bits");
        }
    }

    #[test]
    fn csv_layout_is_stable() {
        let mut c = Csv::new("a,b");
        c.row(&["1".into(), "2".into()]);
        assert_eq!(c.finish(), "a,b\n1,2\n");
    }
}
