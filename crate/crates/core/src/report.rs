//! Report plumbing: numerics tagged with provenance, and deterministic
//! CSV/JSON emission. Floats are written with Rust's shortest round-trip
//! formatting so identical runs produce identical bytes.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::error::{CoreError, Result};

/// A reported numeric with its provenance: exact linear algebra, Monte
/// Carlo (with standard error), or a windowed approximation (with an error
/// bound).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Num {
    pub value: f64,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, Copy, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    Exact,
    Mc { stderr: f64 },
    Windowed { bound: f64 },
}

impl Num {
    pub fn exact(value: f64) -> Num {
        Num { value, provenance: Provenance::Exact }
    }

    pub fn mc(value: f64, stderr: f64) -> Num {
        Num { value, provenance: Provenance::Mc { stderr } }
    }

    pub fn windowed(value: f64, bound: f64) -> Num {
        Num { value, provenance: Provenance::Windowed { bound } }
    }

    /// Provenance rendered for a CSV cell: `exact`, `mc(se)`, `windowed(b)`.
    pub fn provenance_cell(&self) -> String {
        match self.provenance {
            Provenance::Exact => "exact".into(),
            Provenance::Mc { stderr } => format!("mc({stderr})"),
            Provenance::Windowed { bound } => format!("windowed({bound})"),
        }
    }
}

/// A CSV table built in memory and written atomically; headers are part of
/// the constructor so every artifact is self-describing.
pub struct Csv {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Csv {
    pub fn new(header: &[&str]) -> Csv {
        Csv { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn cell_f64(v: f64) -> String {
        format!("{v}")
    }

    pub fn to_string(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{}", self.header.join(","));
        for row in &self.rows {
            let _ = writeln!(out, "{}", row.join(","));
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_string())
            .map_err(|e| CoreError::InvalidParams(format!("write {}: {e}", path.display())))
    }
}

/// Write a serializable report as pretty JSON.
pub fn write_json<T: Serialize>(path: &Path, report: &T) -> Result<()> {
    let body = serde_json::to_string_pretty(report)
        .map_err(|e| CoreError::InvalidParams(format!("serialize: {e}")))?;
    std::fs::write(path, body + "\n")
        .map_err(|e| CoreError::InvalidParams(format!("write {}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_is_deterministic_and_headed() {
        let mut a = Csv::new(&["n", "value", "provenance"]);
        a.push(vec!["4".into(), Csv::cell_f64(0.1 + 0.2), Num::exact(0.3).provenance_cell()]);
        let mut b = Csv::new(&["n", "value", "provenance"]);
        b.push(vec!["4".into(), Csv::cell_f64(0.1 + 0.2), Num::exact(0.3).provenance_cell()]);
        assert_eq!(a.to_string(), b.to_string());
        assert!(a.to_string().starts_with("n,value,provenance\n"));
        // shortest round-trip form survives a parse
        let cell = Csv::cell_f64(1.0 / 3.0);
        assert_eq!(cell.parse::<f64>().unwrap(), 1.0 / 3.0);
    }

    #[test]
    fn provenance_cells() {
        assert_eq!(Num::exact(1.0).provenance_cell(), "exact");
        assert_eq!(Num::mc(1.0, 0.5).provenance_cell(), "mc(0.5)");
        assert_eq!(Num::windowed(1.0, 0.25).provenance_cell(), "windowed(0.25)");
    }
}
