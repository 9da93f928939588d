//! CSV plumbing shared by every artifact writer.
//!
//! Numbers are written in decimal scientific notation with 17 significant
//! digits, `.` as separator and `\n` line endings, so identical inputs give
//! byte-identical files.

use std::fmt::Write as _;
use std::io::{self, Write};

pub fn fmt_num(x: f64) -> String {
    if x == 0.0 {
        // normalize -0
        return format!("{:.16e}", 0.0);
    }
    format!("{x:.16e}")
}

/// In-memory CSV table with an optional `#`-prefixed comment block.
#[derive(Clone, Debug, Default)]
pub struct CsvTable {
    comments: Vec<String>,
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self { comments: Vec::new(), header: header.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn comment(&mut self, line: impl Into<String>) -> &mut Self {
        self.comments.push(line.into());
        self
    }

    pub fn row<S: Into<String>>(&mut self, cells: impl IntoIterator<Item = S>) -> &mut Self {
        self.rows.push(cells.into_iter().map(Into::into).collect());
        self
    }

    pub fn rows(&self) -> &[Vec<String>] {
        &self.rows
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for c in &self.comments {
            let _ = writeln!(out, "# {c}");
        }
        if !self.header.is_empty() {
            out.push_str(&self.header.join(","));
            out.push('\n');
        }
        for r in &self.rows {
            out.push_str(&r.join(","));
            out.push('\n');
        }
        out
    }

    pub fn write_to(&self, w: &mut impl Write) -> io::Result<()> {
        w.write_all(self.render().as_bytes())
    }
}

/// Empty table with the estimator columns
/// `experiment_id, k, statistic, value, stderr`.
pub fn estimator_table() -> CsvTable {
    CsvTable::new(["experiment_id", "k", "statistic", "value", "stderr"])
}

/// Appends one estimator row.
pub fn push_estimate(t: &mut CsvTable, id: &str, k: usize, statistic: &str, value: f64, stderr: f64) {
    t.row([id.to_string(), k.to_string(), statistic.to_string(), fmt_num(value), fmt_num(stderr)]);
}
