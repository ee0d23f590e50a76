//! CSV output with round-trip-exact floats.

use std::io::{self, Write};

/// Formats a float with 17 significant digits (`{:.16e}`), which
/// round-trips every finite `f64`.
pub fn fmt_num(v: f64) -> String {
    if v.is_nan() {
        "NaN".to_string()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{v:.16e}")
    }
}

/// Row-per-sample CSV writer. The column list is emitted twice: once as a
/// `#` comment documenting the columns, once as the real header row.
pub struct CsvWriter<W: Write> {
    out: W,
    columns: usize,
}

impl<W: Write> CsvWriter<W> {
    pub fn new(mut out: W, description: &str, columns: &[&str]) -> io::Result<Self> {
        writeln!(out, "# {description}; columns: {}", columns.join(", "))?;
        writeln!(out, "{}", columns.join(","))?;
        Ok(Self { out, columns: columns.len() })
    }

    pub fn row(&mut self, values: &[f64]) -> io::Result<()> {
        debug_assert_eq!(values.len(), self.columns);
        let cells: Vec<String> = values.iter().map(|v| fmt_num(*v)).collect();
        writeln!(self.out, "{}", cells.join(","))
    }

    /// Row whose leading cells are preformatted text (labels, integers).
    pub fn row_with_labels(&mut self, labels: &[String], values: &[f64]) -> io::Result<()> {
        debug_assert_eq!(labels.len() + values.len(), self.columns);
        let cells: Vec<String> = labels.iter().cloned().chain(values.iter().map(|v| fmt_num(*v))).collect();
        writeln!(self.out, "{}", cells.join(","))
    }

    pub fn finish(mut self) -> io::Result<W> {
        self.out.flush()?;
        Ok(self.out)
    }
}
