//! Comma-separated output with `#`-prefixed header comments.

use std::io::Write;

/// Round-trip exact text for a double (17 significant digits).
pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

pub struct CsvWriter<'a> {
    out: &'a mut dyn Write,
}

impl<'a> CsvWriter<'a> {
    /// Writes `# relconc <command>` followed by one comment line per line of
    /// the configuration's debug form.
    pub fn new(
        out: &'a mut dyn Write,
        command: &str,
        config: &impl std::fmt::Debug,
    ) -> std::io::Result<Self> {
        writeln!(out, "# relconc {command}")?;
        for line in format!("{config:#?}").lines() {
            writeln!(out, "# {line}")?;
        }
        Ok(Self { out })
    }

    pub fn comment(&mut self, text: &str) -> std::io::Result<()> {
        writeln!(self.out, "# {text}")
    }

    pub fn row<S: AsRef<str>>(&mut self, cells: &[S]) -> std::io::Result<()> {
        let line: Vec<String> = cells.iter().map(|c| quote(c.as_ref())).collect();
        writeln!(self.out, "{}", line.join(","))
    }
}

fn quote(cell: &str) -> String {
    if cell.contains([',', '"', '\n']) {
        format!("\"{}\"", cell.replace('"', "\"\""))
    } else {
        cell.to_string()
    }
}
