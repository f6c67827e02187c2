//! CSV writing with round-trippable number formatting.

use std::path::Path;

use anyhow::{Context, Result};

/// 17 significant digits, enough to reproduce any `f64` exactly.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// Blank for missing values.
pub fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

pub struct Table {
    writer: csv::Writer<std::fs::File>,
}

impl Table {
    pub fn create(path: &Path, header: &[&str]) -> Result<Self> {
        let mut writer = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_path(path)
            .with_context(|| format!("creating {}", path.display()))?;
        writer.write_record(header)?;
        Ok(Self { writer })
    }

    pub fn row<I, S>(&mut self, fields: I) -> Result<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer.write_record(fields)?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.writer.flush()?;
        Ok(())
    }
}

/// Reads one column of a CSV file with a header; blank cells become `None`.
pub fn read_column(path: &Path, column: &str) -> Result<Vec<Option<f64>>> {
    let mut reader = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let idx = reader
        .headers()?
        .iter()
        .position(|h| h == column)
        .with_context(|| format!("{} has no `{column}` column", path.display()))?;
    let mut out = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        let cell = rec.get(idx).unwrap_or("").trim();
        out.push(if cell.is_empty() {
            None
        } else {
            Some(cell.parse::<f64>().with_context(|| format!("bad number `{cell}` in column `{column}`"))?)
        });
    }
    Ok(out)
}
