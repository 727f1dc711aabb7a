//! CSV output: '#'-prefixed metadata lines, a header row, then rows of
//! 15-significant-digit scientific notation. Column layout is
//! plot-tool-friendly (whitespace-free, comma separated).

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::Result;

pub struct CsvWriter {
    out: BufWriter<File>,
}

impl CsvWriter {
    pub fn create(path: &Path, metadata: &[String], header: &[&str]) -> Result<Self> {
        let file = File::create(path)?;
        let mut out = BufWriter::new(file);
        for line in metadata {
            writeln!(out, "# {line}")?;
        }
        writeln!(out, "{}", header.join(","))?;
        Ok(CsvWriter { out })
    }

    pub fn row(&mut self, values: &[f64]) -> Result<()> {
        let mut first = true;
        for v in values {
            if !first {
                write!(self.out, ",")?;
            }
            write!(self.out, "{v:.14e}")?;
            first = false;
        }
        writeln!(self.out)?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.out.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn writes_metadata_header_and_sig_digits() {
        let dir = std::env::temp_dir().join("heom_csv_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("out.csv");
        let mut w = CsvWriter::create(
            &path,
            &["model: demo".to_string()],
            &["t_fs", "value"],
        )
        .unwrap();
        w.row(&[0.5, 1.0 / 3.0]).unwrap();
        w.finish().unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "# model: demo");
        assert_eq!(lines[1], "t_fs,value");
        assert!(lines[2].starts_with("5.00000000000000e-1,3.3333333333333"));
    }
}
