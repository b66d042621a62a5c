//! Locale-independent number formatting and atomic CSV/JSON emission.
//!
//! Every file begins with (CSV) or contains (JSON) the exact configuration and
//! master seed that produced it. Files are written to a temporary sibling and
//! renamed, and an [`OutputSet`] removes everything it wrote when dropped
//! without [`OutputSet::commit`].

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{AppError, AppResult};

pub const DEFAULT_DIGITS: usize = 10;

/// `x` rounded to `digits` significant digits, `.` as decimal separator,
/// trailing zeros trimmed. Very large or small magnitudes use `e` notation.
pub fn fmt_sig(x: f64, digits: usize) -> String {
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let digits = digits.max(1);
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-5..15).contains(&exp) {
        return format!("{}e{}", trim_zeros(mantissa), exp);
    }
    let rounded: f64 = sci.parse().expect("valid float");
    let decimals = (digits as i32 - 1 - exp).max(0) as usize;
    trim_zeros(&format!("{:.*}", decimals, rounded)).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Header row plus string cells.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self { header: header.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push<S: Into<String>>(&mut self, row: impl IntoIterator<Item = S>) {
        self.rows.push(row.into_iter().map(Into::into).collect());
    }

    /// CSV bytes preceded by one `# config: <json>` comment line.
    pub fn to_csv_bytes<C: Serialize>(&self, config: &C) -> AppResult<Vec<u8>> {
        let mut out = Vec::new();
        writeln!(out, "# config: {}", serde_json::to_string(config)?).expect("vec write");
        {
            let mut w = csv::WriterBuilder::new().from_writer(&mut out);
            w.write_record(&self.header)?;
            for r in &self.rows {
                w.write_record(r)?;
            }
            w.flush().map_err(|e| AppError::io("<memory>", e))?;
        }
        Ok(out)
    }
}

/// Files written by one command; removed on drop unless committed.
#[derive(Debug)]
pub struct OutputSet {
    dir: PathBuf,
    written: Vec<PathBuf>,
    committed: bool,
}

impl OutputSet {
    pub fn new(dir: impl Into<PathBuf>) -> AppResult<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| AppError::io(&dir, e))?;
        Ok(Self { dir, written: Vec::new(), committed: false })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> AppResult<PathBuf> {
        let path = self.dir.join(name);
        let tmp = self.dir.join(format!(".{name}.partial"));
        fs::write(&tmp, bytes).map_err(|e| AppError::io(&tmp, e))?;
        fs::rename(&tmp, &path).map_err(|e| AppError::io(&path, e))?;
        self.written.push(path.clone());
        Ok(path)
    }

    pub fn write_csv<C: Serialize>(&mut self, name: &str, table: &Table, config: &C) -> AppResult<PathBuf> {
        let bytes = table.to_csv_bytes(config)?;
        self.write_bytes(name, &bytes)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> AppResult<PathBuf> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.write_bytes(name, &bytes)
    }

    pub fn files(&self) -> &[PathBuf] {
        &self.written
    }

    pub fn commit(mut self) -> Vec<PathBuf> {
        self.committed = true;
        std::mem::take(&mut self.written)
    }
}

impl Drop for OutputSet {
    fn drop(&mut self) {
        if !self.committed {
            for p in &self.written {
                let _ = fs::remove_file(p);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn significant_digits() {
        assert_eq!(fmt_sig(6.845238095238095, 10), "6.845238095");
        assert_eq!(fmt_sig(2.914213562373095, 8), "2.9142136");
        assert_eq!(fmt_sig(0.05, 10), "0.05");
        assert_eq!(fmt_sig(-1234.5, 3), "-1230");
        assert_eq!(fmt_sig(1.0, 10), "1");
        assert_eq!(fmt_sig(1.5e-9, 4), "1.5e-9");
        assert_eq!(fmt_sig(0.0, 4), "0");
    }

    #[test]
    fn uncommitted_outputs_are_removed() {
        let dir = tempfile::tempdir().unwrap();
        let path;
        {
            let mut set = OutputSet::new(dir.path()).unwrap();
            path = set.write_bytes("a.txt", b"x").unwrap();
            assert!(path.exists());
        }
        assert!(!path.exists());
        let mut set = OutputSet::new(dir.path()).unwrap();
        let kept = set.write_bytes("b.txt", b"y").unwrap();
        set.commit();
        assert!(kept.exists());
    }

    #[test]
    fn csv_embeds_config() {
        let mut t = Table::new(["a", "b"]);
        t.push(["1", "2"]);
        let bytes = t.to_csv_bytes(&serde_json::json!({"master_seed": 7})).unwrap();
        let s = String::from_utf8(bytes).unwrap();
        assert_eq!(s, "# config: {\"master_seed\":7}\na,b\n1,2\n");
    }
}
