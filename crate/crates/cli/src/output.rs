use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::ValueEnum;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Jsonl,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    U(u64),
    I(i64),
    F(f64),
    B(bool),
    S(String),
    Empty,
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::U(v)
    }
}
impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::U(v as u64)
    }
}
impl From<i64> for Cell {
    fn from(v: i64) -> Self {
        Cell::I(v)
    }
}
impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::F(v)
    }
}
impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::B(v)
    }
}
impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::S(v.to_owned())
    }
}
impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::S(v)
    }
}
impl<T: Into<Cell>> From<Option<T>> for Cell {
    fn from(v: Option<T>) -> Self {
        v.map_or(Cell::Empty, Into::into)
    }
}

/// Shortest round-trip text; non-finite values as `inf`, `-inf`, `NaN`.
fn float_text(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{v:?}")
    }
}

impl Cell {
    fn csv_text(&self) -> String {
        match self {
            Cell::U(v) => v.to_string(),
            Cell::I(v) => v.to_string(),
            Cell::F(v) => float_text(*v),
            Cell::B(v) => v.to_string(),
            Cell::S(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }

    fn json_text(&self) -> String {
        match self {
            Cell::F(v) if !v.is_finite() => format!("\"{}\"", float_text(*v)),
            Cell::S(s) => serde_json::to_string(s).expect("string serializes"),
            Cell::Empty => "null".into(),
            c => c.csv_text(),
        }
    }
}

/// Rows of one output file with fixed columns. The first column is always
/// the config hash.
pub struct Table {
    pub name: &'static str,
    columns: Vec<&'static str>,
    rows: Vec<Vec<Cell>>,
    hash: String,
}

impl Table {
    pub fn new(name: &'static str, hash: &str, columns: &[&'static str]) -> Self {
        let mut cols = vec!["config_hash"];
        cols.extend_from_slice(columns);
        Self { name, columns: cols, rows: Vec::new(), hash: hash.to_owned() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len() + 1, self.columns.len());
        let mut r = Vec::with_capacity(row.len() + 1);
        r.push(Cell::S(self.hash.clone()));
        r.extend(row);
        self.rows.push(r);
    }

    fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(&self.columns)?;
        for r in &self.rows {
            out.write_record(r.iter().map(Cell::csv_text))?;
        }
        out.flush()?;
        Ok(())
    }

    fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        for r in &self.rows {
            let mut line = String::from("{");
            for (i, (c, v)) in self.columns.iter().zip(r).enumerate() {
                if i > 0 {
                    line.push(',');
                }
                write!(line, "\"{c}\":{}", v.json_text()).expect("writing to a string");
            }
            line.push('}');
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    /// Whitespace-separated numeric columns for gnuplot, header as a comment.
    fn write_dat<W: Write>(&self, mut w: W, columns: &[&str]) -> Result<()> {
        let idx: Vec<usize> =
            columns.iter().filter_map(|c| self.columns.iter().position(|k| k == c)).collect();
        writeln!(w, "# {}  (config {})", columns.join(" "), self.hash)?;
        for r in &self.rows {
            let line: Vec<String> = idx.iter().map(|&i| r[i].csv_text()).map(|s| if s.is_empty() { "?".into() } else { s }).collect();
            writeln!(w, "{}", line.join(" "))?;
        }
        Ok(())
    }
}

pub struct OutputDir {
    pub dir: PathBuf,
    pub format: Format,
    pub written: Vec<PathBuf>,
}

impl OutputDir {
    pub fn create(dir: &Path, format: Format) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))?;
        Ok(Self { dir: dir.to_owned(), format, written: Vec::new() })
    }

    fn open(&mut self, file: String) -> Result<BufWriter<fs::File>> {
        let path = self.dir.join(file);
        let f = fs::File::create(&path).with_context(|| format!("writing {}", path.display()))?;
        self.written.push(path);
        Ok(BufWriter::new(f))
    }

    pub fn table(&mut self, t: &Table) -> Result<()> {
        match self.format {
            Format::Csv => {
                let w = self.open(format!("{}.csv", t.name))?;
                t.write_csv(w)
            }
            Format::Jsonl => {
                let w = self.open(format!("{}.jsonl", t.name))?;
                t.write_jsonl(w)
            }
        }
    }

    /// Plot-ready companion of a table.
    pub fn dat(&mut self, t: &Table, columns: &[&str]) -> Result<()> {
        let w = self.open(format!("{}.dat", t.name))?;
        t.write_dat(w, columns)
    }

    pub fn raw(&mut self, file: &str, write: impl FnOnce(&mut BufWriter<fs::File>) -> Result<()>) -> Result<()> {
        let mut w = self.open(file.to_owned())?;
        write(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn summary(&mut self, value: &serde_json::Value) -> Result<()> {
        let mut w = self.open("summary.json".into())?;
        serde_json::to_writer_pretty(&mut w, value)?;
        writeln!(w)?;
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_text_round_trips() {
        for v in [0.1, 1e-300, 2.0, -3.5e10] {
            assert_eq!(float_text(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(float_text(f64::INFINITY), "inf");
        assert_eq!(float_text(f64::NAN), "NaN");
    }

    #[test]
    fn table_formats() {
        let mut t = Table::new("x", "abc", &["n", "v", "note"]);
        t.push(vec![1u64.into(), f64::INFINITY.into(), Cell::Empty]);
        let mut csv = Vec::new();
        t.write_csv(&mut csv).unwrap();
        assert_eq!(String::from_utf8(csv).unwrap(), "config_hash,n,v,note\nabc,1,inf,\n");
        let mut js = Vec::new();
        t.write_jsonl(&mut js).unwrap();
        assert_eq!(String::from_utf8(js).unwrap(), "{\"config_hash\":\"abc\",\"n\":1,\"v\":\"inf\",\"note\":null}\n");
    }
}
