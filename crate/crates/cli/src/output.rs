use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use cordes_core::perturb::TraceRow;
use cordes_core::ModeProfile;
use serde::Serialize;
use serde_json::Value;

use crate::error::CliError;

/// Files produced by one run, keyed by path relative to the output directory.
/// Everything is rendered in memory and written at the end.
#[derive(Debug, Default)]
pub struct Artifacts {
    files: BTreeMap<PathBuf, Vec<u8>>,
}

impl Artifacts {
    pub fn json(&mut self, name: &str, value: &impl Serialize) -> Result<(), CliError> {
        let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| CliError::Config(e.to_string()))?;
        bytes.push(b'\n');
        self.files.insert(PathBuf::from(name), bytes);
        Ok(())
    }

    pub fn csv(&mut self, name: impl Into<PathBuf>, table: Csv) {
        self.files.insert(name.into(), table.finish().into_bytes());
    }

    pub fn raw(&mut self, name: impl Into<PathBuf>, bytes: Vec<u8>) {
        self.files.insert(name.into(), bytes);
    }

    pub fn mode(&mut self, m: &ModeProfile, extra: Option<(&str, &[f64])>) {
        self.csv(format!("modes/{}.csv", m.k), mode_table(m, extra));
    }

    pub fn summary(&self) -> Option<Value> {
        self.files
            .get(Path::new("summary.json"))
            .and_then(|b| serde_json::from_slice(b).ok())
    }

    pub fn names(&self) -> impl Iterator<Item = &Path> {
        self.files.keys().map(|p| p.as_path())
    }

    pub fn get(&self, name: &str) -> Option<&[u8]> {
        self.files.get(Path::new(name)).map(|v| v.as_slice())
    }

    pub fn write_to(&self, dir: &Path) -> Result<(), CliError> {
        for (name, bytes) in &self.files {
            let path = dir.join(name);
            if let Some(parent) = path.parent() {
                std::fs::create_dir_all(parent)?;
            }
            std::fs::write(path, bytes)?;
        }
        Ok(())
    }
}

/// CSV with a header row and 17-significant-digit floats.
#[derive(Debug)]
pub struct Csv {
    out: String,
    width: usize,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        Self {
            out: header.join(",") + "\n",
            width: header.len(),
        }
    }

    pub fn row(&mut self, cells: &[Cell]) {
        debug_assert_eq!(cells.len(), self.width);
        for (i, c) in cells.iter().enumerate() {
            if i > 0 {
                self.out.push(',');
            }
            match c {
                Cell::F(v) => fmt_float(&mut self.out, *v),
                Cell::I(v) => write!(self.out, "{v}").unwrap(),
                Cell::Empty => {}
            }
        }
        self.out.push('\n');
    }

    pub fn finish(self) -> String {
        self.out
    }
}

pub enum Cell {
    F(f64),
    I(i64),
    Empty,
}

pub fn fmt_float(out: &mut String, v: f64) {
    if v.is_finite() {
        write!(out, "{v:.16e}").unwrap();
    } else {
        write!(out, "{v}").unwrap();
    }
}

pub fn mode_table(m: &ModeProfile, extra: Option<(&str, &[f64])>) -> Csv {
    let mut header = vec!["r", "a", "a_prime", "a_double_prime"];
    if let Some((name, _)) = extra {
        header.push(name);
    }
    let mut t = Csv::new(&header);
    let ap = m.a_prime.clone().unwrap_or_else(|| m.grid.derivative(&m.a));
    let app = m.a_double_prime.clone().unwrap_or_else(|| m.grid.derivative(&ap));
    for (i, r) in m.grid.radii().iter().enumerate() {
        let mut cells = vec![Cell::F(*r), Cell::F(m.a[i]), Cell::F(ap[i]), Cell::F(app[i])];
        if let Some((_, v)) = extra {
            cells.push(Cell::F(v[i]));
        }
        t.row(&cells);
    }
    t
}

pub fn trace_table(rows: &[TraceRow]) -> Csv {
    let mut t = Csv::new(&["iter", "norm", "diff", "ratio", "residual"]);
    for r in rows {
        t.row(&[
            Cell::I(r.iter as i64),
            Cell::F(r.norm),
            Cell::F(r.diff),
            r.ratio.map(Cell::F).unwrap_or(Cell::Empty),
            Cell::F(r.residual),
        ]);
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_carry_seventeen_digits() {
        let mut s = String::new();
        fmt_float(&mut s, 0.1);
        assert_eq!(s, "1.0000000000000001e-1");
        assert_eq!(s.parse::<f64>().unwrap(), 0.1);
    }

    #[test]
    fn empty_ratio_cell() {
        let rows = [TraceRow {
            iter: 1,
            norm: 1.0,
            diff: 0.5,
            ratio: None,
            residual: 0.0,
        }];
        let csv = trace_table(&rows).finish();
        assert_eq!(csv.lines().nth(1).unwrap(), "1,1.0000000000000000e0,5.0000000000000000e-1,,0.0000000000000000e0");
    }
}
