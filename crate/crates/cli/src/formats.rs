//! Point lists, PBM occupancy bitmaps and CSV/JSON reports.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use cejulia::porosity::DyadicOccupancy;
use num_complex::Complex64;
use serde::Serialize;

fn open_read(path: &Path) -> Result<Box<dyn BufRead>> {
    if path == Path::new("-") {
        Ok(Box::new(BufReader::new(io::stdin())))
    } else {
        Ok(Box::new(BufReader::new(File::open(path).with_context(|| format!("cannot open {}", path.display()))?)))
    }
}

fn open_write(path: &Path) -> Result<Box<dyn Write>> {
    if path == Path::new("-") {
        Ok(Box::new(BufWriter::new(io::stdout())))
    } else {
        Ok(Box::new(BufWriter::new(File::create(path).with_context(|| format!("cannot write {}", path.display()))?)))
    }
}

/// One `re im` pair per line; `#` starts a comment.
pub fn parse_points(text: &str) -> Result<Vec<Complex64>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap().trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 2 {
            bail!("line {}: expected `re im`, got {raw:?}", i + 1);
        }
        let re: f64 = fields[0].parse().with_context(|| format!("line {}: bad number", i + 1))?;
        let im: f64 = fields[1].parse().with_context(|| format!("line {}: bad number", i + 1))?;
        out.push(Complex64::new(re, im));
    }
    Ok(out)
}

pub fn read_points(path: &Path) -> Result<Vec<Complex64>> {
    let mut text = String::new();
    open_read(path)?.read_to_string(&mut text)?;
    parse_points(&text)
}

pub fn write_points(path: &Path, comments: &[String], points: &[Complex64]) -> Result<()> {
    let mut w = open_write(path)?;
    for c in comments {
        writeln!(w, "# {c}")?;
    }
    for z in points {
        writeln!(w, "{:e} {:e}", z.re, z.im)?;
    }
    w.flush()?;
    Ok(())
}

/// Plain PBM of the finest level of a planar occupancy; the top row is the
/// largest `y`.
pub fn pbm_string(occ: &DyadicOccupancy, comments: &[String]) -> Result<String> {
    if occ.dim() != 2 {
        bail!("PBM output needs a planar occupancy");
    }
    let side = 1usize << occ.depth();
    let mut grid = vec![b'0'; side * side];
    for b in occ.boxes(occ.depth()) {
        let row = side - 1 - b[1] as usize;
        grid[row * side + b[0] as usize] = b'1';
    }
    let mut out = String::from("P1\n");
    for c in comments {
        out.push_str(&format!("# {c}\n"));
    }
    out.push_str(&format!("{side} {side}\n"));
    for row in grid.chunks(side) {
        for chunk in row.chunks(70) {
            out.push_str(std::str::from_utf8(chunk).unwrap());
            out.push('\n');
        }
    }
    Ok(out)
}

pub fn write_pbm(path: &Path, occ: &DyadicOccupancy, comments: &[String]) -> Result<()> {
    let mut w = open_write(path)?;
    w.write_all(pbm_string(occ, comments)?.as_bytes())?;
    w.flush()?;
    Ok(())
}

/// Reads a square plain PBM whose side is a power of two.
pub fn parse_pbm(text: &str) -> Result<DyadicOccupancy> {
    let body: String = text.lines().map(|l| l.split('#').next().unwrap()).collect::<Vec<_>>().join("\n");
    let mut tokens = body.split_whitespace();
    if tokens.next() != Some("P1") {
        bail!("not a plain PBM (missing P1)");
    }
    let mut dim = || -> Result<usize> { Ok(tokens.next().context("truncated PBM header")?.parse()?) };
    let (w, h) = (dim()?, dim()?);
    if w != h || !w.is_power_of_two() {
        bail!("PBM must be square with a power-of-two side, got {w}x{h}");
    }
    let depth = w.trailing_zeros();
    let bits: Vec<u8> = tokens.flat_map(|t| t.bytes()).collect();
    if bits.len() != w * h {
        bail!("PBM has {} pixels, expected {}", bits.len(), w * h);
    }
    let mut cells = Vec::new();
    for (k, &b) in bits.iter().enumerate() {
        match b {
            b'1' => cells.push(vec![(k % w) as u32, (h - 1 - k / w) as u32]),
            b'0' => {}
            _ => bail!("PBM pixel {k} is not 0 or 1"),
        }
    }
    Ok(DyadicOccupancy::from_cells(2, depth, cells)?)
}

pub fn read_pbm(path: &Path) -> Result<DyadicOccupancy> {
    let mut text = String::new();
    open_read(path)?.read_to_string(&mut text)?;
    parse_pbm(&text)
}

/// A CSV table with `# key: value` header lines and a JSON sidecar holding
/// the same header and a summary.
#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub name: String,
    pub header: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub summary: serde_json::Value,
    /// Problems that make the run fail.
    pub violations: Vec<String>,
    pub warnings: Vec<String>,
}

impl Report {
    pub fn new(name: &str, header: Vec<(String, String)>, columns: &[&str]) -> Self {
        Report {
            name: name.to_string(),
            header,
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            summary: serde_json::Value::Null,
            violations: Vec::new(),
            warnings: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        for (k, v) in &self.header {
            writeln!(buf, "# {k}: {v}")?;
        }
        {
            let mut w = csv::Writer::from_writer(&mut buf);
            w.write_record(&self.columns)?;
            for r in &self.rows {
                w.write_record(r)?;
            }
            w.flush()?;
        }
        Ok(String::from_utf8(buf)?)
    }

    pub fn json_string(&self) -> Result<String> {
        let header: serde_json::Map<String, serde_json::Value> =
            self.header.iter().map(|(k, v)| (k.clone(), serde_json::Value::String(v.clone()))).collect();
        let doc = serde_json::json!({
            "report": self.name,
            "header": header,
            "summary": self.summary,
            "violations": self.violations,
            "warnings": self.warnings,
            "ok": self.ok(),
        });
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    /// Writes `<name>.csv` and `<name>.json` under `dir`.
    pub fn write(&self, dir: &Path) -> Result<(PathBuf, PathBuf)> {
        std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
        let csv_path = dir.join(format!("{}.csv", self.name));
        let json_path = dir.join(format!("{}.json", self.name));
        std::fs::write(&csv_path, self.csv_string()?).with_context(|| format!("cannot write {}", csv_path.display()))?;
        std::fs::write(&json_path, self.json_string()? + "\n")
            .with_context(|| format!("cannot write {}", json_path.display()))?;
        Ok((csv_path, json_path))
    }
}
