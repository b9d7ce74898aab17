use std::io::Write;
use std::path::Path;

use serde_json::{Number, Value};

use crate::error::{Error, Result};
use crate::simlab::fmt17;
use crate::solver::Dataset;

/// Writes `bytes` to a temporary file next to `path` and renames it over
/// `path`.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// JSON number carrying 17 significant digits; non-finite values become
/// `null`.
pub fn json_number(v: f64) -> Value {
    if !v.is_finite() {
        return Value::Null;
    }
    Value::Number(fmt17(v).parse::<Number>().expect("formatted float is valid JSON"))
}

pub fn json_numbers(v: &[f64]) -> Value {
    Value::Array(v.iter().map(|x| json_number(*x)).collect())
}

/// Reads a CSV with header `x1,...,xq,y`.
pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let text = std::fs::read_to_string(path)?;
    parse_dataset(&text)
}

pub fn parse_dataset(text: &str) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).flexible(true).trim(csv::Trim::All).from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| Error::parse(Some(1), e.to_string()))?.clone();
    let cols: Vec<&str> = header.iter().collect();
    if cols.last() != Some(&"y") {
        return Err(Error::parse(Some(1), "missing y column: header must be x1,...,xq,y"));
    }
    let q = cols.len() - 1;
    if q == 0 {
        return Err(Error::parse(Some(1), "header names no predictor columns"));
    }
    for (j, c) in cols[..q].iter().enumerate() {
        if *c != format!("x{}", j + 1) {
            return Err(Error::parse(Some(1), format!("column {} should be named x{}, found {c:?}", j + 1, j + 1)));
        }
    }
    let mut x = Vec::new();
    let mut y = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::parse(e.position().map(|p| p.line() as usize), e.to_string()))?;
        let line = record.position().map(|p| p.line() as usize);
        if record.len() != q + 1 {
            return Err(Error::parse(line, format!("expected {} fields, found {}", q + 1, record.len())));
        }
        for (j, cell) in record.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| Error::parse(line, format!("non-numeric value {cell:?}")))?;
            if !v.is_finite() {
                return Err(Error::parse(line, format!("non-finite value {cell:?}")));
            }
            if j < q {
                x.push(v);
            } else {
                y.push(v);
            }
        }
    }
    if y.is_empty() {
        return Err(Error::parse(Some(1), "dataset has no rows"));
    }
    Dataset::new(q, x, y)
}

pub fn dataset_to_csv(data: &Dataset) -> String {
    let mut out: Vec<String> = (1..=data.q()).map(|j| format!("x{j}")).collect();
    out.push("y".into());
    let mut s = out.join(",") + "\n";
    for i in 0..data.n() {
        let mut row: Vec<String> = data.x_row(i).iter().map(|v| fmt17(*v)).collect();
        row.push(fmt17(data.y()[i]));
        s += &row.join(",");
        s.push('\n');
    }
    s
}

pub fn save_dataset(path: &Path, data: &Dataset) -> Result<()> {
    atomic_write(path, dataset_to_csv(data).as_bytes())
}
