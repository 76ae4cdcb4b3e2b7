//! CSV and JSON plumbing shared by the subcommands.

use crate::CliError;
use serde::Serialize;
use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

pub const SCHEMA_VERSION: u32 = 1;

/// Columns of a headered numeric CSV file, keyed by header name.
pub struct Columns {
    pub path: PathBuf,
    pub names: Vec<String>,
    pub data: BTreeMap<String, Vec<f64>>,
}

impl Columns {
    pub fn read(path: &Path) -> Result<Self, CliError> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_path(path)
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        let names: Vec<String> = rdr
            .headers()
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?
            .iter()
            .map(str::to_string)
            .collect();
        if names.is_empty() || names.iter().all(|n| n.is_empty()) {
            return Err(CliError::Input(format!("{}: missing header row", path.display())));
        }
        let mut data: BTreeMap<String, Vec<f64>> = names.iter().map(|n| (n.clone(), Vec::new())).collect();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| {
                let line = e.position().map(|p| p.line()).unwrap_or(0);
                CliError::Input(format!("{}: line {line}: {e}", path.display()))
            })?;
            let line = rec.position().map(|p| p.line()).unwrap_or(0);
            for (name, field) in names.iter().zip(rec.iter()) {
                let v = parse_float(field).ok_or_else(|| {
                    CliError::Input(format!("{}: line {line}: column {name:?}: not a number: {field:?}", path.display()))
                })?;
                data.get_mut(name).expect("known column").push(v);
            }
        }
        Ok(Self { path: path.to_path_buf(), names, data })
    }

    pub fn get(&self, name: &str) -> Result<&[f64], CliError> {
        self.data.get(name).map(Vec::as_slice).ok_or_else(|| {
            CliError::Input(format!("{}: no column {name:?} (have {})", self.path.display(), self.names.join(", ")))
        })
    }

    pub fn optional(&self, name: &str) -> Option<&[f64]> {
        self.data.get(name).map(Vec::as_slice)
    }
}

fn parse_float(s: &str) -> Option<f64> {
    match s.to_ascii_lowercase().as_str() {
        "inf" | "+inf" | "infinity" => Some(f64::INFINITY),
        _ => s.parse::<f64>().ok().filter(|v| !v.is_nan()),
    }
}

/// 17 significant digits, trailing zeros trimmed; `inf` and `nan` spelled out.
pub fn fmt17(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let exp = x.abs().log10().floor() as i32;
    if (-5..16).contains(&exp) {
        let decimals = (16 - exp).max(0) as usize;
        let s = format!("{x:.decimals$}");
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    } else {
        let s = format!("{x:.16e}");
        let (mant, e) = s.split_once('e').expect("exponent form");
        let mant = if mant.contains('.') { mant.trim_end_matches('0').trim_end_matches('.') } else { mant };
        format!("{mant}e{e}")
    }
}

/// Where results go: a file when `--output` is given, stdout otherwise.
pub struct Sink {
    path: Option<PathBuf>,
}

impl Sink {
    pub fn new(path: Option<PathBuf>) -> Self {
        Self { path }
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn write(&self, text: &str) -> Result<(), CliError> {
        match &self.path {
            Some(p) => std::fs::write(p, text).map_err(|e| CliError::Io(format!("{}: {e}", p.display()))),
            None => {
                let mut out = std::io::stdout().lock();
                out.write_all(text.as_bytes()).map_err(|e| CliError::Io(e.to_string()))?;
                out.flush().map_err(|e| CliError::Io(e.to_string()))
            }
        }
    }
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    schema_version: u32,
    command: &'a str,
    result: &'a T,
}

pub fn to_json<T: Serialize>(command: &str, result: &T) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(&Envelope { schema_version: SCHEMA_VERSION, command, result })
        .map_err(|e| CliError::Io(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

/// A CSV document from a header and numeric rows.
pub fn to_csv(header: &[&str], rows: &[Vec<f64>]) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(|e| CliError::Io(e.to_string()))?;
    for row in rows {
        w.write_record(row.iter().map(|x| fmt17(*x))).map_err(|e| CliError::Io(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| CliError::Io(e.to_string()))
}

/// CSV with a leading text column.
pub fn to_labelled_csv(header: &[String], labels: &[String], rows: &[Vec<f64>]) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(|e| CliError::Io(e.to_string()))?;
    for (l, row) in labels.iter().zip(rows) {
        let mut rec = vec![l.clone()];
        rec.extend(row.iter().map(|x| fmt17(*x)));
        w.write_record(&rec).map_err(|e| CliError::Io(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| CliError::Io(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for x in [0.1, 1.0 / 3.0, 137.7, 1e-300, 6.02e23, -2.5, 9.0, 1e-5, 123456789012345.6] {
            assert_eq!(fmt17(x).parse::<f64>().unwrap(), x, "{x}");
        }
        assert_eq!(fmt17(9.0), "9");
        assert_eq!(fmt17(0.25), "0.25");
        assert_eq!(fmt17(f64::INFINITY), "inf");
    }
}
