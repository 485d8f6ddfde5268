use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use num_bigint::BigInt;
use serde::Serialize;
use toral_recurrence::{Alpha, Error, IntegerMatrix, RateFunction, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

/// Flags shared by every subcommand.
#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Matrix as JSON (`[[3,1],[1,2]]`) or compact text (`"2; 3 1 1 2"`).
    #[arg(long, global = true, conflicts_with = "matrix_file")]
    pub matrix: Option<String>,
    /// File holding the matrix in either accepted form.
    #[arg(long, global = true)]
    pub matrix_file: Option<PathBuf>,
    /// Lower order of psi(n) = e^{-alpha n}: `ln2`, `ln(3/2)`, a decimal or `inf`.
    #[arg(long, global = true, conflicts_with = "psi_table")]
    pub alpha: Option<String>,
    /// CSV file of `n,psi` rows, n = 1, 2, ... consecutive.
    #[arg(long, global = true)]
    pub psi_table: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Bits of certified precision for eigenvalue moduli (10..=50).
    #[arg(long, global = true, default_value_t = 40)]
    pub precision: u32,
    /// Largest number of points or nodes a command may materialise.
    #[arg(long, global = true)]
    pub cap: Option<u64>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

pub const DEFAULT_CAP: u64 = 10_000_000;

impl Common {
    pub fn matrix(&self) -> Result<IntegerMatrix> {
        match (&self.matrix, &self.matrix_file) {
            (Some(m), _) => parse_matrix(m),
            (None, Some(path)) => parse_matrix(&read(path)?),
            (None, None) => Err(Error::InvalidArgument("--matrix or --matrix-file is required".into())),
        }
    }

    pub fn psi(&self) -> Result<RateFunction> {
        match (&self.alpha, &self.psi_table) {
            (Some(a), _) => RateFunction::exponential(a.parse()?),
            (None, Some(path)) => RateFunction::table(parse_psi_table(&read(path)?)?),
            (None, None) => Err(Error::InvalidArgument("--alpha or --psi-table is required".into())),
        }
    }

    pub fn alpha(&self) -> Result<Alpha> {
        match &self.alpha {
            Some(a) => a.parse(),
            None => Ok(self.psi()?.alpha()),
        }
    }

    pub fn tol(&self) -> Result<f64> {
        if !(10..=50).contains(&self.precision) {
            return Err(Error::InvalidArgument(format!("--precision must lie in 10..=50, got {}", self.precision)));
        }
        Ok((-(self.precision as f64)).exp2())
    }

    pub fn cap_or(&self, default: u64) -> Result<BigInt> {
        match self.cap {
            Some(0) => Err(Error::InvalidArgument("--cap must be positive".into())),
            Some(c) => Ok(BigInt::from(c)),
            None => Ok(BigInt::from(default)),
        }
    }

    pub fn psi_echo(&self) -> serde_json::Value {
        match (&self.alpha, &self.psi_table) {
            (Some(a), _) => serde_json::json!({ "alpha": a }),
            (None, Some(p)) => serde_json::json!({ "table": p.display().to_string() }),
            (None, None) => serde_json::Value::Null,
        }
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::InvalidArgument(format!("cannot read {}: {e}", path.display())))
}

pub fn parse_matrix(s: &str) -> Result<IntegerMatrix> {
    let t = s.trim();
    if t.starts_with('[') {
        let rows: Vec<Vec<i64>> =
            serde_json::from_str(t).map_err(|e| Error::Parse(format!("bad JSON matrix: {e}")))?;
        IntegerMatrix::from_i64_rows(&rows)
    } else {
        t.parse()
    }
}

/// Rows `n,psi`; a non-numeric first row is taken as a header.
pub fn parse_psi_table(text: &str) -> Result<Vec<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut values = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse(format!("psi table: {e}")))?;
        if rec.len() != 2 {
            return Err(Error::Parse(format!("psi table row {} needs 2 fields", i + 1)));
        }
        let Ok(n) = rec[0].parse::<usize>() else {
            if i == 0 {
                continue;
            }
            return Err(Error::Parse(format!("psi table row {}: bad n {:?}", i + 1, &rec[0])));
        };
        if n != values.len() + 1 {
            return Err(Error::Parse(format!("psi table must list n = 1, 2, ... in order; got {n}")));
        }
        let v: f64 = rec[1]
            .parse()
            .map_err(|_| Error::Parse(format!("psi table row {}: bad value {:?}", i + 1, &rec[1])))?;
        values.push(v);
    }
    Ok(values)
}

/// `a:b`, `a..b` or a single `a`.
pub fn parse_range(s: &str) -> std::result::Result<(u32, u32), String> {
    let (lo, hi) = s
        .split_once(':')
        .or_else(|| s.split_once(".."))
        .unwrap_or((s, s));
    let lo: u32 = lo.trim().parse().map_err(|_| format!("bad range start in {s:?}"))?;
    let hi: u32 = hi.trim().parse().map_err(|_| format!("bad range end in {s:?}"))?;
    if lo == 0 || hi < lo {
        return Err(format!("range {s:?} must satisfy 1 <= a <= b"));
    }
    Ok((lo, hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_forms_agree() {
        assert_eq!(parse_matrix("[[3,1],[1,2]]").unwrap(), parse_matrix("2; 3 1 1 2").unwrap());
        assert!(parse_matrix("[[1,2]]").is_err());
    }

    #[test]
    fn ranges() {
        assert_eq!(parse_range("6:12"), Ok((6, 12)));
        assert_eq!(parse_range("2..8"), Ok((2, 8)));
        assert_eq!(parse_range("5"), Ok((5, 5)));
        assert!(parse_range("0:3").is_err());
        assert!(parse_range("4:3").is_err());
    }

    #[test]
    fn psi_tables() {
        assert_eq!(parse_psi_table("n,psi\n1,0.25\n2,0.0625\n").unwrap(), vec![0.25, 0.0625]);
        assert!(parse_psi_table("1,0.25\n3,0.1\n").is_err());
    }
}
