use std::fs;
use std::io::{self, Write};

use serde::Serialize;
use serde_json::Value;
use toral_recurrence::Error;

use crate::config::{Common, Format};

pub const TOOL: &str = "torec";

#[derive(Serialize)]
pub struct Header {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config: Value,
    pub seed: u64,
    pub precision: u32,
}

impl Header {
    pub fn new(command: &str, common: &Common, params: Value) -> Self {
        let mut config = serde_json::Map::new();
        config.insert("matrix".into(), common.matrix.clone().map_or(Value::Null, Value::String));
        config.insert(
            "matrix_file".into(),
            common
                .matrix_file
                .as_ref()
                .map_or(Value::Null, |p| Value::String(p.display().to_string())),
        );
        config.insert("psi".into(), common.psi_echo());
        config.insert("cap".into(), common.cap.map_or(Value::Null, Value::from));
        config.insert("format".into(), serde_json::to_value(common.format).expect("enum"));
        config.insert("params".into(), params);
        Header {
            tool: TOOL,
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            config: Value::Object(config),
            seed: common.seed,
            precision: common.precision,
        }
    }
}

/// A command's answer: the JSON body plus an optional flat table for CSV.
pub struct Report {
    pub body: Value,
    pub table: Option<Table>,
}

pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Report {
    pub fn json(body: impl Serialize) -> Self {
        Report {
            body: serde_json::to_value(body).expect("serialisable report"),
            table: None,
        }
    }

    pub fn with_table(mut self, columns: Vec<String>, rows: Vec<Vec<String>>) -> Self {
        self.table = Some(Table { columns, rows });
        self
    }
}

pub fn float(v: f64) -> String {
    format!("{v:?}")
}

fn render(header: &Header, report: &Report, format: Format) -> Result<String, Error> {
    match format {
        Format::Json => {
            let doc = serde_json::json!({ "header": header, "result": report.body });
            Ok(serde_json::to_string_pretty(&doc).expect("json") + "\n")
        }
        Format::Csv => {
            let table = report
                .table
                .as_ref()
                .ok_or_else(|| Error::InvalidArgument("this command has no CSV form; use --format json".into()))?;
            let mut out = format!("# {}\n", serde_json::to_string(header).expect("json"));
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(&table.columns).map_err(csv_err)?;
            for row in &table.rows {
                w.write_record(row).map_err(csv_err)?;
            }
            out.push_str(&String::from_utf8(w.into_inner().map_err(|e| csv_err(e.into_error()))?).expect("utf8"));
            Ok(out)
        }
    }
}

fn csv_err(e: impl std::fmt::Display) -> Error {
    Error::InvalidArgument(format!("csv output: {e}"))
}

pub fn emit(header: &Header, report: &Report, common: &Common) -> Result<(), Error> {
    let text = render(header, report, common.format)?;
    write_text(&text, common)
}

fn write_text(text: &str, common: &Common) -> Result<(), Error> {
    match &common.out {
        Some(path) => fs::write(path, text)
            .map_err(|e| Error::InvalidArgument(format!("cannot write {}: {e}", path.display()))),
        None => io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| Error::InvalidArgument(format!("stdout: {e}"))),
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::HypothesisNotMet(_)
        | Error::InvalidSpectrum(_)
        | Error::RootOfUnity
        | Error::SingularMatrix
        | Error::NotDiagonalizableOverQ
        | Error::NonIntegerEigenvalues
        | Error::Infeasible { .. }
        | Error::EmptyLevel { .. } => 2,
        Error::CapExceeded { .. } | Error::ScaleTooFine { .. } => 3,
        Error::PrecisionFailure { .. } | Error::AmbiguousComparison(_) => 4,
        _ => 1,
    }
}

fn kind(code: i32) -> &'static str {
    match code {
        2 => "HypothesisViolated",
        3 => "CapExceeded",
        4 => "PrecisionFailure",
        _ => "UsageError",
    }
}

/// Reports a failure in the requested format and returns its exit code.
pub fn fail(header: &Header, e: &Error, common: &Common) -> i32 {
    let code = exit_code(e);
    eprintln!("{TOOL}: {e}");
    let body = serde_json::json!({ "error": kind(code), "message": e.to_string(), "exit_code": code });
    let text = match common.format {
        Format::Json => serde_json::to_string_pretty(&serde_json::json!({ "header": header, "result": body }))
            .expect("json")
            + "\n",
        Format::Csv => format!(
            "# {}\nerror,message\n{},\"{}\"\n",
            serde_json::to_string(header).expect("json"),
            kind(code),
            e.to_string().replace('"', "\"\"")
        ),
    };
    if write_text(&text, common).is_err() {
        return 1;
    }
    code
}
