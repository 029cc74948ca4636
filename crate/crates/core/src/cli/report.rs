//! Deterministic JSON and CSV output.

use serde::Serialize;
use serde_json::{Number, Value};
use std::path::Path;

use crate::error::{Error, Result};

/// Floats with 17 significant digits; integers and everything else as is.
pub fn fixed_digits(v: Value) -> Value {
    match v {
        Value::Number(n) if !(n.is_i64() || n.is_u64()) => match n.as_f64() {
            Some(x) if x.is_finite() => format!("{x:.16e}").parse::<Number>().map(Value::Number).unwrap_or(Value::Null),
            _ => Value::Null,
        },
        Value::Array(a) => Value::Array(a.into_iter().map(fixed_digits).collect()),
        Value::Object(m) => Value::Object(m.into_iter().map(|(k, v)| (k, fixed_digits(v))).collect()),
        other => other,
    }
}

pub fn to_json<T: Serialize>(payload: &T) -> Result<String> {
    let v = serde_json::to_value(payload).map_err(|e| Error::Config(e.to_string()))?;
    let mut s = serde_json::to_string_pretty(&fixed_digits(v)).map_err(|e| Error::Config(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        String::new()
    }
}

pub fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.write_record(r).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Config(format!("csv: {other:?}")),
    }
}
