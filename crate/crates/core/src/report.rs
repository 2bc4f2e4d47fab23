//! Output formatting shared by the CLI.
//!
//! JSON reports wrap a command's configuration and result in a versioned
//! envelope. Floats in both JSON and CSV are rounded to
//! [`SIGNIFICANT_DIGITS`] significant digits and printed with Rust's
//! locale-independent shortest representation, so re-serializing a parsed
//! report reproduces it byte for byte.

use std::io::Write;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Number, Value};

use crate::error::Result;

pub const SCHEMA_VERSION: u32 = 1;
pub const SIGNIFICANT_DIGITS: usize = 12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Report<C, R> {
    pub schema_version: u32,
    pub command: String,
    pub config: C,
    pub result: R,
}

impl<C: Serialize, R: Serialize> Report<C, R> {
    pub fn new(command: &str, config: C, result: R) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            command: command.to_owned(),
            config,
            result,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        to_json(self)
    }
}

impl<C: DeserializeOwned, R: DeserializeOwned> Report<C, R> {
    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Rounds to [`SIGNIFICANT_DIGITS`] significant digits. Non-finite values
/// pass through unchanged.
pub fn round_significant(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x)
        .parse()
        .unwrap_or(x)
}

/// Pretty JSON with every float rounded; non-finite floats become `null`.
pub fn to_json<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut v = serde_json::to_value(value)?;
    round_value(&mut v);
    let mut s = serde_json::to_string_pretty(&v)?;
    s.push('\n');
    Ok(s)
}

fn round_value(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            *v = n
                .as_f64()
                .and_then(|x| Number::from_f64(round_significant(x)))
                .map_or(Value::Null, Value::Number);
        }
        Value::Array(items) => items.iter_mut().for_each(round_value),
        Value::Object(map) => map.values_mut().for_each(round_value),
        _ => {}
    }
}

/// CSV cell for a float: rounded, shortest form; `nan`, `inf`, `-inf` for
/// non-finite values.
pub fn fmt_float(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        let r = round_significant(x);
        if r != 0.0 && !(1e-5..1e15).contains(&r.abs()) {
            format!("{r:e}")
        } else {
            format!("{r}")
        }
    }
}

/// CSV cell for an optional float; empty when absent.
pub fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_float).unwrap_or_default()
}

/// Integer vectors inside one CSV cell, joined with `;`.
pub fn fmt_counts(xs: &[usize]) -> String {
    xs.iter().map(usize::to_string).collect::<Vec<_>>().join(";")
}

/// A table with a fixed header.
pub trait CsvRow {
    const HEADER: &'static [&'static str];
    fn cells(&self) -> Vec<String>;
}

pub fn write_csv<W: Write, T: CsvRow>(out: W, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(T::HEADER)?;
    for row in rows {
        w.write_record(row.cells())?;
    }
    w.flush()?;
    Ok(())
}

pub fn csv_string<T: CsvRow>(rows: &[T]) -> Result<String> {
    let mut buf = Vec::new();
    write_csv(&mut buf, rows)?;
    Ok(String::from_utf8(buf).expect("csv output is utf-8"))
}
