//! Number formatting shared by the CSV and JSON writers.

use std::io;

use serde::Serialize;
use serde_json::ser::{Formatter, Serializer};

/// 17 significant digits, enough to round-trip any `f64`.
pub fn num(value: f64) -> String {
    if value.is_finite() {
        format!("{value:.16e}")
    } else if value.is_nan() {
        "NaN".to_string()
    } else if value > 0.0 {
        "inf".to_string()
    } else {
        "-inf".to_string()
    }
}

pub fn opt_num(value: Option<f64>) -> String {
    value.map(num).unwrap_or_default()
}

/// Compact JSON with every float written by [`num`].
#[derive(Default)]
struct SigFormatter;

impl Formatter for SigFormatter {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        writer.write_all(num(value).as_bytes())
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, f64::from(value))
    }
}

pub fn to_json<T: Serialize>(value: &T) -> serde_json::Result<String> {
    let mut out = Vec::new();
    let mut ser = Serializer::with_formatter(&mut out, SigFormatter);
    value.serialize(&mut ser)?;
    out.push(b'\n');
    Ok(String::from_utf8(out).expect("serde_json emits UTF-8"))
}
