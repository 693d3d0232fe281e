//! JSON output with every float printed to 17 significant digits.

use std::io::{self, Write};

use serde::Serialize;
use serde_json::ser::{Formatter, Serializer};

struct SigFig17;

impl Formatter for SigFig17 {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        if value.is_finite() {
            write!(w, "{}", fmt17(value))
        } else {
            w.write_all(b"null")
        }
    }

    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, value as f64)
    }
}

/// `{:.16e}`, i.e. 17 significant digits, valid as a JSON number.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn to_string<T: Serialize>(value: &T) -> anyhow::Result<String> {
    let mut buf = Vec::new();
    let mut ser = Serializer::with_formatter(&mut buf, SigFig17);
    value.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf)?)
}

/// Writes to `path`, or to stdout without one.
pub fn emit<T: Serialize>(value: &T, path: Option<&std::path::Path>) -> anyhow::Result<()> {
    let s = to_string(value)?;
    match path {
        Some(p) => std::fs::write(p, s)?,
        None => io::stdout().write_all(s.as_bytes())?,
    }
    Ok(())
}
