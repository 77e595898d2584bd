//! Canonical JSON output.
//!
//! Objects are written with sorted keys, floating-point values always carry
//! exactly four decimal places and integers are written as-is. Two equal
//! values therefore always serialize to the same bytes.

use std::io;

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};
use sha2::{Digest, Sha256};

/// Number of decimals written for every floating-point value.
pub const DECIMALS: usize = 4;

struct CanonicalFormatter<'a> {
    inner: PrettyFormatter<'a>,
}

impl Formatter for CanonicalFormatter<'_> {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        // -0.0 would otherwise print as "-0.0000"
        let value = if value == 0.0 { 0.0 } else { value };
        write!(writer, "{value:.DECIMALS$}")
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, f64::from(value))
    }

    fn begin_array<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.begin_array(writer)
    }

    fn end_array<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.end_array(writer)
    }

    fn begin_array_value<W: ?Sized + io::Write>(
        &mut self,
        writer: &mut W,
        first: bool,
    ) -> io::Result<()> {
        self.inner.begin_array_value(writer, first)
    }

    fn end_array_value<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.end_array_value(writer)
    }

    fn begin_object<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.begin_object(writer)
    }

    fn end_object<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.end_object(writer)
    }

    fn begin_object_key<W: ?Sized + io::Write>(
        &mut self,
        writer: &mut W,
        first: bool,
    ) -> io::Result<()> {
        self.inner.begin_object_key(writer, first)
    }

    fn begin_object_value<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.begin_object_value(writer)
    }

    fn end_object_value<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.end_object_value(writer)
    }
}

/// Serializes `value` as canonical, pretty-printed JSON terminated by a newline.
pub fn to_canonical_string<T: Serialize + ?Sized>(value: &T) -> serde_json::Result<String> {
    // Routing through `Value` sorts object keys (its map is a BTreeMap).
    let value = serde_json::to_value(value)?;
    let mut out = Vec::new();
    let formatter = CanonicalFormatter {
        inner: PrettyFormatter::with_indent(b"  "),
    };
    let mut ser = serde_json::Serializer::with_formatter(&mut out, formatter);
    value.serialize(&mut ser)?;
    out.push(b'\n');
    Ok(String::from_utf8(out).expect("serde_json emits UTF-8"))
}

/// Formats a float exactly as the canonical writer does.
pub fn fixed(value: f64) -> String {
    let value = if value == 0.0 { 0.0 } else { value };
    format!("{value:.DECIMALS$}")
}

/// Lowercase hex SHA-256 of `bytes`.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn keys_sorted_and_floats_fixed() {
        let v = json!({"b": 1.5, "a": [1, 2.0, -0.0], "c": {"z": 0.33333, "y": 7}});
        let s = to_canonical_string(&v).unwrap();
        let a = s.find("\"a\"").unwrap();
        let b = s.find("\"b\"").unwrap();
        assert!(a < b);
        assert!(s.contains("1.5000"));
        assert!(s.contains("2.0000"));
        assert!(s.contains("0.3333"));
        assert!(!s.contains("-0.0000"));
        assert!(s.contains("\"y\": 7"));
    }

    #[test]
    fn reparse_is_stable() {
        let v = json!({"x": 0.12345, "n": 3});
        let first = to_canonical_string(&v).unwrap();
        let back: serde_json::Value = serde_json::from_str(&first).unwrap();
        assert_eq!(first, to_canonical_string(&back).unwrap());
    }
}
