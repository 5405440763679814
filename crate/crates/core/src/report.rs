//! Deterministic serialisation: objects with sorted keys, floats printed with
//! 17 significant digits (`{:.16e}`), two-space indentation.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use crate::Result;

pub fn format_float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        "null".into()
    }
}

fn write_value(out: &mut String, v: &Value, indent: usize) {
    let pad = |out: &mut String, k: usize| out.extend(std::iter::repeat(' ').take(2 * k));
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if n.is_f64() {
                out.push_str(&format_float(n.as_f64().unwrap_or(f64::NAN)));
            } else {
                let _ = write!(out, "{n}");
            }
        }
        Value::String(s) => out.push_str(&Value::String(s.clone()).to_string()),
        Value::Array(a) => {
            if a.is_empty() {
                out.push_str("[]");
                return;
            }
            out.push_str("[\n");
            for (i, x) in a.iter().enumerate() {
                pad(out, indent + 1);
                write_value(out, x, indent + 1);
                out.push_str(if i + 1 < a.len() { ",\n" } else { "\n" });
            }
            pad(out, indent);
            out.push(']');
        }
        Value::Object(m) => {
            if m.is_empty() {
                out.push_str("{}");
                return;
            }
            let mut keys: Vec<&String> = m.keys().collect();
            keys.sort();
            out.push_str("{\n");
            for (i, k) in keys.iter().enumerate() {
                pad(out, indent + 1);
                out.push_str(&Value::String((*k).clone()).to_string());
                out.push_str(": ");
                write_value(out, &m[*k], indent + 1);
                out.push_str(if i + 1 < keys.len() { ",\n" } else { "\n" });
            }
            pad(out, indent);
            out.push('}');
        }
    }
}

/// Canonical JSON text of any serialisable value.
pub fn to_canonical_json<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let v = serde_json::to_value(value)?;
    let mut out = String::new();
    write_value(&mut out, &v, 0);
    out.push('\n');
    Ok(out)
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, to_canonical_json(value)?)?;
    Ok(())
}

/// CSV with a header row; floats in the canonical format.
pub fn write_table(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r.iter().map(|x| format_float(*x)))?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    #[test]
    fn keys_sorted_and_floats_fixed() {
        let mut m = HashMap::new();
        m.insert("b", 1.5f64);
        m.insert("a", 0.1f64);
        let s = to_canonical_json(&m).unwrap();
        assert_eq!(s, "{\n  \"a\": 1.0000000000000001e-1,\n  \"b\": 1.5000000000000000e0\n}\n");
    }

    #[test]
    fn empty_list_is_brackets() {
        let v: Vec<f64> = vec![];
        assert_eq!(to_canonical_json(&v).unwrap(), "[]\n");
    }

    #[test]
    fn nested_and_integers() {
        #[derive(Serialize)]
        struct S {
            z: Vec<u32>,
            name: &'static str,
            ok: bool,
            missing: Option<f64>,
        }
        let s = to_canonical_json(&S { z: vec![1, 2], name: "x\"y", ok: true, missing: None }).unwrap();
        assert_eq!(s, "{\n  \"missing\": null,\n  \"name\": \"x\\\"y\",\n  \"ok\": true,\n  \"z\": [\n    1,\n    2\n  ]\n}\n");
    }

    #[test]
    fn float_round_trips() {
        for x in [0.1, 1.0 / 3.0, 2.0f64.sqrt(), -7.25e-300, 6.02e23] {
            assert_eq!(format_float(x).parse::<f64>().unwrap(), x);
        }
    }
}
