//! Report rendering. Numbers use Rust's locale-independent shortest
//! round-trip formatting.

use serde::Serialize;
use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

pub fn json<T: Serialize>(report: &T) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report serializes");
    s.push('\n');
    s
}

/// Flattens a structured report into `quantity,value` rows with dotted keys.
pub fn key_value_csv<T: Serialize>(report: &T) -> String {
    let value = serde_json::to_value(report).expect("report serializes");
    let mut rows = Vec::new();
    flatten("", &value, &mut rows);
    let mut out = String::from("quantity,value\n");
    for (k, v) in rows {
        out.push_str(&csv_field(&k));
        out.push(',');
        out.push_str(&csv_field(&v));
        out.push('\n');
    }
    out
}

fn flatten(prefix: &str, v: &Value, rows: &mut Vec<(String, String)>) {
    let join = |k: &str| {
        if prefix.is_empty() {
            k.to_string()
        } else {
            format!("{prefix}.{k}")
        }
    };
    match v {
        Value::Object(map) => {
            for (k, v) in map {
                flatten(&join(k), v, rows);
            }
        }
        Value::Array(items) => {
            for (i, v) in items.iter().enumerate() {
                flatten(&join(&i.to_string()), v, rows);
            }
        }
        Value::String(s) => rows.push((prefix.to_string(), s.clone())),
        Value::Null => rows.push((prefix.to_string(), String::new())),
        other => rows.push((prefix.to_string(), other.to_string())),
    }
}

pub fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Formats a float for a table cell; non-finite values print as `inf`, `-inf` or `nan`.
pub fn number(x: f64) -> String {
    if x.is_finite() {
        format!("{x}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Serialize)]
    struct Inner {
        a_km: f64,
        tag: &'static str,
    }

    #[derive(Serialize)]
    struct Outer {
        inner: Inner,
        list: Vec<u32>,
        missing: Option<f64>,
    }

    #[test]
    fn flattening() {
        let r = Outer {
            inner: Inner { a_km: 1.5, tag: "x,y" },
            list: vec![3, 4],
            missing: None,
        };
        assert_eq!(
            key_value_csv(&r),
            "quantity,value\ninner.a_km,1.5\ninner.tag,\"x,y\"\nlist.0,3\nlist.1,4\nmissing,\n"
        );
    }

    #[test]
    fn numbers() {
        assert_eq!(number(0.1), "0.1");
        assert_eq!(number(1e-7), "0.0000001");
        assert_eq!(number(f64::INFINITY), "inf");
    }
}
