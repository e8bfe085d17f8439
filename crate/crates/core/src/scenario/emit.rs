use std::fmt::Write;

use serde::Serialize;
use toml::{Table, Value};

/// TOML text for `value` with fields in declaration order and floats in
/// shortest round-trip form (`6.77e-11` rather than a long decimal).
pub fn to_document<T: Serialize>(value: &T) -> String {
    let table = Table::try_from(value).expect("report serializes to a table");
    let mut out = String::new();
    emit_table(&mut out, &table, "");
    out
}

fn emit_table(out: &mut String, table: &Table, path: &str) {
    for (key, value) in table {
        if !is_table_like(value) {
            let _ = writeln!(out, "{} = {}", key_repr(key), inline(value));
        }
    }
    for (key, value) in table {
        let child = if path.is_empty() {
            key_repr(key)
        } else {
            format!("{path}.{}", key_repr(key))
        };
        match value {
            Value::Table(t) => {
                if !out.is_empty() {
                    out.push('\n');
                }
                let _ = writeln!(out, "[{child}]");
                emit_table(out, t, &child);
            }
            Value::Array(items) if is_table_like(value) => {
                for item in items {
                    if let Value::Table(t) = item {
                        if !out.is_empty() {
                            out.push('\n');
                        }
                        let _ = writeln!(out, "[[{child}]]");
                        emit_table(out, t, &child);
                    }
                }
            }
            _ => {}
        }
    }
}

fn is_table_like(value: &Value) -> bool {
    match value {
        Value::Table(_) => true,
        Value::Array(items) => !items.is_empty() && items.iter().all(|v| matches!(v, Value::Table(_))),
        _ => false,
    }
}

fn key_repr(key: &str) -> String {
    if !key.is_empty() && key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
        key.to_string()
    } else {
        Value::String(key.to_string()).to_string()
    }
}

fn float(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        let s = format!("{x:?}");
        if s.contains(['.', 'e', 'E']) {
            s
        } else {
            format!("{s}.0")
        }
    }
}

fn inline(value: &Value) -> String {
    match value {
        Value::Float(x) => float(*x),
        Value::Array(items) => {
            let parts: Vec<String> = items.iter().map(inline).collect();
            format!("[{}]", parts.join(", "))
        }
        Value::Table(t) => {
            let parts: Vec<String> = t
                .iter()
                .map(|(k, v)| format!("{} = {}", key_repr(k), inline(v)))
                .collect();
            format!("{{ {} }}", parts.join(", "))
        }
        other => other.to_string(),
    }
}
