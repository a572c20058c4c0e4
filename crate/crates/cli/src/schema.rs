//! Structural validation of JSON values against the schema files shipped
//! in `schemas/`. Supports the subset of JSON Schema the outputs use:
//! `type`, `properties`, `required`, `items`, `enum`, and numeric
//! `minimum`/`maximum`.

use serde_json::Value;

/// Validate `value` against `schema`, returning the list of violations
/// (empty means valid). Paths are dotted for readability.
pub fn validate(value: &Value, schema: &Value) -> Vec<String> {
    let mut errs = Vec::new();
    check(value, schema, "$", &mut errs);
    errs
}

fn type_name(v: &Value) -> &'static str {
    match v {
        Value::Null => "null",
        Value::Bool(_) => "boolean",
        Value::Number(n) => {
            if n.is_i64() || n.is_u64() {
                "integer"
            } else {
                "number"
            }
        }
        Value::String(_) => "string",
        Value::Array(_) => "array",
        Value::Object(_) => "object",
    }
}

fn type_matches(wanted: &str, v: &Value) -> bool {
    match wanted {
        "number" => v.is_number(),
        "integer" => v.is_i64() || v.is_u64(),
        other => type_name(v) == other,
    }
}

fn check(value: &Value, schema: &Value, path: &str, errs: &mut Vec<String>) {
    let Some(obj) = schema.as_object() else { return };

    if let Some(ty) = obj.get("type") {
        let ok = match ty {
            Value::String(t) => type_matches(t, value),
            Value::Array(ts) => ts
                .iter()
                .filter_map(|t| t.as_str())
                .any(|t| type_matches(t, value)),
            _ => true,
        };
        if !ok {
            errs.push(format!("{path}: expected type {ty}, got {}", type_name(value)));
            return;
        }
    }

    if let Some(allowed) = obj.get("enum").and_then(Value::as_array) {
        if !allowed.contains(value) {
            errs.push(format!("{path}: value {value} not in enum"));
        }
    }

    if let Some(min) = obj.get("minimum").and_then(Value::as_f64) {
        if let Some(x) = value.as_f64() {
            if x < min {
                errs.push(format!("{path}: {x} below minimum {min}"));
            }
        }
    }
    if let Some(max) = obj.get("maximum").and_then(Value::as_f64) {
        if let Some(x) = value.as_f64() {
            if x > max {
                errs.push(format!("{path}: {x} above maximum {max}"));
            }
        }
    }

    if let Some(required) = obj.get("required").and_then(Value::as_array) {
        if let Some(map) = value.as_object() {
            for key in required.iter().filter_map(Value::as_str) {
                if !map.contains_key(key) {
                    errs.push(format!("{path}: missing required property `{key}`"));
                }
            }
        }
    }

    if let Some(props) = obj.get("properties").and_then(Value::as_object) {
        if let Some(map) = value.as_object() {
            for (key, sub) in props {
                if let Some(v) = map.get(key) {
                    check(v, sub, &format!("{path}.{key}"), errs);
                }
            }
        }
    }

    if let Some(items) = obj.get("items") {
        if let Some(arr) = value.as_array() {
            for (i, v) in arr.iter().enumerate() {
                check(v, items, &format!("{path}[{i}]"), errs);
            }
        }
    }
}
