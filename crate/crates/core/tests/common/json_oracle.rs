//! A direct reading of the JSON-Schema subset used by operator schemas,
//! evaluated on serde_json values. Kept separate from the library on purpose.

use serde_json::Value;

fn num(v: &Value, key: &str) -> Option<f64> {
    v.get(key).and_then(Value::as_f64)
}

fn flag(v: &Value, key: &str) -> bool {
    v.get(key).and_then(Value::as_bool).unwrap_or(false)
}

fn same(a: &Value, b: &Value) -> bool {
    match (a.as_f64(), b.as_f64()) {
        (Some(x), Some(y)) => x == y,
        _ => a == b,
    }
}

pub fn admits(schema: &Value, value: &Value) -> bool {
    let Some(obj) = schema.as_object() else {
        return true;
    };
    if let Some(options) = obj.get("enum").and_then(Value::as_array) {
        if !options.iter().any(|o| same(o, value)) {
            return false;
        }
    }
    match obj.get("type").and_then(Value::as_str) {
        Some("number") if !value.is_number() => return false,
        Some("integer") if value.as_f64().is_none_or(|x| x.fract() != 0.0) => return false,
        Some("boolean") if !value.is_boolean() => return false,
        Some("string") if !value.is_string() => return false,
        Some("object") if !value.is_object() => return false,
        _ => {}
    }
    if let Some(x) = value.as_f64() {
        if let Some(lo) = num(schema, "minimum") {
            if x < lo || (flag(schema, "exclusiveMinimum") && x == lo) {
                return false;
            }
        }
        if let Some(hi) = num(schema, "maximum") {
            if x > hi || (flag(schema, "exclusiveMaximum") && x == hi) {
                return false;
            }
        }
    }
    if let (Some(props), Some(fields)) = (
        obj.get("properties").and_then(Value::as_object),
        value.as_object(),
    ) {
        for (name, sub) in props {
            if let Some(field) = fields.get(name) {
                if !admits(sub, field) {
                    return false;
                }
            }
        }
    }
    if let Some(all) = obj.get("allOf").and_then(Value::as_array) {
        if !all.iter().all(|s| admits(s, value)) {
            return false;
        }
    }
    if let Some(any) = obj.get("anyOf").and_then(Value::as_array) {
        if !any.iter().any(|s| admits(s, value)) {
            return false;
        }
    }
    if let Some(not) = obj.get("not") {
        if admits(not, value) {
            return false;
        }
    }
    true
}
