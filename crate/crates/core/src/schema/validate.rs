//! Checking configurations against hyperparameter schemas.
//!
//! Missing hyperparameters are latent and never a violation on their own:
//! an object schema only constrains the properties a configuration provides
//! (plus `required`). This is the plain JSON-Schema reading of partial
//! configurations.

use std::fmt;

use serde::Serialize;

use super::{Config, ConfigValue, NodeKind, Scalar, SchemaNode};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub enum ViolationKind {
    Type,
    Range,
    Enum,
    UnknownName,
    ConstraintViolated,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub path: Vec<String>,
    #[serde(rename = "constraint")]
    pub constraint_description: String,
    pub kind: ViolationKind,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    fn from_violations(mut violations: Vec<Violation>) -> Self {
        // First failing constraint per path.
        let mut seen: Vec<Vec<String>> = Vec::new();
        violations.retain(|v| {
            if seen.contains(&v.path) {
                false
            } else {
                seen.push(v.path.clone());
                true
            }
        });
        ValidationReport {
            ok: violations.is_empty(),
            violations,
        }
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.ok {
            return f.write_str("ok");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            let path = if v.path.is_empty() {
                "/".to_string()
            } else {
                v.path.join(".")
            };
            write!(f, "{path}: {} ({:?})", v.constraint_description, v.kind)?;
        }
        Ok(())
    }
}

enum Instance<'a> {
    Object(&'a Config),
    Value(&'a ConfigValue),
}

fn violation(path: &[String], kind: ViolationKind, message: impl Into<String>) -> Vec<Violation> {
    vec![Violation {
        path: path.to_vec(),
        constraint_description: message.into(),
        kind,
    }]
}

/// Validates a (possibly partial) configuration against an operator schema.
pub fn validate(config: &Config, schema: &SchemaNode) -> ValidationReport {
    let mut violations = Vec::new();
    if let Some(base) = schema.base_object() {
        for name in config.keys() {
            if !base.properties.contains_key(name) {
                violations.push(Violation {
                    path: vec![name.clone()],
                    constraint_description: format!("unknown hyperparameter `{name}`"),
                    kind: ViolationKind::UnknownName,
                });
            }
        }
    }
    violations.extend(check(Instance::Object(config), schema, &[]));
    ValidationReport::from_violations(violations)
}

fn check(instance: Instance<'_>, node: &SchemaNode, path: &[String]) -> Vec<Violation> {
    match &node.kind {
        NodeKind::Any => Vec::new(),
        NodeKind::Object(object) => {
            let Instance::Object(config) = instance else {
                return violation(
                    path,
                    ViolationKind::Type,
                    "expected a set of hyperparameters",
                );
            };
            let mut out = Vec::new();
            for required in &object.required {
                if !config.contains_key(required) {
                    out.extend(violation(
                        path,
                        ViolationKind::ConstraintViolated,
                        format!("missing required hyperparameter `{required}`"),
                    ));
                }
            }
            for (name, value) in config {
                let mut child_path = path.to_vec();
                child_path.push(name.clone());
                match object.properties.get(name) {
                    Some(prop) => out.extend(check(Instance::Value(value), prop, &child_path)),
                    None if !object.additional_allowed => out.extend(violation(
                        &child_path,
                        ViolationKind::UnknownName,
                        format!("unknown hyperparameter `{name}`"),
                    )),
                    None => {}
                }
            }
            out
        }
        NodeKind::Range(range) => match instance {
            Instance::Value(ConfigValue::Scalar(Scalar::Number(x))) => {
                if range.integer && x.fract() != 0.0 {
                    violation(
                        path,
                        ViolationKind::Type,
                        format!("expected an integer, got {x}"),
                    )
                } else if !range.contains(*x) {
                    let lo = if range.lo_open { '(' } else { '[' };
                    let hi = if range.hi_open { ')' } else { ']' };
                    violation(
                        path,
                        ViolationKind::Range,
                        format!("{x} is outside {lo}{}, {}{hi}", range.lo, range.hi),
                    )
                } else {
                    Vec::new()
                }
            }
            _ => violation(path, ViolationKind::Type, "expected a number"),
        },
        NodeKind::Enum(values) => match instance {
            Instance::Value(ConfigValue::Scalar(s)) if values.contains(s) => Vec::new(),
            Instance::Value(v) => {
                let shown = match v {
                    ConfigValue::Scalar(s) => s.to_string(),
                    ConfigValue::Operator(op) => op.name().to_string(),
                };
                let allowed: Vec<String> = values.iter().map(Scalar::to_string).collect();
                violation(
                    path,
                    ViolationKind::Enum,
                    format!("{shown} is not one of [{}]", allowed.join(", ")),
                )
            }
            Instance::Object(_) => violation(path, ViolationKind::Type, "expected a value"),
        },
        NodeKind::OperatorSlot => match instance {
            Instance::Value(ConfigValue::Operator(_)) => Vec::new(),
            _ => violation(path, ViolationKind::Type, "expected an operator"),
        },
        NodeKind::AllOf(children) => children
            .iter()
            .flat_map(|c| check(reborrow(&instance), c, path))
            .collect(),
        NodeKind::AnyOf(children) => {
            let mut first_failure = None;
            for child in children {
                let found = check(reborrow(&instance), child, path);
                if found.is_empty() {
                    return Vec::new();
                }
                first_failure.get_or_insert(found);
            }
            let first = first_failure.unwrap_or_default();
            let kind = match instance {
                Instance::Object(_) => ViolationKind::ConstraintViolated,
                Instance::Value(_) => first.first().map(|v| v.kind).unwrap_or(ViolationKind::Type),
            };
            let message = node.description.clone().unwrap_or_else(|| {
                first
                    .first()
                    .map(|v| format!("no alternative matched: {}", v.constraint_description))
                    .unwrap_or_else(|| "no alternative matched".into())
            });
            violation(path, kind, message)
        }
        NodeKind::Not(child) => {
            if check(reborrow(&instance), child, path).is_empty() {
                let message = node
                    .description
                    .clone()
                    .unwrap_or_else(|| "negated constraint matched".into());
                violation(path, ViolationKind::ConstraintViolated, message)
            } else {
                Vec::new()
            }
        }
    }
}

fn reborrow<'a>(instance: &Instance<'a>) -> Instance<'a> {
    match instance {
        Instance::Object(c) => Instance::Object(c),
        Instance::Value(v) => Instance::Value(v),
    }
}
