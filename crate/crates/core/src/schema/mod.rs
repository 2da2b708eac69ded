//! The JSON-Schema subset used to describe operator hyperparameters.
//!
//! A schema file holds one object schema, or an `allOf` whose first element
//! is the object schema declaring every hyperparameter and whose remaining
//! elements are side constraints relating several hyperparameters:
//!
//! ```json
//! { "allOf": [
//!     { "type": "object", "additionalProperties": false,
//!       "properties": { "R": {"enum": [true, false], "default": false},
//!                       "C": {"type": "number", "minimum": 0, "maximum": 0.5,
//!                             "exclusiveMinimum": true, "exclusiveMaximum": true,
//!                             "default": 0.25} } },
//!     { "description": "R=true requires C=0.25",
//!       "anyOf": [ {"not": {"properties": {"R": {"enum": [true]}}}},
//!                  {"properties": {"C": {"enum": [0.25]}}} ] } ] }
//! ```
//!
//! Supported keywords: `type` (object, number, integer, boolean),
//! `properties`, `required`, `additionalProperties`, `minimum`, `maximum`,
//! `exclusiveMinimum`, `exclusiveMaximum`, `distribution`, `quantization`,
//! `enum`, `anyOf`, `allOf`, `not`, `default`, `description`, and
//! `typeForOptimizer: "operator"`. Everything else is rejected.

mod validate;
mod value;

use std::fmt;

use indexmap::IndexMap;
use serde_json::{Map, Value};
use thiserror::Error;

pub use validate::{validate, ValidationReport, Violation, ViolationKind};
pub use value::{config, config_from_json, config_to_json, Config, ConfigValue, Scalar};

pub(crate) use value::number_to_json;

/// Location of a node inside a schema document, e.g. `/allOf/0/properties/C`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SchemaPath(pub Vec<String>);

impl SchemaPath {
    pub fn child(&self, token: impl Into<String>) -> Self {
        let mut tokens = self.0.clone();
        tokens.push(token.into());
        SchemaPath(tokens)
    }
}

impl fmt::Display for SchemaPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("/");
        }
        for token in &self.0 {
            write!(f, "/{token}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum SchemaError {
    #[error("malformed JSON: {0}")]
    MalformedJson(String),
    #[error("unsupported keyword `{keyword}` at {path}")]
    UnsupportedKeyword { path: SchemaPath, keyword: String },
    #[error("invalid schema at {path}: {reason}")]
    InvalidSchema { path: SchemaPath, reason: String },
    #[error("hyperparameter at {0} has no default")]
    MissingDefault(SchemaPath),
    #[error("schema has no base object declaring its hyperparameters")]
    NoBaseObject,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PriorKind {
    Uniform,
    LogUniform,
}

impl PriorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PriorKind::Uniform => "uniform",
            PriorKind::LogUniform => "loguniform",
        }
    }
}

/// Search guidance for a continuous range.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Prior {
    pub kind: PriorKind,
    /// Values are rounded to multiples of this step.
    pub quantization: Option<f64>,
}

impl Default for Prior {
    fn default() -> Self {
        Prior {
            kind: PriorKind::Uniform,
            quantization: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RangeSchema {
    pub lo: f64,
    pub hi: f64,
    pub lo_open: bool,
    pub hi_open: bool,
    pub integer: bool,
    pub prior: Prior,
}

impl RangeSchema {
    pub fn contains(&self, x: f64) -> bool {
        let above = if self.lo_open {
            x > self.lo
        } else {
            x >= self.lo
        };
        let below = if self.hi_open {
            x < self.hi
        } else {
            x <= self.hi
        };
        above && below && (!self.integer || x.fract() == 0.0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ObjectSchema {
    pub properties: IndexMap<String, SchemaNode>,
    pub required: Vec<String>,
    pub additional_allowed: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub enum NodeKind {
    Object(ObjectSchema),
    Range(RangeSchema),
    Enum(Vec<Scalar>),
    AnyOf(Vec<SchemaNode>),
    AllOf(Vec<SchemaNode>),
    Not(Box<SchemaNode>),
    /// An operator-valued hyperparameter (`typeForOptimizer: "operator"`).
    OperatorSlot,
    Any,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SchemaNode {
    pub kind: NodeKind,
    pub default: Option<Scalar>,
    pub description: Option<String>,
}

impl SchemaNode {
    pub fn new(kind: NodeKind) -> Self {
        SchemaNode {
            kind,
            default: None,
            description: None,
        }
    }

    pub fn with_default(mut self, default: impl Into<Scalar>) -> Self {
        self.default = Some(default.into());
        self
    }

    pub fn with_description(mut self, description: impl Into<String>) -> Self {
        self.description = Some(description.into());
        self
    }

    pub fn enumeration<I, T>(values: I) -> Self
    where
        I: IntoIterator<Item = T>,
        T: Into<Scalar>,
    {
        SchemaNode::new(NodeKind::Enum(values.into_iter().map(Into::into).collect()))
    }

    pub fn range(lo: f64, hi: f64) -> Self {
        SchemaNode::new(NodeKind::Range(RangeSchema {
            lo,
            hi,
            lo_open: false,
            hi_open: false,
            integer: false,
            prior: Prior::default(),
        }))
    }

    pub fn integer_range(lo: f64, hi: f64) -> Self {
        let mut node = SchemaNode::range(lo, hi);
        if let NodeKind::Range(r) = &mut node.kind {
            r.integer = true;
        }
        node
    }

    pub fn object<I, K>(properties: I) -> Self
    where
        I: IntoIterator<Item = (K, SchemaNode)>,
        K: Into<String>,
    {
        SchemaNode::new(NodeKind::Object(ObjectSchema {
            properties: properties.into_iter().map(|(k, v)| (k.into(), v)).collect(),
            required: Vec::new(),
            additional_allowed: true,
        }))
    }

    pub fn as_object(&self) -> Option<&ObjectSchema> {
        match &self.kind {
            NodeKind::Object(o) => Some(o),
            _ => None,
        }
    }

    /// The object schema declaring the hyperparameters: the node itself, or
    /// the first conjunct of a top-level `allOf`.
    pub fn base_object(&self) -> Option<&ObjectSchema> {
        match &self.kind {
            NodeKind::Object(o) => Some(o),
            NodeKind::AllOf(children) => children.first().and_then(SchemaNode::as_object),
            _ => None,
        }
    }

    pub fn to_json(&self) -> Value {
        let mut map = Map::new();
        if let Some(d) = &self.description {
            map.insert("description".into(), Value::String(d.clone()));
        }
        match &self.kind {
            NodeKind::Object(o) => {
                map.insert("type".into(), "object".into());
                if !o.additional_allowed {
                    map.insert("additionalProperties".into(), false.into());
                }
                if !o.required.is_empty() {
                    map.insert("required".into(), o.required.clone().into());
                }
                let props = o
                    .properties
                    .iter()
                    .map(|(k, v)| (k.clone(), v.to_json()))
                    .collect();
                map.insert("properties".into(), Value::Object(props));
            }
            NodeKind::Range(r) => {
                map.insert(
                    "type".into(),
                    if r.integer { "integer" } else { "number" }.into(),
                );
                map.insert("minimum".into(), number_to_json(r.lo));
                map.insert("maximum".into(), number_to_json(r.hi));
                if r.lo_open {
                    map.insert("exclusiveMinimum".into(), true.into());
                }
                if r.hi_open {
                    map.insert("exclusiveMaximum".into(), true.into());
                }
                if r.prior.kind != PriorKind::Uniform {
                    map.insert("distribution".into(), r.prior.kind.as_str().into());
                }
                if let Some(q) = r.prior.quantization {
                    map.insert("quantization".into(), number_to_json(q));
                }
            }
            NodeKind::Enum(values) => {
                map.insert(
                    "enum".into(),
                    Value::Array(values.iter().map(Scalar::to_json).collect()),
                );
            }
            NodeKind::AnyOf(children) => {
                map.insert("anyOf".into(), children.iter().map(Self::to_json).collect());
            }
            NodeKind::AllOf(children) => {
                map.insert("allOf".into(), children.iter().map(Self::to_json).collect());
            }
            NodeKind::Not(child) => {
                map.insert("not".into(), child.to_json());
            }
            NodeKind::OperatorSlot => {
                map.insert("typeForOptimizer".into(), "operator".into());
            }
            NodeKind::Any => {}
        }
        if let Some(d) = &self.default {
            map.insert("default".into(), d.to_json());
        }
        Value::Object(map)
    }
}

/// Parses a schema document.
pub fn parse_schema(document: &str) -> Result<SchemaNode, SchemaError> {
    let value: Value =
        serde_json::from_str(document).map_err(|e| SchemaError::MalformedJson(e.to_string()))?;
    parse_schema_value(&value)
}

pub fn parse_schema_value(value: &Value) -> Result<SchemaNode, SchemaError> {
    parse_node(value, &SchemaPath::default())
}

const COMMON: &[&str] = &["description", "default"];
const OBJECT_KEYS: &[&str] = &["type", "properties", "required", "additionalProperties"];
const RANGE_KEYS: &[&str] = &[
    "type",
    "minimum",
    "maximum",
    "exclusiveMinimum",
    "exclusiveMaximum",
    "distribution",
    "quantization",
];

fn invalid(path: &SchemaPath, reason: impl Into<String>) -> SchemaError {
    SchemaError::InvalidSchema {
        path: path.clone(),
        reason: reason.into(),
    }
}

fn check_keys(
    map: &Map<String, Value>,
    allowed: &[&str],
    path: &SchemaPath,
) -> Result<(), SchemaError> {
    for key in map.keys() {
        if !allowed.contains(&key.as_str()) && !COMMON.contains(&key.as_str()) {
            return Err(SchemaError::UnsupportedKeyword {
                path: path.clone(),
                keyword: key.clone(),
            });
        }
    }
    Ok(())
}

fn number(value: &Value, path: &SchemaPath, keyword: &str) -> Result<f64, SchemaError> {
    value
        .as_f64()
        .filter(|x| x.is_finite())
        .ok_or_else(|| invalid(&path.child(keyword), "expected a number"))
}

fn parse_children(value: &Value, path: &SchemaPath) -> Result<Vec<SchemaNode>, SchemaError> {
    let items = value
        .as_array()
        .ok_or_else(|| invalid(path, "expected an array of schemas"))?;
    if items.is_empty() {
        return Err(invalid(path, "combinator needs at least one schema"));
    }
    items
        .iter()
        .enumerate()
        .map(|(i, v)| parse_node(v, &path.child(i.to_string())))
        .collect()
}

fn parse_node(value: &Value, path: &SchemaPath) -> Result<SchemaNode, SchemaError> {
    let map = value
        .as_object()
        .ok_or_else(|| invalid(path, "a schema must be a JSON object"))?;

    let description = match map.get("description") {
        None => None,
        Some(Value::String(s)) => Some(s.clone()),
        Some(_) => return Err(invalid(&path.child("description"), "expected a string")),
    };
    let default = match map.get("default") {
        None => None,
        Some(v) => Some(
            Scalar::from_json(v)
                .ok_or_else(|| invalid(&path.child("default"), "default must be a scalar"))?,
        ),
    };

    let type_name = match map.get("type") {
        None => None,
        Some(Value::String(s)) => Some(s.as_str()),
        Some(_) => return Err(invalid(&path.child("type"), "expected a type name")),
    };

    let selectors: Vec<&str> = ["anyOf", "allOf", "not", "enum", "typeForOptimizer"]
        .into_iter()
        .filter(|k| map.contains_key(*k))
        .collect();
    if selectors.len() > 1 {
        return Err(invalid(path, "conflicting schema keywords"));
    }

    // Next to a combinator, `type` only restates what the children require.
    let kind = if let Some(&selector) = selectors.first() {
        check_keys(map, &[selector, "type"], path)?;
        let inner = &map[selector];
        let inner_path = path.child(selector);
        match selector {
            "anyOf" => NodeKind::AnyOf(parse_children(inner, &inner_path)?),
            "allOf" => NodeKind::AllOf(parse_children(inner, &inner_path)?),
            "not" => {
                let child = parse_node(inner, &inner_path)?;
                let negatable = child
                    .as_object()
                    .map(|o| {
                        o.properties
                            .values()
                            .all(|p| matches!(p.kind, NodeKind::Enum(_)))
                    })
                    .unwrap_or(false);
                if !negatable {
                    return Err(invalid(
                        &inner_path,
                        "negation is only supported over objects whose properties are enums",
                    ));
                }
                NodeKind::Not(Box::new(child))
            }
            "enum" => {
                let items = inner
                    .as_array()
                    .ok_or_else(|| invalid(&inner_path, "expected an array"))?;
                if items.is_empty() {
                    return Err(invalid(&inner_path, "enum must not be empty"));
                }
                let mut values: Vec<Scalar> = Vec::with_capacity(items.len());
                for item in items {
                    let s = Scalar::from_json(item)
                        .ok_or_else(|| invalid(&inner_path, "enum values must be scalars"))?;
                    if values.contains(&s) {
                        return Err(invalid(&inner_path, format!("duplicate enum value {s}")));
                    }
                    values.push(s);
                }
                if let Some(d) = &default {
                    if !values.contains(d) {
                        return Err(invalid(path, format!("default {d} is not an enum value")));
                    }
                }
                NodeKind::Enum(values)
            }
            _ => {
                if inner != "operator" {
                    return Err(invalid(&inner_path, "only \"operator\" is supported"));
                }
                if !matches!(default, None | Some(Scalar::Null) | Some(Scalar::Str(_))) {
                    return Err(invalid(path, "operator default must be null or a name"));
                }
                NodeKind::OperatorSlot
            }
        }
    } else {
        match type_name {
            Some("object") => {
                check_keys(map, OBJECT_KEYS, path)?;
                parse_object(map, path)?
            }
            None if OBJECT_KEYS.iter().any(|k| map.contains_key(*k)) => {
                check_keys(map, OBJECT_KEYS, path)?;
                parse_object(map, path)?
            }
            Some("number") | Some("integer") => {
                check_keys(map, RANGE_KEYS, path)?;
                let range = parse_range(map, type_name == Some("integer"), path)?;
                if let Some(d) = &default {
                    match d.as_f64() {
                        Some(x) if range.contains(x) => {}
                        _ => {
                            return Err(invalid(path, format!("default {d} is outside the range")))
                        }
                    }
                }
                NodeKind::Range(range)
            }
            Some("boolean") => {
                check_keys(map, &["type"], path)?;
                NodeKind::Enum(vec![Scalar::Bool(true), Scalar::Bool(false)])
            }
            Some(other) => {
                return Err(invalid(
                    &path.child("type"),
                    format!("unsupported type `{other}`"),
                ))
            }
            None => {
                check_keys(map, &[], path)?;
                NodeKind::Any
            }
        }
    };

    Ok(SchemaNode {
        kind,
        default,
        description,
    })
}

fn parse_object(map: &Map<String, Value>, path: &SchemaPath) -> Result<NodeKind, SchemaError> {
    let mut properties = IndexMap::new();
    if let Some(props) = map.get("properties") {
        let props = props
            .as_object()
            .ok_or_else(|| invalid(&path.child("properties"), "expected an object"))?;
        for (name, schema) in props {
            let node = parse_node(schema, &path.child("properties").child(name.as_str()))?;
            properties.insert(name.clone(), node);
        }
    }
    let required = match map.get("required") {
        None => Vec::new(),
        Some(Value::Array(items)) => items
            .iter()
            .map(|v| {
                v.as_str()
                    .map(str::to_string)
                    .ok_or_else(|| invalid(&path.child("required"), "expected names"))
            })
            .collect::<Result<_, _>>()?,
        Some(_) => return Err(invalid(&path.child("required"), "expected an array")),
    };
    let additional_allowed = match map.get("additionalProperties") {
        None => true,
        Some(Value::Bool(b)) => *b,
        Some(_) => {
            return Err(SchemaError::UnsupportedKeyword {
                path: path.clone(),
                keyword: "additionalProperties (schema-valued)".into(),
            })
        }
    };
    Ok(NodeKind::Object(ObjectSchema {
        properties,
        required,
        additional_allowed,
    }))
}

fn parse_range(
    map: &Map<String, Value>,
    integer: bool,
    path: &SchemaPath,
) -> Result<RangeSchema, SchemaError> {
    // Both draft-4 (boolean) and draft-6 (numeric) exclusive bounds are accepted.
    let bound = |inclusive: &str, exclusive: &str| -> Result<(f64, bool), SchemaError> {
        match (map.get(inclusive), map.get(exclusive)) {
            (Some(v), None) | (Some(v), Some(Value::Bool(false))) => {
                Ok((number(v, path, inclusive)?, false))
            }
            (Some(v), Some(Value::Bool(true))) => Ok((number(v, path, inclusive)?, true)),
            (None, Some(v)) if v.is_number() => Ok((number(v, path, exclusive)?, true)),
            (Some(_), Some(_)) => Err(invalid(
                path,
                format!("conflicting `{inclusive}` and `{exclusive}`"),
            )),
            _ => Err(invalid(path, format!("ranges need a `{inclusive}` bound"))),
        }
    };
    let (lo, lo_open) = bound("minimum", "exclusiveMinimum")?;
    let (hi, hi_open) = bound("maximum", "exclusiveMaximum")?;
    if lo > hi || (lo == hi && (lo_open || hi_open)) {
        return Err(invalid(path, "empty range"));
    }
    let kind = match map.get("distribution").map(|v| v.as_str()) {
        None | Some(Some("uniform")) => PriorKind::Uniform,
        Some(Some("loguniform")) => PriorKind::LogUniform,
        _ => {
            return Err(invalid(
                &path.child("distribution"),
                "expected uniform or loguniform",
            ))
        }
    };
    if kind == PriorKind::LogUniform && lo <= 0.0 {
        return Err(invalid(
            path,
            "loguniform ranges need a positive lower bound",
        ));
    }
    let quantization = match map.get("quantization") {
        None => None,
        Some(v) => {
            let q = number(v, path, "quantization")?;
            if q <= 0.0 {
                return Err(invalid(&path.child("quantization"), "must be positive"));
            }
            Some(q)
        }
    };
    Ok(RangeSchema {
        lo,
        hi,
        lo_open,
        hi_open,
        integer,
        prior: Prior { kind, quantization },
    })
}

/// The per-hyperparameter domains declared by the base object, before any
/// side constraint is applied.
pub fn declared_domains(schema: &SchemaNode) -> Result<IndexMap<String, SchemaNode>, SchemaError> {
    schema
        .base_object()
        .map(|o| o.properties.clone())
        .ok_or(SchemaError::NoBaseObject)
}

/// The declared default of every hyperparameter.
pub fn default_config(schema: &SchemaNode) -> Result<Config, SchemaError> {
    let declared = declared_domains(schema)?;
    let base_path = match schema.kind {
        NodeKind::AllOf(_) => SchemaPath::default().child("allOf").child("0"),
        _ => SchemaPath::default(),
    };
    declared
        .iter()
        .map(|(name, node)| {
            node.default
                .clone()
                .map(|d| (name.clone(), ConfigValue::Scalar(d)))
                .ok_or_else(|| {
                    SchemaError::MissingDefault(base_path.child("properties").child(name.as_str()))
                })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn parse(v: Value) -> Result<SchemaNode, SchemaError> {
        parse_schema_value(&v)
    }

    #[test]
    fn single_enum() {
        let node = parse(json!({"enum": ["mle"]})).unwrap();
        assert_eq!(node.kind, NodeKind::Enum(vec![Scalar::str("mle")]));
    }

    #[test]
    fn open_unit_interval() {
        let node = parse(json!({"type": "number", "minimum": 0, "maximum": 1,
            "exclusiveMinimum": true, "exclusiveMaximum": true}))
        .unwrap();
        match node.kind {
            NodeKind::Range(r) => {
                assert_eq!(
                    (r.lo, r.hi, r.lo_open, r.hi_open, r.integer),
                    (0.0, 1.0, true, true, false)
                );
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn numeric_exclusive_bounds() {
        let node = parse(json!({"type": "number", "exclusiveMinimum": 0, "maximum": 1})).unwrap();
        let NodeKind::Range(r) = node.kind else {
            panic!()
        };
        assert!(r.lo_open && !r.hi_open);
    }

    #[test]
    fn rejects_unknown_keywords() {
        let err = parse(json!({"type": "string", "pattern": "a+"})).unwrap_err();
        assert!(matches!(
            err,
            SchemaError::UnsupportedKeyword { .. } | SchemaError::InvalidSchema { .. }
        ));
        let err = parse(json!({"$ref": "#/x"})).unwrap_err();
        match err {
            SchemaError::UnsupportedKeyword { keyword, path } => {
                assert_eq!(keyword, "$ref");
                assert_eq!(path.to_string(), "/");
            }
            other => panic!("unexpected {other}"),
        }
        let err = parse(json!({"allOf": [{"type": "object", "properties": {"a": {"oneOf": []}}}]}))
            .unwrap_err();
        match err {
            SchemaError::UnsupportedKeyword { keyword, path } => {
                assert_eq!(keyword, "oneOf");
                assert_eq!(path.to_string(), "/allOf/0/properties/a");
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn rejects_invariant_violations() {
        assert!(parse(json!({"enum": []})).is_err());
        assert!(parse(json!({"enum": [1, 1.0]})).is_err());
        assert!(parse(json!({"enum": ["a"], "default": "b"})).is_err());
        assert!(parse(json!({"type": "number", "minimum": 1, "maximum": 0})).is_err());
        assert!(parse(
            json!({"type": "number", "minimum": 1, "maximum": 1, "exclusiveMaximum": true})
        )
        .is_err());
        assert!(parse(json!({"type": "number", "minimum": 1, "maximum": 1})).is_ok());
        assert!(parse(
            json!({"type": "number", "minimum": 0, "maximum": 1, "distribution": "loguniform"})
        )
        .is_err());
        assert!(parse(json!({"not": {"type": "number", "minimum": 0, "maximum": 1}})).is_err());
        assert!(parse(
            json!({"not": {"properties": {"x": {"type": "number", "minimum": 0, "maximum": 1}}}})
        )
        .is_err());
        assert!(matches!(
            parse_schema("{"),
            Err(SchemaError::MalformedJson(_))
        ));
    }

    #[test]
    fn declared_domains_and_defaults() {
        let schema = parse(json!({"allOf": [
            {"type": "object", "properties": {"N": {"enum": ["mle"], "default": "mle"}}},
            {"anyOf": [{"properties": {"N": {"enum": ["mle"]}}}]}
        ]}))
        .unwrap();
        let declared = declared_domains(&schema).unwrap();
        assert_eq!(declared.keys().collect::<Vec<_>>(), vec!["N"]);
        assert_eq!(
            default_config(&schema).unwrap()["N"],
            ConfigValue::from("mle")
        );

        let no_default =
            parse(json!({"type": "object", "properties": {"x": {"enum": [1]}}})).unwrap();
        match default_config(&no_default).unwrap_err() {
            SchemaError::MissingDefault(p) => assert_eq!(p.to_string(), "/properties/x"),
            other => panic!("unexpected {other}"),
        }
        assert!(matches!(
            declared_domains(&parse(json!({"enum": [1]})).unwrap()),
            Err(SchemaError::NoBaseObject)
        ));
    }
}
