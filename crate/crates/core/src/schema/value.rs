//! Hyperparameter values and configurations.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::Value;

use crate::ops::Operator;

/// A scalar hyperparameter value.
///
/// All numbers are carried as `f64`; integer-valued hyperparameters are
/// numbers with a zero fractional part. NaN is never constructed.
#[derive(Clone, Debug)]
pub enum Scalar {
    Null,
    Bool(bool),
    Number(f64),
    Str(String),
}

impl Scalar {
    pub fn str(s: impl Into<String>) -> Self {
        Scalar::Str(s.into())
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Scalar::Number(x) => Some(*x),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Scalar::Str(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Scalar::Bool(b) => Some(*b),
            _ => None,
        }
    }

    pub fn is_integer(&self) -> bool {
        matches!(self, Scalar::Number(x) if x.fract() == 0.0 && x.is_finite())
    }

    fn rank(&self) -> u8 {
        match self {
            Scalar::Null => 0,
            Scalar::Bool(_) => 1,
            Scalar::Number(_) => 2,
            Scalar::Str(_) => 3,
        }
    }

    /// Converts a JSON scalar; arrays and objects yield `None`.
    pub fn from_json(value: &Value) -> Option<Self> {
        match value {
            Value::Null => Some(Scalar::Null),
            Value::Bool(b) => Some(Scalar::Bool(*b)),
            Value::Number(n) => n.as_f64().map(Scalar::Number),
            Value::String(s) => Some(Scalar::Str(s.clone())),
            _ => None,
        }
    }

    pub fn to_json(&self) -> Value {
        match self {
            Scalar::Null => Value::Null,
            Scalar::Bool(b) => Value::Bool(*b),
            Scalar::Number(x) => number_to_json(*x),
            Scalar::Str(s) => Value::String(s.clone()),
        }
    }

    /// Parses a bare token as written in PCS files and DSL literals:
    /// `true`/`false`/`null`, numbers, and anything else as a string.
    pub fn from_token(token: &str) -> Self {
        match token {
            "true" => Scalar::Bool(true),
            "false" => Scalar::Bool(false),
            "null" => Scalar::Null,
            _ => match token.parse::<f64>() {
                Ok(x) if x.is_finite() => Scalar::Number(x),
                _ => Scalar::Str(token.to_string()),
            },
        }
    }
}

pub(crate) fn number_to_json(x: f64) -> Value {
    if x.fract() == 0.0 && x.abs() < 9.0e15 {
        Value::from(x as i64)
    } else {
        serde_json::Number::from_f64(x)
            .map(Value::Number)
            .unwrap_or(Value::Null)
    }
}

impl PartialEq for Scalar {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Scalar {}

impl PartialOrd for Scalar {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Scalar {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Scalar::Null, Scalar::Null) => Ordering::Equal,
            (Scalar::Bool(a), Scalar::Bool(b)) => a.cmp(b),
            // -0.0 and 0.0 are the same hyperparameter value.
            (Scalar::Number(a), Scalar::Number(b)) => {
                if a == b {
                    Ordering::Equal
                } else {
                    a.total_cmp(b)
                }
            }
            (Scalar::Str(a), Scalar::Str(b)) => a.cmp(b),
            _ => self.rank().cmp(&other.rank()),
        }
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scalar::Null => f.write_str("null"),
            Scalar::Bool(b) => write!(f, "{b}"),
            Scalar::Number(x) => write!(f, "{x}"),
            Scalar::Str(s) => f.write_str(s),
        }
    }
}

impl Serialize for Scalar {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.to_json().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Scalar {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let value = Value::deserialize(deserializer)?;
        Scalar::from_json(&value).ok_or_else(|| serde::de::Error::custom("expected a JSON scalar"))
    }
}

impl From<bool> for Scalar {
    fn from(b: bool) -> Self {
        Scalar::Bool(b)
    }
}

impl From<f64> for Scalar {
    fn from(x: f64) -> Self {
        Scalar::Number(x)
    }
}

impl From<i64> for Scalar {
    fn from(x: i64) -> Self {
        Scalar::Number(x as f64)
    }
}

impl From<&str> for Scalar {
    fn from(s: &str) -> Self {
        Scalar::Str(s.to_string())
    }
}

/// A bound hyperparameter: a scalar, or a nested operator for operator-valued
/// hyperparameters of higher-order operators.
#[derive(Clone, Debug, PartialEq)]
pub enum ConfigValue {
    Scalar(Scalar),
    Operator(Box<Operator>),
}

impl ConfigValue {
    pub fn as_scalar(&self) -> Option<&Scalar> {
        match self {
            ConfigValue::Scalar(s) => Some(s),
            ConfigValue::Operator(_) => None,
        }
    }

    pub fn as_operator(&self) -> Option<&Operator> {
        match self {
            ConfigValue::Operator(op) => Some(op),
            ConfigValue::Scalar(_) => None,
        }
    }

    pub fn to_json(&self) -> Value {
        match self {
            ConfigValue::Scalar(s) => s.to_json(),
            ConfigValue::Operator(op) => op.to_json(),
        }
    }
}

impl<T: Into<Scalar>> From<T> for ConfigValue {
    fn from(value: T) -> Self {
        ConfigValue::Scalar(value.into())
    }
}

impl From<Operator> for ConfigValue {
    fn from(op: Operator) -> Self {
        ConfigValue::Operator(Box::new(op))
    }
}

/// Hyperparameter name to value.
pub type Config = BTreeMap<String, ConfigValue>;

/// Builds a [`Config`] from `(name, value)` pairs.
pub fn config<I, K, V>(pairs: I) -> Config
where
    I: IntoIterator<Item = (K, V)>,
    K: Into<String>,
    V: Into<ConfigValue>,
{
    pairs
        .into_iter()
        .map(|(k, v)| (k.into(), v.into()))
        .collect()
}

/// Reads a scalar-only configuration from a JSON object.
pub fn config_from_json(value: &Value) -> Result<Config, String> {
    let object = value
        .as_object()
        .ok_or_else(|| "configuration must be a JSON object".to_string())?;
    object
        .iter()
        .map(|(k, v)| {
            Scalar::from_json(v)
                .map(|s| (k.clone(), ConfigValue::Scalar(s)))
                .ok_or_else(|| format!("hyperparameter `{k}` must be a scalar"))
        })
        .collect()
}

pub fn config_to_json(config: &Config) -> Value {
    Value::Object(
        config
            .iter()
            .map(|(k, v)| (k.clone(), v.to_json()))
            .collect(),
    )
}
