//! Rewrites an operator schema into a disjunction of flat records, each
//! mapping every hyperparameter to a categorical or continuous domain.
//!
//! `anyOf` becomes a disjunction, `allOf` a pairwise intersection of
//! disjuncts, and `not` over enum properties a complement against the
//! declared domains. Disjuncts may overlap; they are never merged.

use std::fmt;

use indexmap::IndexMap;
use serde_json::{json, Value};
use thiserror::Error;

use crate::schema::{
    number_to_json, Config, ConfigValue, NodeKind, Prior, PriorKind, RangeSchema, Scalar,
    SchemaNode,
};

pub const DEFAULT_BLOWUP_LIMIT: usize = 10_000;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum NormalizeError {
    #[error("normal form exceeds {0} disjuncts")]
    BlowupExceeded(usize),
    #[error("unsupported negation: {0}")]
    UnsupportedNegation(String),
    #[error("unsupported schema shape: {0}")]
    Unsupported(String),
    #[error("the schema admits no configuration")]
    EmptySpace,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Domain {
    Cat {
        values: Vec<Scalar>,
        default: Option<Scalar>,
    },
    Cont {
        lo: f64,
        hi: f64,
        lo_open: bool,
        hi_open: bool,
        integer: bool,
        prior: Prior,
        default: Option<f64>,
    },
    /// An operator-valued hyperparameter; `marker` is filled in when the
    /// slot is bound to a nested search space.
    OpSlot { marker: String },
}

/// One disjunct: hyperparameter name to domain, in declared order.
pub type Record = IndexMap<String, Domain>;

#[derive(Clone, Debug, PartialEq)]
pub struct NormalForm {
    pub disjuncts: Vec<Record>,
}

fn integral_bounds(lo: f64, hi: f64, lo_open: bool, hi_open: bool) -> (f64, f64) {
    let mut first = lo.ceil();
    if lo_open && first == lo {
        first += 1.0;
    }
    let mut last = hi.floor();
    if hi_open && last == hi {
        last -= 1.0;
    }
    (first, last)
}

impl Domain {
    pub fn from_range(r: &RangeSchema, default: Option<&Scalar>) -> Domain {
        Domain::Cont {
            lo: r.lo,
            hi: r.hi,
            lo_open: r.lo_open,
            hi_open: r.hi_open,
            integer: r.integer,
            prior: r.prior,
            default: default.and_then(Scalar::as_f64),
        }
    }

    pub fn contains_number(&self, x: f64) -> bool {
        match self {
            Domain::Cont {
                lo,
                hi,
                lo_open,
                hi_open,
                integer,
                ..
            } => {
                let above = if *lo_open { x > *lo } else { x >= *lo };
                let below = if *hi_open { x < *hi } else { x <= *hi };
                above && below && (!integer || x.fract() == 0.0)
            }
            Domain::Cat { values, .. } => values.contains(&Scalar::Number(x)),
            Domain::OpSlot { .. } => false,
        }
    }

    pub fn admits_scalar(&self, s: &Scalar) -> bool {
        match (self, s) {
            (Domain::Cat { values, .. }, s) => values.contains(s),
            (Domain::Cont { .. }, Scalar::Number(x)) => self.contains_number(*x),
            _ => false,
        }
    }

    pub fn admits(&self, v: &ConfigValue) -> bool {
        match (self, v) {
            (Domain::OpSlot { .. }, ConfigValue::Operator(_)) => true,
            (_, ConfigValue::Scalar(s)) => self.admits_scalar(s),
            _ => false,
        }
    }

    fn is_empty(&self) -> bool {
        match self {
            Domain::Cat { values, .. } => values.is_empty(),
            Domain::Cont {
                lo,
                hi,
                lo_open,
                hi_open,
                integer,
                ..
            } => {
                if lo > hi || (lo == hi && (*lo_open || *hi_open)) {
                    return true;
                }
                if *integer {
                    let (first, last) = integral_bounds(*lo, *hi, *lo_open, *hi_open);
                    return first > last;
                }
                false
            }
            Domain::OpSlot { .. } => false,
        }
    }

    /// A single closed point, emitted as a one-value categorical.
    pub fn is_degenerate(&self) -> bool {
        matches!(self, Domain::Cont { lo, hi, .. } if lo == hi)
    }

    /// The value used when a domain must be represented by one point: the
    /// default when admitted, else the first value or an interior point.
    pub fn default_scalar(&self) -> Scalar {
        match self {
            Domain::Cat { values, default } => default
                .clone()
                .filter(|d| values.contains(d))
                .unwrap_or_else(|| values[0].clone()),
            Domain::Cont {
                lo,
                hi,
                lo_open,
                hi_open,
                integer,
                default,
                prior,
            } => {
                if let Some(d) = default.filter(|d| self.contains_number(*d)) {
                    return Scalar::Number(d);
                }
                if *integer {
                    let (first, last) = integral_bounds(*lo, *hi, *lo_open, *hi_open);
                    return Scalar::Number((first + (last - first) / 2.0).floor());
                }
                let mid = if prior.kind == PriorKind::LogUniform {
                    (lo * hi).sqrt()
                } else {
                    lo + (hi - lo) / 2.0
                };
                Scalar::Number(mid)
            }
            Domain::OpSlot { marker } => Scalar::Str(marker.clone()),
        }
    }

    pub fn to_json(&self) -> Value {
        match self {
            Domain::Cat { values, default } => {
                let mut v = json!({
                    "type": "categorical",
                    "values": values.iter().map(Scalar::to_json).collect::<Vec<_>>(),
                });
                if let Some(d) = default.as_ref().filter(|d| values.contains(d)) {
                    v["default"] = d.to_json();
                }
                v
            }
            Domain::Cont {
                lo,
                hi,
                lo_open,
                hi_open,
                integer,
                prior,
                default,
            } => {
                let mut v = json!({
                    "type": if *integer { "integer" } else { "real" },
                    "lo": number_to_json(*lo),
                    "hi": number_to_json(*hi),
                    "loOpen": lo_open,
                    "hiOpen": hi_open,
                    "prior": prior.kind.as_str(),
                });
                if let Some(q) = prior.quantization {
                    v["quantization"] = number_to_json(q);
                }
                if let Some(d) = default.filter(|d| self.contains_number(*d)) {
                    v["default"] = number_to_json(d);
                }
                v
            }
            Domain::OpSlot { marker } => json!({"type": "operator", "marker": marker}),
        }
    }

    /// Reads the output of [`Domain::to_json`].
    pub fn from_json(v: &Value) -> Option<Domain> {
        let default = v.get("default").and_then(Scalar::from_json);
        match v.get("type")?.as_str()? {
            "categorical" => Some(Domain::Cat {
                values: v["values"]
                    .as_array()?
                    .iter()
                    .map(Scalar::from_json)
                    .collect::<Option<_>>()?,
                default,
            }),
            t @ ("integer" | "real") => Some(Domain::Cont {
                lo: v["lo"].as_f64()?,
                hi: v["hi"].as_f64()?,
                lo_open: v["loOpen"].as_bool()?,
                hi_open: v["hiOpen"].as_bool()?,
                integer: t == "integer",
                prior: Prior {
                    kind: if v["prior"].as_str()? == "loguniform" {
                        PriorKind::LogUniform
                    } else {
                        PriorKind::Uniform
                    },
                    quantization: v.get("quantization").and_then(Value::as_f64),
                },
                default: default.and_then(|d| d.as_f64()),
            }),
            "operator" => Some(Domain::OpSlot {
                marker: v["marker"].as_str()?.to_string(),
            }),
            _ => None,
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Domain::Cat { values, .. } => {
                let shown: Vec<String> = values.iter().map(Scalar::to_string).collect();
                write!(f, "[{}]", shown.join(", "))
            }
            Domain::Cont {
                lo,
                hi,
                lo_open,
                hi_open,
                integer,
                prior,
                ..
            } => {
                write!(
                    f,
                    "{}{lo}..{hi}{}",
                    if *lo_open { '(' } else { '[' },
                    if *hi_open { ')' } else { ']' }
                )?;
                if *integer {
                    f.write_str("i")?;
                }
                if prior.kind == PriorKind::LogUniform {
                    f.write_str("l")?;
                }
                Ok(())
            }
            Domain::OpSlot { marker } => write!(f, "<{marker}>"),
        }
    }
}

fn prefer_prior(a: Prior, b: Prior) -> Prior {
    Prior {
        kind: if a.kind == PriorKind::LogUniform || b.kind == PriorKind::LogUniform {
            PriorKind::LogUniform
        } else {
            PriorKind::Uniform
        },
        quantization: a.quantization.or(b.quantization),
    }
}

/// Intersection of two domains of the same hyperparameter; `None` if empty.
pub fn intersect_domain(a: &Domain, b: &Domain) -> Option<Domain> {
    let result = match (a, b) {
        (Domain::Cat { values, default }, other) | (other, Domain::Cat { values, default })
            if !matches!(other, Domain::Cat { .. }) =>
        {
            let kept: Vec<Scalar> = values
                .iter()
                .filter(|v| other.admits_scalar(v))
                .cloned()
                .collect();
            Domain::Cat {
                values: kept,
                default: default.clone(),
            }
        }
        (
            Domain::Cat {
                values: va,
                default: da,
            },
            Domain::Cat {
                values: vb,
                default: db,
            },
        ) => {
            let kept: Vec<Scalar> = va.iter().filter(|v| vb.contains(v)).cloned().collect();
            let default = [da, db]
                .into_iter()
                .flatten()
                .find(|d| kept.contains(d))
                .cloned();
            Domain::Cat {
                values: kept,
                default,
            }
        }
        (
            Domain::Cont {
                lo: la,
                hi: ha,
                lo_open: loa,
                hi_open: hoa,
                integer: ia,
                prior: pa,
                default: da,
            },
            Domain::Cont {
                lo: lb,
                hi: hb,
                lo_open: lob,
                hi_open: hob,
                integer: ib,
                prior: pb,
                default: db,
            },
        ) => {
            let (lo, lo_open) = if la == lb {
                (*la, *loa || *lob)
            } else if la > lb {
                (*la, *loa)
            } else {
                (*lb, *lob)
            };
            let (hi, hi_open) = if ha == hb {
                (*ha, *hoa || *hob)
            } else if ha < hb {
                (*ha, *hoa)
            } else {
                (*hb, *hob)
            };
            let mut prior = prefer_prior(*pa, *pb);
            if lo <= 0.0 {
                prior.kind = PriorKind::Uniform;
            }
            let mut d = Domain::Cont {
                lo,
                hi,
                lo_open,
                hi_open,
                integer: *ia || *ib,
                prior,
                default: None,
            };
            let default = [da, db]
                .into_iter()
                .flatten()
                .copied()
                .find(|x| d.contains_number(*x));
            if let Domain::Cont { default: slot, .. } = &mut d {
                *slot = default;
            }
            d
        }
        (Domain::OpSlot { marker }, Domain::OpSlot { .. }) => Domain::OpSlot {
            marker: marker.clone(),
        },
        _ => return None,
    };
    (!result.is_empty()).then_some(result)
}

/// Domains a value-level schema node admits, as alternatives.
fn value_options(node: &SchemaNode, name: &str) -> Result<Vec<Domain>, NormalizeError> {
    let mut options = match &node.kind {
        NodeKind::Enum(values) => vec![Domain::Cat {
            values: values.clone(),
            default: node.default.clone(),
        }],
        NodeKind::Range(r) => vec![Domain::from_range(r, node.default.as_ref())],
        NodeKind::OperatorSlot => vec![Domain::OpSlot {
            marker: String::new(),
        }],
        NodeKind::AnyOf(children) => {
            let mut out = Vec::new();
            for child in children {
                out.extend(value_options(child, name)?);
            }
            out
        }
        NodeKind::AllOf(children) => {
            let mut acc: Option<Vec<Domain>> = None;
            for child in children {
                let opts = value_options(child, name)?;
                acc = Some(match acc {
                    None => opts,
                    Some(prev) => prev
                        .iter()
                        .flat_map(|a| opts.iter().filter_map(move |b| intersect_domain(a, b)))
                        .collect(),
                });
            }
            acc.unwrap_or_default()
        }
        NodeKind::Not(_) => {
            return Err(NormalizeError::UnsupportedNegation(format!(
                "negation inside hyperparameter `{name}`"
            )))
        }
        NodeKind::Object(_) | NodeKind::Any => {
            return Err(NormalizeError::Unsupported(format!(
                "hyperparameter `{name}` has no enumerable or numeric domain"
            )))
        }
    };
    // The property's own default lands on whichever alternative admits it.
    if let Some(d) = &node.default {
        for option in &mut options {
            match option {
                Domain::Cat { values, default } if values.contains(d) => *default = Some(d.clone()),
                Domain::Cont { default, .. } => {
                    if let Some(x) = d.as_f64() {
                        *default = Some(x);
                    }
                }
                _ => {}
            }
        }
    }
    Ok(options)
}

struct Normalizer<'a> {
    declared: &'a IndexMap<String, SchemaNode>,
    declared_options: IndexMap<String, Vec<Domain>>,
    limit: usize,
}

impl Normalizer<'_> {
    fn check(&self, n: usize) -> Result<(), NormalizeError> {
        if n > self.limit {
            Err(NormalizeError::BlowupExceeded(self.limit))
        } else {
            Ok(())
        }
    }

    /// Completes partial records with declared domains, in declared order.
    fn fill(&self, partial: Vec<Record>) -> Result<Vec<Record>, NormalizeError> {
        let mut out = Vec::new();
        for record in partial {
            let mut expanded: Vec<Record> = vec![Record::new()];
            for (name, options) in &self.declared_options {
                match record.get(name) {
                    Some(d) => expanded.iter_mut().for_each(|r| {
                        r.insert(name.clone(), d.clone());
                    }),
                    None => {
                        let mut next = Vec::with_capacity(expanded.len() * options.len());
                        for r in &expanded {
                            for o in options {
                                let mut r = r.clone();
                                r.insert(name.clone(), o.clone());
                                next.push(r);
                            }
                        }
                        self.check(next.len() + out.len())?;
                        expanded = next;
                    }
                }
            }
            // Names outside the declared set are kept after the declared ones.
            for (name, d) in &record {
                if !self.declared.contains_key(name) {
                    expanded.iter_mut().for_each(|r| {
                        r.insert(name.clone(), d.clone());
                    });
                }
            }
            out.extend(expanded);
            self.check(out.len())?;
        }
        Ok(out)
    }

    fn intersect_lists(
        &self,
        left: &[Record],
        right: &[Record],
    ) -> Result<Vec<Record>, NormalizeError> {
        let mut out = Vec::new();
        for a in left {
            'pairs: for b in right {
                let mut merged = Record::new();
                for (name, da) in a {
                    let d = match b.get(name) {
                        Some(db) => match intersect_domain(da, db) {
                            Some(d) => d,
                            None => continue 'pairs,
                        },
                        None => da.clone(),
                    };
                    merged.insert(name.clone(), d);
                }
                for (name, db) in b {
                    if !merged.contains_key(name) {
                        merged.insert(name.clone(), db.clone());
                    }
                }
                out.push(merged);
                self.check(out.len())?;
            }
        }
        Ok(out)
    }

    fn records(&self, node: &SchemaNode) -> Result<Vec<Record>, NormalizeError> {
        let partial = match &node.kind {
            NodeKind::Any => vec![Record::new()],
            NodeKind::Object(object) => {
                let mut acc = vec![Record::new()];
                for (name, prop) in &object.properties {
                    let options = value_options(prop, name)?;
                    let mut next = Vec::new();
                    for r in &acc {
                        for o in &options {
                            let mut r = r.clone();
                            r.insert(name.clone(), o.clone());
                            next.push(r);
                        }
                    }
                    self.check(next.len())?;
                    acc = next;
                }
                acc
            }
            NodeKind::AnyOf(children) => {
                let mut out = Vec::new();
                for child in children {
                    out.extend(self.records(child)?);
                    self.check(out.len())?;
                }
                return Ok(out);
            }
            NodeKind::AllOf(children) => {
                let mut acc: Option<Vec<Record>> = None;
                for child in children {
                    let records = self.records(child)?;
                    acc = Some(match acc {
                        None => records,
                        Some(prev) => self.intersect_lists(&prev, &records)?,
                    });
                }
                return Ok(acc.unwrap_or_default());
            }
            NodeKind::Not(child) => self.complement(child)?,
            NodeKind::Enum(_) | NodeKind::Range(_) | NodeKind::OperatorSlot => {
                return Err(NormalizeError::Unsupported(
                    "operator schemas must describe an object of hyperparameters".into(),
                ))
            }
        };
        self.fill(partial)
    }

    /// `not {p1 in V1, ..., pk in Vk}` holds iff some pi lies outside Vi:
    /// one partial record per property, the others left to the declared
    /// domains.
    fn complement(&self, child: &SchemaNode) -> Result<Vec<Record>, NormalizeError> {
        let object = child.as_object().ok_or_else(|| {
            NormalizeError::UnsupportedNegation("negated schema is not an object".into())
        })?;
        let mut out = Vec::new();
        for (name, prop) in &object.properties {
            let NodeKind::Enum(excluded) = &prop.kind else {
                return Err(NormalizeError::UnsupportedNegation(format!(
                    "negated property `{name}` is not an enum"
                )));
            };
            let Some(options) = self.declared_options.get(name) else {
                return Err(NormalizeError::UnsupportedNegation(format!(
                    "negated property `{name}` is not declared"
                )));
            };
            for option in options {
                for d in subtract(option, excluded) {
                    let mut r = Record::new();
                    r.insert(name.clone(), d);
                    out.push(r);
                }
            }
        }
        Ok(out)
    }
}

/// Domain minus a finite set of values; continuous domains split into
/// intervals around excluded interior points.
fn subtract(domain: &Domain, excluded: &[Scalar]) -> Vec<Domain> {
    match domain {
        Domain::Cat { values, default } => {
            let kept: Vec<Scalar> = values
                .iter()
                .filter(|v| !excluded.contains(v))
                .cloned()
                .collect();
            if kept.is_empty() {
                Vec::new()
            } else {
                vec![Domain::Cat {
                    values: kept,
                    default: default.clone(),
                }]
            }
        }
        Domain::Cont {
            lo,
            hi,
            lo_open,
            hi_open,
            integer,
            prior,
            default,
        } => {
            let mut points: Vec<f64> = excluded
                .iter()
                .filter_map(Scalar::as_f64)
                .filter(|x| domain.contains_number(*x))
                .collect();
            points.sort_by(f64::total_cmp);
            points.dedup();
            let mut pieces = Vec::new();
            let (mut cur_lo, mut cur_open) = (*lo, *lo_open);
            for p in points {
                pieces.push((cur_lo, cur_open, p, true));
                cur_lo = p;
                cur_open = true;
            }
            pieces.push((cur_lo, cur_open, *hi, *hi_open));
            pieces
                .into_iter()
                .map(|(l, lo_open, h, hi_open)| {
                    let mut d = Domain::Cont {
                        lo: l,
                        hi: h,
                        lo_open,
                        hi_open,
                        integer: *integer,
                        prior: *prior,
                        default: None,
                    };
                    if let Some(x) = default.filter(|x| d.contains_number(*x)) {
                        if let Domain::Cont { default, .. } = &mut d {
                            *default = Some(x);
                        }
                    }
                    d
                })
                .filter(|d| !d.is_empty())
                .collect()
        }
        Domain::OpSlot { .. } => vec![domain.clone()],
    }
}

/// Normalizes with the default blowup limit.
pub fn normalize(
    schema: &SchemaNode,
    declared: &IndexMap<String, SchemaNode>,
) -> Result<NormalForm, NormalizeError> {
    normalize_with_limit(schema, declared, DEFAULT_BLOWUP_LIMIT)
}

pub fn normalize_with_limit(
    schema: &SchemaNode,
    declared: &IndexMap<String, SchemaNode>,
    limit: usize,
) -> Result<NormalForm, NormalizeError> {
    let declared_options = declared
        .iter()
        .map(|(k, v)| value_options(v, k).map(|o| (k.clone(), o)))
        .collect::<Result<_, _>>()?;
    let normalizer = Normalizer {
        declared,
        declared_options,
        limit,
    };
    let disjuncts = normalizer.records(schema)?;
    if disjuncts.is_empty() {
        return Err(NormalizeError::EmptySpace);
    }
    Ok(NormalForm { disjuncts })
}

/// The declared hyperparameter domains alone, without side constraints.
pub fn drop_constraints(schema: &SchemaNode) -> SchemaNode {
    match &schema.kind {
        NodeKind::AllOf(children) if children.first().is_some_and(|c| c.as_object().is_some()) => {
            let mut base = children[0].clone();
            if base.description.is_none() {
                base.description = schema.description.clone();
            }
            base
        }
        _ => schema.clone(),
    }
}

impl NormalForm {
    /// True iff some disjunct admits every value of `config`, which must
    /// bind every name of the normal form.
    pub fn member(&self, config: &Config) -> bool {
        self.disjuncts.iter().any(|d| {
            d.iter()
                .all(|(name, domain)| config.get(name).is_some_and(|v| domain.admits(v)))
        })
    }

    /// Sorted textual disjuncts, for order-insensitive comparison.
    pub fn canonical(&self) -> Vec<String> {
        let mut out: Vec<String> = self.disjuncts.iter().map(record_to_string).collect();
        out.sort();
        out
    }

    pub fn names(&self) -> Vec<&str> {
        self.disjuncts
            .first()
            .map(|d| d.keys().map(String::as_str).collect())
            .unwrap_or_default()
    }
}

pub fn record_to_string(record: &Record) -> String {
    let inner: Vec<String> = record.iter().map(|(k, d)| format!("{k}:{d}")).collect();
    format!("dict{{{}}}", inner.join(", "))
}

impl fmt::Display for NormalForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.disjuncts.iter().map(record_to_string).collect();
        f.write_str(&parts.join(" ∨ "))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::{declared_domains, parse_schema};

    fn nf(text: &str) -> NormalForm {
        let schema = parse_schema(text).unwrap();
        normalize(&schema, &declared_domains(&schema).unwrap()).unwrap()
    }

    #[test]
    fn j48_normal_form() {
        let form = nf(include_str!("../schemas/J48.schema.json"));
        assert_eq!(
            form.to_string(),
            "dict{R:[false], C:(0..0.5)} ∨ dict{R:[true, false], C:[0.25]}"
        );
    }

    #[test]
    fn pca_and_lr_normal_forms() {
        let pca = nf(include_str!("../schemas/PCA.schema.json"));
        assert_eq!(pca.to_string(), "dict{N:(0..1)} ∨ dict{N:[mle]}");
        let lr = nf(include_str!("../schemas/LR.schema.json"));
        assert_eq!(
            lr.to_string(),
            "dict{S:[linear], P:[l1, l2]} ∨ dict{S:[linear, sag, lbfgs], P:[l2]}"
        );
    }

    #[test]
    fn cat_meets_cont() {
        let cat = Domain::Cat {
            values: vec![Scalar::Number(0.25), Scalar::str("x")],
            default: None,
        };
        let cont = Domain::Cont {
            lo: 0.0,
            hi: 0.5,
            lo_open: true,
            hi_open: true,
            integer: false,
            prior: Prior::default(),
            default: Some(0.25),
        };
        let meet = intersect_domain(&cont, &cat).unwrap();
        assert_eq!(meet.to_string(), "[0.25]");
        let far = Domain::Cont {
            lo: 2.0,
            hi: 3.0,
            lo_open: false,
            hi_open: false,
            integer: false,
            prior: Prior::default(),
            default: None,
        };
        assert_eq!(intersect_domain(&cont, &far), None);
    }

    #[test]
    fn touching_bounds_or_their_openness() {
        let a = Domain::Cont {
            lo: 0.0,
            hi: 1.0,
            lo_open: false,
            hi_open: true,
            integer: false,
            prior: Prior::default(),
            default: None,
        };
        let b = Domain::Cont {
            lo: 1.0,
            hi: 2.0,
            lo_open: false,
            hi_open: false,
            integer: false,
            prior: Prior::default(),
            default: None,
        };
        assert_eq!(intersect_domain(&a, &b), None);
    }

    #[test]
    fn negating_an_interior_number_splits_the_interval() {
        let form = nf(r#"{"allOf": [
            {"type": "object", "properties": {"x": {"type": "number", "minimum": 0, "maximum": 1, "default": 0.5}}},
            {"not": {"properties": {"x": {"enum": [0.5]}}}}]}"#);
        assert_eq!(form.to_string(), "dict{x:[0..0.5)} ∨ dict{x:(0.5..1]}");
    }

    #[test]
    fn blowup_is_an_error() {
        let props: Vec<String> = (0..8)
            .map(|i| {
                format!(
                    r#""p{i}": {{"anyOf": [{{"enum": [1]}}, {{"enum": [2]}}, {{"enum": [3]}}]}}"#
                )
            })
            .collect();
        let text = format!(
            r#"{{"type": "object", "properties": {{{}}}}}"#,
            props.join(",")
        );
        let schema = parse_schema(&text).unwrap();
        let declared = declared_domains(&schema).unwrap();
        assert_eq!(
            normalize_with_limit(&schema, &declared, 1000),
            Err(NormalizeError::BlowupExceeded(1000))
        );
        assert_eq!(normalize(&schema, &declared).unwrap().disjuncts.len(), 6561);
    }

    #[test]
    fn unsatisfiable_schema_is_empty() {
        let schema = parse_schema(
            r#"{"allOf": [
            {"type": "object", "properties": {"a": {"enum": [1, 2]}}},
            {"properties": {"a": {"enum": [3]}}}]}"#,
        )
        .unwrap();
        let declared = declared_domains(&schema).unwrap();
        assert_eq!(
            normalize(&schema, &declared),
            Err(NormalizeError::EmptySpace)
        );
    }
}
