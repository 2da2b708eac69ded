//! PCS text: writer and a reader for the same dialect.
//!
//! Parameter lines:
//!
//! ```text
//! name {v1, v2, v3} [v1]        # categorical
//! name [lo, hi] [default]       # real, uniform
//! name [lo, hi] [default]l      # real, log-uniform
//! name [lo, hi] [default]i      # integer (`il` for log-uniform)
//! ```
//!
//! Condition lines `child | parent == value` or `child | parent in {a, b}`
//! make `child` active only when `parent` is active and has one of the
//! listed values; several conditions on one child must all hold. Forbidden
//! clauses `{a=1, b=x}` exclude combinations. `#` starts a comment.
//!
//! The writer emits one categorical per choice discriminant. A leaf whose
//! normal form has several disjuncts gets a selector `<path>@disjunct` with
//! values `0..k`; the parameters of disjunct `j` are written as `<key>@j`
//! and conditioned on the selector. PCS has no open intervals, so open
//! bounds move inward by 1e-9 of the interval width.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use indexmap::IndexMap;
use rand::Rng;

use super::flat::flat_count;
use super::{key, Point, SearchIr, SpaceError};
use crate::normalize::Domain;
use crate::schema::{PriorKind, Scalar};

pub const SELECTOR_SUFFIX: &str = "@disjunct";

fn fmt_scalar(s: &Scalar) -> String {
    s.to_string()
}

fn shrink(lo: f64, hi: f64, lo_open: bool, hi_open: bool) -> (f64, f64) {
    let eps = 1e-9 * (hi - lo);
    (
        if lo_open { lo + eps } else { lo },
        if hi_open { hi - eps } else { hi },
    )
}

struct Writer {
    params: String,
    conditions: String,
}

impl Writer {
    fn condition(&mut self, child: &str, conds: &[(String, String)]) {
        for (parent, value) in conds {
            let _ = writeln!(self.conditions, "{child} | {parent} == {value}");
        }
    }

    fn categorical(&mut self, name: &str, values: &[Scalar], default: &Scalar) {
        let shown: Vec<String> = values.iter().map(fmt_scalar).collect();
        let _ = writeln!(
            self.params,
            "{name} {{{}}} [{}]",
            shown.join(", "),
            fmt_scalar(default)
        );
    }

    fn domain(&mut self, name: &str, domain: &Domain) {
        match domain {
            Domain::Cat { values, .. } => self.categorical(name, values, &domain.default_scalar()),
            Domain::OpSlot { marker } => {
                let m = Scalar::Str(marker.clone());
                self.categorical(name, std::slice::from_ref(&m), &m)
            }
            Domain::Cont { .. } if domain.is_degenerate() => {
                let v = domain.default_scalar();
                self.categorical(name, std::slice::from_ref(&v), &v)
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
                let log = prior.kind == PriorKind::LogUniform;
                let default = domain.default_scalar().as_f64().unwrap_or(*lo);
                if *integer {
                    let mut first = lo.ceil();
                    if *lo_open && first == *lo {
                        first += 1.0;
                    }
                    let mut last = hi.floor();
                    if *hi_open && last == *hi {
                        last -= 1.0;
                    }
                    let suffix = if log { "il" } else { "i" };
                    let _ = writeln!(self.params, "{name} [{first}, {last}] [{default}]{suffix}");
                } else {
                    let (a, b) = shrink(*lo, *hi, *lo_open, *hi_open);
                    let d = default.clamp(a, b);
                    let suffix = if log { "l" } else { "" };
                    let _ = writeln!(self.params, "{name} [{a}, {b}] [{d}]{suffix}");
                }
            }
        }
    }

    fn walk(&mut self, ir: &SearchIr, conds: &[(String, String)]) {
        match ir {
            SearchIr::Steps { steps, .. } => steps.values().for_each(|s| self.walk(s, conds)),
            SearchIr::Choice {
                discriminant,
                branches,
            } => {
                let values: Vec<Scalar> = branches
                    .iter()
                    .map(|b| Scalar::Str(b.value.clone()))
                    .collect();
                self.categorical(discriminant, &values, &values[0]);
                self.condition(discriminant, conds);
                for b in branches {
                    let mut inner = conds.to_vec();
                    inner.push((discriminant.clone(), b.value.clone()));
                    self.walk(&b.body, &inner);
                }
            }
            SearchIr::Leaf(leaf) => {
                let disjuncts = &leaf.nf.disjuncts;
                if disjuncts.len() == 1 {
                    for (name, domain) in &disjuncts[0] {
                        let k = key(&leaf.path, name);
                        self.domain(&k, domain);
                        self.condition(&k, conds);
                    }
                } else {
                    let selector = format!("{}{SELECTOR_SUFFIX}", leaf.path);
                    let ids: Vec<Scalar> = (0..disjuncts.len())
                        .map(|i| Scalar::Number(i as f64))
                        .collect();
                    self.categorical(&selector, &ids, &ids[0]);
                    self.condition(&selector, conds);
                    for (j, d) in disjuncts.iter().enumerate() {
                        let mut inner = conds.to_vec();
                        inner.push((selector.clone(), j.to_string()));
                        for (name, domain) in d {
                            let k = format!("{}@{j}", key(&leaf.path, name));
                            self.domain(&k, domain);
                            self.condition(&k, &inner);
                        }
                    }
                }
                for slot in leaf.slots.values() {
                    self.walk(slot, conds);
                }
            }
        }
    }
}

/// Writes the space as PCS text.
pub fn emit_pcs(ir: &SearchIr, limit: usize) -> Result<String, SpaceError> {
    if flat_count(ir) > limit as u128 {
        return Err(SpaceError::BlowupExceeded(limit));
    }
    let mut w = Writer {
        params: String::new(),
        conditions: String::new(),
    };
    w.walk(ir, &[]);
    let mut out = w.params;
    if !w.conditions.is_empty() {
        out.push_str("\nConditionals:\n");
        out.push_str(&w.conditions);
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub enum PcsParam {
    Categorical {
        values: Vec<Scalar>,
        default: Scalar,
    },
    Real {
        lo: f64,
        hi: f64,
        log: bool,
        default: f64,
    },
    Integer {
        lo: i64,
        hi: i64,
        log: bool,
        default: i64,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct PcsCondition {
    pub child: String,
    pub parent: String,
    pub values: Vec<Scalar>,
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct PcsSpace {
    pub params: IndexMap<String, PcsParam>,
    pub conditions: Vec<PcsCondition>,
    pub forbidden: Vec<Vec<(String, Scalar)>>,
}

fn parse_error(line: usize, message: impl Into<String>) -> SpaceError {
    SpaceError::PcsParse {
        line,
        message: message.into(),
    }
}

fn split_list(inner: &str) -> Vec<Scalar> {
    inner
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(Scalar::from_token)
        .collect()
}

fn bracketed(
    text: &str,
    open: char,
    close: char,
    line: usize,
) -> Result<(String, String), SpaceError> {
    let text = text.trim_start();
    if !text.starts_with(open) {
        return Err(parse_error(line, format!("expected `{open}`")));
    }
    let end = text
        .find(close)
        .ok_or_else(|| parse_error(line, format!("missing `{close}`")))?;
    Ok((text[1..end].to_string(), text[end + 1..].to_string()))
}

/// Parses PCS text in the dialect documented on this module.
pub fn parse_pcs(text: &str) -> Result<PcsSpace, SpaceError> {
    let mut space = PcsSpace::default();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty()
            || line.eq_ignore_ascii_case("conditionals:")
            || line.eq_ignore_ascii_case("forbidden:")
        {
            continue;
        }
        if line.starts_with('{') {
            let (inner, _) = bracketed(line, '{', '}', line_no)?;
            let mut clause = Vec::new();
            for part in inner.split(',') {
                let (name, value) = part
                    .split_once('=')
                    .ok_or_else(|| parse_error(line_no, "forbidden clause needs name=value"))?;
                let name = name.trim().to_string();
                if !space.params.contains_key(&name) {
                    return Err(parse_error(line_no, format!("unknown parameter `{name}`")));
                }
                clause.push((name, Scalar::from_token(value.trim())));
            }
            space.forbidden.push(clause);
            continue;
        }
        if let Some((child, rest)) = line.split_once('|') {
            let child = child.trim().to_string();
            let rest = rest.trim();
            let (parent, values) = if let Some((p, v)) = rest.split_once("==") {
                (p.trim().to_string(), vec![Scalar::from_token(v.trim())])
            } else if let Some((p, v)) = rest.split_once(" in ") {
                let (inner, _) = bracketed(v, '{', '}', line_no)?;
                (p.trim().to_string(), split_list(&inner))
            } else {
                return Err(parse_error(line_no, "condition needs `==` or `in {...}`"));
            };
            for name in [&child, &parent] {
                if !space.params.contains_key(name) {
                    return Err(parse_error(line_no, format!("unknown parameter `{name}`")));
                }
            }
            space.conditions.push(PcsCondition {
                child,
                parent,
                values,
            });
            continue;
        }
        let (name, rest) = line
            .split_once(char::is_whitespace)
            .ok_or_else(|| parse_error(line_no, "expected a parameter definition"))?;
        let rest = rest.trim();
        let param = if rest.starts_with('{') {
            let (inner, tail) = bracketed(rest, '{', '}', line_no)?;
            let (default, _) = bracketed(&tail, '[', ']', line_no)?;
            let values = split_list(&inner);
            let default = Scalar::from_token(default.trim());
            if values.is_empty() || !values.contains(&default) {
                return Err(parse_error(
                    line_no,
                    "categorical default must be one of its values",
                ));
            }
            PcsParam::Categorical { values, default }
        } else {
            let (range, tail) = bracketed(rest, '[', ']', line_no)?;
            let (default, suffix) = bracketed(&tail, '[', ']', line_no)?;
            let (lo, hi) = range
                .split_once(',')
                .ok_or_else(|| parse_error(line_no, "range needs `lo, hi`"))?;
            let num = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| parse_error(line_no, format!("`{}` is not a number", s.trim())))
            };
            let (lo, hi, default) = (num(lo)?, num(hi)?, num(&default)?);
            let suffix = suffix.trim();
            let log = suffix.contains('l');
            if !(lo <= default && default <= hi) {
                return Err(parse_error(line_no, "default outside range"));
            }
            if log && lo <= 0.0 {
                return Err(parse_error(
                    line_no,
                    "log scale needs a positive lower bound",
                ));
            }
            if suffix.contains('i') {
                PcsParam::Integer {
                    lo: lo as i64,
                    hi: hi as i64,
                    log,
                    default: default as i64,
                }
            } else {
                PcsParam::Real {
                    lo,
                    hi,
                    log,
                    default,
                }
            }
        };
        space.params.insert(name.to_string(), param);
    }
    Ok(space)
}

impl PcsParam {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Scalar {
        match self {
            PcsParam::Categorical { values, .. } => {
                values[rng.random_range(0..values.len())].clone()
            }
            PcsParam::Real { lo, hi, .. } if lo == hi => Scalar::Number(*lo),
            PcsParam::Real { lo, hi, log, .. } => {
                let x = if *log {
                    rng.random_range(lo.ln()..=hi.ln()).exp()
                } else {
                    rng.random_range(*lo..=*hi)
                };
                Scalar::Number(x.clamp(*lo, *hi))
            }
            PcsParam::Integer { lo, hi, log, .. } => {
                if *log && *lo >= 1 {
                    let (a, b) = ((*lo as f64 - 0.5).max(0.5).ln(), (*hi as f64 + 0.5).ln());
                    let x = rng
                        .random_range(a..b)
                        .exp()
                        .round()
                        .clamp(*lo as f64, *hi as f64);
                    Scalar::Number(x)
                } else {
                    Scalar::Number(rng.random_range(*lo..=*hi) as f64)
                }
            }
        }
    }

    pub fn admits(&self, v: &Scalar) -> bool {
        match (self, v) {
            (PcsParam::Categorical { values, .. }, v) => values.contains(v),
            (PcsParam::Real { lo, hi, .. }, Scalar::Number(x)) => lo <= x && x <= hi,
            (PcsParam::Integer { lo, hi, .. }, Scalar::Number(x)) => {
                x.fract() == 0.0 && *lo as f64 <= *x && *x <= *hi as f64
            }
            _ => false,
        }
    }
}

impl PcsSpace {
    /// Draws an assignment of the active parameters. Parents are decided
    /// before children; assignments hitting a forbidden clause are redrawn.
    pub fn sample<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
    ) -> Result<BTreeMap<String, Scalar>, SpaceError> {
        for _ in 0..1000 {
            let assignment = self.sample_once(rng)?;
            if !self.is_forbidden(&assignment) {
                return Ok(assignment);
            }
        }
        Err(parse_error(
            0,
            "forbidden clauses exclude every sampled assignment",
        ))
    }

    fn sample_once<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
    ) -> Result<BTreeMap<String, Scalar>, SpaceError> {
        let mut decided: BTreeMap<&str, Option<Scalar>> = BTreeMap::new();
        while decided.len() < self.params.len() {
            let mut progressed = false;
            for (name, param) in &self.params {
                if decided.contains_key(name.as_str()) {
                    continue;
                }
                let conds: Vec<&PcsCondition> = self
                    .conditions
                    .iter()
                    .filter(|c| &c.child == name)
                    .collect();
                if conds
                    .iter()
                    .any(|c| !decided.contains_key(c.parent.as_str()))
                {
                    continue;
                }
                let active = conds.iter().all(|c| {
                    decided[c.parent.as_str()]
                        .as_ref()
                        .is_some_and(|v| c.values.contains(v))
                });
                decided.insert(name, active.then(|| param.sample(rng)));
                progressed = true;
            }
            if !progressed {
                return Err(parse_error(0, "conditions form a cycle"));
            }
        }
        Ok(decided
            .into_iter()
            .filter_map(|(k, v)| v.map(|v| (k.to_string(), v)))
            .collect())
    }

    fn is_forbidden(&self, assignment: &BTreeMap<String, Scalar>) -> bool {
        self.forbidden
            .iter()
            .any(|clause| clause.iter().all(|(k, v)| assignment.get(k) == Some(v)))
    }

    /// Whether exactly the active parameters are assigned, each in range.
    pub fn admits(&self, assignment: &BTreeMap<String, Scalar>) -> bool {
        for (name, param) in &self.params {
            let active = self
                .conditions
                .iter()
                .filter(|c| &c.child == name)
                .all(|c| {
                    assignment
                        .get(&c.parent)
                        .is_some_and(|v| c.values.contains(v))
                });
            match assignment.get(name) {
                Some(v) if active && param.admits(v) => {}
                None if !active => {}
                _ => return false,
            }
        }
        assignment.keys().all(|k| self.params.contains_key(k)) && !self.is_forbidden(assignment)
    }
}

/// Maps a PCS assignment back to mangled keys: selectors are dropped and
/// `@j` suffixes removed.
pub fn pcs_to_point(assignment: &BTreeMap<String, Scalar>) -> Point {
    assignment
        .iter()
        .filter(|(k, _)| !k.ends_with(SELECTOR_SUFFIX))
        .map(|(k, v)| {
            let name = match k.rsplit_once('@') {
                Some((base, j)) if j.chars().all(|c| c.is_ascii_digit()) => base.to_string(),
                _ => k.clone(),
            };
            (name, v.clone())
        })
        .collect()
}
