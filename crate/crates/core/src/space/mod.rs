//! Search spaces compiled from planned operators.
//!
//! [`combine`] turns an operator into a [`SearchIr`] whose nesting mirrors
//! the operator: pipelines become step maps, choices become unions tagged
//! by a discriminant, and individual operators become leaves holding their
//! normal form. The emitters in the submodules encode the IR as nested
//! JSON, a flat list of disjuncts, PCS text, or a discretized grid.
//!
//! Parameter names are mangled by joining path tokens with `__`. A step's
//! token is its operator name in lower case (`choice` for a choice,
//! `pipeline` for a pipeline inside a choice branch), suffixed `_1`, `_2`,
//! ... when a token repeats among siblings. Each choice adds a discriminant
//! `<path>__D` whose values are the alternatives' operator names, and each
//! branch extends the path with the lowercased discriminant value. For
//! `PCA >> (J48 | LR)` the keys are `pca__N`, `choice__D`, `choice__j48__R`,
//! `choice__j48__C`, `choice__lr__S`, and `choice__lr__P`.

mod flat;
mod grid;
mod hier;
pub mod pcs;
mod sample;

use std::collections::{BTreeMap, BTreeSet};

use indexmap::IndexMap;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::normalize::{
    drop_constraints, normalize_with_limit, Domain, NormalForm, NormalizeError,
    DEFAULT_BLOWUP_LIMIT,
};
use crate::ops::{Individual, LifecycleState, OpError, Operator, Pipeline};
use crate::schema::{declared_domains, Config, ConfigValue, Scalar, SchemaError, SchemaNode};

pub use flat::{emit_flat, flat_member, flat_to_json, FlatDisjunct};
pub use grid::{emit_grid, DiscretizedGrid};
pub use hier::emit_hierarchical;
pub use sample::{sample_domain, sample_point, sample_point_in_branch};

/// A flat assignment: mangled name to value. Operator slots hold their marker.
pub type Point = BTreeMap<String, Scalar>;

#[derive(Debug, Error)]
pub enum SpaceError {
    #[error("{operator} at `{path}`: {source}")]
    Normalize {
        operator: String,
        path: String,
        #[source]
        source: NormalizeError,
    },
    #[error("{operator} at `{path}`: {source}")]
    Schema {
        operator: String,
        path: String,
        #[source]
        source: SchemaError,
    },
    #[error("{operator} at `{path}`: bound hyperparameters admit no disjunct")]
    EmptyAfterBinding { operator: String, path: String },
    #[error("search space exceeds {0} flat disjuncts")]
    BlowupExceeded(usize),
    #[error("grid has {cells} cells, more than the limit of {limit}")]
    GridTooLarge { cells: u128, limit: usize },
    #[error("point has no value for `{0}`")]
    MissingKey(String),
    #[error("`{key}` = {value} names no branch")]
    UnknownBranch { key: String, value: String },
    #[error("`{key}` = {value} is not the marker of that operator slot")]
    UnknownMarker { key: String, value: String },
    #[error("decoded configuration rejected: {0}")]
    Decode(#[from] OpError),
    #[error("PCS line {line}: {message}")]
    PcsParse { line: usize, message: String },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CombineOptions {
    /// Keep side constraints; when false only declared domains are used.
    pub keep_constraints: bool,
    pub limit: usize,
}

impl Default for CombineOptions {
    fn default() -> Self {
        CombineOptions {
            keep_constraints: true,
            limit: DEFAULT_BLOWUP_LIMIT,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Leaf {
    /// Mangled path of the step; parameter keys are `<path>__<name>`.
    pub path: String,
    /// The operator with its bound hyperparameters; decoding configures it.
    pub template: Operator,
    /// Remaining dimensions after removing bound hyperparameters.
    pub nf: NormalForm,
    /// Nested spaces for operator-valued hyperparameters, by name.
    pub slots: IndexMap<String, SearchIr>,
    pub frozen: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Branch {
    pub value: String,
    pub body: SearchIr,
}

#[derive(Clone, Debug, PartialEq)]
pub enum SearchIr {
    Steps {
        steps: IndexMap<String, SearchIr>,
        edges: Vec<(usize, usize)>,
    },
    Choice {
        discriminant: String,
        branches: Vec<Branch>,
    },
    Leaf(Leaf),
}

pub fn key(path: &str, name: &str) -> String {
    format!("{path}__{name}")
}

fn join_path(prefix: Option<&str>, token: &str) -> String {
    match prefix {
        Some(p) => key(p, token),
        None => token.to_string(),
    }
}

fn base_token(op: &Operator) -> String {
    match op {
        Operator::Individual(i) => i.name().to_lowercase(),
        Operator::Choice(_) => "choice".into(),
        Operator::Pipeline(_) => "pipeline".into(),
    }
}

/// Suffixes `_1`, `_2`, ... onto every label that occurs more than once.
fn dedupe(labels: Vec<String>) -> Vec<String> {
    let mut totals: BTreeMap<String, usize> = BTreeMap::new();
    for l in &labels {
        *totals.entry(l.clone()).or_default() += 1;
    }
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    labels
        .into_iter()
        .map(|l| {
            if totals[&l] > 1 {
                let n = seen.entry(l.clone()).or_default();
                *n += 1;
                format!("{l}_{n}")
            } else {
                l
            }
        })
        .collect()
}

/// Compiles an operator into the search IR.
pub fn combine(op: &Operator, options: &CombineOptions) -> Result<SearchIr, SpaceError> {
    combine_top(op, None, options)
}

fn combine_top(
    op: &Operator,
    prefix: Option<&str>,
    options: &CombineOptions,
) -> Result<SearchIr, SpaceError> {
    let (steps, edges): (Vec<&Operator>, Vec<(usize, usize)>) = match op {
        Operator::Pipeline(p) => (p.steps().iter().collect(), p.edges().to_vec()),
        other => (vec![other], Vec::new()),
    };
    combine_steps(&steps, edges, prefix, options)
}

fn combine_steps(
    steps: &[&Operator],
    edges: Vec<(usize, usize)>,
    prefix: Option<&str>,
    options: &CombineOptions,
) -> Result<SearchIr, SpaceError> {
    let tokens = dedupe(steps.iter().map(|s| base_token(s)).collect());
    let mut map = IndexMap::new();
    for (token, step) in tokens.into_iter().zip(steps) {
        let path = join_path(prefix, &token);
        map.insert(token, combine_step(step, &path, options)?);
    }
    Ok(SearchIr::Steps { steps: map, edges })
}

fn combine_step(
    op: &Operator,
    path: &str,
    options: &CombineOptions,
) -> Result<SearchIr, SpaceError> {
    match op {
        Operator::Individual(ind) => combine_leaf(ind, path, options).map(SearchIr::Leaf),
        Operator::Pipeline(p) => {
            let steps: Vec<&Operator> = p.steps().iter().collect();
            combine_steps(&steps, p.edges().to_vec(), Some(path), options)
        }
        Operator::Choice(c) => {
            let values = dedupe(
                c.alternatives()
                    .iter()
                    .map(|a| a.name().to_string())
                    .collect(),
            );
            let mut branches = Vec::new();
            for (value, alt) in values.into_iter().zip(c.alternatives()) {
                let body_path = key(path, &value.to_lowercase());
                branches.push(Branch {
                    body: combine_step(alt, &body_path, options)?,
                    value,
                });
            }
            Ok(SearchIr::Choice {
                discriminant: key(path, "D"),
                branches,
            })
        }
    }
}

fn combine_leaf(
    ind: &Individual,
    path: &str,
    options: &CombineOptions,
) -> Result<Leaf, SpaceError> {
    let operator = ind.name().to_string();
    let mut template = Operator::Individual(ind.clone());
    if ind.is_frozen_trainable() || ind.is_frozen_trained() {
        return Ok(Leaf {
            path: path.to_string(),
            template,
            nf: NormalForm {
                disjuncts: vec![IndexMap::new()],
            },
            slots: IndexMap::new(),
            frozen: true,
        });
    }
    let schema_err = |source| SpaceError::Schema {
        operator: operator.clone(),
        path: path.to_string(),
        source,
    };
    let schema = if options.keep_constraints {
        ind.schema().clone()
    } else {
        let dropped = drop_constraints(ind.schema());
        if dropped != *ind.schema() {
            template = replace_schema(&template, dropped.clone());
        }
        dropped
    };
    let declared = declared_domains(&schema).map_err(schema_err)?;
    let nf = normalize_with_limit(&schema, &declared, options.limit).map_err(|source| {
        SpaceError::Normalize {
            operator: operator.clone(),
            path: path.to_string(),
            source,
        }
    })?;

    let mut slots = IndexMap::new();
    for (name, value) in ind.bound() {
        if let ConfigValue::Operator(nested) = value {
            let marker = key(path, name);
            slots.insert(name.clone(), combine_top(nested, Some(&marker), options)?);
        }
    }

    let mut disjuncts = Vec::new();
    'disjuncts: for d in nf.disjuncts {
        let mut kept = IndexMap::new();
        for (name, domain) in d {
            match (ind.bound().get(&name), &domain) {
                (Some(ConfigValue::Operator(_)), Domain::OpSlot { .. }) => {
                    kept.insert(
                        name.clone(),
                        Domain::OpSlot {
                            marker: key(path, &name),
                        },
                    );
                }
                (Some(v), _) if domain.admits(v) => {}
                (Some(_), _) => continue 'disjuncts,
                // An open operator slot has nothing to search over.
                (None, Domain::OpSlot { .. }) => continue 'disjuncts,
                (None, _) => {
                    kept.insert(name, domain);
                }
            }
        }
        disjuncts.push(kept);
    }
    if disjuncts.is_empty() {
        return Err(SpaceError::EmptyAfterBinding {
            operator,
            path: path.to_string(),
        });
    }
    Ok(Leaf {
        path: path.to_string(),
        template,
        nf: NormalForm { disjuncts },
        slots,
        frozen: false,
    })
}

/// The same operator over a different schema, with its bindings kept.
fn replace_schema(op: &Operator, schema: SchemaNode) -> Operator {
    let Operator::Individual(ind) = op else {
        return op.clone();
    };
    let rebuilt = crate::ops::individual(ind.name(), schema, ind.implementation());
    if ind.state() >= LifecycleState::Trainable {
        rebuilt.configure(ind.bound()).unwrap_or(rebuilt)
    } else {
        rebuilt
    }
}

impl SearchIr {
    /// Number of mangled dimensions, counting each key once.
    pub fn dimension_names(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_names(&mut out);
        out
    }

    fn collect_names(&self, out: &mut BTreeSet<String>) {
        match self {
            SearchIr::Steps { steps, .. } => steps.values().for_each(|s| s.collect_names(out)),
            SearchIr::Choice {
                discriminant,
                branches,
            } => {
                out.insert(discriminant.clone());
                branches.iter().for_each(|b| b.body.collect_names(out));
            }
            SearchIr::Leaf(leaf) => {
                for d in &leaf.nf.disjuncts {
                    out.extend(d.keys().map(|n| key(&leaf.path, n)));
                }
                leaf.slots.values().for_each(|s| s.collect_names(out));
            }
        }
    }

    /// The first choice reachable through step maps only.
    pub fn root_choice(&self) -> Option<(&str, &[Branch])> {
        match self {
            SearchIr::Choice {
                discriminant,
                branches,
            } => Some((discriminant, branches)),
            SearchIr::Steps { steps, .. } => steps.values().find_map(SearchIr::root_choice),
            SearchIr::Leaf(_) => None,
        }
    }

    /// Whether `point` lies in the space: every active dimension is
    /// admitted and no other keys are present.
    pub fn member(&self, point: &Point) -> bool {
        let mut used = BTreeSet::new();
        self.member_inner(point, &mut used) && used.len() == point.len()
    }

    fn member_inner(&self, point: &Point, used: &mut BTreeSet<String>) -> bool {
        match self {
            SearchIr::Steps { steps, .. } => steps.values().all(|s| s.member_inner(point, used)),
            SearchIr::Choice {
                discriminant,
                branches,
            } => {
                let Some(Scalar::Str(v)) = point.get(discriminant) else {
                    return false;
                };
                used.insert(discriminant.clone());
                branches
                    .iter()
                    .find(|b| &b.value == v)
                    .is_some_and(|b| b.body.member_inner(point, used))
            }
            SearchIr::Leaf(leaf) => {
                let admitted = leaf.nf.disjuncts.iter().any(|d| {
                    d.iter().all(|(name, domain)| {
                        point
                            .get(&key(&leaf.path, name))
                            .is_some_and(|v| match domain {
                                Domain::OpSlot { marker } => v == &Scalar::Str(marker.clone()),
                                _ => domain.admits_scalar(v),
                            })
                    })
                });
                if !admitted {
                    return false;
                }
                for d in &leaf.nf.disjuncts {
                    for name in d.keys() {
                        used.insert(key(&leaf.path, name));
                    }
                }
                leaf.slots.values().all(|s| s.member_inner(point, used))
            }
        }
    }

    /// Rebuilds the operator a point selects: choices are resolved by
    /// their discriminants and leaves configured with the point's values.
    pub fn decode(&self, point: &Point) -> Result<Operator, SpaceError> {
        match self {
            SearchIr::Steps { steps, edges } => {
                let decoded = steps
                    .values()
                    .map(|s| s.decode(point))
                    .collect::<Result<Vec<_>, _>>()?;
                if decoded.len() == 1 && edges.is_empty() {
                    return Ok(decoded.into_iter().next().expect("one step"));
                }
                Ok(Operator::Pipeline(Pipeline::new(decoded, edges.clone())?))
            }
            SearchIr::Choice {
                discriminant,
                branches,
            } => {
                let value = point
                    .get(discriminant)
                    .ok_or_else(|| SpaceError::MissingKey(discriminant.clone()))?;
                let branch = branches
                    .iter()
                    .find(|b| Some(b.value.as_str()) == value.as_str())
                    .ok_or_else(|| SpaceError::UnknownBranch {
                        key: discriminant.clone(),
                        value: value.to_string(),
                    })?;
                branch.body.decode(point)
            }
            SearchIr::Leaf(leaf) => {
                if leaf.frozen {
                    return Ok(leaf.template.clone());
                }
                let mut config = Config::new();
                let names: BTreeSet<&String> =
                    leaf.nf.disjuncts.iter().flat_map(|d| d.keys()).collect();
                for name in names {
                    let k = key(&leaf.path, name);
                    let value = point
                        .get(&k)
                        .ok_or_else(|| SpaceError::MissingKey(k.clone()))?;
                    if let Some(slot) = leaf.slots.get(name) {
                        if value.as_str() != Some(k.as_str()) {
                            return Err(SpaceError::UnknownMarker {
                                key: k,
                                value: value.to_string(),
                            });
                        }
                        config.insert(
                            name.clone(),
                            ConfigValue::Operator(Box::new(slot.decode(point)?)),
                        );
                    } else {
                        config.insert(name.clone(), ConfigValue::Scalar(value.clone()));
                    }
                }
                for (name, slot) in &leaf.slots {
                    if !config.contains_key(name) {
                        config.insert(
                            name.clone(),
                            ConfigValue::Operator(Box::new(slot.decode(point)?)),
                        );
                    }
                }
                Ok(leaf.template.configure(&config)?)
            }
        }
    }

    /// Default point: first branch of every choice and each leaf's first
    /// disjunct at its defaults.
    pub fn default_point(&self) -> Point {
        let mut point = Point::new();
        self.fill_default(&mut point);
        point
    }

    fn fill_default(&self, point: &mut Point) {
        match self {
            SearchIr::Steps { steps, .. } => steps.values().for_each(|s| s.fill_default(point)),
            SearchIr::Choice {
                discriminant,
                branches,
            } => {
                point.insert(discriminant.clone(), Scalar::Str(branches[0].value.clone()));
                branches[0].body.fill_default(point);
            }
            SearchIr::Leaf(leaf) => {
                if let Some(d) = leaf.nf.disjuncts.first() {
                    for (name, domain) in d {
                        point.insert(key(&leaf.path, name), domain.default_scalar());
                    }
                }
                leaf.slots.values().for_each(|s| s.fill_default(point));
            }
        }
    }
}

/// Hex SHA-256 of the hierarchical encoding.
pub fn space_digest(ir: &SearchIr) -> String {
    let text = serde_json::to_string(&emit_hierarchical(ir)).expect("JSON values serialize");
    let mut hasher = Sha256::new();
    hasher.update(text.as_bytes());
    hex::encode(hasher.finalize())
}
