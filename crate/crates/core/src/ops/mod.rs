//! Operators, pipelines, and choices, with the combinators that build them.
//!
//! Operators are immutable values. Every combinator and lifecycle
//! transition returns a new operator and leaves its arguments untouched.

mod exec;
mod registry;

use std::fmt;
use std::sync::Arc;

use indexmap::IndexMap;
use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use crate::schema::{
    config_to_json, declared_domains, default_config, validate, Config, NodeKind, SchemaError,
    SchemaNode, ValidationReport,
};
use crate::toyml::{ImplKind, Model, ToyError};

pub use exec::{fit, fit_weighted, predict};
pub use registry::{Registry, RegistryError, BUNDLED_SCHEMAS};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LifecycleState {
    Planned,
    Trainable,
    Trained,
}

impl LifecycleState {
    pub fn as_str(self) -> &'static str {
        match self {
            LifecycleState::Planned => "planned",
            LifecycleState::Trainable => "trainable",
            LifecycleState::Trained => "trained",
        }
    }
}

impl fmt::Display for LifecycleState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error)]
pub enum OpError {
    #[error("invalid hyperparameters for {operator}: {report}")]
    ValidationFailed {
        operator: String,
        report: ValidationReport,
    },
    #[error("{operator} has no hyperparameter `{name}`")]
    UnknownProperty { operator: String, name: String },
    #[error("a choice needs at least two alternatives")]
    TooFewAlternatives,
    #[error("only individual operators can be {0}")]
    NotIndividual(&'static str),
    #[error("{0} is not trainable")]
    NotTrainable(String),
    #[error("{0} is not trained")]
    NotTrained(String),
    #[error("{0} is already trained; its hyperparameters are fixed")]
    AlreadyTrained(String),
    #[error("{0} is frozen")]
    Frozen(String),
    #[error("cannot fit an unresolved operator choice")]
    UnresolvedChoice,
    #[error("{0} has no implementation")]
    NoImplementation(String),
    #[error("{operator} failed: {source}")]
    Implementation {
        operator: String,
        #[source]
        source: ToyError,
    },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid pipeline graph: {0}")]
    InvalidGraph(String),
    #[error(transparent)]
    Schema(#[from] SchemaError),
}

impl From<ToyError> for OpError {
    fn from(e: ToyError) -> Self {
        match e {
            ToyError::Shape(m) => OpError::ShapeMismatch(m),
            other => OpError::Implementation {
                operator: String::new(),
                source: other,
            },
        }
    }
}

impl OpError {
    /// True for failures raised by a learner at fit time because of its
    /// hyperparameters.
    pub fn is_constraint_trap(&self) -> bool {
        match self {
            OpError::Implementation { source, .. } => match source {
                ToyError::ConstraintTrap(_) => true,
                ToyError::Base(m) => m.contains("constraint trap"),
                _ => false,
            },
            _ => false,
        }
    }
}

/// A named operator with a hyperparameter schema.
#[derive(Clone, Debug, PartialEq)]
pub struct Individual {
    name: String,
    schema: Arc<SchemaNode>,
    bound: Config,
    implementation: Option<ImplKind>,
    state: LifecycleState,
    frozen_trainable: bool,
    frozen_trained: bool,
    model: Option<Arc<Model>>,
}

impl Individual {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn schema(&self) -> &SchemaNode {
        &self.schema
    }

    pub fn bound(&self) -> &Config {
        &self.bound
    }

    pub fn implementation(&self) -> Option<ImplKind> {
        self.implementation
    }

    pub fn state(&self) -> LifecycleState {
        self.state
    }

    pub fn is_frozen_trainable(&self) -> bool {
        self.frozen_trainable
    }

    pub fn is_frozen_trained(&self) -> bool {
        self.frozen_trained
    }

    pub fn model(&self) -> Option<&Model> {
        self.model.as_deref()
    }

    /// Declared defaults overridden by the bound hyperparameters.
    pub fn full_config(&self) -> Config {
        let mut full = match declared_domains(&self.schema) {
            Ok(declared) => declared
                .into_iter()
                .filter_map(|(k, node)| node.default.map(|d| (k, d.into())))
                .collect(),
            Err(_) => Config::new(),
        };
        full.extend(self.bound.clone());
        full
    }

    pub(crate) fn with_model(&self, model: Model) -> Individual {
        Individual {
            state: LifecycleState::Trained,
            model: Some(Arc::new(model)),
            ..self.clone()
        }
    }
}

/// A DAG of steps. Steps are never pipelines themselves: nested pipelines
/// are inlined on construction.
#[derive(Clone, Debug, PartialEq)]
pub struct Pipeline {
    steps: Vec<Operator>,
    edges: Vec<(usize, usize)>,
}

/// An exclusive choice among at least two alternatives, none of which is
/// itself a choice.
#[derive(Clone, Debug, PartialEq)]
pub struct Choice {
    alternatives: Vec<Operator>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Operator {
    Individual(Individual),
    Pipeline(Pipeline),
    Choice(Choice),
}

impl Pipeline {
    /// Builds a pipeline, inlining pipeline-valued steps. An edge into or
    /// out of an inlined pipeline connects to its sources or sinks.
    pub fn new(steps: Vec<Operator>, edges: Vec<(usize, usize)>) -> Result<Pipeline, OpError> {
        if steps.is_empty() {
            return Err(OpError::InvalidGraph(
                "a pipeline needs at least one step".into(),
            ));
        }
        for &(a, b) in &edges {
            if a >= steps.len() || b >= steps.len() {
                return Err(OpError::InvalidGraph(format!(
                    "edge ({a}, {b}) names a missing step"
                )));
            }
            if a == b {
                return Err(OpError::InvalidGraph(format!("self loop on step {a}")));
            }
        }
        let mut flat = Vec::new();
        let mut new_edges = Vec::new();
        let mut ends: Vec<(Vec<usize>, Vec<usize>)> = Vec::new();
        for step in steps {
            let base = flat.len();
            match step {
                Operator::Pipeline(p) => {
                    let sources = p.sources().into_iter().map(|i| i + base).collect();
                    let sinks = p.sinks().into_iter().map(|i| i + base).collect();
                    new_edges.extend(p.edges.iter().map(|&(a, b)| (a + base, b + base)));
                    flat.extend(p.steps);
                    ends.push((sources, sinks));
                }
                other => {
                    flat.push(other);
                    ends.push((vec![base], vec![base]));
                }
            }
        }
        for (a, b) in edges {
            for &s in &ends[a].1 {
                for &t in &ends[b].0 {
                    new_edges.push((s, t));
                }
            }
        }
        new_edges.sort_unstable();
        new_edges.dedup();
        let pipeline = Pipeline {
            steps: flat,
            edges: new_edges,
        };
        if pipeline.topological_order().is_none() {
            return Err(OpError::InvalidGraph("edges form a cycle".into()));
        }
        Ok(pipeline)
    }

    pub fn steps(&self) -> &[Operator] {
        &self.steps
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn predecessors(&self, step: usize) -> Vec<usize> {
        self.edges
            .iter()
            .filter(|e| e.1 == step)
            .map(|e| e.0)
            .collect()
    }

    pub fn sources(&self) -> Vec<usize> {
        (0..self.steps.len())
            .filter(|&i| !self.edges.iter().any(|e| e.1 == i))
            .collect()
    }

    pub fn sinks(&self) -> Vec<usize> {
        (0..self.steps.len())
            .filter(|&i| !self.edges.iter().any(|e| e.0 == i))
            .collect()
    }

    /// Kahn's algorithm, lowest ready index first; `None` on a cycle.
    pub fn topological_order(&self) -> Option<Vec<usize>> {
        let n = self.steps.len();
        let mut indegree = vec![0usize; n];
        for &(_, b) in &self.edges {
            indegree[b] += 1;
        }
        let mut ready: std::collections::BTreeSet<usize> =
            (0..n).filter(|&i| indegree[i] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(i) = ready.pop_first() {
            order.push(i);
            for &(a, b) in &self.edges {
                if a == i {
                    indegree[b] -= 1;
                    if indegree[b] == 0 {
                        ready.insert(b);
                    }
                }
            }
        }
        (order.len() == n).then_some(order)
    }

    fn with_steps(&self, steps: Vec<Operator>) -> Pipeline {
        Pipeline {
            steps,
            edges: self.edges.clone(),
        }
    }
}

impl Choice {
    pub fn alternatives(&self) -> &[Operator] {
        &self.alternatives
    }
}

/// Creates a planned individual operator.
pub fn individual(
    name: impl Into<String>,
    schema: SchemaNode,
    implementation: Option<ImplKind>,
) -> Operator {
    Operator::Individual(Individual {
        name: name.into(),
        schema: Arc::new(schema),
        bound: Config::new(),
        implementation,
        state: LifecycleState::Planned,
        frozen_trainable: false,
        frozen_trained: false,
        model: None,
    })
}

fn as_graph(op: &Operator) -> (Vec<Operator>, Vec<(usize, usize)>) {
    match op {
        Operator::Pipeline(p) => (p.steps.clone(), p.edges.clone()),
        other => (vec![other.clone()], Vec::new()),
    }
}

fn join(x: &Operator, y: &Operator, connect: bool) -> Operator {
    let (mut steps, mut edges) = as_graph(x);
    let (y_steps, y_edges) = as_graph(y);
    let offset = steps.len();
    let sinks: Vec<usize> = match x {
        Operator::Pipeline(p) => p.sinks(),
        _ => vec![0],
    };
    let sources: Vec<usize> = match y {
        Operator::Pipeline(p) => p.sources(),
        _ => vec![0],
    };
    edges.extend(y_edges.iter().map(|&(a, b)| (a + offset, b + offset)));
    if connect {
        for &s in &sinks {
            for &t in &sources {
                edges.push((s, t + offset));
            }
        }
    }
    steps.extend(y_steps);
    edges.sort_unstable();
    edges.dedup();
    Operator::Pipeline(Pipeline { steps, edges })
}

/// `x >> y`: edges from every sink of `x` to every source of `y`.
pub fn pipe(x: &Operator, y: &Operator) -> Operator {
    join(x, y, true)
}

/// `x & y`: disjoint union without new edges.
pub fn both(x: &Operator, y: &Operator) -> Operator {
    join(x, y, false)
}

/// `x | y | ...`: nested choices are flattened into one alternative list.
pub fn choose(alternatives: Vec<Operator>) -> Result<Operator, OpError> {
    let mut flat = Vec::new();
    for alt in alternatives {
        match alt {
            Operator::Choice(c) => flat.extend(c.alternatives),
            other => flat.push(other),
        }
    }
    if flat.len() < 2 {
        return Err(OpError::TooFewAlternatives);
    }
    Ok(Operator::Choice(Choice { alternatives: flat }))
}

impl Operator {
    pub fn name(&self) -> &str {
        match self {
            Operator::Individual(i) => &i.name,
            Operator::Pipeline(_) => "Pipeline",
            Operator::Choice(_) => "Choice",
        }
    }

    pub fn as_individual(&self) -> Option<&Individual> {
        match self {
            Operator::Individual(i) => Some(i),
            _ => None,
        }
    }

    /// Planned < Trainable < Trained; a composite is in the lowest state of
    /// its parts, since it supports an operation only if every part does.
    pub fn state(&self) -> LifecycleState {
        match self {
            Operator::Individual(i) => i.state,
            Operator::Pipeline(p) => p.steps.iter().map(Operator::state).min().expect("nonempty"),
            Operator::Choice(c) => c
                .alternatives
                .iter()
                .map(Operator::state)
                .min()
                .expect("nonempty"),
        }
    }

    /// True when every individual inside is frozen trainable.
    pub fn is_frozen_trainable(&self) -> bool {
        self.individuals().iter().all(|i| i.frozen_trainable)
    }

    pub fn is_frozen_trained(&self) -> bool {
        self.individuals().iter().all(|i| i.frozen_trained)
    }

    pub fn contains_choice(&self) -> bool {
        match self {
            Operator::Individual(_) => false,
            Operator::Pipeline(p) => p.steps.iter().any(Operator::contains_choice),
            Operator::Choice(_) => true,
        }
    }

    /// Every individual operator at this level, in step order (operators
    /// nested in hyperparameters are not included).
    pub fn individuals(&self) -> Vec<&Individual> {
        match self {
            Operator::Individual(i) => vec![i],
            Operator::Pipeline(p) => p.steps.iter().flat_map(Operator::individuals).collect(),
            Operator::Choice(c) => c
                .alternatives
                .iter()
                .flat_map(Operator::individuals)
                .collect(),
        }
    }

    /// Binds hyperparameters. Planned operators become trainable, even for
    /// an empty configuration. The merged configuration, completed with
    /// defaults, must satisfy the schema including its side constraints.
    pub fn configure(&self, partial: &Config) -> Result<Operator, OpError> {
        let Operator::Individual(ind) = self else {
            return Err(OpError::NotIndividual("configured"));
        };
        if ind.state == LifecycleState::Trained || ind.frozen_trainable {
            if partial.is_empty() {
                return Ok(self.clone());
            }
            return Err(if ind.state == LifecycleState::Trained {
                OpError::AlreadyTrained(ind.name.clone())
            } else {
                OpError::Frozen(ind.name.clone())
            });
        }
        let mut bound = ind.bound.clone();
        bound.extend(partial.clone());
        let report = validate(&bound, &ind.schema);
        if !report.ok {
            return Err(OpError::ValidationFailed {
                operator: ind.name.clone(),
                report,
            });
        }
        if let Ok(mut completed) = default_config(&ind.schema) {
            completed.extend(bound.clone());
            let report = validate(&completed, &ind.schema);
            if !report.ok {
                return Err(OpError::ValidationFailed {
                    operator: ind.name.clone(),
                    report,
                });
            }
        }
        Ok(Operator::Individual(Individual {
            bound,
            state: LifecycleState::Trainable,
            ..ind.clone()
        }))
    }

    /// Marks an operator so that auto-configuration leaves it unchanged;
    /// latent hyperparameters are fixed to their defaults first.
    pub fn freeze_trainable(&self) -> Result<Operator, OpError> {
        match self {
            Operator::Individual(ind) => {
                if ind.state < LifecycleState::Trainable {
                    return Err(OpError::NotTrainable(ind.name.clone()));
                }
                Ok(Operator::Individual(Individual {
                    bound: ind.full_config(),
                    frozen_trainable: true,
                    ..ind.clone()
                }))
            }
            Operator::Pipeline(p) => {
                let steps = p
                    .steps
                    .iter()
                    .map(Operator::freeze_trainable)
                    .collect::<Result<_, _>>()?;
                Ok(Operator::Pipeline(p.with_steps(steps)))
            }
            Operator::Choice(c) => {
                let alternatives = c
                    .alternatives
                    .iter()
                    .map(Operator::freeze_trainable)
                    .collect::<Result<_, _>>()?;
                Ok(Operator::Choice(Choice { alternatives }))
            }
        }
    }

    /// Marks a trained operator so that fitting it again is the identity.
    pub fn freeze_trained(&self) -> Result<Operator, OpError> {
        if self.state() < LifecycleState::Trained {
            return Err(OpError::NotTrained(self.name().to_string()));
        }
        Ok(self.map_individuals(&|ind| Individual {
            frozen_trained: true,
            ..ind.clone()
        }))
    }

    fn map_individuals(&self, f: &dyn Fn(&Individual) -> Individual) -> Operator {
        match self {
            Operator::Individual(ind) => Operator::Individual(f(ind)),
            Operator::Pipeline(p) => Operator::Pipeline(
                p.with_steps(p.steps.iter().map(|s| s.map_individuals(f)).collect()),
            ),
            Operator::Choice(c) => Operator::Choice(Choice {
                alternatives: c
                    .alternatives
                    .iter()
                    .map(|s| s.map_individuals(f))
                    .collect(),
            }),
        }
    }

    /// Derives a variant with replaced hyperparameter domains. Side
    /// constraints are kept. `rename` gives the variant a new name.
    pub fn customize_schema(
        &self,
        overrides: &IndexMap<String, SchemaNode>,
        rename: Option<&str>,
    ) -> Result<Operator, OpError> {
        let Operator::Individual(ind) = self else {
            return Err(OpError::NotIndividual("customized"));
        };
        let declared = declared_domains(&ind.schema)?;
        for name in overrides.keys() {
            if !declared.contains_key(name) {
                return Err(OpError::UnknownProperty {
                    operator: ind.name.clone(),
                    name: name.clone(),
                });
            }
        }
        let mut schema = (*ind.schema).clone();
        let base = match &mut schema.kind {
            NodeKind::Object(o) => o,
            NodeKind::AllOf(children) => match children.first_mut().map(|c| &mut c.kind) {
                Some(NodeKind::Object(o)) => o,
                _ => return Err(SchemaError::NoBaseObject.into()),
            },
            _ => return Err(SchemaError::NoBaseObject.into()),
        };
        for (name, node) in overrides {
            base.properties.insert(name.clone(), node.clone());
        }
        let name = rename.map_or_else(|| ind.name.clone(), str::to_string);
        let report = validate(&ind.bound, &schema);
        if !report.ok {
            return Err(OpError::ValidationFailed {
                operator: name,
                report,
            });
        }
        Ok(Operator::Individual(Individual {
            name,
            schema: Arc::new(schema),
            ..ind.clone()
        }))
    }

    pub fn to_json(&self) -> Value {
        match self {
            Operator::Individual(ind) => {
                let mut v = json!({
                    "operator": ind.name,
                    "state": ind.state.as_str(),
                    "config": config_to_json(&ind.bound),
                });
                if ind.frozen_trainable {
                    v["frozenTrainable"] = json!(true);
                }
                if ind.frozen_trained {
                    v["frozenTrained"] = json!(true);
                }
                v
            }
            Operator::Pipeline(p) => json!({
                "steps": p.steps.iter().map(Operator::to_json).collect::<Vec<_>>(),
                "edges": p.edges.iter().map(|&(a, b)| json!([a, b])).collect::<Vec<_>>(),
            }),
            Operator::Choice(c) => json!({
                "choice": c.alternatives.iter().map(Operator::to_json).collect::<Vec<_>>(),
            }),
        }
    }
}

/// Promotes planned individuals to trainable with their defaults. Used for
/// operator-valued hyperparameters given by bare name.
pub fn with_default_hyperparameters(op: &Operator) -> Operator {
    match op {
        Operator::Individual(ind) if ind.state == LifecycleState::Planned => {
            op.configure(&Config::new()).unwrap_or_else(|_| op.clone())
        }
        Operator::Individual(_) => op.clone(),
        Operator::Pipeline(p) => Operator::Pipeline(
            p.with_steps(p.steps.iter().map(with_default_hyperparameters).collect()),
        ),
        Operator::Choice(c) => Operator::Choice(Choice {
            alternatives: c
                .alternatives
                .iter()
                .map(with_default_hyperparameters)
                .collect(),
        }),
    }
}
