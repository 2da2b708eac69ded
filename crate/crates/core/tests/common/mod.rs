//! Test oracles shared by the integration tests.

#![allow(dead_code)]

pub mod iso;
pub mod json_oracle;

use lalec::ops::{Operator, Registry};
use lalec::schema::config;

/// Leaf operators used by the random generators.
pub const LEAVES: [&str; 6] = ["PCA", "KNN", "LR", "NoOp", "MinMaxScaler", "J48"];

/// Builds a random series-parallel operator, taking every decision from
/// `next(n)`, which must return a value below `n`.
pub fn random_operator(
    registry: &Registry,
    depth: u32,
    next: &mut dyn FnMut(u32) -> u32,
) -> Operator {
    if depth == 0 || next(3) == 0 {
        let name = LEAVES[next(LEAVES.len() as u32) as usize];
        let op = registry.get(name).expect("bundled operator").clone();
        return match (name, next(4)) {
            ("KNN", 0) => op
                .configure(&config([("k", f64::from(1 + next(9)))]))
                .expect("k in range"),
            (_, 1) => op
                .configure(&Default::default())
                .expect("empty configuration"),
            _ => op,
        };
    }
    let a = random_operator(registry, depth - 1, next);
    let b = random_operator(registry, depth - 1, next);
    match next(3) {
        0 => lalec::ops::pipe(&a, &b),
        1 => lalec::ops::both(&a, &b),
        _ => lalec::ops::choose(vec![a, b]).expect("two alternatives"),
    }
}

/// Adapts a list of random words into the `next` callback; wraps around.
pub fn from_words(words: &[u32]) -> impl FnMut(u32) -> u32 + '_ {
    let mut i = 0;
    move |n| {
        let w = words[i % words.len()];
        i += 1;
        w % n
    }
}

use lalec::schema::{
    declared_domains, validate, Config, ConfigValue, NodeKind, Scalar, SchemaNode,
};

/// Seventeen probe values for a range: both bounds, points just inside
/// them, and thirteen evenly spaced interior points.
pub fn range_lattice(lo: f64, hi: f64) -> Vec<f64> {
    let width = hi - lo;
    let tiny = width * 1e-6;
    let mut out = vec![lo, lo + tiny, hi - tiny, hi];
    out.extend((1..=13).map(|i| lo + width * i as f64 / 14.0));
    out
}

fn candidates(node: &SchemaNode) -> Vec<Scalar> {
    match &node.kind {
        NodeKind::Enum(values) => values.clone(),
        NodeKind::Range(r) => range_lattice(r.lo, r.hi)
            .into_iter()
            .map(Scalar::Number)
            .collect(),
        NodeKind::AnyOf(children) | NodeKind::AllOf(children) => {
            children.iter().flat_map(candidates).collect()
        }
        _ => Vec::new(),
    }
}

/// Every combination of per-hyperparameter probe values.
pub fn probe_configs(schema: &SchemaNode) -> Vec<Config> {
    let declared = declared_domains(schema).expect("object schema");
    let mut configs = vec![Config::new()];
    for (name, node) in &declared {
        let values = candidates(node);
        let mut next = Vec::with_capacity(configs.len() * values.len());
        for c in &configs {
            for v in &values {
                let mut c = c.clone();
                c.insert(name.clone(), ConfigValue::Scalar(v.clone()));
                next.push(c);
            }
        }
        configs = next;
    }
    configs
}

/// Names of steps whose completed configuration fails validation,
/// including operators nested in hyperparameters.
pub fn invalid_steps(op: &Operator) -> Vec<String> {
    let mut out = Vec::new();
    collect_invalid(op, &mut out);
    out
}

fn collect_invalid(op: &Operator, out: &mut Vec<String>) {
    match op {
        Operator::Individual(ind) => {
            let full = ind.full_config();
            if !validate(&full, ind.schema()).ok {
                out.push(ind.name().to_string());
            }
            for v in full.values() {
                if let ConfigValue::Operator(inner) = v {
                    collect_invalid(inner, out);
                }
            }
        }
        Operator::Pipeline(p) => p.steps().iter().for_each(|s| collect_invalid(s, out)),
        Operator::Choice(c) => c
            .alternatives()
            .iter()
            .for_each(|a| collect_invalid(a, out)),
    }
}
