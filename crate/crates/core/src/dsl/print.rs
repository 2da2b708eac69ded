use std::collections::BTreeSet;

use super::DslError;
use crate::ops::{Operator, Pipeline};
use crate::schema::{ConfigValue, Scalar};

#[derive(Clone, Copy, PartialEq, PartialOrd)]
enum Prec {
    Choice,
    Both,
    Pipe,
}

fn literal(s: &Scalar) -> String {
    match s {
        Scalar::Str(text) => format!("\"{}\"", text.replace('\\', "\\\\").replace('"', "\\\"")),
        other => other.to_string(),
    }
}

fn wrap(text: String, inner: Prec, outer: Prec) -> String {
    if inner < outer {
        format!("({text})")
    } else {
        text
    }
}

/// Prints `op` with operator precedence and the fewest parentheses.
/// Planned operators print as a bare name; operators with captured
/// hyperparameters print as a call with keys in sorted order.
pub fn pretty_print(op: &Operator) -> Result<String, DslError> {
    Ok(print(op)?.0)
}

fn print(op: &Operator) -> Result<(String, Prec), DslError> {
    match op {
        Operator::Individual(ind) => {
            if ind.state() == crate::ops::LifecycleState::Planned && ind.bound().is_empty() {
                return Ok((ind.name().to_string(), Prec::Pipe));
            }
            let mut args = Vec::new();
            for (k, v) in ind.bound() {
                let value = match v {
                    ConfigValue::Scalar(s) => literal(s),
                    ConfigValue::Operator(inner) => print(inner)?.0,
                };
                args.push(format!("{k}={value}"));
            }
            Ok((format!("{}({})", ind.name(), args.join(", ")), Prec::Pipe))
        }
        Operator::Choice(c) => {
            let alts = c
                .alternatives()
                .iter()
                .map(|a| print(a).map(|(t, p)| wrap(t, p, Prec::Both)))
                .collect::<Result<Vec<_>, _>>()?;
            Ok((alts.join(" | "), Prec::Choice))
        }
        Operator::Pipeline(p) => {
            let all: Vec<usize> = (0..p.steps().len()).collect();
            print_subgraph(p, &all)
        }
    }
}

fn edges_within(p: &Pipeline, nodes: &BTreeSet<usize>) -> Vec<(usize, usize)> {
    p.edges()
        .iter()
        .copied()
        .filter(|(a, b)| nodes.contains(a) && nodes.contains(b))
        .collect()
}

fn components(p: &Pipeline, nodes: &[usize]) -> Vec<Vec<usize>> {
    let set: BTreeSet<usize> = nodes.iter().copied().collect();
    let edges = edges_within(p, &set);
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for &start in nodes {
        if !seen.insert(start) {
            continue;
        }
        let mut comp = vec![start];
        let mut stack = vec![start];
        while let Some(n) = stack.pop() {
            for &(a, b) in &edges {
                let other = if a == n {
                    b
                } else if b == n {
                    a
                } else {
                    continue;
                };
                if seen.insert(other) {
                    comp.push(other);
                    stack.push(other);
                }
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}

fn topological(p: &Pipeline, nodes: &[usize]) -> Vec<usize> {
    let set: BTreeSet<usize> = nodes.iter().copied().collect();
    let edges = edges_within(p, &set);
    let mut indegree: std::collections::BTreeMap<usize, usize> =
        nodes.iter().map(|&n| (n, 0)).collect();
    for &(_, b) in &edges {
        *indegree.get_mut(&b).expect("node in set") += 1;
    }
    let mut ready: BTreeSet<usize> = indegree
        .iter()
        .filter(|(_, &d)| d == 0)
        .map(|(&n, _)| n)
        .collect();
    let mut order = Vec::new();
    while let Some(n) = ready.pop_first() {
        order.push(n);
        for &(a, b) in &edges {
            if a == n {
                let d = indegree.get_mut(&b).expect("node in set");
                *d -= 1;
                if *d == 0 {
                    ready.insert(b);
                }
            }
        }
    }
    order
}

/// Whether `prefix >> rest` reproduces exactly the edges crossing the cut.
fn is_series_cut(p: &Pipeline, prefix: &BTreeSet<usize>, rest: &BTreeSet<usize>) -> bool {
    let inner_a = edges_within(p, prefix);
    let inner_b = edges_within(p, rest);
    let sinks: Vec<usize> = prefix
        .iter()
        .copied()
        .filter(|n| !inner_a.iter().any(|(a, _)| a == n))
        .collect();
    let sources: Vec<usize> = rest
        .iter()
        .copied()
        .filter(|n| !inner_b.iter().any(|(_, b)| b == n))
        .collect();
    let crossing: BTreeSet<(usize, usize)> = p
        .edges()
        .iter()
        .copied()
        .filter(|(a, b)| prefix.contains(a) && rest.contains(b))
        .collect();
    let expected: BTreeSet<(usize, usize)> = sinks
        .iter()
        .flat_map(|&s| sources.iter().map(move |&t| (s, t)))
        .collect();
    crossing == expected
}

fn print_subgraph(p: &Pipeline, nodes: &[usize]) -> Result<(String, Prec), DslError> {
    if let [single] = nodes {
        return print(&p.steps()[*single]);
    }
    let comps = components(p, nodes);
    if comps.len() > 1 {
        let parts = comps
            .iter()
            .map(|c| print_subgraph(p, c).map(|(t, pr)| wrap(t, pr, Prec::Pipe)))
            .collect::<Result<Vec<_>, _>>()?;
        return Ok((parts.join(" & "), Prec::Both));
    }
    // In a series composition every node of the left part precedes every
    // node of the right part, so the cut is a prefix of any topological order.
    let order = topological(p, nodes);
    let all: BTreeSet<usize> = nodes.iter().copied().collect();
    for k in 1..order.len() {
        let prefix: BTreeSet<usize> = order[..k].iter().copied().collect();
        let rest: BTreeSet<usize> = all.difference(&prefix).copied().collect();
        if is_series_cut(p, &prefix, &rest) {
            let left: Vec<usize> = prefix.into_iter().collect();
            let right: Vec<usize> = rest.into_iter().collect();
            let (lt, lp) = print_subgraph(p, &left)?;
            let (rt, rp) = print_subgraph(p, &right)?;
            return Ok((
                format!(
                    "{} >> {}",
                    wrap(lt, lp, Prec::Pipe),
                    wrap(rt, rp, Prec::Pipe)
                ),
                Prec::Pipe,
            ));
        }
    }
    Err(DslError::NotExpressible)
}
