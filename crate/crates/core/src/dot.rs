//! Graphviz DOT export.
//!
//! Each individual operator is a node whose `class` attribute is its
//! lifecycle state (`planned`, `trainable` or `trained`) and whose fill
//! colour follows the same state. A choice is drawn as a dashed cluster
//! holding its alternatives; edges into or out of a choice attach to every
//! source or sink of every alternative.

use std::fmt::Write as _;

use crate::ops::{LifecycleState, Operator};

fn fill(state: LifecycleState) -> &'static str {
    match state {
        LifecycleState::Planned => "skyblue",
        LifecycleState::Trainable => "white",
        LifecycleState::Trained => "lightgreen",
    }
}

fn escape(text: &str) -> String {
    text.replace('\\', "\\\\").replace('"', "\\\"")
}

struct Emitter {
    out: String,
    nodes: usize,
    clusters: usize,
}

impl Emitter {
    /// Writes `op` and returns its (sources, sinks) node ids.
    fn emit(&mut self, op: &Operator, indent: usize) -> (Vec<usize>, Vec<usize>) {
        let pad = "  ".repeat(indent);
        match op {
            Operator::Individual(ind) => {
                let id = self.nodes;
                self.nodes += 1;
                let state = ind.state();
                let _ = writeln!(
                    self.out,
                    "{pad}n{id} [label=\"{}\", class=\"{}\", style=filled, fillcolor={}];",
                    escape(ind.name()),
                    state.as_str(),
                    fill(state)
                );
                (vec![id], vec![id])
            }
            Operator::Choice(c) => {
                let cluster = self.clusters;
                self.clusters += 1;
                let _ = writeln!(self.out, "{pad}subgraph cluster_{cluster} {{");
                let _ = writeln!(self.out, "{pad}  label=\"Choice\";");
                let _ = writeln!(self.out, "{pad}  style=dashed;");
                let (mut sources, mut sinks) = (Vec::new(), Vec::new());
                for alt in c.alternatives() {
                    let (so, si) = self.emit(alt, indent + 1);
                    sources.extend(so);
                    sinks.extend(si);
                }
                let _ = writeln!(self.out, "{pad}}}");
                (sources, sinks)
            }
            Operator::Pipeline(p) => {
                let ends: Vec<(Vec<usize>, Vec<usize>)> =
                    p.steps().iter().map(|s| self.emit(s, indent)).collect();
                for &(a, b) in p.edges() {
                    for from in &ends[a].1 {
                        for to in &ends[b].0 {
                            let _ = writeln!(self.out, "{pad}n{from} -> n{to};");
                        }
                    }
                }
                let sources = p
                    .sources()
                    .iter()
                    .flat_map(|&i| ends[i].0.clone())
                    .collect();
                let sinks = p.sinks().iter().flat_map(|&i| ends[i].1.clone()).collect();
                (sources, sinks)
            }
        }
    }
}

/// DOT text for an operator graph.
pub fn to_dot(op: &Operator) -> String {
    let mut e = Emitter {
        out: String::new(),
        nodes: 0,
        clusters: 0,
    };
    e.emit(op, 1);
    format!(
        "digraph pipeline {{\n  rankdir=LR;\n  node [shape=box];\n{}}}\n",
        e.out
    )
}
