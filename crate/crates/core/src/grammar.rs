//! Planned pipelines from grammars, by bounded unfolding or by sampling one
//! derivation.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::dsl::{GrammarExpr, GrammarFile};
use crate::ops::{both, choose, pipe, Operator};

#[derive(Debug, Error, PartialEq)]
pub enum GrammarError {
    #[error("depth must be at least 1")]
    ZeroDepth,
    #[error("every alternative still contains a nonterminal after unfolding")]
    EmptyAfterPruning,
    #[error("nonterminal `{0}` must be expanded past the depth limit and has no terminating alternative")]
    NoTerminatingAlternative(String),
}

/// Expands nonterminals, each at most `depth` times along any derivation
/// path, then drops choice alternatives that still contain a nonterminal.
/// A choice left with one alternative collapses to it.
pub fn unfold(g: &GrammarFile, depth: usize) -> Result<Operator, GrammarError> {
    if depth == 0 {
        return Err(GrammarError::ZeroDepth);
    }
    let mut counts = HashMap::new();
    expand(
        g,
        &GrammarExpr::Nonterminal(g.start.clone()),
        depth,
        &mut counts,
    )
    .ok_or(GrammarError::EmptyAfterPruning)
}

fn expand(
    g: &GrammarFile,
    e: &GrammarExpr,
    depth: usize,
    counts: &mut HashMap<String, usize>,
) -> Option<Operator> {
    match e {
        GrammarExpr::Op(op) => Some(op.clone()),
        GrammarExpr::Nonterminal(name) => {
            let used = counts.get(name).copied().unwrap_or(0);
            if used >= depth {
                return None;
            }
            counts.insert(name.clone(), used + 1);
            let out = expand(g, &g.rules[name], depth, counts);
            counts.insert(name.clone(), used);
            out
        }
        GrammarExpr::Pipe(a, b) => Some(pipe(
            &expand(g, a, depth, counts)?,
            &expand(g, b, depth, counts)?,
        )),
        GrammarExpr::Both(a, b) => Some(both(
            &expand(g, a, depth, counts)?,
            &expand(g, b, depth, counts)?,
        )),
        GrammarExpr::Choose(alts) => {
            let mut kept: Vec<Operator> = alts
                .iter()
                .filter_map(|a| expand(g, a, depth, counts))
                .collect();
            match kept.len() {
                0 => None,
                1 => kept.pop(),
                _ => Some(choose(kept).expect("two or more alternatives")),
            }
        }
    }
}

/// Draws one derivation, picking choice alternatives uniformly. Once
/// `max_depth` nonterminals are being expanded, only the alternatives with
/// the shortest derivation to terminals are eligible, so every draw from a
/// productive grammar terminates.
pub fn sample(g: &GrammarFile, seed: u64, max_depth: usize) -> Result<Operator, GrammarError> {
    if max_depth == 0 {
        return Err(GrammarError::ZeroDepth);
    }
    let mut sampler = Sampler {
        g,
        max_depth,
        heights: min_heights(g),
        rng: ChaCha8Rng::seed_from_u64(seed),
    };
    sampler.draw(&GrammarExpr::Nonterminal(g.start.clone()), &g.start, 0)
}

/// Least number of nested expansions each nonterminal needs to reach
/// terminals; absent for unproductive nonterminals.
fn min_heights(g: &GrammarFile) -> HashMap<String, usize> {
    let mut heights = HashMap::new();
    loop {
        let mut changed = false;
        for (name, body) in &g.rules {
            if let Some(h) = height(body, &heights) {
                if heights.get(name).is_none_or(|&old| h + 1 < old) {
                    heights.insert(name.clone(), h + 1);
                    changed = true;
                }
            }
        }
        if !changed {
            return heights;
        }
    }
}

fn height(e: &GrammarExpr, heights: &HashMap<String, usize>) -> Option<usize> {
    match e {
        GrammarExpr::Op(_) => Some(0),
        GrammarExpr::Nonterminal(name) => heights.get(name).copied(),
        GrammarExpr::Pipe(a, b) | GrammarExpr::Both(a, b) => {
            Some(height(a, heights)?.max(height(b, heights)?))
        }
        GrammarExpr::Choose(alts) => alts.iter().filter_map(|a| height(a, heights)).min(),
    }
}

struct Sampler<'a> {
    g: &'a GrammarFile,
    max_depth: usize,
    heights: HashMap<String, usize>,
    rng: ChaCha8Rng,
}

impl Sampler<'_> {
    fn draw(
        &mut self,
        e: &GrammarExpr,
        rule: &str,
        nesting: usize,
    ) -> Result<Operator, GrammarError> {
        match e {
            GrammarExpr::Op(op) => Ok(op.clone()),
            GrammarExpr::Nonterminal(name) => {
                if nesting >= self.max_depth && !self.heights.contains_key(name) {
                    return Err(GrammarError::NoTerminatingAlternative(name.clone()));
                }
                let body = &self.g.rules[name];
                self.draw(body, name, nesting + 1)
            }
            GrammarExpr::Pipe(a, b) => {
                let left = self.draw(a, rule, nesting)?;
                Ok(pipe(&left, &self.draw(b, rule, nesting)?))
            }
            GrammarExpr::Both(a, b) => {
                let left = self.draw(a, rule, nesting)?;
                Ok(both(&left, &self.draw(b, rule, nesting)?))
            }
            GrammarExpr::Choose(alts) => {
                let eligible: Vec<&GrammarExpr> = if nesting >= self.max_depth {
                    let shortest = alts.iter().filter_map(|a| height(a, &self.heights)).min();
                    alts.iter()
                        .filter(|a| shortest.is_some() && height(a, &self.heights) == shortest)
                        .collect()
                } else {
                    alts.iter().collect()
                };
                if eligible.is_empty() {
                    return Err(GrammarError::NoTerminatingAlternative(rule.to_string()));
                }
                let pick = eligible[self.rng.random_range(0..eligible.len())];
                self.draw(pick, rule, nesting)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::{parse_grammar, pretty_print};
    use crate::ops::Registry;

    fn grammar(text: &str) -> GrammarFile {
        parse_grammar(text, &Registry::bundled()).unwrap()
    }

    #[test]
    fn non_recursive_grammar_unfolds_to_itself() {
        let g = grammar("start := PCA >> LR;");
        for depth in 1..4 {
            assert_eq!(
                pretty_print(&unfold(&g, depth).unwrap()).unwrap(),
                "PCA >> LR"
            );
        }
    }

    #[test]
    fn unproductive_grammar() {
        let g = grammar("start := start;");
        assert_eq!(unfold(&g, 3), Err(GrammarError::EmptyAfterPruning));
        assert!(matches!(
            sample(&g, 0, 3),
            Err(GrammarError::NoTerminatingAlternative(_))
        ));
    }

    #[test]
    fn recursion_is_bounded_per_nonterminal() {
        let g = grammar("start := clean >> LR;\nclean := StandardScaler >> clean | NoOp;");
        let text = pretty_print(&unfold(&g, 2).unwrap()).unwrap();
        assert_eq!(text, "(StandardScaler >> NoOp | NoOp) >> LR");
        let text = pretty_print(&unfold(&g, 3).unwrap()).unwrap();
        assert_eq!(
            text,
            "(StandardScaler >> (StandardScaler >> NoOp | NoOp) | NoOp) >> LR"
        );
    }

    #[test]
    fn sampling_terminates_when_every_alternative_recurses() {
        let g = grammar("start := tfm >> LR;\ntfm := one >> tfm | one;\none := PCA | NoOp;");
        for seed in 0..50 {
            assert!(sample(&g, seed, 1).is_ok());
        }
    }

    #[test]
    fn sampling_is_deterministic_and_choice_free() {
        let g = grammar("start := clean >> est;\nclean := StandardScaler >> clean | MinMaxScaler | NoOp;\nest := KNN | LR;");
        for seed in 0..20 {
            let a = sample(&g, seed, 4).unwrap();
            assert_eq!(a, sample(&g, seed, 4).unwrap());
            assert!(!a.contains_choice());
        }
    }
}
