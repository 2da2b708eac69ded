use indexmap::IndexMap;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use super::flat::emit_flat;
use super::{sample_domain, Point, SearchIr, SpaceError};
use crate::normalize::Domain;
use crate::schema::Scalar;

const DISTINCT_RETRIES: usize = 16;

/// Flat disjuncts whose domains are all finite value lists.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscretizedGrid {
    pub disjuncts: Vec<IndexMap<String, Vec<Scalar>>>,
}

/// Discretizes every continuous domain into its default (when inside)
/// plus `cont_samples` distinct seeded draws from its prior.
pub fn emit_grid(
    ir: &SearchIr,
    cont_samples: usize,
    seed: u64,
    limit: usize,
) -> Result<DiscretizedGrid, SpaceError> {
    let flat = emit_flat(ir, limit)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut disjuncts = Vec::with_capacity(flat.len());
    for d in flat {
        let mut row = IndexMap::new();
        for (name, domain) in d.params {
            let values = match &domain {
                Domain::Cat { values, .. } => values.clone(),
                Domain::OpSlot { marker } => vec![Scalar::Str(marker.clone())],
                Domain::Cont { .. } if domain.is_degenerate() => vec![domain.default_scalar()],
                Domain::Cont { default, .. } => {
                    let mut values: Vec<Scalar> = default
                        .filter(|x| domain.contains_number(*x))
                        .map(Scalar::Number)
                        .into_iter()
                        .collect();
                    for _ in 0..cont_samples {
                        for _ in 0..DISTINCT_RETRIES {
                            let draw = sample_domain(&domain, &mut rng);
                            if !values.contains(&draw) {
                                values.push(draw);
                                break;
                            }
                        }
                    }
                    values
                }
            };
            row.insert(name, values);
        }
        disjuncts.push(row);
    }
    Ok(DiscretizedGrid { disjuncts })
}

impl DiscretizedGrid {
    /// Sum over disjuncts of the product of value counts.
    pub fn cell_count(&self) -> u128 {
        self.disjuncts
            .iter()
            .map(|d| d.values().map(|v| v.len() as u128).product::<u128>())
            .sum()
    }

    /// Every cell, disjunct by disjunct, last parameter varying fastest.
    pub fn cells(&self) -> impl Iterator<Item = Point> + '_ {
        self.disjuncts.iter().flat_map(|d| {
            let names: Vec<&String> = d.keys().collect();
            let lists: Vec<&Vec<Scalar>> = d.values().collect();
            let total: u128 = lists.iter().map(|l| l.len() as u128).product();
            (0..total).map(move |mut index| {
                let mut point = Point::new();
                for (name, list) in names.iter().zip(&lists).rev() {
                    let n = list.len() as u128;
                    point.insert((*name).clone(), list[(index % n) as usize].clone());
                    index /= n;
                }
                point
            })
        })
    }

    pub fn to_json(&self) -> Value {
        json!({
            "cells": u64::try_from(self.cell_count()).unwrap_or(u64::MAX),
            "disjuncts": self.disjuncts.iter().map(|d| {
                Value::Object(d.iter().map(|(k, v)| {
                    (k.clone(), Value::Array(v.iter().map(Scalar::to_json).collect()))
                }).collect())
            }).collect::<Vec<_>>(),
        })
    }
}
