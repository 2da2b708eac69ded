use indexmap::IndexMap;
use serde_json::{json, Value};

use super::{key, Point, SearchIr, SpaceError};
use crate::normalize::{record_to_string, Domain};
use crate::schema::Scalar;

/// One row of the flattened space: mangled name to domain, discriminants
/// included as one-value categoricals.
#[derive(Clone, Debug, PartialEq)]
pub struct FlatDisjunct {
    pub params: IndexMap<String, Domain>,
}

impl FlatDisjunct {
    pub fn admits(&self, point: &Point) -> bool {
        self.params.len() == point.len()
            && self
                .params
                .iter()
                .all(|(k, d)| point.get(k).is_some_and(|v| admits_point(d, v)))
    }

    pub fn to_json(&self) -> Value {
        Value::Object(
            self.params
                .iter()
                .map(|(k, d)| (k.clone(), d.to_json()))
                .collect(),
        )
    }
}

impl std::fmt::Display for FlatDisjunct {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&record_to_string(&self.params))
    }
}

/// Membership that accepts an operator slot's marker as its value.
pub(crate) fn admits_point(domain: &Domain, value: &Scalar) -> bool {
    match domain {
        Domain::OpSlot { marker } => value.as_str() == Some(marker.as_str()),
        _ => domain.admits_scalar(value),
    }
}

/// Number of flat disjuncts: a product over steps of the sum over branches.
pub(crate) fn flat_count(ir: &SearchIr) -> u128 {
    match ir {
        SearchIr::Steps { steps, .. } => steps.values().map(flat_count).product(),
        SearchIr::Choice { branches, .. } => branches.iter().map(|b| flat_count(&b.body)).sum(),
        SearchIr::Leaf(leaf) => {
            leaf.nf.disjuncts.len() as u128 * leaf.slots.values().map(flat_count).product::<u128>()
        }
    }
}

fn cross(
    left: Vec<IndexMap<String, Domain>>,
    right: &[IndexMap<String, Domain>],
) -> Vec<IndexMap<String, Domain>> {
    let mut out = Vec::with_capacity(left.len() * right.len());
    for a in &left {
        for b in right {
            let mut merged = a.clone();
            merged.extend(b.iter().map(|(k, v)| (k.clone(), v.clone())));
            out.push(merged);
        }
    }
    out
}

fn flatten(ir: &SearchIr) -> Vec<IndexMap<String, Domain>> {
    match ir {
        SearchIr::Steps { steps, .. } => steps.values().fold(vec![IndexMap::new()], |acc, step| {
            cross(acc, &flatten(step))
        }),
        SearchIr::Choice {
            discriminant,
            branches,
        } => {
            let mut out = Vec::new();
            for branch in branches {
                for body in flatten(&branch.body) {
                    let mut row = IndexMap::new();
                    let value = Scalar::Str(branch.value.clone());
                    row.insert(
                        discriminant.clone(),
                        Domain::Cat {
                            values: vec![value.clone()],
                            default: Some(value),
                        },
                    );
                    row.extend(body);
                    out.push(row);
                }
            }
            out
        }
        SearchIr::Leaf(leaf) => {
            let own: Vec<IndexMap<String, Domain>> = leaf
                .nf
                .disjuncts
                .iter()
                .map(|d| {
                    d.iter()
                        .map(|(n, dom)| (key(&leaf.path, n), dom.clone()))
                        .collect()
                })
                .collect();
            leaf.slots
                .values()
                .fold(own, |acc, slot| cross(acc, &flatten(slot)))
        }
    }
}

/// Flattens the IR into disjuncts; fails rather than truncating when the
/// count exceeds `limit`.
pub fn emit_flat(ir: &SearchIr, limit: usize) -> Result<Vec<FlatDisjunct>, SpaceError> {
    if flat_count(ir) > limit as u128 {
        return Err(SpaceError::BlowupExceeded(limit));
    }
    Ok(flatten(ir)
        .into_iter()
        .map(|params| FlatDisjunct { params })
        .collect())
}

pub fn flat_member(flat: &[FlatDisjunct], point: &Point) -> bool {
    flat.iter().any(|d| d.admits(point))
}

pub fn flat_to_json(flat: &[FlatDisjunct]) -> Value {
    json!({
        "disjuncts": flat.iter().map(FlatDisjunct::to_json).collect::<Vec<_>>(),
    })
}
