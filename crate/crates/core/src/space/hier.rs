use serde_json::{json, Map, Value};

use super::SearchIr;
use crate::normalize::Domain;
use crate::schema::config_to_json;

/// Nested JSON encoding of the IR with node kinds `steps`, `choice`, and
/// `disjuncts`. An operator slot's domain embeds the nested space.
pub fn emit_hierarchical(ir: &SearchIr) -> Value {
    match ir {
        SearchIr::Steps { steps, edges } => json!({
            "kind": "steps",
            "steps": Value::Object(steps.iter().map(|(k, s)| (k.clone(), emit_hierarchical(s))).collect()),
            "edges": edges.iter().map(|&(a, b)| json!([a, b])).collect::<Vec<_>>(),
        }),
        SearchIr::Choice {
            discriminant,
            branches,
        } => json!({
            "kind": "choice",
            "discriminant": discriminant,
            "branches": Value::Object(
                branches.iter().map(|b| (b.value.clone(), emit_hierarchical(&b.body))).collect()
            ),
        }),
        SearchIr::Leaf(leaf) => {
            let fixed = leaf
                .template
                .as_individual()
                .map(|i| config_to_json(i.bound()))
                .unwrap_or_else(|| Value::Object(Map::new()));
            let disjuncts: Vec<Value> = leaf
                .nf
                .disjuncts
                .iter()
                .map(|d| {
                    Value::Object(
                        d.iter()
                            .map(|(name, domain)| {
                                let mut v = domain.to_json();
                                if let (Domain::OpSlot { .. }, Some(slot)) =
                                    (domain, leaf.slots.get(name))
                                {
                                    v["space"] = emit_hierarchical(slot);
                                }
                                (name.clone(), v)
                            })
                            .collect(),
                    )
                })
                .collect();
            json!({
                "kind": "disjuncts",
                "operator": leaf.template.name(),
                "path": leaf.path,
                "frozen": leaf.frozen,
                "fixed": fixed,
                "disjuncts": disjuncts,
            })
        }
    }
}
