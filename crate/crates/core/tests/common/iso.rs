//! Graph-isomorphism oracle for operators.
//!
//! The canonical string of a pipeline is the lexicographically smallest
//! encoding over every relabelling of its steps that keeps equal step
//! labels together. Choices compare as multisets of alternatives.

use lalec::ops::Operator;

pub fn canonical(op: &Operator) -> String {
    match op {
        Operator::Individual(_) => op.to_json().to_string(),
        Operator::Choice(c) => {
            let mut alts: Vec<String> = c.alternatives().iter().map(canonical).collect();
            alts.sort();
            format!("choice[{}]", alts.join(" ; "))
        }
        Operator::Pipeline(p) => {
            if p.steps().len() == 1 && p.edges().is_empty() {
                return canonical(&p.steps()[0]);
            }
            let labels: Vec<String> = p.steps().iter().map(canonical).collect();
            graph_canonical(&labels, p.edges())
        }
    }
}

fn graph_canonical(labels: &[String], edges: &[(usize, usize)]) -> String {
    let mut order: Vec<usize> = (0..labels.len()).collect();
    order.sort_by(|&a, &b| labels[a].cmp(&labels[b]));
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for &i in &order {
        match groups.last_mut() {
            Some(g) if labels[g[0]] == labels[i] => g.push(i),
            _ => groups.push(vec![i]),
        }
    }
    let mut best: Option<String> = None;
    let mut current: Vec<Vec<usize>> = groups.clone();
    search(&groups, 0, &mut current, labels, edges, &mut best);
    best.expect("at least one relabelling")
}

fn search(
    groups: &[Vec<usize>],
    g: usize,
    current: &mut Vec<Vec<usize>>,
    labels: &[String],
    edges: &[(usize, usize)],
    best: &mut Option<String>,
) {
    if g == groups.len() {
        let order: Vec<usize> = current.iter().flatten().copied().collect();
        let mut position = vec![0; labels.len()];
        for (new, &old) in order.iter().enumerate() {
            position[old] = new;
        }
        let mut mapped: Vec<(usize, usize)> = edges
            .iter()
            .map(|&(a, b)| (position[a], position[b]))
            .collect();
        mapped.sort_unstable();
        let names: Vec<&str> = order.iter().map(|&i| labels[i].as_str()).collect();
        let text = format!("graph[{}]{:?}", names.join(" ; "), mapped);
        if best.as_ref().is_none_or(|b| &text < b) {
            *best = Some(text);
        }
        return;
    }
    let members = groups[g].clone();
    permute(&members, 0, &mut members.clone(), &mut |perm| {
        current[g] = perm.to_vec();
        search(groups, g + 1, current, labels, edges, best);
    });
}

fn permute(items: &[usize], k: usize, work: &mut Vec<usize>, visit: &mut dyn FnMut(&[usize])) {
    if k == items.len() {
        visit(work);
        return;
    }
    for i in k..work.len() {
        work.swap(k, i);
        permute(items, k + 1, work, visit);
        work.swap(k, i);
    }
}

pub fn isomorphic(a: &Operator, b: &Operator) -> bool {
    canonical(a) == canonical(b)
}
