//! Axis-aligned classification trees with two pruning modes.
//!
//! Pessimistic pruning follows the classic upper-confidence-bound error
//! estimate with confidence factor `C`; reduced-error pruning grows on 75% of
//! the rows and collapses subtrees that do not beat a leaf on the held-out 25%.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use super::Matrix;

#[derive(Clone, Debug, PartialEq)]
pub struct TreeParams {
    pub max_depth: usize,
    pub reduced_error: bool,
    pub confidence: f64,
    pub prune: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum TreeNode {
    Leaf {
        class: usize,
        dist: Vec<f64>,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        dist: Vec<f64>,
    },
}

impl TreeNode {
    fn dist(&self) -> &[f64] {
        match self {
            TreeNode::Leaf { dist, .. } | TreeNode::Split { dist, .. } => dist,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Tree {
    nodes: Vec<TreeNode>,
}

fn majority(dist: &[f64]) -> usize {
    let mut best = 0;
    for (k, &c) in dist.iter().enumerate() {
        if c > dist[best] {
            best = k;
        }
    }
    best
}

fn gini_mass(dist: &[f64]) -> f64 {
    let total: f64 = dist.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    total - dist.iter().map(|c| c * c).sum::<f64>() / total
}

struct Grower<'a> {
    x: &'a Matrix,
    y: &'a [usize],
    w: &'a [f64],
    n_classes: usize,
    max_depth: usize,
    nodes: Vec<TreeNode>,
}

impl Grower<'_> {
    fn dist(&self, rows: &[usize]) -> Vec<f64> {
        let mut dist = vec![0.0; self.n_classes];
        for &i in rows {
            dist[self.y[i]] += self.w[i];
        }
        dist
    }

    fn grow(&mut self, rows: Vec<usize>, depth: usize) -> usize {
        let dist = self.dist(&rows);
        let id = self.nodes.len();
        self.nodes.push(TreeNode::Leaf {
            class: majority(&dist),
            dist: dist.clone(),
        });
        let impure = dist.iter().filter(|&&c| c > 0.0).count() > 1;
        if depth >= self.max_depth || rows.len() < 2 || !impure {
            return id;
        }
        let Some((feature, threshold)) = self.best_split(&rows, &dist) else {
            return id;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = rows
            .iter()
            .partition(|&&i| self.x.get(i, feature) <= threshold);
        let left = self.grow(l, depth + 1);
        let right = self.grow(r, depth + 1);
        self.nodes[id] = TreeNode::Split {
            feature,
            threshold,
            left,
            right,
            dist,
        };
        id
    }

    fn best_split(&self, rows: &[usize], dist: &[f64]) -> Option<(usize, f64)> {
        let parent = gini_mass(dist);
        let mut best: Option<(f64, usize, f64)> = None;
        let mut order = rows.to_vec();
        for feature in 0..self.x.cols() {
            order.sort_by(|&a, &b| {
                self.x
                    .get(a, feature)
                    .total_cmp(&self.x.get(b, feature))
                    .then(a.cmp(&b))
            });
            let mut left = vec![0.0; self.n_classes];
            let mut right = dist.to_vec();
            for pos in 0..order.len() - 1 {
                let i = order[pos];
                left[self.y[i]] += self.w[i];
                right[self.y[i]] -= self.w[i];
                let (a, b) = (self.x.get(i, feature), self.x.get(order[pos + 1], feature));
                if a == b {
                    continue;
                }
                let score = gini_mass(&left) + gini_mass(&right);
                if score < parent - 1e-12 && best.is_none_or(|(s, _, _)| score < s - 1e-12) {
                    best = Some((score, feature, a + (b - a) / 2.0));
                }
            }
        }
        best.map(|(_, f, t)| (f, t))
    }
}

/// Extra errors expected at a leaf covering `n` rows with `e` errors, at
/// confidence `cf` (upper confidence limit of the binomial error rate).
fn added_errors(n: f64, e: f64, cf: f64, z: f64) -> f64 {
    if e < 1e-6 {
        return n * (1.0 - cf.powf(1.0 / n));
    }
    if e < 0.9999 {
        let base = n * (1.0 - cf.powf(1.0 / n));
        return base + e * (added_errors(n, 1.0, cf, z) - base);
    }
    if e + 0.5 >= n {
        return 0.67 * (n - e);
    }
    let coeff = z * z;
    let pr = (e
        + 0.5
        + coeff / 2.0
        + (coeff * ((e + 0.5) * (1.0 - (e + 0.5) / n) + coeff / 4.0)).sqrt())
        / (n + coeff);
    n * pr - e
}

impl Tree {
    pub fn fit(x: &Matrix, y: &[usize], w: &[f64], n_classes: usize, params: &TreeParams) -> Tree {
        let all: Vec<usize> = (0..x.rows()).collect();
        if params.prune && params.reduced_error && x.rows() >= 8 {
            let mut shuffled = all.clone();
            shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(0));
            let cut = x.rows().div_ceil(4);
            let mut holdout = shuffled[..cut].to_vec();
            let mut grow_rows = shuffled[cut..].to_vec();
            holdout.sort_unstable();
            grow_rows.sort_unstable();
            let mut tree = Tree::grow(x, y, w, n_classes, params.max_depth, grow_rows);
            tree.prune_reduced_error(0, x, y, w, &holdout);
            return tree.compact();
        }
        let mut tree = Tree::grow(x, y, w, n_classes, params.max_depth, all);
        if params.prune {
            let z = Normal::standard().inverse_cdf(1.0 - params.confidence);
            tree.prune_pessimistic(0, params.confidence, z);
            tree = tree.compact();
        }
        tree
    }

    fn grow(
        x: &Matrix,
        y: &[usize],
        w: &[f64],
        n_classes: usize,
        max_depth: usize,
        rows: Vec<usize>,
    ) -> Tree {
        let mut grower = Grower {
            x,
            y,
            w,
            n_classes,
            max_depth,
            nodes: Vec::new(),
        };
        grower.grow(rows, 0);
        Tree {
            nodes: grower.nodes,
        }
    }

    fn collapse(&mut self, id: usize) {
        let dist = self.nodes[id].dist().to_vec();
        self.nodes[id] = TreeNode::Leaf {
            class: majority(&dist),
            dist,
        };
    }

    /// Returns the estimated error mass of the (pruned) subtree.
    fn prune_pessimistic(&mut self, id: usize, cf: f64, z: f64) -> f64 {
        let dist = self.nodes[id].dist().to_vec();
        let n: f64 = dist.iter().sum();
        let e = n - dist[majority(&dist)];
        let as_leaf = if n > 0.0 {
            e + added_errors(n, e, cf, z)
        } else {
            0.0
        };
        match self.nodes[id] {
            TreeNode::Leaf { .. } => as_leaf,
            TreeNode::Split { left, right, .. } => {
                let subtree =
                    self.prune_pessimistic(left, cf, z) + self.prune_pessimistic(right, cf, z);
                if as_leaf <= subtree + 0.1 {
                    self.collapse(id);
                    as_leaf
                } else {
                    subtree
                }
            }
        }
    }

    /// Returns the held-out error mass of the (pruned) subtree.
    fn prune_reduced_error(
        &mut self,
        id: usize,
        x: &Matrix,
        y: &[usize],
        w: &[f64],
        rows: &[usize],
    ) -> f64 {
        let class = majority(self.nodes[id].dist());
        let as_leaf: f64 = rows.iter().filter(|&&i| y[i] != class).map(|&i| w[i]).sum();
        match self.nodes[id] {
            TreeNode::Leaf { .. } => as_leaf,
            TreeNode::Split {
                feature,
                threshold,
                left,
                right,
                ..
            } => {
                let (l, r): (Vec<usize>, Vec<usize>) =
                    rows.iter().partition(|&&i| x.get(i, feature) <= threshold);
                let subtree = self.prune_reduced_error(left, x, y, w, &l)
                    + self.prune_reduced_error(right, x, y, w, &r);
                if as_leaf <= subtree {
                    self.collapse(id);
                    as_leaf
                } else {
                    subtree
                }
            }
        }
    }

    /// Drops nodes unreachable after pruning.
    fn compact(&self) -> Tree {
        let mut nodes = Vec::new();
        self.copy_into(0, &mut nodes);
        Tree { nodes }
    }

    fn copy_into(&self, id: usize, out: &mut Vec<TreeNode>) -> usize {
        let new_id = out.len();
        out.push(self.nodes[id].clone());
        if let TreeNode::Split {
            feature,
            threshold,
            left,
            right,
            dist,
        } = &self.nodes[id]
        {
            let l = self.copy_into(*left, out);
            let r = self.copy_into(*right, out);
            out[new_id] = TreeNode::Split {
                feature: *feature,
                threshold: *threshold,
                left: l,
                right: r,
                dist: dist.clone(),
            };
        }
        new_id
    }

    pub fn predict_row(&self, row: &[f64]) -> usize {
        let mut id = 0;
        loop {
            match &self.nodes[id] {
                TreeNode::Leaf { class, .. } => return *class,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    id = if row[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    }
                }
            }
        }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, id: usize) -> usize {
            match &t.nodes[id] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => 1 + go(t, *left).max(go(t, *right)),
            }
        }
        go(self, 0)
    }
}
