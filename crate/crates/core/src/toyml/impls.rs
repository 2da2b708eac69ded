//! Fit and apply for the native operators.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::tree::{Tree, TreeParams};
use super::{Dataset, Matrix, ToyError};
use crate::ops::{self, Operator};
use crate::schema::{Config, ConfigValue, Scalar};

const LOGREG_REGULARIZATION: f64 = 0.01;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ImplKind {
    NoOp,
    StandardScaler,
    MinMaxScaler,
    SelectKVariance,
    Concat,
    Knn,
    LogRegGd,
    PrunedTree,
    DecisionStump,
    BoostedEnsemble,
}

impl ImplKind {
    pub const ALL: [ImplKind; 10] = [
        ImplKind::NoOp,
        ImplKind::StandardScaler,
        ImplKind::MinMaxScaler,
        ImplKind::SelectKVariance,
        ImplKind::Concat,
        ImplKind::Knn,
        ImplKind::LogRegGd,
        ImplKind::PrunedTree,
        ImplKind::DecisionStump,
        ImplKind::BoostedEnsemble,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ImplKind::NoOp => "NoOp",
            ImplKind::StandardScaler => "StandardScaler",
            ImplKind::MinMaxScaler => "MinMaxScaler",
            ImplKind::SelectKVariance => "SelectKVariance",
            ImplKind::Concat => "Concat",
            ImplKind::Knn => "KNN",
            ImplKind::LogRegGd => "LogRegGD",
            ImplKind::PrunedTree => "PrunedTree",
            ImplKind::DecisionStump => "DecisionStump",
            ImplKind::BoostedEnsemble => "BoostedEnsemble",
        }
    }

    /// Implementation for an operator name. `Scaler` is an alias of
    /// `StandardScaler` and `J48` runs on the pruned tree.
    pub fn for_operator(name: &str) -> Option<ImplKind> {
        match name {
            "Scaler" => Some(ImplKind::StandardScaler),
            "J48" => Some(ImplKind::PrunedTree),
            _ => ImplKind::ALL.into_iter().find(|k| k.name() == name),
        }
    }

    pub fn is_estimator(self) -> bool {
        matches!(
            self,
            ImplKind::Knn
                | ImplKind::LogRegGd
                | ImplKind::PrunedTree
                | ImplKind::DecisionStump
                | ImplKind::BoostedEnsemble
        )
    }

    pub fn accepts_many_inputs(self) -> bool {
        self == ImplKind::Concat
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Member {
    Stump(Tree),
    Operator(Operator),
}

/// Learned state of a trained native operator.
#[derive(Clone, Debug, PartialEq)]
pub enum Model {
    Identity,
    /// `x' = (x - offset) / scale` per column.
    Affine {
        offset: Vec<f64>,
        scale: Vec<f64>,
    },
    Select {
        columns: Vec<usize>,
    },
    Concat,
    Knn {
        x: Matrix,
        y: Vec<usize>,
        w: Vec<f64>,
        k: usize,
        distance_weighted: bool,
        n_classes: usize,
    },
    Linear {
        weights: Vec<Vec<f64>>,
    },
    Tree(Tree),
    Boosted {
        members: Vec<(f64, Member)>,
        n_classes: usize,
    },
}

fn number(config: &Config, name: &str, fallback: f64) -> Result<f64, ToyError> {
    match config.get(name) {
        None | Some(ConfigValue::Scalar(Scalar::Null)) => Ok(fallback),
        Some(ConfigValue::Scalar(Scalar::Number(x))) => Ok(*x),
        Some(other) => Err(ToyError::BadConfig(format!(
            "`{name}` must be a number, got {other:?}"
        ))),
    }
}

fn text<'a>(config: &'a Config, name: &str, fallback: &'a str) -> Result<&'a str, ToyError> {
    match config.get(name) {
        None => Ok(fallback),
        Some(ConfigValue::Scalar(Scalar::Str(s))) => Ok(s),
        Some(other) => Err(ToyError::BadConfig(format!(
            "`{name}` must be a string, got {other:?}"
        ))),
    }
}

fn flag(config: &Config, name: &str, fallback: bool) -> Result<bool, ToyError> {
    match config.get(name) {
        None => Ok(fallback),
        Some(ConfigValue::Scalar(Scalar::Bool(b))) => Ok(*b),
        Some(other) => Err(ToyError::BadConfig(format!(
            "`{name}` must be a boolean, got {other:?}"
        ))),
    }
}

fn positive_count(x: f64, name: &str) -> Result<usize, ToyError> {
    if x >= 1.0 && x.fract() == 0.0 {
        Ok(x as usize)
    } else {
        Err(ToyError::BadConfig(format!(
            "`{name}` must be a positive integer, got {x}"
        )))
    }
}

fn single(inputs: &[Matrix]) -> Result<&Matrix, ToyError> {
    match inputs {
        [x] => Ok(x),
        _ => Err(ToyError::Shape(format!(
            "expected one input, got {} (join branches with Concat)",
            inputs.len()
        ))),
    }
}

/// Fits one native operator. `inputs` are the outputs of its predecessors
/// (or the training features for a source step); `config` is complete.
pub fn fit_impl(
    kind: ImplKind,
    config: &Config,
    inputs: &[Matrix],
    data: &Dataset,
    weights: Option<&[f64]>,
) -> Result<Model, ToyError> {
    let n = data.len();
    let ones;
    let w = match weights {
        Some(w) => w,
        None => {
            ones = vec![1.0; n];
            &ones
        }
    };
    match kind {
        ImplKind::Concat => {
            Matrix::hconcat(inputs)?;
            return Ok(Model::Concat);
        }
        _ => {
            let x = single(inputs)?;
            if x.rows() != n {
                return Err(ToyError::Shape(format!("{} rows for {n} labels", x.rows())));
            }
        }
    }
    let x = &inputs[0];
    let y = &data.labels;
    match kind {
        ImplKind::NoOp => Ok(Model::Identity),
        ImplKind::Concat => unreachable!("handled above"),
        ImplKind::StandardScaler => {
            let mut offset = Vec::new();
            let mut scale = Vec::new();
            for j in 0..x.cols() {
                let col = x.column(j);
                let mean = col.iter().sum::<f64>() / col.len() as f64;
                let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / col.len() as f64;
                offset.push(mean);
                scale.push(if var > 0.0 { var.sqrt() } else { 1.0 });
            }
            Ok(Model::Affine { offset, scale })
        }
        ImplKind::MinMaxScaler => {
            let mut offset = Vec::new();
            let mut scale = Vec::new();
            for j in 0..x.cols() {
                let col = x.column(j);
                let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                offset.push(lo);
                scale.push(if hi > lo { hi - lo } else { 1.0 });
            }
            Ok(Model::Affine { offset, scale })
        }
        ImplKind::SelectKVariance => {
            let k = positive_count(number(config, "k", 2.0)?, "k")?;
            let mut ranked: Vec<(usize, f64)> = (0..x.cols())
                .map(|j| {
                    let col = x.column(j);
                    let mean = col.iter().sum::<f64>() / col.len() as f64;
                    (j, col.iter().map(|v| (v - mean).powi(2)).sum::<f64>())
                })
                .collect();
            ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
            let mut columns: Vec<usize> = ranked.into_iter().take(k).map(|(j, _)| j).collect();
            columns.sort_unstable();
            Ok(Model::Select { columns })
        }
        ImplKind::Knn => {
            let k = positive_count(number(config, "k", 5.0)?, "k")?;
            let distance_weighted = match text(config, "weighting", "uniform")? {
                "uniform" => false,
                "distance" => true,
                other => return Err(ToyError::BadConfig(format!("unknown weighting `{other}`"))),
            };
            Ok(Model::Knn {
                x: x.clone(),
                y: y.clone(),
                w: w.to_vec(),
                k,
                distance_weighted,
                n_classes: data.n_classes(),
            })
        }
        ImplKind::LogRegGd => fit_logreg(config, x, y, w, data.n_classes()),
        ImplKind::PrunedTree => {
            let max_depth = positive_count(number(config, "max_depth", 5.0)?, "max_depth")?;
            let reduced_error = flag(config, "R", false)?;
            let confidence = number(config, "C", 0.25)?;
            if reduced_error && confidence != 0.25 {
                return Err(ToyError::ConstraintTrap(format!(
                    "reduced-error pruning (R=true) requires C=0.25, got C={confidence}"
                )));
            }
            if !(confidence > 0.0 && confidence < 0.5) {
                return Err(ToyError::BadConfig(format!(
                    "C must lie in (0, 0.5), got {confidence}"
                )));
            }
            let params = TreeParams {
                max_depth,
                reduced_error,
                confidence,
                prune: true,
            };
            Ok(Model::Tree(Tree::fit(x, y, w, data.n_classes(), &params)))
        }
        ImplKind::DecisionStump => Ok(Model::Tree(Tree::fit(
            x,
            y,
            w,
            data.n_classes(),
            &stump_params(),
        ))),
        ImplKind::BoostedEnsemble => fit_boosted(config, x, data, w),
    }
}

fn stump_params() -> TreeParams {
    TreeParams {
        max_depth: 1,
        reduced_error: false,
        confidence: 0.25,
        prune: false,
    }
}

fn softmax_scores(weights: &[Vec<f64>], row: &[f64]) -> Vec<f64> {
    let raw: Vec<f64> = weights
        .iter()
        .map(|wk| wk[0] + wk[1..].iter().zip(row).map(|(a, b)| a * b).sum::<f64>())
        .collect();
    let top = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = raw.iter().map(|s| (s - top).exp()).collect();
    let total: f64 = exp.iter().sum();
    exp.into_iter().map(|e| e / total).collect()
}

fn fit_logreg(
    config: &Config,
    x: &Matrix,
    y: &[usize],
    w: &[f64],
    n_classes: usize,
) -> Result<Model, ToyError> {
    let lr = number(config, "learning_rate", 0.1)?;
    let iterations = positive_count(number(config, "iterations", 100.0)?, "iterations")?;
    let penalty = text(config, "penalty", "l2")?;
    let solver = text(config, "solver", "gd")?;
    if solver == "sgd" && penalty != "l2" {
        return Err(ToyError::ConstraintTrap(format!(
            "solver sgd only supports penalty l2, got {penalty}"
        )));
    }
    if !matches!(penalty, "l1" | "l2") || !matches!(solver, "gd" | "sgd") {
        return Err(ToyError::BadConfig(format!(
            "unknown penalty/solver `{penalty}`/`{solver}`"
        )));
    }
    let k = n_classes.max(2);
    let d = x.cols();
    let mut weights = vec![vec![0.0; d + 1]; k];
    let total_w: f64 = w.iter().sum::<f64>().max(f64::MIN_POSITIVE);

    let regularize = |weights: &mut Vec<Vec<f64>>, step: f64| {
        for wk in weights.iter_mut() {
            for v in wk[1..].iter_mut() {
                if penalty == "l2" {
                    *v -= step * LOGREG_REGULARIZATION * *v;
                } else {
                    let shrink = step * LOGREG_REGULARIZATION;
                    *v = v.signum() * (v.abs() - shrink).max(0.0);
                }
            }
        }
    };
    let gradient_step = |weights: &mut Vec<Vec<f64>>, rows: &[usize], scale: f64| {
        let mut grad = vec![vec![0.0; d + 1]; k];
        for &i in rows {
            let row = x.row(i);
            let p = softmax_scores(weights, row);
            for (c, g) in grad.iter_mut().enumerate() {
                let err = w[i] * (p[c] - f64::from(u8::from(y[i] == c)));
                g[0] += err;
                for (gj, xj) in g[1..].iter_mut().zip(row) {
                    *gj += err * xj;
                }
            }
        }
        for (wk, gk) in weights.iter_mut().zip(&grad) {
            for (v, g) in wk.iter_mut().zip(gk) {
                *v -= lr * g * scale;
            }
        }
        regularize(weights, lr);
    };

    let all: Vec<usize> = (0..x.rows()).collect();
    if solver == "gd" {
        for _ in 0..iterations {
            gradient_step(&mut weights, &all, 1.0 / total_w);
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut order = all;
        let mean_w = total_w / x.rows() as f64;
        for _ in 0..iterations {
            order.shuffle(&mut rng);
            for &i in &order {
                gradient_step(&mut weights, &[i], 1.0 / mean_w / x.rows() as f64);
            }
        }
    }
    if weights.iter().flatten().any(|v| !v.is_finite()) {
        return Err(ToyError::BadConfig("gradient descent diverged".into()));
    }
    Ok(Model::Linear { weights })
}

fn fit_boosted(config: &Config, x: &Matrix, data: &Dataset, w0: &[f64]) -> Result<Model, ToyError> {
    let n_estimators = positive_count(number(config, "n_estimators", 10.0)?, "n_estimators")?;
    let learning_rate = number(config, "learning_rate", 1.0)?;
    let base = match config.get("base_estimator") {
        None | Some(ConfigValue::Scalar(Scalar::Null)) => None,
        Some(ConfigValue::Operator(op)) => Some(ops::with_default_hyperparameters(op)),
        Some(other) => {
            return Err(ToyError::BadConfig(format!(
                "base_estimator must be an operator, got {other:?}"
            )))
        }
    };
    let n = data.len();
    let k = data.n_classes().max(2) as f64;
    let inner = data.with_features(x.clone());
    let mut w: Vec<f64> = {
        let total: f64 = w0.iter().sum();
        w0.iter().map(|v| v / total).collect()
    };
    let mut members = Vec::new();
    for m in 0..n_estimators {
        let scaled: Vec<f64> = w.iter().map(|v| v * n as f64).collect();
        let (member, predicted) = match &base {
            None => {
                let tree = Tree::fit(x, &data.labels, &scaled, data.n_classes(), &stump_params());
                let predicted: Vec<usize> = x.iter_rows().map(|r| tree.predict_row(r)).collect();
                (Member::Stump(tree), predicted)
            }
            Some(op) => {
                let trained = ops::fit_weighted(op, &inner, Some(&scaled))
                    .map_err(|e| ToyError::Base(e.to_string()))?;
                let predicted = ops::predict(&trained, x)
                    .and_then(|m| m.to_labels().map_err(ops::OpError::from))
                    .map_err(|e| ToyError::Base(e.to_string()))?;
                (Member::Operator(trained), predicted)
            }
        };
        let wrong: Vec<bool> = predicted
            .iter()
            .zip(&data.labels)
            .map(|(p, l)| p != l)
            .collect();
        let err: f64 = w
            .iter()
            .zip(&wrong)
            .filter(|(_, &bad)| bad)
            .map(|(v, _)| v)
            .sum();
        if err >= 1.0 - 1.0 / k && m > 0 {
            break;
        }
        let err_c = err.clamp(1e-10, 1.0 - 1e-10);
        // A positive weight keeps a single-member ensemble equal to its base.
        let alpha = (learning_rate * (((1.0 - err_c) / err_c).ln() + (k - 1.0).ln())).max(1e-10);
        members.push((alpha, member));
        if err <= 0.0 {
            break;
        }
        for (wi, &bad) in w.iter_mut().zip(&wrong) {
            if bad {
                *wi *= alpha.exp();
            }
        }
        let total: f64 = w.iter().sum();
        w.iter_mut().for_each(|v| *v /= total);
    }
    Ok(Model::Boosted {
        members,
        n_classes: data.n_classes(),
    })
}

fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (k, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = k;
        }
    }
    best
}

fn labels_to_matrix(labels: Vec<usize>) -> Matrix {
    Matrix::column_vector(labels.into_iter().map(|l| l as f64).collect())
}

impl Model {
    /// Applies a trained native operator to its inputs.
    pub fn apply(&self, inputs: &[Matrix]) -> Result<Matrix, ToyError> {
        if let Model::Concat = self {
            return Matrix::hconcat(inputs);
        }
        let x = single(inputs)?;
        match self {
            Model::Identity => Ok(x.clone()),
            Model::Concat => unreachable!("handled above"),
            Model::Affine { offset, scale } => {
                self.check_width(x, offset.len())?;
                Ok(x.map_columns(|j, v| (v - offset[j]) / scale[j]))
            }
            Model::Select { columns } => {
                if columns.iter().any(|&j| j >= x.cols()) {
                    return Err(ToyError::Shape(
                        "input has fewer columns than at fit".into(),
                    ));
                }
                Ok(x.select_columns(columns))
            }
            Model::Knn {
                x: train,
                y,
                w,
                k,
                distance_weighted,
                n_classes,
            } => {
                self.check_width(x, train.cols())?;
                let labels = x
                    .iter_rows()
                    .map(|row| {
                        let mut dists: Vec<(f64, usize)> = train
                            .iter_rows()
                            .enumerate()
                            .map(|(i, t)| {
                                let d2: f64 = t.iter().zip(row).map(|(a, b)| (a - b).powi(2)).sum();
                                (d2.sqrt(), i)
                            })
                            .collect();
                        dists.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                        let mut votes = vec![0.0; *n_classes];
                        for &(d, i) in dists.iter().take(*k) {
                            let v = if *distance_weighted {
                                1.0 / (d + 1e-12)
                            } else {
                                1.0
                            };
                            votes[y[i]] += v * w[i];
                        }
                        argmax(&votes)
                    })
                    .collect();
                Ok(labels_to_matrix(labels))
            }
            Model::Linear { weights } => {
                self.check_width(x, weights[0].len() - 1)?;
                let labels = x
                    .iter_rows()
                    .map(|row| argmax(&softmax_scores(weights, row)))
                    .collect();
                Ok(labels_to_matrix(labels))
            }
            Model::Tree(tree) => Ok(labels_to_matrix(
                x.iter_rows().map(|r| tree.predict_row(r)).collect(),
            )),
            Model::Boosted { members, n_classes } => {
                let mut votes = vec![vec![0.0; *n_classes]; x.rows()];
                for (alpha, member) in members {
                    let predicted = match member {
                        Member::Stump(tree) => x.iter_rows().map(|r| tree.predict_row(r)).collect(),
                        Member::Operator(op) => ops::predict(op, x)
                            .and_then(|m| m.to_labels().map_err(ops::OpError::from))
                            .map_err(|e| ToyError::Base(e.to_string()))?,
                    };
                    for (row_votes, p) in votes.iter_mut().zip(predicted) {
                        if p < row_votes.len() {
                            row_votes[p] += alpha;
                        }
                    }
                }
                Ok(labels_to_matrix(votes.iter().map(|v| argmax(v)).collect()))
            }
        }
    }

    fn check_width(&self, x: &Matrix, expected: usize) -> Result<(), ToyError> {
        if x.cols() == expected {
            Ok(())
        } else {
            Err(ToyError::Shape(format!(
                "expected {expected} columns, got {}",
                x.cols()
            )))
        }
    }

    /// Undoes an affine scaler.
    pub fn inverse_transform(&self, x: &Matrix) -> Option<Matrix> {
        match self {
            Model::Affine { offset, scale } => Some(x.map_columns(|j, v| v * scale[j] + offset[j])),
            Model::Identity => Some(x.clone()),
            _ => None,
        }
    }
}
