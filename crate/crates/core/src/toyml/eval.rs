use super::{accuracy, stratified_folds, Dataset};
use crate::ops::{fit, predict, OpError, Operator};

/// Mean accuracy over seeded stratified `k`-fold cross-validation.
pub fn cross_val_score(op: &Operator, data: &Dataset, k: usize, seed: u64) -> Result<f64, OpError> {
    if k < 2 || k > data.len() {
        return Err(OpError::ShapeMismatch(format!(
            "cannot make {k} folds from {} rows",
            data.len()
        )));
    }
    let folds = stratified_folds(&data.labels, data.n_classes(), k, seed);
    let mut total = 0.0;
    for test in &folds {
        let train: Vec<usize> = (0..data.len())
            .filter(|i| test.binary_search(i).is_err())
            .collect();
        let trained = fit(op, &data.subset(&train))?;
        let held_out = data.subset(test);
        let predicted = predict(&trained, &held_out.features)?.to_labels()?;
        total += accuracy(&predicted, &held_out.labels);
    }
    Ok(total / k as f64)
}
