use super::{run_search, History, Objective, OptimizerError, OptimizerSpec, Outcome};
use crate::ops::{fit, Operator};
use crate::space::{combine, CombineOptions, Point, SearchIr, SpaceError};
use crate::toyml::{cross_val_score, Dataset};

/// `1 - mean accuracy` of the decoded operator under seeded stratified
/// cross-validation.
#[derive(Clone, Debug)]
pub struct CvObjective {
    pub space: SearchIr,
    pub data: Dataset,
    pub folds: usize,
    pub seed: u64,
}

/// Builds the objective over an already compiled space.
pub fn make_cv_objective(space: SearchIr, data: Dataset, folds: usize, seed: u64) -> CvObjective {
    CvObjective {
        space,
        data,
        folds,
        seed,
    }
}

impl CvObjective {
    /// The decoded operator and its score, or the outcome explaining why
    /// there is none.
    pub fn score(&self, point: &Point) -> Result<f64, Outcome> {
        let op = match self.space.decode(point) {
            Ok(op) => op,
            Err(SpaceError::Decode(e)) => return Err(Outcome::InvalidConfig(e.to_string())),
            Err(e) => return Err(Outcome::InvalidConfig(e.to_string())),
        };
        cross_val_score(&op, &self.data, self.folds, self.seed)
            .map_err(|e| Outcome::RuntimeError(e.to_string()))
    }
}

impl Objective for CvObjective {
    fn evaluate(&self, point: &Point) -> Outcome {
        match self.score(point) {
            Ok(accuracy) => Outcome::Loss(1.0 - accuracy),
            Err(outcome) => outcome,
        }
    }
}

/// Compiles `op`, searches with cross-validation on `data`, then fits the
/// best decoded operator on all of `data`.
pub fn auto_configure(
    op: &Operator,
    data: &Dataset,
    spec: &OptimizerSpec,
    options: &CombineOptions,
    folds: usize,
) -> Result<(Operator, History), OptimizerError> {
    let space = combine(op, options)?;
    let objective = make_cv_objective(space.clone(), data.clone(), folds, spec.seed);
    let history = run_search(&space, &objective, spec)?;
    let best = history.best_trial().ok_or(OptimizerError::NoValidTrial)?;
    let trained = fit(&space.decode(&best.point)?, data)?;
    Ok((trained, history))
}
