//! Search strategies over compiled spaces, the cross-validation objective,
//! and `auto_configure`.

mod objective;
mod search;

use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use crate::ops::OpError;
use crate::space::{Point, SpaceError};

pub use objective::{auto_configure, make_cv_objective, CvObjective};
pub use search::{bandit_search, grid_search, random_search, run_search};

/// Loss recorded for failed trials: the largest finite `f64`.
pub const PENALTY: f64 = f64::MAX;

#[derive(Debug, Error)]
pub enum OptimizerError {
    #[error("grid has {cells} cells, more than the trial cap of {limit}")]
    GridTooLarge { cells: u128, limit: usize },
    #[error(
        "the bandit strategy depends on earlier results and cannot evaluate trials concurrently"
    )]
    BanditConcurrent,
    #[error("invalid optimizer settings: {0}")]
    InvalidSpec(String),
    #[error("no trial produced a valid configuration")]
    NoValidTrial,
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Op(#[from] OpError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Strategy {
    Random,
    Grid,
    Bandit,
}

impl Strategy {
    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Random => "random",
            Strategy::Grid => "grid",
            Strategy::Bandit => "bandit",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = OptimizerError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "random" => Ok(Strategy::Random),
            "grid" => Ok(Strategy::Grid),
            "bandit" => Ok(Strategy::Bandit),
            other => Err(OptimizerError::InvalidSpec(format!(
                "unknown strategy `{other}`"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerSpec {
    pub strategy: Strategy,
    pub max_trials: usize,
    pub seed: u64,
    /// Exploration probability of the bandit strategy.
    pub bandit_epsilon: f64,
    pub penalty: f64,
    /// Continuous draws per domain when the grid strategy discretizes.
    pub cont_samples: usize,
    /// Concurrent objective evaluations; 1 is sequential.
    pub jobs: usize,
}

impl Default for OptimizerSpec {
    fn default() -> Self {
        OptimizerSpec {
            strategy: Strategy::Random,
            max_trials: 50,
            seed: 0,
            bandit_epsilon: 0.2,
            penalty: PENALTY,
            cont_samples: 1,
            jobs: 1,
        }
    }
}

impl OptimizerSpec {
    pub fn check(&self) -> Result<(), OptimizerError> {
        if self.max_trials == 0 {
            return Err(OptimizerError::InvalidSpec(
                "maxTrials must be positive".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.bandit_epsilon) {
            return Err(OptimizerError::InvalidSpec(
                "banditEpsilon must lie in [0, 1]".into(),
            ));
        }
        if !self.penalty.is_finite() {
            return Err(OptimizerError::InvalidSpec("penalty must be finite".into()));
        }
        if self.jobs == 0 {
            return Err(OptimizerError::InvalidSpec("jobs must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub enum TrialStatus {
    Valid,
    InvalidConfig,
    RuntimeError,
}

impl TrialStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            TrialStatus::Valid => "valid",
            TrialStatus::InvalidConfig => "invalidConfig",
            TrialStatus::RuntimeError => "runtimeError",
        }
    }
}

/// What an objective reports for one point.
#[derive(Clone, Debug, PartialEq)]
pub enum Outcome {
    Loss(f64),
    InvalidConfig(String),
    RuntimeError(String),
}

/// Maps a point to a loss; lower is better.
pub trait Objective: Sync {
    fn evaluate(&self, point: &Point) -> Outcome;
}

impl<F> Objective for F
where
    F: Fn(&Point) -> Outcome + Sync,
{
    fn evaluate(&self, point: &Point) -> Outcome {
        self(point)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trial {
    pub index: usize,
    pub point: Point,
    pub loss: f64,
    pub status: TrialStatus,
    /// Seconds spent in the objective.
    pub elapsed: f64,
    pub message: Option<String>,
}

impl Trial {
    pub(crate) fn new(
        index: usize,
        point: Point,
        outcome: Outcome,
        elapsed: f64,
        penalty: f64,
    ) -> Trial {
        let (loss, status, message) = match outcome {
            Outcome::Loss(x) if x.is_finite() => (x, TrialStatus::Valid, None),
            Outcome::Loss(x) => (
                penalty,
                TrialStatus::RuntimeError,
                Some(format!("objective returned {x}")),
            ),
            Outcome::InvalidConfig(m) => (penalty, TrialStatus::InvalidConfig, Some(m)),
            Outcome::RuntimeError(m) => (penalty, TrialStatus::RuntimeError, Some(m)),
        };
        Trial {
            index,
            point,
            loss,
            status,
            elapsed,
            message,
        }
    }

    fn to_json(&self, timing: bool) -> Value {
        let mut v = json!({
            "index": self.index,
            "point": Value::Object(self.point.iter().map(|(k, s)| (k.clone(), s.to_json())).collect()),
            "loss": self.loss,
            "status": self.status.as_str(),
            "elapsed": if timing { self.elapsed } else { 0.0 },
        });
        if let Some(m) = &self.message {
            v["message"] = json!(m);
        }
        v
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct History {
    pub trials: Vec<Trial>,
    /// Index of the lowest-loss valid trial; ties go to the earliest.
    pub best: Option<usize>,
    pub seed: u64,
    pub space_digest: String,
}

impl History {
    pub fn new(trials: Vec<Trial>, seed: u64, space_digest: String) -> History {
        let mut best: Option<usize> = None;
        for t in &trials {
            if t.status == TrialStatus::Valid && best.is_none_or(|b| t.loss < trials[b].loss) {
                best = Some(t.index);
            }
        }
        History {
            trials,
            best,
            seed,
            space_digest,
        }
    }

    pub fn best_trial(&self) -> Option<&Trial> {
        self.best.map(|b| &self.trials[b])
    }

    pub fn best_loss(&self) -> Option<f64> {
        self.best_trial().map(|t| t.loss)
    }

    /// Trials that did not produce a valid loss.
    pub fn invalid_count(&self) -> usize {
        self.trials
            .iter()
            .filter(|t| t.status != TrialStatus::Valid)
            .count()
    }

    pub fn count_status(&self, status: TrialStatus) -> usize {
        self.trials.iter().filter(|t| t.status == status).count()
    }

    /// Best valid loss after each trial; `None` until a valid trial exists.
    pub fn best_so_far(&self) -> Vec<Option<f64>> {
        let mut best: Option<f64> = None;
        self.trials
            .iter()
            .map(|t| {
                if t.status == TrialStatus::Valid && best.is_none_or(|b| t.loss < b) {
                    best = Some(t.loss);
                }
                best
            })
            .collect()
    }

    /// JSON record; with `timing` off every `elapsed` is written as 0 so
    /// that equal runs serialize to equal bytes.
    pub fn to_json(&self, timing: bool) -> Value {
        json!({
            "seed": self.seed,
            "spaceDigest": self.space_digest,
            "best": self.best,
            "bestLoss": self.best_loss(),
            "trials": self.trials.iter().map(|t| t.to_json(timing)).collect::<Vec<_>>(),
        })
    }

    /// CSV with header `trial,best_loss`; the loss column is empty until
    /// a valid trial exists.
    pub fn curve_csv(&self) -> String {
        let mut out = String::from("trial,best_loss\n");
        for (i, b) in self.best_so_far().into_iter().enumerate() {
            match b {
                Some(x) => out.push_str(&format!("{i},{x}\n")),
                None => out.push_str(&format!("{i},\n")),
            }
        }
        out
    }
}
