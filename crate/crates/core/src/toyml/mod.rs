//! Small native learners and transformers used to run compiled search spaces
//! end to end.

mod data;
mod eval;
mod impls;
mod tree;

use thiserror::Error;

pub use data::{
    accuracy, load_csv, stratified_folds, synth_dataset, train_test_split, Dataset, Matrix,
    SynthKind, XOR_NOISE_COLUMNS,
};
pub use eval::cross_val_score;
pub use impls::{fit_impl, ImplKind, Member, Model};
pub use tree::{Tree, TreeNode, TreeParams};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ToyError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("bad configuration: {0}")]
    BadConfig(String),
    #[error("bad CSV: {0}")]
    BadCsv(String),
    #[error("label column `{0}` not found")]
    LabelColumnMissing(String),
    /// A configuration the learner cannot run with, detected only at fit time.
    #[error("constraint trap: {0}")]
    ConstraintTrap(String),
    #[error("base estimator failed: {0}")]
    Base(String),
}
