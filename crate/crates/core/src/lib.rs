//! Search-space compiler and small AutoML toolkit.
//!
//! Pipelines are written with three combinators (`>>` pipe, `&` both,
//! `|` choice) over operators whose hyperparameters are described by
//! JSON-Schema documents. The compiler normalizes each schema into a
//! disjunction of flat domain records, combines them over the pipeline
//! structure, and emits the result as a nested JSON space, a flat list of
//! disjuncts, a PCS file, or a discretized grid. Optimizers search those
//! spaces against cross-validated native learners.

pub mod dot;
pub mod dsl;
pub mod grammar;
pub mod normalize;
pub mod ops;
pub mod optimizer;
pub mod par;
pub mod schema;
pub mod space;
pub mod toyml;
