//! Training and prediction over operator graphs.

use super::{Individual, LifecycleState, OpError, Operator, Pipeline};
use crate::toyml::{fit_impl, Dataset, Matrix};

/// Trains an operator. Pipeline steps run in topological order; a source
/// step sees the training features, any other step the outputs of its
/// predecessors in step order.
pub fn fit(op: &Operator, data: &Dataset) -> Result<Operator, OpError> {
    fit_weighted(op, data, None)
}

/// [`fit`] with per-row sample weights, forwarded to every learner.
pub fn fit_weighted(
    op: &Operator,
    data: &Dataset,
    weights: Option<&[f64]>,
) -> Result<Operator, OpError> {
    if op.contains_choice() {
        return Err(OpError::UnresolvedChoice);
    }
    if op.state() < LifecycleState::Trainable {
        return Err(OpError::NotTrainable(op.name().to_string()));
    }
    if op.is_frozen_trained() {
        return Ok(op.clone());
    }
    match op {
        Operator::Individual(ind) => {
            let (trained, _) =
                fit_individual(ind, std::slice::from_ref(&data.features), data, weights)?;
            Ok(Operator::Individual(trained))
        }
        Operator::Pipeline(p) => fit_pipeline(p, data, weights).map(Operator::Pipeline),
        Operator::Choice(_) => Err(OpError::UnresolvedChoice),
    }
}

fn fit_individual(
    ind: &Individual,
    inputs: &[Matrix],
    data: &Dataset,
    weights: Option<&[f64]>,
) -> Result<(Individual, Matrix), OpError> {
    if ind.frozen_trained {
        let output = apply_individual(ind, inputs)?;
        return Ok((ind.clone(), output));
    }
    let kind = ind
        .implementation
        .ok_or_else(|| OpError::NoImplementation(ind.name.clone()))?;
    let model = fit_impl(kind, &ind.full_config(), inputs, data, weights).map_err(|source| {
        OpError::Implementation {
            operator: ind.name.clone(),
            source,
        }
    })?;
    let trained = ind.with_model(model);
    let output = apply_individual(&trained, inputs)?;
    Ok((trained, output))
}

fn step_inputs(
    p: &Pipeline,
    step: usize,
    features: &Matrix,
    outputs: &[Option<Matrix>],
) -> Vec<Matrix> {
    let preds = p.predecessors(step);
    if preds.is_empty() {
        vec![features.clone()]
    } else {
        preds
            .iter()
            .map(|&j| outputs[j].clone().expect("predecessor ran first"))
            .collect()
    }
}

fn fit_pipeline(
    p: &Pipeline,
    data: &Dataset,
    weights: Option<&[f64]>,
) -> Result<Pipeline, OpError> {
    let order = p.topological_order().expect("pipelines are acyclic");
    let mut outputs: Vec<Option<Matrix>> = vec![None; p.steps.len()];
    let mut trained: Vec<Option<Operator>> = vec![None; p.steps.len()];
    for i in order {
        let Operator::Individual(ind) = &p.steps[i] else {
            return Err(OpError::UnresolvedChoice);
        };
        let inputs = step_inputs(p, i, &data.features, &outputs);
        let (t, out) = fit_individual(ind, &inputs, data, weights)?;
        trained[i] = Some(Operator::Individual(t));
        outputs[i] = Some(out);
    }
    Ok(p.with_steps(
        trained
            .into_iter()
            .map(|t| t.expect("every step ran"))
            .collect(),
    ))
}

fn apply_individual(ind: &Individual, inputs: &[Matrix]) -> Result<Matrix, OpError> {
    let model = ind
        .model
        .as_ref()
        .ok_or_else(|| OpError::NotTrained(ind.name.clone()))?;
    model.apply(inputs).map_err(|e| match e {
        crate::toyml::ToyError::Shape(m) => OpError::ShapeMismatch(format!("{}: {m}", ind.name)),
        source => OpError::Implementation {
            operator: ind.name.clone(),
            source,
        },
    })
}

/// Applies a trained operator. A pipeline must have exactly one sink; its
/// output is the result.
pub fn predict(op: &Operator, x: &Matrix) -> Result<Matrix, OpError> {
    if op.state() < LifecycleState::Trained {
        return Err(OpError::NotTrained(op.name().to_string()));
    }
    match op {
        Operator::Individual(ind) => apply_individual(ind, std::slice::from_ref(x)),
        Operator::Pipeline(p) => {
            let sinks = p.sinks();
            if sinks.len() != 1 {
                return Err(OpError::ShapeMismatch(format!(
                    "pipeline has {} sinks; join them before predicting",
                    sinks.len()
                )));
            }
            let order = p.topological_order().expect("pipelines are acyclic");
            let mut outputs: Vec<Option<Matrix>> = vec![None; p.steps.len()];
            for i in order {
                let Operator::Individual(ind) = &p.steps[i] else {
                    return Err(OpError::UnresolvedChoice);
                };
                let inputs = step_inputs(p, i, x, &outputs);
                outputs[i] = Some(apply_individual(ind, &inputs)?);
            }
            Ok(outputs[sinks[0]].take().expect("sink ran"))
        }
        Operator::Choice(_) => Err(OpError::UnresolvedChoice),
    }
}
