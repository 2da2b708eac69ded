use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{History, Objective, OptimizerError, OptimizerSpec, Strategy, Trial};
use crate::par::map_indexed;
use crate::space::{
    emit_grid, sample_point, sample_point_in_branch, space_digest, DiscretizedGrid, Point, SearchIr,
};

fn evaluate_one(objective: &dyn Objective, index: usize, point: Point, penalty: f64) -> Trial {
    let start = Instant::now();
    let outcome = objective.evaluate(&point);
    Trial::new(
        index,
        point,
        outcome,
        start.elapsed().as_secs_f64(),
        penalty,
    )
}

/// Evaluates points whose indices were fixed when they were drawn, so the
/// result order does not depend on completion order.
fn evaluate_all(objective: &dyn Objective, points: Vec<Point>, spec: &OptimizerSpec) -> Vec<Trial> {
    map_indexed(points.len(), spec.jobs, |i| {
        evaluate_one(objective, i, points[i].clone(), spec.penalty)
    })
}

/// Seeded random draws: choice branches and disjuncts uniform, values by
/// domain. A space without dimensions is evaluated once at its only point.
pub fn random_search(
    ir: &SearchIr,
    objective: &dyn Objective,
    spec: &OptimizerSpec,
) -> Result<History, OptimizerError> {
    spec.check()?;
    let points = if ir.dimension_names().is_empty() {
        vec![ir.default_point()]
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        (0..spec.max_trials)
            .map(|_| sample_point(ir, &mut rng))
            .collect()
    };
    Ok(History::new(
        evaluate_all(objective, points, spec),
        spec.seed,
        space_digest(ir),
    ))
}

/// Every cell of the grid, in its enumeration order.
pub fn grid_search(
    grid: &DiscretizedGrid,
    digest: &str,
    objective: &dyn Objective,
    spec: &OptimizerSpec,
) -> Result<History, OptimizerError> {
    spec.check()?;
    let cells = grid.cell_count();
    if cells > spec.max_trials as u128 {
        return Err(OptimizerError::GridTooLarge {
            cells,
            limit: spec.max_trials,
        });
    }
    let points: Vec<Point> = grid.cells().collect();
    Ok(History::new(
        evaluate_all(objective, points, spec),
        spec.seed,
        digest.to_string(),
    ))
}

/// Epsilon-greedy over the branches of the top-level choice: with
/// probability epsilon a uniform branch, otherwise the branch with the
/// lowest running mean loss (untried branches first). Points inside the
/// branch are drawn as in [`random_search`]. Without a top-level choice
/// this is random search.
pub fn bandit_search(
    ir: &SearchIr,
    objective: &dyn Objective,
    spec: &OptimizerSpec,
) -> Result<History, OptimizerError> {
    spec.check()?;
    if spec.jobs > 1 {
        return Err(OptimizerError::BanditConcurrent);
    }
    let Some((_, branches)) = ir.root_choice() else {
        return random_search(ir, objective, spec);
    };
    let arms = branches.len();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut means = vec![0.0f64; arms];
    let mut counts = vec![0usize; arms];
    let mut trials = Vec::with_capacity(spec.max_trials);
    for index in 0..spec.max_trials {
        let explore = rng.random::<f64>() < spec.bandit_epsilon;
        let arm = if explore {
            rng.random_range(0..arms)
        } else if let Some(untried) = counts.iter().position(|&c| c == 0) {
            untried
        } else {
            (0..arms)
                .min_by(|&a, &b| means[a].total_cmp(&means[b]).then(a.cmp(&b)))
                .expect("at least two branches")
        };
        let point = sample_point_in_branch(ir, &mut rng, arm);
        let trial = evaluate_one(objective, index, point, spec.penalty);
        counts[arm] += 1;
        // Incremental mean keeps penalty losses finite.
        means[arm] += (trial.loss - means[arm]) / counts[arm] as f64;
        trials.push(trial);
    }
    Ok(History::new(trials, spec.seed, space_digest(ir)))
}

/// Runs the strategy named in `spec`.
pub fn run_search(
    ir: &SearchIr,
    objective: &dyn Objective,
    spec: &OptimizerSpec,
) -> Result<History, OptimizerError> {
    match spec.strategy {
        Strategy::Random => random_search(ir, objective, spec),
        Strategy::Bandit => bandit_search(ir, objective, spec),
        Strategy::Grid => {
            let grid = emit_grid(
                ir,
                spec.cont_samples,
                spec.seed,
                crate::normalize::DEFAULT_BLOWUP_LIMIT,
            )?;
            grid_search(&grid, &space_digest(ir), objective, spec)
        }
    }
}
