//! End-to-end acceptance checks. Each criterion prints one PASS or FAIL
//! line; the test fails if any criterion fails.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::Command;
use std::time::{Duration, Instant};

use common::iso::canonical;
use common::{from_words, invalid_steps, probe_configs, random_operator};
use lalec::dsl::{parse_expr, parse_grammar, pretty_print};
use lalec::grammar::{sample, unfold};
use lalec::normalize::{normalize, Domain};
use lalec::ops::{both, choose, pipe, Operator, Pipeline, Registry};
use lalec::optimizer::{
    bandit_search, make_cv_objective, random_search, run_search, History, OptimizerSpec, Outcome,
    Strategy, TrialStatus,
};
use lalec::schema::{declared_domains, parse_schema, Prior, PriorKind, Scalar, SchemaNode};
use lalec::space::pcs::{emit_pcs, parse_pcs, pcs_to_point};
use lalec::space::{
    combine, emit_flat, emit_grid, emit_hierarchical, sample_domain, CombineOptions, Point,
    SearchIr,
};
use lalec::toyml::{cross_val_score, synth_dataset, Dataset, SynthKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn registry() -> Registry {
    Registry::bundled()
}

fn expr(text: &str) -> Operator {
    parse_expr(text, &registry()).unwrap()
}

fn compile(text: &str, keep_constraints: bool) -> SearchIr {
    let options = CombineOptions {
        keep_constraints,
        ..CombineOptions::default()
    };
    combine(&expr(text), &options).unwrap()
}

fn schema(name: &str) -> SchemaNode {
    registry()
        .get(name)
        .unwrap()
        .as_individual()
        .unwrap()
        .schema()
        .clone()
}

fn within(start: Instant, limit: Duration, detail: String) -> Check {
    let spent = start.elapsed();
    ensure!(spent < limit, "{detail}; took {spent:?}, limit {limit:?}");
    Ok(detail)
}

fn running_example_rows() -> Vec<String> {
    let pca = ["pca__N:(0..1)", "pca__N:[mle]"];
    let branch = [
        "choice__D:[J48], choice__j48__R:[false], choice__j48__C:(0..0.5)",
        "choice__D:[J48], choice__j48__R:[true, false], choice__j48__C:[0.25]",
        "choice__D:[LR], choice__lr__S:[linear], choice__lr__P:[l1, l2]",
        "choice__D:[LR], choice__lr__S:[linear, sag, lbfgs], choice__lr__P:[l2]",
    ];
    let mut rows: Vec<String> = pca
        .iter()
        .flat_map(|p| branch.iter().map(move |b| format!("dict{{{p}, {b}}}")))
        .collect();
    rows.sort();
    rows
}

fn normal_form_exactness() -> Check {
    let start = Instant::now();
    let expected = [
        ("PCA", vec!["dict{N:(0..1)}", "dict{N:[mle]}"]),
        (
            "J48",
            vec![
                "dict{R:[false], C:(0..0.5)}",
                "dict{R:[true, false], C:[0.25]}",
            ],
        ),
        (
            "LR",
            vec![
                "dict{S:[linear, sag, lbfgs], P:[l2]}",
                "dict{S:[linear], P:[l1, l2]}",
            ],
        ),
    ];
    for (name, rows) in expected {
        let s = schema(name);
        let nf = normalize(&s, &declared_domains(&s).unwrap()).map_err(|e| e.to_string())?;
        let mut want: Vec<String> = rows.iter().map(|r| r.to_string()).collect();
        want.sort();
        ensure!(nf.canonical() == want, "{name}: got {nf}");
    }
    within(
        start,
        Duration::from_secs(1),
        "PCA, J48 and LR normal forms match".into(),
    )
}

fn normalizer_equivalence() -> Check {
    let start = Instant::now();
    let mut probes = 0;
    for name in ["PCA", "J48", "LR"] {
        let s = schema(name);
        let nf = normalize(&s, &declared_domains(&s).unwrap()).unwrap();
        for probe in probe_configs(&s) {
            probes += 1;
            let valid = lalec::schema::validate(&probe, &s).ok;
            ensure!(nf.member(&probe) == valid, "{name} disagrees on {probe:?}");
        }
    }
    within(
        start,
        Duration::from_secs(5),
        format!("{probes} probes agree"),
    )
}

fn ir_and_flat_backend() -> Check {
    let start = Instant::now();
    let ir = compile("PCA >> (J48 | LR)", true);
    let SearchIr::Steps { steps, .. } = &ir else {
        return Err("top level is not a step map".into());
    };
    let shape: Vec<String> = steps
        .values()
        .map(|s| match s {
            SearchIr::Leaf(l) => format!("leaf:{}", l.nf.disjuncts.len()),
            SearchIr::Choice { branches, .. } => {
                let parts: Vec<String> = branches
                    .iter()
                    .map(|b| match &b.body {
                        SearchIr::Leaf(l) => format!("{}:{}", b.value, l.nf.disjuncts.len()),
                        _ => format!("{}:?", b.value),
                    })
                    .collect();
                format!("choice[{}]", parts.join(","))
            }
            SearchIr::Steps { .. } => "steps".into(),
        })
        .collect();
    ensure!(
        shape == ["leaf:2", "choice[J48:2,LR:2]"],
        "IR shape {shape:?}"
    );
    let mut rows: Vec<String> = emit_flat(&ir, 100)
        .unwrap()
        .iter()
        .map(|d| d.to_string())
        .collect();
    rows.sort();
    ensure!(rows == running_example_rows(), "flat rows {rows:#?}");
    within(
        start,
        Duration::from_secs(1),
        "IR shape and 8 flat rows match".into(),
    )
}

fn pcs_round_trip() -> Check {
    let ir = compile("PCA >> (J48 | LR)", true);
    let text = emit_pcs(&ir, 1000).unwrap();
    let pcs = parse_pcs(&text).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut j48 = 0;
    for _ in 0..1000 {
        let point = pcs_to_point(&pcs.sample(&mut rng).map_err(|e| e.to_string())?);
        let op = ir.decode(&point).map_err(|e| format!("{point:?}: {e}"))?;
        let bad = invalid_steps(&op);
        ensure!(bad.is_empty(), "{point:?} fails validation in {bad:?}");
        let is_j48 = point["choice__D"] == Scalar::str("J48");
        let active = point.keys().any(|k| k.starts_with("choice__j48__"));
        ensure!(
            is_j48 == active,
            "J48 parameters active={active} with D={}",
            point["choice__D"]
        );
        j48 += usize::from(is_j48);
    }
    Ok(format!(
        "1000 samples valid, {j48} with J48 parameters active"
    ))
}

fn grid_structure() -> Check {
    let ir = compile("PCA >> (J48 | LR)", true);
    let flat = emit_flat(&ir, 100).unwrap();
    for seed in 0..5 {
        let grid = emit_grid(&ir, 1, seed, 10_000).unwrap();
        ensure!(
            grid.disjuncts.len() == 8,
            "{} disjuncts",
            grid.disjuncts.len()
        );
        let mut count: u128 = 0;
        for (row, d) in grid.disjuncts.iter().zip(&flat) {
            let mut cells: u128 = 1;
            for (name, domain) in &d.params {
                let values = &row[name];
                if let Domain::Cont { default, .. } = domain {
                    if !domain.is_degenerate() {
                        ensure!(values.len() == 2, "{name} has {} values", values.len());
                        let dflt = Scalar::Number(default.unwrap());
                        ensure!(values.contains(&dflt), "{name} lacks its default");
                    }
                }
                cells *= values.len() as u128;
            }
            count += cells;
        }
        ensure!(
            grid.cell_count() == count,
            "cell count {} vs {count}",
            grid.cell_count()
        );
    }
    Ok("8 disjuncts, two values per continuous domain, count law holds".into())
}

fn early_error_check() -> Check {
    let start = Instant::now();
    let out = Command::new(env!("CARGO_BIN_EXE_lalec"))
        .args([
            "validate",
            "--op",
            "LR",
            "--config",
            r#"{"S": "sag", "P": "l1"}"#,
        ])
        .output()
        .map_err(|e| e.to_string())?;
    let spent = start.elapsed();
    let text = format!(
        "{}{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    ensure!(!out.status.success(), "exit status {}", out.status);
    ensure!(
        text.contains("constraintViolated"),
        "no constraint violation in output: {text}"
    );
    ensure!(
        text.contains("only support penalty l2"),
        "constraint message missing: {text}"
    );
    ensure!(spent < Duration::from_millis(100), "took {spent:?}");
    Ok(format!("exit code {:?} in {spent:?}", out.status.code()))
}

const ABLATION: &str = "Scaler >> (PrunedTree | LogRegGD | KNN)";

fn constrained_guarantee() -> Check {
    let data = synth_dataset(SynthKind::Blobs, 120, 0).unwrap();
    let ir = compile(ABLATION, true);
    let objective = make_cv_objective(ir.clone(), data, 3, 0);
    let mut total = 0;
    for seed in 0..5 {
        let spec = OptimizerSpec {
            max_trials: 500,
            seed,
            jobs: 4,
            ..OptimizerSpec::default()
        };
        let h = random_search(&ir, &objective, &spec).map_err(|e| e.to_string())?;
        ensure!(
            h.invalid_count() == 0,
            "seed {seed}: {} failed trials",
            h.invalid_count()
        );
        total += h.trials.len();
    }
    Ok(format!("{total} trials, none invalid"))
}

fn tree_share(h: &History) -> f64 {
    let late = &h.trials[100..];
    let tree = late
        .iter()
        .filter(|t| t.point.get("choice__D") == Some(&Scalar::str("PrunedTree")))
        .count();
    tree as f64 / late.len() as f64
}

fn ablation() -> Check {
    let start = Instant::now();
    let data = synth_dataset(SynthKind::Blobs, 120, 0).unwrap();
    let constrained = compile(ABLATION, true);
    let unconstrained = compile(ABLATION, false);
    let c_obj = make_cv_objective(constrained.clone(), data.clone(), 3, 0);
    let u_obj = make_cv_objective(unconstrained.clone(), data, 3, 0);
    let (mut share_wins, mut loss_wins) = (0, 0);
    let mut lines = Vec::new();
    for seed in 0..5 {
        let spec = OptimizerSpec {
            strategy: Strategy::Bandit,
            max_trials: 200,
            seed,
            ..OptimizerSpec::default()
        };
        let c = bandit_search(&constrained, &c_obj, &spec).map_err(|e| e.to_string())?;
        let u = bandit_search(&unconstrained, &u_obj, &spec).map_err(|e| e.to_string())?;
        ensure!(
            u.invalid_count() >= 1,
            "seed {seed}: unconstrained run had no failed trial"
        );
        let (cs, us) = (tree_share(&c), tree_share(&u));
        share_wins += usize::from(us < cs);
        let (cl, ul) = (
            c.best_loss().unwrap_or(f64::MAX),
            u.best_loss().unwrap_or(f64::MAX),
        );
        loss_wins += usize::from(cl <= ul);
        lines.push(format!(
            "seed {seed}: failed {}, tree share {cs:.2}/{us:.2}, best {cl:.3}/{ul:.3}",
            u.invalid_count()
        ));
    }
    let detail = format!(
        "share {share_wins}/5, loss {loss_wins}/5 [{}]",
        lines.join("; ")
    );
    ensure!(share_wins >= 4 && loss_wins >= 4, "{detail}");
    within(start, Duration::from_secs(180), detail)
}

const ALPHAD3M_LIKE: &str = "
start := est | clean >> est | tfm >> est | clean >> tfm >> est;
clean := clean1 >> clean | clean1;
tfm := tfm1 >> tfm | tfm1;
clean1 := MinMaxScaler | StandardScaler;
tfm1 := PCA | SelectKVariance;
est := KNN | LR | J48;
";

const CLEANERS: [&str; 2] = ["MinMaxScaler", "StandardScaler"];
const TRANSFORMERS: [&str; 2] = ["PCA", "SelectKVariance"];
const ESTIMATORS: [&str; 3] = ["KNN", "LR", "J48"];

fn instances(op: &Operator) -> Vec<Operator> {
    match op {
        Operator::Individual(_) => vec![op.clone()],
        Operator::Choice(c) => c.alternatives().iter().flat_map(instances).collect(),
        Operator::Pipeline(p) => {
            let mut partial: Vec<Vec<Operator>> = vec![Vec::new()];
            for step in p.steps() {
                let options = instances(step);
                partial = partial
                    .into_iter()
                    .flat_map(|prefix| {
                        options.iter().map(move |o| {
                            let mut next = prefix.clone();
                            next.push(o.clone());
                            next
                        })
                    })
                    .collect();
            }
            partial
                .into_iter()
                .map(|steps| Operator::Pipeline(Pipeline::new(steps, p.edges().to_vec()).unwrap()))
                .collect()
        }
    }
}

fn chain(op: &Operator) -> Option<Vec<String>> {
    match op {
        Operator::Individual(i) => Some(vec![i.name().to_string()]),
        Operator::Pipeline(p) => {
            let order = p.topological_order()?;
            let linear: BTreeSet<(usize, usize)> = order.windows(2).map(|w| (w[0], w[1])).collect();
            let actual: BTreeSet<(usize, usize)> = p.edges().iter().copied().collect();
            (linear == actual).then(|| {
                order
                    .iter()
                    .map(|&i| p.steps()[i].name().to_string())
                    .collect()
            })
        }
        Operator::Choice(_) => None,
    }
}

/// Cleaners, then transformers, then one estimator.
fn is_derivation(names: &[String]) -> bool {
    let Some((est, front)) = names.split_last() else {
        return false;
    };
    let cleaners = front
        .iter()
        .take_while(|n| CLEANERS.contains(&n.as_str()))
        .count();
    ESTIMATORS.contains(&est.as_str())
        && front[cleaners..]
            .iter()
            .all(|n| TRANSFORMERS.contains(&n.as_str()))
}

fn words_over(alphabet: &[&str], max_len: usize) -> Vec<Vec<String>> {
    let mut out = vec![Vec::new()];
    let mut layer: Vec<Vec<String>> = vec![Vec::new()];
    for _ in 0..max_len {
        layer = layer
            .iter()
            .flat_map(|w| {
                alphabet.iter().map(move |a| {
                    let mut next = w.clone();
                    next.push(a.to_string());
                    next
                })
            })
            .collect();
        out.extend(layer.clone());
    }
    out
}

fn grammar_engine() -> Check {
    let start = Instant::now();
    let g = parse_grammar(ALPHAD3M_LIKE, &registry()).map_err(|e| e.to_string())?;
    let unfolded = unfold(&g, 3).map_err(|e| e.to_string())?;
    let text = pretty_print(&unfolded).map_err(|e| e.to_string())?;
    // Re-parsing as a plain expression fails on any leftover nonterminal.
    parse_expr(&text, &registry())
        .map_err(|e| format!("unfolded text is not a plain expression: {e}"))?;
    let chains = |op: &Operator| -> Result<BTreeSet<Vec<String>>, String> {
        instances(op)
            .iter()
            .map(|i| chain(i).ok_or("non-linear instance".to_string()))
            .collect()
    };
    let depth3 = chains(&unfolded)?;
    let mut required = 0;
    for cleaners in words_over(&CLEANERS, 2) {
        for transformers in words_over(&TRANSFORMERS, 2) {
            for est in ESTIMATORS {
                let mut topology = cleaners.clone();
                topology.extend(transformers.iter().cloned());
                topology.push(est.to_string());
                ensure!(depth3.contains(&topology), "depth 3 misses {topology:?}");
                required += 1;
            }
        }
    }
    ensure!(
        depth3.iter().all(|c| is_derivation(c)),
        "depth 3 admits a non-derivation"
    );
    for seed in 0..100 {
        let op = sample(&g, seed, 3).map_err(|e| e.to_string())?;
        let names = chain(&op).ok_or("sampled a non-linear pipeline")?;
        ensure!(is_derivation(&names), "seed {seed} sampled {names:?}");
    }
    let depth2 = chains(&unfold(&g, 2).map_err(|e| e.to_string())?)?;
    ensure!(
        depth2.is_subset(&depth3),
        "depth 2 is not contained in depth 3"
    );
    within(
        start,
        Duration::from_secs(10),
        format!(
            "{required} required topologies admitted, {} at depth 3, {} at depth 2",
            depth3.len(),
            depth2.len()
        ),
    )
}

fn higher_order_search() -> Check {
    let text = "(MinMaxScaler | StandardScaler) >> BoostedEnsemble(base_estimator=PrunedTree)";
    let ir = compile(text, true);
    let names = ir.dimension_names();
    let nested: Vec<&String> = names
        .iter()
        .filter(|n| n.contains("base_estimator__prunedtree__"))
        .collect();
    ensure!(!nested.is_empty(), "no nested tree dimensions in {names:?}");
    let default = expr("BoostedEnsemble()");
    let mut wins = 0;
    let mut lines = Vec::new();
    for seed in 0..5 {
        let data: Dataset = synth_dataset(SynthKind::Xor, 150, seed).unwrap();
        let baseline = cross_val_score(&default, &data, 3, seed).map_err(|e| e.to_string())?;
        let objective = make_cv_objective(ir.clone(), data, 3, seed);
        let spec = OptimizerSpec {
            max_trials: 50,
            seed,
            jobs: 4,
            ..OptimizerSpec::default()
        };
        let h = random_search(&ir, &objective, &spec).map_err(|e| e.to_string())?;
        let best = 1.0 - h.best_loss().ok_or("no valid trial")?;
        wins += usize::from(best > baseline);
        lines.push(format!("{best:.3} vs {baseline:.3}"));
    }
    let detail = format!(
        "{} nested dimensions; searched beats default in {wins}/5 [{}]",
        nested.len(),
        lines.join(", ")
    );
    ensure!(wins >= 3, "{detail}");
    Ok(detail)
}

fn random_op(rng: &mut ChaCha8Rng, depth: u32) -> Operator {
    let words: Vec<u32> = (0..64).map(|_| rng.random()).collect();
    let mut next = from_words(&words);
    random_operator(&registry(), depth, &mut next)
}

fn sorted_flat(op: &Operator) -> Vec<String> {
    let ir = combine(op, &CombineOptions::default()).unwrap();
    let mut rows: Vec<String> = emit_flat(&ir, 100_000)
        .unwrap()
        .iter()
        .map(|d| d.to_string())
        .collect();
    rows.sort();
    rows
}

fn property_suite() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..50 {
        let (a, b, c) = (
            random_op(&mut rng, 2),
            random_op(&mut rng, 2),
            random_op(&mut rng, 2),
        );
        let (a0, b0) = (a.clone(), b.clone());
        ensure!(
            canonical(&pipe(&pipe(&a, &b), &c)) == canonical(&pipe(&a, &pipe(&b, &c))),
            ">> is not associative"
        );
        ensure!(
            canonical(&both(&both(&a, &b), &c)) == canonical(&both(&a, &both(&b, &c))),
            "& is not associative"
        );
        ensure!(a == a0 && b == b0, "a combinator mutated its operands");
        let nested = choose(vec![a.clone(), choose(vec![b.clone(), c.clone()]).unwrap()]).unwrap();
        let flat = choose(vec![a.clone(), b.clone(), c.clone()]).unwrap();
        ensure!(
            sorted_flat(&nested) == sorted_flat(&flat),
            "flattening changed the flat space"
        );
        let (ni, fi) = (
            combine(&nested, &CombineOptions::default()).unwrap(),
            combine(&flat, &CombineOptions::default()).unwrap(),
        );
        ensure!(
            emit_hierarchical(&ni) == emit_hierarchical(&fi),
            "flattening changed the hierarchical space"
        );
    }
    for i in 0..200 {
        let original = random_op(&mut rng, 4);
        let text = pretty_print(&original).map_err(|e| e.to_string())?;
        let back =
            parse_expr(&text, &registry()).map_err(|e| format!("pipeline {i}: {text}: {e}"))?;
        ensure!(
            canonical(&back) == canonical(&original),
            "round trip changed {text}"
        );
    }
    let ir = compile("StandardScaler >> (J48 | LR | KNN)", true);
    let objective = |p: &Point| match p.get("choice__D").and_then(Scalar::as_str) {
        Some("KNN") => Outcome::Loss(0.1),
        Some("LR") => Outcome::Loss(0.2),
        _ => Outcome::RuntimeError("trap".into()),
    };
    for strategy in [Strategy::Random, Strategy::Bandit, Strategy::Grid] {
        let spec = OptimizerSpec {
            strategy,
            max_trials: 1000,
            seed: 5,
            ..OptimizerSpec::default()
        };
        let once = run_search(&ir, &objective, &spec).map_err(|e| e.to_string())?;
        let twice = run_search(&ir, &objective, &spec).map_err(|e| e.to_string())?;
        ensure!(
            once.to_json(false) == twice.to_json(false),
            "{strategy:?} history is not deterministic"
        );
        ensure!(
            once.count_status(TrialStatus::Valid) > 0,
            "{strategy:?} found nothing"
        );
    }
    let domain = Domain::Cont {
        lo: 1.0,
        hi: 1000.0,
        lo_open: false,
        hi_open: false,
        integer: false,
        prior: Prior {
            kind: PriorKind::LogUniform,
            ..Prior::default()
        },
        default: None,
    };
    let mut draws: Vec<f64> = (0..10_000)
        .filter_map(|_| sample_domain(&domain, &mut rng).as_f64())
        .collect();
    draws.sort_by(f64::total_cmp);
    let median = draws[draws.len() / 2];
    ensure!(
        (20.0..=50.0).contains(&median),
        "loguniform median {median}"
    );
    // The bundled documents also round-trip through their serialization.
    for (name, text) in lalec::ops::BUNDLED_SCHEMAS {
        let parsed = parse_schema(text).unwrap();
        ensure!(
            parse_schema(&parsed.to_json().to_string()).unwrap() == parsed,
            "{name} does not round-trip"
        );
    }
    Ok(format!(
        "algebra laws, 200 round trips, deterministic histories, loguniform median {median:.1}"
    ))
}

// Runs without the libtest harness so the per-criterion lines are never captured.
fn main() {
    let criteria: [Criterion; 11] = [
        ("normal-form exactness", normal_form_exactness),
        ("normalizer equivalence oracle", normalizer_equivalence),
        ("IR and flat backend", ir_and_flat_backend),
        ("PCS round-trip", pcs_round_trip),
        ("grid structure", grid_structure),
        ("early error check", early_error_check),
        ("constrained-search guarantee", constrained_guarantee),
        ("constraint ablation", ablation),
        ("grammar engine", grammar_engine),
        ("higher-order search", higher_order_search),
        ("algebra and property suite", property_suite),
    ];
    let mut failed = Vec::new();
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|panic| {
            let message = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {message}"))
        });
        let spent = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("PASS {:>2} {name} ({spent:.2}s): {detail}", i + 1),
            Err(detail) => {
                println!("FAIL {:>2} {name} ({spent:.2}s): {detail}", i + 1);
                failed.push(i + 1);
            }
        }
    }
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
    println!("all {} criteria passed", criteria.len());
}
