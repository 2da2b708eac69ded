mod common;

use std::collections::BTreeSet;

use common::iso::{canonical, isomorphic};
use common::{from_words, random_operator};
use lalec::dsl::{parse_expr, pretty_print};
use lalec::ops::{both, choose, fit, pipe, predict, LifecycleState, OpError, Operator, Registry};
use lalec::schema::{config, parse_schema, NodeKind, SchemaNode};
use lalec::space::{combine, emit_flat, emit_hierarchical, CombineOptions};
use lalec::toyml::{synth_dataset, Matrix, SynthKind};
use proptest::prelude::*;

fn registry() -> Registry {
    Registry::bundled()
}

fn op(name: &str) -> Operator {
    registry().get(name).unwrap().clone()
}

fn words() -> impl Strategy<Value = Vec<u32>> {
    prop::collection::vec(any::<u32>(), 64)
}

fn build(words: &[u32], depth: u32) -> Operator {
    random_operator(&registry(), depth, &mut from_words(words))
}

fn edges(o: &Operator) -> BTreeSet<(usize, usize)> {
    match o {
        Operator::Pipeline(p) => p.edges().iter().copied().collect(),
        _ => BTreeSet::new(),
    }
}

#[test]
fn union_then_concat_matches_hand_built_graph() {
    let union = both(&op("PCA"), &op("KNN"));
    let p = pipe(&union, &pipe(&op("Concat"), &op("SVM")));
    let Operator::Pipeline(inner) = &p else {
        panic!("expected a pipeline")
    };
    assert_eq!(inner.steps().len(), 4);
    assert_eq!(edges(&p), BTreeSet::from([(0, 2), (1, 2), (2, 3)]));
}

#[test]
fn choice_flattening_and_arity() {
    let nested = choose(vec![op("PCA"), choose(vec![op("KNN"), op("LR")]).unwrap()]).unwrap();
    let Operator::Choice(c) = &nested else {
        panic!("expected a choice")
    };
    assert_eq!(c.alternatives().len(), 3);
    assert!(matches!(
        choose(vec![op("PCA")]),
        Err(OpError::TooFewAlternatives)
    ));
}

#[test]
fn state_is_the_meet_of_the_steps() {
    let data = synth_dataset(SynthKind::Blobs, 40, 0).unwrap();
    let trained = fit(
        &op("StandardScaler").configure(&Default::default()).unwrap(),
        &data,
    )
    .unwrap();
    assert_eq!(pipe(&trained, &op("SVM")).state(), LifecycleState::Planned);
    let trainable = op("KNN").configure(&Default::default()).unwrap();
    assert_eq!(
        pipe(&trainable, &trainable).state(),
        LifecycleState::Trainable
    );
    assert_eq!(
        choose(vec![trainable.clone(), trainable.clone()])
            .unwrap()
            .state(),
        LifecycleState::Trainable
    );
}

#[test]
fn configure_examples() {
    let svm = op("SVM")
        .configure(&config([
            ("dual", lalec::schema::ConfigValue::from(false)),
            ("tol", 0.0001.into()),
        ]))
        .unwrap();
    assert_eq!(svm.state(), LifecycleState::Trainable);
    assert_eq!(svm.as_individual().unwrap().bound().len(), 2);
    let err = op("LR")
        .configure(&config([("S", "sag"), ("P", "l1")]))
        .unwrap_err();
    assert!(matches!(err, OpError::ValidationFailed { .. }));
    let knn = op("KNN").configure(&config([("k", 3.0)])).unwrap();
    assert_eq!(knn.configure(&Default::default()).unwrap(), knn);
}

#[test]
fn freezing() {
    let pca = op("PCA")
        .configure(&config([("N", 0.4)]))
        .unwrap()
        .freeze_trainable()
        .unwrap();
    let p = pipe(&pca, &op("SVM"));
    let names = combine(&p, &CombineOptions::default())
        .unwrap()
        .dimension_names();
    let svm_only = combine(
        &pipe(
            &op("NoOp")
                .configure(&Default::default())
                .unwrap()
                .freeze_trainable()
                .unwrap(),
            &op("SVM"),
        ),
        &CombineOptions::default(),
    )
    .unwrap()
    .dimension_names();
    let strip = |s: &BTreeSet<String>| -> BTreeSet<String> {
        s.iter()
            .map(|k| k.rsplit("__").next().unwrap().to_string())
            .collect()
    };
    assert_eq!(strip(&names), strip(&svm_only));
    assert!(names.iter().all(|k| k.starts_with("svm__")));

    let data = synth_dataset(SynthKind::Blobs, 30, 0).unwrap();
    let t = fit(&op("KNN").configure(&Default::default()).unwrap(), &data).unwrap();
    let frozen = t.freeze_trained().unwrap();
    let other = synth_dataset(SynthKind::Xor, 30, 5).unwrap();
    let refit = fit(&frozen, &other);
    // Fitting a frozen trained operator is the identity, whatever the data.
    assert_eq!(refit.unwrap(), frozen);
    assert!(matches!(
        op("KNN").freeze_trained(),
        Err(OpError::NotTrained(_))
    ));
}

#[test]
fn customize_schema_variants() {
    let grove_n = SchemaNode::integer_range(2.0, 6.0).with_default(4.0);
    let mut overrides = indexmap::IndexMap::new();
    overrides.insert("n_estimators".to_string(), grove_n.clone());
    let grove = op("BoostedEnsemble")
        .customize_schema(&overrides, Some("Grove"))
        .unwrap();
    assert_eq!(grove.name(), "Grove");
    let declared =
        lalec::schema::declared_domains(grove.as_individual().unwrap().schema()).unwrap();
    assert_eq!(declared["n_estimators"].kind, grove_n.kind);

    let mut single = indexmap::IndexMap::new();
    single.insert(
        "weighting".to_string(),
        SchemaNode::enumeration(["uniform"]).with_default("uniform"),
    );
    let knn = op("KNN").customize_schema(&single, None).unwrap();
    let d = lalec::schema::declared_domains(knn.as_individual().unwrap().schema()).unwrap();
    assert!(matches!(&d["weighting"].kind, NodeKind::Enum(v) if v.len() == 1));

    assert_eq!(
        op("KNN")
            .customize_schema(&Default::default(), None)
            .unwrap(),
        op("KNN")
    );
    let mut unknown = indexmap::IndexMap::new();
    unknown.insert("nope".to_string(), SchemaNode::range(0.0, 1.0));
    assert!(matches!(
        op("KNN").customize_schema(&unknown, None),
        Err(OpError::UnknownProperty { .. })
    ));
}

#[test]
fn scaler_then_knn_reproduces_training_labels() {
    let data = synth_dataset(SynthKind::Xor, 60, 3).unwrap();
    let p = parse_expr("StandardScaler() >> KNN(k=1)", &registry()).unwrap();
    let trained = fit(&p, &data).unwrap();
    let predicted = predict(&trained, &data.features)
        .unwrap()
        .to_labels()
        .unwrap();
    assert_eq!(predicted, data.labels);
    assert!(matches!(
        fit(&parse_expr("KNN | LR", &registry()).unwrap(), &data),
        Err(OpError::UnresolvedChoice)
    ));
}

#[test]
fn noop_is_identity() {
    let data = synth_dataset(SynthKind::Blobs, 20, 0).unwrap();
    let t = fit(&op("NoOp").configure(&Default::default()).unwrap(), &data).unwrap();
    let out: Matrix = predict(&t, &data.features).unwrap();
    assert_eq!(out, data.features);
}

#[test]
fn schema_documents_round_trip() {
    for (name, text) in lalec::ops::BUNDLED_SCHEMAS {
        let parsed = parse_schema(text).unwrap();
        let again = parse_schema(&parsed.to_json().to_string()).unwrap();
        assert_eq!(parsed, again, "{name}");
    }
}

fn sorted_flat(o: &Operator) -> Vec<String> {
    let ir = combine(o, &CombineOptions::default()).unwrap();
    let mut rows: Vec<String> = emit_flat(&ir, 10_000)
        .unwrap()
        .iter()
        .map(|d| d.to_string())
        .collect();
    rows.sort();
    rows
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pipe_and_both_are_associative(a in words(), b in words(), c in words()) {
        let (a, b, c) = (build(&a, 2), build(&b, 2), build(&c, 2));
        prop_assert!(isomorphic(&pipe(&pipe(&a, &b), &c), &pipe(&a, &pipe(&b, &c))));
        prop_assert!(isomorphic(&both(&both(&a, &b), &c), &both(&a, &both(&b, &c))));
        prop_assert!(isomorphic(&both(&a, &b), &both(&b, &a)));
    }

    #[test]
    fn combinators_do_not_mutate(a in words(), b in words()) {
        let (a, b) = (build(&a, 2), build(&b, 2));
        let (a0, b0) = (a.clone(), b.clone());
        let _ = pipe(&a, &b);
        let _ = both(&a, &b);
        let _ = choose(vec![a.clone(), b.clone()]);
        let _ = a.configure(&Default::default());
        let _ = combine(&a, &CombineOptions::default());
        prop_assert_eq!(a, a0);
        prop_assert_eq!(b, b0);
    }

    #[test]
    fn graphs_stay_acyclic(a in words(), b in words()) {
        let p = pipe(&build(&a, 3), &build(&b, 3));
        if let Operator::Pipeline(p) = &p {
            prop_assert_eq!(p.topological_order().map(|o| o.len()), Some(p.steps().len()));
        }
    }

    #[test]
    fn sinks_of_a_union(a in words(), b in words()) {
        let (a, b) = (build(&a, 2), build(&b, 2));
        let count = |o: &Operator| match o {
            Operator::Pipeline(p) => p.sinks().len(),
            _ => 1,
        };
        let Operator::Pipeline(u) = both(&a, &b) else { unreachable!("both builds a pipeline") };
        prop_assert_eq!(u.sinks().len(), count(&a) + count(&b));
    }

    #[test]
    fn flattening_preserves_the_space(a in words(), b in words(), c in words()) {
        let (a, b, c) = (build(&a, 1), build(&b, 1), build(&c, 1));
        let left = choose(vec![a.clone(), choose(vec![b.clone(), c.clone()]).unwrap()]).unwrap();
        let right = choose(vec![choose(vec![a.clone(), b.clone()]).unwrap(), c.clone()]).unwrap();
        let flat = choose(vec![a, b, c]).unwrap();
        prop_assert_eq!(sorted_flat(&left), sorted_flat(&flat));
        prop_assert_eq!(sorted_flat(&right), sorted_flat(&flat));
        let l = combine(&left, &CombineOptions::default()).unwrap();
        let f = combine(&flat, &CombineOptions::default()).unwrap();
        prop_assert_eq!(emit_hierarchical(&l), emit_hierarchical(&f));
    }

    #[test]
    fn print_parse_round_trip(w in words()) {
        let original = build(&w, 4);
        let text = pretty_print(&original).unwrap();
        let reparsed = parse_expr(&text, &registry()).unwrap();
        prop_assert_eq!(canonical(&reparsed), canonical(&original), "text: {}", text);
    }

    #[test]
    fn parser_never_panics(text in "[A-Za-z()|&>=,\" 0-9._#\n-]{0,40}") {
        let _ = parse_expr(&text, &registry());
    }
}
