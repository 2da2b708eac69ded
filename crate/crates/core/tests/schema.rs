mod common;

use common::probe_configs;
use lalec::ops::BUNDLED_SCHEMAS;
use lalec::schema::{
    config, declared_domains, default_config, parse_schema, validate, ConfigValue, NodeKind,
    Scalar, SchemaNode, ViolationKind,
};

fn bundled(name: &str) -> SchemaNode {
    let text = BUNDLED_SCHEMAS.iter().find(|(n, _)| *n == name).unwrap().1;
    parse_schema(text).unwrap()
}

#[test]
fn lr_document_shape() {
    let lr = bundled("LR");
    let NodeKind::AllOf(parts) = &lr.kind else {
        panic!("expected allOf")
    };
    assert_eq!(parts.len(), 2);
    assert!(parts[0].as_object().is_some());
    let NodeKind::AnyOf(alts) = &parts[1].kind else {
        panic!("expected anyOf")
    };
    assert!(alts.iter().any(|a| matches!(a.kind, NodeKind::Not(_))));
}

#[test]
fn keyword_schemas() {
    let mle = parse_schema(r#"{"enum": ["mle"]}"#).unwrap();
    assert_eq!(mle.kind, NodeKind::Enum(vec![Scalar::str("mle")]));
    let open = parse_schema(
        r#"{"type":"number","minimum":0,"maximum":1,"exclusiveMinimum":true,"exclusiveMaximum":true}"#,
    )
    .unwrap();
    let NodeKind::Range(r) = open.kind else {
        panic!("expected a range")
    };
    assert_eq!((r.lo, r.hi, r.lo_open, r.hi_open), (0.0, 1.0, true, true));
}

#[test]
fn validation_examples() {
    let lr = bundled("LR");
    let report = validate(&config([("S", "sag"), ("P", "l1")]), &lr);
    assert!(!report.ok);
    assert_eq!(report.violations[0].kind, ViolationKind::ConstraintViolated);
    assert!(report.violations[0]
        .constraint_description
        .contains("only support penalty l2"));
    assert!(validate(&config([("S", "linear"), ("P", "l1")]), &lr).ok);

    let j48 = bundled("J48");
    assert!(
        !validate(
            &config([
                ("R", ConfigValue::from(true)),
                ("C", ConfigValue::from(0.3))
            ]),
            &j48
        )
        .ok
    );
    for (name, _) in BUNDLED_SCHEMAS {
        assert!(validate(&Default::default(), &bundled(name)).ok, "{name}");
    }
    let unknown = validate(&config([("Q", 1.0)]), &lr);
    assert_eq!(unknown.violations[0].kind, ViolationKind::UnknownName);
    let wrong_type = validate(&config([("C", "high")]), &j48);
    assert!(!wrong_type.ok);
}

#[test]
fn defaults_and_declared_domains() {
    let j48 = bundled("J48");
    assert_eq!(
        default_config(&j48).unwrap(),
        config([
            ("R", ConfigValue::from(false)),
            ("C", ConfigValue::from(0.25))
        ])
    );
    assert_eq!(
        default_config(&bundled("LR")).unwrap(),
        config([("S", "linear"), ("P", "l2")])
    );
    for (name, _) in BUNDLED_SCHEMAS {
        let s = bundled(name);
        assert!(validate(&default_config(&s).unwrap(), &s).ok, "{name}");
    }
    let declared = declared_domains(&j48).unwrap();
    assert!(matches!(&declared["R"].kind, NodeKind::Enum(v) if v.len() == 2));
    assert!(matches!(&declared["C"].kind, NodeKind::Range(r) if r.lo == 0.0 && r.hi == 0.5));
}

#[test]
fn singleton_conjunction_and_purity() {
    for (name, _) in BUNDLED_SCHEMAS {
        let s = bundled(name);
        let wrapped = SchemaNode::new(NodeKind::AllOf(vec![s.clone()]));
        for probe in probe_configs(&s) {
            let direct = validate(&probe, &s);
            assert_eq!(direct.ok, validate(&probe, &wrapped).ok, "{name} {probe:?}");
            assert_eq!(direct, validate(&probe, &s));
        }
    }
}
