use std::collections::HashSet;
use std::io::Cursor;

use crowdwise::persona::*;
use proptest::prelude::*;

#[test]
fn table_cardinality_matches_option_product() {
    let space = build_attribute_space();
    assert_eq!(space.len(), 18);
    let counts: Vec<u128> = space.attributes().iter().map(|a| a.options.len() as u128).collect();
    // Age spans 18..=80
    assert_eq!(counts[0], 63);
    assert_eq!(space.cardinality(), counts.iter().product::<u128>());
    assert_eq!(space.cardinality(), 3_950_456_832_000);
}

#[test]
fn hundred_thousand_distinct_ids() {
    let space = build_attribute_space();
    let personas = sample_personas(&space, 100_000, 9, &default_rules()).unwrap();
    let ids: HashSet<&str> = personas.iter().map(|p| p.persona_id.as_str()).collect();
    assert_eq!(ids.len(), 100_000);
}

#[test]
fn jsonl_round_trip() {
    let space = build_attribute_space();
    let personas = sample_personas(&space, 500, 3, &default_rules()).unwrap();
    let mut buf = Vec::new();
    write_personas(&mut buf, &personas).unwrap();
    let back = read_personas(Cursor::new(buf), &space).unwrap();
    assert_eq!(back, personas);
}

#[test]
fn tampered_id_is_rejected() {
    let space = build_attribute_space();
    let personas = sample_personas(&space, 2, 3, &[]).unwrap();
    let mut buf = Vec::new();
    write_personas(&mut buf, &personas).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let bad = text.replacen(&personas[0].persona_id, "0000000000000000", 1);
    assert!(read_personas(Cursor::new(bad), &space).is_err());
}

#[test]
fn impossible_rules_exhaust() {
    let space = build_attribute_space();
    let rule = ConsistencyRule::min_age("nobody", GENDER, "Male", 200);
    let rules: Vec<ConsistencyRule> = space
        .attribute(GENDER)
        .unwrap()
        .options
        .iter()
        .map(|g| ConsistencyRule { conflict_value: g.clone(), ..rule.clone() })
        .collect();
    let err = sample_personas(&space, 5, 1, &rules).unwrap_err();
    assert!(matches!(err, PersonaError::SamplingExhausted { requested: 5, found: 0, attempts: 500 }));
}

#[test]
fn rules_load_from_json() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("rules.json");
    std::fs::write(&path, serde_json::to_string(&default_rules()).unwrap()).unwrap();
    assert_eq!(read_rules(&path).unwrap(), default_rules());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn sampled_personas_are_valid_and_reproducible(seed in any::<u64>(), n in 1usize..300) {
        let space = build_attribute_space();
        let rules = default_rules();
        let a = sample_personas(&space, n, seed, &rules).unwrap();
        let b = sample_personas(&space, n, seed, &rules).unwrap();
        prop_assert_eq!(&a, &b);
        for p in &a {
            prop_assert!(space.validate(p).is_ok());
            prop_assert!(check_consistency(p, &rules).is_empty());
            prop_assert_eq!(&p.persona_id, &persona_id(&p.values));
        }
    }

    #[test]
    fn text_round_trip(seed in any::<u64>()) {
        let space = build_attribute_space();
        let p = &sample_personas(&space, 1, seed, &[]).unwrap()[0];
        let back = parse_persona(&serialize_persona(p), &space).unwrap();
        prop_assert_eq!(&back, p);
    }

    #[test]
    fn id_ignores_attribute_order(seed in any::<u64>()) {
        let space = build_attribute_space();
        let p = &sample_personas(&space, 1, seed, &[]).unwrap()[0];
        let mut reversed = p.values.clone();
        reversed.reverse();
        prop_assert_eq!(persona_id(&reversed), p.persona_id.clone());
    }
}
