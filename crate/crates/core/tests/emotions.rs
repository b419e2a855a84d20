use std::io::Cursor;

use crowdwise::emotions::*;
use crowdwise::persona::{build_attribute_space, sample_personas, PersonaConfig};
use proptest::prelude::*;

// The published GoEmotions label order, restated here so the library table
// is checked against an independent copy.
const GOEMOTIONS_ORDER: [&str; 28] = [
    "admiration", "amusement", "anger", "annoyance", "approval", "caring", "confusion", "curiosity",
    "desire", "disappointment", "disapproval", "disgust", "embarrassment", "excitement", "fear",
    "gratitude", "grief", "joy", "love", "nervousness", "optimism", "pride", "realization",
    "relief", "remorse", "sadness", "surprise", "neutral",
];

fn personas(n: usize, seed: u64) -> Vec<PersonaConfig> {
    sample_personas(&build_attribute_space(), n, seed, &[]).unwrap()
}

#[test]
fn label_table_matches_published_order() {
    assert_eq!(EMOTION_NAMES, GOEMOTIONS_ORDER);
    assert_eq!(EmotionLabel::from_name("love").unwrap().id(), 18);
    assert_eq!(EmotionLabel::from_name("gratitude").unwrap().id(), 15);
    assert_eq!(EmotionLabel::from_id(NEUTRAL_ID as u32).unwrap().name(), "neutral");
}

#[test]
fn spec_parse_examples() {
    let d = parse_goemotions(Cursor::new("I love this\t18\tabc\ngreat\t0,15\txyz\nonly-two-fields\t3\n")).unwrap();
    assert_eq!(d.records.len(), 2);
    assert_eq!(d.skipped, 1);
    let names = |r: &GoEmotionsRecord| r.labels.iter().map(|l| l.name()).collect::<Vec<_>>();
    assert_eq!(names(&d.records[0]), ["love"]);
    assert_eq!(names(&d.records[1]), ["admiration", "gratitude"]);
    assert_eq!(d.skipped_lines[0].line, 3);
}

#[test]
fn fixture_training_file_is_golden() {
    let tsv = include_str!("fixtures/goemotions_sample.tsv");
    let parsed = parse_goemotions(Cursor::new(tsv)).unwrap();
    assert_eq!(parsed.records.len() + parsed.skipped, 50);
    assert_eq!(parsed.skipped, 7);
    let mut out = Vec::new();
    let n = emit_training_file(&parsed.records, TemplateId::EmotionToText, &mut out).unwrap();
    assert_eq!(n, 43);
    assert_eq!(String::from_utf8(out).unwrap(), include_str!("fixtures/goemotions_train_golden.jsonl"));
}

#[test]
fn normalize_examples() {
    assert_eq!(normalize_text("SO\t\tHAPPY!! 😀 "), "SO HAPPY!! 😀");
    assert_eq!(normalize_text(""), "");
    assert_eq!(normalize_text("fine."), "fine.");
}

#[test]
fn balanced_full_population_is_exact() {
    let ps = personas(15_064, 42);
    let a = assign_emotions(&ps, AssignmentMode::Balanced, 42, &EmotionLabel::all()).unwrap();
    let counts = a.counts(&EmotionLabel::all());
    assert_eq!(counts.len(), 28);
    assert!(counts.values().all(|&c| c == 538));
}

#[test]
fn assignment_jsonl_round_trip() {
    let ps = personas(100, 1);
    let a = assign_emotions(&ps, AssignmentMode::UniformRandom, 5, &EmotionLabel::without_neutral()).unwrap();
    let mut buf = Vec::new();
    a.write_jsonl(&mut buf).unwrap();
    let back = EmotionAssignment::read_jsonl(Cursor::new(buf)).unwrap();
    assert_eq!(back.labels, a.labels);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn balanced_counts_differ_by_at_most_one(n in 1usize..400, seed in any::<u64>(), neutral in any::<bool>()) {
        let ps = personas(n, seed);
        let palette = if neutral { EmotionLabel::all() } else { EmotionLabel::without_neutral() };
        let a = assign_emotions(&ps, AssignmentMode::Balanced, seed, &palette).unwrap();
        let counts: Vec<usize> = a.counts(&palette).values().copied().collect();
        let (lo, hi) = (*counts.iter().min().unwrap(), *counts.iter().max().unwrap());
        prop_assert!(hi - lo <= 1);
        prop_assert_eq!(counts.iter().sum::<usize>(), n);
        let again = assign_emotions(&ps, AssignmentMode::Balanced, seed, &palette).unwrap();
        prop_assert_eq!(a, again);
    }

    #[test]
    fn normalize_is_idempotent(s in any::<String>()) {
        let once = normalize_text(&s);
        prop_assert_eq!(normalize_text(&once), once.clone());
        prop_assert!(!once.chars().any(|c| c.is_control()));
        prop_assert!(!once.contains("  "));
        prop_assert_eq!(once.trim(), once.as_str());
    }

    #[test]
    fn parser_never_aborts(lines in proptest::collection::vec("[a-z ,0-9\t]{0,30}", 0..40)) {
        let text = lines.join("\n");
        let d = parse_goemotions(Cursor::new(text)).unwrap();
        prop_assert!(d.records.len() + d.skipped <= lines.len());
    }
}
