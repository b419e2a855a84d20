use std::collections::HashSet;

use crowdwise::emotions::EmotionLabel;
use crowdwise::persona::{build_attribute_space, sample_personas, AttributeSpace, PersonaConfig};
use crowdwise::promptgen::*;
use proptest::prelude::*;

fn personas(n: usize, seed: u64) -> Vec<PersonaConfig> {
    sample_personas(&build_attribute_space(), n, seed, &[]).unwrap()
}

/// Every attribute name and option value, lowercased.
fn vocabulary(space: &AttributeSpace) -> Vec<String> {
    let mut words = Vec::new();
    for a in space.attributes() {
        words.push(a.name.to_lowercase());
        // numeric ages would match any digits, and the question has none
        words.extend(a.options.iter().filter(|o| o.parse::<u32>().is_err()).map(|o| o.to_lowercase()));
    }
    words
}

fn contains_word(haystack: &str, word: &str) -> bool {
    let h = haystack.to_lowercase();
    h.match_indices(word).any(|(i, _)| {
        let before = h[..i].chars().next_back();
        let after = h[i + word.len()..].chars().next();
        !before.is_some_and(char::is_alphanumeric) && !after.is_some_and(char::is_alphanumeric)
    })
}

#[test]
fn base_prompt_is_the_question_alone() {
    let q = default_question();
    let spec = build_prompt(PromptType::Base, None, None, q).unwrap();
    assert_eq!(spec.system_message, "");
    assert_eq!(spec.user_message, q);
    assert_eq!(spec.rendered(), q);
}

#[test]
fn emotional_only_has_no_attribute_vocabulary() {
    let space = build_attribute_space();
    let vocab = vocabulary(&space);
    let q = default_question();
    for e in EmotionLabel::all() {
        let spec = build_prompt(PromptType::EmotionalOnly, None, Some(e), q).unwrap();
        // the shared question itself says "single", so only the added text is checked
        assert_eq!(spec.user_message, q);
        for w in &vocab {
            assert!(!contains_word(&spec.system_message, w), "{e}: found {w:?} in {:?}", spec.system_message);
        }
        assert!(!spec.system_message.contains("year-old"));
        assert!(spec.system_message.contains(&format!("feeling {}", e.name())));
    }
}

#[test]
fn vocabulary_check_catches_leaks() {
    let p = &personas(1, 5)[0];
    let vocab = vocabulary(&build_attribute_space());
    let spec = build_prompt(PromptType::AttributesOnly, Some(p), None, default_question()).unwrap();
    assert!(vocab.iter().any(|w| contains_word(&spec.system_message, w)));
}

#[test]
fn component_mismatches_are_rejected() {
    let p = &personas(1, 0)[0];
    let love = EmotionLabel::from_name("love").unwrap();
    let q = default_question();
    assert!(build_prompt(PromptType::Base, Some(p), None, q).is_err());
    assert!(build_prompt(PromptType::Base, None, Some(love), q).is_err());
    assert!(build_prompt(PromptType::FullContext, Some(p), None, q).is_err());
    assert!(build_prompt(PromptType::AttributesOnly, Some(p), Some(love), q).is_err());
    assert!(build_prompt(PromptType::EmotionalOnly, None, None, q).is_err());
    assert!(matches!(
        build_prompt(PromptType::Base, None, None, "  "),
        Err(PromptError::EmptyQuestion)
    ));
}

#[test]
fn four_thousand_prompts_hash_distinctly() {
    let ps = personas(1000, 77);
    let emotions = EmotionLabel::all();
    let q = default_question();
    let mut hashes = HashSet::new();
    for (i, p) in ps.iter().enumerate() {
        let e = emotions[i % emotions.len()];
        let specs = [
            build_prompt(PromptType::FullContext, Some(p), Some(e), q).unwrap(),
            build_prompt(PromptType::AttributesOnly, Some(p), None, q).unwrap(),
            build_prompt(PromptType::EmotionalOnly, None, Some(e), q)
                .unwrap()
                .with_replicate((i / emotions.len()) as u32),
            build_prompt(PromptType::Base, None, None, q).unwrap().with_replicate(i as u32),
        ];
        for s in specs {
            assert_eq!(s.prompt_hash, prompt_hash(&s));
            hashes.insert(s.prompt_hash);
        }
    }
    assert_eq!(hashes.len(), 4000);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn persona_prompts_carry_every_value(seed in any::<u64>(), e in 0u32..28) {
        let p = &personas(1, seed)[0];
        let e = EmotionLabel::from_id(e).unwrap();
        let full = build_prompt(PromptType::FullContext, Some(p), Some(e), default_question()).unwrap();
        let attrs = build_prompt(PromptType::AttributesOnly, Some(p), None, default_question()).unwrap();
        for (name, value) in &p.values {
            prop_assert!(full.system_message.contains(value.as_str()), "{} missing", name);
            prop_assert!(attrs.system_message.contains(value.as_str()));
        }
        let role = format!("You are a {}-year-old", p.get("Age").unwrap());
        prop_assert!(attrs.system_message.starts_with(&role));
        let feeling = format!(
            "You are currently feeling {}. Let this emotional state influence how you think and answer.",
            e.name()
        );
        prop_assert!(full.system_message.ends_with(&feeling));
        prop_assert!(!attrs.system_message.contains("feeling"));
        prop_assert_eq!(&full.user_message, &attrs.user_message);
    }

    #[test]
    fn replicates_change_hash_not_text(r in any::<u32>(), s in any::<u32>()) {
        prop_assume!(r != s);
        let base = build_prompt(PromptType::Base, None, None, default_question()).unwrap();
        let a = base.clone().with_replicate(r);
        let b = base.with_replicate(s);
        prop_assert_eq!(a.rendered(), b.rendered());
        prop_assert_ne!(a.prompt_hash, b.prompt_hash);
    }
}
