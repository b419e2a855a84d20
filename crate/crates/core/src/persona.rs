//! Social-attribute personas.
//!
//! The attribute framework is an 18-row table of categorical attributes. A
//! persona is one full assignment of those attributes. Personas are sampled
//! uniformly from the product space with a seeded RNG, filtered through a
//! small table of consistency rules, and deduplicated by a content hash.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;

use indexmap::IndexMap;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub const AGE: &str = "Age";
pub const GENDER: &str = "Gender";
pub const OCCUPATION: &str = "Occupation";
pub const EDUCATION: &str = "Educational Background";

/// Default number of personas in a full run.
pub const DEFAULT_PERSONA_COUNT: usize = 15_064;

const AGE_MIN: u32 = 18;
const AGE_MAX: u32 = 80;

/// Attribute rows after `Age`, in table order. Options are listed verbatim;
/// duplicates are dropped when the space is built.
const CATEGORICAL_ROWS: &[(&str, &[&str])] = &[
    (GENDER, &["Nondisclosed", "Female", "Genderqueer", "Male"]),
    (
        OCCUPATION,
        &[
            "Student",
            "Retired",
            "Engineer",
            "Unemployed",
            "Teacher",
            "Doctor",
            "Artist",
            "Scientist",
        ],
    ),
    (
        "Personality Traits",
        &[
            "Extroverted",
            "Traditional",
            "Open to Experience",
            "Pessimistic",
            "Innovative",
            "Introverted",
        ],
    ),
    (
        "Communication Style",
        &["Empathetic", "Informal", "Mixed", "Humorous", "Direct", "Formal"],
    ),
    (
        "Interests and Hobbies",
        &[
            "Video Games",
            "Painting",
            "Soccer",
            "Reading",
            "Cooking",
            "Traveling",
            "Sports",
        ],
    ),
    (
        EDUCATION,
        &["High School", "Graduate Degree", "Self-taught", "Bachelor"],
    ),
    (
        "Cultural Background",
        &["Middle Eastern", "Western", "Eastern", "Latin American", "African"],
    ),
    (
        "Language Proficiency",
        &[
            "English",
            "Spanish",
            "Mandarin",
            "English",
            "English and Spanish",
            "French",
            "Spanish",
            "Mandarin",
        ],
    ),
    ("Technology Savviness", &["Intermediate", "Novice", "Expert"]),
    (
        "Preferred Communication Medium",
        &["Voice", "Mixed", "Video", "Text"],
    ),
    ("Lifestyle", &["Sedentary", "Active"]),
    (
        "Values and Beliefs",
        &[
            "Christianity",
            "Environmentalism",
            "Traditional",
            "Humanism",
            "Islam",
            "Atheism",
        ],
    ),
    (
        "Relationship Status",
        &["Widowed", "Divorced", "In a relationship", "Single", "Married"],
    ),
    (
        "Economic Status",
        &["Low income", "High income", "Middle income"],
    ),
    (
        "Health and Wellness",
        &["Health-conscious", "Average health", "Healthy"],
    ),
    ("Time Availability", &["Sporadic", "Full-time", "Part-time"]),
    (
        "Problem-solving Approach",
        &["Practical", "Creative", "Collaborative", "Analytical"],
    ),
];

#[derive(Debug, Error)]
pub enum PersonaError {
    #[error("could only find {found} of {requested} unique rule-satisfying personas after {attempts} attempts")]
    SamplingExhausted {
        requested: usize,
        found: usize,
        attempts: usize,
    },
    #[error("unknown attribute {0:?}")]
    UnknownAttribute(String),
    #[error("attribute {attribute:?} has no option {value:?}")]
    InvalidOption { attribute: String, value: String },
    #[error("attribute {0:?} is missing")]
    MissingAttribute(String),
    #[error("attribute {0:?} given more than once")]
    DuplicateAttribute(String),
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One attribute row: a name and its ordered, duplicate-free options.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Attribute {
    pub name: String,
    pub options: Vec<String>,
}

/// The ordered attribute framework personas are drawn from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttributeSpace {
    attributes: Vec<Attribute>,
}

/// Builds the canonical 18-attribute space. `Age` expands to the integers
/// 18 through 80; repeated options keep their first occurrence.
pub fn build_attribute_space() -> AttributeSpace {
    let mut attributes = Vec::with_capacity(CATEGORICAL_ROWS.len() + 1);
    attributes.push(Attribute {
        name: AGE.to_string(),
        options: (AGE_MIN..=AGE_MAX).map(|a| a.to_string()).collect(),
    });
    for (name, raw) in CATEGORICAL_ROWS {
        let mut options: Vec<String> = Vec::with_capacity(raw.len());
        for opt in raw.iter() {
            if !options.iter().any(|o| o == opt) {
                options.push(opt.to_string());
            }
        }
        attributes.push(Attribute {
            name: name.to_string(),
            options,
        });
    }
    AttributeSpace { attributes }
}

impl AttributeSpace {
    pub fn attributes(&self) -> &[Attribute] {
        &self.attributes
    }

    pub fn len(&self) -> usize {
        self.attributes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.attributes.is_empty()
    }

    pub fn attribute(&self, name: &str) -> Option<&Attribute> {
        self.attributes.iter().find(|a| a.name == name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.attributes.iter().map(|a| a.name.as_str())
    }

    /// Size of the full product space, saturating at `u128::MAX`.
    pub fn cardinality(&self) -> u128 {
        self.attributes
            .iter()
            .fold(1u128, |acc, a| acc.saturating_mul(a.options.len() as u128))
    }

    /// Checks that `persona` assigns every attribute exactly one legal option.
    pub fn validate(&self, persona: &PersonaConfig) -> Result<(), PersonaError> {
        for key in persona.values.keys() {
            if self.attribute(key).is_none() {
                return Err(PersonaError::UnknownAttribute(key.clone()));
            }
        }
        for attr in &self.attributes {
            let value = persona
                .values
                .get(&attr.name)
                .ok_or_else(|| PersonaError::MissingAttribute(attr.name.clone()))?;
            if !attr.options.iter().any(|o| o == value) {
                return Err(PersonaError::InvalidOption {
                    attribute: attr.name.clone(),
                    value: value.clone(),
                });
            }
        }
        Ok(())
    }

    fn persona_from_indices(&self, idx: &[usize]) -> PersonaConfig {
        let values = self
            .attributes
            .iter()
            .zip(idx)
            .map(|(a, &i)| (a.name.clone(), a.options[i].clone()))
            .collect();
        PersonaConfig::new(values)
    }
}

/// A full assignment of every attribute. `values` is kept in table order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PersonaConfig {
    pub persona_id: String,
    pub values: IndexMap<String, String>,
}

impl PersonaConfig {
    /// Wraps `values` and derives the id from their content.
    pub fn new(values: IndexMap<String, String>) -> Self {
        let persona_id = persona_id(&values);
        Self { persona_id, values }
    }

    pub fn get(&self, attribute: &str) -> Option<&str> {
        self.values.get(attribute).map(String::as_str)
    }

    /// Re-orders `values` to match `space` (useful after parsing foreign input).
    pub fn canonicalize(&mut self, space: &AttributeSpace) {
        let mut ordered = IndexMap::with_capacity(self.values.len());
        for name in space.names() {
            if let Some(v) = self.values.get(name) {
                ordered.insert(name.to_string(), v.clone());
            }
        }
        for (k, v) in &self.values {
            if !ordered.contains_key(k) {
                ordered.insert(k.clone(), v.clone());
            }
        }
        self.values = ordered;
    }
}

/// 16 hex characters of SHA-256 over `name=value` lines sorted by name, so
/// the id depends on content only and never on map order.
pub fn persona_id(values: &IndexMap<String, String>) -> String {
    let sorted: BTreeMap<&str, &str> = values
        .iter()
        .map(|(k, v)| (k.as_str(), v.as_str()))
        .collect();
    let mut hasher = Sha256::new();
    for (k, v) in sorted {
        hasher.update(k.as_bytes());
        hasher.update(b"=");
        hasher.update(v.as_bytes());
        hasher.update(b"\n");
    }
    hex::encode(&hasher.finalize()[..8])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparator {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl Comparator {
    /// Numeric comparison when both sides parse as numbers, otherwise only
    /// `Eq`/`Ne` are meaningful and ordering comparisons are false.
    fn holds(self, lhs: &str, rhs: &str) -> bool {
        if let (Ok(a), Ok(b)) = (lhs.trim().parse::<f64>(), rhs.trim().parse::<f64>()) {
            return match self {
                Comparator::Eq => a == b,
                Comparator::Ne => a != b,
                Comparator::Lt => a < b,
                Comparator::Le => a <= b,
                Comparator::Gt => a > b,
                Comparator::Ge => a >= b,
            };
        }
        match self {
            Comparator::Eq => lhs == rhs,
            Comparator::Ne => lhs != rhs,
            _ => false,
        }
    }
}

impl fmt::Display for Comparator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Comparator::Eq => "==",
            Comparator::Ne => "!=",
            Comparator::Lt => "<",
            Comparator::Le => "<=",
            Comparator::Gt => ">",
            Comparator::Ge => ">=",
        })
    }
}

/// A declarative consistency rule: when `conflict_attribute` equals
/// `conflict_value`, the persona must NOT satisfy
/// `attribute <comparator> value`.
///
/// `retired_min_age` reads as: Occupation = Retired conflicts with Age < 50.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyRule {
    pub rule_id: String,
    pub description: String,
    pub attribute: String,
    pub comparator: Comparator,
    pub value: String,
    pub conflict_attribute: String,
    pub conflict_value: String,
}

impl ConsistencyRule {
    /// A rule requiring `attribute >= min_age` whenever `attribute = value`.
    pub fn min_age(rule_id: &str, attribute: &str, value: &str, min_age: u32) -> Self {
        Self {
            rule_id: rule_id.to_string(),
            description: format!("{attribute} = {value} requires {AGE} >= {min_age}"),
            attribute: AGE.to_string(),
            comparator: Comparator::Lt,
            value: min_age.to_string(),
            conflict_attribute: attribute.to_string(),
            conflict_value: value.to_string(),
        }
    }

    /// True when `persona` breaks this rule. Missing attributes never violate.
    pub fn is_violated_by(&self, persona: &PersonaConfig) -> bool {
        let Some(trigger) = persona.get(&self.conflict_attribute) else {
            return false;
        };
        if trigger != self.conflict_value {
            return false;
        }
        persona
            .get(&self.attribute)
            .is_some_and(|v| self.comparator.holds(v, &self.value))
    }
}

/// The shipped rule table. Override it by passing a different list.
pub fn default_rules() -> Vec<ConsistencyRule> {
    vec![
        ConsistencyRule::min_age("retired_min_age", OCCUPATION, "Retired", 50),
        ConsistencyRule::min_age("doctor_min_age", OCCUPATION, "Doctor", 22),
        ConsistencyRule::min_age("engineer_min_age", OCCUPATION, "Engineer", 22),
        ConsistencyRule::min_age("scientist_min_age", OCCUPATION, "Scientist", 22),
        ConsistencyRule::min_age("teacher_min_age", OCCUPATION, "Teacher", 22),
        ConsistencyRule::min_age("graduate_degree_min_age", EDUCATION, "Graduate Degree", 22),
    ]
}

/// Returns every rule `persona` violates, in rule order.
pub fn check_consistency<'r>(
    persona: &PersonaConfig,
    rules: &'r [ConsistencyRule],
) -> Vec<&'r ConsistencyRule> {
    rules.iter().filter(|r| r.is_violated_by(persona)).collect()
}

/// Draws `n` distinct rule-satisfying personas by uniform rejection sampling.
///
/// The output is a pure function of the arguments. At most `100 * n`
/// candidates are drawn before giving up.
pub fn sample_personas(
    space: &AttributeSpace,
    n: usize,
    seed: u64,
    rules: &[ConsistencyRule],
) -> Result<Vec<PersonaConfig>, PersonaError> {
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let max_attempts = n.saturating_mul(100);
    let mut seen: HashSet<Vec<u8>> = HashSet::with_capacity(n);
    let mut out = Vec::with_capacity(n);
    let mut idx = vec![0usize; space.len()];
    let mut attempts = 0;

    while out.len() < n {
        if attempts >= max_attempts {
            return Err(PersonaError::SamplingExhausted {
                requested: n,
                found: out.len(),
                attempts,
            });
        }
        attempts += 1;
        for (slot, attr) in idx.iter_mut().zip(space.attributes()) {
            *slot = rng.random_range(0..attr.options.len());
        }
        let key: Vec<u8> = idx.iter().map(|&i| i as u8).collect();
        if seen.contains(&key) {
            continue;
        }
        let persona = space.persona_from_indices(&idx);
        if rules.iter().any(|r| r.is_violated_by(&persona)) {
            continue;
        }
        seen.insert(key);
        out.push(persona);
    }
    Ok(out)
}

/// Renders a persona as `Name: value` lines in table order.
pub fn serialize_persona(persona: &PersonaConfig) -> String {
    let mut out = String::new();
    for (i, (k, v)) in persona.values.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        out.push_str(k);
        out.push_str(": ");
        out.push_str(v);
    }
    out
}

/// Inverse of [`serialize_persona`]; validates the result against `space`.
pub fn parse_persona(text: &str, space: &AttributeSpace) -> Result<PersonaConfig, PersonaError> {
    let mut values = IndexMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (name, value) = line.split_once(": ").ok_or_else(|| PersonaError::Parse {
            line: i + 1,
            reason: format!("expected `Name: value`, got {line:?}"),
        })?;
        if values
            .insert(name.to_string(), value.to_string())
            .is_some()
        {
            return Err(PersonaError::DuplicateAttribute(name.to_string()));
        }
    }
    let mut persona = PersonaConfig::new(values);
    persona.canonicalize(space);
    space.validate(&persona)?;
    Ok(persona)
}

/// Writes one JSON object per persona.
pub fn write_personas<W: Write>(mut sink: W, personas: &[PersonaConfig]) -> Result<(), PersonaError> {
    for p in personas {
        serde_json::to_writer(&mut sink, p).map_err(std::io::Error::from)?;
        sink.write_all(b"\n")?;
    }
    sink.flush()?;
    Ok(())
}

/// Reads a persona JSON Lines file. Ids are recomputed and each entry is
/// validated against `space`.
pub fn read_personas<R: BufRead>(
    source: R,
    space: &AttributeSpace,
) -> Result<Vec<PersonaConfig>, PersonaError> {
    let mut out = Vec::new();
    for (i, line) in source.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: PersonaConfig =
            serde_json::from_str(&line).map_err(|e| PersonaError::Parse {
                line: i + 1,
                reason: e.to_string(),
            })?;
        let mut persona = PersonaConfig::new(parsed.values);
        if persona.persona_id != parsed.persona_id {
            return Err(PersonaError::Parse {
                line: i + 1,
                reason: format!(
                    "persona_id {} does not match content hash {}",
                    parsed.persona_id, persona.persona_id
                ),
            });
        }
        persona.canonicalize(space);
        space.validate(&persona)?;
        out.push(persona);
    }
    Ok(out)
}

pub fn read_personas_file(path: &Path, space: &AttributeSpace) -> Result<Vec<PersonaConfig>, PersonaError> {
    let file = std::fs::File::open(path)?;
    read_personas(std::io::BufReader::new(file), space)
}

/// Loads a rule table from JSON (`[{"rule_id": ...}, ...]`).
pub fn read_rules(path: &Path) -> Result<Vec<ConsistencyRule>, PersonaError> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| PersonaError::Parse {
        line: e.line(),
        reason: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn persona_with(overrides: &[(&str, &str)]) -> PersonaConfig {
        let space = build_attribute_space();
        let mut values: IndexMap<String, String> = space
            .attributes()
            .iter()
            .map(|a| (a.name.clone(), a.options[0].clone()))
            .collect();
        for (k, v) in overrides {
            values.insert(k.to_string(), v.to_string());
        }
        PersonaConfig::new(values)
    }

    #[test]
    fn space_matches_table() {
        let space = build_attribute_space();
        assert_eq!(space.len(), 18);
        assert_eq!(space.attribute(GENDER).unwrap().options.len(), 4);
        assert_eq!(space.attribute(AGE).unwrap().options.len(), 63);
        assert_eq!(space.attribute(AGE).unwrap().options[0], "18");
        assert_eq!(space.attribute(AGE).unwrap().options[62], "80");
        assert_eq!(
            space.attribute("Language Proficiency").unwrap().options,
            vec!["English", "Spanish", "Mandarin", "English and Spanish", "French"]
        );
        assert_eq!(space.attributes().last().unwrap().name, "Problem-solving Approach");
        for attr in space.attributes() {
            assert!(!attr.options.is_empty());
            let unique: HashSet<_> = attr.options.iter().collect();
            assert_eq!(unique.len(), attr.options.len(), "{}", attr.name);
        }
    }

    #[test]
    fn cardinality_matches_independent_product() {
        // per-row option counts read off the table by hand
        let counts: [u128; 18] = [63, 4, 8, 6, 6, 7, 4, 5, 5, 3, 4, 2, 6, 5, 3, 3, 3, 4];
        let oracle: u128 = counts.iter().product();
        assert_eq!(oracle, 3_950_456_832_000);
        assert_eq!(build_attribute_space().cardinality(), oracle);
    }

    #[test]
    fn retired_teenager_violates() {
        let p = persona_with(&[(AGE, "19"), (OCCUPATION, "Retired")]);
        let rule = ConsistencyRule::min_age("retired_min_age", OCCUPATION, "Retired", 50);
        let v = check_consistency(&p, std::slice::from_ref(&rule));
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].rule_id, "retired_min_age");
    }

    #[test]
    fn empty_rules_never_violate() {
        let p = persona_with(&[(AGE, "19"), (OCCUPATION, "Retired")]);
        assert!(check_consistency(&p, &[]).is_empty());
    }

    #[test]
    fn student_of_thirty_is_consistent() {
        let p = persona_with(&[(AGE, "30"), (OCCUPATION, "Student")]);
        assert!(check_consistency(&p, &default_rules()).is_empty());
    }

    #[test]
    fn young_graduate_degree_violates_default_rules() {
        let p = persona_with(&[(AGE, "21"), (EDUCATION, "Graduate Degree")]);
        let rules = default_rules();
        let v = check_consistency(&p, &rules);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].rule_id, "graduate_degree_min_age");
        let ok = persona_with(&[(AGE, "22"), (EDUCATION, "Graduate Degree")]);
        assert!(check_consistency(&ok, &default_rules()).is_empty());
    }

    #[test]
    fn non_numeric_ordering_is_false() {
        assert!(!Comparator::Lt.holds("abc", "def"));
        assert!(Comparator::Eq.holds("abc", "abc"));
        assert!(Comparator::Ne.holds("abc", "abd"));
    }

    #[test]
    fn sample_zero_is_empty() {
        let space = build_attribute_space();
        assert!(sample_personas(&space, 0, 3, &default_rules()).unwrap().is_empty());
    }

    #[test]
    fn sampling_is_seed_deterministic() {
        let space = build_attribute_space();
        let a = sample_personas(&space, 100, 7, &[]).unwrap();
        let b = sample_personas(&space, 100, 7, &[]).unwrap();
        assert_eq!(a, b);
        let c = sample_personas(&space, 100, 8, &[]).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn exhaustion_is_reported() {
        let space = AttributeSpace {
            attributes: vec![Attribute {
                name: "Only".into(),
                options: vec!["a".into(), "b".into()],
            }],
        };
        let err = sample_personas(&space, 3, 1, &[]).unwrap_err();
        assert!(matches!(
            err,
            PersonaError::SamplingExhausted { requested: 3, found: 2, attempts: 300 }
        ));
    }

    #[test]
    fn serialization_has_eighteen_lines_starting_with_age() {
        let p = persona_with(&[(AGE, "25"), (GENDER, "Female")]);
        let text = serialize_persona(&p);
        assert_eq!(text.lines().count(), 18);
        assert_eq!(text.lines().next(), Some("Age: 25"));
        assert_eq!(text, serialize_persona(&p));
        let back = parse_persona(&text, &build_attribute_space()).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn parse_rejects_bad_option() {
        let p = persona_with(&[(GENDER, "Robot")]);
        let err = parse_persona(&serialize_persona(&p), &build_attribute_space()).unwrap_err();
        assert!(matches!(err, PersonaError::InvalidOption { .. }));
    }

    #[test]
    fn id_ignores_map_order() {
        let p = persona_with(&[]);
        let mut reversed: IndexMap<String, String> = p.values.clone();
        reversed.reverse();
        assert_eq!(persona_id(&reversed), p.persona_id);
        assert_eq!(p.persona_id.len(), 16);
    }

    #[test]
    fn jsonl_round_trip_keeps_key_order() {
        let space = build_attribute_space();
        let personas = sample_personas(&space, 5, 11, &default_rules()).unwrap();
        let mut buf = Vec::new();
        write_personas(&mut buf, &personas).unwrap();
        let first = std::str::from_utf8(&buf).unwrap().lines().next().unwrap();
        assert!(first.starts_with("{\"persona_id\":\""));
        assert!(first.contains("\"values\":{\"Age\":"));
        let back = read_personas(&buf[..], &space).unwrap();
        assert_eq!(back, personas);
    }
}
