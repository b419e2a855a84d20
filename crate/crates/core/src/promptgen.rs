//! Prompt rendering for the four prompt variants.
//!
//! | variant          | role + persona | emotion | question |
//! |------------------|:--------------:|:-------:|:--------:|
//! | `FullContext`    | yes            | yes     | yes      |
//! | `EmotionalOnly`  |                | yes     | yes      |
//! | `AttributesOnly` | yes            |         | yes      |
//! | `Base`           |                |         | yes      |
//!
//! Role, persona and emotion text go into the system message. The question
//! is always the whole user message.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use std::sync::LazyLock;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::emotions::EmotionLabel;
use crate::persona::{serialize_persona, PersonaConfig};

const BUILTIN_TEMPLATES: &str = include_str!("../templates/prompts_v1.txt");

static DEFAULT_TEMPLATES: LazyLock<PromptTemplates> = LazyLock::new(|| {
    PromptTemplates::parse(BUILTIN_TEMPLATES).expect("built-in prompt templates are well formed")
});

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PromptError {
    #[error("{prompt_type} prompts {problem}")]
    ComponentMismatch {
        prompt_type: PromptType,
        problem: &'static str,
    },
    #[error("question is empty")]
    EmptyQuestion,
    #[error("template placeholder {{{0}}} has no value")]
    MissingPlaceholder(String),
    #[error("template file: {0}")]
    Template(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptType {
    FullContext,
    EmotionalOnly,
    AttributesOnly,
    Base,
}

impl PromptType {
    pub const ALL: [PromptType; 4] = [
        PromptType::FullContext,
        PromptType::EmotionalOnly,
        PromptType::AttributesOnly,
        PromptType::Base,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PromptType::FullContext => "full_context",
            PromptType::EmotionalOnly => "emotional_only",
            PromptType::AttributesOnly => "attributes_only",
            PromptType::Base => "base",
        }
    }

    /// Row label used in summary tables.
    pub fn table_label(self) -> &'static str {
        match self {
            PromptType::FullContext => "Both",
            PromptType::EmotionalOnly => "Emotions",
            PromptType::AttributesOnly => "Attributes",
            PromptType::Base => "Only Prompt",
        }
    }

    pub fn uses_persona(self) -> bool {
        matches!(self, PromptType::FullContext | PromptType::AttributesOnly)
    }

    pub fn uses_emotion(self) -> bool {
        matches!(self, PromptType::FullContext | PromptType::EmotionalOnly)
    }
}

impl fmt::Display for PromptType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PromptType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PromptType::ALL
            .into_iter()
            .find(|t| t.as_str() == s || t.as_str().replace('_', "-") == s)
            .ok_or_else(|| format!("unknown prompt type {s:?}"))
    }
}

/// Named template sections loaded from a template file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplates {
    pub version: String,
    pub role: String,
    pub attribute: String,
    pub emotion: String,
    pub question: String,
}

impl PromptTemplates {
    /// The templates shipped in `templates/prompts_v1.txt`.
    pub fn builtin() -> &'static PromptTemplates {
        &DEFAULT_TEMPLATES
    }

    pub fn parse(text: &str) -> Result<Self, PromptError> {
        let mut sections: HashMap<String, Vec<&str>> = HashMap::new();
        let mut current: Option<String> = None;
        for line in text.lines() {
            if line.starts_with('#') {
                continue;
            }
            let trimmed = line.trim();
            if trimmed.starts_with('[') && trimmed.ends_with(']') {
                let name = trimmed[1..trimmed.len() - 1].to_string();
                sections.entry(name.clone()).or_default();
                current = Some(name);
                continue;
            }
            if let Some(name) = &current {
                sections.get_mut(name).unwrap().push(line);
            } else if !trimmed.is_empty() {
                return Err(PromptError::Template(format!("text outside a section: {line:?}")));
            }
        }
        let mut take = |name: &str| -> Result<String, PromptError> {
            let lines = sections
                .remove(name)
                .ok_or_else(|| PromptError::Template(format!("missing [{name}] section")))?;
            let body = lines.join("\n").trim().to_string();
            if body.is_empty() {
                return Err(PromptError::Template(format!("[{name}] section is empty")));
            }
            Ok(body)
        };
        let meta = take("meta")?;
        let version = meta
            .lines()
            .filter_map(|l| l.split_once('='))
            .find(|(k, _)| k.trim() == "version")
            .map(|(_, v)| v.trim().to_string())
            .ok_or_else(|| PromptError::Template("[meta] has no version".into()))?;
        Ok(Self {
            version,
            role: take("role")?,
            attribute: take("attribute")?,
            emotion: take("emotion")?,
            question: take("question")?,
        })
    }

    /// Attribute names referenced by the role line.
    fn role_attributes(&self) -> Vec<&str> {
        placeholders(&self.role)
    }
}

fn placeholders(template: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut rest = template;
    while let Some(start) = rest.find('{') {
        let Some(len) = rest[start..].find('}') else {
            break;
        };
        out.push(&rest[start + 1..start + len]);
        rest = &rest[start + len + 1..];
    }
    out
}

fn fill(template: &str, lookup: impl Fn(&str) -> Option<String>) -> Result<String, PromptError> {
    let mut out = String::with_capacity(template.len() + 64);
    let mut rest = template;
    while let Some(start) = rest.find('{') {
        let Some(len) = rest[start..].find('}') else {
            break;
        };
        let key = &rest[start + 1..start + len];
        out.push_str(&rest[..start]);
        out.push_str(&lookup(key).ok_or_else(|| PromptError::MissingPlaceholder(key.into()))?);
        rest = &rest[start + len + 1..];
    }
    out.push_str(rest);
    Ok(out)
}

/// A fully rendered prompt.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptSpec {
    pub prompt_type: PromptType,
    pub persona: Option<PersonaConfig>,
    pub emotion: Option<EmotionLabel>,
    pub question: String,
    /// Distinguishes otherwise identical prompts issued several times.
    pub replicate: Option<u32>,
    pub system_message: String,
    pub user_message: String,
    pub prompt_hash: String,
}

impl PromptSpec {
    /// Same prompt, salted with a replicate index; the hash changes, the
    /// rendered text does not.
    pub fn with_replicate(mut self, replicate: u32) -> Self {
        self.replicate = Some(replicate);
        self.prompt_hash = prompt_hash(&self);
        self
    }

    /// System and user message joined by a blank line (user message alone
    /// when there is no system message).
    pub fn rendered(&self) -> String {
        if self.system_message.is_empty() {
            self.user_message.clone()
        } else {
            format!("{}\n\n{}", self.system_message, self.user_message)
        }
    }
}

pub fn build_prompt(
    prompt_type: PromptType,
    persona: Option<&PersonaConfig>,
    emotion: Option<EmotionLabel>,
    question: &str,
) -> Result<PromptSpec, PromptError> {
    build_prompt_with(PromptTemplates::builtin(), prompt_type, persona, emotion, question)
}

pub fn build_prompt_with(
    templates: &PromptTemplates,
    prompt_type: PromptType,
    persona: Option<&PersonaConfig>,
    emotion: Option<EmotionLabel>,
    question: &str,
) -> Result<PromptSpec, PromptError> {
    let mismatch = |problem| PromptError::ComponentMismatch {
        prompt_type,
        problem,
    };
    match (prompt_type.uses_persona(), persona.is_some()) {
        (true, false) => return Err(mismatch("require persona attributes")),
        (false, true) => return Err(mismatch("must not carry persona attributes")),
        _ => {}
    }
    match (prompt_type.uses_emotion(), emotion.is_some()) {
        (true, false) => return Err(mismatch("require an emotional state")),
        (false, true) => return Err(mismatch("must not carry an emotional state")),
        _ => {}
    }
    if question.trim().is_empty() {
        return Err(PromptError::EmptyQuestion);
    }

    let mut blocks: Vec<String> = Vec::new();
    if let Some(p) = persona {
        let role = fill(&templates.role, |k| p.get(k).map(str::to_string))?;
        let in_role = templates.role_attributes();
        let mut lines = vec![role];
        for (name, value) in &p.values {
            if in_role.contains(&name.as_str()) {
                continue;
            }
            lines.push(fill(&templates.attribute, |k| match k {
                "attribute" => Some(name.clone()),
                "value" => Some(value.clone()),
                _ => None,
            })?);
        }
        blocks.push(lines.join("\n"));
    }
    if let Some(e) = emotion {
        blocks.push(fill(&templates.emotion, |k| {
            (k == "emotion").then(|| e.name().to_string())
        })?);
    }

    let mut spec = PromptSpec {
        prompt_type,
        persona: persona.cloned(),
        emotion,
        question: question.to_string(),
        replicate: None,
        system_message: blocks.join("\n"),
        user_message: question.to_string(),
        prompt_hash: String::new(),
    };
    spec.prompt_hash = prompt_hash(&spec);
    Ok(spec)
}

fn netstring(hasher: &mut Sha256, field: &[u8]) {
    hasher.update(field.len().to_string().as_bytes());
    hasher.update(b":");
    hasher.update(field);
    hasher.update(b",");
}

/// SHA-256 over the length-prefixed components: type, persona text,
/// emotion name, question, and the replicate index when present.
pub fn prompt_hash(spec: &PromptSpec) -> String {
    let mut hasher = Sha256::new();
    netstring(&mut hasher, spec.prompt_type.as_str().as_bytes());
    let persona = spec.persona.as_ref().map(serialize_persona).unwrap_or_default();
    netstring(&mut hasher, persona.as_bytes());
    netstring(&mut hasher, spec.emotion.map(|e| e.name()).unwrap_or("").as_bytes());
    netstring(&mut hasher, spec.question.as_bytes());
    if let Some(r) = spec.replicate {
        netstring(&mut hasher, format!("replicate={r}").as_bytes());
    }
    hex::encode(hasher.finalize())
}

/// The default question text.
pub fn default_question() -> &'static str {
    &PromptTemplates::builtin().question
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::persona::{build_attribute_space, sample_personas};

    fn joy() -> EmotionLabel {
        EmotionLabel::from_name("joy").unwrap()
    }

    fn persona() -> PersonaConfig {
        sample_personas(&build_attribute_space(), 1, 5, &[]).unwrap().remove(0)
    }

    #[test]
    fn builtin_templates_parse() {
        let t = PromptTemplates::builtin();
        assert_eq!(t.version, "prompts-v1");
        assert_eq!(t.role_attributes(), vec!["Age", "Gender", "Occupation"]);
        assert!(t.question.starts_with("What is the distance in miles between Fargo"));
    }

    #[test]
    fn base_is_question_only() {
        let q = default_question();
        let spec = build_prompt(PromptType::Base, None, None, q).unwrap();
        assert_eq!(spec.user_message, q);
        assert!(spec.system_message.is_empty());
        assert_eq!(spec.rendered(), q);
    }

    #[test]
    fn emotional_only_is_one_sentence() {
        let spec = build_prompt(PromptType::EmotionalOnly, None, Some(joy()), "Q?").unwrap();
        assert!(spec.system_message.contains("feeling joy"));
        assert_eq!(
            spec.system_message,
            "You are currently feeling joy. Let this emotional state influence how you think and answer."
        );
        for name in build_attribute_space().names() {
            assert!(!spec.rendered().contains(name));
        }
    }

    #[test]
    fn full_context_orders_components() {
        let p = persona();
        let g = EmotionLabel::from_name("gratitude").unwrap();
        let spec = build_prompt(PromptType::FullContext, Some(&p), Some(g), "Q?").unwrap();
        let text = spec.rendered();
        let role = text.find(&format!("You are a {}-year-old", p.get("Age").unwrap())).unwrap();
        let attrs = text.find("Personality Traits: ").unwrap();
        let emotion = text.find("feeling gratitude").unwrap();
        let question = text.rfind("Q?").unwrap();
        assert!(role < attrs && attrs < emotion && emotion < question);
        // role line plus 15 attribute lines plus the emotion sentence
        assert_eq!(spec.system_message.lines().count(), 17);
    }

    #[test]
    fn component_mismatches() {
        let p = persona();
        let err = build_prompt(PromptType::Base, Some(&p), None, "Q").unwrap_err();
        assert!(matches!(err, PromptError::ComponentMismatch { .. }));
        assert!(build_prompt(PromptType::EmotionalOnly, None, None, "Q").is_err());
        assert!(build_prompt(PromptType::AttributesOnly, Some(&p), Some(joy()), "Q").is_err());
        assert!(build_prompt(PromptType::FullContext, None, Some(joy()), "Q").is_err());
        assert_eq!(
            build_prompt(PromptType::Base, None, None, "  ").unwrap_err(),
            PromptError::EmptyQuestion
        );
    }

    #[test]
    fn hash_properties() {
        let a = build_prompt(PromptType::Base, None, None, "Q").unwrap();
        let b = build_prompt(PromptType::Base, None, None, "Q").unwrap();
        assert_eq!(a.prompt_hash, b.prompt_hash);
        assert_eq!(a.prompt_hash.len(), 64);
        let e = build_prompt(PromptType::EmotionalOnly, None, Some(joy()), "Q").unwrap();
        assert_ne!(a.prompt_hash, e.prompt_hash);
        let r0 = a.clone().with_replicate(0);
        let r1 = a.clone().with_replicate(1);
        assert_ne!(r0.prompt_hash, r1.prompt_hash);
        assert_ne!(r0.prompt_hash, a.prompt_hash);
        assert_eq!(r0.rendered(), r1.rendered());
    }

    #[test]
    fn golden_hash() {
        // frozen from the length-prefixed preimage "4:base,0:,0:,1:Q,"
        let a = build_prompt(PromptType::Base, None, None, "Q").unwrap();
        let mut h = Sha256::new();
        h.update(b"4:base,0:,0:,1:Q,");
        assert_eq!(a.prompt_hash, hex::encode(h.finalize()));
        assert_eq!(
            a.prompt_hash,
            "cbe9da8e6059605eb96c3cf4960e688a56d728ea42dc4c56428089bedb885947"
        );
    }

    #[test]
    fn custom_templates_are_validated() {
        assert!(PromptTemplates::parse("[role]\nx").is_err());
        let bad = BUILTIN_TEMPLATES.replace("{Age}", "{Shoe Size}");
        let t = PromptTemplates::parse(&bad).unwrap();
        let err = build_prompt_with(&t, PromptType::AttributesOnly, Some(&persona()), None, "Q");
        assert_eq!(err.unwrap_err(), PromptError::MissingPlaceholder("Shoe Size".into()));
    }

    #[test]
    fn prompt_type_parsing() {
        assert_eq!("full_context".parse::<PromptType>().unwrap(), PromptType::FullContext);
        assert_eq!("emotional-only".parse::<PromptType>().unwrap(), PromptType::EmotionalOnly);
        assert!("nope".parse::<PromptType>().is_err());
    }
}
