//! GoEmotions taxonomy, dataset preparation, and persona emotion assignment.

use std::collections::BTreeSet;
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use indexmap::IndexMap;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::persona::PersonaConfig;

/// Label names in the dataset's id order; `neutral` is last.
pub const EMOTION_NAMES: [&str; 28] = [
    "admiration",
    "amusement",
    "anger",
    "annoyance",
    "approval",
    "caring",
    "confusion",
    "curiosity",
    "desire",
    "disappointment",
    "disapproval",
    "disgust",
    "embarrassment",
    "excitement",
    "fear",
    "gratitude",
    "grief",
    "joy",
    "love",
    "nervousness",
    "optimism",
    "pride",
    "realization",
    "relief",
    "remorse",
    "sadness",
    "surprise",
    "neutral",
];

pub const NEUTRAL_ID: u8 = 27;

#[derive(Debug, Error)]
pub enum EmotionError {
    #[error("unknown emotion label {0:?}")]
    UnknownLabel(String),
    #[error("emotion id {0} is out of range 0..=27")]
    InvalidId(u32),
    #[error("record has no labels")]
    EmptyLabels,
    #[error("no personas to assign emotions to")]
    NoPersonas,
    #[error("no emotion labels to assign")]
    NoLabels,
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One of the 28 labels. Serialized by name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EmotionLabel(u8);

impl EmotionLabel {
    pub fn from_id(id: u32) -> Result<Self, EmotionError> {
        if id < EMOTION_NAMES.len() as u32 {
            Ok(Self(id as u8))
        } else {
            Err(EmotionError::InvalidId(id))
        }
    }

    pub fn from_name(name: &str) -> Result<Self, EmotionError> {
        EMOTION_NAMES
            .iter()
            .position(|n| *n == name)
            .map(|i| Self(i as u8))
            .ok_or_else(|| EmotionError::UnknownLabel(name.to_string()))
    }

    pub fn id(self) -> u8 {
        self.0
    }

    pub fn name(self) -> &'static str {
        EMOTION_NAMES[self.0 as usize]
    }

    pub fn is_neutral(self) -> bool {
        self.0 == NEUTRAL_ID
    }

    /// All 28 labels in id order.
    pub fn all() -> Vec<Self> {
        (0..EMOTION_NAMES.len() as u8).map(Self).collect()
    }

    /// The 27 non-neutral labels in id order.
    pub fn without_neutral() -> Vec<Self> {
        (0..NEUTRAL_ID).map(Self).collect()
    }
}

impl fmt::Display for EmotionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EmotionLabel {
    type Err = EmotionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::from_name(s)
    }
}

impl Serialize for EmotionLabel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for EmotionLabel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let name = String::deserialize(d)?;
        Self::from_name(&name).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GoEmotionsRecord {
    pub text: String,
    pub labels: BTreeSet<EmotionLabel>,
    pub example_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkippedLine {
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Default)]
pub struct ParsedDataset {
    pub records: Vec<GoEmotionsRecord>,
    pub skipped: usize,
    pub skipped_lines: Vec<SkippedLine>,
}

/// Strips control characters, collapses whitespace runs to one space and
/// trims. Case, punctuation and emoji are left alone.
pub fn normalize_text(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut pending_space = false;
    for c in text.chars() {
        if c.is_whitespace() {
            pending_space = true;
        } else if c.is_control() {
            continue;
        } else {
            if pending_space && !out.is_empty() {
                out.push(' ');
            }
            pending_space = false;
            out.push(c);
        }
    }
    out
}

fn parse_line(line: &str) -> Result<GoEmotionsRecord, String> {
    let line = line.strip_suffix('\r').unwrap_or(line);
    let fields: Vec<&str> = line.split('\t').collect();
    if fields.len() != 3 {
        return Err(format!("expected 3 tab-separated fields, found {}", fields.len()));
    }
    let text = normalize_text(fields[0]);
    if text.is_empty() {
        return Err("empty text after normalization".into());
    }
    let mut labels = BTreeSet::new();
    for raw in fields[1].split(',') {
        let id: u32 = raw
            .trim()
            .parse()
            .map_err(|_| format!("bad label id {raw:?}"))?;
        labels.insert(EmotionLabel::from_id(id).map_err(|e| e.to_string())?);
    }
    let example_id = fields[2].trim();
    if example_id.is_empty() {
        return Err("empty example id".into());
    }
    Ok(GoEmotionsRecord {
        text,
        labels,
        example_id: example_id.to_string(),
    })
}

/// Parses the `text<TAB>ids<TAB>example_id` dataset format. Malformed lines
/// (including invalid UTF-8) are skipped and logged; only read failures abort.
pub fn parse_goemotions<R: BufRead>(mut source: R) -> Result<ParsedDataset, EmotionError> {
    let mut out = ParsedDataset::default();
    let mut buf = Vec::new();
    let mut line_no = 0;
    loop {
        buf.clear();
        if source.read_until(b'\n', &mut buf)? == 0 {
            break;
        }
        line_no += 1;
        if buf.last() == Some(&b'\n') {
            buf.pop();
        }
        let parsed = match std::str::from_utf8(&buf) {
            Ok(line) if line.trim().is_empty() => continue,
            Ok(line) => parse_line(line),
            Err(_) => Err("invalid UTF-8".to_string()),
        };
        match parsed {
            Ok(rec) => out.records.push(rec),
            Err(reason) => {
                log::warn!("goemotions line {line_no}: skipped ({reason})");
                out.skipped += 1;
                out.skipped_lines.push(SkippedLine {
                    line: line_no,
                    reason,
                });
            }
        }
    }
    Ok(out)
}

/// Training prompt layouts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TemplateId {
    /// Emotion names in, comment text out.
    #[default]
    EmotionToText,
    /// Comment text in, emotion names out.
    TextToEmotion,
}

impl TemplateId {
    pub fn as_str(self) -> &'static str {
        match self {
            TemplateId::EmotionToText => "emotion-to-text",
            TemplateId::TextToEmotion => "text-to-emotion",
        }
    }

    /// Why a run would pick this template; written into output metadata.
    pub fn rationale(self) -> &'static str {
        match self {
            TemplateId::EmotionToText => {
                "emotion-conditioned generation: the evaluation injects an emotional state into the \
                 prompt and expects emotionally colored answers, so the model is taught to write \
                 text given emotions"
            }
            TemplateId::TextToEmotion => {
                "classification direction: the model is taught to name the emotions expressed in a \
                 comment; provided for comparison"
            }
        }
    }
}

impl FromStr for TemplateId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "emotion-to-text" => Ok(TemplateId::EmotionToText),
            "text-to-emotion" => Ok(TemplateId::TextToEmotion),
            other => Err(format!(
                "unknown template {other:?} (expected emotion-to-text or text-to-emotion)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingExample {
    pub prompt: String,
    pub completion: String,
    pub labels: Vec<u8>,
}

fn joined_names(labels: &BTreeSet<EmotionLabel>) -> String {
    labels
        .iter()
        .map(|l| l.name())
        .collect::<Vec<_>>()
        .join(", ")
}

pub fn format_training_example(
    record: &GoEmotionsRecord,
    template: TemplateId,
) -> Result<TrainingExample, EmotionError> {
    if record.labels.is_empty() {
        return Err(EmotionError::EmptyLabels);
    }
    let text = normalize_text(&record.text);
    let names = joined_names(&record.labels);
    let (prompt, completion) = match template {
        TemplateId::EmotionToText => (
            format!(
                "### Instruction: Write a short comment expressing the following emotion(s): {names}.\n### Response:"
            ),
            text,
        ),
        TemplateId::TextToEmotion => (
            format!(
                "### Instruction: Name the emotion(s) expressed in the following comment.\n### Input: {text}\n### Response:"
            ),
            names,
        ),
    };
    Ok(TrainingExample {
        prompt,
        completion,
        labels: record.labels.iter().map(|l| l.id()).collect(),
    })
}

/// Writes one training example per record as JSON Lines, in input order.
pub fn emit_training_file<W: Write>(
    records: &[GoEmotionsRecord],
    template: TemplateId,
    mut sink: W,
) -> Result<usize, EmotionError> {
    let mut written = 0;
    for rec in records {
        let example = format_training_example(rec, template)?;
        serde_json::to_writer(&mut sink, &example).map_err(std::io::Error::from)?;
        sink.write_all(b"\n")?;
        written += 1;
    }
    sink.flush()?;
    Ok(written)
}

/// Hyperparameters handed to the adapter training script next to the
/// training file. Defaults are the recipe the harness was built around.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FinetuneConfig {
    pub base_model_id: String,
    pub training_file: String,
    pub template: TemplateId,
    pub r: u32,
    pub alpha: u32,
    pub dropout: f64,
    pub target_modules: Vec<String>,
    pub quantization_bits: u8,
    pub max_seq_len: u32,
    pub batch_size: u32,
    pub grad_accum_steps: u32,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub warmup_steps: u32,
    pub epochs: u32,
    pub seed: u64,
}

impl Default for FinetuneConfig {
    fn default() -> Self {
        Self {
            base_model_id: "QuantFactory/DarkIdol-Llama-3.1-8B-Instruct-1.2-Uncensored".to_string(),
            training_file: "train.jsonl".to_string(),
            template: TemplateId::default(),
            r: 16,
            alpha: 16,
            dropout: 0.0,
            target_modules: ["q_proj", "k_proj", "v_proj", "gate_proj", "embed_tokens"]
                .map(str::to_string)
                .to_vec(),
            quantization_bits: 4,
            max_seq_len: 2048,
            batch_size: 2,
            grad_accum_steps: 4,
            learning_rate: 2e-4,
            weight_decay: 0.01,
            warmup_steps: 5,
            epochs: 1,
            seed: 3407,
        }
    }
}

impl FinetuneConfig {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AssignmentMode {
    /// Round-robin over a seeded shuffle; label counts differ by at most one.
    #[default]
    Balanced,
    /// Independent uniform draw per persona.
    UniformRandom,
}

impl FromStr for AssignmentMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "balanced" => Ok(AssignmentMode::Balanced),
            "uniform-random" => Ok(AssignmentMode::UniformRandom),
            other => Err(format!("unknown assignment mode {other:?}")),
        }
    }
}

/// Persona id to emotion, in persona-list order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmotionAssignment {
    pub mode: AssignmentMode,
    pub seed: u64,
    pub labels: IndexMap<String, EmotionLabel>,
}

#[derive(Serialize, Deserialize)]
struct AssignmentLine {
    persona_id: String,
    emotion: EmotionLabel,
}

impl EmotionAssignment {
    pub fn get(&self, persona_id: &str) -> Option<EmotionLabel> {
        self.labels.get(persona_id).copied()
    }

    /// Count per label, over `palette` (labels never assigned count zero).
    pub fn counts(&self, palette: &[EmotionLabel]) -> IndexMap<EmotionLabel, usize> {
        let mut counts: IndexMap<EmotionLabel, usize> = palette.iter().map(|&l| (l, 0)).collect();
        for label in self.labels.values() {
            *counts.entry(*label).or_insert(0) += 1;
        }
        counts
    }

    pub fn write_jsonl<W: Write>(&self, mut sink: W) -> Result<(), EmotionError> {
        for (persona_id, &emotion) in &self.labels {
            let line = AssignmentLine {
                persona_id: persona_id.clone(),
                emotion,
            };
            serde_json::to_writer(&mut sink, &line).map_err(std::io::Error::from)?;
            sink.write_all(b"\n")?;
        }
        sink.flush()?;
        Ok(())
    }

    /// Reads an assignment file. Mode and seed are not stored in the file.
    pub fn read_jsonl<R: BufRead>(source: R) -> Result<Self, EmotionError> {
        let mut labels = IndexMap::new();
        for (i, line) in source.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let parsed: AssignmentLine =
                serde_json::from_str(&line).map_err(|e| EmotionError::Parse {
                    line: i + 1,
                    reason: e.to_string(),
                })?;
            labels.insert(parsed.persona_id, parsed.emotion);
        }
        Ok(Self {
            mode: AssignmentMode::Balanced,
            seed: 0,
            labels,
        })
    }
}

/// Assigns one label from `palette` to every persona.
///
/// Balanced mode shuffles persona positions with `seed` and deals labels
/// round-robin in palette order.
pub fn assign_emotions(
    personas: &[PersonaConfig],
    mode: AssignmentMode,
    seed: u64,
    palette: &[EmotionLabel],
) -> Result<EmotionAssignment, EmotionError> {
    if personas.is_empty() {
        return Err(EmotionError::NoPersonas);
    }
    if palette.is_empty() {
        return Err(EmotionError::NoLabels);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = vec![palette[0]; personas.len()];
    match mode {
        AssignmentMode::Balanced => {
            let mut order: Vec<usize> = (0..personas.len()).collect();
            order.shuffle(&mut rng);
            for (deal, &pos) in order.iter().enumerate() {
                chosen[pos] = palette[deal % palette.len()];
            }
        }
        AssignmentMode::UniformRandom => {
            for slot in chosen.iter_mut() {
                *slot = palette[rng.random_range(0..palette.len())];
            }
        }
    }
    let labels = personas
        .iter()
        .zip(chosen)
        .map(|(p, l)| (p.persona_id.clone(), l))
        .collect();
    Ok(EmotionAssignment { mode, seed, labels })
}
