//! Experiment orchestration: configuration, workload planning, resumable
//! execution, verification and analysis.
//!
//! A run directory holds:
//!
//! ```text
//! <output_dir>/<run_id>/
//!   personas.jsonl            personas used by the run
//!   emotion_assignment.jsonl  persona id -> emotion
//!   responses.jsonl           one ResponseRecord per prompt hash, append-only
//!   manifest.json             written atomically at the end of each execute
//! ```

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::mpsc;
use std::thread;

use chrono::{DateTime, Utc};
use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backends::{Backend, BackendConfig, ConfigError, GenerationParams, RecordStatus, ResponseRecord};
use crate::crowdstats::{
    default_grid, find_optimal, response_level_accuracy, sweep, AcceptanceRange, AccuracyCurve,
    Aggregator, OptimalSubsetResult, SamplingOptions, StatsError, DEFAULT_EPSILON,
    DEFAULT_EXHAUSTIVE_CAP, DEFAULT_TRIALS,
};
use crate::emotions::{assign_emotions, AssignmentMode, EmotionAssignment, EmotionError, EmotionLabel};
use crate::persona::{
    build_attribute_space, default_rules, read_personas_file, read_rules, sample_personas,
    write_personas, PersonaConfig, PersonaError, DEFAULT_PERSONA_COUNT,
};
use crate::promptgen::{build_prompt_with, PromptError, PromptSpec, PromptTemplates, PromptType};

pub const RESPONSES_FILE: &str = "responses.jsonl";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const PERSONAS_FILE: &str = "personas.jsonl";
pub const ASSIGNMENT_FILE: &str = "emotion_assignment.jsonl";

#[derive(Debug, Error)]
pub enum RunError {
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),
    #[error("{path}: responses already exist; pass --resume to continue the run")]
    OutputExists { path: PathBuf },
    #[error("{path}:{line}: unreadable record: {reason}")]
    CorruptOutput { path: PathBuf, line: usize, reason: String },
    #[error("I/O failure: {0}")]
    Io(#[from] std::io::Error),
}

impl RunError {
    /// Process exit code: 2 for configuration problems, 3 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::ConfigInvalid(_) | RunError::OutputExists { .. } => 2,
            RunError::CorruptOutput { .. } | RunError::Io(_) => 3,
        }
    }
}

impl From<PersonaError> for RunError {
    fn from(e: PersonaError) -> Self {
        match e {
            PersonaError::Io(io) => RunError::Io(io),
            other => RunError::ConfigInvalid(other.to_string()),
        }
    }
}

impl From<EmotionError> for RunError {
    fn from(e: EmotionError) -> Self {
        match e {
            EmotionError::Io(io) => RunError::Io(io),
            other => RunError::ConfigInvalid(other.to_string()),
        }
    }
}

impl From<PromptError> for RunError {
    fn from(e: PromptError) -> Self {
        RunError::ConfigInvalid(e.to_string())
    }
}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError::ConfigInvalid(e.to_string())
    }
}

impl From<StatsError> for RunError {
    fn from(e: StatsError) -> Self {
        RunError::ConfigInvalid(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    #[default]
    Baseline,
    Sequential,
    PostFinetune,
}

impl Phase {
    /// Prompt types run when the config does not list any.
    pub fn default_prompt_types(self) -> Vec<PromptType> {
        match self {
            Phase::Sequential => vec![PromptType::FullContext, PromptType::AttributesOnly],
            Phase::Baseline | Phase::PostFinetune => PromptType::ALL.to_vec(),
        }
    }
}

/// Where the persona-to-emotion mapping comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EmotionSource {
    File { path: PathBuf },
    Generate { mode: AssignmentMode, seed: u64 },
}

impl Default for EmotionSource {
    fn default() -> Self {
        EmotionSource::Generate {
            mode: AssignmentMode::Balanced,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnalysisConfig {
    /// Subset sizes; the default grid for the population when absent.
    pub grid: Option<Vec<usize>>,
    pub trials: usize,
    pub seed: u64,
    pub aggregator: Aggregator,
    pub epsilon: f64,
    pub range: AcceptanceRange,
    pub exhaustive_cap: u64,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            grid: None,
            trials: DEFAULT_TRIALS,
            seed: 0,
            aggregator: Aggregator::Mean,
            epsilon: DEFAULT_EPSILON,
            range: AcceptanceRange::default(),
            exhaustive_cap: DEFAULT_EXHAUSTIVE_CAP,
        }
    }
}

impl AnalysisConfig {
    pub fn sampling(&self) -> SamplingOptions {
        SamplingOptions {
            trials: self.trials,
            seed: self.seed,
            aggregator: self.aggregator,
            range: self.range,
            exhaustive_cap: self.exhaustive_cap,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub run_id: String,
    pub phase: Phase,
    /// Prompt types to run; the phase default when absent.
    pub prompt_types: Option<Vec<PromptType>>,
    /// Personas to use; sampled with `persona_seed` when absent.
    pub persona_file: Option<PathBuf>,
    pub persona_seed: u64,
    /// Consistency rule table (JSON); the built-in table when absent.
    pub rules_file: Option<PathBuf>,
    pub use_rules: bool,
    pub emotion_assignment: EmotionSource,
    pub include_neutral: bool,
    pub n_personas: usize,
    pub backend: BackendConfig,
    pub gen_params: GenerationParams,
    /// Core question; the built-in question when absent.
    pub question: Option<String>,
    /// Alternative prompt template file.
    pub template_file: Option<PathBuf>,
    pub analysis: AnalysisConfig,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            run_id: "run".to_string(),
            phase: Phase::Baseline,
            prompt_types: None,
            persona_file: None,
            persona_seed: 42,
            rules_file: None,
            use_rules: true,
            emotion_assignment: EmotionSource::default(),
            include_neutral: true,
            n_personas: DEFAULT_PERSONA_COUNT,
            backend: BackendConfig::default(),
            gen_params: GenerationParams::default(),
            question: None,
            template_file: None,
            analysis: AnalysisConfig::default(),
            output_dir: PathBuf::from("runs"),
        }
    }
}

impl ExperimentConfig {
    /// Parses a TOML config. Relative paths resolve against the file's
    /// directory.
    pub fn load(path: &Path) -> Result<Self, RunError> {
        let text = fs::read_to_string(path)?;
        let mut cfg: ExperimentConfig =
            toml::from_str(&text).map_err(|e| RunError::ConfigInvalid(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        resolve(&mut cfg.output_dir);
        for p in [&mut cfg.persona_file, &mut cfg.rules_file, &mut cfg.template_file]
            .into_iter()
            .flatten()
        {
            resolve(p);
        }
        if let EmotionSource::File { path } = &mut cfg.emotion_assignment {
            resolve(path);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes to TOML")
    }

    pub fn validate(&self) -> Result<(), RunError> {
        if self.run_id.trim().is_empty() || self.run_id.contains(['/', '\\']) {
            return Err(RunError::ConfigInvalid(format!("bad run_id {:?}", self.run_id)));
        }
        if matches!(&self.prompt_types, Some(t) if t.is_empty()) {
            return Err(RunError::ConfigInvalid("prompt_types is empty".into()));
        }
        if self.n_personas == 0 {
            return Err(RunError::ConfigInvalid("n_personas must be positive".into()));
        }
        if self.question.as_deref().is_some_and(|q| q.trim().is_empty()) {
            return Err(RunError::ConfigInvalid("question is empty".into()));
        }
        self.backend.validate()?;
        self.gen_params.validate()?;
        self.analysis.range.validate()?;
        self.analysis.aggregator.validate()?;
        if self.analysis.trials == 0 {
            return Err(StatsError::ZeroTrials.into());
        }
        if !(self.analysis.epsilon >= 0.0) {
            return Err(StatsError::InvalidEpsilon(self.analysis.epsilon).into());
        }
        Ok(())
    }

    pub fn prompt_types(&self) -> Vec<PromptType> {
        self.prompt_types
            .clone()
            .unwrap_or_else(|| self.phase.default_prompt_types())
    }

    pub fn run_dir(&self) -> PathBuf {
        self.output_dir.join(&self.run_id)
    }

    pub fn responses_path(&self) -> PathBuf {
        self.run_dir().join(RESPONSES_FILE)
    }

    pub fn palette(&self) -> Vec<EmotionLabel> {
        if self.include_neutral {
            EmotionLabel::all()
        } else {
            EmotionLabel::without_neutral()
        }
    }

    fn templates(&self) -> Result<PromptTemplates, RunError> {
        match &self.template_file {
            Some(p) => Ok(PromptTemplates::parse(&fs::read_to_string(p)?)?),
            None => Ok(PromptTemplates::builtin().clone()),
        }
    }
}

/// Everything a run needs, resolved from its config.
#[derive(Debug, Clone)]
pub struct Workload {
    pub personas: Vec<PersonaConfig>,
    pub assignment: EmotionAssignment,
    pub templates: PromptTemplates,
    pub specs: Vec<PromptSpec>,
}

fn load_personas(config: &ExperimentConfig) -> Result<Vec<PersonaConfig>, RunError> {
    let space = build_attribute_space();
    match &config.persona_file {
        Some(path) => {
            let mut personas = read_personas_file(path, &space)?;
            if personas.len() < config.n_personas {
                return Err(RunError::ConfigInvalid(format!(
                    "{} holds {} personas, n_personas is {}",
                    path.display(),
                    personas.len(),
                    config.n_personas
                )));
            }
            personas.truncate(config.n_personas);
            Ok(personas)
        }
        None => {
            let rules = match (&config.rules_file, config.use_rules) {
                (_, false) => Vec::new(),
                (Some(p), true) => read_rules(p)?,
                (None, true) => default_rules(),
            };
            Ok(sample_personas(&space, config.n_personas, config.persona_seed, &rules)?)
        }
    }
}

fn load_assignment(config: &ExperimentConfig, personas: &[PersonaConfig]) -> Result<EmotionAssignment, RunError> {
    match &config.emotion_assignment {
        EmotionSource::Generate { mode, seed } => {
            Ok(assign_emotions(personas, *mode, *seed, &config.palette())?)
        }
        EmotionSource::File { path } => {
            let loaded = EmotionAssignment::read_jsonl(BufReader::new(File::open(path)?))?;
            if let Some(p) = personas.iter().find(|p| loaded.get(&p.persona_id).is_none()) {
                return Err(RunError::ConfigInvalid(format!(
                    "{} has no emotion for persona {}",
                    path.display(),
                    p.persona_id
                )));
            }
            Ok(loaded)
        }
    }
}

/// Resolves personas and emotions and renders every prompt of the run.
pub fn prepare_workload(config: &ExperimentConfig) -> Result<Workload, RunError> {
    config.validate()?;
    let templates = config.templates()?;
    let question = config.question.clone().unwrap_or_else(|| templates.question.clone());
    let types = config.prompt_types();
    let needs_personas = types.iter().any(|t| t.uses_persona());
    let personas = load_personas(config)?;
    let assignment = load_assignment(config, &personas)?;
    let palette = config.palette();
    let n = config.n_personas;

    let persona_prompt = |t: PromptType, p: &PersonaConfig| -> Result<PromptSpec, RunError> {
        let emotion = if t.uses_emotion() { assignment.get(&p.persona_id) } else { None };
        Ok(build_prompt_with(&templates, t, Some(p), emotion, &question)?)
    };
    let non_persona = |t: PromptType| -> Result<Vec<PromptSpec>, RunError> {
        let mut out = Vec::new();
        match t {
            PromptType::EmotionalOnly => {
                let replicates = n.div_ceil(palette.len());
                for &e in &palette {
                    let spec = build_prompt_with(&templates, t, None, Some(e), &question)?;
                    out.extend((0..replicates).map(|r| spec.clone().with_replicate(r as u32)));
                }
            }
            PromptType::Base => {
                let spec = build_prompt_with(&templates, t, None, None, &question)?;
                out.extend((0..n).map(|r| spec.clone().with_replicate(r as u32)));
            }
            _ => unreachable!("persona prompt types are planned per persona"),
        }
        Ok(out)
    };

    let mut specs = Vec::new();
    if config.phase == Phase::Sequential && needs_personas {
        // each persona goes through its applicable prompt types in turn
        for p in &personas {
            for &t in types.iter().filter(|t| t.uses_persona()) {
                specs.push(persona_prompt(t, p)?);
            }
        }
        for &t in types.iter().filter(|t| !t.uses_persona()) {
            specs.extend(non_persona(t)?);
        }
    } else {
        for &t in &types {
            if t.uses_persona() {
                for p in &personas {
                    specs.push(persona_prompt(t, p)?);
                }
            } else {
                specs.extend(non_persona(t)?);
            }
        }
    }

    let mut seen = HashSet::with_capacity(specs.len());
    if let Some(dup) = specs.iter().find(|s| !seen.insert(s.prompt_hash.as_str())) {
        return Err(RunError::ConfigInvalid(format!(
            "plan contains duplicate prompt {} ({}); are personas repeated?",
            dup.prompt_hash, dup.prompt_type
        )));
    }
    Ok(Workload {
        personas,
        assignment,
        templates,
        specs,
    })
}

/// The ordered prompt list of a run.
pub fn plan_workload(config: &ExperimentConfig) -> Result<Vec<PromptSpec>, RunError> {
    Ok(prepare_workload(config)?.specs)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub config: ExperimentConfig,
    pub template_version: String,
    pub code_version: String,
    pub started_at: DateTime<Utc>,
    pub finished_at: DateTime<Utc>,
    pub resumed: bool,
    pub planned: usize,
    pub persisted: usize,
    pub new_backend_calls: usize,
    pub counts_per_prompt_type: IndexMap<PromptType, usize>,
    pub ok_records: usize,
    pub error_records: usize,
    pub extraction_misses: usize,
}

impl RunManifest {
    pub fn read(path: &Path) -> Result<Self, RunError> {
        let text = fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| RunError::CorruptOutput {
            path: path.to_path_buf(),
            line: e.line(),
            reason: e.to_string(),
        })
    }

    fn write_atomic(&self, path: &Path) -> Result<(), RunError> {
        let tmp = path.with_extension("json.tmp");
        {
            let mut f = File::create(&tmp)?;
            serde_json::to_writer_pretty(&mut f, self).map_err(std::io::Error::from)?;
            f.write_all(b"\n")?;
            f.sync_all()?;
        }
        fs::rename(&tmp, path)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ExecuteOptions {
    /// Continue an existing run, skipping prompts already persisted.
    pub resume: bool,
}

#[derive(Debug, Clone)]
pub struct ExecuteOutcome {
    pub responses_path: PathBuf,
    pub manifest: RunManifest,
}

/// Reads a responses file. A torn final line (a crash mid-write) is
/// reported separately rather than as corruption.
pub struct LoadedResponses {
    pub records: Vec<ResponseRecord>,
    /// Byte length of the well-formed prefix.
    pub valid_len: u64,
    pub torn_tail: bool,
}

pub fn load_responses(path: &Path) -> Result<LoadedResponses, RunError> {
    let mut reader = BufReader::new(File::open(path)?);
    let mut records = Vec::new();
    let mut valid_len = 0u64;
    let mut buf = Vec::new();
    let mut line_no = 0;
    loop {
        buf.clear();
        let read = reader.read_until(b'\n', &mut buf)?;
        if read == 0 {
            break;
        }
        line_no += 1;
        let complete = buf.last() == Some(&b'\n');
        let text = String::from_utf8_lossy(&buf);
        if text.trim().is_empty() {
            valid_len += read as u64;
            continue;
        }
        match serde_json::from_str::<ResponseRecord>(text.trim_end()) {
            Ok(r) if complete => {
                records.push(r);
                valid_len += read as u64;
            }
            // unterminated final line
            _ if !complete => {
                return Ok(LoadedResponses {
                    records,
                    valid_len,
                    torn_tail: true,
                })
            }
            Ok(_) => unreachable!(),
            Err(e) => {
                let mut rest = Vec::new();
                let tail = reader.read_until(b'\n', &mut rest)? == 0;
                if tail {
                    // a garbled last line is treated like a torn write
                    return Ok(LoadedResponses {
                        records,
                        valid_len,
                        torn_tail: true,
                    });
                }
                return Err(RunError::CorruptOutput {
                    path: path.to_path_buf(),
                    line: line_no,
                    reason: e.to_string(),
                });
            }
        }
    }
    Ok(LoadedResponses {
        records,
        valid_len,
        torn_tail: false,
    })
}

/// Writes `contents` unless the file already holds exactly that.
fn write_if_changed(path: &Path, contents: &[u8]) -> Result<(), RunError> {
    if fs::read(path).ok().as_deref() == Some(contents) {
        return Ok(());
    }
    fs::write(path, contents)?;
    Ok(())
}

/// Runs the configured backend over the plan.
pub fn execute(config: &ExperimentConfig, opts: ExecuteOptions) -> Result<ExecuteOutcome, RunError> {
    let backend = config.backend.build()?;
    execute_with_backend(config, backend.as_ref(), opts)
}

/// Generates a response for every planned prompt not yet persisted.
///
/// Up to `backend.max_in_flight` calls run concurrently; one writer appends
/// each finished record as a single line. Backend failures become error
/// records; only I/O and configuration problems abort.
pub fn execute_with_backend(
    config: &ExperimentConfig,
    backend: &dyn Backend,
    opts: ExecuteOptions,
) -> Result<ExecuteOutcome, RunError> {
    let started_at = Utc::now();
    let workload = prepare_workload(config)?;
    let run_dir = config.run_dir();
    fs::create_dir_all(&run_dir)?;

    let mut persona_buf = Vec::new();
    write_personas(&mut persona_buf, &workload.personas)?;
    write_if_changed(&run_dir.join(PERSONAS_FILE), &persona_buf)?;
    let mut assignment_buf = Vec::new();
    workload.assignment.write_jsonl(&mut assignment_buf)?;
    write_if_changed(&run_dir.join(ASSIGNMENT_FILE), &assignment_buf)?;

    let responses_path = run_dir.join(RESPONSES_FILE);
    let mut existing = Vec::new();
    if responses_path.exists() {
        let loaded = load_responses(&responses_path)?;
        if !opts.resume && !loaded.records.is_empty() {
            return Err(RunError::OutputExists { path: responses_path });
        }
        if loaded.torn_tail {
            log::warn!(
                "{}: dropping torn final line left by an interrupted run",
                responses_path.display()
            );
            OpenOptions::new()
                .write(true)
                .open(&responses_path)?
                .set_len(loaded.valid_len)?;
        }
        existing = loaded.records;
    }

    let done: HashSet<&str> = existing.iter().map(|r| r.prompt_hash.as_str()).collect();
    let pending: Vec<&PromptSpec> = workload
        .specs
        .iter()
        .filter(|s| !done.contains(s.prompt_hash.as_str()))
        .collect();
    log::info!(
        "{}: {} planned, {} already persisted, {} to generate",
        config.run_id,
        workload.specs.len(),
        workload.specs.len() - pending.len(),
        pending.len()
    );

    let mut file = OpenOptions::new().create(true).append(true).open(&responses_path)?;
    let mut new_records = Vec::with_capacity(pending.len());
    let workers = config.backend.max_in_flight.min(pending.len()).max(1);
    let next = AtomicUsize::new(0);
    let stop = AtomicBool::new(false);
    let template_version = workload.templates.version.as_str();

    let write_result: Result<(), RunError> = thread::scope(|scope| {
        let (tx, rx) = mpsc::channel::<ResponseRecord>();
        for _ in 0..workers {
            let tx = tx.clone();
            let (next, stop, pending) = (&next, &stop, &pending);
            let params = config.gen_params;
            scope.spawn(move || loop {
                if stop.load(Ordering::SeqCst) {
                    break;
                }
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(spec) = pending.get(i) else { break };
                let outcome = backend.generate(spec, &params);
                let record = ResponseRecord::from_outcome(spec, template_version, backend, outcome, Utc::now());
                if tx.send(record).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        for record in rx {
            let mut line = serde_json::to_vec(&record).map_err(std::io::Error::from)?;
            line.push(b'\n');
            if let Err(e) = file.write_all(&line).and_then(|_| file.flush()) {
                stop.store(true, Ordering::SeqCst);
                return Err(e.into());
            }
            new_records.push(record);
        }
        Ok(())
    });
    write_result?;
    file.sync_all()?;

    let new_calls = new_records.len();
    let all: Vec<&ResponseRecord> = existing.iter().chain(new_records.iter()).collect();
    let mut counts: IndexMap<PromptType, usize> = config.prompt_types().into_iter().map(|t| (t, 0)).collect();
    for r in &all {
        *counts.entry(r.prompt_type).or_insert(0) += 1;
    }
    let ok_records = all.iter().filter(|r| r.status == RecordStatus::Ok).count();
    let extraction_misses = all
        .iter()
        .filter(|r| r.status == RecordStatus::Ok && r.extracted_miles.is_none())
        .count();
    let manifest = RunManifest {
        run_id: config.run_id.clone(),
        config: config.clone(),
        template_version: template_version.to_string(),
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        started_at,
        finished_at: Utc::now(),
        resumed: opts.resume && !existing.is_empty(),
        planned: workload.specs.len(),
        persisted: all.len(),
        new_backend_calls: new_calls,
        counts_per_prompt_type: counts,
        ok_records,
        error_records: all.len() - ok_records,
        extraction_misses,
    };
    manifest.write_atomic(&run_dir.join(MANIFEST_FILE))?;
    Ok(ExecuteOutcome {
        responses_path,
        manifest,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Finding {
    UnreadableTail,
    DuplicateHash { prompt_hash: String, occurrences: usize },
    MissingHashes { count: usize, examples: Vec<String> },
    UnexpectedHashes { count: usize, examples: Vec<String> },
    CountMismatch { prompt_type: PromptType, planned: usize, persisted: usize },
    ErrorRecords { count: usize },
    ExtractionMismatch { prompt_hash: String },
    EmotionImbalance { prompt_type: PromptType, min: usize, max: usize },
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Finding::UnreadableTail => write!(f, "final line is truncated"),
            Finding::DuplicateHash { prompt_hash, occurrences } => {
                write!(f, "prompt {prompt_hash} persisted {occurrences} times")
            }
            Finding::MissingHashes { count, examples } => {
                write!(f, "{count} planned prompt(s) have no record (e.g. {})", examples.join(", "))
            }
            Finding::UnexpectedHashes { count, examples } => {
                write!(f, "{count} record(s) are not in the plan (e.g. {})", examples.join(", "))
            }
            Finding::CountMismatch { prompt_type, planned, persisted } => {
                write!(f, "{prompt_type}: {persisted} records for {planned} planned prompts")
            }
            Finding::ErrorRecords { count } => write!(f, "{count} record(s) carry backend errors"),
            Finding::ExtractionMismatch { prompt_hash } => {
                write!(f, "record {prompt_hash}: extracted_miles disagrees with its raw text")
            }
            Finding::EmotionImbalance { prompt_type, min, max } => {
                write!(f, "{prompt_type}: emotion counts range {min}..{max} under balanced assignment")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub planned: usize,
    pub persisted: usize,
    pub per_prompt_type: IndexMap<PromptType, usize>,
    pub per_emotion: IndexMap<PromptType, BTreeMap<String, usize>>,
    pub extraction_misses: usize,
    pub extraction_miss_rate: f64,
    pub findings: Vec<Finding>,
}

impl VerifyReport {
    pub fn is_ok(&self) -> bool {
        self.findings.is_empty()
    }
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "planned {}  persisted {}", self.planned, self.persisted)?;
        for (t, c) in &self.per_prompt_type {
            writeln!(f, "  {t}: {c}")?;
        }
        writeln!(
            f,
            "extraction misses: {} ({:.2}%)",
            self.extraction_misses,
            100.0 * self.extraction_miss_rate
        )?;
        if self.findings.is_empty() {
            write!(f, "OK")
        } else {
            writeln!(f, "{} finding(s):", self.findings.len())?;
            for (i, finding) in self.findings.iter().enumerate() {
                if i > 0 {
                    writeln!(f)?;
                }
                write!(f, "  - {finding}")?;
            }
            Ok(())
        }
    }
}

const EXAMPLE_LIMIT: usize = 5;

/// Compares a responses file against the plan for `config`.
pub fn verify_run(responses: &Path, config: &ExperimentConfig) -> Result<VerifyReport, RunError> {
    let workload = prepare_workload(config)?;
    let loaded = load_responses(responses)?;
    let mut findings = Vec::new();
    if loaded.torn_tail {
        findings.push(Finding::UnreadableTail);
    }
    let records = loaded.records;

    let mut occurrences: IndexMap<&str, usize> = IndexMap::new();
    for r in &records {
        *occurrences.entry(r.prompt_hash.as_str()).or_insert(0) += 1;
    }
    for (h, &c) in &occurrences {
        if c > 1 {
            findings.push(Finding::DuplicateHash {
                prompt_hash: h.to_string(),
                occurrences: c,
            });
        }
    }

    let planned: HashSet<&str> = workload.specs.iter().map(|s| s.prompt_hash.as_str()).collect();
    let missing: Vec<String> = workload
        .specs
        .iter()
        .filter(|s| !occurrences.contains_key(s.prompt_hash.as_str()))
        .map(|s| s.prompt_hash.clone())
        .collect();
    if !missing.is_empty() {
        findings.push(Finding::MissingHashes {
            count: missing.len(),
            examples: missing.into_iter().take(EXAMPLE_LIMIT).collect(),
        });
    }
    let unexpected: Vec<String> = occurrences
        .keys()
        .filter(|h| !planned.contains(*h))
        .map(|h| h.to_string())
        .collect();
    if !unexpected.is_empty() {
        findings.push(Finding::UnexpectedHashes {
            count: unexpected.len(),
            examples: unexpected.into_iter().take(EXAMPLE_LIMIT).collect(),
        });
    }

    let mut planned_per_type: IndexMap<PromptType, usize> = IndexMap::new();
    for s in &workload.specs {
        *planned_per_type.entry(s.prompt_type).or_insert(0) += 1;
    }
    let mut per_type: IndexMap<PromptType, usize> = planned_per_type.keys().map(|&t| (t, 0)).collect();
    let mut per_emotion: IndexMap<PromptType, BTreeMap<String, usize>> = IndexMap::new();
    for r in &records {
        *per_type.entry(r.prompt_type).or_insert(0) += 1;
        if let Some(e) = r.emotion {
            *per_emotion
                .entry(r.prompt_type)
                .or_default()
                .entry(e.name().to_string())
                .or_insert(0) += 1;
        }
    }
    for (&t, &persisted) in &per_type {
        let planned = planned_per_type.get(&t).copied().unwrap_or(0);
        if planned != persisted {
            findings.push(Finding::CountMismatch {
                prompt_type: t,
                planned,
                persisted,
            });
        }
    }

    let balanced = matches!(
        config.emotion_assignment,
        EmotionSource::Generate {
            mode: AssignmentMode::Balanced,
            ..
        }
    );
    if balanced {
        let palette = config.palette();
        for (&t, counts) in &per_emotion {
            let all: Vec<usize> = palette
                .iter()
                .map(|l| counts.get(l.name()).copied().unwrap_or(0))
                .collect();
            let (min, max) = (
                all.iter().copied().min().unwrap_or(0),
                all.iter().copied().max().unwrap_or(0),
            );
            if max - min > 1 {
                findings.push(Finding::EmotionImbalance { prompt_type: t, min, max });
            }
        }
    }

    let errors = records.iter().filter(|r| r.status == RecordStatus::Error).count();
    if errors > 0 {
        findings.push(Finding::ErrorRecords { count: errors });
    }
    for r in records.iter().filter(|r| !r.extraction_consistent()) {
        findings.push(Finding::ExtractionMismatch {
            prompt_hash: r.prompt_hash.clone(),
        });
    }
    let ok: Vec<&ResponseRecord> = records.iter().filter(|r| r.status == RecordStatus::Ok).collect();
    let misses = ok.iter().filter(|r| r.extracted_miles.is_none()).count();

    Ok(VerifyReport {
        planned: workload.specs.len(),
        persisted: records.len(),
        per_prompt_type: per_type,
        per_emotion,
        extraction_misses: misses,
        extraction_miss_rate: if ok.is_empty() { 0.0 } else { misses as f64 / ok.len() as f64 },
        findings,
    })
}

/// Analysis of one prompt type's responses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypeAnalysis {
    pub prompt_type: PromptType,
    pub label: String,
    /// Responses with a usable estimate.
    pub population: usize,
    /// Error records and replies without an estimate.
    pub excluded: usize,
    pub response_level_accuracy: Option<f64>,
    pub curve: AccuracyCurve,
    pub optimal: OptimalSubsetResult,
}

/// Usable estimates per prompt type, plus how many records were excluded.
pub fn estimates_by_type(records: &[ResponseRecord]) -> IndexMap<PromptType, (Vec<f64>, usize)> {
    let mut out: IndexMap<PromptType, (Vec<f64>, usize)> = IndexMap::new();
    for t in PromptType::ALL {
        if records.iter().any(|r| r.prompt_type == t) {
            out.insert(t, (Vec::new(), 0));
        }
    }
    for r in records {
        let slot = out.get_mut(&r.prompt_type).expect("inserted above");
        match (r.status, r.extracted_miles) {
            (RecordStatus::Ok, Some(m)) => slot.0.push(m),
            _ => slot.1 += 1,
        }
    }
    out
}

/// Sweeps every prompt type present in `records`. When `analysis.grid` is
/// absent each type uses the default grid for its own population.
pub fn analyze_records(records: &[ResponseRecord], analysis: &AnalysisConfig) -> Result<Vec<TypeAnalysis>, RunError> {
    let opts = analysis.sampling();
    let mut out = Vec::new();
    for (prompt_type, (values, excluded)) in estimates_by_type(records) {
        if values.is_empty() {
            log::warn!("{prompt_type}: no usable estimates, skipping");
            continue;
        }
        let grid = match &analysis.grid {
            Some(g) => g.iter().copied().filter(|&k| k >= 1 && k <= values.len()).collect(),
            None => default_grid(values.len()),
        };
        let curve = sweep(&values, &grid, &opts)?;
        let optimal = find_optimal(&curve, analysis.epsilon)?;
        out.push(TypeAnalysis {
            prompt_type,
            label: prompt_type.table_label().to_string(),
            population: values.len(),
            excluded,
            response_level_accuracy: response_level_accuracy(&values, &analysis.range),
            curve,
            optimal,
        });
    }
    Ok(out)
}

/// Prompt hashes of `records`, keyed to their raw text.
pub fn texts_by_hash(records: &[ResponseRecord]) -> HashMap<&str, &str> {
    records
        .iter()
        .map(|r| (r.prompt_hash.as_str(), r.raw_text.as_str()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backends::{BackendError, CrowdModel, Generation, MockBackend};

    fn config(dir: &Path, n: usize, types: &[PromptType]) -> ExperimentConfig {
        ExperimentConfig {
            run_id: "t".into(),
            n_personas: n,
            prompt_types: Some(types.to_vec()),
            output_dir: dir.to_path_buf(),
            ..Default::default()
        }
    }

    #[test]
    fn base_replicates_share_text() {
        let dir = tempfile::tempdir().unwrap();
        let specs = plan_workload(&config(dir.path(), 3, &[PromptType::Base])).unwrap();
        assert_eq!(specs.len(), 3);
        assert!(specs.iter().all(|s| s.rendered() == specs[0].rendered()));
        let hashes: HashSet<_> = specs.iter().map(|s| &s.prompt_hash).collect();
        assert_eq!(hashes.len(), 3);
    }

    #[test]
    fn emotional_only_rounds_up_per_emotion() {
        let dir = tempfile::tempdir().unwrap();
        let specs = plan_workload(&config(dir.path(), 30, &[PromptType::EmotionalOnly])).unwrap();
        // ceil(30 / 28) = 2 per emotion
        assert_eq!(specs.len(), 56);
        let mut cfg = config(dir.path(), 30, &[PromptType::EmotionalOnly]);
        cfg.include_neutral = false;
        let specs = plan_workload(&cfg).unwrap();
        assert_eq!(specs.len(), 54);
        assert!(specs.iter().all(|s| !s.emotion.unwrap().is_neutral()));
    }

    #[test]
    fn sequential_phase_is_persona_major() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = config(dir.path(), 4, &[]);
        cfg.prompt_types = None;
        cfg.phase = Phase::Sequential;
        let specs = plan_workload(&cfg).unwrap();
        let types: Vec<_> = specs.iter().map(|s| s.prompt_type).collect();
        assert_eq!(
            &types[..4],
            &[
                PromptType::FullContext,
                PromptType::AttributesOnly,
                PromptType::FullContext,
                PromptType::AttributesOnly
            ]
        );
        assert_eq!(specs.len(), 8);
        assert_eq!(specs[0].persona, specs[1].persona);
    }

    #[test]
    fn config_errors() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = config(dir.path(), 3, &[]);
        assert!(matches!(cfg.validate(), Err(RunError::ConfigInvalid(_))));
        cfg.prompt_types = None;
        assert!(cfg.validate().is_ok());
        cfg.run_id = "a/b".into();
        assert_eq!(cfg.validate().unwrap_err().exit_code(), 2);
    }

    #[test]
    fn config_toml_round_trip() {
        let cfg = ExperimentConfig::default();
        let text = cfg.to_toml();
        let back: ExperimentConfig = toml::from_str(&text).unwrap();
        assert_eq!(back, cfg);
    }

    struct Flaky;
    impl Backend for Flaky {
        fn name(&self) -> &str {
            "flaky"
        }
        fn model_id(&self) -> &str {
            "f"
        }
        fn generate(&self, spec: &PromptSpec, _: &GenerationParams) -> Result<Generation, BackendError> {
            if spec.replicate.unwrap_or(0) % 2 == 0 {
                Err(BackendError::Unavailable {
                    reason: "down".into(),
                    attempts: 2,
                })
            } else {
                Ok(Generation {
                    text: "1426 miles".into(),
                    attempts: 1,
                })
            }
        }
    }

    #[test]
    fn backend_failures_become_error_records() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = config(dir.path(), 6, &[PromptType::Base]);
        let out = execute_with_backend(&cfg, &Flaky, ExecuteOptions::default()).unwrap();
        assert_eq!(out.manifest.persisted, 6);
        assert_eq!(out.manifest.error_records, 3);
        let recs = load_responses(&out.responses_path).unwrap().records;
        let err = recs.iter().find(|r| r.status == RecordStatus::Error).unwrap();
        assert_eq!(err.attempt_count, 2);
        assert!(err.error.as_deref().unwrap().contains("down"));
        let report = verify_run(&out.responses_path, &cfg).unwrap();
        assert_eq!(report.findings, vec![Finding::ErrorRecords { count: 3 }]);
    }

    #[test]
    fn refusing_without_resume() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = config(dir.path(), 3, &[PromptType::Base]);
        let mock = MockBackend::new(CrowdModel::constant(1426.0), "m");
        execute_with_backend(&cfg, &mock, ExecuteOptions::default()).unwrap();
        let err = execute_with_backend(&cfg, &mock, ExecuteOptions::default()).unwrap_err();
        assert!(matches!(err, RunError::OutputExists { .. }));
    }

    #[test]
    fn corrupt_middle_line_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = config(dir.path(), 3, &[PromptType::Base]);
        let mock = MockBackend::new(CrowdModel::constant(1426.0), "m");
        let out = execute_with_backend(&cfg, &mock, ExecuteOptions::default()).unwrap();
        let text = fs::read_to_string(&out.responses_path).unwrap();
        let mut lines: Vec<&str> = text.lines().collect();
        lines.insert(1, "{garbage");
        fs::write(&out.responses_path, lines.join("\n") + "\n").unwrap();
        let err = load_responses(&out.responses_path).err().unwrap();
        assert!(matches!(err, RunError::CorruptOutput { line: 2, .. }));
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn analysis_excludes_misses() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = config(dir.path(), 40, &[PromptType::Base]);
        cfg.backend.crowd = CrowdModel::normal(1426.0, 20.0);
        cfg.backend.crowd.refusal_rate = 0.25;
        let out = execute(&cfg, ExecuteOptions::default()).unwrap();
        let recs = load_responses(&out.responses_path).unwrap().records;
        let analyses = analyze_records(&recs, &cfg.analysis).unwrap();
        assert_eq!(analyses.len(), 1);
        let a = &analyses[0];
        assert_eq!(a.population + a.excluded, 40);
        assert!(a.excluded > 0);
        assert_eq!(a.label, "Only Prompt");
        assert_eq!(a.curve.meta.population, a.population);
        assert_eq!(out.manifest.extraction_misses, a.excluded);
    }
}
