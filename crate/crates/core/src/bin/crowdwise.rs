use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crowdwise::crowdstats::{Aggregator, DEFAULT_EPSILON, DEFAULT_EXHAUSTIVE_CAP, DEFAULT_TRIALS};
use crowdwise::emotions::{emit_training_file, parse_goemotions, FinetuneConfig, TemplateId};
use crowdwise::persona::{build_attribute_space, default_rules, read_rules, sample_personas, write_personas};
use crowdwise::promptgen::PromptType;
use crowdwise::reporting::{self, save_curve, summary_table, LabeledCurve, TableFormat};
use crowdwise::runner::{
    analyze_records, execute, load_responses, verify_run, AnalysisConfig, ExecuteOptions, ExperimentConfig,
    RunError,
};

#[derive(Parser)]
#[command(name = "crowdwise", version, about = "Persona and emotion crowd simulation harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Persona sampling.
    #[command(subcommand)]
    Personas(PersonasCmd),
    /// Training data preparation.
    #[command(subcommand)]
    Dataset(DatasetCmd),
    /// Execute (or resume) a configured run.
    Run(RunArgs),
    /// Sweep subset sizes over a responses file.
    Analyze(AnalyzeArgs),
    /// Summary tables and plots from curve files.
    Report(ReportArgs),
    /// Check a responses file against its plan.
    Verify(VerifyArgs),
}

#[derive(Subcommand)]
enum PersonasCmd {
    Generate {
        #[arg(long, default_value_t = crowdwise::persona::DEFAULT_PERSONA_COUNT)]
        n: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// JSON rule table; the built-in rules when omitted.
        #[arg(long)]
        rules: Option<PathBuf>,
        /// Sample without any consistency rules.
        #[arg(long, conflicts_with = "rules")]
        no_rules: bool,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum DatasetCmd {
    PrepGoemotions {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value = "emotion-to-text")]
        template: TemplateId,
        #[arg(long)]
        out: PathBuf,
        /// Also write the adapter training config here.
        #[arg(long)]
        config_out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    resume: bool,
    /// Restrict the run to these prompt types.
    #[arg(long = "prompt-type", value_delimiter = ',')]
    prompt_types: Vec<PromptType>,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long)]
    responses: PathBuf,
    /// Comma-separated subset sizes; the default grid per prompt type when omitted.
    #[arg(long, value_delimiter = ',')]
    grid: Vec<usize>,
    #[arg(long, default_value_t = DEFAULT_TRIALS)]
    trials: usize,
    #[arg(long, default_value = "mean")]
    aggregator: Aggregator,
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    epsilon: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_EXHAUSTIVE_CAP)]
    exhaustive_cap: u64,
    /// Output directory for curve files and the summary table.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long, num_args = 1.., required = true)]
    curves: Vec<PathBuf>,
    #[arg(long, default_value = "md")]
    format: TableFormat,
    #[arg(long)]
    svg_dir: Option<PathBuf>,
    /// Write the table here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also print a delta table between the first two curves.
    #[arg(long)]
    compare: bool,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    responses: PathBuf,
    #[arg(long)]
    config: PathBuf,
}

enum Failure {
    Config(String),
    Io(String),
}

impl From<RunError> for Failure {
    fn from(e: RunError) -> Self {
        match e.exit_code() {
            2 => Failure::Config(e.to_string()),
            _ => Failure::Io(e.to_string()),
        }
    }
}

impl From<reporting::ReportError> for Failure {
    fn from(e: reporting::ReportError) -> Self {
        match e {
            reporting::ReportError::Io(_) | reporting::ReportError::Parse { .. } => Failure::Io(e.to_string()),
            other => Failure::Config(other.to_string()),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

fn io_err<E: std::fmt::Display>(path: &Path) -> impl FnOnce(E) -> Failure + '_ {
    move |e| Failure::Io(format!("{}: {e}", path.display()))
}

fn personas(cmd: PersonasCmd) -> Result<bool, Failure> {
    let PersonasCmd::Generate {
        n,
        seed,
        rules,
        no_rules,
        out,
    } = cmd;
    let rules = match (rules, no_rules) {
        (_, true) => Vec::new(),
        (Some(p), _) => read_rules(&p).map_err(|e| Failure::Config(format!("{}: {e}", p.display())))?,
        (None, _) => default_rules(),
    };
    let space = build_attribute_space();
    let personas = sample_personas(&space, n, seed, &rules).map_err(|e| Failure::Config(e.to_string()))?;
    let mut sink = BufWriter::new(File::create(&out).map_err(io_err(&out))?);
    write_personas(&mut sink, &personas).map_err(io_err(&out))?;
    sink.flush()?;
    eprintln!("wrote {} personas to {}", personas.len(), out.display());
    Ok(true)
}

fn dataset(cmd: DatasetCmd) -> Result<bool, Failure> {
    let DatasetCmd::PrepGoemotions {
        input,
        template,
        out,
        config_out,
    } = cmd;
    let parsed = parse_goemotions(BufReader::new(File::open(&input).map_err(io_err(&input))?))
        .map_err(io_err(&input))?;
    let mut sink = BufWriter::new(File::create(&out).map_err(io_err(&out))?);
    let written = emit_training_file(&parsed.records, template, &mut sink).map_err(io_err(&out))?;
    sink.flush()?;
    eprintln!(
        "wrote {written} examples to {} ({} malformed lines skipped); template {}: {}",
        out.display(),
        parsed.skipped,
        template.as_str(),
        template.rationale()
    );
    if let Some(path) = config_out {
        let cfg = FinetuneConfig {
            training_file: out.display().to_string(),
            template,
            ..FinetuneConfig::default()
        };
        fs::write(&path, cfg.to_json()).map_err(io_err(&path))?;
    }
    Ok(true)
}

fn run(args: RunArgs) -> Result<bool, Failure> {
    let mut config = ExperimentConfig::load(&args.config)?;
    if !args.prompt_types.is_empty() {
        config.prompt_types = Some(args.prompt_types);
    }
    let out = execute(&config, ExecuteOptions { resume: args.resume })?;
    let m = &out.manifest;
    println!(
        "{}: {} records ({} new calls, {} errors, {} without an estimate)",
        out.responses_path.display(),
        m.persisted,
        m.new_backend_calls,
        m.error_records,
        m.extraction_misses
    );
    Ok(true)
}

fn analyze(args: AnalyzeArgs) -> Result<bool, Failure> {
    let records = load_responses(&args.responses)?.records;
    let analysis = AnalysisConfig {
        grid: (!args.grid.is_empty()).then_some(args.grid),
        trials: args.trials,
        seed: args.seed,
        aggregator: args.aggregator,
        epsilon: args.epsilon,
        exhaustive_cap: args.exhaustive_cap,
        ..AnalysisConfig::default()
    };
    let results = analyze_records(&records, &analysis)?;
    fs::create_dir_all(&args.out).map_err(io_err(&args.out))?;
    let mut rows = Vec::new();
    for a in &results {
        let labeled = LabeledCurve {
            label: a.label.clone(),
            roles: a.population + a.excluded,
            epsilon: a.optimal.epsilon,
            curve: a.curve.clone(),
        };
        save_curve(&args.out.join(format!("curve_{}.csv", a.prompt_type)), &labeled)?;
        rows.push(labeled.summary_row()?);
        let rla = a
            .response_level_accuracy
            .map_or("n/a".to_string(), |v| format!("{:.2}%", 100.0 * v));
        eprintln!(
            "{}: k* = {}, accuracy {:.2}%, {} excluded, response-level {rla}",
            a.prompt_type,
            a.optimal.k_star,
            100.0 * a.optimal.accuracy_at_k_star,
            a.excluded
        );
    }
    let table = summary_table(&rows, TableFormat::Csv)?;
    let path = args.out.join("summary.csv");
    fs::write(&path, &table).map_err(io_err(&path))?;
    print!("{table}");
    Ok(true)
}

fn report(args: ReportArgs) -> Result<bool, Failure> {
    let curves = args
        .curves
        .iter()
        .map(|p| reporting::load_curve(p))
        .collect::<Result<Vec<_>, _>>()?;
    let rows = curves.iter().map(|c| c.summary_row()).collect::<Result<Vec<_>, _>>()?;
    let mut text = summary_table(&rows, args.format)?;
    if args.compare && curves.len() >= 2 {
        text.push('\n');
        text.push_str(&reporting::compare_runs(&curves[0], &curves[1])?);
    }
    match &args.out {
        Some(p) => fs::write(p, &text).map_err(io_err(p))?,
        None => print!("{text}"),
    }
    if let Some(dir) = &args.svg_dir {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        for (path, c) in args.curves.iter().zip(&curves) {
            let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("curve");
            let svg = dir.join(format!("{stem}.svg"));
            reporting::write_curve_svg(&svg, &c.curve, &c.label, Some(c.optimal()?.k_star))?;
        }
    }
    Ok(true)
}

fn verify(args: VerifyArgs) -> Result<bool, Failure> {
    let config = ExperimentConfig::load(&args.config)?;
    let report = verify_run(&args.responses, &config)?;
    println!("{report}");
    Ok(report.is_ok())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Personas(c) => personas(c),
        Command::Dataset(c) => dataset(c),
        Command::Run(a) => run(a),
        Command::Analyze(a) => analyze(a),
        Command::Report(a) => report(a),
        Command::Verify(a) => verify(a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Io(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}
