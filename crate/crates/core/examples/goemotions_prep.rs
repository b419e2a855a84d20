//! Turn a GoEmotions TSV into training JSONL and print the adapter config
//! the fine-tuning script reads.
//!
//! ```text
//! cargo run --example goemotions_prep [path/to/train.tsv]
//! ```

use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;

use crowdwise::emotions::{emit_training_file, parse_goemotions, FinetuneConfig, TemplateId};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| {
        PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/goemotions_sample.tsv")
    });
    let parsed = parse_goemotions(BufReader::new(File::open(&path)?))?;
    eprintln!("{} records, {} skipped", parsed.records.len(), parsed.skipped);
    for s in parsed.skipped_lines.iter().take(3) {
        eprintln!("  line {}: {}", s.line, s.reason);
    }

    let template = TemplateId::default();
    eprintln!("template {}: {}", template.as_str(), template.rationale());
    let mut out = Vec::new();
    let n = emit_training_file(&parsed.records[..3.min(parsed.records.len())], template, &mut out)?;
    print!("{}", String::from_utf8(out)?);
    eprintln!("({n} of {} shown)", parsed.records.len());

    let config = FinetuneConfig {
        training_file: "goemotions_train.jsonl".into(),
        template,
        ..Default::default()
    };
    println!("{}", config.to_json());
    Ok(())
}
