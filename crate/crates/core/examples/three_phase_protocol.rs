//! Baseline, sequential and post-fine-tune phases against mock crowds, each
//! one a separate run directory, ending in a summary table.
//!
//! ```text
//! cargo run --release --example three_phase_protocol [out_dir]
//! ```

use std::path::PathBuf;

use crowdwise::backends::{CrowdModel, Distribution, MockBackend};
use crowdwise::reporting::{summary_table, SummaryRow, TableFormat};
use crowdwise::runner::{
    analyze_records, execute_with_backend, load_responses, verify_run, ExecuteOptions, ExperimentConfig, Phase,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let tmp = tempfile::tempdir()?;
    let out_dir = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| tmp.path().to_path_buf());

    // the fine-tuned stand-in is noisier and biased high
    let phases = [
        (Phase::Baseline, CrowdModel::normal(1426.0, 300.0)),
        (Phase::Sequential, CrowdModel::normal(1426.0, 300.0)),
        (
            Phase::PostFinetune,
            CrowdModel { refusal_rate: 0.03, ..CrowdModel::from_distribution(Distribution::Normal { mean: 1470.0, std_dev: 420.0 }) },
        ),
    ];

    let mut rows = Vec::new();
    for (phase, crowd) in phases {
        let cfg = ExperimentConfig {
            run_id: format!("{phase:?}").to_lowercase(),
            phase,
            n_personas: 1_064,
            output_dir: out_dir.clone(),
            ..Default::default()
        };
        let backend = MockBackend::new(crowd, "mock-crowd");
        let run = execute_with_backend(&cfg, &backend, ExecuteOptions::default())?;
        let report = verify_run(&run.responses_path, &cfg)?;
        println!("{}: {} records, verify {}", cfg.run_id, run.manifest.persisted, if report.is_ok() { "OK" } else { "FAILED" });

        let records = load_responses(&run.responses_path)?.records;
        for a in analyze_records(&records, &cfg.analysis)? {
            let label = format!("{} / {}", cfg.run_id, a.label);
            rows.push(SummaryRow::from_optimal(&label, &a.optimal, a.population + a.excluded));
        }
    }
    println!("\n{}", summary_table(&rows, TableFormat::Markdown)?);
    println!("runs under {}", out_dir.display());
    Ok(())
}
