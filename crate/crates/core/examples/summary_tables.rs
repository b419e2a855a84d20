//! Summary tables and curve plots from fixed values, the way `crowdwise
//! report` renders them.
//!
//! ```text
//! cargo run --example summary_tables [svg_dir]
//! ```

use std::path::PathBuf;

use crowdwise::crowdstats::{AcceptanceRange, AccuracyCurve, Aggregator, CurveMeta, CurvePoint};
use crowdwise::reporting::{compare_runs, summary_table, write_curve_svg, LabeledCurve, SummaryRow, TableFormat};

fn curve(label: &str, points: &[(usize, f64)]) -> LabeledCurve {
    LabeledCurve {
        label: label.into(),
        roles: 15_064,
        epsilon: 0.005,
        curve: AccuracyCurve {
            points: points
                .iter()
                .map(|&(k, accuracy)| CurvePoint { k, accuracy, trials: 1000, stderr: 0.0, exhaustive: false })
                .collect(),
            meta: CurveMeta {
                aggregator: Aggregator::Mean,
                seed: 42,
                population: 15_064,
                range: AcceptanceRange::default(),
                trials: 1000,
                exhaustive_cap: 100_000,
            },
        },
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let rows = [
        SummaryRow::new("Attributes", 1076, 92.66, "15064 roles"),
        SummaryRow::new("Emotions", 538, 36.99, "15064 roles"),
        SummaryRow::new("Emotions (fine-tuned)", 4842, 31.68, "15064 roles"),
    ];
    print!("{}", summary_table(&rows, TableFormat::Csv)?);
    println!();
    print!("{}", summary_table(&rows, TableFormat::Markdown)?);

    let attributes = curve("Attributes", &[(538, 0.871), (1076, 0.9266), (1614, 0.925), (2152, 0.9262)]);
    let emotions = curve("Emotions", &[(538, 0.3699), (1076, 0.352), (1614, 0.3688), (2152, 0.3411)]);
    println!();
    print!("{}", compare_runs(&attributes, &emotions)?);

    if let Some(dir) = std::env::args().nth(1).map(PathBuf::from) {
        std::fs::create_dir_all(&dir)?;
        for c in [&attributes, &emotions] {
            let path = dir.join(format!("{}.svg", c.label.to_lowercase()));
            write_curve_svg(&path, &c.curve, &c.label, Some(c.optimal()?.k_star))?;
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}
