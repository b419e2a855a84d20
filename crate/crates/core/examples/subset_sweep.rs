//! Accuracy of the crowd aggregate as the subset size grows, for three
//! aggregators over the same synthetic responses.
//!
//! ```text
//! cargo run --release --example subset_sweep
//! ```

use crowdwise::crowdstats::{default_grid, find_optimal, sweep, Aggregator, SamplingOptions, DEFAULT_EPSILON};
use statrs::distribution::{ContinuousCDF, Normal};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // most of the crowd is close; every 25th answer is a wild overestimate
    let n = 1_500;
    let core = Normal::new(1418.0, 250.0)?;
    let values: Vec<f64> = (0..n)
        .map(|i| {
            let v = core.inverse_cdf((i as f64 + 0.5) / n as f64).round();
            if i % 25 == 0 { v + 400.0 } else { v }
        })
        .collect();

    let grid = default_grid(values.len());
    let aggregators = [Aggregator::Mean, Aggregator::Median, Aggregator::TrimmedMean(0.1)];
    let mut curves = Vec::new();
    for agg in aggregators {
        let opts = SamplingOptions { aggregator: agg, trials: 2_000, seed: 42, ..Default::default() };
        curves.push(sweep(&values, &grid, &opts)?);
    }

    println!("{:>6} {:>8} {:>8} {:>8}", "k", "mean", "median", "trim10");
    for (i, k) in grid.iter().enumerate() {
        println!(
            "{k:>6} {:>8.4} {:>8.4} {:>8.4}",
            curves[0].points[i].accuracy, curves[1].points[i].accuracy, curves[2].points[i].accuracy
        );
    }
    for (agg, curve) in aggregators.iter().zip(&curves) {
        let best = find_optimal(curve, DEFAULT_EPSILON)?;
        println!("{agg}: k* = {} at {:.4} (max {:.4})", best.k_star, best.accuracy_at_k_star, best.max_accuracy);
    }
    Ok(())
}
