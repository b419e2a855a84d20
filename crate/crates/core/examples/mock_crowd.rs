//! A synthetic crowd: a distribution of estimates, some answers in km and a
//! few refusals. Replies are a pure function of the prompt and seed.
//!
//! ```text
//! cargo run --example mock_crowd
//! ```

use crowdwise::backends::{Backend, CrowdModel, Distribution, GenerationParams, MockBackend};
use crowdwise::extraction::extract_miles;
use crowdwise::promptgen::{build_prompt, default_question, PromptType};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let crowd = CrowdModel {
        refusal_rate: 0.05,
        unit_mix: 0.2,
        ..CrowdModel::from_distribution(Distribution::Normal { mean: 1426.0, std_dev: 300.0 })
    };
    let backend = MockBackend::new(crowd, "mock-crowd");
    let base = build_prompt(PromptType::Base, None, None, default_question())?;
    let params = GenerationParams::default();

    let mut values = Vec::new();
    for r in 0..12 {
        let reply = backend.generate(&base.clone().with_replicate(r), &params)?;
        let got = extract_miles(&reply.text);
        println!("{:<62} -> {:?}", reply.text, got.miles);
        values.extend(got.miles);
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    println!("{} usable, mean {mean:.1} miles, {} backend calls", values.len(), backend.calls());
    Ok(())
}
