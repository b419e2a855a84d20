//! Sample a handful of personas, print them as JSONL and show what the
//! consistency rules reject.
//!
//! ```text
//! cargo run --example persona_sampling
//! ```

use crowdwise::persona::{
    build_attribute_space, check_consistency, default_rules, sample_personas, write_personas, PersonaConfig,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let space = build_attribute_space();
    println!("{} attributes, {} configurations", space.len(), space.cardinality());

    let rules = default_rules();
    let personas = sample_personas(&space, 5, 42, &rules)?;
    write_personas(std::io::stdout().lock(), &personas)?;

    // a retired teenager breaks the age rule
    let mut odd: PersonaConfig = personas[0].clone();
    odd.values.insert("Age".into(), "18".into());
    odd.values.insert("Occupation".into(), "Retired".into());
    for rule in check_consistency(&odd, &rules) {
        println!("rejected by {}", rule.rule_id);
    }

    let again = sample_personas(&space, 5, 42, &rules)?;
    assert_eq!(personas, again);
    println!("same seed, same personas");
    Ok(())
}
