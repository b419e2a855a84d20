//! The four prompt compositions for one persona and one emotion.
//!
//! ```text
//! cargo run --example prompt_variants
//! ```

use crowdwise::emotions::EmotionLabel;
use crowdwise::persona::{build_attribute_space, default_rules, sample_personas};
use crowdwise::promptgen::{build_prompt, default_question, PromptType};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let persona = sample_personas(&build_attribute_space(), 1, 7, &default_rules())?.remove(0);
    let emotion = EmotionLabel::from_name("nervousness")?;
    let q = default_question();

    for t in PromptType::ALL {
        let spec = build_prompt(
            t,
            t.uses_persona().then_some(&persona),
            t.uses_emotion().then_some(emotion),
            q,
        )?;
        println!("== {} ({}) {}", t.table_label(), t.as_str(), &spec.prompt_hash[..12]);
        if !spec.system_message.is_empty() {
            println!("[system] {}", spec.system_message);
        }
        println!("[user]   {}\n", spec.user_message);
    }

    // replicates of the same prompt get their own hash
    let base = build_prompt(PromptType::Base, None, None, q)?;
    let r0 = base.clone().with_replicate(0);
    let r1 = base.with_replicate(1);
    assert_ne!(r0.prompt_hash, r1.prompt_hash);
    Ok(())
}
