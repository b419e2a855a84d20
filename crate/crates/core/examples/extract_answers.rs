//! Pull a mileage out of free-form replies.
//!
//! ```text
//! cargo run --example extract_answers -- "It's about 2,300 km."
//! ```

use crowdwise::extraction::extract_miles;

const SAMPLES: &[&str] = &[
    "I estimate the distance is about 1426 miles.",
    "Roughly 1,430 mi as the crow flies.",
    "It's about 2,300 km.",
    "Somewhere between 1,400 and 1,500 miles.",
    "Fargo to Seattle? 1426.",
    "I can't say.",
];

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let texts: Vec<&str> = if args.is_empty() { SAMPLES.to_vec() } else { args.iter().map(String::as_str).collect() };
    for text in texts {
        let r = extract_miles(text);
        let span = r.source_span.map(|(a, b)| {
            text.chars().skip(a).take(b - a).collect::<String>()
        });
        match r.miles {
            Some(m) => println!("{m:>9.2}  {:<13} {:?}  <- {text}", r.rule.as_str(), span.unwrap_or_default()),
            None => println!("{:>9}  {:<13} <- {text}", "-", r.rule.as_str()),
        }
    }
}
