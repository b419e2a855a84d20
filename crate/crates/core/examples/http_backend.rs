//! Talk to an OpenAI-compatible endpoint. With no URL argument a local stub
//! is started that rate-limits the first two calls, so the retry path shows.
//!
//! ```text
//! cargo run --example http_backend
//! OPENAI_API_KEY=... cargo run --example http_backend -- https://api.example.com my-model
//! ```

use crowdwise::backends::stub::{StubResponse, StubServer};
use crowdwise::backends::{Backend, BackendConfig, BackendKind, GenerationParams, HttpBackend, RetryConfig};
use crowdwise::extraction::extract_miles;
use crowdwise::promptgen::{build_prompt, default_question, PromptType};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let mut args = std::env::args().skip(1);
    let stub;
    let (url, model) = match args.next() {
        Some(url) => (url, args.next().unwrap_or_else(|| "gpt-4o-mini".into())),
        None => {
            stub = StubServer::scripted(
                vec![StubResponse::status(429), StubResponse::status(429)],
                StubResponse::completion("I'd say roughly 1,400 miles."),
            )?;
            (stub.url(), "stub-model".into())
        }
    };

    let config = BackendConfig {
        kind: BackendKind::Http,
        endpoint_url: Some(url),
        model_id: model,
        max_in_flight: 4,
        request_timeout_secs: 30.0,
        retry: RetryConfig { max_attempts: 5, base_backoff_ms: 50, max_backoff_ms: 2_000 },
        rate_limit: Some(5.0),
        ..BackendConfig::default()
    };
    let backend = HttpBackend::from_config(&config)?;
    let spec = build_prompt(PromptType::Base, None, None, default_question())?;
    let reply = backend.generate(&spec, &GenerationParams::default())?;
    println!("{} attempt(s): {}", reply.attempts, reply.text);
    println!("extracted: {:?}", extract_miles(&reply.text).miles);
    Ok(())
}
