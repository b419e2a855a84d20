//! Deterministic synthetic crowd.
//!
//! Every draw is a function of `(prompt_hash, seed)` alone: a SHA-256 of the
//! pair is split into four uniforms that decide refusal, unit, mixture
//! component and the quantile. Call order and concurrency never matter.

use std::sync::atomic::{AtomicUsize, Ordering};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use statrs::distribution::{ContinuousCDF, Normal};

use super::{Backend, BackendError, ConfigError, Generation, GenerationParams};
use crate::extraction::MILES_PER_KM;
use crate::promptgen::PromptSpec;

pub const REFUSAL_TEXT: &str = "I'm sorry, but I can't give a reliable estimate for that.";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Distribution {
    Constant { value: f64 },
    Normal { mean: f64, std_dev: f64 },
    /// `exp(N(mu, sigma))`.
    LogNormal { mu: f64, sigma: f64 },
    Uniform { lo: f64, hi: f64 },
    Mixture { components: Vec<WeightedDistribution> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedDistribution {
    pub weight: f64,
    #[serde(flatten)]
    pub distribution: Distribution,
}

fn standard_normal_quantile(u: f64) -> f64 {
    Normal::new(0.0, 1.0).expect("unit normal").inverse_cdf(u)
}

impl Distribution {
    fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        match self {
            Distribution::Constant { value } if !value.is_finite() => bad(format!("constant {value}")),
            Distribution::Normal { std_dev, .. } if !(*std_dev > 0.0) => {
                bad(format!("normal std_dev {std_dev} must be positive"))
            }
            Distribution::LogNormal { sigma, .. } if !(*sigma > 0.0) => {
                bad(format!("lognormal sigma {sigma} must be positive"))
            }
            Distribution::Uniform { lo, hi } if !(lo < hi) => bad(format!("uniform lo {lo} >= hi {hi}")),
            Distribution::Mixture { components } => {
                if components.is_empty() {
                    return bad("mixture has no components".into());
                }
                let total: f64 = components.iter().map(|c| c.weight).sum();
                if components.iter().any(|c| !(c.weight >= 0.0)) || (total - 1.0).abs() > 1e-9 {
                    return bad(format!("mixture weights must be non-negative and sum to 1 (got {total})"));
                }
                components.iter().try_for_each(|c| c.distribution.validate())
            }
            _ => Ok(()),
        }
    }

    /// Value at uniform `u`; mixtures pick a component with `select` first.
    fn sample(&self, select: f64, u: f64) -> f64 {
        match self {
            Distribution::Constant { value } => *value,
            Distribution::Normal { mean, std_dev } => mean + std_dev * standard_normal_quantile(u),
            Distribution::LogNormal { mu, sigma } => (mu + sigma * standard_normal_quantile(u)).exp(),
            Distribution::Uniform { lo, hi } => lo + u * (hi - lo),
            Distribution::Mixture { components } => {
                let mut acc = 0.0;
                for c in components {
                    acc += c.weight;
                    if select < acc {
                        // re-spread `select` inside the component so nested
                        // mixtures still get a uniform selector
                        let inner = (select - (acc - c.weight)) / c.weight;
                        return c.distribution.sample(inner, u);
                    }
                }
                let last = components.last().expect("validated non-empty");
                last.distribution.sample(select, u)
            }
        }
    }
}

/// Synthetic answer generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CrowdModel {
    pub distribution: Distribution,
    /// Probability of answering in kilometres.
    pub unit_mix: f64,
    /// Probability of a non-numeric reply.
    pub refusal_rate: f64,
    /// `"Attribute=Value"` to additive miles.
    pub persona_bias: IndexMap<String, f64>,
}

impl Default for CrowdModel {
    fn default() -> Self {
        Self::normal(1426.0, 300.0)
    }
}

impl CrowdModel {
    pub fn constant(value: f64) -> Self {
        Self::from_distribution(Distribution::Constant { value })
    }

    pub fn normal(mean: f64, std_dev: f64) -> Self {
        Self::from_distribution(Distribution::Normal { mean, std_dev })
    }

    pub fn from_distribution(distribution: Distribution) -> Self {
        Self {
            distribution,
            unit_mix: 0.0,
            refusal_rate: 0.0,
            persona_bias: IndexMap::new(),
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        for (name, p) in [("unit_mix", self.unit_mix), ("refusal_rate", self.refusal_rate)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(ConfigError::Invalid(format!("{name} {p} outside [0, 1]")));
            }
        }
        self.distribution.validate()
    }

    fn bias_for(&self, spec: &PromptSpec) -> f64 {
        let Some(persona) = &spec.persona else {
            return 0.0;
        };
        self.persona_bias
            .iter()
            .filter(|(key, _)| {
                key.split_once('=')
                    .is_some_and(|(attr, value)| persona.get(attr.trim()) == Some(value.trim()))
            })
            .map(|(_, b)| b)
            .sum()
    }

    /// The reply for `spec` under `seed`.
    pub fn respond(&self, spec: &PromptSpec, seed: u64) -> String {
        let [u_refuse, u_unit, u_select, u_value] = uniforms(&spec.prompt_hash, seed);
        if u_refuse < self.refusal_rate {
            return REFUSAL_TEXT.to_string();
        }
        let miles = (self.distribution.sample(u_select, u_value) + self.bias_for(spec)).max(1.0);
        if u_unit < self.unit_mix {
            let km = (miles / MILES_PER_KM).round() as i64;
            format!("I estimate the distance is about {km} km.")
        } else {
            format!("I estimate the distance is about {} miles.", miles.round() as i64)
        }
    }
}

/// Four uniforms in (0, 1) from SHA-256 of the hash and seed.
fn uniforms(prompt_hash: &str, seed: u64) -> [f64; 4] {
    let mut hasher = Sha256::new();
    hasher.update(b"crowdwise-mock\0");
    hasher.update(prompt_hash.as_bytes());
    hasher.update(seed.to_le_bytes());
    let digest = hasher.finalize();
    let mut out = [0.0; 4];
    for (i, chunk) in digest.chunks_exact(8).enumerate() {
        let x = u64::from_le_bytes(chunk.try_into().expect("8-byte chunk"));
        out[i] = ((x >> 11) as f64 + 0.5) / (1u64 << 53) as f64;
    }
    out
}

/// Backend answering from a [`CrowdModel`]. Counts calls for tests.
#[derive(Debug)]
pub struct MockBackend {
    crowd: CrowdModel,
    model_id: String,
    calls: AtomicUsize,
}

impl MockBackend {
    pub fn new(crowd: CrowdModel, model_id: &str) -> Self {
        Self {
            crowd,
            model_id: model_id.to_string(),
            calls: AtomicUsize::new(0),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn crowd(&self) -> &CrowdModel {
        &self.crowd
    }
}

impl Backend for MockBackend {
    fn name(&self) -> &str {
        "mock"
    }

    fn model_id(&self) -> &str {
        &self.model_id
    }

    fn generate(&self, spec: &PromptSpec, params: &GenerationParams) -> Result<Generation, BackendError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        Ok(Generation {
            text: self.crowd.respond(spec, params.seed),
            attempts: 1,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extraction::{extract_miles, ExtractionRule};
    use crate::persona::{build_attribute_space, sample_personas};
    use crate::promptgen::{build_prompt, PromptType};

    fn base_specs(n: u32) -> Vec<PromptSpec> {
        let base = build_prompt(PromptType::Base, None, None, "Q?").unwrap();
        (0..n).map(|i| base.clone().with_replicate(i)).collect()
    }

    #[test]
    fn constant_crowd() {
        let m = MockBackend::new(CrowdModel::constant(1426.0), "m");
        for spec in base_specs(5) {
            let g = m.generate(&spec, &GenerationParams::default()).unwrap();
            assert_eq!(g.text, "I estimate the distance is about 1426 miles.");
            assert_eq!(g.attempts, 1);
        }
        assert_eq!(m.calls(), 5);
    }

    #[test]
    fn deterministic_per_hash_and_seed() {
        let crowd = CrowdModel::normal(1426.0, 300.0);
        let spec = &base_specs(1)[0];
        assert_eq!(crowd.respond(spec, 4), crowd.respond(spec, 4));
        let differs = base_specs(20).iter().any(|s| crowd.respond(s, 4) != crowd.respond(s, 5));
        assert!(differs);
    }

    #[test]
    fn normal_crowd_mean() {
        // standard error 300 / sqrt(100) = 30, so a 3-sigma band is +-90
        let crowd = CrowdModel::normal(1426.0, 300.0);
        let specs = base_specs(100);
        let mean: f64 = specs
            .iter()
            .map(|s| extract_miles(&crowd.respond(s, 0)).miles.unwrap())
            .sum::<f64>()
            / 100.0;
        assert!((mean - 1426.0).abs() <= 90.0, "mean {mean}");
    }

    #[test]
    fn kilometre_answers_round_trip() {
        let mut crowd = CrowdModel::constant(1426.0);
        crowd.unit_mix = 1.0;
        let text = crowd.respond(&base_specs(1)[0], 0);
        assert_eq!(text, "I estimate the distance is about 2295 km.");
        let miles = extract_miles(&text).miles.unwrap();
        assert!((miles - 1426.0).abs() < 0.5);
    }

    #[test]
    fn refusals_have_no_number() {
        let mut crowd = CrowdModel::constant(1426.0);
        crowd.refusal_rate = 1.0;
        let text = crowd.respond(&base_specs(1)[0], 0);
        assert_eq!(text, REFUSAL_TEXT);
        assert_eq!(extract_miles(&text).rule, ExtractionRule::None);
    }

    #[test]
    fn persona_bias_applies_on_match() {
        let mut crowd = CrowdModel::constant(1400.0);
        let persona = sample_personas(&build_attribute_space(), 1, 3, &[]).unwrap().remove(0);
        let gender = persona.get("Gender").unwrap().to_string();
        crowd.persona_bias.insert(format!("Gender={gender}"), 26.0);
        crowd.persona_bias.insert("Gender=NoSuchValue".into(), 1000.0);
        let spec = build_prompt(PromptType::AttributesOnly, Some(&persona), None, "Q?").unwrap();
        assert_eq!(crowd.respond(&spec, 0), "I estimate the distance is about 1426 miles.");
        // no persona, no bias
        assert!(crowd.respond(&base_specs(1)[0], 0).contains("1400"));
    }

    #[test]
    fn mixture_picks_components_by_weight() {
        let crowd = CrowdModel::from_distribution(Distribution::Mixture {
            components: vec![
                WeightedDistribution {
                    weight: 0.8,
                    distribution: Distribution::Constant { value: 1426.0 },
                },
                WeightedDistribution {
                    weight: 0.2,
                    distribution: Distribution::Uniform { lo: 5000.0, hi: 6000.0 },
                },
            ],
        });
        crowd.validate().unwrap();
        let specs = base_specs(2000);
        let outliers = specs
            .iter()
            .filter(|s| extract_miles(&crowd.respond(s, 1)).miles.unwrap() >= 5000.0)
            .count();
        // binomial(2000, 0.2): sd ~ 17.9
        assert!((outliers as f64 - 400.0).abs() < 72.0, "{outliers}");
    }

    #[test]
    fn validation() {
        let mut c = CrowdModel::normal(1426.0, 0.0);
        assert!(c.validate().is_err());
        c = CrowdModel::default();
        c.refusal_rate = 1.5;
        assert!(c.validate().is_err());
        let bad = CrowdModel::from_distribution(Distribution::Mixture {
            components: vec![WeightedDistribution {
                weight: 0.5,
                distribution: Distribution::Constant { value: 1.0 },
            }],
        });
        assert!(bad.validate().is_err());
    }

    #[test]
    fn toml_shape() {
        let c: CrowdModel = toml::from_str(
            r#"
            unit_mix = 0.1
            [distribution]
            kind = "mixture"
            [[distribution.components]]
            weight = 0.95
            kind = "normal"
            mean = 1426.0
            std_dev = 200.0
            [[distribution.components]]
            weight = 0.05
            kind = "log_normal"
            mu = 8.0
            sigma = 1.0
            "#,
        )
        .unwrap();
        c.validate().unwrap();
        assert_eq!(c.unit_mix, 0.1);
    }
}
