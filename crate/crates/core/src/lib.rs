//! Crowd-wisdom simulation harness for persona- and emotion-conditioned
//! language model prompts.
//!
//! The pipeline: sample personas ([`persona`]), assign emotions
//! ([`emotions`]), render prompt variants ([`promptgen`]), collect answers
//! from a model ([`backends`], [`runner`]), pull a mileage out of each reply
//! ([`extraction`]), measure accuracy against subset size ([`crowdstats`]),
//! and write tables and plots ([`reporting`]).

pub mod backends;
pub mod crowdstats;
pub mod emotions;
pub mod extraction;
pub mod persona;
pub mod promptgen;
pub mod reporting;
pub mod runner;
