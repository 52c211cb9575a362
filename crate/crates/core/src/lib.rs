//! Gender-bias measurement for chat-completion models and automatic synthesis
//! of a debiasing system prompt from selected demonstrations and refined,
//! gender-neutral reasoning.

pub mod baselines;
pub mod corpus;
pub mod exec;
pub mod extract;
pub mod gateway;
pub mod harness;
pub mod lexicon;
pub mod metrics;
pub mod pipeline;
pub mod text;
