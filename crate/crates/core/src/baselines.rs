//! Comparison prompt modes: a hand-written demonstration bank rendered
//! through the same template, and fixed counterfactual preambles.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::DatasetId;
use crate::pipeline::{render_system_prompt, Demonstration, PromptMember, ReasoningCandidate, Stage, SystemPromptCandidate};

const MANUAL_BANK: &str = include_str!("../assets/baselines/manual_bank.json");
pub const CFD_GPT35_LLAMA3: &str = include_str!("../assets/baselines/cfd_gpt35_llama3.txt");
pub const CFD_LLAMA2_ALPACA: &str = include_str!("../assets/baselines/cfd_llama2_alpaca.txt");

#[derive(Debug, Error, PartialEq, Eq)]
pub enum BaselineError {
    #[error("no manual demonstration for dataset `{0}`")]
    NoManualEntry(String),
    #[error("unknown model family `{0}` (expected gpt35_llama3 or llama2_alpaca)")]
    UnknownFamily(String),
    #[error("manual bank is unusable: {0}")]
    BadBank(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelFamily {
    Gpt35Llama3,
    Llama2Alpaca,
}

impl fmt::Display for ModelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelFamily::Gpt35Llama3 => "gpt35_llama3",
            ModelFamily::Llama2Alpaca => "llama2_alpaca",
        })
    }
}

impl FromStr for ModelFamily {
    type Err = BaselineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "gpt35_llama3" => Ok(ModelFamily::Gpt35Llama3),
            "llama2_alpaca" => Ok(ModelFamily::Llama2Alpaca),
            other => Err(BaselineError::UnknownFamily(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
struct BankEntry {
    question: String,
    text: String,
    reasoning: String,
    answer: String,
}

#[derive(Debug, Deserialize)]
struct Bank {
    version: u32,
    entries: BTreeMap<String, BankEntry>,
}

fn bank() -> Result<Bank, BaselineError> {
    let bank: Bank = serde_json::from_str(MANUAL_BANK).map_err(|e| BaselineError::BadBank(e.to_string()))?;
    if bank.version != 1 {
        return Err(BaselineError::BadBank(format!("unsupported version {}", bank.version)));
    }
    Ok(bank)
}

/// The hand-written demonstration for `dataset_id`, rendered like a
/// synthesized prompt.
pub fn manual_prompt(dataset_id: DatasetId) -> Result<SystemPromptCandidate, BaselineError> {
    let entry = bank()?
        .entries
        .remove(dataset_id.as_str())
        .ok_or_else(|| BaselineError::NoManualEntry(dataset_id.to_string()))?;
    let id = format!("manual/{dataset_id}");
    let member = PromptMember {
        demonstration: Demonstration {
            example_id: id.clone(),
            dataset_id,
            question: entry.question,
            text: entry.text,
            answer: entry.answer,
        },
        reasoning: ReasoningCandidate {
            demonstration_ref: id,
            stage: Stage::Initial,
            reasoning: entry.reasoning,
            generated_by: "manual".into(),
        },
    };
    render_system_prompt(vec![member]).map_err(|e| BaselineError::BadBank(e.to_string()))
}

pub fn cfd_prompt(family: ModelFamily) -> &'static str {
    match family {
        ModelFamily::Gpt35Llama3 => CFD_GPT35_LLAMA3,
        ModelFamily::Llama2Alpaca => CFD_LLAMA2_ALPACA,
    }
}
