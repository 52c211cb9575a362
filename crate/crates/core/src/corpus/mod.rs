//! Benchmark ingestion into one canonical record schema, plus dev/test splits.

mod adapters;
mod canonical;
mod split;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use adapters::load_dataset;
pub(crate) use adapters::numbered;
pub use canonical::{canonical_read, canonical_write, SCHEMA_VERSION};
pub use split::{make_split, Split};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("malformed record at line {line}: {reason}")]
    MalformedRecord { line: usize, reason: String },
    #[error("missing field `{field}` at line {line}")]
    MissingField { line: usize, field: String },
    #[error("unknown dataset `{0}`")]
    UnknownDataset(String),
    #[error("i/o failure on {path}: {source}")]
    IoFailure {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("schema version mismatch at line {line}: expected {expected}, found {found}")]
    SchemaVersionMismatch { line: usize, expected: u32, found: u32 },
    #[error("cannot split an empty corpus")]
    EmptyCorpus,
    #[error("dev fraction must lie strictly between 0 and 1, got {0}")]
    InvalidFraction(f64),
}

impl CorpusError {
    pub(crate) fn malformed(line: usize, reason: impl Into<String>) -> Self {
        CorpusError::MalformedRecord {
            line,
            reason: reason.into(),
        }
    }

    pub(crate) fn missing(line: usize, field: &str) -> Self {
        CorpusError::MissingField {
            line,
            field: field.to_string(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CorpusError::IoFailure {
            path: path.into(),
            source,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetId {
    Winobias,
    Winogender,
    Gap,
    Bug,
    Bbq,
    Stereoset,
    Unqover,
    McqUtility,
}

impl DatasetId {
    pub const ALL: [DatasetId; 8] = [
        DatasetId::Winobias,
        DatasetId::Winogender,
        DatasetId::Gap,
        DatasetId::Bug,
        DatasetId::Bbq,
        DatasetId::Stereoset,
        DatasetId::Unqover,
        DatasetId::McqUtility,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DatasetId::Winobias => "winobias",
            DatasetId::Winogender => "winogender",
            DatasetId::Gap => "gap",
            DatasetId::Bug => "bug",
            DatasetId::Bbq => "bbq",
            DatasetId::Stereoset => "stereoset",
            DatasetId::Unqover => "unqover",
            DatasetId::McqUtility => "mcq_utility",
        }
    }

    /// Datasets whose examples come in stereo/anti-stereo template pairs.
    pub fn is_paired(self) -> bool {
        matches!(self, DatasetId::Winobias | DatasetId::Winogender)
    }
}

impl fmt::Display for DatasetId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DatasetId {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        DatasetId::ALL
            .into_iter()
            .find(|d| d.as_str() == s)
            .ok_or_else(|| CorpusError::UnknownDataset(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Coref,
    Mcq,
    OpenQa,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    Stereo,
    AntiStereo,
    Neutral,
    NotApplicable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PronounGender {
    Masculine,
    Feminine,
    Neutral,
    Unknown,
}

impl PronounGender {
    pub fn of_pronoun(word: &str) -> PronounGender {
        match word.to_lowercase().as_str() {
            "he" | "him" | "his" | "himself" => PronounGender::Masculine,
            "she" | "her" | "hers" | "herself" => PronounGender::Feminine,
            "they" | "them" | "their" | "theirs" | "themselves" | "xe" | "xem" | "xyr" => {
                PronounGender::Neutral
            }
            _ => PronounGender::Unknown,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContextCondition {
    Ambiguous,
    Disambiguated,
    NotApplicable,
}

/// What choosing a given multiple-choice option says about the responder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptionRole {
    /// The stereotype-consistent (for BBQ: bias-target) answer.
    Stereotype,
    AntiStereotype,
    Unrelated,
    Unknown,
}

/// One benchmark item in canonical form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Example {
    pub id: String,
    pub dataset_id: DatasetId,
    pub task: Task,
    pub text: String,
    pub question: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub options: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold: Option<String>,
    pub polarity: Polarity,
    pub pronoun_gender: PronounGender,
    pub context_condition: ContextCondition,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pair_group: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pronoun_char_offset: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pronoun_token_index: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub candidate_entities: Option<Vec<String>>,
    /// Per-option roles, parallel to `options` (BBQ, StereoSet).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub option_roles: Option<Vec<OptionRole>>,
    /// UnQover: the question asks for the negated attribute.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub negated_question: Option<bool>,
}

impl Example {
    /// A blank record for the given dataset with every optional field absent.
    pub fn new(id: impl Into<String>, dataset_id: DatasetId, task: Task) -> Self {
        Example {
            id: id.into(),
            dataset_id,
            task,
            text: String::new(),
            question: String::new(),
            options: None,
            gold: None,
            polarity: Polarity::NotApplicable,
            pronoun_gender: PronounGender::Unknown,
            context_condition: ContextCondition::NotApplicable,
            pair_group: None,
            pronoun_char_offset: None,
            pronoun_token_index: None,
            candidate_entities: None,
            option_roles: None,
            negated_question: None,
        }
    }

    pub fn candidates(&self) -> &[String] {
        self.candidate_entities.as_deref().unwrap_or(&[])
    }

    pub fn option_list(&self) -> &[String] {
        self.options.as_deref().unwrap_or(&[])
    }

    /// Checks every per-record invariant. `Err` carries a human-readable reason.
    pub fn validate(&self) -> Result<(), String> {
        if self.id.is_empty() {
            return Err("empty id".into());
        }
        if self.task == Task::Coref {
            let gold = self.gold.as_deref().ok_or("coref example without gold")?;
            let candidates = self.candidates();
            if candidates.is_empty() {
                return Err("coref example without candidate entities".into());
            }
            if !candidates.iter().any(|c| c == gold) {
                return Err(format!(
                    "gold `{gold}` is not among candidate entities {candidates:?}"
                ));
            }
        }
        if self.task == Task::Mcq && self.option_list().is_empty() {
            return Err("mcq example without options".into());
        }
        if let Some(roles) = &self.option_roles {
            if roles.len() != self.option_list().len() {
                return Err("option_roles length differs from options length".into());
            }
        }
        match self.dataset_id {
            DatasetId::Winobias | DatasetId::Winogender => {
                if !matches!(self.polarity, Polarity::Stereo | Polarity::AntiStereo) {
                    return Err("paired dataset example must be stereo or anti_stereo".into());
                }
                if self.pair_group.is_none() {
                    return Err("paired dataset example without pair_group".into());
                }
            }
            DatasetId::Gap | DatasetId::Bug => {
                if !matches!(
                    self.pronoun_gender,
                    PronounGender::Masculine | PronounGender::Feminine
                ) {
                    return Err("pronoun_gender must be masculine or feminine".into());
                }
                if self.dataset_id == DatasetId::Gap && self.pronoun_char_offset.is_none() {
                    return Err("gap example without pronoun_char_offset".into());
                }
                if self.dataset_id == DatasetId::Bug && self.pronoun_token_index.is_none() {
                    return Err("bug example without pronoun_token_index".into());
                }
            }
            DatasetId::Bbq => {
                if !matches!(
                    self.context_condition,
                    ContextCondition::Ambiguous | ContextCondition::Disambiguated
                ) {
                    return Err("bbq example must be ambiguous or disambiguated".into());
                }
            }
            DatasetId::Unqover => {
                if self.gold.is_some() {
                    return Err("unqover examples carry no gold answer".into());
                }
            }
            DatasetId::Stereoset | DatasetId::McqUtility => {}
        }
        Ok(())
    }
}

/// Corpus-level invariants: unique ids and, for paired datasets, exactly one
/// stereo and one anti-stereo member per pair group.
pub fn validate_corpus(examples: &[Example]) -> Result<(), CorpusError> {
    let mut seen = BTreeSet::new();
    let mut pairs: BTreeMap<&str, (usize, usize, usize)> = BTreeMap::new();
    for (idx, ex) in examples.iter().enumerate() {
        let line = idx + 1;
        ex.validate().map_err(|r| CorpusError::malformed(line, r))?;
        if !seen.insert(ex.id.as_str()) {
            return Err(CorpusError::malformed(
                line,
                format!("duplicate id `{}`", ex.id),
            ));
        }
        if ex.dataset_id.is_paired() {
            let group = ex.pair_group.as_deref().unwrap_or_default();
            let entry = pairs.entry(group).or_insert((0, 0, line));
            match ex.polarity {
                Polarity::Stereo => entry.0 += 1,
                Polarity::AntiStereo => entry.1 += 1,
                _ => {}
            }
        }
    }
    for (group, (stereo, anti, line)) in pairs {
        if stereo != 1 || anti != 1 {
            return Err(CorpusError::malformed(
                line,
                format!("pair group `{group}` has {stereo} stereo and {anti} anti-stereo members"),
            ));
        }
    }
    Ok(())
}
