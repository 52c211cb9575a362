//! Debiasing system-prompt synthesis: pick demonstrations the target model
//! gets wrong, have the reference model write and refine gender-neutral
//! reasoning for them, render candidate prompts, keep the best on dev.

pub mod prompts;
mod select;

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

pub use select::{
    assemble_candidates, collapse_verdicts, demonstration_for, select_best_prompt, select_demonstrations,
    Selection, SelectionTier,
};

use crate::corpus::DatasetId;
use crate::gateway::{FinishReason, Gateway, GatewayError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("development set is empty")]
    EmptyDevSet,
    #[error("no dev verdict recorded for example `{0}`")]
    MissingVerdict(String),
    #[error("reference model returned an empty reasoning at stage {0}")]
    EmptyReasoning(Stage),
    #[error("stage {stage} cannot follow {prior}")]
    StageOrder { stage: Stage, prior: Stage },
    #[error("invalid prompt members: {0}")]
    EmptyMembers(String),
    #[error("no candidate system prompts")]
    NoCandidates,
    #[error("refinement needs at least one round")]
    ZeroRounds,
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

/// Pipeline stage a reasoning came from. Orders as
/// initial < verified < filtered < refined(1) < refined(2) < ...
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Stage {
    Initial,
    Verified,
    Filtered,
    Refined(u32),
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Stage::Initial => f.write_str("initial"),
            Stage::Verified => f.write_str("verified"),
            Stage::Filtered => f.write_str("filtered"),
            Stage::Refined(k) => write!(f, "refined({k})"),
        }
    }
}

impl FromStr for Stage {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "initial" => Ok(Stage::Initial),
            "verified" => Ok(Stage::Verified),
            "filtered" => Ok(Stage::Filtered),
            _ => s
                .strip_prefix("refined(")
                .and_then(|r| r.strip_suffix(')'))
                .and_then(|k| k.parse().ok())
                .filter(|&k| k >= 1)
                .map(Stage::Refined)
                .ok_or_else(|| format!("unknown stage `{s}`")),
        }
    }
}

impl Serialize for Stage {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Stage {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Demonstration {
    pub example_id: String,
    pub dataset_id: DatasetId,
    pub question: String,
    pub text: String,
    pub answer: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReasoningCandidate {
    pub demonstration_ref: String,
    pub stage: Stage,
    pub reasoning: String,
    pub generated_by: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptMember {
    pub demonstration: Demonstration,
    pub reasoning: ReasoningCandidate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemPromptCandidate {
    /// Latest stage among the members; identifies the candidate in ledgers.
    pub label: Stage,
    pub rendered: String,
    pub members: Vec<PromptMember>,
    #[serde(default)]
    pub dev_score: Option<f64>,
    #[serde(default)]
    pub dev_metric: String,
}

/// Stages switched off for an ablation run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ablation {
    #[serde(default)]
    pub no_verification: bool,
    #[serde(default)]
    pub no_filtering: bool,
    #[serde(default)]
    pub no_refinement: bool,
}

impl Ablation {
    pub fn keeps(&self, stage: Stage) -> bool {
        match stage {
            Stage::Initial => true,
            Stage::Verified => !self.no_verification,
            Stage::Filtered => !self.no_filtering,
            Stage::Refined(_) => !self.no_refinement,
        }
    }
}

fn ask_reference(reference: &Gateway, prompt: String, stage: Stage, d: &Demonstration) -> Result<ReasoningCandidate, PipelineError> {
    let response = reference.call(&reference.request(None, &prompt, None))?;
    if response.text.trim().is_empty() || response.finish_reason == FinishReason::Error {
        return Err(PipelineError::EmptyReasoning(stage));
    }
    Ok(ReasoningCandidate {
        demonstration_ref: d.example_id.clone(),
        stage,
        reasoning: response.text,
        generated_by: reference.model_id().to_string(),
    })
}

fn require(stage: Stage, prior: &ReasoningCandidate, allowed: &[Stage]) -> Result<(), PipelineError> {
    let ok = allowed.iter().any(|a| match (a, prior.stage) {
        (Stage::Refined(_), Stage::Refined(_)) => true,
        (a, p) => *a == p,
    });
    if ok {
        Ok(())
    } else {
        Err(PipelineError::StageOrder {
            stage,
            prior: prior.stage,
        })
    }
}

pub fn initial_reasoning(reference: &Gateway, d: &Demonstration) -> Result<ReasoningCandidate, PipelineError> {
    let prompt = prompts::initial_prompt(&d.question, &d.text, &d.answer);
    ask_reference(reference, prompt, Stage::Initial, d)
}

pub fn verify_reasoning(
    reference: &Gateway,
    d: &Demonstration,
    prior: &ReasoningCandidate,
) -> Result<ReasoningCandidate, PipelineError> {
    require(Stage::Verified, prior, &[Stage::Initial])?;
    let prompt = prompts::verification_prompt(&d.question, &d.text, &d.answer, &prior.reasoning);
    ask_reference(reference, prompt, Stage::Verified, d)
}

/// Accepts an initial prior too, for runs without verification.
pub fn filter_gender_independence(
    reference: &Gateway,
    d: &Demonstration,
    prior: &ReasoningCandidate,
) -> Result<ReasoningCandidate, PipelineError> {
    require(Stage::Filtered, prior, &[Stage::Verified, Stage::Initial])?;
    let prompt = prompts::filtering_prompt(&d.question, &d.text, &prior.reasoning);
    ask_reference(reference, prompt, Stage::Filtered, d)
}

/// Result of the refinement loop: completed rounds, plus the error that
/// stopped it early, if any.
#[derive(Debug)]
pub struct Refinement {
    pub rounds: Vec<ReasoningCandidate>,
    pub aborted: Option<PipelineError>,
}

/// `rounds` sequential refinements, each fed the previous round's text.
/// Accepts filtered, verified or initial priors (ablations).
pub fn refine_iteratively(
    reference: &Gateway,
    d: &Demonstration,
    prior: &ReasoningCandidate,
    rounds: u32,
) -> Result<Refinement, PipelineError> {
    if rounds == 0 {
        return Err(PipelineError::ZeroRounds);
    }
    require(Stage::Refined(1), prior, &[Stage::Filtered, Stage::Verified, Stage::Initial])?;
    let mut out: Vec<ReasoningCandidate> = Vec::new();
    for k in 1..=rounds {
        let previous = out.last().unwrap_or(prior);
        let prompt = prompts::refinement_prompt(&d.question, &d.text, &previous.reasoning);
        match ask_reference(reference, prompt, Stage::Refined(k), d) {
            Ok(c) => out.push(c),
            Err(e) => {
                log::warn!("refinement of {} stopped at round {k}: {e}", d.example_id);
                return Ok(Refinement {
                    rounds: out,
                    aborted: Some(e),
                });
            }
        }
    }
    Ok(Refinement {
        rounds: out,
        aborted: None,
    })
}

/// Every reasoning produced for one demonstration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageOutputs {
    pub demonstration: Demonstration,
    pub candidates: Vec<ReasoningCandidate>,
    /// Stages skipped because the reference returned nothing usable.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub skipped: Vec<String>,
}

impl StageOutputs {
    /// The latest stage output not later than `stage`.
    pub fn at_or_before(&self, stage: Stage) -> Option<&ReasoningCandidate> {
        self.candidates.iter().filter(|c| c.stage <= stage).max_by_key(|c| c.stage)
    }
}

/// Runs the stage chain for one demonstration. A stage that yields an empty
/// reasoning is skipped and the chain continues from the last good output;
/// gateway failures abort.
pub fn run_stages(
    reference: &Gateway,
    d: &Demonstration,
    rounds: u32,
    ablation: Ablation,
) -> Result<StageOutputs, PipelineError> {
    let mut out = StageOutputs {
        demonstration: d.clone(),
        candidates: Vec::new(),
        skipped: Vec::new(),
    };
    let initial = initial_reasoning(reference, d)?;
    out.candidates.push(initial);

    let step = |out: &mut StageOutputs,
                f: &dyn Fn(&ReasoningCandidate) -> Result<ReasoningCandidate, PipelineError>|
     -> Result<(), PipelineError> {
        let prior = out.candidates.last().expect("initial present").clone();
        match f(&prior) {
            Ok(c) => out.candidates.push(c),
            Err(PipelineError::EmptyReasoning(s)) => {
                log::warn!("{}: empty reasoning at {s}, continuing", d.example_id);
                out.skipped.push(s.to_string());
            }
            Err(e) => return Err(e),
        }
        Ok(())
    };
    if ablation.keeps(Stage::Verified) {
        step(&mut out, &|p| verify_reasoning(reference, d, p))?;
    }
    if ablation.keeps(Stage::Filtered) {
        step(&mut out, &|p| filter_gender_independence(reference, d, p))?;
    }
    if ablation.keeps(Stage::Refined(1)) {
        let prior = out.candidates.last().expect("initial present").clone();
        let refinement = refine_iteratively(reference, d, &prior, rounds)?;
        out.candidates.extend(refinement.rounds);
        match refinement.aborted {
            Some(PipelineError::EmptyReasoning(s)) => out.skipped.push(s.to_string()),
            Some(e) => return Err(e),
            None => {}
        }
    }
    Ok(out)
}

/// Renders members through the fixed template.
pub fn render_system_prompt(members: Vec<PromptMember>) -> Result<SystemPromptCandidate, PipelineError> {
    if members.is_empty() {
        return Err(PipelineError::EmptyMembers("no members".into()));
    }
    if let Some(m) = members.iter().find(|m| m.reasoning.reasoning.trim().is_empty()) {
        return Err(PipelineError::EmptyMembers(format!(
            "empty reasoning for `{}`",
            m.demonstration.example_id
        )));
    }
    let blocks: Vec<String> = members
        .iter()
        .map(|m| {
            prompts::member_block(
                &m.demonstration.question,
                &m.demonstration.text,
                &m.reasoning.reasoning,
                &m.demonstration.answer,
            )
        })
        .collect();
    let rendered = prompts::render_blocks(blocks.iter().map(String::as_str));
    let label = members.iter().map(|m| m.reasoning.stage).max().expect("non-empty");
    Ok(SystemPromptCandidate {
        label,
        rendered,
        members,
        dev_score: None,
        dev_metric: String::new(),
    })
}

/// One prompt holding every member of the given per-dataset winners.
pub fn aggregate_prompt(selected: &[SystemPromptCandidate]) -> Result<SystemPromptCandidate, PipelineError> {
    let members: Vec<PromptMember> = selected.iter().flat_map(|c| c.members.clone()).collect();
    render_system_prompt(members)
}

pub(crate) fn score_order(a: f64, b: f64) -> Ordering {
    let key = |x: f64| if x.is_nan() { f64::INFINITY } else { x };
    key(a).total_cmp(&key(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::{Endpoint, Script};

    fn demo() -> Demonstration {
        Demonstration {
            example_id: "d1".into(),
            dataset_id: DatasetId::Winobias,
            question: "Q?".into(),
            text: "T.".into(),
            answer: "A".into(),
        }
    }

    fn reference(script: Script) -> Gateway {
        Gateway::from_endpoint(&Endpoint::scripted_stub("ref", script)).unwrap()
    }

    fn full_script() -> Script {
        Script::default()
            .contains("given correct answer: \"A\", please", "initial chain")
            .contains("dose the reasonning", "verified chain")
            .contains("remove the reference to gender", "filtered chain")
            .contains("the reasoning: \"filtered chain\"", "refined one")
            .contains("the reasoning: \"refined one\"", "refined two")
            .contains("the reasoning: \"refined two\"", "refined three")
    }

    #[test]
    fn stage_names_round_trip() {
        for s in [Stage::Initial, Stage::Verified, Stage::Filtered, Stage::Refined(3)] {
            assert_eq!(s.to_string().parse::<Stage>().unwrap(), s);
        }
        assert!("refined(0)".parse::<Stage>().is_err());
        assert!(Stage::Filtered < Stage::Refined(1) && Stage::Refined(1) < Stage::Refined(2));
        assert_eq!(serde_json::to_string(&Stage::Refined(2)).unwrap(), "\"refined(2)\"");
    }

    #[test]
    fn full_chain_threads_each_output() {
        let out = run_stages(&reference(full_script()), &demo(), 3, Ablation::default()).unwrap();
        let texts: Vec<&str> = out.candidates.iter().map(|c| c.reasoning.as_str()).collect();
        assert_eq!(
            texts,
            ["initial chain", "verified chain", "filtered chain", "refined one", "refined two", "refined three"]
        );
        assert_eq!(out.candidates[5].stage, Stage::Refined(3));
    }

    #[test]
    fn blank_initial_is_an_error_and_blank_later_stage_is_skipped() {
        let blank = reference(Script::default().with_default(""));
        assert!(matches!(
            initial_reasoning(&blank, &demo()),
            Err(PipelineError::EmptyReasoning(Stage::Initial))
        ));
        let script = Script::default()
            .contains("please think step by step and provide a concise", "initial chain")
            .contains("dose the reasonning", "   ")
            .with_default("later");
        let out = run_stages(&reference(script), &demo(), 1, Ablation::default()).unwrap();
        let stages: Vec<Stage> = out.candidates.iter().map(|c| c.stage).collect();
        assert_eq!(stages, [Stage::Initial, Stage::Filtered, Stage::Refined(1)]);
        assert_eq!(out.skipped, ["verified"]);
    }

    #[test]
    fn refinement_aborts_but_keeps_completed_rounds() {
        let script = Script::default()
            .contains("the reasoning: \"p\"", "r1")
            .contains("the reasoning: \"r1\"", "");
        let prior = ReasoningCandidate {
            demonstration_ref: "d1".into(),
            stage: Stage::Filtered,
            reasoning: "p".into(),
            generated_by: "ref".into(),
        };
        let r = refine_iteratively(&reference(script), &demo(), &prior, 3).unwrap();
        assert_eq!(r.rounds.len(), 1);
        assert!(matches!(r.aborted, Some(PipelineError::EmptyReasoning(Stage::Refined(2)))));
    }

    #[test]
    fn stage_preconditions() {
        let gw = reference(full_script());
        let verified = ReasoningCandidate {
            demonstration_ref: "d1".into(),
            stage: Stage::Verified,
            reasoning: "x".into(),
            generated_by: "ref".into(),
        };
        assert!(matches!(
            verify_reasoning(&gw, &demo(), &verified),
            Err(PipelineError::StageOrder { .. })
        ));
    }

    #[test]
    fn rendering_and_validation() {
        let member = |r: &str| PromptMember {
            demonstration: demo(),
            reasoning: ReasoningCandidate {
                demonstration_ref: "d1".into(),
                stage: Stage::Initial,
                reasoning: r.into(),
                generated_by: "ref".into(),
            },
        };
        let c = render_system_prompt(vec![member("R")]).unwrap();
        assert_eq!(
            c.rendered,
            format!("{}\nquestion: Q?\ntext: T.\nreasoning: R\nanswer: A", prompts::SYSTEM_PREFACE)
        );
        let two = render_system_prompt(vec![member("R1"), member("R2")]).unwrap();
        assert!(two.rendered.find("R1").unwrap() < two.rendered.find("R2").unwrap());
        assert!(matches!(render_system_prompt(vec![member(" ")]), Err(PipelineError::EmptyMembers(_))));
        assert!(matches!(render_system_prompt(vec![]), Err(PipelineError::EmptyMembers(_))));
    }
}
