use std::collections::{BTreeSet, HashMap};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{render_system_prompt, score_order, Ablation, Demonstration, PipelineError, PromptMember, StageOutputs, SystemPromptCandidate};
use crate::corpus::{DatasetId, Example, OptionRole};
use crate::exec::{map_ordered, Execution};
use crate::extract::Verdict;

/// Which pool the demonstrations were drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionTier {
    /// Target wrong, reference right.
    Differential,
    /// Target wrong, whatever the reference did.
    TargetIncorrect,
    /// Uniform draw from dev (gold-less datasets, or nothing else available).
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub tier: SelectionTier,
    pub demonstrations: Vec<Demonstration>,
}

/// Majority verdict over repetitions: correct iff more than half are correct.
pub fn collapse_verdicts(verdicts: &[Verdict]) -> Verdict {
    let correct = verdicts.iter().filter(|v| v.is_correct()).count();
    if verdicts.is_empty() || verdicts.iter().all(|v| *v == Verdict::Unparseable) {
        Verdict::Unparseable
    } else if 2 * correct > verdicts.len() {
        Verdict::Correct
    } else {
        Verdict::Incorrect
    }
}

/// The demonstration for an example; gold-less items get an unbiased answer
/// (the anti-stereotype option for StereoSet, abstention otherwise).
pub fn demonstration_for(example: &Example) -> Demonstration {
    let answer = match &example.gold {
        Some(g) => g.clone(),
        None if example.dataset_id == DatasetId::Stereoset => {
            let options = example.option_list();
            let i = example
                .option_roles
                .as_ref()
                .and_then(|r| r.iter().position(|x| *x == OptionRole::AntiStereotype))
                .unwrap_or(0);
            options
                .get(i)
                .map(|o| format!("{}.{o}", i + 1))
                .unwrap_or_else(|| "Cannot be determined.".into())
        }
        None => "Cannot be determined.".into(),
    };
    Demonstration {
        example_id: example.id.clone(),
        dataset_id: example.dataset_id,
        question: example.question.clone(),
        text: example.text.clone(),
        answer,
    }
}

fn draw(mut ids: Vec<&str>, k: usize, seed: u64) -> Vec<String> {
    ids.sort_unstable();
    ids.dedup();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ids.shuffle(&mut rng);
    ids.into_iter().take(k).map(str::to_string).collect()
}

/// Up to `k` dev examples the target gets wrong and the reference gets
/// right, drawn with `seed`. Falls back to target-wrong, then to a uniform
/// draw; gold-less datasets always draw uniformly.
pub fn select_demonstrations(
    dev: &[&Example],
    target: &HashMap<String, Verdict>,
    reference: &HashMap<String, Verdict>,
    k: usize,
    seed: u64,
) -> Result<Selection, PipelineError> {
    if dev.is_empty() {
        return Err(PipelineError::EmptyDevSet);
    }
    let k = k.max(1);
    let by_id: HashMap<&str, &Example> = dev.iter().map(|e| (e.id.as_str(), *e)).collect();
    let finish = |tier, ids: Vec<String>| Selection {
        tier,
        demonstrations: ids.iter().map(|id| demonstration_for(by_id[id.as_str()])).collect(),
    };
    let judged: Vec<&Example> = dev.iter().copied().filter(|e| e.gold.is_some()).collect();
    if judged.is_empty() {
        let all = dev.iter().map(|e| e.id.as_str()).collect();
        return Ok(finish(SelectionTier::Random, draw(all, k, seed)));
    }

    let mut differential = Vec::new();
    let mut target_wrong = Vec::new();
    for ex in &judged {
        let id = ex.id.as_str();
        let t = target.get(id).ok_or_else(|| PipelineError::MissingVerdict(id.to_string()))?;
        let r = reference.get(id).ok_or_else(|| PipelineError::MissingVerdict(id.to_string()))?;
        if !t.is_correct() {
            target_wrong.push(id);
            if r.is_correct() {
                differential.push(id);
            }
        }
    }
    let selection = if !differential.is_empty() {
        finish(SelectionTier::Differential, draw(differential, k, seed))
    } else if !target_wrong.is_empty() {
        finish(SelectionTier::TargetIncorrect, draw(target_wrong, k, seed))
    } else {
        let all = judged.iter().map(|e| e.id.as_str()).collect();
        finish(SelectionTier::Random, draw(all, k, seed))
    };
    Ok(selection)
}

/// One candidate per stage that produced output for any demonstration,
/// excluding ablated stages. With several demonstrations, each contributes
/// its latest output not later than the candidate's stage.
pub fn assemble_candidates(
    outputs: &[StageOutputs],
    ablation: Ablation,
) -> Result<Vec<SystemPromptCandidate>, PipelineError> {
    let stages: BTreeSet<_> = outputs
        .iter()
        .flat_map(|o| o.candidates.iter().map(|c| c.stage))
        .filter(|s| ablation.keeps(*s))
        .collect();
    let mut out = Vec::with_capacity(stages.len());
    for stage in stages {
        let members: Vec<PromptMember> = outputs
            .iter()
            .filter_map(|o| {
                o.candidates
                    .iter()
                    .filter(|c| c.stage <= stage && ablation.keeps(c.stage))
                    .max_by_key(|c| c.stage)
                    .map(|c| PromptMember {
                        demonstration: o.demonstration.clone(),
                        reasoning: c.clone(),
                    })
            })
            .collect();
        if members.is_empty() {
            continue;
        }
        let mut candidate = render_system_prompt(members)?;
        candidate.label = stage;
        out.push(candidate);
    }
    if out.is_empty() {
        return Err(PipelineError::NoCandidates);
    }
    Ok(out)
}

/// Scores every candidate with `dev_eval` (lower is better) and returns the
/// winner's index together with the scored candidates. NaN scores lose; ties
/// go to the earliest stage.
pub fn select_best_prompt<E, F>(
    mut candidates: Vec<SystemPromptCandidate>,
    dev_metric: &str,
    exec: Execution,
    dev_eval: F,
) -> Result<(usize, Vec<SystemPromptCandidate>), E>
where
    E: From<PipelineError> + Send,
    F: Fn(&SystemPromptCandidate) -> Result<f64, E> + Sync + Send,
{
    if candidates.is_empty() {
        return Err(PipelineError::NoCandidates.into());
    }
    candidates.sort_by_key(|c| c.label);
    let scores = map_ordered(exec, &candidates, &dev_eval);
    for (c, score) in candidates.iter_mut().zip(scores) {
        c.dev_score = Some(score?);
        c.dev_metric = dev_metric.to_string();
    }
    let mut best = 0;
    for (i, c) in candidates.iter().enumerate().skip(1) {
        let (a, b) = (c.dev_score.unwrap_or(f64::NAN), candidates[best].dev_score.unwrap_or(f64::NAN));
        if score_order(a, b).is_lt() {
            best = i;
        }
    }
    Ok((best, candidates))
}
