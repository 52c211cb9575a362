use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::eval::{evaluate, prime, Evaluation};
use super::{write_atomic, write_json, write_jsonl, DatasetSource, HarnessError, PromptMode, RunConfig, SourceFormat};
use crate::baselines::{cfd_prompt, manual_prompt};
use crate::corpus::{canonical_read, load_dataset, make_split, validate_corpus, DatasetId, Example, Split};
use crate::exec::{map_ordered, Execution};
use crate::gateway::{Endpoint, Gateway, GatewayError, GatewayStats};
use crate::metrics::{ExampleOutcome, MetricReport};
use crate::pipeline::{
    aggregate_prompt, assemble_candidates, run_stages, select_best_prompt, select_demonstrations, Demonstration,
    PipelineError, ReasoningCandidate, SelectionTier, Stage, StageOutputs, SystemPromptCandidate,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Complete,
    Failed,
}

/// Per-dataset artifact references, relative to the run directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetEntry {
    pub dataset_id: DatasetId,
    pub n_examples: usize,
    pub n_dev: usize,
    pub n_test: usize,
    pub split_ref: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verdicts_ref: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics_ref: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub original_metrics_ref: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt_ref: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selection_tier: Option<SelectionTier>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selected_label: Option<Stage>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub status: RunStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub prompt_mode: String,
    pub target_model: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_model: Option<String>,
    pub config: RunConfig,
    pub started_at: DateTime<Utc>,
    pub finished_at: DateTime<Utc>,
    pub datasets: Vec<DatasetEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selected_prompt_ref: Option<String>,
    /// Other run-level artifacts by name.
    #[serde(default)]
    pub artifacts: BTreeMap<String, String>,
    pub target_stats: GatewayStats,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_stats: Option<GatewayStats>,
}

/// One row of `candidates.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateRow {
    /// Dataset id, or `aggregate` for the pooled prompt.
    pub dataset: String,
    pub label: Stage,
    pub text: String,
    pub dev_score: Option<f64>,
    pub dev_metric: String,
    pub selected: bool,
    pub members: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
struct DemonstrationRow<'a> {
    dataset_id: DatasetId,
    tier: SelectionTier,
    demonstration: &'a Demonstration,
    candidates: &'a [ReasoningCandidate],
    #[serde(skip_serializing_if = "<[String]>::is_empty")]
    skipped: &'a [String],
}

/// Loads one configured dataset, keeping at most `limit` records. Pair
/// groups cut in half by the limit are dropped whole.
pub fn load_corpus(source: &DatasetSource, limit: Option<usize>) -> Result<Vec<Example>, HarnessError> {
    let canonical = match source.format {
        SourceFormat::Canonical => true,
        SourceFormat::Native => false,
        SourceFormat::Auto => looks_canonical(&source.path)?,
    };
    let mut examples = if canonical {
        let examples = canonical_read(&source.path)?;
        if let Some(e) = examples.iter().find(|e| e.dataset_id != source.id) {
            return Err(HarnessError::Config(format!(
                "{}: record `{}` belongs to `{}`, not `{}`",
                source.path.display(),
                e.id,
                e.dataset_id,
                source.id
            )));
        }
        examples
    } else {
        load_dataset(source.id, &source.path)?
    };
    if let Some(n) = limit {
        examples.truncate(n);
        if source.id.is_paired() {
            let mut sizes: BTreeMap<String, usize> = BTreeMap::new();
            for e in &examples {
                *sizes.entry(e.pair_group.clone().unwrap_or_default()).or_default() += 1;
            }
            examples.retain(|e| sizes[&e.pair_group.clone().unwrap_or_default()] == 2);
        }
        validate_corpus(&examples)?;
    }
    Ok(examples)
}

fn looks_canonical(path: &Path) -> Result<bool, HarnessError> {
    let raw = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    let first = raw.lines().find(|l| !l.trim().is_empty()).unwrap_or("");
    Ok(serde_json::from_str::<serde_json::Value>(first)
        .ok()
        .and_then(|v| v.get("schema_version").cloned())
        .is_some())
}

/// Run id: configured, or derived from the config so reruns land in the same directory.
fn run_id(config: &RunConfig) -> String {
    if let Some(id) = &config.run_id {
        return id.clone();
    }
    let digest = Sha256::digest(serde_json::to_vec(config).expect("config serializes"));
    format!("{}-{}", config.prompt_mode.name(), &hex::encode(digest)[..12])
}

fn open_gateway(endpoint: &Endpoint, role: &str, cache_dir: Option<&Path>) -> Result<Gateway, HarnessError> {
    let gw = Gateway::from_endpoint(endpoint).map_err(|e| match e {
        GatewayError::AuthFailure(_) => HarnessError::Provider {
            example_id: None,
            source: e,
        },
        other => HarnessError::Config(format!("{role} endpoint: {other}")),
    })?;
    Ok(match cache_dir {
        Some(dir) => gw.with_cache(dir),
        None => gw,
    })
}

pub(super) struct Prepared {
    pub id: DatasetId,
    pub corpus: Vec<Example>,
    pub split: Split,
}

impl Prepared {
    pub fn dev(&self) -> Vec<&Example> {
        self.split.dev(&self.corpus)
    }

    pub fn test(&self) -> Vec<&Example> {
        self.split.test(&self.corpus)
    }
}

/// State of one run in progress.
pub(super) struct Session<'a> {
    pub config: &'a RunConfig,
    pub dir: PathBuf,
    pub target: Gateway,
    pub reference: Option<Gateway>,
    pub exec: Execution,
    started_at: DateTime<Utc>,
    pub datasets: Vec<DatasetEntry>,
    pub selected_prompt_ref: Option<String>,
    pub artifacts: BTreeMap<String, String>,
    candidates: Vec<CandidateRow>,
    demonstrations: Vec<u8>,
}

impl<'a> Session<'a> {
    pub fn open(config: &'a RunConfig, exec: Execution) -> Result<Self, HarnessError> {
        config.validate()?;
        let cache = config.cache_dir.as_deref();
        let target = open_gateway(&config.target, "target", cache)?;
        let reference = config
            .reference
            .as_ref()
            .map(|r| open_gateway(r, "reference", cache))
            .transpose()?;
        let dir = config.output_dir.join(run_id(config));
        fs::create_dir_all(&dir).map_err(|e| HarnessError::io(&dir, e))?;
        write_json(&dir.join("config.json"), config)?;
        Ok(Session {
            config,
            dir,
            target,
            reference,
            exec,
            started_at: Utc::now(),
            datasets: Vec::new(),
            selected_prompt_ref: None,
            artifacts: BTreeMap::new(),
            candidates: Vec::new(),
            demonstrations: Vec::new(),
        })
    }

    pub fn reference(&self) -> &Gateway {
        self.reference.as_ref().expect("validated: drgap modes carry a reference")
    }

    /// Loads, splits and primes one dataset and opens its manifest entry.
    pub fn prepare(&mut self, source: &DatasetSource) -> Result<Prepared, HarnessError> {
        let corpus = load_corpus(source, self.config.limit)?;
        let split = make_split(&corpus, self.config.dev_fraction, self.config.seed)?;
        let split_ref = format!("splits/{}.json", source.id);
        write_json(&self.dir.join(&split_ref), &split)?;
        let all: Vec<&Example> = corpus.iter().collect();
        prime(&self.target, &all);
        if let Some(r) = &self.reference {
            prime(r, &all);
        }
        self.datasets.push(DatasetEntry {
            dataset_id: source.id,
            n_examples: corpus.len(),
            n_dev: split.dev_ids.len(),
            n_test: split.test_ids.len(),
            split_ref,
            verdicts_ref: None,
            metrics_ref: None,
            original_metrics_ref: None,
            prompt_ref: None,
            selection_tier: None,
            selected_label: None,
        });
        Ok(Prepared {
            id: source.id,
            corpus,
            split,
        })
    }

    pub fn entry(&mut self, id: DatasetId) -> &mut DatasetEntry {
        self.datasets
            .iter_mut()
            .rev()
            .find(|d| d.dataset_id == id)
            .expect("entry opened by prepare")
    }

    /// Evaluates and persists verdicts under `verdicts/<name>.jsonl`,
    /// including partial ones when a provider failure aborts the pass.
    pub fn persist_eval(
        &self,
        gateway: &Gateway,
        examples: &[&Example],
        system_prompt: Option<&str>,
        name: &str,
    ) -> Result<(String, Vec<ExampleOutcome>), HarnessError> {
        let ev = evaluate(gateway, examples, system_prompt, self.config.repetitions, self.config.seed, self.exec);
        let verdicts_ref = format!("verdicts/{name}.jsonl");
        write_jsonl(&self.dir.join(&verdicts_ref), &ev.outcomes)?;
        Ok((verdicts_ref, ev.into_result()?))
    }

    /// [`Session::persist_eval`] with the target, scored into a report.
    pub fn evaluate_persisted(
        &self,
        dataset_id: DatasetId,
        examples: &[&Example],
        system_prompt: Option<&str>,
        name: &str,
    ) -> Result<(String, MetricReport), HarnessError> {
        let (verdicts_ref, outcomes) = self.persist_eval(&self.target, examples, system_prompt, name)?;
        Ok((verdicts_ref, Evaluation::report(dataset_id, examples, &outcomes)?))
    }

    pub fn write_text(&self, rel: &str, text: &str) -> Result<(), HarnessError> {
        write_atomic(&self.dir.join(rel), text.as_bytes())
    }

    pub fn write_metrics(&self, name: &str, report: &MetricReport) -> Result<String, HarnessError> {
        let rel = format!("metrics/{name}.json");
        write_json(&self.dir.join(&rel), report)?;
        Ok(rel)
    }

    /// Writes ledgers and the manifest, then hands back the run outcome.
    pub fn finish(mut self, outcome: Result<(), HarnessError>) -> Result<RunManifest, HarnessError> {
        if !self.candidates.is_empty() {
            write_jsonl(&self.dir.join("candidates.jsonl"), &self.candidates)?;
            self.artifacts.insert("candidates".into(), "candidates.jsonl".into());
        }
        if !self.demonstrations.is_empty() {
            write_atomic(&self.dir.join("demonstrations.jsonl"), &self.demonstrations)?;
            self.artifacts.insert("demonstrations".into(), "demonstrations.jsonl".into());
        }
        let manifest = RunManifest {
            run_id: self.dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default(),
            status: if outcome.is_ok() { RunStatus::Complete } else { RunStatus::Failed },
            error: outcome.as_ref().err().map(|e| e.to_string()),
            prompt_mode: self.config.prompt_mode.name().to_string(),
            target_model: self.target.model_id().to_string(),
            reference_model: self.reference.as_ref().map(|r| r.model_id().to_string()),
            config: self.config.clone(),
            started_at: self.started_at,
            finished_at: Utc::now(),
            datasets: self.datasets,
            selected_prompt_ref: self.selected_prompt_ref,
            artifacts: self.artifacts,
            target_stats: self.target.stats(),
            reference_stats: self.reference.as_ref().map(Gateway::stats),
        };
        write_json(&self.dir.join("manifest.json"), &manifest)?;
        outcome.map(|_| manifest)
    }
}

fn fixed_prompt(config: &RunConfig, dataset_id: DatasetId) -> Result<Option<String>, HarnessError> {
    Ok(match &config.prompt_mode {
        PromptMode::None => None,
        PromptMode::Manual => Some(manual_prompt(dataset_id)?.rendered),
        PromptMode::Cfd => Some(cfd_prompt(config.cfd_family.expect("validated")).to_string()),
        PromptMode::External(path) => Some(fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?),
        PromptMode::Drgap | PromptMode::DrgapAgg => {
            return Err(HarnessError::Config(
                "eval runs take none, manual, cfd or external prompts; use the drgap verb".into(),
            ))
        }
    })
}

/// Evaluates the target on each dataset's test split under a fixed prompt.
pub fn run_eval(config: &RunConfig, exec: Execution) -> Result<RunManifest, HarnessError> {
    let mut session = Session::open(config, exec)?;
    let outcome = eval_body(&mut session);
    session.finish(outcome)
}

fn eval_body(s: &mut Session<'_>) -> Result<(), HarnessError> {
    for source in &s.config.datasets {
        let prompt = fixed_prompt(s.config, source.id)?;
        let data = s.prepare(source)?;
        let test = data.test();
        let (verdicts_ref, report) = s.evaluate_persisted(data.id, &test, prompt.as_deref(), data.id.as_str())?;
        let metrics_ref = s.write_metrics(data.id.as_str(), &report)?;
        let prompt_ref = match &prompt {
            Some(p) => {
                let rel = format!("prompts/{}.txt", data.id);
                s.write_text(&rel, p)?;
                Some(rel)
            }
            None => None,
        };
        let entry = s.entry(data.id);
        entry.verdicts_ref = Some(verdicts_ref);
        entry.metrics_ref = Some(metrics_ref);
        entry.prompt_ref = prompt_ref;
    }
    Ok(())
}

/// Name of the lower-is-better quantity used to score candidates on dev.
pub(super) fn dev_metric_name(dataset_id: DatasetId) -> Option<&'static str> {
    match dataset_id {
        DatasetId::Winobias | DatasetId::Winogender => Some("acc_gap"),
        DatasetId::Gap | DatasetId::Bug => Some("|delta_g|"),
        DatasetId::Bbq => Some("|s_amb|"),
        DatasetId::Stereoset => Some("100-icat"),
        DatasetId::Unqover => Some("mu"),
        DatasetId::McqUtility => None,
    }
}

/// Synthesizes and scores candidates for one dataset; returns the winner.
fn synthesize(s: &mut Session<'_>, data: &Prepared) -> Result<SystemPromptCandidate, HarnessError> {
    let metric = dev_metric_name(data.id)
        .ok_or_else(|| HarnessError::Config(format!("`{}` has no bias metric to optimize", data.id)))?;
    let dev = data.dev();
    let (_, target_outcomes) = s.persist_eval(&s.target, &dev, None, &format!("dev/{}.target", data.id))?;
    let (_, reference_outcomes) = s.persist_eval(s.reference(), &dev, None, &format!("dev/{}.reference", data.id))?;

    let selection = select_demonstrations(
        &dev,
        &Evaluation::collapsed(&target_outcomes),
        &Evaluation::collapsed(&reference_outcomes),
        s.config.demonstrations,
        s.config.seed,
    )?;
    log::info!(
        "{}: {} demonstration(s) from the {:?} pool",
        data.id,
        selection.demonstrations.len(),
        selection.tier
    );

    let reference = s.reference();
    let outputs: Vec<StageOutputs> = map_ordered(s.exec, &selection.demonstrations, |d| {
        run_stages(reference, d, s.config.refinement_rounds, s.config.ablation)
    })
    .into_iter()
    .collect::<Result<_, PipelineError>>()?;
    for o in &outputs {
        let row = DemonstrationRow {
            dataset_id: data.id,
            tier: selection.tier,
            demonstration: &o.demonstration,
            candidates: &o.candidates,
            skipped: &o.skipped,
        };
        serde_json::to_writer(&mut s.demonstrations, &row).expect("row serializes");
        s.demonstrations.push(b'\n');
    }

    let candidates = assemble_candidates(&outputs, s.config.ablation)?;
    let (best, scored) = select_best_prompt::<HarnessError, _>(candidates, metric, s.exec, |c| {
        let outcomes = evaluate(&s.target, &dev, Some(&c.rendered), s.config.repetitions, s.config.seed, s.exec)
            .into_result()?;
        let report = Evaluation::report(data.id, &dev, &outcomes)?;
        Ok(report.headline_bias().unwrap_or(f64::NAN))
    })?;
    for (i, c) in scored.iter().enumerate() {
        s.candidates.push(CandidateRow {
            dataset: data.id.to_string(),
            label: c.label,
            text: c.rendered.clone(),
            dev_score: c.dev_score,
            dev_metric: c.dev_metric.clone(),
            selected: i == best,
            members: c.members.iter().map(|m| m.demonstration.example_id.clone()).collect(),
        });
    }
    let winner = scored.into_iter().nth(best).expect("index in range");
    let entry = s.entry(data.id);
    entry.selection_tier = Some(selection.tier);
    entry.selected_label = Some(winner.label);
    log::info!("{}: selected the {} candidate", data.id, winner.label);
    Ok(winner)
}

/// Test-split evaluation without and with `prompt`; the mitigated report
/// carries deltas against the original.
fn mitigate(s: &mut Session<'_>, data: &Prepared, prompt: &str, prompt_ref: &str) -> Result<(), HarnessError> {
    let test = data.test();
    let name = data.id.as_str();
    let (_, original) = s.evaluate_persisted(data.id, &test, None, &format!("{name}.original"))?;
    let original_ref = s.write_metrics(&format!("{name}.original"), &original)?;
    let (verdicts_ref, mitigated) = s.evaluate_persisted(data.id, &test, Some(prompt), name)?;
    let mitigated = mitigated.with_baseline(&original, "original");
    let metrics_ref = s.write_metrics(name, &mitigated)?;
    let entry = s.entry(data.id);
    entry.verdicts_ref = Some(verdicts_ref);
    entry.metrics_ref = Some(metrics_ref);
    entry.original_metrics_ref = Some(original_ref);
    entry.prompt_ref = Some(prompt_ref.to_string());
    Ok(())
}

/// Full synthesis run: per-dataset prompts (`drgap`) or one pooled prompt
/// (`drgap_agg`), each followed by a before/after test evaluation.
pub fn run_drgap(config: &RunConfig, exec: Execution) -> Result<RunManifest, HarnessError> {
    if !matches!(config.prompt_mode, PromptMode::Drgap | PromptMode::DrgapAgg) {
        return Err(HarnessError::Config(format!(
            "prompt_mode `{}` is not a synthesis mode",
            config.prompt_mode.name()
        )));
    }
    let mut session = Session::open(config, exec)?;
    let outcome = drgap_body(&mut session);
    session.finish(outcome)
}

fn drgap_body(s: &mut Session<'_>) -> Result<(), HarnessError> {
    let aggregate = s.config.prompt_mode == PromptMode::DrgapAgg;
    let mut prepared = Vec::new();
    let mut winners = Vec::new();
    for source in &s.config.datasets {
        let data = s.prepare(source)?;
        let winner = synthesize(s, &data)?;
        let rel = format!("prompts/{}.txt", data.id);
        s.write_text(&rel, &winner.rendered)?;
        if !aggregate {
            mitigate(s, &data, &winner.rendered, &rel)?;
            if s.config.datasets.len() == 1 {
                s.write_text("selected_prompt.txt", &winner.rendered)?;
                s.selected_prompt_ref = Some("selected_prompt.txt".into());
            }
        }
        prepared.push(data);
        winners.push(winner);
    }
    if aggregate {
        let pooled = aggregate_prompt(&winners)?;
        s.write_text("selected_prompt.txt", &pooled.rendered)?;
        s.selected_prompt_ref = Some("selected_prompt.txt".into());
        s.candidates.push(CandidateRow {
            dataset: "aggregate".into(),
            label: pooled.label,
            text: pooled.rendered.clone(),
            dev_score: None,
            dev_metric: String::new(),
            selected: true,
            members: pooled.members.iter().map(|m| m.demonstration.example_id.clone()).collect(),
        });
        for data in &prepared {
            mitigate(s, data, &pooled.rendered, "selected_prompt.txt")?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Polarity, PronounGender, Task};
    use crate::gateway::{PolicyConfig, Script};

    pub(crate) fn pairs(n: usize) -> Vec<Example> {
        let jobs = [("carpenter", "hairdresser"), ("mechanic", "nurse"), ("lawyer", "secretary")];
        let mut out = Vec::new();
        for i in 0..n {
            let (m, f) = jobs[i % jobs.len()];
            for (polarity, pronoun, gold) in [(Polarity::Stereo, "he", m), (Polarity::AntiStereo, "she", m)] {
                let mut e = Example::new(format!("wb/{i}/{polarity:?}"), DatasetId::Winobias, Task::Coref);
                e.text = format!("The {m} {i} called the {f} because {pronoun} was late.");
                e.question = "Who does the pronoun refer to?".into();
                e.candidate_entities = Some(vec![m.into(), f.into()]);
                e.gold = Some(gold.into());
                e.polarity = polarity;
                e.pronoun_gender = PronounGender::of_pronoun(pronoun);
                e.pair_group = Some(format!("g{i}"));
                out.push(e);
            }
        }
        out
    }

    fn write_corpus(dir: &Path, n: usize) -> DatasetSource {
        let path = dir.join("wb.jsonl");
        crate::corpus::canonical_write(&path, &pairs(n)).unwrap();
        DatasetSource {
            id: DatasetId::Winobias,
            path,
            format: SourceFormat::Auto,
        }
    }

    #[test]
    fn stereotype_policy_gives_full_gap_and_gold_policy_none() {
        let dir = tempfile::tempdir().unwrap();
        let src = write_corpus(dir.path(), 10);
        for (policy, gap) in [("answer_stereotype", 100.0), ("answer_gold", 0.0)] {
            let target = Endpoint::rule_stub("t", PolicyConfig::named(policy), None).unwrap();
            let mut cfg = RunConfig::new(target, vec![src.clone()], dir.path().join("runs"));
            cfg.run_id = Some(policy.into());
            let manifest = run_eval(&cfg, Execution::Sequential).unwrap();
            let rel = manifest.datasets[0].metrics_ref.clone().unwrap();
            let report: MetricReport =
                serde_json::from_slice(&fs::read(dir.path().join("runs").join(policy).join(rel)).unwrap()).unwrap();
            assert_eq!(report.get("acc_gap"), Some(gap));
        }
    }

    #[test]
    fn drgap_run_without_refinement_has_three_candidates() {
        let dir = tempfile::tempdir().unwrap();
        let src = write_corpus(dir.path(), 10);
        let target = Endpoint::rule_stub("t", PolicyConfig::unless_marker("[FAIR]"), None).unwrap();
        let script = Script::default()
            .contains("dose the reasonning", "verified chain")
            .contains("remove the reference to gender", "[FAIR] filtered chain")
            .with_default("initial chain");
        let reference = Endpoint::rule_stub("r", PolicyConfig::named("answer_gold"), Some(script)).unwrap();
        let mut cfg = RunConfig::new(target, vec![src], dir.path().join("runs"));
        cfg.reference = Some(reference);
        cfg.prompt_mode = PromptMode::Drgap;
        cfg.ablation.no_refinement = true;
        cfg.repetitions = 1;
        let manifest = run_drgap(&cfg, Execution::Sequential).unwrap();
        let run_dir = dir.path().join("runs").join(&manifest.run_id);
        let rows = fs::read_to_string(run_dir.join("candidates.jsonl")).unwrap();
        let rows: Vec<CandidateRow> = rows.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
        assert_eq!(rows.len(), 3);
        let chosen: Vec<Stage> = rows.iter().filter(|r| r.selected).map(|r| r.label).collect();
        assert_eq!(chosen, [Stage::Filtered]);
        let selected = fs::read_to_string(run_dir.join("selected_prompt.txt")).unwrap();
        assert!(selected.contains("[FAIR] filtered chain"));
        assert_eq!(manifest.datasets[0].selection_tier, Some(SelectionTier::Differential));
    }

    #[test]
    fn limit_drops_half_pairs() {
        let dir = tempfile::tempdir().unwrap();
        let src = write_corpus(dir.path(), 5);
        let loaded = load_corpus(&src, Some(5)).unwrap();
        assert_eq!(loaded.len(), 4);
    }

    #[test]
    fn drgap_verb_rejects_fixed_prompt_modes() {
        let target = Endpoint::rule_stub("t", PolicyConfig::named("answer_gold"), None).unwrap();
        let cfg = RunConfig::new(target, vec![], "out");
        assert!(matches!(run_drgap(&cfg, Execution::Sequential), Err(HarnessError::Config(_))));
    }
}
