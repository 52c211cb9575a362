use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::baselines::ModelFamily;
use crate::corpus::DatasetId;
use crate::gateway::Endpoint;
use crate::pipeline::Ablation;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceFormat {
    /// Detect: canonical JSONL if the first record carries `schema_version`.
    #[default]
    Auto,
    Canonical,
    Native,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSource {
    pub id: DatasetId,
    pub path: PathBuf,
    #[serde(default)]
    pub format: SourceFormat,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptMode {
    None,
    Drgap,
    DrgapAgg,
    Manual,
    Cfd,
    External(PathBuf),
}

impl PromptMode {
    pub fn name(&self) -> &'static str {
        match self {
            PromptMode::None => "none",
            PromptMode::Drgap => "drgap",
            PromptMode::DrgapAgg => "drgap_agg",
            PromptMode::Manual => "manual",
            PromptMode::Cfd => "cfd",
            PromptMode::External(_) => "external",
        }
    }
}

fn three_usize() -> usize {
    3
}
fn three_u32() -> u32 {
    3
}
fn one() -> usize {
    1
}
fn dev_fraction() -> f64 {
    0.2
}
fn prompt_none() -> PromptMode {
    PromptMode::None
}

/// One run, as written in a TOML or JSON config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub run_id: Option<String>,
    pub target: Endpoint,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<Endpoint>,
    pub datasets: Vec<DatasetSource>,
    #[serde(default = "prompt_none")]
    pub prompt_mode: PromptMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cfd_family: Option<ModelFamily>,
    #[serde(default = "three_usize")]
    pub repetitions: usize,
    #[serde(default = "three_u32")]
    pub refinement_rounds: u32,
    #[serde(default = "one")]
    pub demonstrations: usize,
    #[serde(default = "dev_fraction")]
    pub dev_fraction: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cache_dir: Option<PathBuf>,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub ablation: Ablation,
    /// Keep only the first N records of each dataset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub limit: Option<usize>,
}

impl RunConfig {
    /// A config with defaults for everything but the essentials.
    pub fn new(target: Endpoint, datasets: Vec<DatasetSource>, output_dir: impl Into<PathBuf>) -> Self {
        RunConfig {
            run_id: None,
            target,
            reference: None,
            datasets,
            prompt_mode: PromptMode::None,
            cfd_family: None,
            repetitions: 3,
            refinement_rounds: 3,
            demonstrations: 1,
            dev_fraction: dev_fraction(),
            seed: 0,
            cache_dir: None,
            output_dir: output_dir.into(),
            ablation: Ablation::default(),
            limit: None,
        }
    }

    /// Reads `.toml` or `.json` by extension.
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let raw = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        let cfg: RunConfig = match path.extension().and_then(|e| e.to_str()) {
            Some("toml") => toml::from_str(&raw).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?,
            Some("json") => {
                serde_json::from_str(&raw).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?
            }
            _ => {
                return Err(HarnessError::Config(format!(
                    "{}: config must be .toml or .json",
                    path.display()
                )))
            }
        };
        let base = path.parent().unwrap_or(Path::new("."));
        let cfg = cfg.resolved_against(base);
        cfg.validate()?;
        Ok(cfg)
    }

    /// Makes relative paths relative to the config file's directory.
    fn resolved_against(mut self, base: &Path) -> Self {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for d in &mut self.datasets {
            fix(&mut d.path);
        }
        fix(&mut self.output_dir);
        if let Some(c) = &mut self.cache_dir {
            fix(c);
        }
        if let PromptMode::External(p) = &mut self.prompt_mode {
            fix(p);
        }
        self
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: &str| Err(HarnessError::Config(m.to_string()));
        if self.repetitions == 0 {
            return bad("repetitions must be at least 1");
        }
        if self.refinement_rounds == 0 {
            return bad("refinement_rounds must be at least 1");
        }
        if self.demonstrations == 0 {
            return bad("demonstrations must be at least 1");
        }
        if !(self.dev_fraction > 0.0 && self.dev_fraction < 1.0) {
            return bad("dev_fraction must lie strictly between 0 and 1");
        }
        if self.datasets.is_empty() {
            return bad("no datasets configured");
        }
        if self.prompt_mode == PromptMode::Cfd && self.cfd_family.is_none() {
            return bad("prompt_mode cfd needs cfd_family (gpt35_llama3 or llama2_alpaca)");
        }
        let drgap = matches!(self.prompt_mode, PromptMode::Drgap | PromptMode::DrgapAgg);
        if drgap && self.reference.is_none() {
            return bad("drgap modes need a reference endpoint");
        }
        if !drgap && self.ablation != Ablation::default() {
            log::warn!("ablation flags are ignored outside drgap modes");
        }
        self.target.validate().map_err(|e| HarnessError::Config(format!("target: {e}")))?;
        if let Some(r) = &self.reference {
            r.validate().map_err(|e| HarnessError::Config(format!("reference: {e}")))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOML: &str = r#"
output_dir = "out"
prompt_mode = "drgap"
seed = 7

[target]
kind = "rule_stub"
model_id = "target"
policy = { name = "answer_stereotype_unless_marker", marker = "[FAIR]" }

[reference]
kind = "rule_stub"
model_id = "reference"
policy = { name = "answer_gold" }
script = { default = "1. Read. 2. Resolve. 3. Answer." }

[[datasets]]
id = "winobias"
path = "data/winobias.jsonl"

[ablation]
no_refinement = true
"#;

    #[test]
    fn toml_config_parses_with_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, TOML).unwrap();
        let cfg = RunConfig::load(&path).unwrap();
        assert_eq!(cfg.repetitions, 3);
        assert_eq!(cfg.refinement_rounds, 3);
        assert_eq!(cfg.dev_fraction, 0.2);
        assert!(cfg.ablation.no_refinement);
        assert_eq!(cfg.datasets[0].path, dir.path().join("data/winobias.jsonl"));
        assert_eq!(cfg.prompt_mode, PromptMode::Drgap);
    }

    #[test]
    fn external_prompt_mode_and_validation() {
        let json = r#"{"target": {"kind": "scripted_stub", "script": {"default": "x"}},
            "datasets": [{"id": "gap", "path": "g.tsv"}], "output_dir": "o",
            "prompt_mode": {"external": "p.txt"}, "repetitions": 0}"#;
        let cfg: RunConfig = serde_json::from_str(json).unwrap();
        assert_eq!(cfg.prompt_mode, PromptMode::External("p.txt".into()));
        assert!(matches!(cfg.validate(), Err(HarnessError::Config(_))));
        let mut ok = cfg.clone();
        ok.repetitions = 1;
        assert!(ok.validate().is_ok());
        ok.prompt_mode = PromptMode::Drgap;
        assert!(ok.validate().is_err());
    }
}
