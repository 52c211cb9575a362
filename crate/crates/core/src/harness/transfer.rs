use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::run::Session;
use super::{write_atomic, write_json, HarnessError, RunConfig, RunManifest};
use crate::corpus::DatasetId;
use crate::exec::Execution;
use crate::metrics::{delta_bias, MetricError};

/// ΔBias of every source prompt on every target dataset. Rows are targets,
/// columns are sources. A cell is `None` when the target's baseline bias is
/// zero and the ratio is undefined.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferMatrix {
    pub sources: Vec<DatasetId>,
    pub targets: Vec<DatasetId>,
    pub baseline_bias: Vec<f64>,
    pub mitigated_bias: Vec<Vec<f64>>,
    pub delta_bias: Vec<Vec<Option<f64>>>,
}

impl TransferMatrix {
    pub fn cell(&self, target: DatasetId, source: DatasetId) -> Option<f64> {
        let t = self.targets.iter().position(|d| *d == target)?;
        let s = self.sources.iter().position(|d| *d == source)?;
        self.delta_bias[t][s]
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["target".to_string()];
        header.extend(self.sources.iter().map(|s| s.to_string()));
        w.write_record(&header).expect("in-memory write");
        for (t, row) in self.targets.iter().zip(&self.delta_bias) {
            let mut rec = vec![t.to_string()];
            rec.extend(row.iter().map(|c| c.map(|v| v.to_string()).unwrap_or_default()));
            w.write_record(&rec).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
    }
}

/// Evaluates each source prompt on each target's test split against the
/// target's no-prompt baseline. Writes `transfer.json` and `transfer.csv`.
pub fn run_transfer_matrix(
    config: &RunConfig,
    source_prompts: &BTreeMap<DatasetId, String>,
    targets: &[DatasetId],
    exec: Execution,
) -> Result<(RunManifest, TransferMatrix), HarnessError> {
    if source_prompts.is_empty() {
        return Err(HarnessError::Config("transfer needs at least one source prompt".into()));
    }
    let mut session = Session::open(config, exec)?;
    let outcome = body(&mut session, source_prompts, targets);
    let matrix = outcome.as_ref().ok().cloned();
    let manifest = session.finish(outcome.map(|_| ()))?;
    Ok((manifest, matrix.expect("finish propagates failures")))
}

fn body(
    s: &mut Session<'_>,
    source_prompts: &BTreeMap<DatasetId, String>,
    targets: &[DatasetId],
) -> Result<TransferMatrix, HarnessError> {
    let sources: Vec<DatasetId> = source_prompts.keys().copied().collect();
    for (source, prompt) in source_prompts {
        s.write_text(&format!("prompts/{source}.txt"), prompt)?;
    }
    let mut matrix = TransferMatrix {
        sources: sources.clone(),
        targets: targets.to_vec(),
        baseline_bias: Vec::new(),
        mitigated_bias: Vec::new(),
        delta_bias: Vec::new(),
    };
    for &target in targets {
        let source = s
            .config
            .datasets
            .iter()
            .find(|d| d.id == target)
            .ok_or_else(|| HarnessError::Config(format!("target dataset `{target}` is not configured")))?;
        let data = s.prepare(source)?;
        let test = data.test();
        let name = format!("{target}.original");
        let (verdicts_ref, original) = s.evaluate_persisted(target, &test, None, &name)?;
        let original_ref = s.write_metrics(&name, &original)?;
        let baseline = original.headline_bias().ok_or(HarnessError::MissingBaseline(target))?;
        let entry = s.entry(target);
        entry.verdicts_ref = Some(verdicts_ref);
        entry.original_metrics_ref = Some(original_ref);

        let mut mitigated_row = Vec::with_capacity(sources.len());
        let mut delta_row = Vec::with_capacity(sources.len());
        for source in &sources {
            let name = format!("{target}.from_{source}");
            let (_, report) = s.evaluate_persisted(target, &test, Some(&source_prompts[source]), &name)?;
            let report = report.with_baseline(&original, "original");
            s.write_metrics(&name, &report)?;
            let mitigated = report.headline_bias().ok_or(HarnessError::MissingBaseline(target))?;
            mitigated_row.push(mitigated);
            delta_row.push(match delta_bias(baseline, mitigated) {
                Ok(v) => Some(v),
                Err(MetricError::ZeroBaseline) => None,
                Err(e) => return Err(e.into()),
            });
        }
        matrix.baseline_bias.push(baseline);
        matrix.mitigated_bias.push(mitigated_row);
        matrix.delta_bias.push(delta_row);
    }
    write_json(&s.dir.join("transfer.json"), &matrix)?;
    write_atomic(&s.dir.join("transfer.csv"), matrix.to_csv().as_bytes())?;
    s.artifacts.insert("transfer_json".into(), "transfer.json".into());
    s.artifacts.insert("transfer_csv".into(), "transfer.csv".into());
    Ok(matrix)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_leaves_undefined_cells_empty() {
        let m = TransferMatrix {
            sources: vec![DatasetId::Winobias, DatasetId::Gap],
            targets: vec![DatasetId::Bbq],
            baseline_bias: vec![0.5],
            mitigated_bias: vec![vec![0.0, 0.5]],
            delta_bias: vec![vec![Some(1.0), None]],
        };
        assert_eq!(m.to_csv(), "target,winobias,gap\nbbq,1,\n");
        assert_eq!(m.cell(DatasetId::Bbq, DatasetId::Winobias), Some(1.0));
        assert_eq!(m.cell(DatasetId::Bbq, DatasetId::Gap), None);
    }
}
