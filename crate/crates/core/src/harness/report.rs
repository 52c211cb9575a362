use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::run::RunStatus;
use super::{HarnessError, RunManifest};
use crate::corpus::DatasetId;
use crate::metrics::{MetricReport, Orientation};

/// A persisted run: its manifest plus the final report per dataset.
#[derive(Debug, Clone)]
pub struct LoadedRun {
    pub dir: PathBuf,
    pub manifest: RunManifest,
    pub metrics: BTreeMap<DatasetId, MetricReport>,
}

impl LoadedRun {
    fn is_original(&self) -> bool {
        self.manifest.prompt_mode == "none"
    }

    fn label(&self) -> String {
        let mut label = self.manifest.prompt_mode.clone();
        let ablation = &self.manifest.config.ablation;
        if label.starts_with("drgap") {
            for (off, name) in [
                (ablation.no_verification, "verification"),
                (ablation.no_filtering, "filtering"),
                (ablation.no_refinement, "refinement"),
            ] {
                if off {
                    label.push_str(&format!(" w/o {name}"));
                }
            }
        }
        label
    }
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, HarnessError> {
    let raw = fs::read(path).map_err(|e| HarnessError::io(path, e))?;
    serde_json::from_slice(&raw).map_err(|e| HarnessError::BadArtifact {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

pub fn load_run(dir: &Path) -> Result<LoadedRun, HarnessError> {
    let manifest: RunManifest = read_json(&dir.join("manifest.json"))?;
    if manifest.status != RunStatus::Complete {
        return Err(HarnessError::IncomparableRuns(format!(
            "run `{}` did not complete: {}",
            manifest.run_id,
            manifest.error.as_deref().unwrap_or("unknown error")
        )));
    }
    let mut metrics = BTreeMap::new();
    for entry in &manifest.datasets {
        let rel = entry.metrics_ref.as_ref().or(entry.original_metrics_ref.as_ref());
        if let Some(rel) = rel {
            metrics.insert(entry.dataset_id, read_json(&dir.join(rel))?);
        }
    }
    Ok(LoadedRun {
        dir: dir.to_path_buf(),
        manifest,
        metrics,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableColumn {
    pub dataset: DatasetId,
    pub metric: String,
    pub orientation: Orientation,
    pub arrow: String,
}

impl TableColumn {
    fn new(dataset: DatasetId, metric: &str) -> Self {
        let orientation = Orientation::of(metric);
        TableColumn {
            dataset,
            metric: metric.to_string(),
            orientation,
            arrow: orientation.arrow().to_string(),
        }
    }

    fn header(&self) -> String {
        format!("{}:{}{}", self.dataset, self.metric, self.arrow)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableCell {
    pub value: Option<f64>,
    pub best: bool,
    pub second_best: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub label: String,
    pub run_id: String,
    pub original: bool,
    pub cells: Vec<TableCell>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub columns: Vec<TableColumn>,
    pub rows: Vec<TableRow>,
    /// Run id the delta columns are measured against, if any.
    pub baseline_run: Option<String>,
}

fn display_metrics(dataset: DatasetId) -> &'static [&'static str] {
    match dataset {
        DatasetId::Winobias | DatasetId::Winogender => &["acc", "acc_gap"],
        DatasetId::Gap | DatasetId::Bug => &["acc", "delta_g"],
        DatasetId::Bbq => &["accuracy", "s_dis", "s_amb"],
        DatasetId::Stereoset => &["lms", "ss", "icat"],
        DatasetId::Unqover => &["mu"],
        DatasetId::McqUtility => &["mcq_accuracy"],
    }
}

/// Builds a comparison table: one row per run, metric columns per dataset,
/// plus ΔAcc/ΔBias columns against the single no-prompt run when there are
/// several runs. Best and second-best method values are flagged per column.
pub fn report(runs: &[LoadedRun]) -> Result<ComparisonTable, HarnessError> {
    let first = runs
        .first()
        .ok_or_else(|| HarnessError::IncomparableRuns("no runs given".into()))?;
    let coverage: BTreeSet<DatasetId> = first.metrics.keys().copied().collect();
    for run in &runs[1..] {
        let other: BTreeSet<DatasetId> = run.metrics.keys().copied().collect();
        if other != coverage {
            return Err(HarnessError::IncomparableRuns(format!(
                "`{}` covers {other:?} but `{}` covers {coverage:?}",
                run.manifest.run_id, first.manifest.run_id
            )));
        }
        for d in &coverage {
            let (a, b) = (first.metrics[d].n_examples, run.metrics[d].n_examples);
            if a != b {
                return Err(HarnessError::IncomparableRuns(format!(
                    "{d}: `{}` scored {a} examples, `{}` scored {b}",
                    first.manifest.run_id, run.manifest.run_id
                )));
            }
        }
    }
    let originals: Vec<&LoadedRun> = runs.iter().filter(|r| r.is_original()).collect();
    if originals.len() > 1 {
        return Err(HarnessError::IncomparableRuns("more than one no-prompt run".into()));
    }
    let baseline = originals.first().copied().filter(|_| runs.len() > 1);

    let mut columns = Vec::new();
    for &d in &coverage {
        for m in display_metrics(d) {
            if runs.iter().any(|r| r.metrics[&d].get(m).is_some()) {
                columns.push(TableColumn::new(d, m));
            }
        }
        if baseline.is_some() {
            columns.push(TableColumn::new(d, "delta_acc"));
            columns.push(TableColumn::new(d, "delta_bias"));
        }
    }

    let mut rows: Vec<TableRow> = runs
        .iter()
        .map(|run| {
            let cells = columns
                .iter()
                .map(|c| {
                    let report = &run.metrics[&c.dataset];
                    let value = match (c.metric.as_str(), baseline) {
                        (m, Some(_)) if run.is_original() && m.starts_with("delta_") => None,
                        ("delta_acc", Some(b)) => report.clone().with_baseline(&b.metrics[&c.dataset], "").delta_acc,
                        ("delta_bias", Some(b)) => report.clone().with_baseline(&b.metrics[&c.dataset], "").delta_bias,
                        (m, _) => report.get(m),
                    };
                    TableCell {
                        value,
                        best: false,
                        second_best: false,
                    }
                })
                .collect();
            TableRow {
                label: run.label(),
                run_id: run.manifest.run_id.clone(),
                original: run.is_original(),
                cells,
            }
        })
        .collect();

    for (ci, col) in columns.iter().enumerate() {
        let mut scores: Vec<f64> = rows
            .iter()
            .filter(|r| !r.original)
            .filter_map(|r| r.cells[ci].value)
            .filter(|v| v.is_finite())
            .map(|v| col.orientation.badness(v))
            .collect();
        scores.sort_by(f64::total_cmp);
        scores.dedup();
        for row in rows.iter_mut().filter(|r| !r.original) {
            let cell = &mut row.cells[ci];
            if let Some(b) = cell.value.filter(|v| v.is_finite()).map(|v| col.orientation.badness(v)) {
                cell.best = scores.first() == Some(&b);
                cell.second_best = scores.get(1) == Some(&b);
            }
        }
    }

    Ok(ComparisonTable {
        columns,
        rows,
        baseline_run: baseline.map(|b| b.manifest.run_id.clone()),
    })
}

fn fmt_value(v: Option<f64>) -> String {
    v.map(|v| format!("{v:.3}")).unwrap_or_else(|| "-".into())
}

impl ComparisonTable {
    /// Plain-text table; `*` marks best, `+` second best.
    pub fn to_text(&self) -> String {
        let mut grid = vec![std::iter::once("method".to_string())
            .chain(self.columns.iter().map(TableColumn::header))
            .collect::<Vec<_>>()];
        for row in &self.rows {
            let mut line = vec![row.label.clone()];
            for cell in &row.cells {
                let mark = if cell.best {
                    "*"
                } else if cell.second_best {
                    "+"
                } else {
                    ""
                };
                line.push(format!("{}{mark}", fmt_value(cell.value)));
            }
            grid.push(line);
        }
        let widths: Vec<usize> = (0..grid[0].len())
            .map(|i| grid.iter().map(|l| l[i].chars().count()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for line in &grid {
            let cells: Vec<String> = line.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
            let _ = writeln!(out, "{}", cells.join("  ").trim_end());
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["method".to_string(), "run_id".to_string()];
        for c in &self.columns {
            header.push(c.header());
            header.push(format!("{}:{}:rank", c.dataset, c.metric));
        }
        w.write_record(&header).expect("in-memory write");
        for row in &self.rows {
            let mut rec = vec![row.label.clone(), row.run_id.clone()];
            for cell in &row.cells {
                rec.push(cell.value.map(|v| v.to_string()).unwrap_or_default());
                rec.push(
                    match (cell.best, cell.second_best) {
                        (true, _) => "best",
                        (_, true) => "second",
                        _ => "",
                    }
                    .to_string(),
                );
            }
            w.write_record(&rec).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("table serializes")
    }

    pub fn column(&self, dataset: DatasetId, metric: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.dataset == dataset && c.metric == metric)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::{Endpoint, GatewayStats, PolicyConfig};
    use crate::harness::{RunConfig, RunManifest};

    fn run(id: &str, mode: &str, acc: f64, gap: f64) -> LoadedRun {
        let target = Endpoint::rule_stub("t", PolicyConfig::named("answer_gold"), None).unwrap();
        let now = chrono::Utc::now();
        let metrics = BTreeMap::from([(
            DatasetId::Winobias,
            MetricReport {
                dataset_id: DatasetId::Winobias,
                n_examples: 10,
                repetitions: 1,
                metrics: BTreeMap::from([("acc".to_string(), acc), ("acc_gap".to_string(), gap)]),
                baseline_ref: None,
                delta_acc: None,
                delta_bias: None,
            },
        )]);
        LoadedRun {
            dir: PathBuf::from(id),
            manifest: RunManifest {
                run_id: id.into(),
                status: RunStatus::Complete,
                error: None,
                prompt_mode: mode.into(),
                target_model: "t".into(),
                reference_model: None,
                config: RunConfig::new(target, vec![], "o"),
                started_at: now,
                finished_at: now,
                datasets: vec![],
                selected_prompt_ref: None,
                artifacts: BTreeMap::new(),
                target_stats: GatewayStats::default(),
                reference_stats: None,
            },
            metrics,
        }
    }

    #[test]
    fn single_run_has_no_delta_columns() {
        let t = report(&[run("a", "none", 80.0, 20.0)]).unwrap();
        assert_eq!(t.columns.len(), 2);
        assert!(t.baseline_run.is_none());
    }

    #[test]
    fn deltas_against_the_original_and_hand_ranking() {
        let runs = [
            run("o", "none", 80.0, 40.0),
            run("m", "manual", 84.0, 30.0),
            run("c", "cfd", 72.0, 35.0),
            run("d", "drgap", 88.0, 10.0),
        ];
        let t = report(&runs).unwrap();
        let gap = t.column(DatasetId::Winobias, "acc_gap").unwrap();
        let db = t.column(DatasetId::Winobias, "delta_bias").unwrap();
        let da = t.column(DatasetId::Winobias, "delta_acc").unwrap();
        assert_eq!(t.rows[0].cells[db].value, None);
        assert!((t.rows[3].cells[db].value.unwrap() - 0.75).abs() < 1e-12);
        assert!((t.rows[2].cells[da].value.unwrap() + 0.1).abs() < 1e-12);
        let flags: Vec<(bool, bool)> = t.rows.iter().map(|r| (r.cells[gap].best, r.cells[gap].second_best)).collect();
        assert_eq!(flags, [(false, false), (false, true), (false, false), (true, false)]);
        assert!(t.to_text().contains("winobias:acc_gap↓"));
        assert!(t.to_csv().lines().nth(4).unwrap().starts_with("drgap,d,88,best,10,best"));
    }

    #[test]
    fn coverage_mismatch_is_rejected() {
        let mut b = run("b", "manual", 1.0, 1.0);
        let r = b.metrics.remove(&DatasetId::Winobias).unwrap();
        b.metrics.insert(DatasetId::Gap, MetricReport { dataset_id: DatasetId::Gap, ..r });
        assert!(matches!(
            report(&[run("a", "none", 1.0, 1.0), b]),
            Err(HarnessError::IncomparableRuns(_))
        ));
    }
}
