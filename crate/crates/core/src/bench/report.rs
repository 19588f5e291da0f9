//! Study records, aggregate statistics and CSV/JSON emission.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Empirical values below this are left out of percentage errors.
pub const MAPE_FLOOR: f64 = 1e-6;

pub const CSV_FILE: &str = "cases.csv";
pub const JSON_FILE: &str = "summary.json";

/// Rounds to six significant digits; the result prints back exactly.
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.5e}").parse().expect("formatted float parses")
}

/// One row of the per-case CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseRecord {
    pub study: String,
    pub n_targets: usize,
    pub case_id: usize,
    pub seed: u64,
    pub planner: Option<String>,
    pub t_d: Option<f64>,
    #[serde(rename = "final_U")]
    pub final_u: Option<f64>,
    pub empirical_pfind: Option<f64>,
    pub estimated_pfind: Option<f64>,
    pub empirical_tfind: Option<f64>,
    pub estimated_tfind: Option<f64>,
    pub runtime_s: Option<f64>,
}

impl CaseRecord {
    pub fn new(study: &str, n_targets: usize, case_id: usize, seed: u64) -> Self {
        Self {
            study: study.to_string(),
            n_targets,
            case_id,
            seed,
            planner: None,
            t_d: None,
            final_u: None,
            empirical_pfind: None,
            estimated_pfind: None,
            empirical_tfind: None,
            estimated_tfind: None,
            runtime_s: None,
        }
    }

    /// Rounds every numeric field to what the CSV will hold.
    pub fn rounded(mut self) -> Self {
        for v in [
            &mut self.t_d,
            &mut self.final_u,
            &mut self.empirical_pfind,
            &mut self.estimated_pfind,
            &mut self.empirical_tfind,
            &mut self.estimated_tfind,
            &mut self.runtime_s,
        ] {
            *v = v.map(round_sig);
        }
        self
    }
}

/// An episode or case that could not be evaluated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureRecord {
    pub n_targets: usize,
    pub case_id: usize,
    pub seed: u64,
    pub planner: Option<String>,
    pub t_d: Option<f64>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub study: String,
    pub master_seed: u64,
    /// Echo of every setting that shaped the results.
    pub config: serde_json::Value,
    pub records: Vec<CaseRecord>,
    pub failures: Vec<FailureRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub total_runtime_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorAggregate {
    pub t_d: f64,
    pub cases: usize,
    pub mape_pfind: Option<f64>,
    pub mape_tfind: Option<f64>,
    /// Cases left out of the P_find error (empirical value below the floor).
    pub pfind_excluded: usize,
    /// Cases left out of the find-time error (no estimated or observed finds).
    pub tfind_excluded: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackingAggregate {
    pub n_targets: usize,
    pub planner: String,
    pub cases: usize,
    pub mean_final_u: Option<f64>,
    pub std_final_u: Option<f64>,
    pub failures: usize,
}

/// How often `planner` ends with lower final U than `baseline` on the
/// same case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedComparison {
    pub n_targets: usize,
    pub planner: String,
    pub baseline: String,
    pub cases: usize,
    pub wins: usize,
    pub win_rate: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub records: usize,
    pub failures: usize,
    pub estimator: Vec<EstimatorAggregate>,
    pub tracking: Vec<TrackingAggregate>,
    pub paired: Vec<PairedComparison>,
}

/// `mean(|est − emp| / emp)` over pairs with `emp ≥ MAPE_FLOOR`, plus the
/// number of pairs skipped.
pub fn mape(pairs: impl IntoIterator<Item = (Option<f64>, Option<f64>)>) -> (Option<f64>, usize) {
    let mut sum = 0.0;
    let mut used = 0usize;
    let mut skipped = 0usize;
    for (est, emp) in pairs {
        match (est, emp) {
            (Some(est), Some(emp)) if emp >= MAPE_FLOOR => {
                sum += (est - emp).abs() / emp;
                used += 1;
            }
            _ => skipped += 1,
        }
    }
    ((used > 0).then(|| sum / used as f64), skipped)
}

/// Mean and sample standard deviation.
pub fn mean_std(values: &[f64]) -> (Option<f64>, Option<f64>) {
    if values.is_empty() {
        return (None, None);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = (values.len() > 1).then(|| (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt());
    (Some(mean), std)
}

/// Aggregates derived only from `records` and the failure list.
pub fn aggregate(records: &[CaseRecord], failures: &[FailureRecord]) -> Aggregates {
    let mut by_td: BTreeMap<u64, Vec<&CaseRecord>> = BTreeMap::new();
    let mut by_planner: BTreeMap<(usize, String), Vec<&CaseRecord>> = BTreeMap::new();
    for r in records {
        match (r.study.as_str(), r.t_d, &r.planner) {
            ("estimator", Some(t_d), _) => by_td.entry(t_d.to_bits()).or_default().push(r),
            ("tracking", _, Some(p)) if r.final_u.is_some() => {
                by_planner.entry((r.n_targets, p.clone())).or_default().push(r)
            }
            _ => {}
        }
    }

    let mut estimator: Vec<EstimatorAggregate> = by_td
        .values()
        .map(|rows| {
            let (mape_pfind, pfind_excluded) = mape(rows.iter().map(|r| (r.estimated_pfind, r.empirical_pfind)));
            let (mape_tfind, tfind_excluded) = mape(rows.iter().map(|r| {
                let est = r.estimated_tfind.filter(|_| r.estimated_pfind.is_some_and(|p| p > 0.0));
                (est, r.empirical_tfind)
            }));
            EstimatorAggregate {
                t_d: rows[0].t_d.unwrap_or_default(),
                cases: rows.len(),
                mape_pfind,
                mape_tfind,
                pfind_excluded,
                tfind_excluded,
            }
        })
        .collect();
    estimator.sort_by(|a, b| a.t_d.total_cmp(&b.t_d));

    let mut failure_counts: BTreeMap<(usize, String), usize> = BTreeMap::new();
    for f in failures {
        if let Some(p) = &f.planner {
            *failure_counts.entry((f.n_targets, p.clone())).or_default() += 1;
        }
    }
    let mut keys: Vec<(usize, String)> = by_planner.keys().cloned().collect();
    keys.extend(failure_counts.keys().cloned());
    keys.sort();
    keys.dedup();
    let tracking = keys
        .iter()
        .map(|key| {
            let values: Vec<f64> =
                by_planner.get(key).map(|rows| rows.iter().filter_map(|r| r.final_u).collect()).unwrap_or_default();
            let (mean_final_u, std_final_u) = mean_std(&values);
            TrackingAggregate {
                n_targets: key.0,
                planner: key.1.clone(),
                cases: values.len(),
                mean_final_u,
                std_final_u,
                failures: failure_counts.get(key).copied().unwrap_or(0),
            }
        })
        .collect();

    let mut paired = Vec::new();
    for (a, rows_a) in &by_planner {
        for (b, rows_b) in &by_planner {
            if a.0 != b.0 || a.1 == b.1 {
                continue;
            }
            let u_b: BTreeMap<usize, f64> = rows_b.iter().filter_map(|r| Some((r.case_id, r.final_u?))).collect();
            let mut cases = 0;
            let mut wins = 0;
            for r in rows_a {
                if let (Some(ua), Some(ub)) = (r.final_u, u_b.get(&r.case_id)) {
                    cases += 1;
                    wins += usize::from(ua < *ub);
                }
            }
            paired.push(PairedComparison {
                n_targets: a.0,
                planner: a.1.clone(),
                baseline: b.1.clone(),
                cases,
                wins,
                win_rate: (cases > 0).then(|| wins as f64 / cases as f64),
            });
        }
    }

    Aggregates { records: records.len(), failures: failures.len(), estimator, tracking, paired }
}

impl StudyReport {
    pub fn aggregates(&self) -> Aggregates {
        aggregate(&self.records, &self.failures)
    }

    pub fn estimator_aggregate(&self, t_d: f64) -> Option<EstimatorAggregate> {
        self.aggregates().estimator.into_iter().find(|a| a.t_d == t_d)
    }

    pub fn tracking_aggregate(&self, n_targets: usize, planner: &str) -> Option<TrackingAggregate> {
        self.aggregates().tracking.into_iter().find(|a| a.n_targets == n_targets && a.planner == planner)
    }

    pub fn paired(&self, n_targets: usize, planner: &str, baseline: &str) -> Option<PairedComparison> {
        self.aggregates()
            .paired
            .into_iter()
            .find(|p| p.n_targets == n_targets && p.planner == planner && p.baseline == baseline)
    }
}

#[derive(Serialize)]
struct Summary<'a> {
    study: &'a str,
    master_seed: u64,
    config: &'a serde_json::Value,
    aggregates: Aggregates,
    failures: &'a [FailureRecord],
    #[serde(skip_serializing_if = "Option::is_none")]
    total_runtime_s: Option<f64>,
}

fn io_error(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Io { path: path.display().to_string(), message: e.to_string() }
}

/// Per-case CSV bytes.
pub fn render_csv(records: &[CaseRecord]) -> Result<Vec<u8>> {
    let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    writer
        .write_record([
            "study",
            "n_targets",
            "case_id",
            "seed",
            "planner",
            "t_d",
            "final_U",
            "empirical_pfind",
            "estimated_pfind",
            "empirical_tfind",
            "estimated_tfind",
            "runtime_s",
        ])
        .map_err(|e| Error::Io { path: CSV_FILE.into(), message: e.to_string() })?;
    for r in records {
        writer
            .serialize(r.clone().rounded())
            .map_err(|e| Error::Io { path: CSV_FILE.into(), message: e.to_string() })?;
    }
    writer.into_inner().map_err(|e| Error::Io { path: CSV_FILE.into(), message: e.to_string() })
}

/// Aggregate JSON bytes.
pub fn render_json(report: &StudyReport) -> Result<Vec<u8>> {
    let rounded: Vec<CaseRecord> = report.records.iter().cloned().map(CaseRecord::rounded).collect();
    let summary = Summary {
        study: &report.study,
        master_seed: report.master_seed,
        config: &report.config,
        aggregates: aggregate(&rounded, &report.failures),
        failures: &report.failures,
        total_runtime_s: report.total_runtime_s.map(round_sig),
    };
    let mut bytes = serde_json::to_vec_pretty(&summary)
        .map_err(|e| Error::Io { path: JSON_FILE.into(), message: e.to_string() })?;
    bytes.push(b'\n');
    Ok(bytes)
}

/// Writes `cases.csv` and `summary.json` into `dir`, creating it if needed.
pub fn emit_report(report: &StudyReport, dir: &Path) -> Result<(PathBuf, PathBuf)> {
    fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    let csv_path = dir.join(CSV_FILE);
    let json_path = dir.join(JSON_FILE);
    fs::write(&csv_path, render_csv(&report.records)?).map_err(|e| io_error(&csv_path, e))?;
    fs::write(&json_path, render_json(report)?).map_err(|e| io_error(&json_path, e))?;
    Ok((csv_path, json_path))
}

/// Parses a CSV written by [`emit_report`].
pub fn read_records(path: &Path) -> Result<Vec<CaseRecord>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| io_error(path, e))?;
    reader.deserialize().map(|row| row.map_err(|e| io_error(path, e))).collect()
}
