use std::collections::BTreeMap;

use hiertrack::bench::report::{render_csv, render_json};
use hiertrack::bench::{
    emit_report, read_records, run_estimator_study, run_tracking_study, CaseRecord, EstimatorStudyOptions, StudyReport,
    TrackingStudyOptions,
};
use hiertrack::scenario::PlannerKind;
use serde_json::Value;

fn tracking() -> StudyReport {
    run_tracking_study(&TrackingStudyOptions {
        target_counts: vec![1, 2],
        cases: 4,
        iterations: 200,
        budget: 120.0,
        seed: 3,
        ..Default::default()
    })
    .unwrap()
}

fn estimator() -> StudyReport {
    run_estimator_study(&EstimatorStudyOptions {
        cases: 5,
        runs: 150,
        departure_delays: vec![0.0, 50.0],
        seed: 4,
        ..Default::default()
    })
    .unwrap()
}

fn close(a: f64, b: &Value) -> bool {
    let b = b.as_f64().unwrap();
    (a - b).abs() <= 1e-6 * a.abs().max(1.0)
}

/// Absolute percentage error; empirical values below 1e-6 are left out.
fn ape(emp: f64, est: f64) -> Option<f64> {
    (emp >= 1e-6).then(|| (emp - est).abs() / emp)
}

#[test]
fn tracking_summary_recomputes_from_csv() {
    let dir = tempfile::tempdir().unwrap();
    let (csv, json) = emit_report(&tracking(), dir.path()).unwrap();
    let records = read_records(&csv).unwrap();
    let summary: Value = serde_json::from_slice(&std::fs::read(json).unwrap()).unwrap();
    assert_eq!(records.len(), 2 * 4 * 3);
    assert_eq!(summary["aggregates"]["records"], 24);

    let mut groups: BTreeMap<(usize, String), Vec<f64>> = BTreeMap::new();
    for r in &records {
        groups.entry((r.n_targets, r.planner.clone().unwrap())).or_default().push(r.final_u.unwrap());
    }
    for t in summary["aggregates"]["tracking"].as_array().unwrap() {
        let key = (t["n_targets"].as_u64().unwrap() as usize, t["planner"].as_str().unwrap().to_string());
        let v = &groups[&key];
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (v.len() - 1) as f64;
        assert!(close(mean, &t["mean_final_u"]));
        assert!(close(var.sqrt(), &t["std_final_u"]));
    }

    for p in summary["aggregates"]["paired"].as_array().unwrap() {
        let n = p["n_targets"].as_u64().unwrap() as usize;
        let ours = &groups[&(n, p["planner"].as_str().unwrap().to_string())];
        let theirs = &groups[&(n, p["baseline"].as_str().unwrap().to_string())];
        let wins = ours.iter().zip(theirs).filter(|(a, b)| a < b).count();
        assert_eq!(p["wins"].as_u64().unwrap() as usize, wins);
    }
}

#[test]
fn estimator_summary_recomputes_from_csv() {
    let dir = tempfile::tempdir().unwrap();
    let (csv, json) = emit_report(&estimator(), dir.path()).unwrap();
    let records = read_records(&csv).unwrap();
    let summary: Value = serde_json::from_slice(&std::fs::read(json).unwrap()).unwrap();
    assert_eq!(records.len(), 10);
    for a in summary["aggregates"]["estimator"].as_array().unwrap() {
        let t_d = a["t_d"].as_f64().unwrap();
        let rows: Vec<&CaseRecord> = records.iter().filter(|r| r.t_d == Some(t_d)).collect();
        let p: Vec<f64> =
            rows.iter().filter_map(|r| ape(r.empirical_pfind.unwrap(), r.estimated_pfind.unwrap())).collect();
        assert!(close(p.iter().sum::<f64>() / p.len() as f64, &a["mape_pfind"]));
        let t: Vec<f64> = rows
            .iter()
            .filter(|r| r.estimated_pfind.unwrap() > 0.0)
            .filter_map(|r| ape(r.empirical_tfind?, r.estimated_tfind?))
            .collect();
        if !t.is_empty() {
            assert!(close(t.iter().sum::<f64>() / t.len() as f64, &a["mape_tfind"]));
        }
    }
}

#[test]
fn csv_values_keep_six_significant_digits() {
    let report = tracking();
    let text = String::from_utf8(render_csv(&report.records).unwrap()).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "study,n_targets,case_id,seed,planner,t_d,final_U,empirical_pfind,estimated_pfind,empirical_tfind,estimated_tfind,runtime_s"
    );
    for line in lines {
        let u = line.split(',').nth(6).unwrap();
        let digits: String = u.split('e').next().unwrap().chars().filter(char::is_ascii_digit).collect();
        assert!(digits.trim_start_matches('0').len() <= 6, "{u}");
        assert!(line.ends_with(','), "runtime column must be empty without timing");
    }
}

#[test]
fn empty_study_still_renders() {
    let report = StudyReport {
        study: "tracking".into(),
        master_seed: 0,
        config: Value::Null,
        records: vec![],
        failures: vec![],
        total_runtime_s: None,
    };
    let json: Value = serde_json::from_slice(&render_json(&report).unwrap()).unwrap();
    assert_eq!(json["aggregates"]["records"], 0);
    assert_eq!(String::from_utf8(render_csv(&[]).unwrap()).unwrap().lines().count(), 1);
}

#[test]
fn reports_are_byte_stable() {
    let a = tracking();
    let b = run_tracking_study(&TrackingStudyOptions {
        target_counts: vec![1, 2],
        cases: 4,
        iterations: 200,
        budget: 120.0,
        seed: 3,
        workers: 3,
        planners: vec![PlannerKind::Mcts, PlannerKind::Greedy, PlannerKind::Random],
        ..Default::default()
    })
    .unwrap();
    assert_eq!(render_csv(&a.records).unwrap(), render_csv(&b.records).unwrap());
    assert_eq!(render_json(&a).unwrap(), render_json(&b).unwrap());
}
