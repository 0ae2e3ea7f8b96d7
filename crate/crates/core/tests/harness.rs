use serde_json::Value;
use tmsim::harness::{parse_spec, run_experiment, ExperimentSpec, Report, RunOptions, CONFIG_KEYS};

const SPEC: &str = r#"{
    "name": "rerun",
    "kernel": "sssp",
    "graph": {"kind": "uniform-random", "n": 600, "avg_degree": 5, "seed": 4},
    "tm": "2x8",
    "l1_size_kb_per_bank": 2,
    "repetitions": 2,
    "sweep": [["cache_mode", ["private", "shared"]], ["pf_distance", [2, 8]]],
    "baseline": {"cache_mode": "private", "pf_distance": 2}
}"#;

#[test]
fn identical_specs_give_identical_csv() {
    let s = parse_spec(SPEC, "rerun.json").unwrap();
    let a = run_experiment(&s, &RunOptions::default()).unwrap().to_csv_string();
    let b = run_experiment(&s, &RunOptions::default()).unwrap().to_csv_string();
    assert_eq!(a, b);
    assert_eq!(a.lines().count(), 1 + 4 * 2);
}

#[test]
fn any_row_reruns_on_its_own() {
    let s = parse_spec(SPEC, "rerun.json").unwrap();
    let full = run_experiment(&s, &RunOptions::default()).unwrap();
    let header = Report::header();
    let col = |name: &str| header.iter().position(|h| h == name).unwrap();
    for row in &full.rows {
        // Rebuild a one-point spec from the row's config columns alone.
        let mut one = ExperimentSpec::new("single", s.graph.clone());
        for k in CONFIG_KEYS {
            let text = row.config.get(k);
            let v = match *k {
                "kernel" | "tm" | "cache_mode" => Value::from(text),
                "l1_total_kb" if text.is_empty() => Value::Null,
                _ => serde_json::from_str(&text).unwrap(),
            };
            one.base.set(k, &v).unwrap();
        }
        let opts = RunOptions {
            seed: Some(row.seed),
            ..RunOptions::default()
        };
        let again = run_experiment(&one, &opts).unwrap();
        let (a, b) = (full.to_csv_string(), again.to_csv_string());
        let pick = |csv: &str, line: usize| -> Vec<String> {
            let mut rd = csv::ReaderBuilder::new().has_headers(false).from_reader(csv.as_bytes());
            let rec: Vec<String> = rd.records().nth(line).unwrap().unwrap().iter().map(String::from).collect();
            (col("total_cycles")..col("speedup_vs_baseline")).map(|i| rec[i].clone()).collect()
        };
        let idx = full.rows.iter().position(|r| std::ptr::eq(r, row)).unwrap();
        assert_eq!(pick(&a, idx + 1), pick(&b, 1), "row {idx}");
    }
}

#[test]
fn varied_keys_are_columns() {
    let s = parse_spec(SPEC, "rerun.json").unwrap();
    let varied = ExperimentSpec::varied_keys(&s.expand().unwrap());
    assert_eq!(varied, vec!["cache_mode", "pf_distance"]);
    let header = Report::header();
    assert!(varied.iter().all(|k| header.iter().any(|h| h == k)));
}

#[test]
fn speedup_column_is_relative_to_baseline() {
    let s = parse_spec(SPEC, "rerun.json").unwrap();
    let r = run_experiment(&s, &RunOptions::default()).unwrap();
    let base = r.rows[0].total_cycles().unwrap() as f64;
    for row in &r.rows {
        let want = if row.rep == 0 { base } else { r.rows[1].total_cycles().unwrap() as f64 };
        let got = row.speedup_vs_baseline.unwrap();
        assert!((got - want / row.total_cycles().unwrap() as f64).abs() < 1e-12);
    }
}
