use serde_json::{json, Map, Value};

use super::config::ExperimentSpec;
use crate::error::{Result, SimError};
use crate::graph::GraphSpec;
use crate::kernels::KernelKind;

pub const PRESETS: &[&str] = &[
    "l1-sweep",
    "l2-bank-sweep",
    "mode-compare",
    "tm-size-sweep",
    "pf-ablation",
    "paper-sweeps",
];

fn obj(v: Value) -> Map<String, Value> {
    match v {
        Value::Object(m) => m,
        _ => unreachable!(),
    }
}

fn sweep(pairs: &[(&str, Value)]) -> Vec<(String, Vec<Value>)> {
    pairs
        .iter()
        .map(|(k, v)| (k.to_string(), v.as_array().expect("list").clone()))
        .collect()
}

/// A canned experiment over `graph`.
pub fn preset(name: &str, graph: GraphSpec, kernel: KernelKind) -> Result<ExperimentSpec> {
    let mut s = ExperimentSpec::new(name, graph);
    s.base.kernel = kernel;
    let pf = ("pf_enabled", json!([false, true]));
    match name {
        "l1-sweep" => {
            s.sweep = sweep(&[("l1_size_kb_per_bank", json!([4, 8, 16, 32])), pf]);
            s.baseline = Some(obj(json!({"l1_size_kb_per_bank": 4, "pf_enabled": false})));
        }
        "l2-bank-sweep" => {
            s.sweep = sweep(&[("l2_banks_per_tile", json!([1, 2, 4, 8])), pf]);
            s.baseline = Some(obj(json!({"l2_banks_per_tile": 1, "pf_enabled": false})));
        }
        "mode-compare" => {
            s.sweep = sweep(&[("cache_mode", json!(["private", "shared"])), pf]);
            s.baseline = Some(obj(json!({"cache_mode": "private", "pf_enabled": false})));
        }
        "tm-size-sweep" => {
            s.base.l1_total_kb = Some(1024);
            s.sweep = sweep(&[("tm", json!(["4x2", "4x4", "4x8", "4x16"])), pf]);
            s.baseline = Some(obj(json!({"tm": "4x16", "pf_enabled": false})));
        }
        "pf-ablation" => {
            s.points = vec![
                obj(json!({"pf_enabled": false})),
                obj(json!({"pf_enabled": true, "ablate_handshake": true})),
                obj(json!({"pf_enabled": true, "ablate_fused_pfhr": true})),
                obj(json!({"pf_enabled": true})),
            ];
            s.baseline = Some(obj(json!({"pf_enabled": false})));
        }
        "paper-sweeps" => {
            s.sweep = sweep(&[
                ("cache_mode", json!(["private", "shared"])),
                ("l1_size_kb_per_bank", json!([4, 8, 16, 32])),
                ("l2_banks_per_tile", json!([1, 2, 4, 8])),
                pf,
            ]);
            s.baseline = Some(obj(json!({
                "cache_mode": "private",
                "l1_size_kb_per_bank": 4,
                "l2_banks_per_tile": 1,
                "pf_enabled": false,
            })));
        }
        other => {
            return Err(SimError::Validation(format!(
                "unknown preset `{other}` (known: {})",
                PRESETS.join(", ")
            )))
        }
    }
    s.expand()?;
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g() -> GraphSpec {
        GraphSpec::parse_compact("uniform:n=100").unwrap()
    }

    #[test]
    fn l1_sweep_points() {
        let s = preset("l1-sweep", g(), KernelKind::Pagerank).unwrap();
        let pts = s.expand().unwrap();
        assert_eq!(pts.len(), 8);
        let sizes: Vec<u64> = pts.iter().step_by(2).map(|p| p.l1_size_kb_per_bank).collect();
        assert_eq!(sizes, vec![4, 8, 16, 32]);
        assert_eq!(s.baseline_index(&pts).unwrap(), Some(0));
    }

    #[test]
    fn l2_sweep_keeps_total() {
        let s = preset("l2-bank-sweep", g(), KernelKind::Pagerank).unwrap();
        let totals: Vec<u64> = s
            .expand()
            .unwrap()
            .iter()
            .map(|p| p.tm_config(1).unwrap().l2_total_bytes())
            .collect();
        assert!(totals.iter().all(|&t| t == totals[0]));
    }

    #[test]
    fn tm_size_sweep_keeps_total_l1() {
        let s = preset("tm-size-sweep", g(), KernelKind::Bfs).unwrap();
        for p in s.expand().unwrap() {
            let tm = p.tm_config(1).unwrap();
            assert_eq!(tm.l1.size_bytes * tm.num_gpes() as u64, 1024 * 1024);
            assert_eq!(tm.l2_total_bytes(), 64 * 1024);
        }
    }

    #[test]
    fn full_cartesian_preset_has_64_points() {
        let s = preset("paper-sweeps", g(), KernelKind::Pagerank).unwrap();
        assert_eq!(s.expand().unwrap().len(), 2 * 4 * 4 * 2);
    }

    #[test]
    fn ablation_has_off_naive_full() {
        let s = preset("pf-ablation", g(), KernelKind::Pagerank).unwrap();
        let pts = s.expand().unwrap();
        assert!(!pts[0].pf_enabled);
        assert!(pts[1].ablate_handshake);
        assert!(pts[3].pf_enabled && !pts[3].ablate_handshake && !pts[3].ablate_fused_pfhr);
    }

    #[test]
    fn unknown_preset() {
        assert!(preset("nope", g(), KernelKind::Pagerank).is_err());
    }
}
