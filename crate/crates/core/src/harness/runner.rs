use std::collections::HashMap;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde_json::{json, Value};

use super::config::{ConfigPoint, ExperimentSpec, CONFIG_KEYS};
use crate::error::{Result, SimError};
use crate::graph::{Graph, GraphSpec};
use crate::kernels::{run_kernel, KernelRun};
use crate::metrics::{flat_record, MetricValue, RECORD_FIELDS};
use crate::sim::{run_simulation, TmConfig};

/// Seed stride between consecutive config points.
pub const SEED_STRIDE: u64 = 10007;

/// Largest weight drawn when SSSP runs on an unweighted graph.
pub const AUTO_MAX_WEIGHT: u32 = 16;

#[derive(Debug, Clone)]
pub struct RunOptions {
    /// Worker threads; 0 means rayon's default, 1 runs serially.
    pub parallel: usize,
    /// Replaces every point's base seed.
    pub seed: Option<u64>,
    pub max_cycles: u64,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            parallel: 1,
            seed: None,
            max_cycles: 2_000_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowStatus {
    Ok,
    /// Invalid point (rejected before simulating).
    Invalid,
    /// The simulation aborted.
    Failed,
}

impl RowStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            RowStatus::Ok => "ok",
            RowStatus::Invalid => "invalid",
            RowStatus::Failed => "failed",
        }
    }
}

/// One (config point, repetition) result.
#[derive(Debug, Clone)]
pub struct ReportRow {
    pub experiment: String,
    pub point: usize,
    pub rep: usize,
    pub seed: u64,
    pub status: RowStatus,
    pub config: ConfigPoint,
    pub graph: String,
    /// Empty unless `status` is ok.
    pub metrics: Vec<(&'static str, MetricValue)>,
    pub speedup_vs_baseline: Option<f64>,
    pub error: Option<String>,
}

impl ReportRow {
    pub fn metric(&self, name: &str) -> Option<&MetricValue> {
        self.metrics.iter().find(|(k, _)| *k == name).map(|(_, v)| v)
    }

    pub fn total_cycles(&self) -> Option<u64> {
        match self.metric("total_cycles") {
            Some(MetricValue::Count(c)) => Some(*c),
            _ => None,
        }
    }

    pub fn real(&self, name: &str) -> Option<f64> {
        match self.metric(name)? {
            MetricValue::Count(c) => Some(*c as f64),
            MetricValue::Real(r) => *r,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Report {
    pub rows: Vec<ReportRow>,
}

impl Report {
    pub fn failures(&self) -> impl Iterator<Item = &ReportRow> {
        self.rows.iter().filter(|r| r.status != RowStatus::Ok)
    }

    pub fn has_abort(&self) -> bool {
        self.rows.iter().any(|r| r.status == RowStatus::Failed)
    }

    pub fn has_invalid(&self) -> bool {
        self.rows.iter().any(|r| r.status == RowStatus::Invalid)
    }

    pub fn header() -> Vec<String> {
        let mut h: Vec<String> = ["experiment", "point", "rep", "seed", "status"].map(String::from).to_vec();
        h.extend(CONFIG_KEYS.iter().map(|k| k.to_string()));
        h.push("graph".into());
        h.extend(RECORD_FIELDS.iter().map(|k| k.to_string()));
        h.push("speedup_vs_baseline".into());
        h.push("error".into());
        h
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let csv_err = |e: csv::Error| SimError::Validation(format!("csv: {e}"));
        out.write_record(Self::header()).map_err(csv_err)?;
        for r in &self.rows {
            let mut rec = vec![
                r.experiment.clone(),
                r.point.to_string(),
                r.rep.to_string(),
                r.seed.to_string(),
                r.status.as_str().to_string(),
            ];
            rec.extend(CONFIG_KEYS.iter().map(|k| r.config.get(k)));
            rec.push(r.graph.clone());
            for name in RECORD_FIELDS {
                rec.push(r.metric(name).map(|v| v.to_string()).unwrap_or_default());
            }
            rec.push(r.speedup_vs_baseline.map(|s| format!("{s:.6}")).unwrap_or_default());
            rec.push(r.error.clone().unwrap_or_default());
            out.write_record(&rec).map_err(csv_err)?;
        }
        out.flush().map_err(|e| SimError::Validation(format!("csv: {e}")))?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = vec![];
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }

    pub fn to_json(&self) -> Value {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|r| {
                let config: serde_json::Map<String, Value> =
                    CONFIG_KEYS.iter().map(|k| (k.to_string(), Value::from(r.config.get(k)))).collect();
                let metrics: serde_json::Map<String, Value> = r
                    .metrics
                    .iter()
                    .map(|(k, v)| {
                        let v = match v {
                            MetricValue::Count(c) => json!(c),
                            MetricValue::Real(x) => json!(x),
                        };
                        (k.to_string(), v)
                    })
                    .collect();
                json!({
                    "experiment": r.experiment,
                    "point": r.point,
                    "rep": r.rep,
                    "seed": r.seed,
                    "status": r.status.as_str(),
                    "config": config,
                    "graph": r.graph,
                    "metrics": metrics,
                    "speedup_vs_baseline": r.speedup_vs_baseline,
                    "error": r.error,
                })
            })
            .collect();
        json!({ "rows": rows })
    }

    /// Writes `path` as CSV, and a JSON mirror next to it when asked.
    pub fn save(&self, path: &Path, json_mirror: bool) -> Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| SimError::io(dir, e))?;
        }
        let f = std::fs::File::create(path).map_err(|e| SimError::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(f))?;
        if json_mirror {
            let jp = path.with_extension("json");
            let text = serde_json::to_string_pretty(&self.to_json()).expect("json");
            std::fs::write(&jp, text).map_err(|e| SimError::io(&jp, e))?;
        }
        Ok(())
    }
}

/// Seed of one row.
pub fn row_seed(base: u64, point: usize, rep: usize) -> u64 {
    base.wrapping_add(point as u64 * SEED_STRIDE).wrapping_add(rep as u64)
}

fn graph_seed(g: &GraphSpec) -> u64 {
    match g {
        GraphSpec::UniformRandom { seed, .. } | GraphSpec::Kronecker { seed, .. } => *seed,
        GraphSpec::EdgeListFile { .. } => 1,
    }
}

fn kernel_key(p: &ConfigPoint) -> String {
    format!("{}|{:?}|{}|{}", p.kernel.name(), p.params, p.num_gpes(), p.block_bytes)
}

/// Builds the graph once, plus a weighted copy if SSSP needs one.
pub struct Workload {
    spec: GraphSpec,
    plain: Arc<Graph>,
    weighted: Option<Arc<Graph>>,
}

impl Workload {
    pub fn new(spec: &GraphSpec) -> Result<Self> {
        let g = spec.build()?;
        Ok(Workload {
            spec: spec.clone(),
            plain: Arc::new(g),
            weighted: None,
        })
    }

    /// Graph the kernel runs on. Unweighted graphs get weights in
    /// `1..=AUTO_MAX_WEIGHT` for SSSP, drawn with the graph's seed.
    pub fn graph_for(&mut self, p: &ConfigPoint) -> Arc<Graph> {
        if !p.kernel.needs_weights() || self.plain.is_weighted() {
            return self.plain.clone();
        }
        let seed = graph_seed(&self.spec);
        let plain = &self.plain;
        self.weighted
            .get_or_insert_with(|| Arc::new((**plain).clone().with_random_weights(AUTO_MAX_WEIGHT, seed)))
            .clone()
    }

    pub fn kernel_run(&mut self, p: &ConfigPoint) -> Result<KernelRun> {
        let g = self.graph_for(p);
        run_kernel(p.kernel, g, p.num_gpes(), p.params, p.block_bytes)
    }
}

struct Job<'a> {
    point: usize,
    rep: usize,
    seed: u64,
    cfg: std::result::Result<TmConfig, String>,
    kr: Option<&'a KernelRun>,
}

/// Runs every point and repetition. Returns an error only when the spec
/// itself is unusable; per-row failures are recorded in the rows.
pub fn run_experiment(spec: &ExperimentSpec, opts: &RunOptions) -> Result<Report> {
    let points = spec.expand()?;
    let baseline = spec.baseline_index(&points)?;
    let mut workload = Workload::new(&spec.graph)?;
    let mut runs: HashMap<String, std::result::Result<KernelRun, String>> = HashMap::new();
    for p in &points {
        let key = kernel_key(p);
        runs.entry(key).or_insert_with(|| {
            
            workload.kernel_run(p).map_err(|e| e.to_string())
        });
    }

    let mut jobs = vec![];
    for (i, p) in points.iter().enumerate() {
        for rep in 0..spec.repetitions {
            let seed = row_seed(opts.seed.unwrap_or(p.seed), i, rep);
            let mut pp = p.clone();
            pp.seed = seed;
            let kr = runs[&kernel_key(p)].as_ref();
            let cfg = match kr {
                Ok(_) => pp.tm_config(opts.max_cycles).map_err(|e| e.to_string()),
                Err(e) => Err(e.clone()),
            };
            jobs.push(Job {
                point: i,
                rep,
                seed,
                cfg,
                kr: kr.ok(),
            });
        }
    }

    let graph = spec.graph.to_string();
    let exec = |j: &Job| -> ReportRow {
        let mut config = points[j.point].clone();
        config.seed = j.seed;
        let mut row = ReportRow {
            experiment: spec.name.clone(),
            point: j.point,
            rep: j.rep,
            seed: j.seed,
            status: RowStatus::Ok,
            config,
            graph: graph.clone(),
            metrics: vec![],
            speedup_vs_baseline: None,
            error: None,
        };
        let (cfg, kr) = match (&j.cfg, j.kr) {
            (Ok(c), Some(kr)) => (c, kr),
            (Err(e), _) => {
                row.status = RowStatus::Invalid;
                row.error = Some(e.clone());
                return row;
            }
            (Ok(_), None) => unreachable!("config built without a kernel run"),
        };
        match run_simulation(kr, cfg) {
            Ok(r) => row.metrics = flat_record(r.total_cycles, &r.stats),
            Err(e) => {
                row.status = match e {
                    SimError::Abort { .. } => RowStatus::Failed,
                    _ => RowStatus::Invalid,
                };
                row.error = Some(e.to_string());
            }
        }
        row
    };

    let mut rows: Vec<ReportRow> = match opts.parallel {
        1 => jobs.iter().map(exec).collect(),
        n => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| SimError::Validation(format!("thread pool: {e}")))?;
            pool.install(|| jobs.par_iter().map(exec).collect())
        }
    };

    if let Some(b) = baseline {
        let base: Vec<Option<u64>> = (0..spec.repetitions)
            .map(|rep| rows[b * spec.repetitions + rep].total_cycles())
            .collect();
        for r in rows.iter_mut() {
            if let (Some(bc), Some(c)) = (base[r.rep], r.total_cycles()) {
                r.speedup_vs_baseline = Some(bc as f64 / c as f64);
            }
        }
    }
    Ok(Report { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::parse_spec;

    const SMALL: &str = r#"{"graph": "uniform:n=300,deg=4,seed=3", "tm": "2x4", "iters": 2,
        "sweep": {"pf_enabled": [false, true]}, "baseline": {"pf_enabled": false}}"#;

    #[test]
    fn one_row_per_point_and_rep() {
        let mut s = parse_spec(SMALL, "small").unwrap();
        s.repetitions = 2;
        let rep = run_experiment(&s, &RunOptions::default()).unwrap();
        assert_eq!(rep.rows.len(), 4);
        let seeds: Vec<u64> = rep.rows.iter().map(|r| r.seed).collect();
        assert_eq!(seeds, vec![1, 2, 1 + SEED_STRIDE, 2 + SEED_STRIDE]);
        assert!(rep.failures().next().is_none());
        assert_eq!(rep.rows[0].speedup_vs_baseline, Some(1.0));
        let csv = rep.to_csv_string();
        assert_eq!(csv.lines().count(), 5);
    }

    #[test]
    fn parallel_matches_serial() {
        let s = parse_spec(SMALL, "small").unwrap();
        let a = run_experiment(&s, &RunOptions::default()).unwrap().to_csv_string();
        let opts = RunOptions {
            parallel: 3,
            ..RunOptions::default()
        };
        let b = run_experiment(&s, &opts).unwrap().to_csv_string();
        assert_eq!(a, b);
    }

    #[test]
    fn abort_marks_row_and_continues() {
        let s = parse_spec(SMALL, "small").unwrap();
        let opts = RunOptions {
            max_cycles: 50,
            ..RunOptions::default()
        };
        let rep = run_experiment(&s, &opts).unwrap();
        assert_eq!(rep.rows.len(), 2);
        assert!(rep.rows.iter().all(|r| r.status == RowStatus::Failed));
        assert!(rep.has_abort());
    }

    #[test]
    fn header_is_stable() {
        let h = Report::header();
        assert_eq!(h.len(), 5 + CONFIG_KEYS.len() + 1 + RECORD_FIELDS.len() + 2);
        assert_eq!(h[0], "experiment");
        assert_eq!(h.last().unwrap(), "error");
    }
}
