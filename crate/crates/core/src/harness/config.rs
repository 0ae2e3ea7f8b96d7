use std::path::{Path, PathBuf};

use serde_json::{Map, Value};

use crate::error::{Result, SimError};
use crate::graph::GraphSpec;
use crate::kernels::{KernelKind, KernelParams};
use crate::mem::{CacheConfig, CacheMode, HbmConfig};
use crate::prefetch::PrefetchConfig;
use crate::sim::TmConfig;

/// Every key a configuration point accepts, in report column order.
pub const CONFIG_KEYS: &[&str] = &[
    "kernel",
    "damping",
    "iters",
    "source",
    "load_gap",
    "store_gap",
    "tm",
    "l1_size_kb_per_bank",
    "l1_total_kb",
    "l1_assoc",
    "l1_mshrs",
    "block_bytes",
    "l2_banks_per_tile",
    "l2_total_kb",
    "cache_mode",
    "hbm_channels",
    "hbm_lat_min",
    "hbm_lat_max",
    "pf_enabled",
    "pf_distance",
    "pf_max_range",
    "pf_inbox_depth",
    "pfhr_entries_per_gpe",
    "ablate_handshake",
    "ablate_fused_pfhr",
    "seed",
];

/// One fully specified machine + kernel configuration, as flat keys.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigPoint {
    pub kernel: KernelKind,
    pub params: KernelParams,
    pub tiles: usize,
    pub gpes_per_tile: usize,
    pub l1_size_kb_per_bank: u64,
    /// When set, overrides the per-bank size: total L1 over all banks.
    pub l1_total_kb: Option<u64>,
    pub l1_assoc: u32,
    pub l1_mshrs: u32,
    pub block_bytes: u64,
    pub l2_banks_per_tile: usize,
    pub l2_total_kb: u64,
    pub cache_mode: CacheMode,
    pub hbm_channels: u32,
    pub hbm_lat_min: u64,
    pub hbm_lat_max: u64,
    pub pf_enabled: bool,
    pub pf_distance: u32,
    pub pf_max_range: u32,
    pub pf_inbox_depth: usize,
    pub pfhr_entries_per_gpe: usize,
    pub ablate_handshake: bool,
    pub ablate_fused_pfhr: bool,
    pub seed: u64,
}

impl Default for ConfigPoint {
    fn default() -> Self {
        let tm = TmConfig::default();
        let pf = PrefetchConfig::default();
        let hbm = HbmConfig::default();
        ConfigPoint {
            kernel: KernelKind::Pagerank,
            params: KernelParams::default(),
            tiles: tm.tiles,
            gpes_per_tile: tm.gpes_per_tile,
            l1_size_kb_per_bank: tm.l1.size_bytes / 1024,
            l1_total_kb: None,
            l1_assoc: tm.l1.assoc,
            l1_mshrs: tm.l1.mshrs,
            block_bytes: tm.l1.block_bytes,
            l2_banks_per_tile: tm.l2_banks_per_tile,
            l2_total_kb: tm.l2_total_bytes() / 1024,
            cache_mode: tm.mode,
            hbm_channels: hbm.channels,
            hbm_lat_min: hbm.latency_min,
            hbm_lat_max: hbm.latency_max,
            pf_enabled: pf.enabled,
            pf_distance: pf.distance,
            pf_max_range: pf.max_range,
            pf_inbox_depth: pf.inbox_depth,
            pfhr_entries_per_gpe: pf.entries_per_gpe,
            ablate_handshake: false,
            ablate_fused_pfhr: false,
            seed: tm.seed,
        }
    }
}

fn type_err(key: &str, want: &str, got: &Value) -> String {
    format!("key `{key}`: expected {want}, got {got}")
}

fn as_u64(key: &str, v: &Value) -> std::result::Result<u64, String> {
    v.as_u64().ok_or_else(|| type_err(key, "a non-negative integer", v))
}

fn as_bool(key: &str, v: &Value) -> std::result::Result<bool, String> {
    v.as_bool().ok_or_else(|| type_err(key, "true or false", v))
}

fn narrow<T: TryFrom<u64>>(key: &str, v: &Value) -> std::result::Result<T, String> {
    let n = as_u64(key, v)?;
    T::try_from(n).map_err(|_| format!("key `{key}`: {n} is out of range"))
}

/// Parses `"4x16"` into (tiles, GPEs per tile).
pub fn parse_tm(s: &str) -> Option<(usize, usize)> {
    let (t, g) = s.split_once(['x', 'X'])?;
    Some((t.trim().parse().ok()?, g.trim().parse().ok()?))
}

impl ConfigPoint {
    /// Sets one flat key. Errors name the key.
    pub fn set(&mut self, key: &str, v: &Value) -> std::result::Result<(), String> {
        match key {
            "kernel" => {
                let s = v.as_str().ok_or_else(|| type_err(key, "a kernel name", v))?;
                self.kernel = s.parse().map_err(|e: SimError| e.to_string())?;
            }
            "damping" => self.params.damping = v.as_f64().ok_or_else(|| type_err(key, "a number", v))?,
            "iters" => self.params.iters = narrow(key, v)?,
            "source" => self.params.source = narrow(key, v)?,
            "load_gap" => self.params.load_gap = narrow(key, v)?,
            "store_gap" => self.params.store_gap = narrow(key, v)?,
            "tm" => {
                let s = v.as_str().ok_or_else(|| type_err(key, "a string like \"4x16\"", v))?;
                (self.tiles, self.gpes_per_tile) =
                    parse_tm(s).ok_or_else(|| format!("key `tm`: expected TILESxGPES, got `{s}`"))?;
            }
            "l1_size_kb_per_bank" => self.l1_size_kb_per_bank = as_u64(key, v)?,
            "l1_total_kb" => {
                self.l1_total_kb = if v.is_null() { None } else { Some(as_u64(key, v)?) };
            }
            "l1_assoc" => self.l1_assoc = narrow(key, v)?,
            "l1_mshrs" => self.l1_mshrs = narrow(key, v)?,
            "block_bytes" => self.block_bytes = as_u64(key, v)?,
            "l2_banks_per_tile" => self.l2_banks_per_tile = narrow(key, v)?,
            "l2_total_kb" => self.l2_total_kb = as_u64(key, v)?,
            "cache_mode" => {
                self.cache_mode = match v.as_str() {
                    Some("shared") => CacheMode::Shared,
                    Some("private") => CacheMode::Private,
                    _ => return Err(type_err(key, "\"shared\" or \"private\"", v)),
                }
            }
            "hbm_channels" => self.hbm_channels = narrow(key, v)?,
            "hbm_lat_min" => self.hbm_lat_min = as_u64(key, v)?,
            "hbm_lat_max" => self.hbm_lat_max = as_u64(key, v)?,
            "pf_enabled" => self.pf_enabled = as_bool(key, v)?,
            "pf_distance" => self.pf_distance = narrow(key, v)?,
            "pf_max_range" => self.pf_max_range = narrow(key, v)?,
            "pf_inbox_depth" => self.pf_inbox_depth = narrow(key, v)?,
            "pfhr_entries_per_gpe" => self.pfhr_entries_per_gpe = narrow(key, v)?,
            "ablate_handshake" => self.ablate_handshake = as_bool(key, v)?,
            "ablate_fused_pfhr" => self.ablate_fused_pfhr = as_bool(key, v)?,
            "seed" => self.seed = as_u64(key, v)?,
            other => return Err(format!("unknown key `{other}`")),
        }
        Ok(())
    }

    /// Value of a flat key as written in reports.
    pub fn get(&self, key: &str) -> String {
        match key {
            "kernel" => self.kernel.name().to_string(),
            "damping" => self.params.damping.to_string(),
            "iters" => self.params.iters.to_string(),
            "source" => self.params.source.to_string(),
            "load_gap" => self.params.load_gap.to_string(),
            "store_gap" => self.params.store_gap.to_string(),
            "tm" => format!("{}x{}", self.tiles, self.gpes_per_tile),
            "l1_size_kb_per_bank" => format!("{}", self.l1_bank_bytes() as f64 / 1024.0),
            "l1_total_kb" => self.l1_total_kb.map(|k| k.to_string()).unwrap_or_default(),
            "l1_assoc" => self.l1_assoc.to_string(),
            "l1_mshrs" => self.l1_mshrs.to_string(),
            "block_bytes" => self.block_bytes.to_string(),
            "l2_banks_per_tile" => self.l2_banks_per_tile.to_string(),
            "l2_total_kb" => self.l2_total_kb.to_string(),
            "cache_mode" => self.cache_mode.to_string(),
            "hbm_channels" => self.hbm_channels.to_string(),
            "hbm_lat_min" => self.hbm_lat_min.to_string(),
            "hbm_lat_max" => self.hbm_lat_max.to_string(),
            "pf_enabled" => self.pf_enabled.to_string(),
            "pf_distance" => self.pf_distance.to_string(),
            "pf_max_range" => self.pf_max_range.to_string(),
            "pf_inbox_depth" => self.pf_inbox_depth.to_string(),
            "pfhr_entries_per_gpe" => self.pfhr_entries_per_gpe.to_string(),
            "ablate_handshake" => self.ablate_handshake.to_string(),
            "ablate_fused_pfhr" => self.ablate_fused_pfhr.to_string(),
            "seed" => self.seed.to_string(),
            other => panic!("not a config key: {other}"),
        }
    }

    pub fn apply(&mut self, overrides: &Map<String, Value>) -> std::result::Result<(), String> {
        for (k, v) in overrides {
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn num_gpes(&self) -> usize {
        self.tiles * self.gpes_per_tile
    }

    fn l1_bank_bytes(&self) -> u64 {
        match self.l1_total_kb {
            Some(total) => total * 1024 / (self.num_gpes().max(1) as u64),
            None => self.l1_size_kb_per_bank * 1024,
        }
    }

    /// Builds and validates the machine configuration.
    pub fn tm_config(&self, max_cycles: u64) -> Result<TmConfig> {
        if let Some(total) = self.l1_total_kb {
            if (total * 1024) % (self.num_gpes().max(1) as u64) != 0 {
                return Err(SimError::Validation(format!(
                    "l1_total_kb {total} does not split over {} banks",
                    self.num_gpes()
                )));
            }
        }
        let l1 = CacheConfig {
            size_bytes: self.l1_bank_bytes(),
            assoc: self.l1_assoc,
            block_bytes: self.block_bytes,
            mshrs: self.l1_mshrs,
            ports: 1,
        };
        let mut tm = TmConfig {
            tiles: self.tiles,
            gpes_per_tile: self.gpes_per_tile,
            l1,
            l2: CacheConfig {
                block_bytes: self.block_bytes,
                ..CacheConfig::l2_default()
            },
            l2_banks_per_tile: self.l2_banks_per_tile,
            mode: self.cache_mode,
            hbm: HbmConfig {
                channels: self.hbm_channels,
                latency_min: self.hbm_lat_min,
                latency_max: self.hbm_lat_max,
                ..HbmConfig::default()
            },
            pf: PrefetchConfig {
                enabled: self.pf_enabled,
                distance: self.pf_distance,
                max_range: self.pf_max_range,
                inbox_depth: self.pf_inbox_depth,
                entries_per_gpe: self.pfhr_entries_per_gpe,
                handshake: !self.ablate_handshake,
                fused: !self.ablate_fused_pfhr,
                ..PrefetchConfig::default()
            },
            seed: self.seed,
            max_cycles,
            ..TmConfig::default()
        };
        tm.set_l2_total_bytes(self.l2_total_kb * 1024)?;
        tm.validate()?;
        Ok(tm)
    }
}

/// A parsed experiment: a base point, how to vary it, and how often.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub name: String,
    pub graph: GraphSpec,
    pub base: ConfigPoint,
    /// Cartesian sweep, first key outermost.
    pub sweep: Vec<(String, Vec<Value>)>,
    /// Explicit override sets; each is combined with the sweep.
    pub points: Vec<Map<String, Value>>,
    pub repetitions: usize,
    /// Overrides identifying the point other rows are normalized against.
    pub baseline: Option<Map<String, Value>>,
    pub output: Option<PathBuf>,
}

impl ExperimentSpec {
    pub fn new(name: &str, graph: GraphSpec) -> Self {
        ExperimentSpec {
            name: name.to_string(),
            graph,
            base: ConfigPoint::default(),
            sweep: vec![],
            points: vec![],
            repetitions: 1,
            baseline: None,
            output: None,
        }
    }

    /// All configuration points in deterministic order.
    pub fn expand(&self) -> Result<Vec<ConfigPoint>> {
        let origin = "experiment";
        let seeds: Vec<Map<String, Value>> = if self.points.is_empty() {
            vec![Map::new()]
        } else {
            self.points.clone()
        };
        let mut combos: Vec<Map<String, Value>> = vec![Map::new()];
        for (key, values) in &self.sweep {
            if !CONFIG_KEYS.contains(&key.as_str()) {
                return Err(SimError::config(origin, format!("sweep over unknown key `{key}`")));
            }
            if values.is_empty() {
                return Err(SimError::config(origin, format!("sweep over `{key}` has no values")));
            }
            combos = combos
                .into_iter()
                .flat_map(|c| {
                    values.iter().map(move |v| {
                        let mut c = c.clone();
                        c.insert(key.clone(), v.clone());
                        c
                    })
                })
                .collect();
        }
        let mut out = vec![];
        for s in &seeds {
            for c in &combos {
                let mut p = self.base.clone();
                p.apply(s).map_err(|m| SimError::config(origin, m))?;
                p.apply(c).map_err(|m| SimError::config(origin, m))?;
                p.tm_config(u64::MAX)?;
                out.push(p);
            }
        }
        Ok(out)
    }

    /// Index of the baseline point among `points`, if one is named.
    pub fn baseline_index(&self, points: &[ConfigPoint]) -> Result<Option<usize>> {
        let Some(b) = &self.baseline else { return Ok(None) };
        for (i, p) in points.iter().enumerate() {
            let mut q = p.clone();
            q.apply(b).map_err(|m| SimError::config("baseline", m))?;
            if &q == p {
                return Ok(Some(i));
            }
        }
        Err(SimError::config("baseline", "matches none of the experiment's points"))
    }

    /// Keys that take more than one value across the points.
    pub fn varied_keys(points: &[ConfigPoint]) -> Vec<&'static str> {
        CONFIG_KEYS
            .iter()
            .copied()
            .filter(|k| points.iter().any(|p| p.get(k) != points[0].get(k)))
            .collect()
    }
}

const META_KEYS: &[&str] = &["name", "graph", "sweep", "points", "repetitions", "baseline", "output"];

fn parse_graph(origin: &str, v: &Value) -> Result<GraphSpec> {
    match v {
        Value::String(s) => GraphSpec::parse_compact(s),
        Value::Object(_) => serde_json::from_value(v.clone())
            .map_err(|e| SimError::config(origin, format!("key `graph`: {e}"))),
        other => Err(SimError::config(origin, type_err("graph", "an object or compact string", other))),
    }
}

fn parse_sweep(origin: &str, v: &Value) -> Result<Vec<(String, Vec<Value>)>> {
    let bad = |m: &str| SimError::config(origin, format!("key `sweep`: {m}"));
    match v {
        Value::Object(m) => m
            .iter()
            .map(|(k, vals)| {
                let vals = vals.as_array().ok_or_else(|| bad(&format!("values of `{k}` must be a list")))?;
                Ok((k.clone(), vals.clone()))
            })
            .collect(),
        Value::Array(items) => items
            .iter()
            .map(|it| {
                let (k, vals) = match it {
                    Value::Array(pair) if pair.len() == 2 => (&pair[0], &pair[1]),
                    Value::Object(o) => (
                        o.get("key").ok_or_else(|| bad("entry without `key`"))?,
                        o.get("values").ok_or_else(|| bad("entry without `values`"))?,
                    ),
                    _ => return Err(bad("entries must be [key, values] or {key, values}")),
                };
                let k = k.as_str().ok_or_else(|| bad("key must be a string"))?;
                let vals = vals.as_array().ok_or_else(|| bad(&format!("values of `{k}` must be a list")))?;
                Ok((k.to_string(), vals.clone()))
            })
            .collect(),
        _ => Err(bad("expected an object or a list")),
    }
}

/// Parses an experiment from JSON text. `origin` names the source in errors.
pub fn parse_spec(text: &str, origin: &str) -> Result<ExperimentSpec> {
    let root: Value = serde_json::from_str(text).map_err(|e| SimError::config(origin, e.to_string()))?;
    let Value::Object(map) = root else {
        return Err(SimError::config(origin, "top level must be an object"));
    };
    let graph = map
        .get("graph")
        .ok_or_else(|| SimError::config(origin, "missing key `graph`"))?;
    let stem = Path::new(origin)
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "experiment".into());
    let name = match map.get("name") {
        Some(Value::String(s)) => s.clone(),
        Some(other) => return Err(SimError::config(origin, type_err("name", "a string", other))),
        None => stem,
    };
    let mut spec = ExperimentSpec::new(&name, parse_graph(origin, graph)?);
    for (k, v) in &map {
        if META_KEYS.contains(&k.as_str()) {
            continue;
        }
        spec.base.set(k, v).map_err(|m| SimError::config(origin, m))?;
    }
    if let Some(v) = map.get("sweep") {
        spec.sweep = parse_sweep(origin, v)?;
    }
    if let Some(v) = map.get("points") {
        let arr = v
            .as_array()
            .ok_or_else(|| SimError::config(origin, type_err("points", "a list of objects", v)))?;
        for p in arr {
            let o = p
                .as_object()
                .ok_or_else(|| SimError::config(origin, type_err("points", "a list of objects", p)))?;
            spec.points.push(o.clone());
        }
    }
    if let Some(v) = map.get("repetitions") {
        spec.repetitions = as_u64("repetitions", v).map_err(|m| SimError::config(origin, m))? as usize;
        if spec.repetitions == 0 {
            return Err(SimError::config(origin, "key `repetitions`: must be at least 1"));
        }
    }
    if let Some(v) = map.get("baseline") {
        let o = v
            .as_object()
            .ok_or_else(|| SimError::config(origin, type_err("baseline", "an object of overrides", v)))?;
        spec.baseline = Some(o.clone());
    }
    if let Some(v) = map.get("output") {
        let s = v
            .as_str()
            .ok_or_else(|| SimError::config(origin, type_err("output", "a path", v)))?;
        spec.output = Some(PathBuf::from(s));
    }
    let points = spec.expand()?;
    spec.baseline_index(&points)?;
    Ok(spec)
}

/// Reads and validates an experiment file.
pub fn parse_config(path: &Path) -> Result<ExperimentSpec> {
    let text = std::fs::read_to_string(path).map_err(|e| SimError::io(path, e))?;
    parse_spec(&text, &path.display().to_string())
}
