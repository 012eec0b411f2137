//! Batch experiment driver: scenario configs, sweep execution, record
//! emission, and cross-scheme comparison.
//!
//! A scenario is a flat `key = value` file (lists comma-separated, `#`
//! comments). The sweep runs the full cross product of
//! `(scheme, node_count, flow_count, seed)`, possibly in parallel, and the
//! record stream comes back sorted by that tuple so output files are
//! byte-stable regardless of execution order.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::select::{PriorityMode, ScoringMode};
use crate::sim::{simulate_with_flows, Scheme, SimError, SimParams, RunMetrics, World, summarize_runs};

/// Errors from config parsing, sweeps, and record handling.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("invalid value `{value}` for `{key}`: {reason}")]
    InvalidValue {
        key: String,
        value: String,
        reason: String,
    },
    #[error("`{key}` must not be empty")]
    MissingField { key: String },
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("{path}: {msg}")]
    Io { path: String, msg: String },
    #[error("records share no common (node_count, flow_count, seed) cells across schemes")]
    NoCommonCells,
    #[error("malformed record file {path} at line {line}: {msg}")]
    MalformedRecords {
        path: String,
        line: usize,
        msg: String,
    },
}

/// Output format of `runs.*` record files; the summary is always CSV.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutputFormat {
    #[default]
    Csv,
    Jsonl,
    Both,
}

impl FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(OutputFormat::Csv),
            "jsonl" => Ok(OutputFormat::Jsonl),
            "both" => Ok(OutputFormat::Both),
            other => Err(format!("expected csv, jsonl or both, got `{other}`")),
        }
    }
}

/// A parsed sweep description.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    /// Per-cell parameters; `node_count` and `cbr_flows` are overridden by
    /// the sweep axes.
    pub base: SimParams,
    pub node_counts: Vec<usize>,
    pub cbr_flow_counts: Vec<usize>,
    pub schemes: Vec<Scheme>,
    pub seeds: Vec<u64>,
    pub out_dir: Option<PathBuf>,
    pub format: OutputFormat,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            base: SimParams::default(),
            node_counts: vec![200],
            cbr_flow_counts: vec![60],
            schemes: Scheme::ALL.to_vec(),
            seeds: vec![1],
            out_dir: None,
            format: OutputFormat::Csv,
        }
    }
}

fn invalid(key: &str, value: &str, reason: impl Into<String>) -> ScenarioError {
    ScenarioError::InvalidValue {
        key: key.to_string(),
        value: value.to_string(),
        reason: reason.into(),
    }
}

fn parse_scalar<T: FromStr>(key: &str, value: &str) -> Result<T, ScenarioError> {
    value
        .trim()
        .parse::<T>()
        .map_err(|_| invalid(key, value, format!("not a valid {}", std::any::type_name::<T>())))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>, ScenarioError> {
    let items: Vec<&str> = value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .collect();
    if items.is_empty() {
        return Err(ScenarioError::MissingField {
            key: key.to_string(),
        });
    }
    items.iter().map(|s| parse_scalar::<T>(key, s)).collect()
}

/// Parses the flat `key = value` scenario format; omitted keys keep their
/// defaults (single 200-node density, 60 flows, all schemes, seed 1).
pub fn parse_config(text: &str) -> Result<ScenarioConfig, ScenarioError> {
    let mut config = ScenarioConfig::default();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = match line.split_once('=') {
            Some((k, v)) => (k.trim(), v.trim()),
            None => {
                return Err(ScenarioError::UnknownKey {
                    line: lineno + 1,
                    key: line.to_string(),
                })
            }
        };
        match key {
            "node_counts" => {
                config.node_counts = parse_list(key, value)?;
                for &n in &config.node_counts {
                    if n < 2 {
                        return Err(invalid(key, value, "every density needs >= 2 nodes"));
                    }
                }
            }
            "cbr_flow_counts" => config.cbr_flow_counts = parse_list(key, value)?,
            "schemes" => {
                let names: Vec<String> = parse_list(key, value)?;
                let mut schemes = Vec::new();
                for name in names {
                    schemes.push(
                        name.parse::<Scheme>()
                            .map_err(|e| invalid(key, &name, e.to_string()))?,
                    );
                }
                config.schemes = schemes;
            }
            "seeds" => config.seeds = parse_list(key, value)?,
            "area_width_m" => config.base.area_width_m = parse_scalar(key, value)?,
            "area_height_m" => config.base.area_height_m = parse_scalar(key, value)?,
            "radio_range_m" => config.base.radio_range_m = parse_scalar(key, value)?,
            "data_rate_bps" => config.base.data_rate_bps = parse_scalar(key, value)?,
            "packet_size_bytes" => config.base.packet_size_bytes = parse_scalar(key, value)?,
            "cbr_interval_s" => config.base.cbr_interval_s = parse_scalar(key, value)?,
            "beacon_interval_s" => config.base.beacon_interval_s = parse_scalar(key, value)?,
            "queue_cap" => config.base.queue_cap = parse_scalar(key, value)?,
            "waiting_slot_ms" => config.base.waiting_slot_ms = parse_scalar(key, value)?,
            "max_retries" => config.base.max_retries = parse_scalar(key, value)?,
            "ttl_hops" => config.base.ttl_hops = parse_scalar(key, value)?,
            "sim_duration_s" => config.base.sim_duration_s = parse_scalar(key, value)?,
            "k_max" => config.base.k_max = parse_scalar(key, value)?,
            "link_gamma" => config.base.link_gamma = parse_scalar(key, value)?,
            "link_pdr_floor" => config.base.link_pdr_floor = parse_scalar(key, value)?,
            "soar_corridor" => config.base.soar_corridor = parse_scalar(key, value)?,
            "candidate_cap" => config.base.select.candidate_cap = parse_scalar(key, value)?,
            "dominance_prune" => config.base.select.dominance_prune = parse_scalar(key, value)?,
            "scoring_mode" => {
                config.base.select.scoring_mode = match value.to_ascii_lowercase().as_str() {
                    "rank" => ScoringMode::RankAggregated,
                    "raw" => ScoringMode::WeightedRaw,
                    _ => return Err(invalid(key, value, "expected rank or raw")),
                }
            }
            "priority_mode" => {
                config.base.select.priority_mode = match value.to_ascii_lowercase().as_str() {
                    "pdr" => PriorityMode::PdrDescending,
                    "utility" => PriorityMode::AdjustedUtility,
                    _ => return Err(invalid(key, value, "expected pdr or utility")),
                }
            }
            "out_dir" => config.out_dir = Some(PathBuf::from(value)),
            "format" => {
                config.format = value
                    .parse::<OutputFormat>()
                    .map_err(|e| invalid(key, value, e))?
            }
            _ => {
                return Err(ScenarioError::UnknownKey {
                    line: lineno + 1,
                    key: key.to_string(),
                })
            }
        }
    }
    for (key, empty) in [
        ("node_counts", config.node_counts.is_empty()),
        ("cbr_flow_counts", config.cbr_flow_counts.is_empty()),
        ("schemes", config.schemes.is_empty()),
        ("seeds", config.seeds.is_empty()),
    ] {
        if empty {
            return Err(ScenarioError::MissingField {
                key: key.to_string(),
            });
        }
    }
    // Surface bad base parameters now rather than per cell.
    let mut probe = config.base;
    probe.node_count = config.node_counts[0];
    probe.cbr_flows = config.cbr_flow_counts[0];
    probe.validate()?;
    Ok(config)
}

/// Reads and parses a scenario file.
pub fn parse_config_file(path: impl AsRef<Path>) -> Result<ScenarioConfig, ScenarioError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| ScenarioError::Io {
        path: path.display().to_string(),
        msg: e.to_string(),
    })?;
    parse_config(&text)
}

/// One executed sweep cell.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub scheme: Scheme,
    pub node_count: usize,
    pub flow_count: usize,
    pub seed: u64,
    /// Failed cells carry the error text instead of aborting the sweep.
    pub outcome: Result<RunMetrics, String>,
}

impl RunRecord {
    fn sort_key(&self) -> (Scheme, usize, usize, u64) {
        (self.scheme, self.node_count, self.flow_count, self.seed)
    }
}

/// Runs the full cross product of the sweep, at most `jobs` cells in
/// parallel (all available cores when `None`). The returned records are
/// sorted by `(scheme, node_count, flow_count, seed)`; the progress sink
/// fires once per finished cell, in completion order.
///
/// Cells are coupled per seed: node positions extend prefix-wise with the
/// density axis, and flow endpoints draw from the smallest density's node
/// prefix, so every cell of one seed simulates the same traffic on the same
/// topology with only the extra relays changing. Density trends then compare
/// paired runs instead of resampled worlds.
pub fn run_sweep(
    config: &ScenarioConfig,
    jobs: Option<usize>,
    progress: &(dyn Fn(&RunRecord) + Sync),
) -> Vec<RunRecord> {
    let mut cells: Vec<(Scheme, usize, usize, u64)> = Vec::new();
    for &scheme in &config.schemes {
        for &node_count in &config.node_counts {
            for &flow_count in &config.cbr_flow_counts {
                for &seed in &config.seeds {
                    cells.push((scheme, node_count, flow_count, seed));
                }
            }
        }
    }
    let flow_pool = config.node_counts.iter().copied().min().unwrap_or(2);
    let execute = |&(scheme, node_count, flow_count, seed): &(Scheme, usize, usize, u64)| {
        let mut params = config.base;
        params.node_count = node_count;
        params.cbr_flows = flow_count;
        let flows = draw_flows(flow_pool, flow_count, seed);
        let outcome = World::build(params, seed)
            .and_then(|world| simulate_with_flows(&world, scheme, seed, &flows))
            .map_err(|e| e.to_string());
        let record = RunRecord {
            scheme,
            node_count,
            flow_count,
            seed,
            outcome,
        };
        progress(&record);
        record
    };
    let mut records: Vec<RunRecord> = match jobs {
        Some(n) if n > 0 => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .expect("thread pool")
            .install(|| cells.par_iter().map(execute).collect()),
        _ => cells.par_iter().map(execute).collect(),
    };
    records.sort_by_key(|r| r.sort_key());
    records
}

/// Distinct random flow endpoints within the shared node prefix,
/// reproducible per seed and independent of the density axis.
fn draw_flows(pool: usize, flow_count: usize, seed: u64) -> Vec<(usize, usize)> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed ^ 0xF10E_5EED_0000_0000);
    (0..flow_count)
        .map(|_| {
            let src = rng.random_range(0..pool);
            let dst = loop {
                let d = rng.random_range(0..pool);
                if d != src {
                    break d;
                }
            };
            (src, dst)
        })
        .collect()
}

/// Exact column set of `runs.csv`; JSONL records carry the same keys.
pub const RUNS_CSV_HEADER: &str = "scheme,node_count,flow_count,seed,delivery_ratio,\
mean_e2e_delay_ms,throughput_ratio,duplicates_per_delivered,sent,delivered,total_transmissions";

fn fmt_f64(v: f64) -> String {
    // Shortest round-trip formatting: parsing the text recovers the exact
    // bits, which keeps CSV and JSONL in field-for-field agreement.
    format!("{v}")
}

/// Renders successful records in the pinned `runs.csv` schema.
pub fn records_to_csv(records: &[RunRecord]) -> String {
    let mut out = String::from(RUNS_CSV_HEADER);
    out.push('\n');
    for r in records {
        if let Ok(m) = &r.outcome {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{}",
                r.scheme,
                r.node_count,
                r.flow_count,
                r.seed,
                fmt_f64(m.delivery_ratio),
                fmt_f64(m.mean_e2e_delay_ms),
                fmt_f64(m.throughput_ratio),
                fmt_f64(m.duplicates_per_delivered),
                m.sent_source_packets,
                m.delivered_packets,
                m.total_transmissions
            );
        }
    }
    out
}

/// Renders successful records as JSONL with the same keys as the CSV.
pub fn records_to_jsonl(records: &[RunRecord]) -> String {
    let mut out = String::new();
    for r in records {
        if let Ok(m) = &r.outcome {
            let _ = writeln!(
                out,
                "{{\"scheme\":\"{}\",\"node_count\":{},\"flow_count\":{},\"seed\":{},\
\"delivery_ratio\":{},\"mean_e2e_delay_ms\":{},\"throughput_ratio\":{},\
\"duplicates_per_delivered\":{},\"sent\":{},\"delivered\":{},\"total_transmissions\":{}}}",
                r.scheme,
                r.node_count,
                r.flow_count,
                r.seed,
                fmt_f64(m.delivery_ratio),
                fmt_f64(m.mean_e2e_delay_ms),
                fmt_f64(m.throughput_ratio),
                fmt_f64(m.duplicates_per_delivered),
                m.sent_source_packets,
                m.delivered_packets,
                m.total_transmissions
            );
        }
    }
    out
}

/// Renders the per-(scheme, node_count, flow_count) means and sample
/// standard deviations: the direct inputs for density/load plots.
pub fn records_to_summary_csv(records: &[RunRecord]) -> String {
    let mut groups: BTreeMap<(Scheme, usize, usize), Vec<RunMetrics>> = BTreeMap::new();
    for r in records {
        if let Ok(m) = &r.outcome {
            groups
                .entry((r.scheme, r.node_count, r.flow_count))
                .or_default()
                .push(*m);
        }
    }
    let mut out = String::from(
        "scheme,node_count,flow_count,runs,delivery_ratio_mean,delivery_ratio_stddev,\
mean_e2e_delay_ms_mean,mean_e2e_delay_ms_stddev,throughput_ratio_mean,throughput_ratio_stddev,\
duplicates_per_delivered_mean,duplicates_per_delivered_stddev\n",
    );
    for ((scheme, node_count, flow_count), metrics) in &groups {
        let s = summarize_runs(metrics).expect("non-empty group");
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            scheme,
            node_count,
            flow_count,
            s.runs,
            fmt_f64(s.delivery_ratio.mean),
            fmt_f64(s.delivery_ratio.stddev),
            fmt_f64(s.mean_e2e_delay_ms.mean),
            fmt_f64(s.mean_e2e_delay_ms.stddev),
            fmt_f64(s.throughput_ratio.mean),
            fmt_f64(s.throughput_ratio.stddev),
            fmt_f64(s.duplicates_per_delivered.mean),
            fmt_f64(s.duplicates_per_delivered.stddev)
        );
    }
    out
}

fn write_file(dir: &Path, name: &str, content: &str) -> Result<PathBuf, ScenarioError> {
    let path = dir.join(name);
    std::fs::write(&path, content).map_err(|e| ScenarioError::Io {
        path: path.display().to_string(),
        msg: e.to_string(),
    })?;
    Ok(path)
}

/// Writes `runs.csv` and/or `runs.jsonl` plus `summary.csv` into `out_dir`,
/// returning the written paths.
pub fn emit_records(
    records: &[RunRecord],
    format: OutputFormat,
    out_dir: impl AsRef<Path>,
) -> Result<Vec<PathBuf>, ScenarioError> {
    let dir = out_dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| ScenarioError::Io {
        path: dir.display().to_string(),
        msg: e.to_string(),
    })?;
    let mut written = Vec::new();
    if matches!(format, OutputFormat::Csv | OutputFormat::Both) {
        written.push(write_file(dir, "runs.csv", &records_to_csv(records))?);
    }
    if matches!(format, OutputFormat::Jsonl | OutputFormat::Both) {
        written.push(write_file(dir, "runs.jsonl", &records_to_jsonl(records))?);
    }
    written.push(write_file(dir, "summary.csv", &records_to_summary_csv(records))?);
    Ok(written)
}

/// Parses a `runs.csv` produced by [`emit_records`] back into records.
/// Fields outside the pinned schema stay zeroed.
pub fn load_records_csv(path: impl AsRef<Path>) -> Result<Vec<RunRecord>, ScenarioError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| ScenarioError::Io {
        path: path.display().to_string(),
        msg: e.to_string(),
    })?;
    let malformed = |line: usize, msg: String| ScenarioError::MalformedRecords {
        path: path.display().to_string(),
        line,
        msg,
    };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header == RUNS_CSV_HEADER => {}
        Some((_, header)) => {
            return Err(malformed(1, format!("unexpected header `{header}`")))
        }
        None => return Err(malformed(1, "empty file".to_string())),
    }
    let mut records = Vec::new();
    for (lineno, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 11 {
            return Err(malformed(lineno + 1, format!("expected 11 fields, got {}", fields.len())));
        }
        let parse_field = |idx: usize| -> Result<f64, ScenarioError> {
            fields[idx]
                .parse::<f64>()
                .map_err(|e| malformed(lineno + 1, format!("field {idx}: {e}")))
        };
        let metrics = RunMetrics {
            delivery_ratio: parse_field(4)?,
            mean_e2e_delay_ms: parse_field(5)?,
            throughput_ratio: parse_field(6)?,
            duplicates_per_delivered: parse_field(7)?,
            sent_source_packets: parse_field(8)? as u64,
            delivered_packets: parse_field(9)? as u64,
            total_transmissions: parse_field(10)? as u64,
            ..RunMetrics::default()
        };
        records.push(RunRecord {
            scheme: fields[0]
                .parse::<Scheme>()
                .map_err(|e| malformed(lineno + 1, e.to_string()))?,
            node_count: fields[1]
                .parse()
                .map_err(|e| malformed(lineno + 1, format!("node_count: {e}")))?,
            flow_count: fields[2]
                .parse()
                .map_err(|e| malformed(lineno + 1, format!("flow_count: {e}")))?,
            seed: fields[3]
                .parse()
                .map_err(|e| malformed(lineno + 1, format!("seed: {e}")))?,
            outcome: Ok(metrics),
        });
    }
    Ok(records)
}

/// Paired per-cell deltas of one baseline against DDA.
#[derive(Debug, Clone, PartialEq)]
pub struct CellComparison {
    pub baseline: Scheme,
    pub node_count: usize,
    pub flow_count: usize,
    pub seed: u64,
    /// DDA minus baseline.
    pub delay_delta_ms: f64,
    pub delivery_delta: f64,
    pub throughput_delta: f64,
    pub duplicates_delta: f64,
}

/// Outcome of a scheme comparison: paired deltas, a text table, and the
/// trend-assertion verdicts.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub cells: Vec<CellComparison>,
    /// Human-readable per-group means.
    pub table: String,
    /// Failed trend assertions; empty means all hold.
    pub failures: Vec<String>,
}

impl ComparisonReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

type GroupKey = (Scheme, usize, usize); // (scheme, node_count, flow_count)

/// Compares schemes over common cells and evaluates the trend assertions:
/// per-scheme delay non-increasing and delivery non-decreasing in density,
/// DDA beating the ExOR-style baseline on delay and duplicates at every
/// density, and DDA throughput at or above each baseline at all but at most
/// one density point per flow group.
pub fn compare_schemes(records: &[RunRecord]) -> Result<ComparisonReport, ScenarioError> {
    let mut by_cell: BTreeMap<(usize, usize, u64), BTreeMap<Scheme, RunMetrics>> = BTreeMap::new();
    let mut schemes_seen: Vec<Scheme> = Vec::new();
    for r in records {
        if let Ok(m) = &r.outcome {
            by_cell
                .entry((r.node_count, r.flow_count, r.seed))
                .or_default()
                .insert(r.scheme, *m);
            if !schemes_seen.contains(&r.scheme) {
                schemes_seen.push(r.scheme);
            }
        }
    }
    if !schemes_seen.contains(&Scheme::Dda) || schemes_seen.len() < 2 {
        return Err(ScenarioError::NoCommonCells);
    }

    let mut cells = Vec::new();
    for (&(node_count, flow_count, seed), per_scheme) in &by_cell {
        let Some(dda) = per_scheme.get(&Scheme::Dda) else {
            continue;
        };
        for (&scheme, baseline) in per_scheme {
            if scheme == Scheme::Dda {
                continue;
            }
            cells.push(CellComparison {
                baseline: scheme,
                node_count,
                flow_count,
                seed,
                delay_delta_ms: dda.mean_e2e_delay_ms - baseline.mean_e2e_delay_ms,
                delivery_delta: dda.delivery_ratio - baseline.delivery_ratio,
                throughput_delta: dda.throughput_ratio - baseline.throughput_ratio,
                duplicates_delta: dda.duplicates_per_delivered
                    - baseline.duplicates_per_delivered,
            });
        }
    }
    if cells.is_empty() {
        return Err(ScenarioError::NoCommonCells);
    }

    // Group means per (scheme, node_count, flow_count) over seeds.
    let mut groups: BTreeMap<GroupKey, Vec<RunMetrics>> = BTreeMap::new();
    for (&(node_count, flow_count, _), per_scheme) in &by_cell {
        for (&scheme, m) in per_scheme {
            groups.entry((scheme, node_count, flow_count)).or_default().push(*m);
        }
    }
    let mean = |metrics: &[RunMetrics], f: fn(&RunMetrics) -> f64| -> f64 {
        metrics.iter().map(f).sum::<f64>() / metrics.len() as f64
    };

    let mut table = String::from(
        "scheme        nodes flows      delay_ms     delivery   throughput   dups/deliv\n",
    );
    for ((scheme, node_count, flow_count), metrics) in &groups {
        let _ = writeln!(
            table,
            "{:<13} {:>5} {:>5} {:>13.3} {:>12.4} {:>12.4} {:>12.4}",
            scheme.to_string(),
            node_count,
            flow_count,
            mean(metrics, |m| m.mean_e2e_delay_ms),
            mean(metrics, |m| m.delivery_ratio),
            mean(metrics, |m| m.throughput_ratio),
            mean(metrics, |m| m.duplicates_per_delivered),
        );
    }

    let mut failures = Vec::new();
    let mut flow_counts: Vec<usize> = groups.keys().map(|k| k.2).collect();
    flow_counts.sort_unstable();
    flow_counts.dedup();
    for &flows in &flow_counts {
        for &scheme in &schemes_seen {
            let mut points: Vec<(usize, f64, f64)> = groups
                .iter()
                .filter(|((s, _, f), _)| *s == scheme && *f == flows)
                .map(|((_, n, _), m)| {
                    (
                        *n,
                        mean(m, |x| x.mean_e2e_delay_ms),
                        mean(m, |x| x.delivery_ratio),
                    )
                })
                .collect();
            points.sort_by_key(|p| p.0);
            for pair in points.windows(2) {
                let ((n0, delay0, deliv0), (n1, delay1, deliv1)) = (pair[0], pair[1]);
                if delay1 > delay0 {
                    failures.push(format!(
                        "{scheme} delay not non-increasing at {flows} flows: \
{delay0:.3} ms @ {n0} nodes -> {delay1:.3} ms @ {n1} nodes"
                    ));
                }
                if deliv1 < deliv0 {
                    failures.push(format!(
                        "{scheme} delivery not non-decreasing at {flows} flows: \
{deliv0:.4} @ {n0} nodes -> {deliv1:.4} @ {n1} nodes"
                    ));
                }
            }
        }

        let group_mean = |scheme: Scheme, n: usize, f: fn(&RunMetrics) -> f64| -> Option<f64> {
            groups.get(&(scheme, n, flows)).map(|m| mean(m, f))
        };
        let mut node_counts: Vec<usize> = groups
            .keys()
            .filter(|k| k.2 == flows)
            .map(|k| k.1)
            .collect();
        node_counts.sort_unstable();
        node_counts.dedup();

        if schemes_seen.contains(&Scheme::ExorStyle) {
            for &n in &node_counts {
                if let (Some(dda), Some(exor)) = (
                    group_mean(Scheme::Dda, n, |m| m.mean_e2e_delay_ms),
                    group_mean(Scheme::ExorStyle, n, |m| m.mean_e2e_delay_ms),
                ) {
                    if dda >= exor {
                        failures.push(format!(
                            "dda delay {dda:.3} ms not below exor-style {exor:.3} ms \
at {n} nodes, {flows} flows"
                        ));
                    }
                }
                if let (Some(dda), Some(exor)) = (
                    group_mean(Scheme::Dda, n, |m| m.duplicates_per_delivered),
                    group_mean(Scheme::ExorStyle, n, |m| m.duplicates_per_delivered),
                ) {
                    if dda >= exor {
                        failures.push(format!(
                            "dda duplicates/delivered {dda:.4} not below exor-style {exor:.4} \
at {n} nodes, {flows} flows"
                        ));
                    }
                }
            }
        }

        for &baseline in &[Scheme::ExorStyle, Scheme::SoarStyle] {
            if !schemes_seen.contains(&baseline) {
                continue;
            }
            let mut behind = 0usize;
            let mut compared = 0usize;
            for &n in &node_counts {
                if let (Some(dda), Some(base)) = (
                    group_mean(Scheme::Dda, n, |m| m.throughput_ratio),
                    group_mean(baseline, n, |m| m.throughput_ratio),
                ) {
                    compared += 1;
                    if dda < base {
                        behind += 1;
                    }
                }
            }
            let allowance = 1.min(compared.saturating_sub(1));
            if compared > 0 && behind > allowance {
                failures.push(format!(
                    "dda throughput behind {baseline} at {behind} of {compared} \
density points ({flows} flows); at most {allowance} allowed"
                ));
            }
        }
    }

    Ok(ComparisonReport {
        cells,
        table,
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_gives_defaults() {
        let config = parse_config("").unwrap();
        assert_eq!(config.node_counts, vec![200]);
        assert_eq!(config.cbr_flow_counts, vec![60]);
        assert_eq!(config.schemes, Scheme::ALL.to_vec());
        assert_eq!(config.seeds, vec![1]);
        assert_eq!(config.base.area_width_m, 2000.0);
        assert_eq!(config.base.radio_range_m, 250.0);
        assert_eq!(config.base.queue_cap, 50);
        assert_eq!(config.base.waiting_slot_ms, 45.0);
    }

    #[test]
    fn sweep_axes_parse() {
        let config = parse_config("node_counts = 100,150\nseeds = 1, 2, 3\n").unwrap();
        assert_eq!(config.node_counts, vec![100, 150]);
        assert_eq!(config.seeds, vec![1, 2, 3]);
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let config =
            parse_config("# a comment\n\nnode_counts = 50 # trailing comment\n").unwrap();
        assert_eq!(config.node_counts, vec![50]);
    }

    #[test]
    fn negative_queue_cap_is_invalid() {
        assert!(matches!(
            parse_config("queue_cap = -1"),
            Err(ScenarioError::InvalidValue { .. })
        ));
    }

    #[test]
    fn unknown_key_carries_line_number() {
        assert!(matches!(
            parse_config("node_counts = 100\nbogus = 1\n"),
            Err(ScenarioError::UnknownKey { line: 2, .. })
        ));
    }

    #[test]
    fn empty_axis_is_missing_field() {
        assert!(matches!(
            parse_config("seeds ="),
            Err(ScenarioError::MissingField { .. })
        ));
    }

    #[test]
    fn scheme_list_parses() {
        let config = parse_config("schemes = dda, exor\n").unwrap();
        assert_eq!(config.schemes, vec![Scheme::Dda, Scheme::ExorStyle]);
        assert!(parse_config("schemes = dda, smoke-signals\n").is_err());
    }

    fn tiny_config() -> ScenarioConfig {
        let mut config = parse_config(
            "node_counts = 12\ncbr_flow_counts = 3\nschemes = dda, exor\nseeds = 1, 2\n\
area_width_m = 600\narea_height_m = 600\nsim_duration_s = 2\n",
        )
        .unwrap();
        config.base.cbr_interval_s = 0.5;
        config
    }

    #[test]
    fn sweep_produces_the_cross_product_sorted() {
        let config = tiny_config();
        let records = run_sweep(&config, Some(2), &|_| {});
        assert_eq!(records.len(), 4); // 2 schemes x 1 density x 1 flow count x 2 seeds
        let keys: Vec<_> = records.iter().map(|r| r.sort_key()).collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
        assert!(records.iter().all(|r| r.outcome.is_ok()));
    }

    #[test]
    fn single_cell_sweep_matches_direct_simulation() {
        let mut config = tiny_config();
        config.schemes = vec![Scheme::ExorStyle];
        config.seeds = vec![7];
        let records = run_sweep(&config, None, &|_| {});
        assert_eq!(records.len(), 1);
        let mut params = config.base;
        params.node_count = 12;
        params.cbr_flows = 3;
        let world = World::build(params, 7).unwrap();
        let flows = draw_flows(12, 3, 7);
        let direct = simulate_with_flows(&world, Scheme::ExorStyle, 7, &flows).unwrap();
        assert_eq!(records[0].outcome.as_ref().unwrap(), &direct);
    }

    #[test]
    fn emitted_files_are_deterministic() {
        let config = tiny_config();
        let records = run_sweep(&config, Some(2), &|_| {});
        let again = run_sweep(&config, Some(1), &|_| {});
        assert_eq!(records, again);
        assert_eq!(records_to_csv(&records), records_to_csv(&again));
        assert_eq!(records_to_jsonl(&records), records_to_jsonl(&again));
    }

    #[test]
    fn empty_records_give_header_only_csv() {
        let csv = records_to_csv(&[]);
        assert_eq!(csv, format!("{RUNS_CSV_HEADER}\n"));
    }

    #[test]
    fn one_record_gives_two_line_csv() {
        let record = RunRecord {
            scheme: Scheme::Dda,
            node_count: 10,
            flow_count: 2,
            seed: 1,
            outcome: Ok(RunMetrics::default()),
        };
        let csv = records_to_csv(&[record]);
        assert_eq!(csv.lines().count(), 2);
    }

    #[test]
    fn csv_and_jsonl_agree_field_for_field() {
        let config = tiny_config();
        let records = run_sweep(&config, None, &|_| {});
        let csv = records_to_csv(&records);
        let jsonl = records_to_jsonl(&records);
        let csv_rows: Vec<&str> = csv.lines().skip(1).collect();
        let json_rows: Vec<&str> = jsonl.lines().collect();
        assert_eq!(csv_rows.len(), json_rows.len());
        for (c, j) in csv_rows.iter().zip(&json_rows) {
            let fields: Vec<&str> = c.split(',').collect();
            for (key, value) in RUNS_CSV_HEADER.split(',').zip(&fields) {
                let needle = if key == "scheme" {
                    format!("\"{key}\":\"{value}\"")
                } else {
                    format!("\"{key}\":{value}")
                };
                assert!(j.contains(&needle), "{needle} missing in {j}");
            }
        }
    }

    #[test]
    fn csv_round_trips_losslessly() {
        let dir = std::env::temp_dir().join(format!("ddalab-test-{}", std::process::id()));
        let config = tiny_config();
        let records = run_sweep(&config, None, &|_| {});
        emit_records(&records, OutputFormat::Csv, &dir).unwrap();
        let loaded = load_records_csv(dir.join("runs.csv")).unwrap();
        assert_eq!(loaded.len(), records.len());
        for (a, b) in records.iter().zip(&loaded) {
            let (ma, mb) = (a.outcome.as_ref().unwrap(), b.outcome.as_ref().unwrap());
            assert_eq!(ma.delivery_ratio.to_bits(), mb.delivery_ratio.to_bits());
            assert_eq!(
                ma.mean_e2e_delay_ms.to_bits(),
                mb.mean_e2e_delay_ms.to_bits()
            );
            assert_eq!(ma.throughput_ratio.to_bits(), mb.throughput_ratio.to_bits());
        }
        std::fs::remove_dir_all(&dir).ok();
    }

    fn synthetic_record(
        scheme: Scheme,
        node_count: usize,
        seed: u64,
        delay: f64,
        delivery: f64,
        throughput: f64,
        dups: f64,
    ) -> RunRecord {
        let metrics = RunMetrics {
            mean_e2e_delay_ms: delay,
            delivery_ratio: delivery,
            throughput_ratio: throughput,
            duplicates_per_delivered: dups,
            ..RunMetrics::default()
        };
        RunRecord {
            scheme,
            node_count,
            flow_count: 30,
            seed,
            outcome: Ok(metrics),
        }
    }

    #[test]
    fn comparison_passes_when_dda_dominates() {
        let mut records = Vec::new();
        for (i, &n) in [50usize, 100].iter().enumerate() {
            let step = i as f64;
            records.push(synthetic_record(Scheme::Dda, n, 1, 50.0 - step, 0.8 + step / 10.0, 0.30, 0.1));
            records.push(synthetic_record(
                Scheme::ExorStyle,
                n,
                1,
                80.0 - step,
                0.7 + step / 10.0,
                0.20,
                0.5,
            ));
        }
        let report = compare_schemes(&records).unwrap();
        assert!(report.passed(), "failures: {:?}", report.failures);
        assert_eq!(report.cells.len(), 2);
    }

    #[test]
    fn comparison_flags_inverted_trends() {
        let records = vec![
            synthetic_record(Scheme::Dda, 50, 1, 50.0, 0.8, 0.3, 0.6),
            synthetic_record(Scheme::ExorStyle, 50, 1, 40.0, 0.9, 0.4, 0.1),
        ];
        let report = compare_schemes(&records).unwrap();
        assert!(!report.passed());
        assert!(report.failures.iter().any(|f| f.contains("delay")));
        assert!(report.failures.iter().any(|f| f.contains("duplicates")));
    }

    #[test]
    fn comparison_needs_common_cells() {
        let only_baseline = vec![synthetic_record(Scheme::ExorStyle, 50, 1, 1.0, 1.0, 1.0, 0.0)];
        assert!(matches!(
            compare_schemes(&only_baseline),
            Err(ScenarioError::NoCommonCells)
        ));
        let disjoint = vec![
            synthetic_record(Scheme::Dda, 50, 1, 1.0, 1.0, 1.0, 0.0),
            synthetic_record(Scheme::ExorStyle, 100, 2, 1.0, 1.0, 1.0, 0.0),
        ];
        assert!(matches!(
            compare_schemes(&disjoint),
            Err(ScenarioError::NoCommonCells)
        ));
    }
}
