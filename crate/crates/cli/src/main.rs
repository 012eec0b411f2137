//! `ddalab` — batch experiment driver for timer-coordinated opportunistic
//! routing: sweep scenarios, compare coordination schemes, and inspect a
//! single relaying-network selection.
//!
//! Exit codes: 0 success (and assertions hold), 1 assertion failure,
//! 2 usage/config error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use dda_core::relay_graph::{CandidateGraph, NodeId};
use dda_core::scenario::{
    compare_schemes, emit_records, load_records_csv, parse_config_file, run_sweep, OutputFormat,
};
use dda_core::scoring::score_table_csv;
use dda_core::select::{
    select_relaying_network, PriorityMode, RelayProfile, ScoringMode, SelectConfig,
};

#[derive(Parser)]
#[command(name = "ddalab", version, about = "Relay-coordination simulation lab")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Jsonl,
    Both,
}

impl From<FormatArg> for OutputFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => OutputFormat::Csv,
            FormatArg::Jsonl => OutputFormat::Jsonl,
            FormatArg::Both => OutputFormat::Both,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ScoringArg {
    /// Rank networks per metric, weigh order numbers by relative variance.
    Rank,
    /// Weigh raw metric values directly (legacy comparison mode).
    Raw,
}

#[derive(Clone, Copy, ValueEnum)]
enum PriorityArg {
    /// Highest link delivery ratio fires first.
    Pdr,
    /// Highest utility-times-delivery-ratio fires first.
    Utility,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario sweep and emit runs/summary record files.
    Run {
        /// Scenario file (flat `key = value` lines).
        #[arg(long)]
        config: PathBuf,
        /// Maximum cells simulated in parallel (default: all cores).
        #[arg(long)]
        jobs: Option<usize>,
        /// Record file format; overrides the scenario's `format` key.
        #[arg(long, value_enum)]
        format: Option<FormatArg>,
        /// Output directory; overrides the scenario's `out_dir` key.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare schemes over common sweep cells from a runs.csv.
    Compare {
        /// A `runs.csv` produced by `ddalab run`.
        #[arg(long)]
        runs: PathBuf,
        /// Assertion set to enforce; only `trends` is defined.
        #[arg(long)]
        assert: Option<String>,
    },
    /// Score one candidate set and print the full audit table.
    Inspect {
        /// Edge-list file over the candidate nodes (`a b` per line).
        #[arg(long)]
        graph: PathBuf,
        /// Per-node CSV: `node,pdr[,utility]`, `#` comments, utility
        /// defaults to 1.
        #[arg(long)]
        pdr: PathBuf,
        /// Waiting-slot length in milliseconds.
        #[arg(long, default_value_t = 45.0)]
        slot_ms: f64,
        #[arg(long, value_enum, default_value = "rank")]
        scoring: ScoringArg,
        #[arg(long, value_enum, default_value = "pdr")]
        priority: PriorityArg,
        /// Candidate cap before enumeration (pruned by adjusted utility).
        #[arg(long, default_value_t = 12)]
        cap: usize,
        /// Drop networks strictly worse on both metrics before weighting.
        #[arg(long)]
        prune: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            config,
            jobs,
            format,
            out,
        } => cmd_run(config, jobs, format, out),
        Command::Compare { runs, assert } => cmd_compare(runs, assert),
        Command::Inspect {
            graph,
            pdr,
            slot_ms,
            scoring,
            priority,
            cap,
            prune,
        } => cmd_inspect(graph, pdr, slot_ms, scoring, priority, cap, prune),
    }
}

fn fail_usage(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(2)
}

fn cmd_run(
    config_path: PathBuf,
    jobs: Option<usize>,
    format: Option<FormatArg>,
    out: Option<PathBuf>,
) -> ExitCode {
    let config = match parse_config_file(&config_path) {
        Ok(c) => c,
        Err(e) => return fail_usage(e),
    };
    let format = format.map(OutputFormat::from).unwrap_or(config.format);
    let out_dir = out
        .or_else(|| config.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));

    let total = config.schemes.len()
        * config.node_counts.len()
        * config.cbr_flow_counts.len()
        * config.seeds.len();
    let done = std::sync::atomic::AtomicUsize::new(0);
    let records = run_sweep(&config, jobs, &|record| {
        let n = done.fetch_add(1, std::sync::atomic::Ordering::Relaxed) + 1;
        eprintln!(
            "[{n}/{total}] {} nodes={} flows={} seed={} {}",
            record.scheme,
            record.node_count,
            record.flow_count,
            record.seed,
            if record.outcome.is_ok() { "ok" } else { "FAILED" }
        );
    });
    let failed = records.iter().filter(|r| r.outcome.is_err()).count();
    for record in records.iter().filter(|r| r.outcome.is_err()) {
        eprintln!(
            "cell failed: {} nodes={} flows={} seed={}: {}",
            record.scheme,
            record.node_count,
            record.flow_count,
            record.seed,
            record.outcome.as_ref().unwrap_err()
        );
    }
    match emit_records(&records, format, &out_dir) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            if failed > 0 {
                eprintln!("{failed} of {total} cells failed");
            }
            ExitCode::SUCCESS
        }
        Err(e) => fail_usage(e),
    }
}

fn cmd_compare(runs: PathBuf, assert: Option<String>) -> ExitCode {
    let enforce = match assert.as_deref() {
        None => false,
        Some("trends") => true,
        Some(other) => {
            return fail_usage(format!("unknown assertion set `{other}` (expected `trends`)"))
        }
    };
    let records = match load_records_csv(&runs) {
        Ok(r) => r,
        Err(e) => return fail_usage(e),
    };
    let report = match compare_schemes(&records) {
        Ok(r) => r,
        Err(e) => return fail_usage(e),
    };
    print!("{}", report.table);
    if report.failures.is_empty() {
        println!("trend assertions: all hold");
        ExitCode::SUCCESS
    } else {
        for failure in &report.failures {
            println!("trend violation: {failure}");
        }
        if enforce {
            ExitCode::from(1)
        } else {
            ExitCode::SUCCESS
        }
    }
}

fn parse_pdr_csv(text: &str) -> Result<Vec<RelayProfile>, String> {
    let mut profiles = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() || line.starts_with("node") {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() < 2 || fields.len() > 3 {
            return Err(format!(
                "line {}: expected `node,pdr[,utility]`, got `{line}`",
                lineno + 1
            ));
        }
        let node: u32 = fields[0]
            .parse()
            .map_err(|e| format!("line {}: node id: {e}", lineno + 1))?;
        let pdr: f64 = fields[1]
            .parse()
            .map_err(|e| format!("line {}: pdr: {e}", lineno + 1))?;
        let utility: f64 = match fields.get(2) {
            Some(s) => s
                .parse()
                .map_err(|e| format!("line {}: utility: {e}", lineno + 1))?,
            None => 1.0,
        };
        profiles.push(
            RelayProfile::new(NodeId(node), pdr, utility)
                .map_err(|e| format!("line {}: {e}", lineno + 1))?,
        );
    }
    if profiles.is_empty() {
        return Err("no profiles in the pdr file".to_string());
    }
    Ok(profiles)
}

fn cmd_inspect(
    graph_path: PathBuf,
    pdr_path: PathBuf,
    slot_ms: f64,
    scoring: ScoringArg,
    priority: PriorityArg,
    cap: usize,
    prune: bool,
) -> ExitCode {
    let graph = match CandidateGraph::from_edge_list_file(&graph_path) {
        Ok(g) => g,
        Err(e) => return fail_usage(e),
    };
    let text = match std::fs::read_to_string(&pdr_path) {
        Ok(t) => t,
        Err(e) => return fail_usage(format!("{}: {e}", pdr_path.display())),
    };
    let profiles = match parse_pdr_csv(&text) {
        Ok(p) => p,
        Err(e) => return fail_usage(format!("{}: {e}", pdr_path.display())),
    };
    let config = SelectConfig {
        scoring_mode: match scoring {
            ScoringArg::Rank => ScoringMode::RankAggregated,
            ScoringArg::Raw => ScoringMode::WeightedRaw,
        },
        priority_mode: match priority {
            PriorityArg::Pdr => PriorityMode::PdrDescending,
            PriorityArg::Utility => PriorityMode::AdjustedUtility,
        },
        candidate_cap: cap,
        dominance_prune: prune,
    };
    let result = match select_relaying_network(&graph, &profiles, slot_ms, &config) {
        Ok(r) => r,
        Err(e) => return fail_usage(e),
    };
    print!("{}", score_table_csv(&result.all_scores));
    println!(
        "weights: v_r_dt={} v_r_u={} xi={}",
        result.weights.v_r_dt, result.weights.v_r_u, result.weights.xi
    );
    let chosen: Vec<String> = result
        .chosen
        .iter()
        .map(|r| {
            format!(
                "{}(priority {}, pdr {}, utility {})",
                r.node, r.priority, r.pdr, r.base_utility
            )
        })
        .collect();
    println!("chosen: {}", chosen.join(", "));
    ExitCode::SUCCESS
}
