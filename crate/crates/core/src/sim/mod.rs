//! Seeded discrete-event simulation of timer-coordinated opportunistic
//! routing on random geometric topologies.
//!
//! The MAC layer is abstract: per-link Bernoulli reception, one frame in the
//! air per node at a time, instantaneous ACK control frames. Claims under
//! test concern the coordination logic, not contention detail.

mod engine;

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use thiserror::Error;

use crate::select::{RelayProfile, SelectConfig, SelectError};
use crate::relay_graph::NodeId;

pub use engine::{simulate, simulate_with_flows};

/// Errors from world construction and simulation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("a world needs at least 2 nodes, got {got}")]
    TooFewNodes { got: usize },
    #[error("no neighbor offers positive progress toward the destination")]
    EmptyCandidates,
    #[error("unknown scheme `{0}` (expected dda, exor or soar)")]
    UnknownScheme(String),
    #[error("invalid simulation parameter: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Selection(#[from] SelectError),
    #[error(transparent)]
    Graph(#[from] crate::relay_graph::GraphError),
}

/// Coordination scheme under test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scheme {
    /// Clique-filtered relaying networks with scored selection.
    Dda,
    /// ETX-ranked candidates, timer coordination, no connectivity filtering.
    ExorStyle,
    /// ExOR-style restricted to candidates within an ETX corridor of the
    /// best path.
    SoarStyle,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::Dda, Scheme::ExorStyle, Scheme::SoarStyle];
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // The baselines are simplifications, hence the "-style" labels.
        let name = match self {
            Scheme::Dda => "dda",
            Scheme::ExorStyle => "exor-style",
            Scheme::SoarStyle => "soar-style",
        };
        f.write_str(name)
    }
}

impl FromStr for Scheme {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, SimError> {
        match s.trim().to_ascii_lowercase().as_str() {
            "dda" => Ok(Scheme::Dda),
            "exor" | "exor-style" => Ok(Scheme::ExorStyle),
            "soar" | "soar-style" => Ok(Scheme::SoarStyle),
            other => Err(SimError::UnknownScheme(other.to_string())),
        }
    }
}

/// Radio, traffic and coordination parameters of one run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimParams {
    pub area_width_m: f64,
    pub area_height_m: f64,
    pub node_count: usize,
    pub radio_range_m: f64,
    pub data_rate_bps: u64,
    pub packet_size_bytes: u32,
    /// Number of CBR flows with random distinct endpoints.
    pub cbr_flows: usize,
    /// Packet spacing per flow, seconds.
    pub cbr_interval_s: f64,
    pub beacon_interval_s: f64,
    /// FIFO transmit-queue capacity per node, packets.
    pub queue_cap: usize,
    /// Waiting slot of the timer coordination, ms.
    pub waiting_slot_ms: f64,
    /// Sender retransmissions after a try nobody received.
    pub max_retries: u32,
    /// Per-packet hop budget.
    pub ttl_hops: u32,
    pub sim_duration_s: f64,
    /// Candidate-set truncation per hop.
    pub k_max: usize,
    /// Distance exponent of the link-quality model.
    pub link_gamma: f64,
    /// Delivery-ratio floor for in-range links.
    pub link_pdr_floor: f64,
    /// ETX corridor width of the SOAR-style baseline.
    pub soar_corridor: f64,
    /// Relaying-network selection knobs (DDA only).
    pub select: SelectConfig,
}

impl Default for SimParams {
    fn default() -> Self {
        SimParams {
            area_width_m: 2000.0,
            area_height_m: 2000.0,
            node_count: 200,
            radio_range_m: 250.0,
            data_rate_bps: 1_000_000,
            packet_size_bytes: 512,
            cbr_flows: 60,
            cbr_interval_s: 0.25,
            beacon_interval_s: 1.0,
            queue_cap: 50,
            waiting_slot_ms: 45.0,
            max_retries: 3,
            ttl_hops: 32,
            sim_duration_s: 30.0,
            k_max: 8,
            link_gamma: 2.0,
            link_pdr_floor: 0.05,
            soar_corridor: 2.0,
            select: SelectConfig::default(),
        }
    }
}

impl SimParams {
    pub fn validate(&self) -> Result<(), SimError> {
        let positive = [
            ("area_width", self.area_width_m),
            ("area_height", self.area_height_m),
            ("radio_range", self.radio_range_m),
            ("cbr_interval", self.cbr_interval_s),
            ("beacon_interval", self.beacon_interval_s),
            ("waiting_slot", self.waiting_slot_ms),
            ("sim_duration", self.sim_duration_s),
            ("link_gamma", self.link_gamma),
        ];
        for (name, value) in positive {
            if !value.is_finite() || value <= 0.0 {
                return Err(SimError::InvalidParams(format!(
                    "{name} must be positive, got {value}"
                )));
            }
        }
        if self.node_count < 2 {
            return Err(SimError::TooFewNodes {
                got: self.node_count,
            });
        }
        if self.data_rate_bps == 0 || self.packet_size_bytes == 0 {
            return Err(SimError::InvalidParams(
                "data rate and packet size must be positive".into(),
            ));
        }
        if self.queue_cap == 0 || self.k_max == 0 || self.ttl_hops == 0 {
            return Err(SimError::InvalidParams(
                "queue_cap, k_max and ttl_hops must be positive".into(),
            ));
        }
        let floor = self.link_pdr_floor;
        if floor.is_nan() || floor <= 0.0 || floor >= 1.0 {
            return Err(SimError::InvalidParams(format!(
                "link_pdr_floor must be in (0, 1), got {}",
                self.link_pdr_floor
            )));
        }
        if self.soar_corridor.is_nan() || self.soar_corridor < 0.0 {
            return Err(SimError::InvalidParams(format!(
                "soar_corridor must be non-negative, got {}",
                self.soar_corridor
            )));
        }
        Ok(())
    }

    /// Time one data frame occupies the air, exact in nanoseconds.
    pub fn frame_time_ns(&self) -> u64 {
        (self.packet_size_bytes as u128 * 8 * 1_000_000_000 / self.data_rate_bps as u128) as u64
    }
}

/// Distance-driven link delivery ratio: `max(p_floor, 1 - (d/range)^gamma)`
/// in range, zero beyond it.
pub fn link_pdr(distance_m: f64, range_m: f64, gamma: f64, p_floor: f64) -> f64 {
    if distance_m > range_m {
        return 0.0;
    }
    (1.0 - (distance_m / range_m).powf(gamma)).max(p_floor)
}

/// Node placements and the symmetric link-quality matrix they induce.
#[derive(Debug, Clone, PartialEq)]
pub struct World {
    params: SimParams,
    positions: Vec<(f64, f64)>,
    /// Row-major `n x n`; 0.0 marks "out of range".
    link: Vec<f64>,
}

impl World {
    /// Places `node_count` nodes i.i.d. uniform over the area, deterministic
    /// per seed.
    pub fn build(params: SimParams, seed: u64) -> Result<World, SimError> {
        params.validate()?;
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let positions: Vec<(f64, f64)> = (0..params.node_count)
            .map(|_| {
                // Unit coordinates scaled afterwards, so a rescaled area with
                // the same seed scales positions affinely.
                let u: f64 = rng.random();
                let v: f64 = rng.random();
                (u * params.area_width_m, v * params.area_height_m)
            })
            .collect();
        Self::from_positions(params, positions)
    }

    /// Builds the link matrix over explicit positions (test topologies).
    pub fn from_positions(
        params: SimParams,
        positions: Vec<(f64, f64)>,
    ) -> Result<World, SimError> {
        if positions.len() < 2 {
            return Err(SimError::TooFewNodes {
                got: positions.len(),
            });
        }
        let n = positions.len();
        let mut link = vec![0.0; n * n];
        for i in 0..n {
            for j in i + 1..n {
                let dx = positions[i].0 - positions[j].0;
                let dy = positions[i].1 - positions[j].1;
                let p = link_pdr(
                    (dx * dx + dy * dy).sqrt(),
                    params.radio_range_m,
                    params.link_gamma,
                    params.link_pdr_floor,
                );
                link[i * n + j] = p;
                link[j * n + i] = p;
            }
        }
        let mut params = params;
        params.node_count = n;
        Ok(World {
            params,
            positions,
            link,
        })
    }

    pub fn params(&self) -> &SimParams {
        &self.params
    }

    pub fn node_count(&self) -> usize {
        self.positions.len()
    }

    pub fn positions(&self) -> &[(f64, f64)] {
        &self.positions
    }

    /// Link delivery ratio between two nodes; 0.0 when out of range.
    pub fn link_pdr_between(&self, a: usize, b: usize) -> f64 {
        self.link[a * self.node_count() + b]
    }

    /// Dumps connectivity in the plain edge-list format (`a b` per line).
    pub fn to_edge_list(&self) -> String {
        let n = self.node_count();
        let mut out = String::new();
        for i in 0..n {
            for j in i + 1..n {
                if self.link[i * n + j] > 0.0 {
                    out.push_str(&format!("{i} {j}\n"));
                }
            }
        }
        out
    }

    /// Dumps positions as `node,x,y` CSV rows.
    pub fn positions_csv(&self) -> String {
        let mut out = String::from("node,x,y\n");
        for (i, (x, y)) in self.positions.iter().enumerate() {
            out.push_str(&format!("{i},{x},{y}\n"));
        }
        out
    }

    /// Single-source shortest ETX to `destination` over `1/pdr` link weights.
    /// Unreachable nodes get `f64::INFINITY`.
    pub fn etx_to(&self, destination: usize) -> Vec<f64> {
        let n = self.node_count();
        let mut dist = vec![f64::INFINITY; n];
        dist[destination] = 0.0;
        let mut heap: BinaryHeap<DijkstraEntry> = BinaryHeap::new();
        heap.push(DijkstraEntry {
            cost: 0.0,
            node: destination,
        });
        while let Some(DijkstraEntry { cost, node }) = heap.pop() {
            if cost > dist[node] {
                continue;
            }
            let row = &self.link[node * n..(node + 1) * n];
            for (next, &pdr) in row.iter().enumerate() {
                if pdr <= 0.0 {
                    continue;
                }
                let candidate = cost + 1.0 / pdr;
                if candidate < dist[next] {
                    dist[next] = candidate;
                    heap.push(DijkstraEntry {
                        cost: candidate,
                        node: next,
                    });
                }
            }
        }
        dist
    }
}

/// Min-heap entry; ties resolve on node index for determinism.
struct DijkstraEntry {
    cost: f64,
    node: usize,
}

impl PartialEq for DijkstraEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for DijkstraEntry {}
impl PartialOrd for DijkstraEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for DijkstraEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .cost
            .total_cmp(&self.cost)
            .then(other.node.cmp(&self.node))
    }
}

/// Stage-one candidate selection: the sender's in-range neighbors with
/// strictly lower ETX to the destination, utility = ETX progress, truncated
/// to the `k_max` best. A destination in range short-circuits to direct
/// delivery.
pub fn candidate_set(
    world: &World,
    sender: usize,
    destination: usize,
    k_max: usize,
) -> Result<Vec<RelayProfile>, SimError> {
    let etx = world.etx_to(destination);
    candidate_set_with_etx(world, &etx, sender, destination, k_max)
}

/// [`candidate_set`] against a precomputed ETX table for `destination`.
pub fn candidate_set_with_etx(
    world: &World,
    etx: &[f64],
    sender: usize,
    destination: usize,
    k_max: usize,
) -> Result<Vec<RelayProfile>, SimError> {
    debug_assert_ne!(sender, destination);
    let direct = world.link_pdr_between(sender, destination);
    if direct > 0.0 {
        // Full remaining progress; finite because the direct link bounds it.
        let profile = RelayProfile::new(NodeId(destination as u32), direct, etx[sender])?;
        return Ok(vec![profile]);
    }
    let mut candidates: Vec<RelayProfile> = Vec::new();
    for node in 0..world.node_count() {
        if node == sender || node == destination {
            continue;
        }
        let pdr = world.link_pdr_between(sender, node);
        if pdr <= 0.0 {
            continue;
        }
        if etx[node] < etx[sender] {
            let progress = etx[sender] - etx[node];
            candidates.push(RelayProfile::new(NodeId(node as u32), pdr, progress)?);
        }
    }
    if candidates.is_empty() {
        return Err(SimError::EmptyCandidates);
    }
    candidates.sort_by(|a, b| {
        b.base_utility
            .partial_cmp(&a.base_utility)
            .unwrap_or(Ordering::Equal)
            .then(a.node.cmp(&b.node))
    });
    candidates.truncate(k_max);
    Ok(candidates)
}

/// Counters of one simulation run.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RunMetrics {
    pub sent_source_packets: u64,
    pub delivered_packets: u64,
    /// `delivered / sent` (0 when nothing was sent).
    pub delivery_ratio: f64,
    /// Mean end-to-end delay over delivered packets, ms (0 when none).
    pub mean_e2e_delay_ms: f64,
    /// Data frames aired by all nodes, including retries and duplicates.
    pub total_transmissions: u64,
    /// ACKs plus per-node beacon overhead; kept apart from data frames so
    /// both throughput denominators stay available.
    pub control_transmissions: u64,
    /// `delivered / total_transmissions` (data frames only).
    pub throughput_ratio: f64,
    /// `delivered / (total + control)`.
    pub throughput_ratio_with_control: f64,
    /// Forwards by candidates that received the data but missed the winner's
    /// ACK.
    pub duplicate_forwards: u64,
    pub duplicates_per_delivered: f64,
    pub drops: DropCounts,
    /// Source packets still unresolved when the run was cut off.
    pub in_flight_at_end: u64,
}

/// Packet losses by cause.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DropCounts {
    pub queue_overflow: u64,
    pub retry_exhausted: u64,
    pub no_candidate: u64,
    pub ttl_exceeded: u64,
}

impl DropCounts {
    pub fn total(&self) -> u64 {
        self.queue_overflow + self.retry_exhausted + self.no_candidate + self.ttl_exceeded
    }
}

/// Mean and sample standard deviation of one metric across runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricSummary {
    pub mean: f64,
    pub stddev: f64,
}

fn summarize(values: impl Iterator<Item = f64> + Clone) -> MetricSummary {
    let n = values.clone().count();
    let mean = values.clone().sum::<f64>() / n as f64;
    let stddev = if n < 2 {
        0.0
    } else {
        (values.map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0)).sqrt()
    };
    MetricSummary { mean, stddev }
}

/// Per-metric summary over a set of runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSummary {
    pub runs: usize,
    pub delivery_ratio: MetricSummary,
    pub mean_e2e_delay_ms: MetricSummary,
    pub throughput_ratio: MetricSummary,
    pub duplicates_per_delivered: MetricSummary,
    pub sent: MetricSummary,
    pub delivered: MetricSummary,
    pub total_transmissions: MetricSummary,
}

/// Elementwise mean and sample standard deviation across runs.
pub fn summarize_runs(metrics: &[RunMetrics]) -> Result<RunSummary, SimError> {
    if metrics.is_empty() {
        return Err(SimError::InvalidParams("no runs to summarize".into()));
    }
    Ok(RunSummary {
        runs: metrics.len(),
        delivery_ratio: summarize(metrics.iter().map(|m| m.delivery_ratio)),
        mean_e2e_delay_ms: summarize(metrics.iter().map(|m| m.mean_e2e_delay_ms)),
        throughput_ratio: summarize(metrics.iter().map(|m| m.throughput_ratio)),
        duplicates_per_delivered: summarize(metrics.iter().map(|m| m.duplicates_per_delivered)),
        sent: summarize(metrics.iter().map(|m| m.sent_source_packets as f64)),
        delivered: summarize(metrics.iter().map(|m| m.delivered_packets as f64)),
        total_transmissions: summarize(metrics.iter().map(|m| m.total_transmissions as f64)),
    })
}
