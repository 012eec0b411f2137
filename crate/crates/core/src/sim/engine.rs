//! The per-run event loop.
//!
//! One hop proceeds as: the holder airs one data frame (frame time =
//! bits/rate); every planned candidate receives it with its link delivery
//! ratio; the highest-priority receiver claims the packet after
//! `(priority-1)` waiting slots and broadcasts an instantaneous ACK; every
//! other receiver overhears that ACK with the inter-candidate link delivery
//! ratio and drops on success, otherwise it forwards a duplicate copy in its
//! own slot. A try nobody received costs a full silent slot cycle before the
//! sender retries.
//!
//! Duplicate copies keep forwarding downstream like any other copy — that is
//! what makes duplicate transmissions expensive — but they are ghosts:
//! per-node dedup stops them from revisiting a node that already carried the
//! packet, they never retry a silent try, and their losses go unrecorded.
//! Each source packet keeps exactly one fate: first delivery (any copy)
//! wins, otherwise the cause that took the tracked copy down.

use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, HashMap, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use super::{
    candidate_set_with_etx, DropCounts, RunMetrics, Scheme, SimError, World,
};
use crate::relay_graph::{CandidateGraph, NodeId};
use crate::select::{
    best_single_relay, prioritize_nodes, select_relaying_network, RelayProfile, SelectError,
};

/// Traffic endpoints draw from a stream independent of channel noise, so one
/// seed produces the same flows under every scheme.
const TRAFFIC_STREAM_SALT: u64 = 0x9E37_79B9_7F4A_7C15;

#[derive(Debug, Clone, Copy)]
struct Token {
    id: usize,
    dst: usize,
    created_ns: u64,
    hops: u32,
    retries: u32,
    /// Duplicate copies travel as ghosts: they burn airtime and may even
    /// deliver, but carry no fate of their own.
    ghost: bool,
}

#[derive(Debug)]
enum EvKind {
    Generate { src: usize, token: Token },
    TryDequeue { node: usize },
    FrameSent { node: usize },
    ClaimRelay { node: usize, token: Token },
    GhostForward { node: usize, token: Token },
    RetryResume { node: usize, token: Token },
}

struct Ev {
    time_ns: u64,
    seq: u64,
    kind: EvKind,
}

impl PartialEq for Ev {
    fn eq(&self, other: &Self) -> bool {
        self.time_ns == other.time_ns && self.seq == other.seq
    }
}
impl Eq for Ev {}
impl PartialOrd for Ev {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Ev {
    fn cmp(&self, other: &Self) -> Ordering {
        // Insertion order breaks time ties.
        self.time_ns
            .cmp(&other.time_ns)
            .then(self.seq.cmp(&other.seq))
    }
}

#[derive(Default)]
struct NodeState {
    queue: VecDeque<Token>,
    busy_until_ns: u64,
    serving: Option<Token>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Fate {
    InFlight,
    Delivered,
    QueueOverflow,
    RetryExhausted,
    NoCandidate,
    TtlExceeded,
}

/// A hop's precomputed forwarding plan: candidates in priority order with
/// their reception probability from the sender.
enum HopPlan {
    Candidates(Vec<(usize, f64)>),
    NoCandidates,
}

struct Engine<'w> {
    world: &'w World,
    scheme: Scheme,
    frame_ns: u64,
    slot_ns: u64,
    drain_cap_ns: u64,
    rng: ChaCha12Rng,
    events: BinaryHeap<Reverse<Ev>>,
    seq: u64,
    nodes: Vec<NodeState>,
    fates: Vec<Fate>,
    delays_ns: Vec<u64>,
    total_transmissions: u64,
    control_transmissions: u64,
    duplicate_forwards: u64,
    etx_tables: HashMap<usize, Vec<f64>>,
    plans: HashMap<(usize, usize), HopPlan>,
    /// (node, packet) pairs the node has already carried; ghost copies
    /// revisiting die here.
    carried: std::collections::HashSet<(usize, usize)>,
}

/// Runs one seeded simulation of `scheme` on `world`, with CBR flow
/// endpoints drawn uniformly (distinct src/dst per flow).
///
/// Sources generate within `[0, sim_duration)`; the event loop then drains
/// in-flight packets up to a bounded cool-down, so `in_flight_at_end` is
/// normally zero. Identical `(world, scheme, seed)` triples produce identical
/// metrics, and the flow set depends on the seed alone, so schemes compare
/// pairwise on the same traffic.
pub fn simulate(world: &World, scheme: Scheme, seed: u64) -> Result<RunMetrics, SimError> {
    world.params().validate()?;
    let mut traffic_rng = ChaCha12Rng::seed_from_u64(seed ^ TRAFFIC_STREAM_SALT);
    let n = world.node_count();
    let flows: Vec<(usize, usize)> = (0..world.params().cbr_flows)
        .map(|_| {
            let src = traffic_rng.random_range(0..n);
            let dst = loop {
                let d = traffic_rng.random_range(0..n);
                if d != src {
                    break d;
                }
            };
            (src, dst)
        })
        .collect();
    simulate_with_flows(world, scheme, seed, &flows)
}

/// [`simulate`] with explicit flow endpoints (fixed test topologies).
pub fn simulate_with_flows(
    world: &World,
    scheme: Scheme,
    seed: u64,
    flows: &[(usize, usize)],
) -> Result<RunMetrics, SimError> {
    let params = world.params();
    params.validate()?;

    let mut traffic_rng = ChaCha12Rng::seed_from_u64(seed ^ TRAFFIC_STREAM_SALT);
    let channel_rng = ChaCha12Rng::seed_from_u64(seed);

    let horizon_ns = (params.sim_duration_s * 1e9).round() as u64;
    let mut engine = Engine {
        world,
        scheme,
        frame_ns: params.frame_time_ns(),
        slot_ns: (params.waiting_slot_ms * 1e6).round() as u64,
        drain_cap_ns: horizon_ns.saturating_mul(4),
        rng: channel_rng,
        events: BinaryHeap::new(),
        seq: 0,
        nodes: (0..world.node_count()).map(|_| NodeState::default()).collect(),
        fates: Vec::new(),
        delays_ns: Vec::new(),
        total_transmissions: 0,
        control_transmissions: 0,
        duplicate_forwards: 0,
        etx_tables: HashMap::new(),
        plans: HashMap::new(),
        carried: std::collections::HashSet::new(),
    };

    let interval_ns = (params.cbr_interval_s * 1e9).round() as u64;
    for &(src, dst) in flows {
        debug_assert_ne!(src, dst);
        let offset_ns = traffic_rng.random_range(0..interval_ns.max(1));
        let mut t = offset_ns;
        while t < horizon_ns {
            let token = Token {
                id: engine.fates.len(),
                dst,
                created_ns: t,
                hops: 0,
                retries: 0,
                ghost: false,
            };
            engine.fates.push(Fate::InFlight);
            engine.schedule(t, EvKind::Generate { src, token });
            t += interval_ns;
        }
    }
    engine.run()?;
    Ok(engine.finish())
}

impl<'w> Engine<'w> {
    fn schedule(&mut self, time_ns: u64, kind: EvKind) {
        let ev = Ev {
            time_ns,
            seq: self.seq,
            kind,
        };
        self.seq += 1;
        self.events.push(Reverse(ev));
    }

    fn run(&mut self) -> Result<(), SimError> {
        while let Some(Reverse(ev)) = self.events.pop() {
            if ev.time_ns > self.drain_cap_ns {
                break;
            }
            let now = ev.time_ns;
            match ev.kind {
                EvKind::Generate { src, token } => {
                    self.carried.insert((src, token.id));
                    self.admit_data(now, src, token, false);
                }
                EvKind::TryDequeue { node } => self.try_dequeue(now, node),
                EvKind::FrameSent { node } => self.frame_sent(now, node)?,
                EvKind::ClaimRelay { node, token } => self.claim_relay(now, node, token),
                EvKind::GhostForward { node, token } => self.admit_ghost(now, node, token),
                EvKind::RetryResume { node, token } => {
                    self.admit_data(now, node, token, true);
                }
            }
        }
        Ok(())
    }

    fn admit_data(&mut self, now: u64, node: usize, token: Token, front: bool) {
        debug_assert!(!token.ghost);
        if self.nodes[node].queue.len() >= self.world.params().queue_cap {
            self.record_loss(token.id, Fate::QueueOverflow);
            return;
        }
        if front {
            self.nodes[node].queue.push_front(token);
        } else {
            self.nodes[node].queue.push_back(token);
        }
        self.schedule(now, EvKind::TryDequeue { node });
    }

    /// Duplicate copies respect the queue and the carried-set; losing one is
    /// not a packet fate.
    fn admit_ghost(&mut self, now: u64, node: usize, token: Token) {
        debug_assert!(token.ghost);
        if self.nodes[node].queue.len() >= self.world.params().queue_cap
            || !self.carried.insert((node, token.id))
        {
            return;
        }
        self.nodes[node].queue.push_back(token);
        self.schedule(now, EvKind::TryDequeue { node });
    }

    /// A packet's fate is written once; a drop never overwrites a delivery,
    /// and a later ghost delivery upgrades a drop.
    fn record_loss(&mut self, id: usize, fate: Fate) {
        if self.fates[id] == Fate::InFlight {
            self.fates[id] = fate;
        }
    }

    fn try_dequeue(&mut self, now: u64, node: usize) {
        let state = &self.nodes[node];
        if state.serving.is_some() || now < state.busy_until_ns || state.queue.is_empty() {
            return;
        }
        // Carrier sense: defer while an in-range neighbor is mid-frame. The
        // deferring node is woken by that frame's completion, so duplicate
        // traffic anywhere in the neighborhood shows up as queueing delay.
        if self.channel_busy(node) {
            return;
        }
        let state = &mut self.nodes[node];
        let token = state.queue.pop_front().expect("queue checked non-empty");
        state.serving = Some(token);
        state.busy_until_ns = now + self.frame_ns;
        self.schedule(now + self.frame_ns, EvKind::FrameSent { node });
    }

    fn channel_busy(&self, node: usize) -> bool {
        let n = self.world.node_count();
        (0..n).any(|m| {
            m != node
                && self.nodes[m].serving.is_some()
                && self.world.link_pdr_between(node, m) > 0.0
        })
    }

    /// Frame completion at `node` frees the channel for deferred neighbors.
    fn wake_neighbors(&mut self, now: u64, node: usize) {
        let n = self.world.node_count();
        for m in 0..n {
            if m != node
                && !self.nodes[m].queue.is_empty()
                && self.nodes[m].serving.is_none()
                && self.world.link_pdr_between(node, m) > 0.0
            {
                self.schedule(now, EvKind::TryDequeue { node: m });
            }
        }
    }

    fn frame_sent(&mut self, now: u64, node: usize) -> Result<(), SimError> {
        let mut token = self.nodes[node]
            .serving
            .take()
            .expect("frame completion without a frame in service");
        self.wake_neighbors(now, node);
        self.total_transmissions += 1;
        if token.ghost {
            self.duplicate_forwards += 1;
        }
        self.ensure_plan(node, token.dst)?;
        let plan = &self.plans[&(node, token.dst)];
        match plan {
            HopPlan::NoCandidates => {
                if !token.ghost {
                    self.record_loss(token.id, Fate::NoCandidate);
                }
                self.schedule(now, EvKind::TryDequeue { node });
            }
            HopPlan::Candidates(candidates) => {
                let candidates = candidates.clone();
                let mut receivers: Vec<(usize, usize)> = Vec::new(); // (slot index, node)
                for (slot, &(cand, pdr)) in candidates.iter().enumerate() {
                    // Half-duplex: a candidate whose own radio is mid-frame
                    // cannot also receive this one.
                    if self.nodes[cand].serving.is_some() {
                        continue;
                    }
                    if self.rng.random_bool(pdr) {
                        receivers.push((slot, cand));
                    }
                }
                if receivers.is_empty() {
                    if token.ghost {
                        // Duplicate copies are abandoned after a silent try;
                        // the claimed copy carries the retry persistence.
                        self.schedule(now, EvKind::TryDequeue { node });
                        return Ok(());
                    }
                    token.retries += 1;
                    if token.retries > self.world.params().max_retries {
                        self.record_loss(token.id, Fate::RetryExhausted);
                        self.schedule(now, EvKind::TryDequeue { node });
                    } else {
                        // Full silent slot cycle before the retry.
                        let resume = now + candidates.len() as u64 * self.slot_ns;
                        self.nodes[node].busy_until_ns = resume;
                        self.schedule(resume, EvKind::RetryResume { node, token });
                    }
                } else {
                    let (winner_slot, winner) = receivers[0];
                    let fire = now + winner_slot as u64 * self.slot_ns;
                    self.schedule(fire, EvKind::ClaimRelay { node: winner, token });
                    for &(slot, other) in &receivers[1..] {
                        let ack_pdr = self.world.link_pdr_between(winner, other);
                        let heard = ack_pdr > 0.0 && self.rng.random_bool(ack_pdr);
                        // A missed ACK turns this receiver into a duplicate
                        // forwarder in its own slot; it sits one hop
                        // downstream like the winner, so the hop budget
                        // applies the same way.
                        if !heard && token.hops + 1 < self.world.params().ttl_hops {
                            let ghost = Token {
                                ghost: true,
                                retries: 0,
                                hops: token.hops + 1,
                                ..token
                            };
                            let dup_fire = now + slot as u64 * self.slot_ns;
                            self.schedule(
                                dup_fire,
                                EvKind::GhostForward { node: other, token: ghost },
                            );
                        }
                    }
                    self.schedule(now, EvKind::TryDequeue { node });
                }
            }
        }
        Ok(())
    }

    fn claim_relay(&mut self, now: u64, node: usize, mut token: Token) {
        // The claim rides on the winner's ACK broadcast.
        self.control_transmissions += 1;
        if node == token.dst {
            // Any copy may deliver; only the first one counts.
            if self.fates[token.id] != Fate::Delivered {
                self.fates[token.id] = Fate::Delivered;
                self.delays_ns.push(now - token.created_ns);
            }
            return;
        }
        if token.hops + 1 >= self.world.params().ttl_hops {
            if !token.ghost {
                self.record_loss(token.id, Fate::TtlExceeded);
            }
            return;
        }
        token.hops += 1;
        token.retries = 0;
        if token.ghost {
            self.admit_ghost(now, node, token);
        } else {
            self.carried.insert((node, token.id));
            self.admit_data(now, node, token, false);
        }
    }

    fn ensure_plan(&mut self, sender: usize, dst: usize) -> Result<(), SimError> {
        if self.plans.contains_key(&(sender, dst)) {
            return Ok(());
        }
        if !self.etx_tables.contains_key(&dst) {
            let table = self.world.etx_to(dst);
            self.etx_tables.insert(dst, table);
        }
        let etx = &self.etx_tables[&dst];
        let plan = match candidate_set_with_etx(self.world, etx, sender, dst, self.world.params().k_max)
        {
            Err(SimError::EmptyCandidates) => HopPlan::NoCandidates,
            Err(e) => return Err(e),
            Ok(profiles) => {
                let ordered = self.coordinate_candidates(dst, profiles)?;
                HopPlan::Candidates(ordered)
            }
        };
        self.plans.insert((sender, dst), plan);
        Ok(())
    }

    /// Applies the scheme's stage-two filtering/prioritization to the raw
    /// candidate set, returning `(node, pdr)` in firing order.
    fn coordinate_candidates(
        &mut self,
        dst: usize,
        profiles: Vec<RelayProfile>,
    ) -> Result<Vec<(usize, f64)>, SimError> {
        let params = self.world.params();
        // Direct delivery bypasses scheme logic.
        if profiles.len() == 1 && profiles[0].node.0 as usize == dst {
            return Ok(vec![(dst, profiles[0].pdr)]);
        }
        match self.scheme {
            Scheme::ExorStyle => {
                // Progress-ranked, as produced by stage one.
                Ok(profiles.iter().map(|p| (p.node.0 as usize, p.pdr)).collect())
            }
            Scheme::SoarStyle => {
                // Keep candidates whose path cost stays within a corridor of
                // the best one: progress >= best progress - corridor.
                let best = profiles
                    .iter()
                    .map(|p| p.base_utility)
                    .fold(f64::NEG_INFINITY, f64::max);
                Ok(profiles
                    .iter()
                    .filter(|p| p.base_utility >= best - params.soar_corridor)
                    .map(|p| (p.node.0 as usize, p.pdr))
                    .collect())
            }
            Scheme::Dda => {
                let mut nodes: Vec<NodeId> = profiles.iter().map(|p| p.node).collect();
                nodes.sort();
                let mut graph = CandidateGraph::new(nodes.clone())?;
                for (i, &a) in nodes.iter().enumerate() {
                    for &b in &nodes[i + 1..] {
                        if self.world.link_pdr_between(a.0 as usize, b.0 as usize) > 0.0 {
                            graph.add_edge(a, b)?;
                        }
                    }
                }
                match select_relaying_network(
                    &graph,
                    &profiles,
                    params.waiting_slot_ms,
                    &params.select,
                ) {
                    Ok(result) => Ok(result
                        .chosen
                        .iter()
                        .map(|r| (r.node.0 as usize, r.pdr))
                        .collect()),
                    Err(SelectError::NoRelayingNetwork) => {
                        // Deterministic-routing fallback: one best relay.
                        let single = best_single_relay(&profiles)?;
                        let ranked =
                            prioritize_nodes(&[single], params.select.priority_mode)?;
                        Ok(ranked.iter().map(|r| (r.node.0 as usize, r.pdr)).collect())
                    }
                    Err(e) => Err(e.into()),
                }
            }
        }
    }

    fn finish(self) -> RunMetrics {
        let params = self.world.params();
        let sent = self.fates.len() as u64;
        let delivered = self.delays_ns.len() as u64;
        let mut drops = DropCounts::default();
        let mut in_flight = 0u64;
        for fate in &self.fates {
            match fate {
                Fate::Delivered => {}
                Fate::InFlight => in_flight += 1,
                Fate::QueueOverflow => drops.queue_overflow += 1,
                Fate::RetryExhausted => drops.retry_exhausted += 1,
                Fate::NoCandidate => drops.no_candidate += 1,
                Fate::TtlExceeded => drops.ttl_exceeded += 1,
            }
        }
        let beacons = params.node_count as u64
            * (params.sim_duration_s / params.beacon_interval_s).floor() as u64;
        let control = self.control_transmissions + beacons;
        let mean_delay_ms = if self.delays_ns.is_empty() {
            0.0
        } else {
            self.delays_ns.iter().map(|&d| d as f64).sum::<f64>()
                / self.delays_ns.len() as f64
                / 1e6
        };
        let ratio = |num: u64, den: u64| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        RunMetrics {
            sent_source_packets: sent,
            delivered_packets: delivered,
            delivery_ratio: ratio(delivered, sent),
            mean_e2e_delay_ms: mean_delay_ms,
            total_transmissions: self.total_transmissions,
            control_transmissions: control,
            throughput_ratio: ratio(delivered, self.total_transmissions),
            throughput_ratio_with_control: ratio(delivered, self.total_transmissions + control),
            duplicate_forwards: self.duplicate_forwards,
            duplicates_per_delivered: ratio(self.duplicate_forwards, delivered),
            drops,
            in_flight_at_end: in_flight,
        }
    }
}
