//! End-to-end relaying-network selection.
//!
//! Given the connectivity among a sender's candidate relays and their
//! per-node delivery ratios and stage-one utilities, selection enumerates
//! every verified relaying network (clique), scores each with the
//! deteriorated delay/utility pair, weighs the two metrics by their relative
//! variances over the candidate pool, and returns the network with the
//! highest rank-aggregated utility. Nodes inside the winner get relaying
//! priorities.

use thiserror::Error;

use crate::delay::{expected_relay_delay, network_pdr, DelayError, PrioritizedPdrVector};
use crate::relay_graph::{CandidateGraph, GraphError, NodeId};
use crate::scoring::{
    assign_order_numbers, expected_network_utility, final_network_utility,
    legacy_weighted_utility, relative_variance, resolution_ratio, NetworkScore, RankDirection,
    RankingWeights, ScoringError,
};

/// Errors from profile handling and selection.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SelectError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Delay(#[from] DelayError),
    #[error(transparent)]
    Scoring(#[from] ScoringError),
    #[error("duplicate node {0} in profiles")]
    DuplicateNode(NodeId),
    #[error("graph node {0} has no relay profile")]
    MissingProfile(NodeId),
    #[error("no relay profiles given")]
    EmptyProfiles,
    #[error("delivery ratio {pdr} for node {node} is outside (0, 1]")]
    InvalidPdr { node: NodeId, pdr: f64 },
    #[error("utility {utility} for node {node} must be finite and non-negative")]
    InvalidUtility { node: NodeId, utility: f64 },
    #[error("no relaying network of degree >= 2 exists among the candidates")]
    NoRelayingNetwork,
}

/// One candidate relay as seen from the sender.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelayProfile {
    pub node: NodeId,
    /// Link delivery ratio from the sender.
    pub pdr: f64,
    /// Stage-one utility (progress metric, residual energy, ...).
    pub base_utility: f64,
}

impl RelayProfile {
    pub fn new(node: NodeId, pdr: f64, base_utility: f64) -> Result<Self, SelectError> {
        if !(pdr > 0.0 && pdr <= 1.0) {
            return Err(SelectError::InvalidPdr { node, pdr });
        }
        if !base_utility.is_finite() || base_utility < 0.0 {
            return Err(SelectError::InvalidUtility {
                node,
                utility: base_utility,
            });
        }
        Ok(RelayProfile {
            node,
            pdr,
            base_utility,
        })
    }

    /// Stage-one utility discounted by the one-hop delivery ratio.
    pub fn adjusted_utility(&self) -> f64 {
        self.base_utility * self.pdr
    }
}

/// A relay with its assigned priority; priority 1 fires first.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrioritizedRelay {
    pub node: NodeId,
    pub pdr: f64,
    pub base_utility: f64,
    pub adjusted_utility: f64,
    pub priority: usize,
}

/// How relay priorities inside a network are ordered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PriorityMode {
    /// Sort by link delivery ratio, highest first. Minimizes the expected
    /// relaying delay; the natural choice when the stage-one metric is
    /// already delivery-ratio based.
    #[default]
    PdrDescending,
    /// Sort by `utility * pdr`, highest first. Balances a delivery-ratio
    /// agnostic stage-one metric against link quality.
    AdjustedUtility,
}

/// How the final per-network utility is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ScoringMode {
    /// Rank networks per metric and weigh the order numbers by the metrics'
    /// relative variances.
    #[default]
    RankAggregated,
    /// Weigh the raw metric values directly (kept for A/B comparison; scale
    /// differences between the metrics dominate it).
    WeightedRaw,
}

/// Selection knobs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectConfig {
    pub scoring_mode: ScoringMode,
    pub priority_mode: PriorityMode,
    /// Candidate count above which the set is pruned to the best adjusted
    /// utilities before enumeration.
    pub candidate_cap: usize,
    /// Drop networks strictly worse than another on both metrics before
    /// weighting. Off by default; variances are computed over the post-prune
    /// pool.
    pub dominance_prune: bool,
}

impl Default for SelectConfig {
    fn default() -> Self {
        SelectConfig {
            scoring_mode: ScoringMode::RankAggregated,
            priority_mode: PriorityMode::PdrDescending,
            candidate_cap: 12,
            dominance_prune: false,
        }
    }
}

/// Outcome of one selection: the chosen prioritized relays plus the full
/// audit trail.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionResult {
    /// Members of the winning network in priority order.
    pub chosen: Vec<PrioritizedRelay>,
    /// Score rows for every enumerated network, in enumeration order.
    pub all_scores: Vec<NetworkScore>,
    pub weights: RankingWeights,
    pub scoring_mode: ScoringMode,
    pub priority_mode: PriorityMode,
}

impl SelectionResult {
    /// Sorted ids of the chosen network.
    pub fn chosen_ids(&self) -> Vec<NodeId> {
        let mut ids: Vec<NodeId> = self.chosen.iter().map(|r| r.node).collect();
        ids.sort();
        ids
    }
}

/// Assigns priorities 1..=n by the chosen mode; ties break on node id.
pub fn prioritize_nodes(
    profiles: &[RelayProfile],
    mode: PriorityMode,
) -> Result<Vec<PrioritizedRelay>, SelectError> {
    if profiles.is_empty() {
        return Err(SelectError::EmptyProfiles);
    }
    let mut seen = std::collections::BTreeSet::new();
    for p in profiles {
        if !seen.insert(p.node) {
            return Err(SelectError::DuplicateNode(p.node));
        }
    }
    let mut sorted: Vec<&RelayProfile> = profiles.iter().collect();
    sorted.sort_by(|a, b| {
        let key_a = match mode {
            PriorityMode::PdrDescending => a.pdr,
            PriorityMode::AdjustedUtility => a.adjusted_utility(),
        };
        let key_b = match mode {
            PriorityMode::PdrDescending => b.pdr,
            PriorityMode::AdjustedUtility => b.adjusted_utility(),
        };
        key_b
            .partial_cmp(&key_a)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.node.cmp(&b.node))
    });
    Ok(sorted
        .into_iter()
        .enumerate()
        .map(|(i, p)| PrioritizedRelay {
            node: p.node,
            pdr: p.pdr,
            base_utility: p.base_utility,
            adjusted_utility: p.adjusted_utility(),
            priority: i + 1,
        })
        .collect())
}

/// The deterministic-routing fallback when no relaying network exists: the
/// single candidate with the best adjusted utility (ties: higher pdr, then
/// lower node id).
pub fn best_single_relay(profiles: &[RelayProfile]) -> Result<RelayProfile, SelectError> {
    profiles
        .iter()
        .max_by(|a, b| {
            a.adjusted_utility()
                .partial_cmp(&b.adjusted_utility())
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.pdr.partial_cmp(&b.pdr).unwrap_or(std::cmp::Ordering::Equal))
                .then(b.node.cmp(&a.node))
        })
        .copied()
        .ok_or(SelectError::EmptyProfiles)
}

struct ScoredNetwork {
    members: Vec<NodeId>,
    prioritized: Vec<PrioritizedRelay>,
    dt: f64,
    p_g: f64,
    t: f64,
    dt_star: f64,
    u_bar: f64,
    u_star: f64,
}

/// Runs the full selection procedure over a candidate graph.
///
/// Steps: prune oversized candidate sets by adjusted utility, enumerate
/// verified relaying networks of degree >= 2, prioritize and score each,
/// derive relative-variance weights over the pool, rank, and return the
/// argmax under deterministic tie-breaks (higher delivery ratio, then
/// smaller degree, then lexicographic node ids).
pub fn select_relaying_network(
    graph: &CandidateGraph,
    profiles: &[RelayProfile],
    slot_ms: f64,
    config: &SelectConfig,
) -> Result<SelectionResult, SelectError> {
    if profiles.is_empty() {
        return Err(SelectError::EmptyProfiles);
    }
    let mut by_node = std::collections::BTreeMap::new();
    for p in profiles {
        if by_node.insert(p.node, *p).is_some() {
            return Err(SelectError::DuplicateNode(p.node));
        }
    }
    for &node in graph.nodes() {
        if !by_node.contains_key(&node) {
            return Err(SelectError::MissingProfile(node));
        }
    }

    // Prune by adjusted utility when the candidate set is too large to
    // enumerate; the relaying-network count grows exponentially.
    let working: CandidateGraph = if graph.node_count() > config.candidate_cap {
        let mut ranked: Vec<&RelayProfile> = graph
            .nodes()
            .iter()
            .map(|id| &by_node[id])
            .collect();
        ranked.sort_by(|a, b| {
            b.adjusted_utility()
                .partial_cmp(&a.adjusted_utility())
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.node.cmp(&b.node))
        });
        let keep: Vec<NodeId> = ranked[..config.candidate_cap].iter().map(|p| p.node).collect();
        graph.induced_subgraph(&keep)?
    } else {
        graph.clone()
    };

    let m = working.node_count();
    if m < 2 {
        return Err(SelectError::NoRelayingNetwork);
    }
    let networks = working.enumerate_relaying_networks_capped(2, m, m)?;
    if networks.is_empty() {
        return Err(SelectError::NoRelayingNetwork);
    }

    let mut scored: Vec<ScoredNetwork> = Vec::with_capacity(networks.len());
    for members in networks {
        let member_profiles: Vec<RelayProfile> =
            members.iter().map(|id| by_node[id]).collect();
        let prioritized = prioritize_nodes(&member_profiles, config.priority_mode)?;
        let pdrs: Vec<f64> = prioritized.iter().map(|r| r.pdr).collect();
        let utilities: Vec<f64> = prioritized.iter().map(|r| r.base_utility).collect();
        let pv = PrioritizedPdrVector::new(pdrs.clone(), slot_ms)?;
        let dt = expected_relay_delay(&pv);
        let p_g = network_pdr(&pdrs)?;
        let t = 1.0 / p_g;
        let u_bar = expected_network_utility(&utilities, &pdrs)?;
        scored.push(ScoredNetwork {
            members,
            prioritized,
            dt,
            p_g,
            t,
            dt_star: dt * t,
            u_bar,
            u_star: u_bar * p_g,
        });
    }

    if config.dominance_prune && scored.len() > 1 {
        let dominated: Vec<bool> = scored
            .iter()
            .map(|a| {
                scored
                    .iter()
                    .any(|b| b.dt_star < a.dt_star && b.u_star > a.u_star)
            })
            .collect();
        if dominated.iter().any(|d| !d) {
            let mut keep = Vec::with_capacity(scored.len());
            for (net, dominated) in scored.into_iter().zip(&dominated) {
                if !dominated {
                    keep.push(net);
                }
            }
            scored = keep;
        }
    }

    let dt_stars: Vec<f64> = scored.iter().map(|s| s.dt_star).collect();
    let u_stars: Vec<f64> = scored.iter().map(|s| s.u_star).collect();
    // A zero mean can only come from an all-zero column here, which carries
    // no ranking signal either way.
    let degenerate_to_zero = |r: Result<f64, ScoringError>| match r {
        Ok(v) => Ok(v),
        Err(ScoringError::DegenerateMean) => Ok(0.0),
        Err(e) => Err(e),
    };
    let v_r_dt = degenerate_to_zero(relative_variance(&dt_stars))?;
    let v_r_u = degenerate_to_zero(relative_variance(&u_stars))?;
    let xi = match resolution_ratio(v_r_dt, v_r_u) {
        Ok(v) => v,
        Err(ScoringError::DegenerateVariances) => 1.0,
        Err(e) => return Err(e.into()),
    };

    let order_dt = assign_order_numbers(&dt_stars, RankDirection::LowerIsBetter);
    let order_u = assign_order_numbers(&u_stars, RankDirection::HigherIsBetter);
    let (u_finals, weights) = match config.scoring_mode {
        ScoringMode::RankAggregated => (
            final_network_utility(&order_dt, &order_u, v_r_dt, v_r_u)?,
            RankingWeights {
                v_r_dt,
                v_r_u,
                xi,
                legacy_w_dt: None,
                legacy_w_u: None,
            },
        ),
        ScoringMode::WeightedRaw => (
            scored
                .iter()
                .map(|s| legacy_weighted_utility(s.dt_star, s.u_star, v_r_dt, v_r_u))
                .collect(),
            RankingWeights {
                v_r_dt,
                v_r_u,
                xi,
                legacy_w_dt: Some(v_r_dt),
                legacy_w_u: Some(v_r_u),
            },
        ),
    };

    let mut best: Option<usize> = None;
    for idx in 0..scored.len() {
        let better = match best {
            None => true,
            Some(cur) => {
                use std::cmp::Ordering;
                let a = &scored[idx];
                let b = &scored[cur];
                match u_finals[idx].partial_cmp(&u_finals[cur]).unwrap_or(Ordering::Equal) {
                    Ordering::Greater => true,
                    Ordering::Less => false,
                    Ordering::Equal => match a.p_g.partial_cmp(&b.p_g).unwrap_or(Ordering::Equal)
                    {
                        Ordering::Greater => true,
                        Ordering::Less => false,
                        Ordering::Equal => match a.members.len().cmp(&b.members.len()) {
                            Ordering::Less => true,
                            Ordering::Greater => false,
                            Ordering::Equal => a.members < b.members,
                        },
                    },
                }
            }
        };
        if better {
            best = Some(idx);
        }
    }
    let best = best.expect("non-empty network pool");

    let all_scores: Vec<NetworkScore> = scored
        .iter()
        .enumerate()
        .map(|(i, s)| NetworkScore {
            network: s.members.clone(),
            dt: s.dt,
            p_g: s.p_g,
            t: s.t,
            dt_star: s.dt_star,
            u_bar: s.u_bar,
            u_star: s.u_star,
            order_dt: order_dt[i],
            order_u: order_u[i],
            u_final: u_finals[i],
        })
        .collect();

    Ok(SelectionResult {
        chosen: scored[best].prioritized.clone(),
        all_scores,
        weights,
        scoring_mode: config.scoring_mode,
        priority_mode: config.priority_mode,
    })
}
