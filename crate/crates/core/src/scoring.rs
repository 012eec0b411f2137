//! Relaying-network scoring: ETX, deteriorated delay/utility, relative
//! variance weights, order numbers, and the final rank-aggregated utility.
//!
//! Raw metric values live on wildly different scales (a delay in ms vs a
//! dimensionless utility), so a direct weighted sum is dominated by whichever
//! metric happens to be numerically large. The final score therefore ranks
//! networks per metric, assigns integer order numbers, and weighs the order
//! numbers by each metric's relative variance: the metric that actually
//! spreads the candidates apart gets the say.

use thiserror::Error;

use crate::delay::{expected_relay_delay, network_pdr, DelayError, PrioritizedPdrVector};
use crate::relay_graph::NodeId;

/// Errors from scoring computations.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScoringError {
    #[error(transparent)]
    Delay(#[from] DelayError),
    #[error("lists have mismatched lengths ({0} vs {1})")]
    DimensionMismatch(usize, usize),
    #[error("empty input")]
    EmptyInput,
    #[error("relative variance is undefined for a zero mean")]
    DegenerateMean,
    #[error("resolution ratio is undefined when both variances are zero")]
    DegenerateVariances,
    #[error("delivery ratio {0} is outside (0, 1]")]
    InvalidProbability(f64),
}

/// Ranking direction for [`assign_order_numbers`].
///
/// Order number `N` (the largest) always marks the most desirable value, so
/// a cost metric ranks `LowerIsBetter` and a benefit metric `HigherIsBetter`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RankDirection {
    HigherIsBetter,
    LowerIsBetter,
}

/// Full audit row for one relaying network.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkScore {
    /// Member node ids, sorted.
    pub network: Vec<NodeId>,
    /// Expected one-hop relaying delay, ms.
    pub dt: f64,
    /// Network packet delivery ratio.
    pub p_g: f64,
    /// Network ETX, `1 / p_g`.
    pub t: f64,
    /// Deteriorated delay `dt * t`, ms.
    pub dt_star: f64,
    /// Expected network utility of one transmission try.
    pub u_bar: f64,
    /// Deteriorated utility `u_bar / t`.
    pub u_star: f64,
    /// Order number under the delay metric (lower delay = larger number).
    pub order_dt: usize,
    /// Order number under the utility metric (higher utility = larger number).
    pub order_u: usize,
    /// Final rank-aggregated utility.
    pub u_final: f64,
}

/// Weights and diagnostics of one ranking round.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankingWeights {
    /// Relative variance of the deteriorated delays.
    pub v_r_dt: f64,
    /// Relative variance of the deteriorated utilities.
    pub v_r_u: f64,
    /// Resolution ratio between the two (1 when both are degenerate).
    pub xi: f64,
    /// Direct weights for the legacy weighted-sum mode, when used.
    pub legacy_w_dt: Option<f64>,
    pub legacy_w_u: Option<f64>,
}

/// A node's stage-one utility discounted by its one-hop delivery ratio:
/// `u * p`.
pub fn adjusted_node_utility(u: f64, p: f64) -> Result<f64, ScoringError> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(ScoringError::InvalidProbability(p));
    }
    Ok(u * p)
}

/// Network ETX: expected transmission count until at least one member
/// receives, `1 / network_pdr`.
pub fn network_etx(p: &[f64]) -> Result<f64, ScoringError> {
    Ok(1.0 / network_pdr(p)?)
}

/// Expected delay inflated by the network ETX: `dt * t`.
pub fn deteriorated_delay(pv: &PrioritizedPdrVector) -> Result<f64, ScoringError> {
    Ok(expected_relay_delay(pv) * network_etx(pv.pdrs())?)
}

/// Expected utility of one transmission try: the first receiver's utility,
/// weighted by who that turns out to be.
pub fn expected_network_utility(u: &[f64], p: &[f64]) -> Result<f64, ScoringError> {
    if u.len() != p.len() {
        return Err(ScoringError::DimensionMismatch(u.len(), p.len()));
    }
    if u.is_empty() {
        return Err(ScoringError::EmptyInput);
    }
    let mut acc = 0.0;
    let mut none_before = 1.0;
    for (ui, pi) in u.iter().zip(p) {
        if !(*pi > 0.0 && *pi <= 1.0) {
            return Err(ScoringError::InvalidProbability(*pi));
        }
        acc += ui * pi * none_before;
        none_before *= 1.0 - pi;
    }
    Ok(acc)
}

/// Expected utility deflated by the network ETX: `u_bar / t = u_bar * p_g`.
pub fn deteriorated_utility(u: &[f64], p: &[f64]) -> Result<f64, ScoringError> {
    Ok(expected_network_utility(u, p)? * network_pdr(p)?)
}

/// Mean squared deviation normalized by the mean:
/// `(1/n) sum ((x_i - mean) / mean)^2`.
///
/// Scale-free: multiplying every input by a positive constant leaves it
/// unchanged.
pub fn relative_variance(x: &[f64]) -> Result<f64, ScoringError> {
    if x.is_empty() {
        return Err(ScoringError::EmptyInput);
    }
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    if mean == 0.0 {
        return Err(ScoringError::DegenerateMean);
    }
    Ok(x.iter().map(|v| ((v - mean) / mean).powi(2)).sum::<f64>() / x.len() as f64)
}

/// Ratio of the larger relative variance to the smaller (1 when equal).
pub fn resolution_ratio(v_dt: f64, v_u: f64) -> Result<f64, ScoringError> {
    if v_dt == 0.0 && v_u == 0.0 {
        return Err(ScoringError::DegenerateVariances);
    }
    Ok(if v_dt > v_u {
        v_dt / v_u
    } else if v_dt < v_u {
        v_u / v_dt
    } else {
        1.0
    })
}

/// Competition-ranked order numbers 1..=N where `N` marks the most desirable
/// value. Ties share the lower number and the next number is skipped.
pub fn assign_order_numbers(values: &[f64], direction: RankDirection) -> Vec<usize> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    // Sort worst first so that position + 1 is the order number.
    order.sort_by(|&a, &b| {
        let cmp = values[a].partial_cmp(&values[b]).unwrap_or(std::cmp::Ordering::Equal);
        match direction {
            RankDirection::HigherIsBetter => cmp,
            RankDirection::LowerIsBetter => cmp.reverse(),
        }
        .then(a.cmp(&b))
    });
    let mut ranks = vec![0usize; n];
    for (pos, &idx) in order.iter().enumerate() {
        if pos > 0 {
            let prev = order[pos - 1];
            if values[idx] == values[prev] {
                ranks[idx] = ranks[prev];
                continue;
            }
        }
        ranks[idx] = pos + 1;
    }
    ranks
}

/// Final utility per network: `v_dt * order_dt + v_u * order_u`. Selection
/// takes the argmax.
pub fn final_network_utility(
    order_dt: &[usize],
    order_u: &[usize],
    v_dt: f64,
    v_u: f64,
) -> Result<Vec<f64>, ScoringError> {
    if order_dt.len() != order_u.len() {
        return Err(ScoringError::DimensionMismatch(order_dt.len(), order_u.len()));
    }
    Ok(order_dt
        .iter()
        .zip(order_u)
        .map(|(&d, &u)| v_dt * d as f64 + v_u * u as f64)
        .collect())
}

/// Legacy direct weighted sum over raw metric values. Kept as an alternative
/// scoring mode; the rank-aggregated form supersedes it because raw scales
/// dominate the sum.
pub fn legacy_weighted_utility(dt_star: f64, u_star: f64, w_dt: f64, w_u: f64) -> f64 {
    w_dt * dt_star + w_u * u_star
}

/// Renders score rows as CSV with a fixed header.
pub fn score_table_csv(scores: &[NetworkScore]) -> String {
    let mut out = String::from(
        "network,dt,p_g,t,dt_star,u_bar,u_star,order_dt,order_u,u_final\n",
    );
    for s in scores {
        let members: Vec<String> = s.network.iter().map(|n| n.to_string()).collect();
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            members.join("|"),
            s.dt,
            s.p_g,
            s.t,
            s.dt_star,
            s.u_bar,
            s.u_star,
            s.order_dt,
            s.order_u,
            s.u_final
        ));
    }
    out
}
