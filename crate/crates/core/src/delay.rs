//! Expected one-hop relaying delay and delay sensitivity.
//!
//! In timer coordination the candidate with priority `k` fires after `k-1`
//! waiting slots of length `T`, so the expected delay of one transmission try
//! over a prioritized relay set is
//!
//! ```text
//! DT = T * ( sum_{i=1}^{n-1} i * P_{i+1} * prod_{j=1}^{i} (1 - P_j)
//!            + n * prod_{i=1}^{n} (1 - P_i) )
//! ```
//!
//! [`expected_relay_delay`] evaluates that sum directly;
//! [`relay_delay_oracle`] reaches the same expectation by enumerating the
//! `n + 1` disjoint outcomes ("first receiver has priority k", "none
//! receives") and is kept as an independent cross-check.
//!
//! The sensitivity functions quantify how much raising one node's delivery
//! ratio lowers the expected delay. The exact two-evaluation difference is
//! authoritative; a case-split closed-form expansion is evaluated alongside
//! for cross-checking, because its single-index form provably disagrees
//! with the exact difference in at least the `i = 1, n = 2` case (leading
//! factor `2(1 - P_2)` vs `2 - P_2`).

use thiserror::Error;

/// Relative tolerance used when reporting exact-vs-closed-form agreement.
pub const AGREEMENT_RTOL: f64 = 1e-9;

/// Errors from delay and sensitivity computations.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum DelayError {
    #[error("empty delivery-ratio list")]
    EmptyInput,
    #[error("delivery ratio {value} at position {index} is outside (0, 1]")]
    InvalidProbability { index: usize, value: f64 },
    #[error("a prioritized vector needs at least 2 entries, got {got}")]
    TooFewPriorities { got: usize },
    #[error("waiting slot must be positive, got {0} ms")]
    InvalidSlot(f64),
    #[error("priority index {index} out of range 1..={len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("perturbation must be non-negative, got {0}")]
    InvalidPerturbation(f64),
    #[error("perturbing P_{index} by {delta_p} exceeds 1")]
    PerturbationExceedsOne { index: usize, delta_p: f64 },
    #[error("the closed form has no branch for i = n (index {index})")]
    ClosedFormUnsupported { index: usize },
    #[error("invalid priority pair ({i}, {j})")]
    InvalidPair { i: usize, j: usize },
}

/// Per-node delivery ratios indexed by relaying priority (entry 0 fires
/// first), plus the waiting-slot length.
#[derive(Debug, Clone, PartialEq)]
pub struct PrioritizedPdrVector {
    p: Vec<f64>,
    slot_ms: f64,
}

impl PrioritizedPdrVector {
    /// Validates entries against the runtime domain `(0, 1]`.
    pub fn new(p: Vec<f64>, slot_ms: f64) -> Result<Self, DelayError> {
        for (i, &v) in p.iter().enumerate() {
            if !(v > 0.0 && v <= 1.0) {
                return Err(DelayError::InvalidProbability { index: i, value: v });
            }
        }
        Self::validated(p, slot_ms)
    }

    /// Admits the `P_i = 0` boundary. Degenerate-fixture use only; selection
    /// paths go through [`Self::new`].
    pub fn allowing_zero(p: Vec<f64>, slot_ms: f64) -> Result<Self, DelayError> {
        for (i, &v) in p.iter().enumerate() {
            if !(0.0..=1.0).contains(&v) {
                return Err(DelayError::InvalidProbability { index: i, value: v });
            }
        }
        Self::validated(p, slot_ms)
    }

    fn validated(p: Vec<f64>, slot_ms: f64) -> Result<Self, DelayError> {
        if p.len() < 2 {
            return Err(DelayError::TooFewPriorities { got: p.len() });
        }
        if !slot_ms.is_finite() || slot_ms <= 0.0 {
            return Err(DelayError::InvalidSlot(slot_ms));
        }
        Ok(PrioritizedPdrVector { p, slot_ms })
    }

    pub fn pdrs(&self) -> &[f64] {
        &self.p
    }

    pub fn slot_ms(&self) -> f64 {
        self.slot_ms
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    /// 1-based access matching priority numbering.
    fn pdr_at(&self, i: usize) -> f64 {
        self.p[i - 1]
    }

    fn check_index(&self, i: usize) -> Result<(), DelayError> {
        if i == 0 || i > self.p.len() {
            return Err(DelayError::IndexOutOfRange {
                index: i,
                len: self.p.len(),
            });
        }
        Ok(())
    }

    fn perturbed(&self, i: usize, delta_p: f64) -> Result<Self, DelayError> {
        self.check_index(i)?;
        if delta_p < 0.0 {
            return Err(DelayError::InvalidPerturbation(delta_p));
        }
        if self.pdr_at(i) + delta_p > 1.0 + 1e-12 {
            return Err(DelayError::PerturbationExceedsOne { index: i, delta_p });
        }
        let mut p = self.p.clone();
        p[i - 1] = (p[i - 1] + delta_p).min(1.0);
        Ok(PrioritizedPdrVector {
            p,
            slot_ms: self.slot_ms,
        })
    }
}

/// Exact-vs-closed-form comparison for one sensitivity evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityReport {
    /// Perturbed priority index (1-based); for pairwise reports, the first of
    /// the pair.
    pub index: usize,
    /// Second priority index for pairwise reports.
    pub pair_index: Option<usize>,
    pub delta_p: f64,
    /// Authoritative value: difference of two exact delay evaluations.
    pub exact_delta: f64,
    /// Value of the case-split closed form, when one applies.
    pub closed_form_delta: Option<f64>,
    /// The priority-dominance threshold ratio, pairwise only (needs `j < n`).
    pub phi: Option<f64>,
    /// Whether exact and closed form agree within [`AGREEMENT_RTOL`].
    pub agrees: Option<bool>,
}

fn within_rtol(a: f64, b: f64) -> bool {
    let scale = a.abs().max(b.abs()).max(1e-12);
    (a - b).abs() <= AGREEMENT_RTOL * scale
}

/// Probability that at least one node of the set receives the frame:
/// `1 - prod (1 - P_i)`.
pub fn network_pdr(p: &[f64]) -> Result<f64, DelayError> {
    if p.is_empty() {
        return Err(DelayError::EmptyInput);
    }
    let mut all_fail = 1.0;
    for (i, &v) in p.iter().enumerate() {
        if !(v > 0.0 && v <= 1.0) {
            return Err(DelayError::InvalidProbability { index: i, value: v });
        }
        all_fail *= 1.0 - v;
    }
    Ok(1.0 - all_fail)
}

/// Average one-hop relaying delay of one transmission try, in ms.
pub fn expected_relay_delay(pv: &PrioritizedPdrVector) -> f64 {
    let p = &pv.p;
    let n = p.len();
    let mut slots = 0.0;
    let mut fail_prefix = 1.0; // prod_{j=1}^{i} (1 - P_j)
    for i in 1..n {
        fail_prefix *= 1.0 - p[i - 1];
        slots += i as f64 * p[i] * fail_prefix;
    }
    fail_prefix *= 1.0 - p[n - 1];
    slots += n as f64 * fail_prefix;
    slots * pv.slot_ms
}

/// Independent expectation oracle: enumerates the disjoint outcomes "first
/// receiver has priority k" (k-1 slots) and "none receives" (n slots).
pub fn relay_delay_oracle(pv: &PrioritizedPdrVector) -> f64 {
    let p = &pv.p;
    let n = p.len();
    let mut expected_slots = 0.0;
    let mut none_before = 1.0; // prod_{j<k} (1 - P_j)
    for (k, &pk) in p.iter().enumerate() {
        expected_slots += k as f64 * pk * none_before;
        none_before *= 1.0 - pk;
    }
    expected_slots += n as f64 * none_before;
    expected_slots * pv.slot_ms
}

/// Exact delay reduction when `P_i` rises by `delta_p`:
/// `DT(p) - DT(p with P_i + delta_p)`. Positive, and exactly linear in
/// `delta_p` because the delay is multilinear in each `P_i`.
pub fn sensitivity_exact(
    pv: &PrioritizedPdrVector,
    i: usize,
    delta_p: f64,
) -> Result<f64, DelayError> {
    let bumped = pv.perturbed(i, delta_p)?;
    Ok(expected_relay_delay(pv) - expected_relay_delay(&bumped))
}

/// The case-split single-index closed form:
///
/// ```text
/// i == 1:      (1-P_2) * [ sum_{j=2}^{n-1} j P_{j+1} prod_{k=3}^{n-1}(1-P_k)
///                          + n prod_{k=3}^{n}(1-P_k) ] * dP * T
/// 1 < i < n:   prod_{j=1}^{i-1}(1-P_j)
///              * [ sum_{j=i}^{n-1} j P_{j+1} prod_{k=i+1}^{n-1}(1-P_k)
///                  + n prod_{k=i+1}^{n}(1-P_k) - (i-1) ] * dP * T
/// ```
///
/// No branch exists for `i = n`. Empty products are 1, empty sums 0. This is
/// reported for comparison only; [`sensitivity_exact`] is authoritative and
/// the two are known to disagree.
pub fn sensitivity_closed(
    pv: &PrioritizedPdrVector,
    i: usize,
    delta_p: f64,
) -> Result<f64, DelayError> {
    pv.check_index(i)?;
    if delta_p < 0.0 {
        return Err(DelayError::InvalidPerturbation(delta_p));
    }
    let n = pv.len();
    if i == n {
        return Err(DelayError::ClosedFormUnsupported { index: i });
    }
    let prod = |from: usize, to: usize| -> f64 {
        (from..=to.min(n)).map(|k| 1.0 - pv.pdr_at(k)).product()
    };
    let bracket = if i == 1 {
        let sum: f64 = (2..n).map(|j| j as f64 * pv.pdr_at(j + 1) * prod(3, n - 1)).sum();
        (1.0 - pv.pdr_at(2)) * (sum + n as f64 * prod(3, n))
    } else {
        let sum: f64 = (i..n)
            .map(|j| j as f64 * pv.pdr_at(j + 1) * prod(i + 1, n - 1))
            .sum();
        prod(1, i - 1) * (sum + n as f64 * prod(i + 1, n) - (i as f64 - 1.0))
    };
    Ok(bracket * delta_p * pv.slot_ms)
}

/// Exact and closed-form sensitivity side by side.
pub fn sensitivity_report(
    pv: &PrioritizedPdrVector,
    i: usize,
    delta_p: f64,
) -> Result<SensitivityReport, DelayError> {
    let exact = sensitivity_exact(pv, i, delta_p)?;
    let closed = match sensitivity_closed(pv, i, delta_p) {
        Ok(v) => Some(v),
        Err(DelayError::ClosedFormUnsupported { .. }) => None,
        Err(e) => return Err(e),
    };
    Ok(SensitivityReport {
        index: i,
        pair_index: None,
        delta_p,
        exact_delta: exact,
        closed_form_delta: closed,
        phi: None,
        agrees: closed.map(|c| within_rtol(exact, c)),
    })
}

fn check_pair(pv: &PrioritizedPdrVector, i: usize, j: usize) -> Result<(), DelayError> {
    pv.check_index(i)?;
    pv.check_index(j)?;
    if i >= j {
        return Err(DelayError::InvalidPair { i, j });
    }
    Ok(())
}

/// Exact gap between two sensitivities:
/// `sensitivity_exact(i) - sensitivity_exact(j)` for `i < j`.
pub fn pairwise_sensitivity_gap(
    pv: &PrioritizedPdrVector,
    i: usize,
    j: usize,
    delta_p: f64,
) -> Result<f64, DelayError> {
    check_pair(pv, i, j)?;
    Ok(sensitivity_exact(pv, i, delta_p)? - sensitivity_exact(pv, j, delta_p)?)
}

/// Adjacent-pair closed form:
///
/// ```text
/// prod_{j=1}^{i-1}(1-P_j) * [1 + (P_i - P_{i+1}) * B(i+2)] * dP * T
/// B(k) = 1 + (1-P_k) B(k+1),  B(n) = 2 - P_n,  B(n+1) = 1
/// ```
fn adjacent_gap_closed(pv: &PrioritizedPdrVector, i: usize, delta_p: f64) -> f64 {
    let n = pv.len();
    let chain = |from: usize| -> f64 {
        if from > n {
            return 1.0;
        }
        let mut b = 2.0 - pv.pdr_at(n);
        for k in (from..n).rev() {
            b = 1.0 + (1.0 - pv.pdr_at(k)) * b;
        }
        b
    };
    let prefix: f64 = (1..i).map(|k| 1.0 - pv.pdr_at(k)).product();
    prefix * (1.0 + (pv.pdr_at(i) - pv.pdr_at(i + 1)) * chain(i + 2)) * delta_p * pv.slot_ms
}

/// Pairwise closed form: the telescoped sum of adjacent-pair closed forms
/// over `k = i..j-1`.
pub fn pairwise_sensitivity_closed(
    pv: &PrioritizedPdrVector,
    i: usize,
    j: usize,
    delta_p: f64,
) -> Result<f64, DelayError> {
    check_pair(pv, i, j)?;
    if delta_p < 0.0 {
        return Err(DelayError::InvalidPerturbation(delta_p));
    }
    Ok((i..j).map(|k| adjacent_gap_closed(pv, k, delta_p)).sum())
}

/// Exact pairwise gap, closed form, and the dominance ratio side by side.
pub fn pairwise_sensitivity_report(
    pv: &PrioritizedPdrVector,
    i: usize,
    j: usize,
    delta_p: f64,
) -> Result<SensitivityReport, DelayError> {
    let exact = pairwise_sensitivity_gap(pv, i, j, delta_p)?;
    let closed = pairwise_sensitivity_closed(pv, i, j, delta_p)?;
    let phi_value = phi(pv, i, j).ok();
    Ok(SensitivityReport {
        index: i,
        pair_index: Some(j),
        delta_p,
        exact_delta: exact,
        closed_form_delta: Some(closed),
        phi: phi_value,
        agrees: Some(within_rtol(exact, closed)),
    })
}

/// The dominance threshold ratio
///
/// ```text
/// phi(i,j) = (1 + (2-P_{j-1}) prod_{k=i+1}^{j-2}(1-P_k))
///          / ((2-P_{j+1}) prod_{k=i+1}^{j-1}(1-P_k))
/// ```
///
/// Exceeds 1 for every valid input; since `P_j - P_i < 1` always, the gap
/// between sensitivities stays positive even when `P_i < P_j`. Needs
/// `j + 1 <= n` for the trailing term. Returns `+inf` when the denominator
/// product collapses at the `P = 1` boundary.
pub fn phi(pv: &PrioritizedPdrVector, i: usize, j: usize) -> Result<f64, DelayError> {
    check_pair(pv, i, j)?;
    if j + 1 > pv.len() {
        return Err(DelayError::InvalidPair { i, j });
    }
    let prod = |from: usize, to_incl: isize| -> f64 {
        if to_incl < from as isize {
            return 1.0;
        }
        (from..=to_incl as usize).map(|k| 1.0 - pv.pdr_at(k)).product()
    };
    let numerator = 1.0 + (2.0 - pv.pdr_at(j - 1)) * prod(i + 1, j as isize - 2);
    let denominator = (2.0 - pv.pdr_at(j + 1)) * prod(i + 1, j as isize - 1);
    Ok(numerator / denominator)
}
