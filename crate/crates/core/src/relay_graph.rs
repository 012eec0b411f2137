//! Candidate relaying sets as graphs, and relaying-network recognition.
//!
//! A *relaying network* is a fully connected subset of the candidate relaying
//! set. Recognition works on per-node neighbor rows: bit `j` of node `i`'s
//! row is set when `i` and `j` share a bi-directional link, and every node is
//! a neighbor of itself. The D-operator ANDs the rows of a subset and counts
//! the surviving bits; comparing that count against the subset degree
//! classifies the subset as an o-network (maximal), an s-network (derived
//! from a larger one), or not a relaying network at all.
//!
//! The D-test admits false positives: a subset whose members share enough
//! *external* common neighbors can reach `D >= n` without being a clique.
//! [`CandidateGraph::classify_subset`] therefore also carries the exact
//! clique verdict, and selection downstream trusts only verified cliques.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use thiserror::Error;

/// Hard capacity of a [`CandidateGraph`]: neighbor rows are single `u64` words.
pub const MAX_GRAPH_NODES: usize = 64;

/// Default cap on the candidate-set size for exhaustive subset enumeration.
pub const DEFAULT_ENUMERATION_CAP: usize = 16;

/// Opaque node identifier, as written in edge-list files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<u32> for NodeId {
    fn from(v: u32) -> Self {
        NodeId(v)
    }
}

/// Errors from graph construction and relaying-network recognition.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("node {0} is not in the candidate graph")]
    NodeNotFound(NodeId),
    #[error("duplicate node {0}")]
    DuplicateNode(NodeId),
    #[error("self-loop on node {0} is not allowed")]
    SelfLoop(NodeId),
    #[error("graph has {count} nodes, at most {max} are supported")]
    TooManyNodes { count: usize, max: usize },
    #[error("neighbor rows have mismatched lengths ({0} vs {1})")]
    DimensionMismatch(usize, usize),
    #[error("need at least {min} nodes, got {got}")]
    DegreeTooSmall { got: usize, min: usize },
    #[error("candidate set of {count} nodes exceeds the enumeration cap {cap}; prune first")]
    CandidateSetTooLarge { count: usize, cap: usize },
    #[error("invalid degree range {min}..={max} for a {node_count}-node graph")]
    InvalidDegreeRange {
        min: usize,
        max: usize,
        node_count: usize,
    },
    #[error("edge list line {line}: {msg}")]
    EdgeListParse { line: usize, msg: String },
    #[error("failed to read {path}: {msg}")]
    Io { path: String, msg: String },
}

/// How a subset of the candidate set relates to the relaying-network family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NetworkKind {
    /// The D-test fell short of the subset degree.
    NotRelayingNetwork,
    /// D equals the subset degree: a maximal relaying network.
    ONetwork,
    /// D exceeds the subset degree: derived from a larger relaying network.
    SNetwork,
}

/// Outcome of the D-test on one subset, plus the exact clique verdict.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubsetClassification {
    pub kind: NetworkKind,
    /// Number of nodes in the subset (its network degree).
    pub subset_degree: usize,
    /// Popcount of the AND of the subset's neighbor rows.
    pub d_value: usize,
    /// Degree of the o-network an s-network derives from (`d_value`).
    pub parent_degree: Option<usize>,
    /// Number of same-degree s-networks derivable from that o-network,
    /// `C(parent_degree, subset_degree)`.
    pub relevant_s_count: Option<u64>,
    /// Exact full-connectivity check; the D-test alone can be fooled by
    /// external common neighbors.
    pub verified_clique: bool,
}

/// One node's neighbor row: bit `j` set when node `j` is adjacent or `j` is
/// the node itself.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NeighborRow {
    bits: u64,
    len: usize,
}

impl NeighborRow {
    /// Builds a row from raw bits; bits at or above `len` must be clear.
    pub fn new(bits: u64, len: usize) -> Self {
        debug_assert!(len <= MAX_GRAPH_NODES);
        debug_assert!(len == MAX_GRAPH_NODES || bits >> len == 0);
        NeighborRow { bits, len }
    }

    /// Builds a row from explicit booleans.
    pub fn from_bools(bools: &[bool]) -> Self {
        let mut bits = 0u64;
        for (i, &b) in bools.iter().enumerate() {
            if b {
                bits |= 1 << i;
            }
        }
        NeighborRow {
            bits,
            len: bools.len(),
        }
    }

    pub fn bits(&self) -> u64 {
        self.bits
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Whether position `pos` is set.
    pub fn is_set(&self, pos: usize) -> bool {
        pos < self.len && self.bits & (1 << pos) != 0
    }

    /// Positions of the set bits, ascending.
    pub fn set_positions(&self) -> Vec<usize> {
        (0..self.len).filter(|&i| self.is_set(i)).collect()
    }
}

/// Popcount of the bitwise AND across all rows: the D-operator generalized
/// to any number of neighbor rows.
pub fn d_sum(rows: &[NeighborRow]) -> Result<usize, GraphError> {
    if rows.len() < 2 {
        return Err(GraphError::DegreeTooSmall {
            got: rows.len(),
            min: 2,
        });
    }
    let len = rows[0].len;
    let mut acc = rows[0].bits;
    for row in &rows[1..] {
        if row.len != len {
            return Err(GraphError::DimensionMismatch(len, row.len));
        }
        acc &= row.bits;
    }
    Ok(acc.count_ones() as usize)
}

/// Undirected connectivity over a candidate relaying set.
///
/// Node-id-to-bit-position mapping is fixed by the order of `node_ids` and
/// never changes after construction. Adjacency is stored symmetric and
/// irreflexive; neighbor rows add the self-bit on top.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CandidateGraph {
    node_ids: Vec<NodeId>,
    index: BTreeMap<NodeId, usize>,
    /// Adjacency rows, self-bit clear.
    adjacency: Vec<u64>,
}

impl CandidateGraph {
    /// Creates an edgeless graph over the given nodes, preserving their order.
    pub fn new(nodes: impl IntoIterator<Item = NodeId>) -> Result<Self, GraphError> {
        let node_ids: Vec<NodeId> = nodes.into_iter().collect();
        if node_ids.len() > MAX_GRAPH_NODES {
            return Err(GraphError::TooManyNodes {
                count: node_ids.len(),
                max: MAX_GRAPH_NODES,
            });
        }
        let mut index = BTreeMap::new();
        for (i, &id) in node_ids.iter().enumerate() {
            if index.insert(id, i).is_some() {
                return Err(GraphError::DuplicateNode(id));
            }
        }
        let adjacency = vec![0u64; node_ids.len()];
        Ok(CandidateGraph {
            node_ids,
            index,
            adjacency,
        })
    }

    /// Creates a graph over `nodes` with the given undirected edges.
    pub fn from_edges(
        nodes: impl IntoIterator<Item = NodeId>,
        edges: impl IntoIterator<Item = (NodeId, NodeId)>,
    ) -> Result<Self, GraphError> {
        let mut g = Self::new(nodes)?;
        for (a, b) in edges {
            g.add_edge(a, b)?;
        }
        Ok(g)
    }

    /// Parses the plain-text edge-list format: one `a b` pair per line,
    /// `#` starts a comment, node ids are unsigned integers. The node set is
    /// every id mentioned, ordered ascending.
    pub fn from_edge_list_str(text: &str) -> Result<Self, GraphError> {
        let mut edges: Vec<(NodeId, NodeId)> = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let a = parts.next();
            let b = parts.next();
            let extra = parts.next();
            let (a, b) = match (a, b, extra) {
                (Some(a), Some(b), None) => (a, b),
                _ => {
                    return Err(GraphError::EdgeListParse {
                        line: lineno + 1,
                        msg: format!("expected `a b`, got `{line}`"),
                    })
                }
            };
            let parse = |s: &str| -> Result<NodeId, GraphError> {
                s.parse::<u32>().map(NodeId).map_err(|_| GraphError::EdgeListParse {
                    line: lineno + 1,
                    msg: format!("`{s}` is not an unsigned integer node id"),
                })
            };
            edges.push((parse(a)?, parse(b)?));
        }
        let mut ids: Vec<NodeId> = edges.iter().flat_map(|&(a, b)| [a, b]).collect();
        ids.sort();
        ids.dedup();
        Self::from_edges(ids, edges)
    }

    /// Reads the edge-list format from a file.
    pub fn from_edge_list_file(path: impl AsRef<Path>) -> Result<Self, GraphError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| GraphError::Io {
            path: path.display().to_string(),
            msg: e.to_string(),
        })?;
        Self::from_edge_list_str(&text)
    }

    /// Adds an undirected edge.
    pub fn add_edge(&mut self, a: NodeId, b: NodeId) -> Result<(), GraphError> {
        if a == b {
            return Err(GraphError::SelfLoop(a));
        }
        let ia = self.index_of(a)?;
        let ib = self.index_of(b)?;
        self.adjacency[ia] |= 1 << ib;
        self.adjacency[ib] |= 1 << ia;
        Ok(())
    }

    /// Nodes in bit-position order.
    pub fn nodes(&self) -> &[NodeId] {
        &self.node_ids
    }

    pub fn node_count(&self) -> usize {
        self.node_ids.len()
    }

    pub fn contains(&self, node: NodeId) -> bool {
        self.index.contains_key(&node)
    }

    fn index_of(&self, node: NodeId) -> Result<usize, GraphError> {
        self.index
            .get(&node)
            .copied()
            .ok_or(GraphError::NodeNotFound(node))
    }

    /// Whether `a` and `b` share a bi-directional link.
    pub fn is_adjacent(&self, a: NodeId, b: NodeId) -> Result<bool, GraphError> {
        let ia = self.index_of(a)?;
        let ib = self.index_of(b)?;
        Ok(self.adjacency[ia] & (1 << ib) != 0)
    }

    /// Number of undirected edges.
    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(|r| r.count_ones() as usize).sum::<usize>() / 2
    }

    /// The node's neighbor row: its adjacency bits plus the self-bit.
    pub fn neighbor_row(&self, node: NodeId) -> Result<NeighborRow, GraphError> {
        let i = self.index_of(node)?;
        Ok(NeighborRow::new(
            self.adjacency[i] | (1 << i),
            self.node_ids.len(),
        ))
    }

    fn subset_mask(&self, subset: &[NodeId]) -> Result<u64, GraphError> {
        let mut mask = 0u64;
        for &id in subset {
            let i = self.index_of(id)?;
            let bit = 1 << i;
            if mask & bit != 0 {
                return Err(GraphError::DuplicateNode(id));
            }
            mask |= bit;
        }
        Ok(mask)
    }

    /// Exact full-connectivity test: every unordered pair in `subset` is
    /// adjacent.
    pub fn is_clique(&self, subset: &[NodeId]) -> Result<bool, GraphError> {
        let mask = self.subset_mask(subset)?;
        Ok(self.is_clique_mask(mask))
    }

    fn is_clique_mask(&self, mask: u64) -> bool {
        let mut rest = mask;
        while rest != 0 {
            let i = rest.trailing_zeros() as usize;
            rest &= rest - 1;
            // The row must cover every subset member except where only the
            // self-bit stands in, which it does by construction.
            if (self.adjacency[i] | (1 << i)) & mask != mask {
                return false;
            }
        }
        true
    }

    /// Runs the D-test on a subset and classifies it as o-network, s-network,
    /// or not a relaying network, carrying the exact clique verdict alongside.
    pub fn classify_subset(&self, subset: &[NodeId]) -> Result<SubsetClassification, GraphError> {
        if subset.len() < 2 {
            return Err(GraphError::DegreeTooSmall {
                got: subset.len(),
                min: 2,
            });
        }
        let mask = self.subset_mask(subset)?;
        let mut acc = u64::MAX;
        for &id in subset {
            let i = self.index_of(id)?;
            acc &= self.adjacency[i] | (1 << i);
        }
        let d_value = acc.count_ones() as usize;
        let m = subset.len();
        let (kind, parent_degree, relevant_s_count) = if d_value < m {
            (NetworkKind::NotRelayingNetwork, None, None)
        } else if d_value == m {
            (NetworkKind::ONetwork, None, None)
        } else {
            (
                NetworkKind::SNetwork,
                Some(d_value),
                Some(binomial(d_value as u64, m as u64)),
            )
        };
        Ok(SubsetClassification {
            kind,
            subset_degree: m,
            d_value,
            parent_degree,
            relevant_s_count,
            verified_clique: self.is_clique_mask(mask),
        })
    }

    /// The subgraph induced by `keep`, preserving this graph's node order.
    pub fn induced_subgraph(&self, keep: &[NodeId]) -> Result<CandidateGraph, GraphError> {
        let mask = self.subset_mask(keep)?;
        let nodes: Vec<NodeId> = self
            .node_ids
            .iter()
            .enumerate()
            .filter(|(i, _)| mask & (1 << i) != 0)
            .map(|(_, &id)| id)
            .collect();
        let mut edges = Vec::new();
        for (a_pos, &a) in nodes.iter().enumerate() {
            for &b in &nodes[a_pos + 1..] {
                if self.is_adjacent(a, b)? {
                    edges.push((a, b));
                }
            }
        }
        Self::from_edges(nodes, edges)
    }

    /// Enumerates every verified relaying network (clique) with degree in
    /// `min_degree..=max_degree`, under the default enumeration cap.
    ///
    /// Output order is deterministic: by size, then lexicographic over the
    /// sorted node ids.
    pub fn enumerate_relaying_networks(
        &self,
        min_degree: usize,
        max_degree: usize,
    ) -> Result<Vec<Vec<NodeId>>, GraphError> {
        self.enumerate_relaying_networks_capped(min_degree, max_degree, DEFAULT_ENUMERATION_CAP)
    }

    /// [`Self::enumerate_relaying_networks`] with an explicit candidate-set cap.
    pub fn enumerate_relaying_networks_capped(
        &self,
        min_degree: usize,
        max_degree: usize,
        cap: usize,
    ) -> Result<Vec<Vec<NodeId>>, GraphError> {
        let m = self.node_ids.len();
        if m > cap {
            return Err(GraphError::CandidateSetTooLarge { count: m, cap });
        }
        if min_degree < 2 || min_degree > max_degree || max_degree > m.max(2) {
            return Err(GraphError::InvalidDegreeRange {
                min: min_degree,
                max: max_degree,
                node_count: m,
            });
        }
        let mut found: Vec<Vec<NodeId>> = Vec::new();
        for mask in 1u64..(1u64 << m) {
            let size = mask.count_ones() as usize;
            if size < min_degree || size > max_degree {
                continue;
            }
            if self.is_clique_mask(mask) {
                let mut ids: Vec<NodeId> = (0..m)
                    .filter(|&i| mask & (1 << i) != 0)
                    .map(|i| self.node_ids[i])
                    .collect();
                ids.sort();
                found.push(ids);
            }
        }
        found.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
        Ok(found)
    }
}

/// Binomial coefficient `C(n, k)` without overflow for `n <= 64`.
pub fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc as u64
}

/// Number of relaying networks derivable from an `n`-node fully connected
/// candidate set, counting degrees `2..=n-1`: `sum_{i=2}^{n-1} C(n, i)`.
///
/// The sum stops at `n-1`, excluding the n-degree o-network itself; see
/// [`total_network_count`] for the count that includes it.
pub fn expected_network_count(n: usize) -> Result<u64, GraphError> {
    if n < 3 {
        return Err(GraphError::DegreeTooSmall { got: n, min: 3 });
    }
    Ok((2..n).map(|i| binomial(n as u64, i as u64)).sum())
}

/// Count of all relaying networks in an `n`-clique including the n-degree
/// o-network itself: `sum_{i=2}^{n} C(n, i)`.
pub fn total_network_count(n: usize) -> Result<u64, GraphError> {
    if n < 2 {
        return Err(GraphError::DegreeTooSmall { got: n, min: 2 });
    }
    Ok((2..=n).map(|i| binomial(n as u64, i as u64)).sum())
}
