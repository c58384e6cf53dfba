//! Undirected simple graphs over dense node IDs, edge-list ingestion and the
//! exact set statistics (volume, edge boundary, Cheeger ratio) that every
//! sweep in the crate is checked against.

use std::collections::VecDeque;
use std::fmt::Write as _;
use std::io::BufRead;

use num_rational::Ratio;
use thiserror::Error;

pub type NodeId = usize;

/// Exact nonnegative rational used for Cheeger ratios.
pub type Rational = Ratio<u64>;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GraphError {
    #[error("line {line}: self-loop on node {node}")]
    SelfLoop { line: usize, node: NodeId },
    #[error("line {line}: malformed edge {content:?}, expected two nonnegative node IDs")]
    Malformed { line: usize, content: String },
    #[error("graph has no edges")]
    Empty,
    #[error("graph is disconnected: node {unreachable} is unreachable from node {from}")]
    Disconnected { from: NodeId, unreachable: NodeId },
    #[error("edge ({u}, {v}) references a node outside 0..{n}")]
    OutOfRange { u: NodeId, v: NodeId, n: usize },
    #[error("failed to read edge list: {0}")]
    Io(String),
    #[error("Cheeger ratio undefined for a set of size {size} in a graph of {n} nodes")]
    CheegerUndefined { size: usize, n: usize },
    #[error("node {node} is not in the graph (n = {n})")]
    UnknownNode { node: NodeId, n: usize },
}

/// Connected, undirected, simple graph. Immutable after construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    adjacency: Vec<Vec<NodeId>>,
    edge_count: usize,
}

impl Graph {
    /// Builds a graph on nodes `0..n`. Duplicate edges (in either orientation)
    /// collapse to one; self-loops and disconnection are rejected.
    ///
    /// A single isolated node (`n == 1`, no edges) is accepted as the trivial
    /// connected graph.
    pub fn from_edges<I>(n: usize, edges: I) -> Result<Self, GraphError>
    where
        I: IntoIterator<Item = (NodeId, NodeId)>,
    {
        if n == 0 {
            return Err(GraphError::Empty);
        }
        let mut adjacency = vec![Vec::new(); n];
        for (u, v) in edges {
            if u >= n || v >= n {
                return Err(GraphError::OutOfRange { u, v, n });
            }
            if u == v {
                return Err(GraphError::SelfLoop { line: 0, node: u });
            }
            adjacency[u].push(v);
            adjacency[v].push(u);
        }
        Self::finish(adjacency)
    }

    fn finish(mut adjacency: Vec<Vec<NodeId>>) -> Result<Self, GraphError> {
        for list in &mut adjacency {
            list.sort_unstable();
            list.dedup();
        }
        let degree_sum: usize = adjacency.iter().map(Vec::len).sum();
        let graph = Graph {
            adjacency,
            edge_count: degree_sum / 2,
        };
        graph.check_connected()?;
        Ok(graph)
    }

    fn check_connected(&self) -> Result<(), GraphError> {
        let dist = self.bfs_distances(0);
        match dist.iter().position(Option::is_none) {
            Some(unreachable) => Err(GraphError::Disconnected { from: 0, unreachable }),
            None => Ok(()),
        }
    }

    pub fn node_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn degree(&self, v: NodeId) -> usize {
        self.adjacency[v].len()
    }

    pub fn max_degree(&self) -> usize {
        self.adjacency.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Sorted neighbor list of `v`.
    pub fn neighbors(&self, v: NodeId) -> &[NodeId] {
        &self.adjacency[v]
    }

    pub fn has_edge(&self, u: NodeId, v: NodeId) -> bool {
        u < self.node_count() && self.adjacency[u].binary_search(&v).is_ok()
    }

    pub fn contains(&self, v: NodeId) -> bool {
        v < self.node_count()
    }

    pub fn check_node(&self, v: NodeId) -> Result<(), GraphError> {
        if self.contains(v) {
            Ok(())
        } else {
            Err(GraphError::UnknownNode {
                node: v,
                n: self.node_count(),
            })
        }
    }

    /// Iterates each undirected edge once as `(u, v)` with `u < v`.
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(u, list)| list.iter().copied().filter(move |&v| u < v).map(move |v| (u, v)))
    }

    /// Hop distances from `source`; `None` marks unreachable nodes.
    pub fn bfs_distances(&self, source: NodeId) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.node_count()];
        let mut queue = VecDeque::new();
        dist[source] = Some(0);
        queue.push_back(source);
        while let Some(u) = queue.pop_front() {
            let next = dist[u].map(|d| d + 1);
            for &v in &self.adjacency[u] {
                if dist[v].is_none() {
                    dist[v] = next;
                    queue.push_back(v);
                }
            }
        }
        dist
    }

    /// Total volume `2m`.
    pub fn total_volume(&self) -> u64 {
        2 * self.edge_count as u64
    }

    pub fn volume(&self, set: &NodeSet) -> u64 {
        set.iter().map(|v| self.degree(v) as u64).sum()
    }

    /// Number of edges with exactly one endpoint in `set`, by direct scan.
    pub fn edge_boundary(&self, set: &NodeSet) -> u64 {
        let mask = set.mask(self.node_count());
        set.iter()
            .map(|u| self.adjacency[u].iter().filter(|&&v| !mask[v]).count() as u64)
            .sum()
    }

    /// `|E(S, S̄)| / min(vol(S), vol(S̄))` as an exact rational.
    pub fn cheeger_ratio(&self, set: &NodeSet) -> Result<Rational, GraphError> {
        let n = self.node_count();
        if set.is_empty() || set.len() >= n {
            return Err(GraphError::CheegerUndefined { size: set.len(), n });
        }
        let vol = self.volume(set);
        let denom = vol.min(self.total_volume() - vol);
        Ok(Rational::new(self.edge_boundary(set), denom))
    }

    /// Serializes to the edge-list text format, one `u v` line per edge.
    pub fn to_edge_list(&self) -> String {
        let mut out = String::new();
        for (u, v) in self.edges() {
            let _ = writeln!(out, "{u} {v}");
        }
        out
    }
}

/// Parses the whitespace-separated edge-list format. Lines starting with `#`
/// and blank lines are skipped. Node IDs must cover `0..=max` with no gaps,
/// which the connectivity check enforces.
pub fn load_edge_list<R: BufRead>(source: R) -> Result<Graph, GraphError> {
    let mut edges: Vec<(NodeId, NodeId)> = Vec::new();
    for (idx, line) in source.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| GraphError::Io(e.to_string()))?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let malformed = || GraphError::Malformed {
            line: line_no,
            content: trimmed.to_string(),
        };
        let mut fields = trimmed.split_whitespace();
        let (Some(a), Some(b), None) = (fields.next(), fields.next(), fields.next()) else {
            return Err(malformed());
        };
        let u: NodeId = a.parse().map_err(|_| malformed())?;
        let v: NodeId = b.parse().map_err(|_| malformed())?;
        if u == v {
            return Err(GraphError::SelfLoop { line: line_no, node: u });
        }
        edges.push((u, v));
    }
    let Some(max_id) = edges.iter().map(|&(u, v)| u.max(v)).max() else {
        return Err(GraphError::Empty);
    };
    // A connected graph has at most m + 1 nodes. Checking before allocating
    // keeps a single huge ID from exhausting memory. Contiguous IDs number at
    // most 2m, so those go through the normal reachability check.
    if max_id > edges.len() {
        if let Some(gap) = first_gap(&edges) {
            return Err(gap);
        }
    }
    let mut adjacency: Vec<Vec<NodeId>> = vec![Vec::new(); max_id + 1];
    for (u, v) in edges {
        adjacency[u].push(v);
        adjacency[v].push(u);
    }
    Graph::finish(adjacency)
}

/// Names an ID missing from the edge list, as seen from the smallest present one.
fn first_gap(edges: &[(NodeId, NodeId)]) -> Option<GraphError> {
    let mut ids: Vec<NodeId> = edges.iter().flat_map(|&(u, v)| [u, v]).collect();
    ids.sort_unstable();
    ids.dedup();
    let missing = ids.iter().enumerate().find(|&(i, &id)| i != id).map(|(i, _)| i)?;
    let from = if missing == 0 { ids[0] } else { 0 };
    Some(GraphError::Disconnected {
        from,
        unreachable: missing,
    })
}

pub fn parse_edge_list(text: &str) -> Result<Graph, GraphError> {
    load_edge_list(text.as_bytes())
}

/// A set of node IDs, kept sorted and deduplicated.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct NodeSet {
    members: Vec<NodeId>,
}

impl NodeSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, v: NodeId) -> bool {
        self.members.binary_search(&v).is_ok()
    }

    pub fn iter(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.members.iter().copied()
    }

    pub fn as_slice(&self) -> &[NodeId] {
        &self.members
    }

    /// `V ∖ self` for a graph of `n` nodes.
    pub fn complement(&self, n: usize) -> NodeSet {
        let mask = self.mask(n);
        (0..n).filter(|&v| !mask[v]).collect()
    }

    fn mask(&self, n: usize) -> Vec<bool> {
        let mut mask = vec![false; n];
        for &v in &self.members {
            if v < n {
                mask[v] = true;
            }
        }
        mask
    }
}

impl FromIterator<NodeId> for NodeSet {
    fn from_iter<T: IntoIterator<Item = NodeId>>(iter: T) -> Self {
        let mut members: Vec<NodeId> = iter.into_iter().collect();
        members.sort_unstable();
        members.dedup();
        NodeSet { members }
    }
}
