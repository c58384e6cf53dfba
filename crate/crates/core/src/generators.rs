//! Built-in test instances.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::graph::{Graph, NodeId};

pub fn path(n: usize) -> Graph {
    Graph::from_edges(n, (1..n).map(|v| (v - 1, v))).expect("path is connected")
}

pub fn cycle(n: usize) -> Graph {
    assert!(n >= 3, "cycle needs at least 3 nodes");
    Graph::from_edges(n, (0..n).map(|v| (v, (v + 1) % n))).expect("cycle is connected")
}

pub fn clique(n: usize) -> Graph {
    let edges = (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v)));
    Graph::from_edges(n, edges).expect("clique is connected")
}

/// Two `size`-cliques on `0..size` and `size..2*size`, joined by the single
/// edge `(size - 1, size)`.
pub fn two_clique_bridge(size: usize) -> Graph {
    assert!(size >= 2);
    let block = |offset: usize| (0..size).flat_map(move |u| (u + 1..size).map(move |v| (u + offset, v + offset)));
    let edges = block(0).chain(block(size)).chain(std::iter::once((size - 1, size)));
    Graph::from_edges(2 * size, edges).expect("bridged cliques are connected")
}

/// Random connected graph: a random recursive spanning tree plus uniformly
/// random extra edges until the average degree reaches `avg_degree` (or the
/// graph is complete).
pub fn random_connected(n: usize, avg_degree: f64, seed: u64) -> Graph {
    assert!(n >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges: Vec<(NodeId, NodeId)> = (1..n).map(|v| (rng.random_range(0..v), v)).collect();
    let max_edges = n * (n - 1) / 2;
    let target = ((avg_degree * n as f64 / 2.0).round() as usize).clamp(n - 1, max_edges);
    let mut present: std::collections::HashSet<(NodeId, NodeId)> =
        edges.iter().map(|&(u, v)| (u.min(v), u.max(v))).collect();
    while present.len() < target {
        let u = rng.random_range(0..n);
        let v = rng.random_range(0..n);
        if u != v && present.insert((u.min(v), u.max(v))) {
            edges.push((u, v));
        }
    }
    Graph::from_edges(n, edges).expect("spanning tree keeps the graph connected")
}

/// Zachary's karate club network (34 nodes, 78 edges), zero-indexed.
pub fn karate() -> Graph {
    const ROWS: &[(usize, &[usize])] = &[
        (1, &[2, 3, 4, 5, 6, 7, 8, 9, 11, 12, 13, 14, 18, 20, 22, 32]),
        (2, &[3, 4, 8, 14, 18, 20, 22, 31]),
        (3, &[4, 8, 9, 10, 14, 28, 29, 33]),
        (4, &[8, 13, 14]),
        (5, &[7, 11]),
        (6, &[7, 11, 17]),
        (7, &[17]),
        (9, &[31, 33, 34]),
        (10, &[34]),
        (14, &[34]),
        (15, &[33, 34]),
        (16, &[33, 34]),
        (19, &[33, 34]),
        (20, &[34]),
        (21, &[33, 34]),
        (23, &[33, 34]),
        (24, &[26, 28, 30, 33, 34]),
        (25, &[26, 28, 32]),
        (26, &[32]),
        (27, &[30, 34]),
        (28, &[34]),
        (29, &[32, 34]),
        (30, &[33, 34]),
        (31, &[33, 34]),
        (32, &[33, 34]),
        (33, &[34]),
    ];
    let edges = ROWS.iter().flat_map(|&(u, vs)| vs.iter().map(move |&v| (u - 1, v - 1)));
    Graph::from_edges(34, edges).expect("karate club is connected")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn karate_shape() {
        let g = karate();
        assert_eq!((g.node_count(), g.edge_count()), (34, 78));
        assert_eq!(g.degree(0), 16);
        assert_eq!(g.degree(33), 17);
        assert_eq!(g.degree(32), 12);
    }

    #[test]
    fn two_clique_counts() {
        let g = two_clique_bridge(20);
        assert_eq!(g.edge_count(), 2 * 190 + 1);
        let side: crate::graph::NodeSet = (0..20).collect();
        assert_eq!(g.volume(&side), 381);
        assert_eq!(g.cheeger_ratio(&side).unwrap(), crate::graph::Rational::new(1, 381));
    }

    #[test]
    fn random_connected_is_reproducible() {
        let a = random_connected(50, 4.0, 9);
        let b = random_connected(50, 4.0, 9);
        assert_eq!(a, b);
        assert_eq!(a.edge_count(), 100);
    }
}
