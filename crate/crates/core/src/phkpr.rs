//! Token-passing heat kernel pagerank estimation as a CONGEST protocol.
//!
//! The seed launches `r` tokens whose walk lengths are `min(Poisson(t), K)`,
//! drawn before round 1. In round `j` every token with steps left moves to a
//! uniformly random neighbor; a token whose steps are used up stays where it
//! is for the remaining rounds. After `K` rounds node `v` reports `C_v / r`.
//!
//! Identical tokens travel together: all tokens at a node with the same
//! number of remaining steps form one [`TokenBatch`], split across neighbors
//! by a multinomial draw, so at most `K` batch messages cross an edge per
//! round.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Binomial, Distribution};

use crate::congest::{bits_for, run_protocol, NodeContext, Outbox, Payload, Protocol, RoundStats, SimConfig};
use crate::graph::{Graph, NodeId};
use crate::hkpr::{
    self, check_time, exact_phkpr, sample_length_histogram, serial_estimate_phkpr, PhkprVector, WalkParams,
};
use crate::rng::{self, domain};
use crate::{invalid, Result};

/// `count` identical tokens with `remaining_steps` steps left.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TokenBatch {
    pub remaining_steps: u64,
    pub count: u64,
    /// Encoded width in bits: enough for any step value and any count.
    width: u64,
}

impl Payload for TokenBatch {
    fn bit_size(&self) -> u64 {
        self.width
    }
}

#[derive(Debug, Clone, Default)]
pub struct TokenState {
    /// Live tokens keyed by remaining steps (always ≥ 1).
    live: BTreeMap<u64, u64>,
    retired: u64,
    rounds_done: u64,
}

/// The estimation protocol. Nodes know `r`, `K` and `t` as shared metadata.
#[derive(Debug, Clone)]
pub struct EstimateProtocol {
    pub seed: NodeId,
    pub t: f64,
    pub params: WalkParams,
    pub rng_seed: u64,
    stop_after: u64,
}

impl EstimateProtocol {
    pub fn new(seed: NodeId, t: f64, params: WalkParams, rng_seed: u64) -> Self {
        EstimateProtocol {
            seed,
            t,
            params,
            rng_seed,
            stop_after: params.step_cap,
        }
    }

    /// Halts after `rounds` rounds instead of `K`; used to inspect
    /// intermediate token placement.
    pub fn stopping_after(mut self, rounds: u64) -> Self {
        self.stop_after = rounds.min(self.params.step_cap);
        self
    }

    fn batch(&self, remaining_steps: u64, count: u64) -> TokenBatch {
        TokenBatch {
            remaining_steps,
            count,
            width: bits_for(self.params.step_cap) + bits_for(self.params.tokens),
        }
    }
}

/// Tokens resident at a node when the protocol stops.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct NodeTokens {
    pub live: u64,
    pub retired: u64,
}

impl Protocol for EstimateProtocol {
    type State = TokenState;
    type Msg = TokenBatch;
    type Output = NodeTokens;

    fn init(&self, ctx: &NodeContext<'_>) -> TokenState {
        let mut state = TokenState::default();
        if ctx.id == self.seed {
            let mut rng = rng::stream(self.rng_seed, &[domain::SEED_LENGTHS]);
            let hist = sample_length_histogram(self.t, self.params.step_cap, self.params.tokens, &mut rng);
            state.retired = hist[0];
            for (steps, &count) in hist.iter().enumerate().skip(1) {
                if count > 0 {
                    state.live.insert(steps as u64, count);
                }
            }
        }
        state
    }

    fn send(&self, ctx: &NodeContext<'_>, round: u64, state: &mut TokenState, out: &mut Outbox<TokenBatch>) {
        let live = std::mem::take(&mut state.live);
        let degree = ctx.degree();
        for (steps, count) in live {
            if degree == 0 {
                // Nowhere to go on a single-node network: the walk stays put.
                *state.live.entry(steps - 1).or_default() += count;
                continue;
            }
            let mut rng = rng::stream(self.rng_seed, &[domain::TOKEN_SPLIT, round, ctx.id as u64, steps]);
            let mut left = count;
            for (i, &nbr) in ctx.neighbors.iter().enumerate() {
                let share = if i + 1 == degree {
                    left
                } else {
                    multinomial_cell(left, degree - i, &mut rng)
                };
                if share > 0 {
                    out.send(nbr, self.batch(steps - 1, share));
                    left -= share;
                }
                if left == 0 {
                    break;
                }
            }
        }
        if let Some(stay) = state.live.remove(&0) {
            state.retired += stay;
        }
    }

    fn receive(&self, _: &NodeContext<'_>, round: u64, state: &mut TokenState, inbox: Vec<(NodeId, TokenBatch)>) {
        for (_, batch) in inbox {
            if batch.remaining_steps == 0 {
                state.retired += batch.count;
            } else {
                *state.live.entry(batch.remaining_steps).or_default() += batch.count;
            }
        }
        state.rounds_done = round;
    }

    fn is_done(&self, _: &NodeContext<'_>, state: &TokenState) -> bool {
        state.rounds_done >= self.stop_after
    }

    fn output(&self, _: &NodeContext<'_>, state: TokenState) -> NodeTokens {
        NodeTokens {
            live: state.live.values().sum(),
            retired: state.retired,
        }
    }
}

/// One cell of a uniform multinomial split: `Binomial(left, 1/cells)`.
fn multinomial_cell<R: Rng + ?Sized>(left: u64, cells: usize, rng: &mut R) -> u64 {
    Binomial::new(left, 1.0 / cells as f64)
        .expect("valid binomial")
        .sample(rng)
}

#[derive(Debug, Clone)]
pub struct DistributedEstimate {
    pub vector: PhkprVector,
    pub stats: RoundStats,
    pub params: WalkParams,
}

/// Runs the estimation protocol from `seed` and collects `C_v / r`.
pub fn estimate_phkpr_distributed(
    g: &Graph,
    seed: NodeId,
    t: f64,
    eps: f64,
    c: f64,
    config: &SimConfig,
) -> Result<DistributedEstimate> {
    g.check_node(seed)?;
    check_time(t)?;
    let params = hkpr::walk_parameters(g.node_count(), eps, c)?;
    let protocol = EstimateProtocol::new(seed, t, params, config.seed);
    let (outputs, stats) = run_protocol(g, &protocol, config)?;
    let counts = outputs
        .iter()
        .enumerate()
        .map(|(v, tokens)| (v, tokens.live + tokens.retired));
    Ok(DistributedEstimate {
        vector: PhkprVector::from_counts(seed, t, counts),
        stats,
        params,
    })
}

/// Whether every supported node lies within `radius` hops of the seed.
pub fn support_within_ball(g: &Graph, vector: &PhkprVector, radius: u64) -> bool {
    let dist = g.bfs_distances(vector.seed);
    vector.support().all(|v| dist[v].is_some_and(|d| d as u64 <= radius))
}

/// Largest graph accepted by [`distribution_equivalence_check`].
pub const EQUIVALENCE_MAX_NODES: usize = 50;

/// Empirical comparison of the serial and distributed estimators.
#[derive(Debug, Clone, PartialEq)]
pub struct EquivalenceReport {
    pub exact: Vec<f64>,
    pub serial_mean: Vec<f64>,
    pub distributed_mean: Vec<f64>,
    pub serial_max_deviation: f64,
    pub distributed_max_deviation: f64,
}

/// Averages both estimators over `trials` seeds (`base_seed + i`) and
/// measures each mean's largest per-node deviation from the exact vector.
#[allow(clippy::too_many_arguments)]
pub fn distribution_equivalence_check(
    g: &Graph,
    seed: NodeId,
    t: f64,
    eps: f64,
    c: f64,
    trials: u64,
    base_seed: u64,
    config: &SimConfig,
) -> Result<EquivalenceReport> {
    let n = g.node_count();
    if n > EQUIVALENCE_MAX_NODES {
        return Err(invalid(format!(
            "equivalence check is limited to {EQUIVALENCE_MAX_NODES} nodes, graph has {n}"
        )));
    }
    if trials == 0 {
        return Err(invalid("at least one trial is required"));
    }
    let exact = exact_phkpr(g, seed, t, 1e-12)?.to_dense(n);
    let mut serial_mean = vec![0.0; n];
    let mut distributed_mean = vec![0.0; n];
    for i in 0..trials {
        let run_seed = base_seed.wrapping_add(i);
        let serial = serial_estimate_phkpr(g, seed, t, eps, c, run_seed)?;
        let dist = estimate_phkpr_distributed(g, seed, t, eps, c, &config.clone().with_seed(run_seed))?;
        for v in 0..n {
            serial_mean[v] += serial.value(v) / trials as f64;
            distributed_mean[v] += dist.vector.value(v) / trials as f64;
        }
    }
    let max_dev = |mean: &[f64]| mean.iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    Ok(EquivalenceReport {
        serial_max_deviation: max_dev(&serial_mean),
        distributed_max_deviation: max_dev(&distributed_mean),
        exact,
        serial_mean,
        distributed_mean,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::congest::CongestionMode;
    use crate::generators;

    fn cfg(g: &Graph, seed: u64) -> SimConfig {
        SimConfig::for_graph(g.node_count(), seed)
    }

    #[test]
    fn zero_time_never_moves_tokens() {
        let g = generators::karate();
        let est = estimate_phkpr_distributed(&g, 4, 0.0, 0.1, 1.0, &cfg(&g, 3)).unwrap();
        assert_eq!(est.vector.entries(), &[(4, 1.0)]);
        assert_eq!(est.stats.rounds, est.params.step_cap);
        assert_eq!(est.stats.rounds, 6);
        assert_eq!(est.stats.total_messages, 0);
    }

    #[test]
    fn conserves_tokens_every_round() {
        let g = generators::random_connected(60, 4.0, 1);
        let params = hkpr::walk_parameters(60, 0.2, 1.0).unwrap();
        for j in 0..=params.step_cap {
            let proto = EstimateProtocol::new(7, 2.5, params, 99).stopping_after(j);
            let (out, stats) = run_protocol(&g, &proto, &cfg(&g, 99)).unwrap();
            let total: u64 = out.iter().map(|x| x.live + x.retired).sum();
            assert_eq!(total, params.tokens, "round {j}");
            assert_eq!(stats.logical_rounds, j);
        }
    }

    #[test]
    fn sums_to_one_and_stays_local() {
        let g = generators::cycle(50);
        let est = estimate_phkpr_distributed(&g, 10, 8.0, 0.4, 1.0, &cfg(&g, 5)).unwrap();
        let counts: u64 = est.vector.token_counts().unwrap().map(|(_, c)| c).sum();
        assert_eq!(counts, est.params.tokens);
        assert!(support_within_ball(&g, &est.vector, est.params.step_cap));
        // K = 2 here, so long walks end at most two hops away.
        assert_eq!(est.params.step_cap, 2);
        assert!(est.vector.value(12) > 0.0 && est.vector.value(13) == 0.0);
        assert!(est.vector.value(8) > 0.0 && est.vector.value(7) == 0.0);
    }

    #[test]
    fn uncongested_rounds_equal_step_cap() {
        for n in [2usize, 30, 200] {
            let g = generators::random_connected(n, 3.0, n as u64);
            for &t in &[1.0, 10.0, 100.0] {
                let est = estimate_phkpr_distributed(&g, 0, t, 0.1, 1.0, &cfg(&g, 8)).unwrap();
                assert_eq!(est.stats.rounds, 6);
            }
        }
    }

    #[test]
    fn strict_mode_rounds_bounded() {
        let g = generators::random_connected(100, 4.0, 4);
        let config = cfg(&g, 2).with_mode(CongestionMode::Strict);
        let est = estimate_phkpr_distributed(&g, 0, 4.0, 0.2, 1.0, &config).unwrap();
        let batch_bits = bits_for(est.params.step_cap) + bits_for(est.params.tokens);
        let per_round = (est.params.tokens * batch_bits).div_ceil(config.bandwidth_bits);
        assert!(est.stats.rounds >= est.params.step_cap);
        assert!(est.stats.rounds <= est.params.step_cap * per_round);
        assert!(est.stats.congestion_events > 0);
    }

    #[test]
    fn deterministic_under_same_seed() {
        let g = generators::karate();
        let a = estimate_phkpr_distributed(&g, 0, 3.0, 0.2, 1.0, &cfg(&g, 42)).unwrap();
        let b = estimate_phkpr_distributed(&g, 0, 3.0, 0.2, 1.0, &cfg(&g, 42)).unwrap();
        let c = estimate_phkpr_distributed(&g, 0, 3.0, 0.2, 1.0, &cfg(&g, 43)).unwrap();
        assert_eq!(a.vector, b.vector);
        assert_eq!(a.stats, b.stats);
        assert_ne!(a.vector, c.vector);
    }

    #[test]
    fn equivalence_on_single_edge() {
        let g = generators::path(2);
        let t = 2f64.ln();
        let report = distribution_equivalence_check(&g, 0, t, 0.1, 1.0, 200, 1000, &cfg(&g, 0)).unwrap();
        assert!((report.exact[0] - 0.625).abs() < 1e-12);
        assert!((report.serial_mean[0] - 0.625).abs() < 0.02, "{report:?}");
        assert!((report.distributed_mean[0] - 0.625).abs() < 0.02, "{report:?}");
    }

    #[test]
    fn equivalence_at_zero_time_is_exact() {
        let g = generators::clique(5);
        let report = distribution_equivalence_check(&g, 2, 0.0, 0.3, 1.0, 3, 0, &cfg(&g, 0)).unwrap();
        assert_eq!(report.serial_mean, report.distributed_mean);
        assert_eq!(report.serial_max_deviation, 0.0);
    }

    #[test]
    fn equivalence_rejects_large_graphs() {
        let g = generators::cycle(51);
        assert!(distribution_equivalence_check(&g, 0, 1.0, 0.3, 1.0, 1, 0, &cfg(&g, 0)).is_err());
    }

    #[test]
    fn single_node_network() {
        let g = Graph::from_edges(1, []).unwrap();
        let est = estimate_phkpr_distributed(&g, 0, 5.0, 0.2, 1.0, &cfg(&g, 0)).unwrap();
        assert_eq!(est.vector.entries(), &[(0, 1.0)]);
    }
}
