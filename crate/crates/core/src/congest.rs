//! Round-synchronous CONGEST execution engine.
//!
//! A round has two halves: every node emits an outbox, then every node
//! consumes the messages addressed to it. Messages sent in a round are
//! received by the end of that same round. Messages may only travel along
//! graph edges; each directed edge carries `bandwidth_bits` per round.
//!
//! Two ledgers are kept for overload. In [`CongestionMode::Strict`] a round in
//! which some edge carries `b > bandwidth_bits` bits is charged
//! `⌈b / bandwidth_bits⌉` rounds. In [`CongestionMode::Paper`] every logical
//! round costs one, and the overload only shows up in `max_edge_bits`.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::graph::{Graph, NodeId};

/// Environment variable overriding the default round cap.
pub const ROUND_CAP_ENV: &str = "DHKPR_ROUND_CAP";
pub const DEFAULT_ROUND_CAP: u64 = 1_000_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SimError {
    #[error("non-termination suspected: protocol still running after {cap} rounds")]
    NonTermination { cap: u64 },
    #[error("round {round}: node {from} addressed non-neighbor {to}")]
    NotNeighbor { round: u64, from: NodeId, to: NodeId },
}

/// Semantic size of a message in bits.
pub trait Payload {
    fn bit_size(&self) -> u64;
}

/// Bits needed to write `x` in binary (at least one).
pub fn bits_for(x: u64) -> u64 {
    u64::from(64 - x.leading_zeros()).max(1)
}

/// What a node knows about the network: its ID, `n`, and its neighbors.
#[derive(Debug, Clone, Copy)]
pub struct NodeContext<'a> {
    pub id: NodeId,
    pub n: usize,
    pub neighbors: &'a [NodeId],
}

impl NodeContext<'_> {
    pub fn degree(&self) -> usize {
        self.neighbors.len()
    }
}

#[derive(Debug)]
pub struct Outbox<M> {
    messages: Vec<(NodeId, M)>,
}

impl<M> Outbox<M> {
    pub fn send(&mut self, to: NodeId, msg: M) {
        self.messages.push((to, msg));
    }

    pub fn is_empty(&self) -> bool {
        self.messages.is_empty()
    }
}

/// A node-local state machine run identically at every node.
pub trait Protocol {
    type State;
    type Msg: Payload;
    type Output;

    fn init(&self, ctx: &NodeContext<'_>) -> Self::State;

    /// First half of round `round` (1-based).
    fn send(&self, ctx: &NodeContext<'_>, round: u64, state: &mut Self::State, out: &mut Outbox<Self::Msg>);

    /// Second half of round `round`; `inbox` is ordered by sender ID.
    fn receive(&self, ctx: &NodeContext<'_>, round: u64, state: &mut Self::State, inbox: Vec<(NodeId, Self::Msg)>);

    fn is_done(&self, ctx: &NodeContext<'_>, state: &Self::State) -> bool;

    fn output(&self, ctx: &NodeContext<'_>, state: Self::State) -> Self::Output;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CongestionMode {
    Strict,
    #[default]
    Paper,
}

impl CongestionMode {
    pub fn as_str(self) -> &'static str {
        match self {
            CongestionMode::Strict => "strict",
            CongestionMode::Paper => "paper",
        }
    }
}

impl std::str::FromStr for CongestionMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "strict" => Ok(CongestionMode::Strict),
            "paper" => Ok(CongestionMode::Paper),
            other => Err(format!("unknown congestion mode {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub bandwidth_bits: u64,
    pub mode: CongestionMode,
    pub seed: u64,
    pub round_cap: u64,
    /// Record a per-round `(edge, bits)` trace.
    pub trace: bool,
}

pub const DEFAULT_BETA: f64 = 2.0;

impl SimConfig {
    /// Default configuration for an `n`-node graph: `⌈β·log₂ n⌉` bits per
    /// edge with `β = 2`, `paper` congestion mode.
    pub fn for_graph(n: usize, seed: u64) -> Self {
        SimConfig {
            bandwidth_bits: default_bandwidth(n, DEFAULT_BETA),
            mode: CongestionMode::default(),
            seed,
            round_cap: DEFAULT_ROUND_CAP,
            trace: false,
        }
    }

    pub fn with_mode(mut self, mode: CongestionMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

pub fn default_bandwidth(n: usize, beta: f64) -> u64 {
    let bits = (beta * (n.max(2) as f64).log2()).ceil();
    (bits as u64).max(1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceEvent {
    /// Logical round, counted across every protocol folded into the ledger.
    pub round: u64,
    pub from: NodeId,
    pub to: NodeId,
    pub bits: u64,
}

/// Complexity ledger of one or more protocol runs.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RoundStats {
    /// Charged rounds (equal to `logical_rounds` in `paper` mode).
    pub rounds: u64,
    pub logical_rounds: u64,
    /// Total messages `M`.
    pub total_messages: u64,
    /// `C`: the most messages any node sent, or received, in one round.
    pub max_node_messages: u64,
    pub max_edge_bits: u64,
    /// Rounds that strict mode had to split.
    pub congestion_events: u64,
    pub trace: Vec<TraceEvent>,
}

impl RoundStats {
    /// Appends a run executed after `self`.
    pub fn absorb(&mut self, next: RoundStats) {
        let offset = self.logical_rounds;
        self.rounds += next.rounds;
        self.logical_rounds += next.logical_rounds;
        self.total_messages += next.total_messages;
        self.max_node_messages = self.max_node_messages.max(next.max_node_messages);
        self.max_edge_bits = self.max_edge_bits.max(next.max_edge_bits);
        self.congestion_events += next.congestion_events;
        self.trace.extend(next.trace.into_iter().map(|mut e| {
            e.round += offset;
            e
        }));
    }

    pub fn without_trace(mut self) -> Self {
        self.trace.clear();
        self
    }
}

/// Runs `protocol` at every node of `g` until all nodes report done.
pub fn run_protocol<P: Protocol>(
    g: &Graph,
    protocol: &P,
    config: &SimConfig,
) -> Result<(Vec<P::Output>, RoundStats), SimError> {
    let n = g.node_count();
    let contexts: Vec<NodeContext<'_>> = (0..n)
        .map(|id| NodeContext {
            id,
            n,
            neighbors: g.neighbors(id),
        })
        .collect();
    let mut states: Vec<P::State> = contexts.iter().map(|ctx| protocol.init(ctx)).collect();
    let mut stats = RoundStats::default();
    let bandwidth = config.bandwidth_bits.max(1);
    let mut round = 0u64;

    while !contexts.iter().zip(&states).all(|(ctx, st)| protocol.is_done(ctx, st)) {
        round += 1;
        if round > config.round_cap {
            return Err(SimError::NonTermination { cap: config.round_cap });
        }

        let mut inboxes: Vec<Vec<(NodeId, P::Msg)>> = (0..n).map(|_| Vec::new()).collect();
        let mut received = vec![0u64; n];
        let mut round_max_edge = 0u64;
        for (ctx, state) in contexts.iter().zip(states.iter_mut()) {
            let mut out = Outbox { messages: Vec::new() };
            protocol.send(ctx, round, state, &mut out);
            let sent = out.messages.len() as u64;
            stats.total_messages += sent;
            stats.max_node_messages = stats.max_node_messages.max(sent);
            let mut edge_bits: BTreeMap<NodeId, u64> = BTreeMap::new();
            for (to, msg) in out.messages {
                if ctx.neighbors.binary_search(&to).is_err() {
                    return Err(SimError::NotNeighbor {
                        round,
                        from: ctx.id,
                        to,
                    });
                }
                *edge_bits.entry(to).or_default() += msg.bit_size();
                received[to] += 1;
                inboxes[to].push((ctx.id, msg));
            }
            for (to, bits) in edge_bits {
                round_max_edge = round_max_edge.max(bits);
                if config.trace {
                    stats.trace.push(TraceEvent {
                        round,
                        from: ctx.id,
                        to,
                        bits,
                    });
                }
            }
        }
        stats.max_node_messages = stats.max_node_messages.max(received.iter().copied().max().unwrap_or(0));
        stats.max_edge_bits = stats.max_edge_bits.max(round_max_edge);

        for ((ctx, state), inbox) in contexts.iter().zip(states.iter_mut()).zip(inboxes) {
            protocol.receive(ctx, round, state, inbox);
        }

        stats.logical_rounds += 1;
        let charged = match config.mode {
            CongestionMode::Paper => 1,
            CongestionMode::Strict => round_max_edge.div_ceil(bandwidth).max(1),
        };
        if charged > 1 {
            stats.congestion_events += 1;
        }
        stats.rounds += charged;
    }

    let outputs = contexts
        .iter()
        .zip(states)
        .map(|(ctx, st)| protocol.output(ctx, st))
        .collect();
    Ok((outputs, stats))
}
