//! Sweep cuts over the ordering of nodes by `ρ(v)/d_v`.
//!
//! Three routes compute the same profile of prefix cuts `S_j`:
//!
//! - [`sweep_exact`] is the centralized reference;
//! - [`distributed_sweep`] runs as CONGEST protocols: a depth-capped BFS tree
//!   from the seed, a pipelined sorted upcast of ranking keys, a downward flood
//!   of the ordering, a pipelined upcast of the per-node `(j, L_j, R_j)`
//!   triples, and a final broadcast of the chosen prefix length;
//! - [`chain_sweep`] relays the running totals hop by hop from the `j`-th to the
//!   `(j+1)`-th ranked node and stops once a size or volume cap is exceeded.
//!
//! All of them evaluate prefixes with [`PrefixAccumulator`], which applies
//!
//! ```text
//! |E(S_j, S̄_j)| = |E(S_{j-1}, S̄_{j-1})| - L_j + R_j
//! vol(S_j)      = vol(S_{j-1}) + L_j + R_j
//! ```
//!
//! where `L_j` counts neighbors of the `j`-th node inside `S_{j-1}` and `R_j`
//! those outside `S_j`.

use std::collections::{BTreeMap, HashMap, VecDeque};

use crate::congest::{bits_for, run_protocol, NodeContext, Outbox, Payload, Protocol, RoundStats, SimConfig};
use crate::graph::{Graph, NodeId, NodeSet, Rational};
use crate::hkpr::PhkprVector;
use crate::{invalid, Error, Result};

/// Ranking key `value / degree`.
pub fn ranking_key(value: f64, degree: usize) -> f64 {
    if degree == 0 {
        value
    } else {
        value / degree as f64
    }
}

/// Nodes of the vector's support sorted by `ρ(v)/d_v` descending, ties
/// broken by ascending node ID, optionally truncated to `limit`.
pub fn sweep_ordering(g: &Graph, vector: &PhkprVector, limit: Option<usize>) -> Vec<NodeId> {
    let mut keyed: Vec<RankKey> = vector
        .entries()
        .iter()
        .map(|&(v, x)| RankKey::new(ranking_key(x, g.degree(v)), v))
        .collect();
    keyed.sort_unstable_by(|a, b| b.cmp(a));
    let mut order: Vec<NodeId> = keyed.into_iter().map(|k| k.id).collect();
    if let Some(limit) = limit {
        order.truncate(limit);
    }
    order
}

/// Sweep truncation length `⌈1/ε⌉`.
/// Constants of the tree-sweep round bound `a·⌈1/ε⌉ + b·K`: three phases
/// pipeline at most `⌈1/ε⌉` values, and five walk a tree of depth at most `K`.
pub const ROUND_BOUND_A: u64 = 3;
pub const ROUND_BOUND_B: u64 = 10;

pub fn tree_round_bound(eps: f64, depth_cap: u64) -> Result<u64> {
    Ok(ROUND_BOUND_A * truncation_length(eps)? as u64 + ROUND_BOUND_B * depth_cap.max(1))
}

pub fn truncation_length(eps: f64) -> Result<usize> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(invalid(format!("error bound must lie in (0, 1), got {eps}")));
    }
    Ok((1.0 / eps).ceil() as usize)
}

/// Ranking key with the sweep's total order: larger key first, then smaller ID.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankKey {
    pub key: f64,
    pub id: NodeId,
}

impl RankKey {
    pub fn new(key: f64, id: NodeId) -> Self {
        RankKey { key, id }
    }
}

impl Eq for RankKey {}

impl PartialOrd for RankKey {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for RankKey {
    /// `a > b` means `a` is ranked before `b`.
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.key.total_cmp(&other.key).then_with(|| other.id.cmp(&self.id))
    }
}

/// Optional early-stop caps on prefix size and volume.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SweepCaps {
    pub size: Option<u64>,
    pub volume: Option<u64>,
}

impl SweepCaps {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn is_unbounded(&self) -> bool {
        self.size.is_none() && self.volume.is_none()
    }

    fn exceeded(&self, size: u64, volume: u64) -> bool {
        self.size.is_some_and(|cap| size > cap) || self.volume.is_some_and(|cap| volume > cap)
    }
}

/// Statistics of one prefix `S_j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrefixStats {
    /// Prefix length `j` (1-based).
    pub size: usize,
    /// The node added at this step.
    pub node: NodeId,
    pub left: u64,
    pub right: u64,
    pub volume: u64,
    pub boundary: u64,
    pub ratio: Rational,
}

/// Running state of the sweep recursions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrefixAccumulator {
    total_volume: u64,
    size: usize,
    volume: u64,
    boundary: u64,
    best: Option<(usize, Rational)>,
}

impl PrefixAccumulator {
    pub fn new(total_volume: u64) -> Self {
        PrefixAccumulator {
            total_volume,
            size: 0,
            volume: 0,
            boundary: 0,
            best: None,
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// Size and volume the next prefix would have.
    pub fn peek(&self, left: u64, right: u64) -> (u64, u64) {
        (self.size as u64 + 1, self.volume + left + right)
    }

    /// Extends the prefix by one node with neighbor counts `(L, R)`.
    /// The first node uses the base case `|E(S_1, S̄_1)| = vol(S_1) = d_1`.
    pub fn push(&mut self, node: NodeId, left: u64, right: u64) -> PrefixStats {
        if self.size == 0 {
            let degree = left + right;
            self.boundary = degree;
            self.volume = degree;
        } else {
            self.boundary = self.boundary + right - left;
            self.volume += left + right;
        }
        self.size += 1;
        let denom = self.volume.min(self.total_volume - self.volume);
        let ratio = Rational::new(self.boundary, denom.max(1));
        if self.best.as_ref().is_none_or(|(_, b)| ratio < *b) {
            self.best = Some((self.size, ratio));
        }
        PrefixStats {
            size: self.size,
            node,
            left,
            right,
            volume: self.volume,
            boundary: self.boundary,
            ratio,
        }
    }

    pub fn best(&self) -> Option<(usize, Rational)> {
        self.best
    }
}

/// Outcome of a sweep.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SweepResult {
    /// The (possibly truncated) ordering the sweep ran over.
    pub ordering: Vec<NodeId>,
    /// `j*`, the length of the best prefix.
    pub best_prefix: usize,
    pub best_set: NodeSet,
    pub best_ratio: Rational,
    pub profile: Vec<PrefixStats>,
    /// Whether a size or volume cap stopped the sweep.
    pub stopped_early: bool,
    pub rounds_charged: u64,
    /// Charged rounds per protocol phase.
    pub phase_rounds: Vec<(&'static str, u64)>,
    /// `a·⌈1/ε⌉ + b·K` for a tree sweep; `rounds_charged` never exceeds it.
    pub round_bound: Option<u64>,
}

/// Number of prefixes a sweep over `len` ranked nodes may evaluate; the
/// prefix equal to the whole vertex set has no Cheeger ratio.
fn proper_prefix_limit(len: usize, n: usize) -> usize {
    if len >= n {
        n - 1
    } else {
        len
    }
}

/// Evaluates prefixes of `ordering` from per-node `(L, R)` counts, honoring
/// caps. At least one prefix is evaluated when any is proper.
fn run_recursions(
    g: &Graph,
    ordering: &[NodeId],
    triples: &[(u64, u64)],
    caps: SweepCaps,
) -> Result<(Vec<PrefixStats>, bool, usize, Rational)> {
    let limit = proper_prefix_limit(ordering.len(), g.node_count());
    if limit == 0 {
        return Err(Error::NoProperPrefix);
    }
    let mut acc = PrefixAccumulator::new(g.total_volume());
    let mut profile = Vec::with_capacity(limit);
    let mut stopped = false;
    for (&node, &(left, right)) in ordering.iter().zip(triples).take(limit) {
        let (size, volume) = acc.peek(left, right);
        if acc.size() > 0 && caps.exceeded(size, volume) {
            stopped = true;
            break;
        }
        profile.push(acc.push(node, left, right));
    }
    let (best_prefix, best_ratio) = acc.best().expect("at least one prefix evaluated");
    Ok((profile, stopped, best_prefix, best_ratio))
}

fn positions(ordering: &[NodeId]) -> HashMap<NodeId, usize> {
    ordering.iter().enumerate().map(|(i, &v)| (v, i)).collect()
}

/// `(L_j, R_j)` for the node at `pos` given every ranked node's position.
fn local_counts(g: &Graph, node: NodeId, pos: usize, position: &HashMap<NodeId, usize>) -> (u64, u64) {
    let left = g
        .neighbors(node)
        .iter()
        .filter(|v| position.get(v).is_some_and(|&p| p < pos))
        .count() as u64;
    (left, g.degree(node) as u64 - left)
}

fn assemble(
    ordering: Vec<NodeId>,
    profile: Vec<PrefixStats>,
    stopped_early: bool,
    best_prefix: usize,
    best_ratio: Rational,
) -> SweepResult {
    let best_set = ordering[..best_prefix].iter().copied().collect();
    SweepResult {
        ordering,
        best_prefix,
        best_set,
        best_ratio,
        profile,
        stopped_early,
        rounds_charged: 0,
        phase_rounds: Vec::new(),
        round_bound: None,
    }
}

/// Centralized sweep over the ordering of `vector`, evaluating at most
/// `max_prefix` prefixes. Exact integer arithmetic throughout.
pub fn sweep_exact(g: &Graph, vector: &PhkprVector, max_prefix: Option<usize>) -> Result<SweepResult> {
    sweep_exact_capped(g, vector, max_prefix, SweepCaps::none())
}

pub fn sweep_exact_capped(
    g: &Graph,
    vector: &PhkprVector,
    max_prefix: Option<usize>,
    caps: SweepCaps,
) -> Result<SweepResult> {
    if vector.is_empty() {
        return Err(Error::EmptyVector);
    }
    let ordering = sweep_ordering(g, vector, max_prefix);
    let position = positions(&ordering);
    let triples: Vec<(u64, u64)> = ordering
        .iter()
        .enumerate()
        .map(|(pos, &v)| local_counts(g, v, pos, &position))
        .collect();
    let (profile, stopped, best_prefix, best_ratio) = run_recursions(g, &ordering, &triples, caps)?;
    Ok(assemble(ordering, profile, stopped, best_prefix, best_ratio))
}

/// Parameters of the distributed sweeps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepParams {
    /// Error bound; the sweep keeps the top `⌈1/ε⌉` ranked nodes.
    pub eps: f64,
    /// BFS depth around the seed. Support outside this ball is not swept.
    pub depth_cap: u64,
    pub caps: SweepCaps,
}

// ---------------------------------------------------------------------------
// Protocol building blocks
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TreeNode {
    pub depth: Option<u64>,
    pub parent: Option<NodeId>,
    pub children: Vec<NodeId>,
}

impl TreeNode {
    pub fn in_tree(&self) -> bool {
        self.depth.is_some()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum TreeMsg {
    Join,
    Ack,
}

impl Payload for TreeMsg {
    fn bit_size(&self) -> u64 {
        1
    }
}

/// BFS tree from `root` truncated at `depth_cap`. Joins flood outward one
/// layer per round; each node adopts the smallest-ID sender as parent and
/// acknowledges it in the next round. Runs exactly `depth_cap + 1` rounds.
struct BfsTree {
    root: NodeId,
    depth_cap: u64,
}

#[derive(Debug, Default)]
struct BfsState {
    node: TreeNode,
    announce: bool,
    acknowledge: bool,
    rounds_done: u64,
}

impl Protocol for BfsTree {
    type State = BfsState;
    type Msg = TreeMsg;
    type Output = TreeNode;

    fn init(&self, ctx: &NodeContext<'_>) -> BfsState {
        let mut st = BfsState::default();
        if ctx.id == self.root {
            st.node.depth = Some(0);
            st.announce = self.depth_cap > 0;
        }
        st
    }

    fn send(&self, ctx: &NodeContext<'_>, _: u64, st: &mut BfsState, out: &mut Outbox<TreeMsg>) {
        if st.acknowledge {
            out.send(st.node.parent.expect("joined nodes have a parent"), TreeMsg::Ack);
            st.acknowledge = false;
        }
        if st.announce {
            for &v in ctx.neighbors {
                if Some(v) != st.node.parent {
                    out.send(v, TreeMsg::Join);
                }
            }
            st.announce = false;
        }
    }

    fn receive(&self, _: &NodeContext<'_>, round: u64, st: &mut BfsState, inbox: Vec<(NodeId, TreeMsg)>) {
        for (from, msg) in inbox {
            match msg {
                TreeMsg::Join if st.node.depth.is_none() => {
                    // Inbox is sorted by sender, so the first join is the smallest ID.
                    st.node.depth = Some(round);
                    st.node.parent = Some(from);
                    st.acknowledge = true;
                    st.announce = round < self.depth_cap;
                }
                TreeMsg::Join => {}
                TreeMsg::Ack => st.node.children.push(from),
            }
        }
        st.rounds_done = round;
    }

    fn is_done(&self, _: &NodeContext<'_>, st: &BfsState) -> bool {
        st.rounds_done > self.depth_cap
    }

    fn output(&self, _: &NodeContext<'_>, st: BfsState) -> TreeNode {
        st.node
    }
}

/// Item travelling up the tree; `last` marks the sender's final message.
#[derive(Debug, Clone)]
struct UpMsg<T> {
    item: Option<T>,
    last: bool,
    bits: u64,
}

impl<T> Payload for UpMsg<T> {
    fn bit_size(&self) -> u64 {
        self.bits
    }
}

/// Pipelined upcast delivering the `limit` greatest items (by `Ord`) to the
/// root. Each node forwards its subtree's items in descending order, one per
/// round, and only emits an item once every unfinished child has something
/// queued, so every stream stays sorted.
struct SortedUpcast<'a, T> {
    tree: &'a [TreeNode],
    own: &'a [Vec<T>],
    limit: usize,
    item_bits: u64,
}

#[derive(Debug)]
struct UpState<T> {
    own: VecDeque<T>,
    queues: BTreeMap<NodeId, VecDeque<T>>,
    finished_children: BTreeMap<NodeId, bool>,
    nonempty_children: Vec<NodeId>,
    sent: usize,
    finished: bool,
}

#[derive(Debug, Clone)]
struct UpOutput<T> {
    /// Children whose subtree forwarded at least one item.
    nonempty_children: Vec<NodeId>,
    forwarded: usize,
    /// Items gathered at the root, best first.
    collected: Vec<T>,
}

impl<T: Ord + Clone> SortedUpcast<'_, T> {
    fn is_root(&self, v: NodeId) -> bool {
        self.tree[v].depth == Some(0)
    }
}

impl<T: Ord + Clone> UpState<T> {
    fn all_children_finished(&self) -> bool {
        self.finished_children.values().all(|&f| f)
    }

    fn exhausted(&self) -> bool {
        self.own.is_empty() && self.all_children_finished() && self.queues.values().all(VecDeque::is_empty)
    }

    /// Pops the greatest available item if the order is settled.
    fn pop_ready(&mut self) -> Option<T> {
        let settled = self
            .finished_children
            .iter()
            .all(|(c, &done)| done || !self.queues[c].is_empty());
        if !settled {
            return None;
        }
        let mut best: Option<(Option<NodeId>, &T)> = self.own.front().map(|x| (None, x));
        for (&c, q) in &self.queues {
            if let Some(head) = q.front() {
                if best.as_ref().is_none_or(|(_, b)| head > *b) {
                    best = Some((Some(c), head));
                }
            }
        }
        let source = best?.0;
        match source {
            None => self.own.pop_front(),
            Some(c) => self.queues.get_mut(&c).and_then(VecDeque::pop_front),
        }
    }
}

impl<T: Ord + Clone> Protocol for SortedUpcast<'_, T> {
    type State = UpState<T>;
    type Msg = UpMsg<T>;
    type Output = UpOutput<T>;

    fn init(&self, ctx: &NodeContext<'_>) -> UpState<T> {
        let node = &self.tree[ctx.id];
        let mut own = self.own[ctx.id].clone();
        own.sort_unstable_by(|a, b| b.cmp(a));
        UpState {
            own: own.into(),
            queues: node.children.iter().map(|&c| (c, VecDeque::new())).collect(),
            finished_children: node.children.iter().map(|&c| (c, false)).collect(),
            nonempty_children: Vec::new(),
            sent: 0,
            finished: !node.in_tree(),
        }
    }

    fn send(&self, ctx: &NodeContext<'_>, _: u64, st: &mut UpState<T>, out: &mut Outbox<UpMsg<T>>) {
        if st.finished || self.is_root(ctx.id) {
            return;
        }
        let parent = self.tree[ctx.id].parent.expect("non-root tree node has a parent");
        if st.sent >= self.limit || st.exhausted() {
            out.send(
                parent,
                UpMsg {
                    item: None,
                    last: true,
                    bits: 1,
                },
            );
            st.finished = true;
            return;
        }
        if let Some(item) = st.pop_ready() {
            st.sent += 1;
            let last = st.sent >= self.limit || st.exhausted();
            out.send(
                parent,
                UpMsg {
                    item: Some(item),
                    last,
                    bits: self.item_bits + 1,
                },
            );
            st.finished = last;
        }
    }

    fn receive(&self, _: &NodeContext<'_>, _: u64, st: &mut UpState<T>, inbox: Vec<(NodeId, UpMsg<T>)>) {
        for (from, msg) in inbox {
            if let Some(item) = msg.item {
                if !st.nonempty_children.contains(&from) {
                    st.nonempty_children.push(from);
                }
                st.queues.entry(from).or_default().push_back(item);
            }
            if msg.last {
                st.finished_children.insert(from, true);
            }
        }
    }

    fn is_done(&self, ctx: &NodeContext<'_>, st: &UpState<T>) -> bool {
        if self.is_root(ctx.id) {
            st.all_children_finished()
        } else {
            st.finished
        }
    }

    fn output(&self, ctx: &NodeContext<'_>, mut st: UpState<T>) -> UpOutput<T> {
        st.nonempty_children.sort_unstable();
        let mut collected = Vec::new();
        if self.is_root(ctx.id) {
            collected.extend(st.own.drain(..));
            for q in st.queues.values_mut() {
                collected.extend(q.drain(..));
            }
            collected.sort_unstable_by(|a, b| b.cmp(a));
            collected.truncate(self.limit);
        }
        UpOutput {
            nonempty_children: st.nonempty_children,
            forwarded: st.sent,
            collected,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct DownMsg {
    value: u64,
    last: bool,
    bits: u64,
}

impl Payload for DownMsg {
    fn bit_size(&self) -> u64 {
        self.bits
    }
}

/// Pipelined flood of the root's list down the pruned tree, one value per
/// edge per round.
struct FloodDown<'a> {
    root: NodeId,
    list: &'a [u64],
    children: &'a [Vec<NodeId>],
    participating: &'a [bool],
    value_bits: u64,
}

#[derive(Debug, Default)]
struct DownState {
    pending: VecDeque<(u64, bool)>,
    received: Vec<u64>,
    got_last: bool,
}

impl Protocol for FloodDown<'_> {
    type State = DownState;
    type Msg = DownMsg;
    type Output = Vec<u64>;

    fn init(&self, ctx: &NodeContext<'_>) -> DownState {
        let mut st = DownState::default();
        if ctx.id == self.root {
            let len = self.list.len();
            st.received = self.list.to_vec();
            st.got_last = true;
            if !self.children[ctx.id].is_empty() {
                st.pending = self.list.iter().enumerate().map(|(i, &v)| (v, i + 1 == len)).collect();
            }
        }
        st
    }

    fn send(&self, ctx: &NodeContext<'_>, _: u64, st: &mut DownState, out: &mut Outbox<DownMsg>) {
        if let Some((value, last)) = st.pending.pop_front() {
            for &c in &self.children[ctx.id] {
                out.send(
                    c,
                    DownMsg {
                        value,
                        last,
                        bits: self.value_bits + 1,
                    },
                );
            }
        }
    }

    fn receive(&self, ctx: &NodeContext<'_>, _: u64, st: &mut DownState, inbox: Vec<(NodeId, DownMsg)>) {
        for (_, msg) in inbox {
            st.received.push(msg.value);
            st.got_last |= msg.last;
            if !self.children[ctx.id].is_empty() {
                st.pending.push_back((msg.value, msg.last));
            }
        }
    }

    fn is_done(&self, ctx: &NodeContext<'_>, st: &DownState) -> bool {
        !self.participating[ctx.id] || (st.got_last && st.pending.is_empty())
    }

    fn output(&self, _: &NodeContext<'_>, st: DownState) -> Vec<u64> {
        st.received
    }
}

/// Phase-2 triple `(position, L, R)`; earlier positions sort greater so the
/// root receives them in ordering order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Triple {
    pos: usize,
    left: u64,
    right: u64,
}

impl PartialOrd for Triple {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Triple {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        other.pos.cmp(&self.pos)
    }
}

/// Ordering known at the nodes after Phase 1.
struct Phase1 {
    tree: Vec<TreeNode>,
    /// Children whose subtree holds support, per node.
    flood_children: Vec<Vec<NodeId>>,
    participating: Vec<bool>,
    /// The ordering as received by each participating node.
    ordering_at: Vec<Vec<u64>>,
    ordering: Vec<NodeId>,
    depth: u64,
    stats: RoundStats,
    phase_rounds: Vec<(&'static str, u64)>,
}

fn id_bits(g: &Graph) -> u64 {
    bits_for(g.node_count() as u64)
}

fn run_phase1(g: &Graph, vector: &PhkprVector, params: &SweepParams, config: &SimConfig) -> Result<Phase1> {
    if vector.is_empty() {
        return Err(Error::EmptyVector);
    }
    g.check_node(vector.seed)?;
    let limit = truncation_length(params.eps)?;
    let n = g.node_count();
    let root = vector.seed;
    let mut stats = RoundStats::default();
    let mut phase_rounds = Vec::new();

    let (tree, tree_stats) = run_protocol(
        g,
        &BfsTree {
            root,
            depth_cap: params.depth_cap,
        },
        config,
    )?;
    phase_rounds.push(("bfs_tree", tree_stats.rounds));
    stats.absorb(tree_stats);

    let own: Vec<Vec<RankKey>> = (0..n)
        .map(|v| {
            let x = vector.value(v);
            if x > 0.0 && tree[v].in_tree() {
                vec![RankKey::new(ranking_key(x, g.degree(v)), v)]
            } else {
                Vec::new()
            }
        })
        .collect();
    let upcast = SortedUpcast {
        tree: &tree,
        own: &own,
        limit,
        item_bits: 64 + id_bits(g),
    };
    let (up, up_stats) = run_protocol(g, &upcast, config)?;
    phase_rounds.push(("rank_upcast", up_stats.rounds));
    stats.absorb(up_stats);

    let ordering: Vec<NodeId> = up[root].collected.iter().map(|k| k.id).collect();
    if ordering.is_empty() {
        return Err(Error::EmptyVector);
    }
    let flood_children: Vec<Vec<NodeId>> = up.iter().map(|o| o.nonempty_children.clone()).collect();
    let participating: Vec<bool> = (0..n).map(|v| v == root || up[v].forwarded > 0).collect();
    let list: Vec<u64> = ordering.iter().map(|&v| v as u64).collect();
    let flood = FloodDown {
        root,
        list: &list,
        children: &flood_children,
        participating: &participating,
        value_bits: id_bits(g),
    };
    let (ordering_at, flood_stats) = run_protocol(g, &flood, config)?;
    phase_rounds.push(("order_flood", flood_stats.rounds));
    stats.absorb(flood_stats);

    let depth = tree.iter().filter_map(|t| t.depth).max().unwrap_or(0);
    Ok(Phase1 {
        tree,
        flood_children,
        participating,
        ordering_at,
        ordering,
        depth,
        stats,
        phase_rounds,
    })
}

/// Tree-based distributed sweep. The ordering is assembled at the seed, which
/// roots the BFS tree and applies the recursions to the upcast triples.
pub fn distributed_sweep(
    g: &Graph,
    vector: &PhkprVector,
    params: &SweepParams,
    config: &SimConfig,
) -> Result<(SweepResult, RoundStats)> {
    let p1 = run_phase1(g, vector, params, config)?;
    let n = g.node_count();
    let root = vector.seed;
    let mut stats = p1.stats;
    let mut phase_rounds = p1.phase_rounds;

    // Each ranked node derives (j, L_j, R_j) from the ordering it received.
    let own: Vec<Vec<Triple>> = (0..n)
        .map(|v| {
            let known: Vec<NodeId> = p1.ordering_at[v].iter().map(|&x| x as NodeId).collect();
            let position = positions(&known);
            match position.get(&v) {
                Some(&pos) if p1.participating[v] => {
                    let (left, right) = local_counts(g, v, pos, &position);
                    vec![Triple { pos, left, right }]
                }
                _ => Vec::new(),
            }
        })
        .collect();
    let triple_tree = pruned_tree(&p1.tree, &p1.flood_children, &p1.participating);
    let upcast = SortedUpcast {
        tree: &triple_tree,
        own: &own,
        limit: p1.ordering.len(),
        item_bits: 3 * id_bits(g),
    };
    let (up, up_stats) = run_protocol(g, &upcast, config)?;
    phase_rounds.push(("triple_upcast", up_stats.rounds));
    stats.absorb(up_stats);

    let mut gathered = up[root].collected.clone();
    gathered.sort_unstable_by_key(|t| t.pos);
    debug_assert!(gathered.iter().enumerate().all(|(i, t)| t.pos == i));
    let triples: Vec<(u64, u64)> = gathered.iter().map(|t| (t.left, t.right)).collect();
    let (profile, stopped, best_prefix, best_ratio) = run_recursions(g, &p1.ordering, &triples, params.caps)?;

    let announce = [best_prefix as u64];
    let flood = FloodDown {
        root,
        list: &announce,
        children: &p1.flood_children,
        participating: &p1.participating,
        value_bits: id_bits(g),
    };
    let (_, flood_stats) = run_protocol(g, &flood, config)?;
    phase_rounds.push(("result_flood", flood_stats.rounds));
    stats.absorb(flood_stats);

    let mut result = assemble(p1.ordering, profile, stopped, best_prefix, best_ratio);
    result.rounds_charged = stats.rounds;
    result.phase_rounds = phase_rounds;
    result.round_bound = Some(tree_round_bound(params.eps, params.depth_cap)?);
    debug_assert!(p1.depth <= params.depth_cap);
    Ok((result, stats))
}

/// Tree restricted to participating nodes and their support-bearing children.
fn pruned_tree(tree: &[TreeNode], flood_children: &[Vec<NodeId>], participating: &[bool]) -> Vec<TreeNode> {
    tree.iter()
        .enumerate()
        .map(|(v, node)| {
            if participating[v] {
                TreeNode {
                    depth: node.depth,
                    parent: node.parent,
                    children: flood_children[v].clone(),
                }
            } else {
                TreeNode::default()
            }
        })
        .collect()
}

/// Depth of the tree used by a distributed sweep, for reporting.
pub fn sweep_tree_depth(g: &Graph, seed: NodeId, depth_cap: u64) -> u64 {
    g.bfs_distances(seed)
        .into_iter()
        .flatten()
        .map(|d| d as u64)
        .filter(|&d| d <= depth_cap)
        .max()
        .unwrap_or(0)
}

// ---------------------------------------------------------------------------
// Chain sweep
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct ChainMsg {
    dest: NodeId,
    size: usize,
    volume: u64,
    boundary: u64,
    best_prefix: usize,
    best_num: u64,
    best_den: u64,
    bits: u64,
}

impl Payload for ChainMsg {
    fn bit_size(&self) -> u64 {
        self.bits
    }
}

/// Relays `(vol(S_j), |E(S_j, S̄_j)|, Φ*, j*)` from ranked node `j` to
/// ranked node `j+1` along shortest paths.
struct ChainRelay<'a> {
    ordering: &'a [NodeId],
    position: &'a HashMap<NodeId, usize>,
    total_volume: u64,
    /// Prefixes that may be evaluated (proper prefixes of the ordering).
    limit: usize,
    caps: SweepCaps,
    /// `next_hop[d][v]`: neighbor of `v` on a shortest path to `d`.
    next_hop: &'a HashMap<NodeId, Vec<Option<NodeId>>>,
    bits: u64,
}

#[derive(Debug, Default)]
struct ChainState {
    carry: Option<ChainMsg>,
    evaluated: Option<PrefixStats>,
    final_best: Option<(usize, Rational)>,
    stopped_by_cap: bool,
}

#[derive(Debug, Clone, Default)]
struct ChainOutput {
    evaluated: Option<PrefixStats>,
    final_best: Option<(usize, Rational)>,
    stopped_by_cap: bool,
}

impl ChainRelay<'_> {
    /// Evaluates this node's prefix from the incoming totals and prepares
    /// the message for the next ranked node, or finishes the sweep.
    fn evaluate(
        &self,
        g_neighbors: &[NodeId],
        node: NodeId,
        pos: usize,
        incoming: Option<ChainMsg>,
        st: &mut ChainState,
    ) {
        let left = g_neighbors
            .iter()
            .filter(|v| self.position.get(v).is_some_and(|&p| p < pos))
            .count() as u64;
        let right = g_neighbors.len() as u64 - left;
        let mut acc = PrefixAccumulator::new(self.total_volume);
        if let Some(msg) = incoming {
            acc.size = msg.size;
            acc.volume = msg.volume;
            acc.boundary = msg.boundary;
            acc.best = Some((msg.best_prefix, Rational::new(msg.best_num, msg.best_den)));
            let (size, volume) = acc.peek(left, right);
            if self.caps.exceeded(size, volume) {
                st.final_best = acc.best();
                st.stopped_by_cap = true;
                return;
            }
        }
        st.evaluated = Some(acc.push(node, left, right));
        let best = acc.best().expect("evaluated a prefix");
        let next = pos + 1;
        let size_blocked = self.caps.size.is_some_and(|cap| next as u64 + 1 > cap);
        if next >= self.limit || size_blocked {
            st.final_best = Some(best);
            st.stopped_by_cap = size_blocked && next < self.limit;
            return;
        }
        st.carry = Some(ChainMsg {
            dest: self.ordering[next],
            size: acc.size,
            volume: acc.volume,
            boundary: acc.boundary,
            best_prefix: best.0,
            best_num: *best.1.numer(),
            best_den: *best.1.denom(),
            bits: self.bits,
        });
    }
}

impl Protocol for ChainRelay<'_> {
    type State = ChainState;
    type Msg = ChainMsg;
    type Output = ChainOutput;

    fn init(&self, ctx: &NodeContext<'_>) -> ChainState {
        let mut st = ChainState::default();
        if self.ordering.first() == Some(&ctx.id) {
            self.evaluate(ctx.neighbors, ctx.id, 0, None, &mut st);
        }
        st
    }

    fn send(&self, ctx: &NodeContext<'_>, _: u64, st: &mut ChainState, out: &mut Outbox<ChainMsg>) {
        if let Some(msg) = st.carry.take() {
            let hop = self.next_hop[&msg.dest][ctx.id].expect("destination reachable");
            out.send(hop, msg);
        }
    }

    fn receive(&self, ctx: &NodeContext<'_>, _: u64, st: &mut ChainState, inbox: Vec<(NodeId, ChainMsg)>) {
        for (_, msg) in inbox {
            if msg.dest == ctx.id {
                let pos = self.position[&ctx.id];
                self.evaluate(ctx.neighbors, ctx.id, pos, Some(msg), st);
            } else {
                st.carry = Some(msg);
            }
        }
    }

    fn is_done(&self, _: &NodeContext<'_>, st: &ChainState) -> bool {
        st.carry.is_none()
    }

    fn output(&self, _: &NodeContext<'_>, st: ChainState) -> ChainOutput {
        ChainOutput {
            evaluated: st.evaluated,
            final_best: st.final_best,
            stopped_by_cap: st.stopped_by_cap,
        }
    }
}

/// Shortest-path next hops toward each destination, the routing a CONGEST
/// network would obtain from BFS.
fn next_hops(g: &Graph, destinations: &[NodeId]) -> HashMap<NodeId, Vec<Option<NodeId>>> {
    destinations
        .iter()
        .map(|&d| {
            let dist = g.bfs_distances(d);
            let hops = (0..g.node_count())
                .map(|v| {
                    let dv = dist[v]?;
                    g.neighbors(v)
                        .iter()
                        .copied()
                        .find(|&u| dist[u].is_some_and(|du| du + 1 == dv))
                })
                .collect();
            (d, hops)
        })
        .collect()
}

/// Sum of hop distances between consecutive ranked nodes up to prefix `upto`.
pub fn chain_distance(g: &Graph, ordering: &[NodeId], upto: usize) -> u64 {
    ordering
        .windows(2)
        .take(upto.saturating_sub(1))
        .map(|w| g.bfs_distances(w[0])[w[1]].expect("connected") as u64)
        .sum()
}

/// Chain sweep with early stopping: Phase 1 as in [`distributed_sweep`],
/// then the running totals hop from each ranked node to the next until a
/// cap is exceeded.
pub fn chain_sweep(
    g: &Graph,
    vector: &PhkprVector,
    params: &SweepParams,
    config: &SimConfig,
) -> Result<(SweepResult, RoundStats)> {
    if params.caps.is_unbounded() {
        return Err(invalid("chain sweep needs a size or volume cap"));
    }
    let p1 = run_phase1(g, vector, params, config)?;
    let mut stats = p1.stats;
    let mut phase_rounds = p1.phase_rounds;
    let limit = proper_prefix_limit(p1.ordering.len(), g.node_count());
    if limit == 0 {
        return Err(Error::NoProperPrefix);
    }
    let position = positions(&p1.ordering);
    let hops = next_hops(g, &p1.ordering[1..]);
    let bits = bits_for(g.node_count() as u64) * 3 + bits_for(g.total_volume()) * 4;
    let relay = ChainRelay {
        ordering: &p1.ordering,
        position: &position,
        total_volume: g.total_volume(),
        limit,
        caps: params.caps,
        next_hop: &hops,
        bits,
    };
    let (outputs, chain_stats) = run_protocol(g, &relay, config)?;
    phase_rounds.push(("chain_relay", chain_stats.rounds));
    stats.absorb(chain_stats);

    let mut profile: Vec<PrefixStats> = outputs.iter().filter_map(|o| o.evaluated.clone()).collect();
    profile.sort_unstable_by_key(|p| p.size);
    let finisher = outputs
        .iter()
        .find(|o| o.final_best.is_some())
        .expect("the chain always terminates at some node");
    let (best_prefix, best_ratio) = finisher.final_best.expect("checked above");
    let mut result = assemble(p1.ordering, profile, finisher.stopped_by_cap, best_prefix, best_ratio);
    result.rounds_charged = stats.rounds;
    result.phase_rounds = phase_rounds;
    Ok((result, stats))
}
