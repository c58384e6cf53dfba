//! Local cluster detection from a seed, the `φ`-halving driver for an unknown
//! target conductance, and sparse cuts by seed sampling.

use rand::seq::index;

use crate::congest::{RoundStats, SimConfig};
use crate::graph::{Graph, NodeId, Rational};
use crate::hkpr::{PhkprVector, WalkParams};
use crate::phkpr::estimate_phkpr_distributed;
use crate::rng::{domain, mix, stream};
use crate::sweep::{chain_sweep, distributed_sweep, SweepCaps, SweepParams, SweepResult};
use crate::{invalid, Result};

pub const DEFAULT_C2: f64 = 2.0;
pub const MIN_DIFFUSION_TIME: f64 = 1.0;
pub const MAX_DIFFUSION_TIME: f64 = 1.0e4;

/// How the sweep after estimation is carried out.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum SweepStrategy {
    /// Tree-based sweep over the top `⌈1/ε⌉` ranked nodes; caps are ignored.
    #[default]
    Tree,
    /// Hop-by-hop chain sweep stopping once the size or volume cap is exceeded.
    Chain,
}

impl SweepStrategy {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepStrategy::Tree => "tree",
            SweepStrategy::Chain => "chain",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterRequest {
    pub seed: NodeId,
    /// Target cluster size `σ`.
    pub sigma: u64,
    /// Target cluster volume `ς`.
    pub varsigma: u64,
    /// Target Cheeger ratio `φ`.
    pub phi: f64,
    pub eps: f64,
    /// Acceptance constant: a set is good enough when `Φ(S) ≤ c₂·√φ`.
    pub c2: f64,
    /// Step-cap constant.
    pub c: f64,
    /// Use this diffusion time instead of [`diffusion_time`].
    pub t_override: Option<f64>,
    pub strategy: SweepStrategy,
}

impl ClusterRequest {
    pub fn new(seed: NodeId, sigma: u64, varsigma: u64, phi: f64, eps: f64) -> Self {
        ClusterRequest {
            seed,
            sigma,
            varsigma,
            phi,
            eps,
            c2: DEFAULT_C2,
            c: 1.0,
            t_override: None,
            strategy: SweepStrategy::Tree,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sigma == 0 || self.varsigma == 0 {
            return Err(invalid("target size and volume must be positive"));
        }
        if !(self.phi > 0.0 && self.phi <= 1.0) {
            return Err(invalid(format!("phi must lie in (0, 1], got {}", self.phi)));
        }
        if !(self.eps > 0.0 && self.eps < 0.5) {
            return Err(invalid(format!("eps must lie in (0, 1/2), got {}", self.eps)));
        }
        if !(self.c2 > 0.0 && self.c2.is_finite()) {
            return Err(invalid(format!("c2 must be positive, got {}", self.c2)));
        }
        if let Some(t) = self.t_override {
            if !(t >= 0.0 && t.is_finite()) {
                return Err(invalid(format!(
                    "diffusion time must be finite and nonnegative, got {t}"
                )));
            }
        }
        Ok(())
    }

    pub fn diffusion_time(&self) -> f64 {
        self.t_override
            .unwrap_or_else(|| diffusion_time(self.phi, self.varsigma, self.eps))
    }

    fn caps(&self) -> SweepCaps {
        SweepCaps {
            size: Some(self.sigma),
            volume: Some(self.varsigma),
        }
    }
}

/// `t = ln(2√ς/ε)/φ`, clamped to `[1, 10⁴]`.
pub fn diffusion_time(phi: f64, varsigma: u64, eps: f64) -> f64 {
    let t = (2.0 * (varsigma as f64).sqrt() / eps).ln() / phi;
    t.clamp(MIN_DIFFUSION_TIME, MAX_DIFFUSION_TIME)
}

/// Result of one [`local_cluster`] run.
#[derive(Debug, Clone)]
pub struct ClusterRun {
    pub sweep: SweepResult,
    /// Estimation and sweep ledgers combined.
    pub stats: RoundStats,
    pub estimate_rounds: u64,
    pub sweep_rounds: u64,
    pub t: f64,
    pub params: WalkParams,
    pub vector: PhkprVector,
}

impl ClusterRun {
    pub fn ratio(&self) -> Rational {
        self.sweep.best_ratio
    }
}

/// Estimates the heat kernel pagerank vector from the seed and sweeps it.
pub fn local_cluster(g: &Graph, req: &ClusterRequest, config: &SimConfig) -> Result<ClusterRun> {
    req.validate()?;
    let t = req.diffusion_time();
    let est = estimate_phkpr_distributed(g, req.seed, t, req.eps, req.c, config)?;
    let sweep_params = SweepParams {
        eps: req.eps,
        depth_cap: est.params.step_cap,
        caps: req.caps(),
    };
    let (sweep, sweep_stats) = match req.strategy {
        SweepStrategy::Tree => distributed_sweep(
            g,
            &est.vector,
            &SweepParams {
                caps: SweepCaps::none(),
                ..sweep_params
            },
            config,
        )?,
        SweepStrategy::Chain => chain_sweep(g, &est.vector, &sweep_params, config)?,
    };
    let estimate_rounds = est.stats.rounds;
    let sweep_rounds = sweep_stats.rounds;
    let mut stats = est.stats;
    stats.absorb(sweep_stats);
    Ok(ClusterRun {
        sweep,
        stats,
        estimate_rounds,
        sweep_rounds,
        t,
        params: est.params,
        vector: est.vector,
    })
}

/// One guess of the halving loop.
#[derive(Debug, Clone, PartialEq)]
pub struct Guess {
    pub phi: f64,
    pub ratio: Rational,
    pub accepted: bool,
}

#[derive(Debug, Clone)]
pub struct AutoPhiRun {
    /// The accepted run, or the lowest-ratio run when nothing was accepted.
    pub run: ClusterRun,
    pub phi_used: f64,
    pub accepted: bool,
    pub guesses: Vec<Guess>,
    /// Ledgers of every guess combined.
    pub stats: RoundStats,
}

/// Largest number of guesses the halving loop makes: `⌊log₂(2m)⌋`, the count
/// of `φ = 2^{-i}` with `φ ≥ 1/(2m)`.
pub fn max_guesses(g: &Graph) -> u32 {
    (2 * g.edge_count() as u64).max(2).ilog2()
}

pub fn accepts(ratio: Rational, phi: f64, c2: f64) -> bool {
    rational_to_f64(ratio) <= c2 * phi.sqrt()
}

pub fn rational_to_f64(r: Rational) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Tries `φ = 1/2, 1/4, …` down to `1/(2m)` and stops at the first output
/// with `Φ(S) ≤ c₂·√φ`. Guess `i` runs under seed `mix(config.seed, [GUESS, i])`.
/// The `phi` field of `req` is ignored.
pub fn local_cluster_autophi(g: &Graph, req: &ClusterRequest, config: &SimConfig) -> Result<AutoPhiRun> {
    let mut guesses = Vec::new();
    let mut stats = RoundStats::default();
    let mut best: Option<(ClusterRun, f64)> = None;
    for i in 1..=max_guesses(g) {
        let phi = 0.5f64.powi(i as i32);
        let attempt = ClusterRequest { phi, ..req.clone() };
        let cfg = config.clone().with_seed(mix(config.seed, &[domain::GUESS, i as u64]));
        let run = local_cluster(g, &attempt, &cfg)?;
        let ratio = run.ratio();
        let accepted = accepts(ratio, phi, req.c2);
        guesses.push(Guess { phi, ratio, accepted });
        stats.absorb(run.stats.clone());
        if accepted {
            return Ok(AutoPhiRun {
                run,
                phi_used: phi,
                accepted,
                guesses,
                stats,
            });
        }
        if best.as_ref().is_none_or(|(b, _)| ratio < b.ratio()) {
            best = Some((run, phi));
        }
    }
    let (run, phi_used) = best.expect("at least one guess for any graph with an edge");
    Ok(AutoPhiRun {
        run,
        phi_used,
        accepted: false,
        guesses,
        stats,
    })
}

#[derive(Debug, Clone)]
pub struct SparseCutRun {
    pub best_seed: NodeId,
    pub best: AutoPhiRun,
    /// Seeds tried with their ratio and acceptance, in sampling order.
    pub per_seed: Vec<(NodeId, Rational, bool)>,
}

/// Seeds chosen by [`sparse_cut`]: every node when `sample_count ≥ n`,
/// otherwise a uniform sample without replacement.
pub fn sample_seeds(n: usize, sample_count: usize, rng_seed: u64) -> Vec<NodeId> {
    if sample_count >= n {
        return (0..n).collect();
    }
    let mut rng = stream(rng_seed, &[domain::SAMPLE_SEEDS]);
    index::sample(&mut rng, n, sample_count).into_vec()
}

/// Per-seed simulation seed used by [`sparse_cut`].
pub fn per_seed_rng(rng_seed: u64, seed: NodeId) -> u64 {
    mix(rng_seed, &[domain::PER_SEED, seed as u64])
}

/// Runs [`local_cluster_autophi`] from sampled seeds and keeps the lowest
/// Cheeger ratio, earliest sample on ties.
pub fn sparse_cut(g: &Graph, sample_count: usize, req: &ClusterRequest, config: &SimConfig) -> Result<SparseCutRun> {
    if sample_count == 0 {
        return Err(invalid("sample count must be at least 1"));
    }
    let mut per_seed = Vec::new();
    let mut best: Option<(NodeId, AutoPhiRun)> = None;
    for seed in sample_seeds(g.node_count(), sample_count, config.seed) {
        let cfg = config.clone().with_seed(per_seed_rng(config.seed, seed));
        let run = local_cluster_autophi(g, &ClusterRequest { seed, ..req.clone() }, &cfg)?;
        let ratio = run.run.ratio();
        per_seed.push((seed, ratio, run.accepted));
        if best.as_ref().is_none_or(|(_, b)| ratio < b.run.ratio()) {
            best = Some((seed, run));
        }
    }
    let (best_seed, best) = best.expect("sample count is positive");
    Ok(SparseCutRun {
        best_seed,
        best,
        per_seed,
    })
}
