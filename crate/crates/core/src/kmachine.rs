//! Round estimates for the k-machine model, obtained by converting CONGEST
//! complexities: `Õ(M/k² + T·C/k)` rounds for a protocol with message
//! complexity `M`, communication degree complexity `C` and `T` rounds.
//! Polylogarithmic factors are dropped.

use crate::congest::RoundStats;
use crate::graph::Graph;
use crate::hkpr::walk_parameters;
use crate::{invalid, Result};

/// CONGEST complexities of a protocol run, measured or symbolic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostMeasurement {
    /// Total messages `M`.
    pub messages: f64,
    /// Most messages sent or received by one node in one round, `C`.
    pub max_node_messages: f64,
    /// CONGEST rounds `T`.
    pub rounds: f64,
    pub n: usize,
    pub max_degree: usize,
}

impl CostMeasurement {
    pub fn new(messages: f64, max_node_messages: f64, rounds: f64, n: usize, max_degree: usize) -> Result<Self> {
        let all = [messages, max_node_messages, rounds];
        if all.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(invalid("complexities must be finite and nonnegative"));
        }
        if max_node_messages > messages {
            return Err(invalid("communication degree exceeds total messages"));
        }
        Ok(CostMeasurement {
            messages,
            max_node_messages,
            rounds,
            n,
            max_degree,
        })
    }

    pub fn from_stats(stats: &RoundStats, g: &Graph) -> Self {
        CostMeasurement {
            messages: stats.total_messages as f64,
            max_node_messages: stats.max_node_messages as f64,
            rounds: stats.rounds as f64,
            n: g.node_count(),
            max_degree: g.max_degree(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Term {
    /// `M/k²`
    Messages,
    /// `T·C/k`
    Rounds,
}

impl Term {
    pub fn as_str(self) -> &'static str {
        match self {
            Term::Messages => "messages",
            Term::Rounds => "rounds",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KmBound {
    pub k: u64,
    pub message_term: f64,
    pub round_term: f64,
    pub bound: f64,
    /// The larger term; ties go to [`Term::Rounds`].
    pub dominant: Term,
}

/// `M/k² + T·C/k` for `k ≥ 2` machines.
pub fn kmachine_round_bound(meas: &CostMeasurement, k: u64) -> Result<KmBound> {
    if k < 2 {
        return Err(invalid(format!("need at least 2 machines, got {k}")));
    }
    let kf = k as f64;
    let message_term = meas.messages / (kf * kf);
    let round_term = meas.rounds * meas.max_node_messages / kf;
    let dominant = if message_term > round_term {
        Term::Messages
    } else {
        Term::Rounds
    };
    Ok(KmBound {
        k,
        message_term,
        round_term,
        bound: message_term + round_term,
        dominant,
    })
}

pub fn kmachine_table(meas: &CostMeasurement, ks: &[u64]) -> Result<Vec<KmBound>> {
    ks.iter().map(|&k| kmachine_round_bound(meas, k)).collect()
}

/// Machine count where both terms are equal, `M/(T·C)`; below it the
/// message term dominates.
pub fn crossover_k(meas: &CostMeasurement) -> Option<f64> {
    let denom = meas.rounds * meas.max_node_messages;
    (denom > 0.0).then(|| meas.messages / denom)
}

/// Worst-case complexities of the estimation protocol: `M = r·K`, `C = r`,
/// `T = K`.
pub fn phkpr_symbolic(n: usize, max_degree: usize, eps: f64, c: f64) -> Result<CostMeasurement> {
    let p = walk_parameters(n, eps, c)?;
    let (r, k) = (p.tokens as f64, p.step_cap as f64);
    CostMeasurement::new(r * k, r, k, n, max_degree)
}

/// Worst-case complexities of estimation followed by a sweep:
/// `M = r·K + (1/ε)·ln n`, `C = max(r, Δ)`, `T = K + 1/ε`.
pub fn local_cluster_symbolic(n: usize, max_degree: usize, eps: f64, c: f64) -> Result<CostMeasurement> {
    let p = walk_parameters(n, eps, c)?;
    let (r, k) = (p.tokens as f64, p.step_cap as f64);
    let messages = r * k + (n as f64).ln() / eps;
    let degree = r.max(max_degree as f64);
    CostMeasurement::new(messages, degree, k + 1.0 / eps, n, max_degree)
}

/// `(ln(1/ε), ln ln(1/ε))` with the step cap's treatment of a nonpositive
/// denominator.
fn log_terms(eps: f64) -> (f64, f64) {
    let l = (1.0 / eps).ln();
    let ll = l.ln();
    (l, if ll > 0.0 { ll } else { 1.0 })
}

/// Estimation round bound without hidden factors:
/// `ln(1/ε) / (ε³·k·ln ln(1/ε)) · (1/k + 1)`.
pub fn closed_form_phkpr_bound(eps: f64, k: u64) -> f64 {
    let (l, ll) = log_terms(eps);
    let kf = k as f64;
    l / (eps.powi(3) * kf * ll) * (1.0 / kf + 1.0)
}

/// Local-cluster round bound without hidden factors:
/// `ln(1/ε)/(ε³k² ln ln(1/ε)) + 1/(εk²) + (ln(1/ε)/(k ln ln(1/ε)) + 1/(kε))·max(1/ε³, Δ)`.
pub fn closed_form_cluster_bound(eps: f64, max_degree: usize, k: u64) -> f64 {
    let (l, ll) = log_terms(eps);
    let kf = k as f64;
    l / (eps.powi(3) * kf * kf * ll)
        + 1.0 / (eps * kf * kf)
        + (l / (kf * ll) + 1.0 / (kf * eps)) * eps.powi(-3).max(max_degree as f64)
}

/// Factor hidden by the closed-form bounds: `r·ε³` (the constant 16 and
/// the `ln n` in the token count) times `K·ln ln(1/ε)/ln(1/ε)` (the constant
/// `2c` and the rounding in the step cap). Close to `32·c·ln n`.
pub fn dropped_factor(n: usize, eps: f64, c: f64) -> Result<f64> {
    let p = walk_parameters(n, eps, c)?;
    let (l, ll) = log_terms(eps);
    Ok(p.tokens as f64 * eps.powi(3) * p.step_cap as f64 * ll / l)
}
