//! Personalized heat kernel pagerank: the exact truncated-series oracle,
//! Poisson walk lengths, walk parameters and the serial Monte Carlo
//! estimator.
//!
//! For a seed `s` the vector is `ρ = Σ_k e^{-t} t^k/k! · χ_s P^k` with the
//! row-stochastic walk matrix `P = D^{-1} A`, i.e. the endpoint distribution
//! of a random walk whose length is Poisson(`t`).

use rand::Rng;
use rand_distr::{Binomial, Distribution, Poisson};

use crate::graph::{Graph, NodeId};
use crate::rng::{self, domain};
use crate::{invalid, Result};

/// Largest mean sampled by sequential-search inversion.
pub const INVERSION_MAX_MEAN: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VectorKind {
    /// Truncated series; entries sum to within the truncation tolerance of 1.
    Exact,
    /// Token frequencies; `tokens` walks were launched.
    Estimated { tokens: u64 },
}

/// Sparse nonnegative vector over nodes. Only strictly positive entries are
/// stored, sorted by node ID.
#[derive(Debug, Clone, PartialEq)]
pub struct PhkprVector {
    pub seed: NodeId,
    pub t: f64,
    pub kind: VectorKind,
    entries: Vec<(NodeId, f64)>,
    counts: Vec<u64>,
}

impl PhkprVector {
    /// Builds an exact-kind vector from dense values, dropping zeros.
    pub fn from_dense(seed: NodeId, t: f64, dense: &[f64]) -> Self {
        let entries = dense
            .iter()
            .enumerate()
            .filter(|(_, &x)| x > 0.0)
            .map(|(v, &x)| (v, x))
            .collect();
        PhkprVector {
            seed,
            t,
            kind: VectorKind::Exact,
            entries,
            counts: Vec::new(),
        }
    }

    /// Builds an estimated vector from per-node token counts; entries are
    /// `count / tokens` where `tokens` is the sum of all counts.
    pub fn from_counts<I>(seed: NodeId, t: f64, counts: I) -> Self
    where
        I: IntoIterator<Item = (NodeId, u64)>,
    {
        let mut pairs: Vec<(NodeId, u64)> = counts.into_iter().filter(|&(_, c)| c > 0).collect();
        pairs.sort_unstable_by_key(|&(v, _)| v);
        let tokens: u64 = pairs.iter().map(|&(_, c)| c).sum();
        let entries = pairs.iter().map(|&(v, c)| (v, c as f64 / tokens as f64)).collect();
        PhkprVector {
            seed,
            t,
            kind: VectorKind::Estimated { tokens },
            entries,
            counts: pairs.into_iter().map(|(_, c)| c).collect(),
        }
    }

    pub fn entries(&self) -> &[(NodeId, f64)] {
        &self.entries
    }

    /// `(node, tokens held)` pairs for an estimated vector.
    pub fn token_counts(&self) -> Option<impl Iterator<Item = (NodeId, u64)> + '_> {
        match self.kind {
            VectorKind::Estimated { .. } => Some(self.entries.iter().zip(&self.counts).map(|(&(v, _), &c)| (v, c))),
            VectorKind::Exact => None,
        }
    }

    pub fn tokens(&self) -> Option<u64> {
        match self.kind {
            VectorKind::Estimated { tokens } => Some(tokens),
            VectorKind::Exact => None,
        }
    }

    pub fn value(&self, v: NodeId) -> f64 {
        self.entries
            .binary_search_by_key(&v, |&(u, _)| u)
            .map(|i| self.entries[i].1)
            .unwrap_or(0.0)
    }

    pub fn support_len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn support(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.entries.iter().map(|&(v, _)| v)
    }

    pub fn sum(&self) -> f64 {
        self.entries.iter().map(|&(_, x)| x).sum()
    }

    pub fn to_dense(&self, n: usize) -> Vec<f64> {
        let mut dense = vec![0.0; n];
        for &(v, x) in &self.entries {
            dense[v] = x;
        }
        dense
    }

    /// Entries sorted by value descending, ties by ascending node ID.
    pub fn ranked(&self) -> Vec<(NodeId, f64)> {
        let mut ranked = self.entries.clone();
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        ranked
    }
}

fn ln_factorial(k: u64) -> f64 {
    (1..=k).map(|i| (i as f64).ln()).sum()
}

/// Poisson(`t`) probability of `k`, evaluated in log space so large means
/// do not underflow at `e^{-t}`.
pub fn poisson_pmf(t: f64, k: u64) -> f64 {
    if t == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    (-t + k as f64 * t.ln() - ln_factorial(k)).exp()
}

/// Index well beyond which the Poisson(`t`) tail is negligible in `f64`.
fn poisson_horizon(t: f64) -> u64 {
    (t + 40.0 * t.sqrt() + 60.0).ceil() as u64
}

/// Weights `w_0..=w_N` for the smallest `N` whose upper tail
/// `1 - Σ_{k≤N} w_k` is at most `tol`.
pub fn truncated_poisson_weights(t: f64, tol: f64) -> Vec<f64> {
    if t == 0.0 {
        return vec![1.0];
    }
    let horizon = poisson_horizon(t);
    let ln_t = t.ln();
    let mut weights = Vec::new();
    let mut ln_w = -t;
    let mut cumulative = 0.0;
    for k in 0..=horizon {
        if k > 0 {
            ln_w += ln_t - (k as f64).ln();
        }
        let w = ln_w.exp();
        weights.push(w);
        cumulative += w;
        if 1.0 - cumulative <= tol {
            break;
        }
    }
    weights
}

/// `P(X ≥ k)` for `k = 0..=cap`. The pmf is built outward from the mode
/// and normalized, which keeps `P(X ≥ 0)` at 1 even for large means.
pub fn poisson_upper_tails(t: f64, cap: u64) -> Vec<f64> {
    let mut tails = vec![0.0; cap as usize + 1];
    if t == 0.0 {
        tails[0] = 1.0;
        return tails;
    }
    let horizon = poisson_horizon(t).max(cap) as usize;
    let mode = (t.floor() as usize).min(horizon);
    let mut w = vec![0.0; horizon + 1];
    w[mode] = 1.0;
    for k in mode..horizon {
        w[k + 1] = w[k] * t / (k + 1) as f64;
    }
    for k in (1..=mode).rev() {
        w[k - 1] = w[k] * k as f64 / t;
    }
    let total: f64 = w.iter().sum();
    let mut acc = 0.0;
    for k in (0..=horizon).rev() {
        acc += w[k];
        if k <= cap as usize {
            tails[k] = acc / total;
        }
    }
    tails
}

/// Exact PHKPR by iterated vector-matrix products, truncated once the
/// Poisson tail mass falls to `tol`. Each coordinate is within `tol` of the
/// infinite series.
pub fn exact_phkpr(g: &Graph, seed: NodeId, t: f64, tol: f64) -> Result<PhkprVector> {
    g.check_node(seed)?;
    check_time(t)?;
    if !(tol > 0.0 && tol < 1.0) {
        return Err(invalid(format!("tolerance must lie in (0, 1), got {tol}")));
    }
    let n = g.node_count();
    let weights = truncated_poisson_weights(t, tol);
    let mut current = vec![0.0; n];
    current[seed] = 1.0;
    let mut result = vec![0.0; n];
    let mut next = vec![0.0; n];
    for (k, &w) in weights.iter().enumerate() {
        if k > 0 {
            next.iter_mut().for_each(|x| *x = 0.0);
            for (u, &mass) in current.iter().enumerate() {
                if mass == 0.0 {
                    continue;
                }
                let nbrs = g.neighbors(u);
                if nbrs.is_empty() {
                    next[u] += mass;
                    continue;
                }
                let share = mass / nbrs.len() as f64;
                for &v in nbrs {
                    next[v] += share;
                }
            }
            std::mem::swap(&mut current, &mut next);
        }
        for (r, &c) in result.iter_mut().zip(&current) {
            *r += w * c;
        }
    }
    Ok(PhkprVector::from_dense(seed, t, &result))
}

pub(crate) fn check_time(t: f64) -> Result<()> {
    if t.is_finite() && t >= 0.0 {
        Ok(())
    } else {
        Err(invalid(format!(
            "diffusion time must be finite and nonnegative, got {t}"
        )))
    }
}

/// Draws a walk length from Poisson(`t`). Means up to
/// [`INVERSION_MAX_MEAN`] use sequential-search inversion on one uniform;
/// larger means defer to `rand_distr`'s rejection sampler.
pub fn sample_walk_length<R: Rng + ?Sized>(t: f64, rng: &mut R) -> u64 {
    if t == 0.0 {
        return 0;
    }
    if t <= INVERSION_MAX_MEAN {
        let u: f64 = rng.random();
        let mut p = (-t).exp();
        let mut cdf = p;
        let mut k = 0u64;
        while u > cdf {
            k += 1;
            p *= t / k as f64;
            cdf += p;
            if p == 0.0 {
                break;
            }
        }
        k
    } else {
        let dist = Poisson::new(t).expect("finite positive mean");
        dist.sample(rng) as u64
    }
}

/// Histogram of `tokens` independent lengths `min(Poisson(t), cap)`,
/// drawn as a chain of conditional binomials. Entry `k` counts walks of
/// length `k`; the law equals that of `tokens` separate draws.
pub fn sample_length_histogram<R: Rng + ?Sized>(t: f64, cap: u64, tokens: u64, rng: &mut R) -> Vec<u64> {
    let mut hist = vec![0u64; cap as usize + 1];
    let tails = poisson_upper_tails(t, cap);
    let mut remaining = tokens;
    for k in 0..cap {
        if remaining == 0 {
            break;
        }
        let tail = tails[k as usize];
        let q = if tail > 0.0 {
            ((tail - tails[k as usize + 1]) / tail).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let drawn = Binomial::new(remaining, q).expect("probability in [0, 1]").sample(rng);
        hist[k as usize] = drawn;
        remaining -= drawn;
    }
    hist[cap as usize] += remaining;
    hist
}

/// Token count `r` and step cap `K` for the Monte Carlo estimators.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WalkParams {
    pub tokens: u64,
    pub step_cap: u64,
}

/// `r = ⌈(16/ε³)·ln n⌉`, at least one token. Defined for `0 < ε < 1`.
pub fn token_count(n: usize, eps: f64) -> Result<u64> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(invalid(format!("error bound must lie in (0, 1), got {eps}")));
    }
    if n == 0 {
        return Err(invalid("graph size must be positive"));
    }
    let r = (16.0 / eps.powi(3) * (n as f64).ln()).ceil();
    Ok((r as u64).max(1))
}

/// `K = max(1, ⌈c·2·ln(1/ε) / ln ln(1/ε)⌉)` for `0 < ε < 1/2` and `c ≥ 1`.
/// Where `ln ln(1/ε) ≤ 0` (that is `ε ≥ 1/e`) the denominator is taken as 1.
pub fn step_cap(eps: f64, c: f64) -> Result<u64> {
    if !(eps > 0.0 && eps < 0.5) {
        return Err(invalid(format!("error bound must lie in (0, 1/2), got {eps}")));
    }
    if !(c >= 1.0 && c.is_finite()) {
        return Err(invalid(format!("step constant must be at least 1, got {c}")));
    }
    let ln_inv = (1.0 / eps).ln();
    let lnln = ln_inv.ln();
    let denom = if lnln > 0.0 { lnln } else { 1.0 };
    let k = (c * 2.0 * ln_inv / denom).ceil();
    Ok((k as u64).max(1))
}

pub fn walk_parameters(n: usize, eps: f64, c: f64) -> Result<WalkParams> {
    let step_cap = step_cap(eps, c)?;
    Ok(WalkParams {
        tokens: token_count(n, eps)?,
        step_cap,
    })
}

/// Serial Monte Carlo estimate: `r` independent walks of length
/// `min(Poisson(t), K)`, each on its own random stream keyed by token index.
pub fn serial_estimate_phkpr(g: &Graph, seed: NodeId, t: f64, eps: f64, c: f64, rng_seed: u64) -> Result<PhkprVector> {
    g.check_node(seed)?;
    check_time(t)?;
    let params = walk_parameters(g.node_count(), eps, c)?;
    let mut counts = vec![0u64; g.node_count()];
    for token in 0..params.tokens {
        let mut rng = rng::stream(rng_seed, &[domain::SERIAL_WALK, token]);
        let steps = sample_walk_length(t, &mut rng).min(params.step_cap);
        let mut at = seed;
        for _ in 0..steps {
            let nbrs = g.neighbors(at);
            if nbrs.is_empty() {
                break;
            }
            at = nbrs[rng.random_range(0..nbrs.len())];
        }
        counts[at] += 1;
    }
    Ok(PhkprVector::from_counts(seed, t, counts.into_iter().enumerate()))
}

/// Outcome of comparing an estimate against the true vector under the
/// ε-approximation definition.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ApproxCheck {
    /// Nodes violating `(1-ε)ρ(v) - ε ≤ ρ̂(v) ≤ (1+ε)ρ(v)`.
    pub bound_violations: Vec<NodeId>,
    /// Nodes with `ρ̂(v) = 0` but `ρ(v) > ε`.
    pub zero_violations: Vec<NodeId>,
}

impl ApproxCheck {
    pub fn holds(&self) -> bool {
        self.bound_violations.is_empty() && self.zero_violations.is_empty()
    }
}

pub fn check_approximation(estimate: &PhkprVector, truth: &PhkprVector, eps: f64, n: usize) -> ApproxCheck {
    let mut check = ApproxCheck::default();
    for v in 0..n {
        let est = estimate.value(v);
        let rho = truth.value(v);
        if est < (1.0 - eps) * rho - eps || est > (1.0 + eps) * rho {
            check.bound_violations.push(v);
        }
        if est == 0.0 && rho > eps {
            check.zero_violations.push(v);
        }
    }
    check
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_time_is_identity() {
        let g = generators::karate();
        let v = exact_phkpr(&g, 5, 0.0, 1e-9).unwrap();
        assert_eq!(v.entries(), &[(5, 1.0)]);
    }

    #[test]
    fn single_edge_closed_form() {
        let g = generators::path(2);
        let t = 2f64.ln();
        for s in 0..2 {
            let v = exact_phkpr(&g, s, t, 1e-12).unwrap();
            assert!((v.value(s) - 0.625).abs() < 1e-11);
            assert!((v.value(1 - s) - 0.375).abs() < 1e-11);
        }
    }

    #[test]
    fn triangle_closed_form() {
        let g = generators::clique(3);
        for &t in &[0.3, 1.0, 4.5] {
            let v = exact_phkpr(&g, 1, t, 1e-12).unwrap();
            let own = 1.0 / 3.0 + 2.0 / 3.0 * (-1.5 * t).exp();
            assert!((v.value(1) - own).abs() < 1e-11);
            for other in [0, 2] {
                assert!((v.value(other) - (1.0 - own) / 2.0).abs() < 1e-11);
            }
        }
    }

    #[test]
    fn two_node_diffusion_decreases_to_half() {
        let g = generators::path(2);
        let mut prev = 1.0;
        for i in 1..40 {
            let t = i as f64 * 0.25;
            let own = exact_phkpr(&g, 0, t, 1e-13).unwrap().value(0);
            assert!(own < prev && own > 0.5, "t={t} own={own}");
            prev = own;
        }
    }

    #[test]
    fn exact_mass_within_tolerance() {
        let g = generators::random_connected(40, 3.0, 3);
        for &t in &[0.5, 5.0, 60.0] {
            let v = exact_phkpr(&g, 0, t, 1e-6).unwrap();
            let sum = v.sum();
            assert!((1.0 - 1e-6..=1.0 + 1e-12).contains(&sum), "t={t} sum={sum}");
            assert!(v.entries().iter().all(|&(_, x)| x > 0.0));
        }
    }

    #[test]
    fn rejects_bad_tolerance() {
        let g = generators::path(3);
        assert!(exact_phkpr(&g, 0, 1.0, 0.0).is_err());
        assert!(exact_phkpr(&g, 0, 1.0, 1.0).is_err());
        assert!(exact_phkpr(&g, 0, -1.0, 0.1).is_err());
        assert!(exact_phkpr(&g, 9, 1.0, 0.1).is_err());
    }

    #[test]
    fn walk_parameter_examples() {
        assert_eq!(token_count(1024, 0.5).unwrap(), 888);
        assert_eq!(step_cap(0.1, 1.0).unwrap(), 6);
        assert_eq!(step_cap(0.4, 1.0).unwrap(), 2);
        assert!(step_cap(0.5, 1.0).is_err());
        assert!(walk_parameters(1024, 0.5, 1.0).is_err());
        assert!(step_cap(0.1, 0.5).is_err());
        assert_eq!(step_cap(0.1, 2.0).unwrap(), 12);
        assert_eq!(token_count(1, 0.1).unwrap(), 1);
    }

    #[test]
    fn zero_mean_sampler_is_degenerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!((0..1000).all(|_| sample_walk_length(0.0, &mut rng) == 0));
        assert_eq!(
            sample_length_histogram(0.0, 6, 500, &mut rng),
            vec![500, 0, 0, 0, 0, 0, 0]
        );
    }

    #[test]
    fn sampler_is_reproducible() {
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..100).map(|_| sample_walk_length(7.5, &mut rng)).collect::<Vec<_>>()
        };
        assert_eq!(draw(3), draw(3));
        assert_ne!(draw(3), draw(4));
    }

    #[test]
    fn large_mean_sampler_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let draws = 200_000;
        let t = 120.0;
        let mean = (0..draws).map(|_| sample_walk_length(t, &mut rng) as f64).sum::<f64>() / draws as f64;
        assert!((mean - t).abs() < 4.0 * (t / draws as f64).sqrt(), "mean={mean}");
    }

    #[test]
    fn histogram_conserves_tokens() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for &t in &[0.1, 3.0, 50.0, 3000.0] {
            let hist = sample_length_histogram(t, 6, 100_000, &mut rng);
            assert_eq!(hist.iter().sum::<u64>(), 100_000);
        }
        let hist = sample_length_histogram(3000.0, 6, 1000, &mut rng);
        assert_eq!(hist[6], 1000);
    }

    #[test]
    fn upper_tails_start_at_one() {
        for &t in &[0.01, 1.0, 10.0, 900.0] {
            let tails = poisson_upper_tails(t, 8);
            assert!((tails[0] - 1.0).abs() < 1e-12, "t={t}");
            assert!(tails.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn serial_estimate_conserves_tokens_and_stays_local() {
        let g = generators::cycle(40);
        let v = serial_estimate_phkpr(&g, 0, 4.0, 0.3, 1.0, 17).unwrap();
        let r = token_count(40, 0.3).unwrap();
        assert_eq!(v.tokens(), Some(r));
        assert_eq!(v.token_counts().unwrap().map(|(_, c)| c).sum::<u64>(), r);
        let k = step_cap(0.3, 1.0).unwrap() as usize;
        let dist = g.bfs_distances(0);
        assert!(v.support().all(|u| dist[u].unwrap() <= k));
        assert!(v.support_len() as u64 <= r);
    }

    #[test]
    fn serial_estimate_at_zero_time_is_point_mass() {
        let g = generators::karate();
        let v = serial_estimate_phkpr(&g, 3, 0.0, 0.2, 1.0, 1).unwrap();
        assert_eq!(v.entries(), &[(3, 1.0)]);
    }

    #[test]
    fn approximation_check_clauses() {
        let truth = PhkprVector::from_dense(0, 1.0, &[0.5, 0.3, 0.15, 0.05]);
        let good = PhkprVector::from_dense(0, 1.0, &[0.52, 0.28, 0.15, 0.0]);
        assert!(check_approximation(&good, &truth, 0.1, 4).holds());
        let too_high = PhkprVector::from_dense(0, 1.0, &[0.56, 0.24, 0.15, 0.05]);
        assert_eq!(check_approximation(&too_high, &truth, 0.1, 4).bound_violations, vec![0]);
        let missing = PhkprVector::from_dense(0, 1.0, &[0.55, 0.0, 0.15, 0.05]);
        let check = check_approximation(&missing, &truth, 0.1, 4);
        assert_eq!(check.zero_violations, vec![1]);
    }
}
