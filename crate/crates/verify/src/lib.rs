//! Independent oracles for the acceptance suite.

use std::path::{Path, PathBuf};

use dhkpr::Graph;
use statrs::distribution::{Discrete, DiscreteCDF, Poisson};

/// Row-stochastic transition matrix `D⁻¹A`, dense.
pub fn transition_matrix(g: &Graph) -> Vec<Vec<f64>> {
    let n = g.node_count();
    (0..n)
        .map(|u| {
            let mut row = vec![0.0; n];
            let d = g.degree(u) as f64;
            for &v in g.neighbors(u) {
                row[v] += 1.0 / d;
            }
            row
        })
        .collect()
}

fn matmul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = b.len();
    a.iter()
        .map(|row| {
            let mut out = vec![0.0; n];
            for (k, &x) in row.iter().enumerate() {
                if x != 0.0 {
                    for (o, &y) in out.iter_mut().zip(&b[k]) {
                        *o += x * y;
                    }
                }
            }
            out
        })
        .collect()
}

/// `Σ_k Pois(t)(k)·P^k` by explicit matrix powers, summed until the Poisson
/// upper tail drops below `tail`. Row `s` is the heat kernel pagerank of `s`.
pub fn dense_heat_kernel(g: &Graph, t: f64, tail: f64) -> Vec<Vec<f64>> {
    let n = g.node_count();
    let identity: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| f64::from(i == j)).collect()).collect();
    if t == 0.0 {
        return identity;
    }
    let law = Poisson::new(t).expect("positive rate");
    let p = transition_matrix(g);
    let mut power = identity;
    let mut sum = vec![vec![0.0; n]; n];
    let mut k = 0u64;
    loop {
        let w = law.pmf(k);
        for (srow, prow) in sum.iter_mut().zip(&power) {
            for (s, &x) in srow.iter_mut().zip(prow) {
                *s += w * x;
            }
        }
        if law.sf(k) < tail {
            return sum;
        }
        power = matmul(&power, &p);
        k += 1;
    }
}

/// Directory holding the golden reports and their command manifest.
pub fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../cli/tests/golden")
}

/// `(name, args)` per manifest line; arguments are relative to the cli package.
pub fn golden_cases() -> std::io::Result<Vec<(String, Vec<String>)>> {
    let text = std::fs::read_to_string(golden_dir().join("manifest.txt"))?;
    Ok(text
        .lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .map(|l| {
            let mut words = l.split_whitespace().map(String::from);
            let name = words.next().unwrap_or_default();
            (name, words.collect())
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use dhkpr::generators;

    #[test]
    fn two_node_closed_form() {
        let m = dense_heat_kernel(&generators::path(2), 2f64.ln(), 1e-15);
        assert!((m[0][0] - 0.625).abs() < 1e-14);
        assert!((m[0][1] - 0.375).abs() < 1e-14);
    }

    #[test]
    fn rows_are_distributions() {
        let m = dense_heat_kernel(&generators::karate(), 8.0, 1e-15);
        for row in m {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
