//! Graph arguments: an edge-list path, or `gen:` for a built-in instance.

use std::fs::File;
use std::io::BufReader;

use dhkpr::graph::load_edge_list;
use dhkpr::{generators, Graph, GraphError};

pub const GENERATOR_HELP: &str = "edge-list path, or gen:path:N, gen:cycle:N, gen:clique:N, \
gen:two-clique:SIZE, gen:karate, gen:random:N:AVG_DEGREE:SEED";

#[derive(Debug)]
pub enum SourceError {
    /// Bad generator spec; an argument error.
    Spec(String),
    Graph(GraphError),
}

fn int(field: Option<&str>, what: &str, spec: &str) -> Result<usize, SourceError> {
    field
        .and_then(|f| f.parse().ok())
        .filter(|&x: &usize| x >= 1)
        .ok_or_else(|| SourceError::Spec(format!("{spec}: expected a positive integer {what}")))
}

pub fn load(source: &str) -> Result<Graph, SourceError> {
    let Some(spec) = source.strip_prefix("gen:") else {
        let file = File::open(source).map_err(|e| SourceError::Graph(GraphError::Io(format!("{source}: {e}"))))?;
        return load_edge_list(BufReader::new(file)).map_err(SourceError::Graph);
    };
    let mut parts = spec.split(':');
    let kind = parts.next().unwrap_or_default();
    let g = match kind {
        "path" => generators::path(int(parts.next(), "node count", source)?),
        "cycle" => {
            let n = int(parts.next(), "node count", source)?;
            if n < 3 {
                return Err(SourceError::Spec(format!("{source}: a cycle needs at least 3 nodes")));
            }
            generators::cycle(n)
        }
        "clique" => generators::clique(int(parts.next(), "node count", source)?),
        "two-clique" => {
            let size = int(parts.next(), "clique size", source)?;
            if size < 2 {
                return Err(SourceError::Spec(format!("{source}: cliques need at least 2 nodes")));
            }
            generators::two_clique_bridge(size)
        }
        "karate" => generators::karate(),
        "random" => {
            let n = int(parts.next(), "node count", source)?;
            let avg: f64 = parts
                .next()
                .and_then(|f| f.parse().ok())
                .filter(|x: &f64| x.is_finite() && *x >= 0.0)
                .ok_or_else(|| SourceError::Spec(format!("{source}: expected an average degree")))?;
            let seed: u64 = parts
                .next()
                .and_then(|f| f.parse().ok())
                .ok_or_else(|| SourceError::Spec(format!("{source}: expected a generator seed")))?;
            generators::random_connected(n, avg, seed)
        }
        _ => {
            return Err(SourceError::Spec(format!(
                "unknown generator {kind:?}; {GENERATOR_HELP}"
            )))
        }
    };
    if parts.next().is_some() {
        return Err(SourceError::Spec(format!("{source}: too many fields")));
    }
    Ok(g)
}
