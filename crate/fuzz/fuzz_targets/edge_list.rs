#![no_main]

use dhkpr::graph::{load_edge_list, parse_edge_list};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(g) = load_edge_list(data) else { return };
    assert!(g.node_count() >= 2 && g.node_count() <= g.edge_count() + 1);
    let degrees: usize = (0..g.node_count()).map(|v| g.degree(v)).sum();
    assert_eq!(degrees, 2 * g.edge_count());
    let back = parse_edge_list(&g.to_edge_list()).expect("printed graphs reload");
    assert!(back.edges().eq(g.edges()));
});
