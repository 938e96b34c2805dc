#![no_main]

use libfuzzer_sys::fuzz_target;
use ncsm::graph::{parse_edge_list, Graph};

fuzz_target!(|data: &[u8]| {
    let Ok(parsed) = parse_edge_list(data) else { return };
    let Some(max) = parsed.edges.max_node() else { return };
    if max < 1 << 16 {
        let g = Graph::from_edges(&parsed.edges, max + 1).unwrap();
        assert_eq!(g.num_edges(), parsed.edges.len());
        let again = parse_edge_list(g.edge_list().to_text().as_bytes()).unwrap();
        assert_eq!(again.edges.len(), parsed.edges.len());
    }
});
