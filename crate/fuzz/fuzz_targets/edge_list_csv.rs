#![no_main]

use libfuzzer_sys::fuzz_target;
use ncsm::graph::parse_edge_list_with;

fuzz_target!(|data: &[u8]| {
    if let Ok(parsed) = parse_edge_list_with(data, Some(',')) {
        assert!(parsed.edges.iter().all(|(u, v)| u != v));
    }
});
