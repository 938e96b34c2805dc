#![no_main]

use libfuzzer_sys::fuzz_target;
use ncsm::datasets::parse_linqs;

fuzz_target!(|data: &[u8]| {
    // Content and citation files are separated by the first NUL byte.
    let (content, cites) = match data.iter().position(|&b| b == 0) {
        Some(i) => (&data[..i], &data[i + 1..]),
        None => (data, &[][..]),
    };
    if let Ok(ds) = parse_linqs(content, cites) {
        assert_eq!(ds.node_ids.len(), ds.graph.num_nodes());
    }
});
