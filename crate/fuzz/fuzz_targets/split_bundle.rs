#![no_main]

use libfuzzer_sys::fuzz_target;
use ncsm::graph::parse_split_bundle;

fuzz_target!(|data: &[u8]| {
    // The five bundle files are separated by NUL bytes; missing ones are empty.
    let mut parts = data.splitn(5, |&b| b == 0);
    let files: [&[u8]; 5] = std::array::from_fn(|_| parts.next().unwrap_or(&[]));
    if let Ok(split) = parse_split_bundle(files, Some(1 << 12)) {
        assert_eq!(split.train_graph.num_edges(), split.train_pos.len());
    }
});
