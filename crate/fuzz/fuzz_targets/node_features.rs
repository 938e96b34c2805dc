#![no_main]

use libfuzzer_sys::fuzz_target;
use ncsm::graph::load_node_features;

fuzz_target!(|data: &[u8]| {
    // The first byte picks the expected row count.
    let Some((&n, text)) = data.split_first() else { return };
    if let Ok(x) = load_node_features(text, n as usize) {
        assert_eq!(x.rows(), n as usize);
        assert!(x.values().iter().all(|v| v.is_finite()));
    }
});
