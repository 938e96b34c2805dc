#![no_main]

use libfuzzer_sys::fuzz_target;
use ncsm::autodiff::Checkpoint;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(ckpt) = Checkpoint::parse(text) {
        let again = Checkpoint::parse(&ckpt.to_text()).unwrap();
        assert_eq!(again.len(), ckpt.len());
    }
});
