#![no_main]

use hrlgym::agents::checkpoint::Checkpoint;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|bytes: &[u8]| {
    if let Ok(c) = Checkpoint::from_bytes(bytes) {
        let _ = c.to_policy();
    }
});
