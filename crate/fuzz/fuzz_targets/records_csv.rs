#![no_main]

use hrlgym::metrics::{aggregate, read_records};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|bytes: &[u8]| {
    if let Ok(records) = read_records(bytes) {
        let _ = aggregate(&records);
    }
});
