#![no_main]

use hrlgym::state_encoder::PcaModel;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    let _ = PcaModel::from_text(text);
});
