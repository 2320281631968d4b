#![no_main]

use hrlgym::config::RunConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    if let Ok(cfg) = RunConfig::from_text(text) {
        // Dumped configs always load again.
        RunConfig::from_text(&cfg.to_text()).unwrap();
    }
});
