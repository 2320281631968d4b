#![no_main]

use hrlgym::action_space::ActionRegistry;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    let _ = ActionRegistry::parse(text);
});
