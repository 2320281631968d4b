#![no_main]

use hrlgym::action_space::ActionRegistry;
use hrlgym::environment::Trace;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    let _ = Trace::parse(text, &ActionRegistry::builtin());
});
