#![no_main]

use hrlgym::action_space::ActionRegistry;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    let reg = ActionRegistry::builtin();
    if let Ok(a) = reg.parse_action(text) {
        assert_eq!(reg.parse_action(&reg.format_action(&a)).unwrap(), a);
    }
});
