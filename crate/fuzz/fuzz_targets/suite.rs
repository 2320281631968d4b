#![no_main]

use hrlgym::action_space::ActionRegistry;
use hrlgym::task_suite::{parse_suite_drafts, TaskSuite};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    let reg = ActionRegistry::builtin();
    let _ = parse_suite_drafts(text);
    if let Ok(suite) = TaskSuite::parse(text, &reg) {
        assert_eq!(TaskSuite::parse(&suite.to_file_string(&reg), &reg).unwrap(), suite);
    }
});
