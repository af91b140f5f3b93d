#![no_main]

use dualarm_core::formats::{parse_robot, robot_to_toml};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    if let Ok(model) = parse_robot(text) {
        let again = parse_robot(&robot_to_toml(&model)).expect("written robot parses");
        assert_eq!(again.dof(), model.dof());
    }
});
