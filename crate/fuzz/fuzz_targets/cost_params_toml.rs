#![no_main]

use dualarm_core::formats::{cost_params_to_toml, parse_cost_params};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    if let Ok(params) = parse_cost_params(text) {
        let again = parse_cost_params(&cost_params_to_toml(&params)).expect("written parameters parse");
        assert_eq!(again, params);
    }
});
