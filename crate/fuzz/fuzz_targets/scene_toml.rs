#![no_main]

use dualarm_core::formats::{parse_scene, scene_to_toml};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    if let Ok(scene) = parse_scene(text) {
        parse_scene(&scene_to_toml(&scene)).expect("written scene parses");
    }
});
