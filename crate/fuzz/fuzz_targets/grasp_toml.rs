#![no_main]

use dualarm_shape::GraspPoses;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    if let Ok(grasps) = GraspPoses::parse(text) {
        GraspPoses::parse(&grasps.to_toml()).expect("written grasps parse");
    }
});
