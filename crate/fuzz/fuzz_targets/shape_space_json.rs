#![no_main]

use dualarm_shape::ShapeSpace;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    if let Ok(space) = ShapeSpace::from_json(text) {
        let again = ShapeSpace::from_json(&space.to_json()).expect("written bundle parses");
        assert_eq!(again.dim(), space.dim());
    }
});
