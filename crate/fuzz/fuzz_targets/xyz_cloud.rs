#![no_main]

use dualarm_shape::PointCloud;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    if let Ok(cloud) = PointCloud::parse_xyz(text) {
        let again = PointCloud::parse_xyz(&cloud.to_xyz()).expect("written cloud parses");
        assert_eq!(again.points(), cloud.points());
    }
});
