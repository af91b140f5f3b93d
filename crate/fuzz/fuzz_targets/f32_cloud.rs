#![no_main]

use dualarm_shape::PointCloud;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|bytes: &[u8]| {
    if let Ok(cloud) = PointCloud::parse_f32_le(bytes) {
        assert_eq!(cloud.to_f32_le(), bytes);
    }
});
