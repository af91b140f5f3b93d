#![no_main]

use dualarm_pipeline::BenchmarkReport;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    if let Ok(report) = BenchmarkReport::from_json(text) {
        BenchmarkReport::from_json(&report.to_json()).expect("written report parses");
    }
});
