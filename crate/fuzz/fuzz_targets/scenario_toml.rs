#![no_main]

use dualarm_pipeline::ScenarioFile;
use libfuzzer_sys::fuzz_target;

// Parsing only; loading would touch the file system.
fuzz_target!(|text: &str| {
    let _ = ScenarioFile::parse(text);
});
