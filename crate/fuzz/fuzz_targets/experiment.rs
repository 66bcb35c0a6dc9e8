#![no_main]

use consensus_core::cli::parse_lambda;
use consensus_core::config::{parse_vector, ExperimentSpec};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let _ = ExperimentSpec::parse(text, "fuzz", std::path::Path::new("."));
    let _ = parse_vector(text);
    let _ = parse_lambda(text);
});
