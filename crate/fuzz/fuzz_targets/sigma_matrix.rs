#![no_main]

use consensus_core::noise::{parse_sigma_matrix, NoiseModel};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(sigma) = parse_sigma_matrix(text, "fuzz") {
        let _ = NoiseModel::multiplicative_matrix(sigma, None);
    }
});
