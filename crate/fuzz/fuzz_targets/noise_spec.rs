#![no_main]

use consensus_core::noise::{NoiseSpec, SigmaSource};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(spec) = NoiseSpec::parse(text) else {
        return;
    };
    let uniform = match &spec {
        NoiseSpec::None => true,
        NoiseSpec::Additive { sigma } | NoiseSpec::MultLinear { sigma, .. } => {
            matches!(sigma, SigmaSource::Uniform(_))
        }
    };
    if uniform {
        if let Ok(model) = spec.load(4, std::path::Path::new(".")) {
            assert!(model.bound() >= 0.0);
        }
    }
});
