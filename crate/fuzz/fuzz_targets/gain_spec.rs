#![no_main]

use consensus_core::gains::{parse_number, GainSpec};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let _ = parse_number(text);
    if let Ok(spec) = GainSpec::parse(text) {
        if !matches!(spec, GainSpec::Table(_)) {
            let gain = spec.load(std::path::Path::new(".")).expect("parametric gains load");
            let again = GainSpec::parse(&gain.to_string()).expect("printed gain parses");
            assert_eq!(again, spec);
        }
    }
});
