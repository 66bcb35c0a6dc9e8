#![no_main]

use consensus_core::gains::{check_conditions, ConditionRates, GainFunction, GainTable};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(table) = GainTable::parse(text, "fuzz") {
        let end = table.end();
        let gain = GainFunction::Tabulated(table);
        let _ = gain.integral(0.0, end);
        let _ = check_conditions(&gain, ConditionRates::default());
    }
});
