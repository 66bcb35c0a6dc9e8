//! Edge-list graphs. Anything that parses must print back to the same graph.
//!
//! ```bash
//! cargo fuzz run edge_list corpus/edge_list
//! ```

#![no_main]

use consensus_core::graph::{parse_edge_list, spectral_decompose, Digraph};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(g) = parse_edge_list(text, "fuzz") else {
        return;
    };
    let back: Digraph = g.to_string().parse().expect("printed graph parses");
    assert_eq!(back, g);
    if g.n_agents() <= 32 {
        let _ = spectral_decompose(&g);
    }
});
