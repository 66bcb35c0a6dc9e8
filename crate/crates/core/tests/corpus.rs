//! Runs the checked-in fuzz seeds through their parsers.

use std::fs;
use std::path::{Path, PathBuf};

use consensus_core::config::ExperimentSpec;
use consensus_core::gains::{GainSpec, GainTable};
use consensus_core::graph::parse_edge_list;
use consensus_core::noise::{parse_sigma_matrix, NoiseSpec};

fn seeds(target: &str) -> Vec<(PathBuf, String)> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../fuzz/corpus")
        .join(target);
    let mut out: Vec<_> = fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| {
            let p = e.unwrap().path();
            let text = fs::read_to_string(&p).unwrap();
            (p, text)
        })
        .collect();
    out.sort();
    assert!(!out.is_empty());
    out
}

#[test]
fn seeds_parse() {
    for (p, t) in seeds("edge_list") {
        parse_edge_list(&t, "seed").unwrap_or_else(|e| panic!("{}: {e}", p.display()));
    }
    for (p, t) in seeds("gain_spec") {
        GainSpec::parse(&t).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
    }
    for (p, t) in seeds("gain_table") {
        GainTable::parse(&t, "seed").unwrap_or_else(|e| panic!("{}: {e}", p.display()));
    }
    for (p, t) in seeds("noise_spec") {
        NoiseSpec::parse(&t).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
    }
    for (p, t) in seeds("sigma_matrix") {
        parse_sigma_matrix(&t, "seed").unwrap_or_else(|e| panic!("{}: {e}", p.display()));
    }
    for (p, t) in seeds("experiment") {
        if p.ends_with("lambda") {
            consensus_core::cli::parse_lambda(&t).unwrap();
        } else {
            ExperimentSpec::parse(&t, "seed", Path::new(".")).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
        }
    }
}
