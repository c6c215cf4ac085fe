#![allow(dead_code)]

use std::path::PathBuf;
use std::process::{Command, Output};

pub fn networks_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../networks")
}

pub fn golden_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

pub fn network(name: &str) -> String {
    networks_dir().join(name).display().to_string()
}

/// Runs the built binary with `args`, `{name}.json` tokens resolved against
/// the networks directory.
pub fn run_cli(args: &[&str]) -> Output {
    let resolved: Vec<String> = args
        .iter()
        .map(|a| if a.ends_with(".json") { network(a) } else { a.to_string() })
        .collect();
    Command::new(env!("CARGO_BIN_EXE_gffresist"))
        .args(&resolved)
        .env_remove("GFFRESIST_SEED")
        .output()
        .expect("binary runs")
}

/// Golden cases: file name and arguments. Covers the parallel pair,
/// triangle and series path examples.
pub const GOLDEN_CASES: &[(&str, &[&str])] = &[
    ("parallel_pair_reff.txt", &["reff", "--network", "parallel_pair_bar.json", "--pair", "a,b"]),
    (
        "parallel_pair_superadd.txt",
        &["verify", "superadd", "--network", "parallel_pair.json", "--bar-network", "parallel_pair_bar.json", "--pair", "a,b"],
    ),
    (
        "parallel_pair_melvin.txt",
        &["verify", "melvin", "--network", "parallel_pair.json", "--bar-network", "parallel_pair_bar.json", "--pair", "a,b"],
    ),
    (
        "parallel_pair_entropy.txt",
        &["verify", "entropy", "--network", "parallel_pair.json", "--bar-network", "parallel_pair_bar.json", "--pair", "a,b"],
    ),
    (
        "parallel_pair_entropy.json",
        &[
            "verify", "entropy", "--network", "parallel_pair.json", "--bar-network", "parallel_pair_bar.json", "--pair",
            "a,b", "--format", "json",
        ],
    ),
    ("triangle_reff.txt", &["reff", "--network", "triangle.json", "--pair", "a,b"]),
    ("triangle_gff.txt", &["gff", "--network", "triangle.json", "--pair", "a,b"]),
    ("triangle_thomson.txt", &["thomson", "--network", "triangle.json", "--pair", "a,b"]),
    ("triangle_scaling.txt", &["verify", "scaling", "--network", "triangle.json", "--pair", "a,b", "--factor", "3"]),
    ("triangle_mc.txt", &["verify", "mc", "--network", "triangle.json", "--pair", "a,b", "--samples", "20000", "--seed", "7"]),
    ("series_path_reff.txt", &["reff", "--network", "series_path.json", "--pair", "a,c"]),
    (
        "series_path_superadd.txt",
        &["verify", "superadd", "--network", "series_path.json", "--bar-network", "series_path_bar.json", "--pair", "a,c"],
    ),
    (
        "series_path_concavity.txt",
        &[
            "verify", "concavity", "--network", "series_path.json", "--bar-network", "series_path_bar.json", "--pair",
            "a,c", "--grid", "5",
        ],
    ),
    (
        "series_path_superadd.json",
        &[
            "verify", "superadd", "--network", "series_path.json", "--bar-network", "series_path_bar.json", "--pair",
            "a,c", "--format", "json",
        ],
    ),
];
