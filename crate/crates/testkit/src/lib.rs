//! Test support for the cloudcap crates: frame and pcap builders, seeded
//! capture generators, and brute-force oracles for the report datasets and
//! flow aggregation.

pub mod frames;
pub mod generate;
pub mod oracle;

use std::path::PathBuf;

/// Root of the checked-in test data (`testdata/` at the workspace root).
pub fn testdata_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../testdata")
}

/// Golden corpus pcaps, sorted by file name.
pub fn corpus_files() -> Vec<PathBuf> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(testdata_dir().join("corpus"))
        .expect("corpus directory")
        .map(|e| e.expect("dir entry").path())
        .filter(|p| p.extension().is_some_and(|e| e == "pcap"))
        .collect();
    files.sort();
    files
}
