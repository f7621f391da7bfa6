//! Criterion benchmarks for the hot kernels; see `benches/kernels.rs`.

use std::path::PathBuf;

/// Path of a case in the workspace `data/` directory.
pub fn data_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}
