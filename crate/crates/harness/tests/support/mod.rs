//! Small configurations and on-disk datasets shared by the harness tests.
#![allow(dead_code)]

use std::path::Path;

use colsod_data::{synthetic, Split};
use colsod_harness::RunConfig;

/// A run that finishes in a few seconds: 16×16 inputs, four scenes, three steps.
pub fn quick_config() -> RunConfig {
    RunConfig {
        input_side: 16,
        synthetic_samples: 4,
        epochs: 2,
        max_steps: Some(3),
        ..RunConfig::default()
    }
}

/// Writes a synthetic test split under `root`; with `keep_depth` false the
/// depth directory is deleted afterwards.
pub fn test_split(root: &Path, count: usize, keep_depth: bool) {
    synthetic::write_dataset(root, Split::Test, 16, count, 77).unwrap();
    if !keep_depth {
        std::fs::remove_dir_all(root.join("test").join("depth")).unwrap();
    }
}

pub fn same_bits(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
}
