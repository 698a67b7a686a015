#![allow(dead_code)]

pub mod oracle;

use std::path::PathBuf;

/// MNIST directory for tests that need the real data set.
pub fn mnist_dir() -> PathBuf {
    std::env::var_os("CONVPIPE_DATA_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/mnist")))
}
