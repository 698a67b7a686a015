//! Shared fixtures for the criterion benches.

use convpipe_core::dataio::{make_batches, synthetic_dataset};
use convpipe_core::hoststage::{host_stage, ConvBatch};
use convpipe_core::{MiniBatch, ModelDims};

pub fn mini_batch(seed: u64) -> MiniBatch {
    let dims = ModelDims::default();
    let (images, labels) = synthetic_dataset(seed, dims.batch_size);
    make_batches(&images, &labels, dims.batch_size)
        .expect("matching counts")
        .next()
        .expect("one full batch")
}

pub fn conv_batch(seed: u64) -> ConvBatch {
    host_stage(&mini_batch(seed)).expect("valid batch")
}
