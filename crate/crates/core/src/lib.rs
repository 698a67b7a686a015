//! Host/accelerator split CNN training.
//!
//! The host stage convolves each 28x28 image with a fixed sharpening kernel,
//! max-pools it, and flattens it to 169 features. The accelerator stage runs a
//! 169-128-10 network (ReLU, softmax, cross-entropy) and trains it with Adam.
//! Next to the bit-deterministic arithmetic sits a cycle and resource model of
//! the accelerator's loop schedule (unrolling, pipelining, cyclic array
//! partitioning, and a cap on arithmetic cores), and the two stages can run
//! one after the other or overlapped as a two-stage pipeline.

pub mod accelmodel;
pub mod adam;
pub mod checkpoint;
pub mod config;
pub mod dataio;
pub mod dims;
pub mod error;
pub mod hoststage;
pub mod neuralcore;
pub mod pipeline;
pub mod report;
pub mod tensor;
pub mod training;

pub use accelmodel::{
    estimate_pass, schedule, LoopNestSpec, PartitionSpec, PassEstimate, PassMode, ResourceBudget,
    ScheduleReport, StoragePlan, UnrollConfig,
};
pub use adam::{AdamHyper, AdamState};
pub use config::Config;
pub use dataio::{ImageSet, LabelSet, MiniBatch};
pub use dims::ModelDims;
pub use error::{Error, Result};
pub use hoststage::ConvBatch;
pub use neuralcore::{ForwardTrace, Gradients, ModelState, Weights};
pub use pipeline::{ExecutionMode, LatencyTotals};
pub use report::RunReport;
pub use tensor::Matrix;
pub use training::{run_training, train_on, Dataset, TrainingRun};
