//! End-to-end workflows: training with per-epoch evaluation, and
//! checkpoint evaluation.

use serde::Serialize;

use crate::accelmodel::{estimate_pass, PassEstimate, PassMode, StoragePlan};
use crate::checkpoint;
use crate::config::{Config, TEST_IMAGES, TEST_LABELS, TRAIN_IMAGES, TRAIN_LABELS};
use crate::dataio::{
    load_idx_images_sized, load_idx_labels_sized, make_batches, ImageSet, LabelSet,
};
use crate::error::Result;
use crate::neuralcore::ModelState;
use crate::pipeline::{run_epoch, ExecutionMode, LatencyTotals};
use crate::report::{EpochReport, RunReport};

pub struct Dataset {
    pub images: ImageSet,
    pub labels: LabelSet,
}

impl Dataset {
    pub fn load(config: &Config, images: &str, labels: &str) -> Result<Self> {
        let dir = config.data_dir()?;
        let d = &config.dims;
        Ok(Dataset {
            images: load_idx_images_sized(&dir.join(images), d.image_rows, d.image_cols)?,
            labels: load_idx_labels_sized(&dir.join(labels), d.class_size)?,
        })
    }

    pub fn load_train(config: &Config) -> Result<Self> {
        Dataset::load(config, TRAIN_IMAGES, TRAIN_LABELS)
    }

    pub fn load_test(config: &Config) -> Result<Self> {
        Dataset::load(config, TEST_IMAGES, TEST_LABELS)
    }
}

pub struct TrainingRun {
    pub report: RunReport,
    pub state: ModelState,
}

pub fn pass_estimates(config: &Config) -> Result<(PassEstimate, PassEstimate)> {
    let plan = StoragePlan::default_for(&config.dims);
    let est = |mode| estimate_pass(mode, &config.dims, &config.unroll, &plan, &config.budget);
    Ok((est(PassMode::Training)?, est(PassMode::Inference)?))
}

/// Load the data sets named by `config`, train, and write the configured
/// checkpoint, report, and CSV outputs.
pub fn run_training(config: &Config) -> Result<TrainingRun> {
    config.validate()?;
    let train = Dataset::load_train(config)?;
    let test = Dataset::load_test(config)?;
    let run = train_on(config, &train, &test, |_| {})?;
    if let Some(path) = &config.checkpoint {
        checkpoint::save(path, &run.state)?;
    }
    Ok(run)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Evaluation {
    pub mean_loss: f64,
    pub accuracy: f64,
    pub samples: usize,
    pub latency: LatencyTotals,
}

pub fn evaluate(
    config: &Config,
    state: &mut ModelState,
    data: &Dataset,
    inference: &PassEstimate,
) -> Result<Evaluation> {
    let batches = make_batches(&data.images, &data.labels, config.dims.batch_size)?;
    let out = run_epoch(batches, state, ExecutionMode::Sequential, false, inference)?;
    Ok(Evaluation {
        mean_loss: out.mean_loss,
        accuracy: out.accuracy,
        samples: out.samples,
        latency: out.latency,
    })
}

/// Train on in-memory data sets. `on_epoch` sees each epoch's report as soon
/// as it is complete.
pub fn train_on(
    config: &Config,
    train: &Dataset,
    test: &Dataset,
    mut on_epoch: impl FnMut(&EpochReport),
) -> Result<TrainingRun> {
    config.validate()?;
    let (training_pass, inference_pass) = pass_estimates(config)?;
    let mut state = ModelState::init(&config.dims, config.seed, config.adam);

    let initial = evaluate(config, &mut state, test, &inference_pass)?;
    let mut epochs = Vec::with_capacity(config.epochs);
    for epoch in 1..=config.epochs {
        let batches = make_batches(&train.images, &train.labels, config.dims.batch_size)?;
        let trained = run_epoch(batches, &mut state, config.mode, true, &training_pass)?;
        let tested = evaluate(config, &mut state, test, &inference_pass)?;
        let report = EpochReport {
            epoch,
            mean_loss: trained.mean_loss,
            train_accuracy: trained.accuracy,
            test_loss: tested.mean_loss,
            test_accuracy: tested.accuracy,
            train_latency: trained.latency,
            test_latency: tested.latency,
        };
        on_epoch(&report);
        epochs.push(report);
    }

    let report = RunReport::new(
        config.clone(),
        initial.accuracy,
        epochs,
        &training_pass,
        &inference_pass,
    );
    Ok(TrainingRun { report, state })
}
