//! Run reports: the JSON document written by `train` and the CSV epoch table.

use std::fmt::Write as _;

use serde::Serialize;

use crate::accelmodel::{PassEstimate, PassMode, ScheduleReport, StorageSummary};
use crate::config::Config;
use crate::pipeline::{speedup_summary, ExecutionMode, LatencyTotals, SpeedupSummary};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochReport {
    /// 1-based.
    pub epoch: usize,
    pub mean_loss: f64,
    pub train_accuracy: f64,
    pub test_loss: f64,
    pub test_accuracy: f64,
    pub train_latency: LatencyTotals,
    /// Test inference, always accounted sequentially.
    pub test_latency: LatencyTotals,
}

/// Per-batch accelerator cost without the per-nest breakdown.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PassSummary {
    pub mode: PassMode,
    pub compute_cycles: u64,
    pub transfer_cycles: u64,
    pub total_cycles: u64,
    pub seconds_per_batch: f64,
    pub peak_multipliers: u64,
    pub peak_adders: u64,
    pub storage: Vec<StorageSummary>,
}

impl From<&PassEstimate> for PassSummary {
    fn from(p: &PassEstimate) -> Self {
        PassSummary {
            mode: p.mode,
            compute_cycles: p.compute_cycles,
            transfer_cycles: p.transfer_cycles,
            total_cycles: p.total_cycles,
            seconds_per_batch: p.seconds_per_batch,
            peak_multipliers: p.peak_multipliers,
            peak_adders: p.peak_adders,
            storage: p.storage.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LatencyModel {
    pub clock_ns: f64,
    pub training_pass: PassSummary,
    pub inference_pass: PassSummary,
    /// Training totals summed over all epochs.
    pub training_totals: LatencyTotals,
    pub training_speedup: SpeedupSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NestReport {
    pub pass: PassMode,
    #[serde(flatten)]
    pub schedule: ScheduleReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub config: Config,
    pub mode: ExecutionMode,
    pub initial_test_accuracy: f64,
    pub epochs: Vec<EpochReport>,
    pub latency_model: LatencyModel,
    pub schedule_reports: Vec<NestReport>,
}

impl RunReport {
    pub(crate) fn new(
        config: Config,
        initial_test_accuracy: f64,
        epochs: Vec<EpochReport>,
        training: &PassEstimate,
        inference: &PassEstimate,
    ) -> Self {
        let mut totals = LatencyTotals::default();
        for e in &epochs {
            totals.accumulate(&e.train_latency);
        }
        let schedule_reports = [inference, training]
            .into_iter()
            .flat_map(|p| {
                p.nests.iter().map(move |n| NestReport {
                    pass: p.mode,
                    schedule: n.clone(),
                })
            })
            .collect();
        RunReport {
            mode: config.mode,
            latency_model: LatencyModel {
                clock_ns: config.budget.clock_ns,
                training_pass: training.into(),
                inference_pass: inference.into(),
                training_totals: totals,
                training_speedup: speedup_summary(&totals),
            },
            config,
            initial_test_accuracy,
            epochs,
            schedule_reports,
        }
    }

    pub fn epochs_csv(&self) -> String {
        let mut out = String::from(
            "epoch,mean_loss,train_accuracy,test_loss,test_accuracy,host_seconds,accel_seconds,sequential_seconds,pipelined_seconds\n",
        );
        for e in &self.epochs {
            let t = &e.train_latency;
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                e.epoch,
                e.mean_loss,
                e.train_accuracy,
                e.test_loss,
                e.test_accuracy,
                t.host_seconds,
                t.accel_seconds,
                t.sequential_seconds,
                t.pipelined_seconds
            );
        }
        out
    }
}
