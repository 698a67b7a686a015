//! Epoch orchestration in sequential or system-level pipelined mode.
//!
//! Both modes apply weight updates in batch order, so numeric results are
//! identical. They differ in how the host and accelerator stages overlap,
//! which is what the latency accounting captures.

use std::sync::mpsc;
use std::thread;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::accelmodel::{PassEstimate, PassMode};
use crate::dataio::MiniBatch;
use crate::error::{Error, Result};
use crate::hoststage::{host_stage, ConvBatch};
use crate::neuralcore::{accel_kernel, correct_predictions, ModelState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExecutionMode {
    Sequential,
    #[default]
    Pipelined,
}

impl std::str::FromStr for ExecutionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sequential" => Ok(ExecutionMode::Sequential),
            "pipelined" => Ok(ExecutionMode::Pipelined),
            other => Err(Error::Config(format!(
                "unknown mode `{other}` (expected sequential or pipelined)"
            ))),
        }
    }
}

/// Cost of one batch in each stage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StageLatency {
    /// Measured wall time of the host stage.
    pub host_seconds: f64,
    /// Modeled accelerator cycles.
    pub accel_cycles: u64,
}

/// Stage times `host[k] + accel[k]` strictly alternate.
pub fn sequential_total(host: &[f64], accel: &[f64]) -> f64 {
    host.iter().sum::<f64>() + accel.iter().sum::<f64>()
}

/// Completion time of a two-stage pipeline joined by a one-slot blocking
/// buffer: the host stage may run ahead by at most one finished batch.
pub fn pipelined_total(host: &[f64], accel: &[f64]) -> f64 {
    assert_eq!(
        host.len(),
        accel.len(),
        "one host and one accel time per batch"
    );
    let mut host_free = 0.0f64; // host may start the next batch
    let mut slot_free = 0.0f64; // accel has taken the buffered batch
    let mut accel_done = 0.0f64;
    for (&h, &a) in host.iter().zip(accel) {
        let produced = host_free + h;
        let deposited = produced.max(slot_free);
        let started = deposited.max(accel_done);
        accel_done = started + a;
        slot_free = started;
        host_free = deposited;
    }
    accel_done
}

/// Latency accounting for one pass over a batch sequence.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct LatencyTotals {
    pub batches: usize,
    pub host_seconds: f64,
    pub accel_seconds: f64,
    pub sequential_seconds: f64,
    pub pipelined_seconds: f64,
    /// Pipelined total beyond the slower stage's busy time.
    pub fill_seconds: f64,
}

impl LatencyTotals {
    pub fn from_stages(host: &[f64], accel: &[f64]) -> Self {
        let host_seconds: f64 = host.iter().sum();
        let accel_seconds: f64 = accel.iter().sum();
        let pipelined_seconds = pipelined_total(host, accel);
        LatencyTotals {
            batches: host.len(),
            host_seconds,
            accel_seconds,
            sequential_seconds: sequential_total(host, accel),
            pipelined_seconds,
            fill_seconds: pipelined_seconds - host_seconds.max(accel_seconds),
        }
    }

    pub fn total(&self, mode: ExecutionMode) -> f64 {
        match mode {
            ExecutionMode::Sequential => self.sequential_seconds,
            ExecutionMode::Pipelined => self.pipelined_seconds,
        }
    }

    pub fn accumulate(&mut self, other: &LatencyTotals) {
        self.batches += other.batches;
        self.host_seconds += other.host_seconds;
        self.accel_seconds += other.accel_seconds;
        self.sequential_seconds += other.sequential_seconds;
        self.pipelined_seconds += other.pipelined_seconds;
        self.fill_seconds += other.fill_seconds;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochOutcome {
    pub mean_loss: f64,
    pub accuracy: f64,
    pub samples: usize,
    pub latency: LatencyTotals,
}

#[derive(Default)]
struct Tally {
    loss_sum: f64,
    correct: usize,
    samples: usize,
    host: Vec<f64>,
    expected_index: usize,
}

impl Tally {
    fn consume(
        &mut self,
        conv: &ConvBatch,
        host_seconds: f64,
        state: &mut ModelState,
        is_training: bool,
    ) -> Result<()> {
        if conv.index != self.expected_index {
            return Err(Error::Stage(format!(
                "batch {} arrived, expected {}",
                conv.index, self.expected_index
            )));
        }
        self.expected_index += 1;
        let trace = accel_kernel(conv, state, is_training)?;
        self.loss_sum += trace.loss;
        self.correct += correct_predictions(&trace.h2, &conv.out_actual);
        self.samples += conv.v.rows();
        self.host.push(host_seconds);
        Ok(())
    }

    fn finish(self, accel: &PassEstimate) -> Result<EpochOutcome> {
        let n = self.host.len();
        if n == 0 {
            return Err(Error::Stage("no batches to process".into()));
        }
        let accel_times = vec![accel.seconds_per_batch; n];
        Ok(EpochOutcome {
            mean_loss: self.loss_sum / n as f64,
            accuracy: self.correct as f64 / self.samples as f64,
            samples: self.samples,
            latency: LatencyTotals::from_stages(&self.host, &accel_times),
        })
    }
}

fn timed_host_stage(batch: &MiniBatch) -> Result<(ConvBatch, f64)> {
    let start = Instant::now();
    let conv = host_stage(batch)?;
    Ok((conv, start.elapsed().as_secs_f64()))
}

/// Push every batch through the host stage and then the accelerator kernel.
///
/// In pipelined mode the host stage runs on its own thread and hands batches
/// over a blocking channel of capacity one; the calling thread owns `state`.
pub fn run_epoch<I>(
    batches: I,
    state: &mut ModelState,
    mode: ExecutionMode,
    is_training: bool,
    accel: &PassEstimate,
) -> Result<EpochOutcome>
where
    I: IntoIterator<Item = MiniBatch>,
    I::IntoIter: Send,
{
    let expected_pass = if is_training {
        PassMode::Training
    } else {
        PassMode::Inference
    };
    if accel.mode != expected_pass {
        return Err(Error::Config(format!(
            "accelerator estimate is for {:?} but the epoch runs {:?}",
            accel.mode, expected_pass
        )));
    }

    let mut tally = Tally::default();
    match mode {
        ExecutionMode::Sequential => {
            for batch in batches {
                let (conv, host) = timed_host_stage(&batch)?;
                tally.consume(&conv, host, state, is_training)?;
            }
        }
        ExecutionMode::Pipelined => {
            let batches = batches.into_iter();
            thread::scope(|scope| -> Result<()> {
                let (tx, rx) = mpsc::sync_channel::<Result<(ConvBatch, f64)>>(1);
                scope.spawn(move || {
                    for batch in batches {
                        let item = timed_host_stage(&batch);
                        let failed = item.is_err();
                        // A closed receiver means the accelerator side bailed out.
                        if tx.send(item).is_err() || failed {
                            break;
                        }
                    }
                });
                for item in rx {
                    let (conv, host) = item?;
                    tally.consume(&conv, host, state, is_training)?;
                }
                Ok(())
            })?;
        }
    }
    tally.finish(accel)
}

/// Derived ratios for a pair of mode totals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpeedupSummary {
    pub sequential_seconds: f64,
    pub pipelined_seconds: f64,
    /// Sequential over pipelined; 0 when the pipelined total is 0.
    pub pipelining_speedup: f64,
    /// Host share of the combined busy time, in [0, 1].
    pub host_share: f64,
    pub bottleneck: Bottleneck,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Bottleneck {
    Host,
    Accelerator,
    Balanced,
}

pub fn speedup_summary(totals: &LatencyTotals) -> SpeedupSummary {
    let busy = totals.host_seconds + totals.accel_seconds;
    let host_share = if busy > 0.0 {
        totals.host_seconds / busy
    } else {
        0.5
    };
    let bottleneck = if (host_share - 0.5).abs() < 0.05 {
        Bottleneck::Balanced
    } else if host_share > 0.5 {
        Bottleneck::Host
    } else {
        Bottleneck::Accelerator
    };
    SpeedupSummary {
        sequential_seconds: totals.sequential_seconds,
        pipelined_seconds: totals.pipelined_seconds,
        pipelining_speedup: if totals.pipelined_seconds > 0.0 {
            totals.sequential_seconds / totals.pipelined_seconds
        } else {
            0.0
        },
        host_share,
        bottleneck,
    }
}
