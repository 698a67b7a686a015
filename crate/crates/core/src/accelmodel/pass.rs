//! The concrete loop nests of one accelerator invocation and their totals.

use serde::{Deserialize, Serialize};

use super::schedule::{schedule, ScheduleReport};
use super::{AccessKind, ArrayAccess, LoopNestSpec, PartitionSpec, ResourceBudget};
use crate::dims::ModelDims;
use crate::error::{Error, Result};

/// Every `f64` crosses the 32-bit host interface as two words.
pub fn f64_words(values: u64) -> u64 {
    2 * values
}

pub fn model_transfer(words: u64, budget: &ResourceBudget) -> u64 {
    words * budget.interface_cycles_per_word
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PassMode {
    Inference,
    Training,
}

/// Unroll factors of the two loops outside each matrix-product reduction,
/// and of the column loop of each elementwise nest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct UnrollConfig {
    pub fc: [u64; 2],
    pub out: [u64; 2],
    pub grad_w2: [u64; 2],
    pub hidden_delta: [u64; 2],
    pub grad_w1: [u64; 2],
    pub class_elementwise: u64,
    pub adam_w1: u64,
}

impl Default for UnrollConfig {
    fn default() -> Self {
        UnrollConfig {
            fc: [4, 4],
            out: [4, 10],
            grad_w2: [4, 10],
            hidden_delta: [4, 4],
            grad_w1: [4, 4],
            class_elementwise: 10,
            adam_w1: 4,
        }
    }
}

impl UnrollConfig {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.fc[0],
            self.fc[1],
            self.out[0],
            self.out[1],
            self.grad_w2[0],
            self.grad_w2[1],
            self.hidden_delta[0],
            self.hidden_delta[1],
            self.grad_w1[0],
            self.grad_w1[1],
            self.class_elementwise,
            self.adam_w1,
        ];
        if all.contains(&0) {
            return Err(Error::Config("unroll factors must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StorageClass {
    FastUram,
    BlockRam,
    InterfaceRegister,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArrayPlacement {
    pub array: String,
    pub dims: Vec<usize>,
    pub class: StorageClass,
    pub partitions: Vec<PartitionSpec>,
    /// Only live during training (gradients, deltas, optimizer moments).
    pub training_only: bool,
}

impl ArrayPlacement {
    pub fn elements(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn banks(&self) -> usize {
        self.partitions.iter().map(|p| p.factor).product()
    }
}

/// Where each accelerator array lives and how it is banked.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StoragePlan {
    pub arrays: Vec<ArrayPlacement>,
}

impl StoragePlan {
    /// Weights in URAM, host-exchanged arrays behind the interface, everything
    /// else in dual-port block RAM; the batch, feature and hidden dimensions
    /// are cyclically split by 4 and the class dimension completely.
    pub fn default_for(dims: &ModelDims) -> Self {
        let (b, p, h, c) = (
            dims.batch_size,
            dims.pool_map_length,
            dims.layer_size,
            dims.class_size,
        );
        use StorageClass::*;
        let place = |name: &str, d: [usize; 2], class, parts: Vec<PartitionSpec>, training_only| {
            ArrayPlacement {
                array: name.to_owned(),
                dims: d.to_vec(),
                class,
                partitions: parts,
                training_only,
            }
        };
        let cyc = PartitionSpec::cyclic;
        let full = PartitionSpec::complete;
        StoragePlan {
            arrays: vec![
                place(
                    "v",
                    [b, p],
                    InterfaceRegister,
                    vec![cyc("v", 0, 4), cyc("v", 1, 4)],
                    false,
                ),
                place(
                    "outActual",
                    [b, c],
                    InterfaceRegister,
                    vec![full("outActual", 1, c)],
                    false,
                ),
                place(
                    "h2",
                    [b, c],
                    InterfaceRegister,
                    vec![full("h2", 1, c)],
                    false,
                ),
                place("W1", [p, h], FastUram, vec![cyc("W1", 1, 4)], false),
                place(
                    "W2",
                    [h, c],
                    FastUram,
                    vec![cyc("W2", 0, 4), full("W2", 1, c)],
                    false,
                ),
                place(
                    "h1",
                    [b, h],
                    BlockRam,
                    vec![cyc("h1", 0, 4), cyc("h1", 1, 4)],
                    false,
                ),
                place(
                    "dZ",
                    [b, c],
                    BlockRam,
                    vec![cyc("dZ", 0, 4), full("dZ", 1, c)],
                    true,
                ),
                place("dH1", [b, h], BlockRam, vec![cyc("dH1", 1, 4)], true),
                place("gW1", [p, h], BlockRam, vec![cyc("gW1", 1, 4)], true),
                place("gW2", [h, c], BlockRam, vec![full("gW2", 1, c)], true),
                place("mW1", [p, h], BlockRam, vec![cyc("mW1", 1, 4)], true),
                place("vW1", [p, h], BlockRam, vec![cyc("vW1", 1, 4)], true),
                place("mW2", [h, c], BlockRam, vec![full("mW2", 1, c)], true),
                place("vW2", [h, c], BlockRam, vec![full("vW2", 1, c)], true),
            ],
        }
    }

    pub fn partitions(&self) -> Vec<PartitionSpec> {
        self.arrays
            .iter()
            .flat_map(|a| a.partitions.iter().cloned())
            .collect()
    }

    pub fn summary(&self, mode: PassMode) -> Vec<StorageSummary> {
        let mut out: Vec<StorageSummary> = Vec::new();
        for a in &self.arrays {
            if a.training_only && mode == PassMode::Inference {
                continue;
            }
            let entry = match out.iter_mut().find(|s| s.class == a.class) {
                Some(e) => e,
                None => {
                    out.push(StorageSummary {
                        class: a.class,
                        arrays: 0,
                        elements: 0,
                        banks: 0,
                    });
                    out.last_mut().unwrap()
                }
            };
            entry.arrays += 1;
            entry.elements += a.elements();
            entry.banks += a.banks();
        }
        out.sort_by_key(|s| s.class);
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StorageSummary {
    pub class: StorageClass,
    pub arrays: usize,
    pub elements: usize,
    pub banks: usize,
}

fn product_nest(
    name: &str,
    trips: [usize; 3],
    unroll: [u64; 2],
    accesses: Vec<ArrayAccess>,
) -> LoopNestSpec {
    LoopNestSpec {
        name: name.to_owned(),
        trip_counts: trips.iter().map(|&t| t as u64).collect(),
        unroll_factors: vec![unroll[0], unroll[1], 1],
        pipelined_level: 2,
        accesses,
        mults_per_body: 1,
        adds_per_body: 1,
    }
}

fn elementwise_nest(
    name: &str,
    trips: [usize; 2],
    unroll: u64,
    accesses: Vec<ArrayAccess>,
    mults: u64,
    adds: u64,
) -> LoopNestSpec {
    LoopNestSpec {
        name: name.to_owned(),
        trip_counts: trips.iter().map(|&t| t as u64).collect(),
        unroll_factors: vec![1, unroll],
        pipelined_level: 1,
        accesses,
        mults_per_body: mults,
        adds_per_body: adds,
    }
}

/// The loop nests executed for one batch, in execution order.
pub fn pass_nests(mode: PassMode, dims: &ModelDims, unroll: &UnrollConfig) -> Vec<LoopNestSpec> {
    let (b, p, h, c) = (
        dims.batch_size,
        dims.pool_map_length,
        dims.layer_size,
        dims.class_size,
    );
    use AccessKind::{Read, Write};
    let n = |count: u64, size: usize| (count as usize).min(size);
    let acc = |name: &str, d: [usize; 2], dim: usize, count: u64, kind| {
        ArrayAccess::contiguous(name, &d, dim, n(count, d[dim]), kind)
    };
    let ce = unroll.class_elementwise;

    let mut nests = vec![
        // h1[i][j] += v[i][k] * W1[k][j], ReLU at the end of the reduction.
        product_nest(
            "fc_forward",
            [b, h, p],
            unroll.fc,
            vec![
                acc("v", [b, p], 0, unroll.fc[0], Read),
                acc("W1", [p, h], 1, unroll.fc[1], Read),
            ],
        ),
        // h2[i][j] += h1[i][k] * W2[k][j], exponential sum accumulated alongside.
        product_nest(
            "out_forward",
            [b, c, h],
            unroll.out,
            vec![
                acc("h1", [b, h], 0, unroll.out[0], Read),
                acc("W2", [h, c], 1, unroll.out[1], Read),
            ],
        ),
        // Normalize by the exponential sum and accumulate cross-entropy.
        elementwise_nest(
            "softmax_loss",
            [b, c],
            ce,
            vec![
                acc("h2", [b, c], 1, ce, Read),
                acc("h2", [b, c], 1, ce, Write),
                acc("outActual", [b, c], 1, ce, Read),
            ],
            1,
            1,
        ),
    ];
    if mode == PassMode::Inference {
        return nests;
    }

    nests.extend([
        // dZ = (h2 - outActual) / batch
        elementwise_nest(
            "output_delta",
            [b, c],
            ce,
            vec![
                acc("h2", [b, c], 1, ce, Read),
                acc("outActual", [b, c], 1, ce, Read),
                acc("dZ", [b, c], 1, ce, Write),
            ],
            1,
            1,
        ),
        // gW2[k][j] += h1[i][k] * dZ[i][j]
        product_nest(
            "grad_w2",
            [h, c, b],
            unroll.grad_w2,
            vec![
                acc("h1", [b, h], 1, unroll.grad_w2[0], Read),
                acc("dZ", [b, c], 1, unroll.grad_w2[1], Read),
            ],
        ),
        // dH1[i][k] += dZ[i][j] * W2[k][j], masked by ReLU
        product_nest(
            "hidden_delta",
            [b, h, c],
            unroll.hidden_delta,
            vec![
                acc("dZ", [b, c], 0, unroll.hidden_delta[0], Read),
                acc("W2", [h, c], 0, unroll.hidden_delta[1], Read),
            ],
        ),
        // gW1[p][k] += v[i][p] * dH1[i][k]
        product_nest(
            "grad_w1",
            [p, h, b],
            unroll.grad_w1,
            vec![
                acc("v", [b, p], 1, unroll.grad_w1[0], Read),
                acc("dH1", [b, h], 1, unroll.grad_w1[1], Read),
            ],
        ),
    ]);

    // Output layer first; the correction factors computed for it are reused.
    for (layer, rows, cols, u) in [("2", h, c, ce), ("1", p, h, unroll.adam_w1)] {
        let d = [rows, cols];
        let (w, m, v, g) = (
            format!("W{layer}"),
            format!("mW{layer}"),
            format!("vW{layer}"),
            format!("gW{layer}"),
        );
        // m = b1*m + (1-b1)*g ; v = b2*v + (1-b2)*g*g
        nests.push(elementwise_nest(
            &format!("adam_moments_w{layer}"),
            d,
            u,
            vec![
                acc(&m, d, 1, u, Read),
                acc(&v, d, 1, u, Read),
                acc(&g, d, 1, u, Read),
                acc(&m, d, 1, u, Write),
                acc(&v, d, 1, u, Write),
            ],
            5,
            2,
        ));
        // W -= eta * (m*c1) / (sqrt(v*c2) + eps)
        nests.push(elementwise_nest(
            &format!("adam_weights_w{layer}"),
            d,
            u,
            vec![
                acc(&m, d, 1, u, Read),
                acc(&v, d, 1, u, Read),
                acc(&w, d, 1, u, Read),
                acc(&w, d, 1, u, Write),
            ],
            3,
            2,
        ));
    }
    nests
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PassEstimate {
    pub mode: PassMode,
    pub nests: Vec<ScheduleReport>,
    pub compute_cycles: u64,
    /// Words moved per batch: `v` and `outActual` in, `h2` out.
    pub transfer_words: u64,
    pub transfer_cycles: u64,
    pub total_cycles: u64,
    pub seconds_per_batch: f64,
    pub peak_multipliers: u64,
    pub peak_adders: u64,
    pub storage: Vec<StorageSummary>,
}

/// Per-batch accelerator cost of one inference or training invocation.
pub fn estimate_pass(
    mode: PassMode,
    dims: &ModelDims,
    unroll: &UnrollConfig,
    plan: &StoragePlan,
    budget: &ResourceBudget,
) -> Result<PassEstimate> {
    unroll.validate()?;
    let partitions = plan.partitions();
    let nests = pass_nests(mode, dims, unroll)
        .iter()
        .map(|n| schedule(n, &partitions, budget))
        .collect::<Result<Vec<_>>>()?;

    let compute_cycles = nests.iter().map(|r| r.cycles).sum();
    let (b, p, c) = (
        dims.batch_size as u64,
        dims.pool_map_length as u64,
        dims.class_size as u64,
    );
    let transfer_words = f64_words(b * p) + f64_words(b * c) + f64_words(b * c);
    let transfer_cycles = model_transfer(transfer_words, budget);
    let total_cycles = compute_cycles + transfer_cycles;

    Ok(PassEstimate {
        mode,
        peak_multipliers: nests.iter().map(|r| r.multipliers_used).max().unwrap_or(0),
        peak_adders: nests.iter().map(|r| r.adders_used).max().unwrap_or(0),
        nests,
        compute_cycles,
        transfer_words,
        transfer_cycles,
        total_cycles,
        seconds_per_batch: budget.seconds(total_cycles),
        storage: plan.summary(mode),
    })
}
