//! Cycle and resource model of the accelerator schedule.
//!
//! Nothing here touches weights or activations: the model only sees loop
//! nest shapes, partitioning, and a resource budget.

mod partition;
mod pass;
mod schedule;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use partition::{check_port_conflicts, cyclic_bank, BankConflict, ConflictReport, PortKind};
pub use pass::{
    estimate_pass, f64_words, model_transfer, pass_nests, PassEstimate, PassMode, StorageClass,
    StoragePlan, StorageSummary, UnrollConfig,
};
pub use schedule::{schedule, ScheduleReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AccessKind {
    Read,
    Write,
}

/// The set of indices one unrolled loop body touches along one array dimension.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArrayAccess {
    pub array: String,
    pub dim_sizes: Vec<usize>,
    pub accessed_dim: usize,
    /// Offsets along `accessed_dim`; duplicates are a single physical access.
    pub offsets: Vec<usize>,
    pub kind: AccessKind,
}

impl ArrayAccess {
    /// Offsets `0..count` along `dim`.
    pub fn contiguous(
        array: &str,
        dim_sizes: &[usize],
        accessed_dim: usize,
        count: usize,
        kind: AccessKind,
    ) -> Self {
        ArrayAccess {
            array: array.to_owned(),
            dim_sizes: dim_sizes.to_vec(),
            accessed_dim,
            offsets: (0..count).collect(),
            kind,
        }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        let size = self
            .dim_sizes
            .get(self.accessed_dim)
            .ok_or_else(|| Error::Nest {
                nest: self.array.clone(),
                reason: format!(
                    "accessed dim {} out of range for {} dims",
                    self.accessed_dim,
                    self.dim_sizes.len()
                ),
            })?;
        if let Some(&o) = self.offsets.iter().find(|&&o| o >= *size) {
            return Err(Error::Nest {
                nest: self.array.clone(),
                reason: format!("offset {o} outside dim of size {size}"),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PartitionStyle {
    Cyclic,
    Complete,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionSpec {
    pub array: String,
    pub dim: usize,
    pub factor: usize,
    pub style: PartitionStyle,
    /// 1 = single shared port, 2 = one read port plus one write port.
    pub ports_per_bank: u8,
}

impl PartitionSpec {
    pub fn cyclic(array: &str, dim: usize, factor: usize) -> Self {
        PartitionSpec {
            array: array.to_owned(),
            dim,
            factor,
            style: PartitionStyle::Cyclic,
            ports_per_bank: 2,
        }
    }

    /// One bank per element along `dim` (`dim_size` banks).
    pub fn complete(array: &str, dim: usize, dim_size: usize) -> Self {
        PartitionSpec {
            array: array.to_owned(),
            dim,
            factor: dim_size,
            style: PartitionStyle::Complete,
            ports_per_bank: 2,
        }
    }
}

/// A perfectly nested loop, outermost first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoopNestSpec {
    pub name: String,
    pub trip_counts: Vec<u64>,
    pub unroll_factors: Vec<u64>,
    /// Index of the loop whose body is pipelined; it and every loop inside it
    /// stream through the pipeline, loops outside it start a fresh pipeline.
    pub pipelined_level: usize,
    pub accesses: Vec<ArrayAccess>,
    pub mults_per_body: u64,
    pub adds_per_body: u64,
}

impl LoopNestSpec {
    pub fn validate(&self) -> Result<()> {
        let err = |reason: String| Error::Nest {
            nest: self.name.clone(),
            reason,
        };
        if self.trip_counts.is_empty() {
            return Err(err("no loops".into()));
        }
        if self.trip_counts.contains(&0) {
            return Err(err(format!("zero trip count in {:?}", self.trip_counts)));
        }
        if self.unroll_factors.len() != self.trip_counts.len() {
            return Err(err(format!(
                "{} unroll factors for {} loops",
                self.unroll_factors.len(),
                self.trip_counts.len()
            )));
        }
        if self.unroll_factors.contains(&0) {
            return Err(err("unroll factor 0".into()));
        }
        if self.pipelined_level >= self.trip_counts.len() {
            return Err(err(format!(
                "pipelined level {} out of range",
                self.pipelined_level
            )));
        }
        for a in &self.accesses {
            a.validate().map_err(|e| err(e.to_string()))?;
        }
        Ok(())
    }

    /// Unroll factors clamped to their trip counts.
    pub fn effective_unroll(&self) -> Vec<u64> {
        self.trip_counts
            .iter()
            .zip(&self.unroll_factors)
            .map(|(&t, &u)| u.min(t))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ResourceBudget {
    pub max_multipliers: u64,
    pub max_adders: u64,
    pub pipeline_depth: u64,
    pub clock_ns: f64,
    pub interface_cycles_per_word: u64,
}

impl Default for ResourceBudget {
    fn default() -> Self {
        ResourceBudget {
            max_multipliers: 25,
            max_adders: 25,
            pipeline_depth: 8,
            clock_ns: 10.0,
            interface_cycles_per_word: 2,
        }
    }
}

impl ResourceBudget {
    /// Same budget with no cap on arithmetic cores.
    pub fn unbounded() -> Self {
        ResourceBudget {
            max_multipliers: u64::MAX,
            max_adders: u64::MAX,
            ..ResourceBudget::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_multipliers == 0
            || self.max_adders == 0
            || self.pipeline_depth == 0
            || self.interface_cycles_per_word == 0
        {
            return Err(Error::Config(
                "resource budget values must all be positive".into(),
            ));
        }
        if self.clock_ns.is_nan() || self.clock_ns <= 0.0 || self.clock_ns.is_infinite() {
            return Err(Error::Config(format!(
                "clock_ns must be positive, got {}",
                self.clock_ns
            )));
        }
        Ok(())
    }

    pub fn seconds(&self, cycles: u64) -> f64 {
        cycles as f64 * self.clock_ns * 1e-9
    }
}
