use std::collections::BTreeMap;

use serde::Serialize;

use super::{AccessKind, ArrayAccess, PartitionSpec};
use crate::error::{Error, Result};

/// Cyclic mapping of a flat index onto `factor` banks.
pub fn cyclic_bank(index: usize, factor: usize) -> Result<(usize, usize)> {
    if factor == 0 {
        return Err(Error::Config("partition factor must be at least 1".into()));
    }
    Ok((index % factor, index / factor))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PortKind {
    Read,
    Write,
    /// The single port of a single-port bank.
    Shared,
}

/// One over-subscribed port in one body-cycle.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BankConflict {
    pub array: String,
    pub dim: usize,
    pub bank: usize,
    pub port: PortKind,
    pub accesses: usize,
    /// Accesses beyond what the port serves in one cycle.
    pub excess: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ConflictReport {
    pub conflicts: Vec<BankConflict>,
    /// Cycles one body needs to issue all of its memory accesses.
    pub min_ii: u64,
}

impl ConflictReport {
    pub fn is_clean(&self) -> bool {
        self.conflicts.is_empty()
    }
}

#[derive(Default)]
struct PortUse {
    reads: usize,
    writes: usize,
}

/// Count same-bank accesses of one unrolled body and flag every port asked to
/// serve more than one access in a cycle. Dual-port banks have one read and
/// one write port; single-port banks share one port between both.
///
/// Accesses to different dimensions of the same array are counted separately.
pub fn check_port_conflicts(
    accesses: &[ArrayAccess],
    partitions: &[PartitionSpec],
) -> Result<ConflictReport> {
    // (array, dim, bank) -> (ports_per_bank, usage)
    let mut usage: BTreeMap<(&str, usize, usize), (u8, PortUse)> = BTreeMap::new();

    for access in accesses {
        access.validate()?;
        let specs: Vec<&PartitionSpec> = partitions
            .iter()
            .filter(|p| p.array == access.array)
            .collect();
        if specs.is_empty() {
            return Err(Error::Unpartitioned(access.array.clone()));
        }
        let on_dim = specs.iter().find(|p| p.dim == access.accessed_dim);
        let (factor, ports) = match on_dim {
            Some(p) => (p.factor, p.ports_per_bank),
            // Partitioned only along other dims: every offset lands in one bank.
            None => (1, specs[0].ports_per_bank),
        };

        let mut offsets = access.offsets.clone();
        offsets.sort_unstable();
        offsets.dedup();
        for offset in offsets {
            let (bank, _) = cyclic_bank(offset, factor)?;
            let entry = usage
                .entry((access.array.as_str(), access.accessed_dim, bank))
                .or_insert((ports, PortUse::default()));
            match access.kind {
                AccessKind::Read => entry.1.reads += 1,
                AccessKind::Write => entry.1.writes += 1,
            }
        }
    }

    let mut report = ConflictReport {
        conflicts: Vec::new(),
        min_ii: 1,
    };
    for ((array, dim, bank), (ports, used)) in usage {
        let mut flag = |port: PortKind, accesses: usize| {
            if accesses > 1 {
                report.conflicts.push(BankConflict {
                    array: array.to_owned(),
                    dim,
                    bank,
                    port,
                    accesses,
                    excess: accesses - 1,
                });
            }
            report.min_ii = report.min_ii.max(accesses as u64);
        };
        if ports >= 2 {
            flag(PortKind::Read, used.reads);
            flag(PortKind::Write, used.writes);
        } else {
            flag(PortKind::Shared, used.reads + used.writes);
        }
    }
    Ok(report)
}
