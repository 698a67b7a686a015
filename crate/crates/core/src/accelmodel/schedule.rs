use serde::Serialize;

use super::partition::{check_port_conflicts, BankConflict};
use super::{LoopNestSpec, PartitionSpec, ResourceBudget};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScheduleReport {
    pub nest: String,
    pub cycles: u64,
    pub effective_ii: u64,
    /// Independent pipeline launches (product of loops outside the pipeline).
    pub tiles: u64,
    /// Iterations streamed through each pipeline launch.
    pub inner_iterations: u64,
    pub multipliers_demanded: u64,
    pub multipliers_used: u64,
    pub adders_demanded: u64,
    pub adders_used: u64,
    pub stall_events: Vec<BankConflict>,
}

/// Closed-form schedule of one loop nest.
///
/// The unrolled body needs `mults_per_body * prod(unroll)` multipliers; when
/// that exceeds the budget the initiation interval grows to
/// `ceil(demand / cap)`, and likewise for adders and for bank port
/// conflicts. Each launch of the pipeline costs `ii * (K - 1) + depth`
/// cycles, where `K` is the number of (unrolled) iterations at or inside the
/// pipelined loop. Accumulation across the innermost loop is assumed chained
/// and does not constrain the interval.
pub fn schedule(
    nest: &LoopNestSpec,
    partitions: &[PartitionSpec],
    budget: &ResourceBudget,
) -> Result<ScheduleReport> {
    nest.validate()?;
    budget.validate()?;
    let unroll = nest.effective_unroll();
    let copies: u64 = unroll.iter().product();

    let mults = nest.mults_per_body.saturating_mul(copies);
    let adds = nest.adds_per_body.saturating_mul(copies);
    let conflicts = check_port_conflicts(&nest.accesses, partitions)?;

    let effective_ii = 1
        .max(mults.div_ceil(budget.max_multipliers))
        .max(adds.div_ceil(budget.max_adders))
        .max(conflicts.min_ii);

    let steps: Vec<u64> = nest
        .trip_counts
        .iter()
        .zip(&unroll)
        .map(|(&t, &u)| t.div_ceil(u))
        .collect();
    let (outer, inner) = steps.split_at(nest.pipelined_level);
    let tiles: u64 = outer.iter().product();
    let inner_iterations: u64 = inner.iter().product();

    let cycles = tiles * (effective_ii * (inner_iterations - 1) + budget.pipeline_depth);

    Ok(ScheduleReport {
        nest: nest.name.clone(),
        cycles,
        effective_ii,
        tiles,
        inner_iterations,
        multipliers_demanded: mults,
        multipliers_used: mults.min(budget.max_multipliers),
        adders_demanded: adds,
        adders_used: adds.min(budget.max_adders),
        stall_events: conflicts.conflicts,
    })
}
