//! Reference implementations written independently of the library, used to
//! derive and check the library's numbers.

use std::collections::HashMap;

// ---------------------------------------------------------------------------
// Loop-nest schedule, simulated cycle by cycle.

pub const UNBOUNDED: u64 = u64::MAX;

#[derive(Debug, Clone)]
pub struct SimAccess {
    /// Arrays are 1-D, indexed by the loop `driver`.
    pub array: usize,
    pub driver: usize,
    pub write: bool,
    /// Cyclic bank count; equal to the dimension size for a complete split.
    pub banks: usize,
    pub single_port: bool,
}

#[derive(Debug, Clone)]
pub struct SimNest {
    pub trips: Vec<u64>,
    pub unroll: Vec<u64>,
    pub level: usize,
    pub mults: u64,
    pub adds: u64,
    pub accesses: Vec<SimAccess>,
}

#[derive(Debug, Clone, Copy)]
pub struct SimBudget {
    pub mults: u64,
    pub adds: u64,
    pub depth: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimResult {
    pub cycles: u64,
    pub ii: u64,
    pub tiles: u64,
    pub iterations_per_tile: u64,
    pub mult_demand: u64,
}

/// Chunks of `0..trip` covered by each unrolled iteration.
fn chunks(trip: u64, unroll: u64) -> Vec<Vec<u64>> {
    let idx: Vec<u64> = (0..trip).collect();
    idx.chunks(unroll as usize).map(<[u64]>::to_vec).collect()
}

fn cartesian(lists: &[Vec<Vec<u64>>]) -> Vec<Vec<&Vec<u64>>> {
    let mut out: Vec<Vec<&Vec<u64>>> = vec![vec![]];
    for list in lists {
        let mut next = Vec::new();
        for prefix in &out {
            for item in list {
                let mut p = prefix.clone();
                p.push(item);
                next.push(p);
            }
        }
        out = next;
    }
    out
}

/// What one iteration occupies, cycle offset by cycle offset, relative to its
/// launch.
#[derive(Default)]
struct Reservation {
    mults: Vec<u64>,
    adds: Vec<u64>,
    /// (array, bank, port) -> one access per cycle offset 0..count
    ports: HashMap<(usize, u64, u8), u64>,
}

fn spread(total: u64, cap: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut left = total;
    while left > 0 {
        let take = left.min(cap);
        out.push(take);
        left -= take;
    }
    out
}

/// Check that launching the body every `ii` cycles, `launches` times, never
/// exceeds a unit's capacity in any cycle.
fn fits(body: &Reservation, launches: u64, ii: u64, budget: &SimBudget) -> bool {
    let mut mults: HashMap<u64, u64> = HashMap::new();
    let mut adds: HashMap<u64, u64> = HashMap::new();
    let mut ports: HashMap<(u64, usize, u64, u8), u64> = HashMap::new();
    for k in 0..launches {
        let launch = k * ii;
        for (j, &m) in body.mults.iter().enumerate() {
            let slot = mults.entry(launch + j as u64).or_default();
            *slot += m;
            if *slot > budget.mults {
                return false;
            }
        }
        for (j, &a) in body.adds.iter().enumerate() {
            let slot = adds.entry(launch + j as u64).or_default();
            *slot += a;
            if *slot > budget.adds {
                return false;
            }
        }
        for (&(array, bank, port), &count) in &body.ports {
            for j in 0..count {
                let slot = ports.entry((launch + j, array, bank, port)).or_default();
                *slot += 1;
                if *slot > 1 {
                    return false;
                }
            }
        }
    }
    true
}

/// Brute-force schedule: enumerate every unrolled iteration of every tile and
/// the bank each of its accesses lands in, merge them into the one static body
/// the hardware repeats, search for the smallest launch interval at which
/// repeated launches never over-subscribe a unit or port, then run the clock.
/// Tiles run back to back; a tile ends `depth` cycles after its last launch.
pub fn simulate_schedule(nest: &SimNest, budget: &SimBudget) -> SimResult {
    let groups: Vec<Vec<Vec<u64>>> = nest
        .trips
        .iter()
        .zip(&nest.unroll)
        .map(|(&t, &u)| chunks(t, u))
        .collect();
    // Hardware is sized for the widest body, so partial chunks cost the same.
    let width: u64 = groups
        .iter()
        .map(|g| g.iter().map(Vec::len).max().unwrap() as u64)
        .product();
    let mult_demand = nest.mults * width;
    let add_demand = nest.adds * width;

    let tiles = cartesian(&groups[..nest.level]);
    let inner = cartesian(&groups[nest.level..]);

    let mut body = Reservation {
        mults: spread(mult_demand, budget.mults),
        adds: spread(add_demand, budget.adds),
        ports: HashMap::new(),
    };
    for outer in &tiles {
        for it in &inner {
            let chunk_of = |l: usize| -> &Vec<u64> {
                if l < nest.level {
                    outer[l]
                } else {
                    it[l - nest.level]
                }
            };
            let mut ports: HashMap<(usize, u64, u8), u64> = HashMap::new();
            for a in &nest.accesses {
                let port = match (a.single_port, a.write) {
                    (true, _) => 0,
                    (false, false) => 1,
                    (false, true) => 2,
                };
                for &i in chunk_of(a.driver) {
                    *ports
                        .entry((a.array, i % a.banks as u64, port))
                        .or_default() += 1;
                }
            }
            for (key, count) in ports {
                let slot = body.ports.entry(key).or_default();
                *slot = (*slot).max(count);
            }
        }
    }

    let launches = inner.len() as u64;
    // The interval is a property of the body, so probe it with at least two
    // launches even when a tile only runs one.
    let mut ii = 1;
    while !fits(&body, launches.max(2), ii, budget) {
        ii += 1;
    }

    let mut clock = 0u64;
    for _ in &tiles {
        let mut last_launch = clock;
        for k in 0..launches {
            last_launch = clock + k * ii;
        }
        clock = last_launch + budget.depth;
    }
    SimResult {
        cycles: clock,
        ii,
        tiles: tiles.len() as u64,
        iterations_per_tile: launches,
        mult_demand,
    }
}

// ---------------------------------------------------------------------------
// Bank enumeration.

/// A bank that must serve more than one same-kind access in one iteration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BankClash {
    pub first_index: u64,
    pub bank: u64,
    pub accesses: u64,
}

/// Walk every unrolled iteration of a loop over `0..trip` reading
/// `unroll` consecutive elements and list the banks asked for two or more
/// reads in the same iteration.
pub fn enumerate_bank_clashes(trip: u64, unroll: u64, banks: u64) -> Vec<BankClash> {
    let mut clashes = Vec::new();
    for chunk in chunks(trip, unroll) {
        let mut count: HashMap<u64, u64> = HashMap::new();
        for &i in &chunk {
            *count.entry(i % banks).or_default() += 1;
        }
        let mut hot: Vec<_> = count.into_iter().filter(|&(_, c)| c > 1).collect();
        hot.sort_unstable();
        for (bank, accesses) in hot {
            clashes.push(BankClash {
                first_index: chunk[0],
                bank,
                accesses,
            });
        }
    }
    clashes
}

// ---------------------------------------------------------------------------
// Two-stage pipeline with a one-batch buffer, advanced one tick at a time.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PipelineTicks {
    pub pipelined: u64,
    pub sequential: u64,
}

pub fn simulate_pipeline(host: &[u64], accel: &[u64]) -> PipelineTicks {
    assert_eq!(host.len(), accel.len());
    let n = host.len();
    let sequential = host.iter().sum::<u64>() + accel.iter().sum::<u64>();
    if n == 0 {
        return PipelineTicks {
            pipelined: 0,
            sequential,
        };
    }

    let mut next_to_produce = 0usize;
    let mut host_busy: Option<(usize, u64)> = None; // (batch, ticks left)
    let mut host_holding: Option<usize> = None;
    let mut slot: Option<usize> = None;
    let mut accel_busy: Option<(usize, u64)> = None;
    let mut finished = 0usize;
    let mut tick = 0u64;

    loop {
        // Hand-offs at the current instant, repeated until nothing moves.
        loop {
            let mut moved = false;
            if host_busy.is_none() && host_holding.is_none() && next_to_produce < n {
                host_busy = Some((next_to_produce, host[next_to_produce]));
                next_to_produce += 1;
                moved = true;
            }
            if let Some((b, 0)) = host_busy {
                host_busy = None;
                host_holding = Some(b);
                moved = true;
            }
            if slot.is_none() {
                if let Some(b) = host_holding.take() {
                    slot = Some(b);
                    moved = true;
                }
            }
            if let Some((_, 0)) = accel_busy {
                accel_busy = None;
                finished += 1;
                moved = true;
            }
            if accel_busy.is_none() {
                if let Some(b) = slot.take() {
                    assert_eq!(b, finished, "batches reach the accelerator in order");
                    accel_busy = Some((b, accel[b]));
                    moved = true;
                }
            }
            if !moved {
                break;
            }
        }
        if finished == n {
            return PipelineTicks {
                pipelined: tick,
                sequential,
            };
        }
        tick += 1;
        if let Some((_, left)) = host_busy.as_mut() {
            *left -= 1;
        }
        if let Some((_, left)) = accel_busy.as_mut() {
            *left -= 1;
        }
    }
}

// ---------------------------------------------------------------------------
// Dense model in plain loops, for finite differences.

pub struct SmallModel {
    pub batch: usize,
    pub inputs: usize,
    pub hidden: usize,
    pub classes: usize,
    /// batch x inputs
    pub v: Vec<f64>,
    /// batch x classes, one-hot
    pub y: Vec<f64>,
}

impl SmallModel {
    pub fn hidden_pre(&self, w1: &[f64]) -> Vec<f64> {
        let mut z = vec![0.0; self.batch * self.hidden];
        for b in 0..self.batch {
            for j in 0..self.hidden {
                let mut s = 0.0;
                for i in 0..self.inputs {
                    s += self.v[b * self.inputs + i] * w1[i * self.hidden + j];
                }
                z[b * self.hidden + j] = s;
            }
        }
        z
    }

    /// Mean cross-entropy of softmax(ReLU(v W1) W2).
    pub fn loss(&self, w1: &[f64], w2: &[f64]) -> f64 {
        let z = self.hidden_pre(w1);
        let mut total = 0.0;
        for b in 0..self.batch {
            let mut logits = vec![0.0; self.classes];
            for (c, logit) in logits.iter_mut().enumerate() {
                for j in 0..self.hidden {
                    let h = z[b * self.hidden + j].max(0.0);
                    *logit += h * w2[j * self.classes + c];
                }
            }
            let top = logits.iter().cloned().fold(f64::MIN, f64::max);
            let denom: f64 = logits.iter().map(|l| (l - top).exp()).sum();
            for c in 0..self.classes {
                let p = (logits[c] - top).exp() / denom;
                total -= self.y[b * self.classes + c] * (p + 1e-12).ln();
            }
        }
        total / self.batch as f64
    }
}

/// Central difference of `f` at `x` with step `1e-6 * max(1, |x|)`.
pub fn central_difference(x: f64, f: impl Fn(f64) -> f64) -> f64 {
    let h = 1e-6 * x.abs().max(1.0);
    let (up, down) = (x + h, x - h);
    (f(up) - f(down)) / (up - down)
}

// ---------------------------------------------------------------------------
// Adam on one scalar.

#[derive(Debug, Clone, Copy)]
pub struct ScalarAdam {
    pub w: f64,
    pub m: f64,
    pub v: f64,
    pub t: u64,
}

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const ETA: f64 = 0.01;
pub const EPS: f64 = 1e-7;

impl ScalarAdam {
    pub fn new(w: f64) -> Self {
        ScalarAdam {
            w,
            m: 0.0,
            v: 0.0,
            t: 0,
        }
    }

    /// Returns the bias-corrected moments used for this step.
    pub fn step(&mut self, g: f64) -> (f64, f64) {
        self.t += 1;
        self.m = BETA1 * self.m + (1.0 - BETA1) * g;
        self.v = BETA2 * self.v + (1.0 - BETA2) * (g * g);
        let tf = self.t as f64;
        let m_hat = self.m * (1.0 / (1.0 - BETA1.powf(tf)));
        let v_hat = self.v * (1.0 / (1.0 - BETA2.powf(tf)));
        self.w -= ETA * m_hat / (v_hat.sqrt() + EPS);
        (m_hat, v_hat)
    }
}
