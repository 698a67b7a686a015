use criterion::{criterion_group, criterion_main, Criterion};

use convpipe_core::accelmodel::{StoragePlan, UnrollConfig};
use convpipe_core::pipeline::pipelined_total;
use convpipe_core::{estimate_pass, ModelDims, PassMode, ResourceBudget};

fn passes(c: &mut Criterion) {
    let dims = ModelDims::default();
    let plan = StoragePlan::default_for(&dims);
    let unroll = UnrollConfig::default();
    let budget = ResourceBudget::default();
    for (name, mode) in [
        ("inference", PassMode::Inference),
        ("training", PassMode::Training),
    ] {
        c.bench_function(&format!("estimate_pass/{name}"), |b| {
            b.iter(|| estimate_pass(mode, &dims, &unroll, &plan, &budget).unwrap())
        });
    }
}

fn recurrence(c: &mut Criterion) {
    let host: Vec<f64> = (0..1875).map(|i| 1.0 + (i % 7) as f64 * 0.1).collect();
    let accel = vec![1.2; 1875];
    c.bench_function("pipelined_total/1875 batches", |b| {
        b.iter(|| pipelined_total(std::hint::black_box(&host), &accel))
    });
}

criterion_group!(benches, passes, recurrence);
criterion_main!(benches);
