use criterion::{criterion_group, criterion_main, BatchSize, Criterion};

use convpipe_bench::{conv_batch, mini_batch};
use convpipe_core::hoststage::host_stage;
use convpipe_core::neuralcore::{accel_kernel, ModelState};
use convpipe_core::{AdamHyper, ModelDims};

fn host(c: &mut Criterion) {
    let batch = mini_batch(1);
    c.bench_function("host_stage/conv+pool batch of 32", |b| {
        b.iter(|| host_stage(std::hint::black_box(&batch)).unwrap())
    });
}

fn accel(c: &mut Criterion) {
    let conv = conv_batch(2);
    let state = ModelState::init(&ModelDims::default(), 0, AdamHyper::default());

    c.bench_function("accel_kernel/inference", |b| {
        let mut s = state.clone();
        b.iter(|| accel_kernel(&conv, &mut s, false).unwrap())
    });
    c.bench_function("accel_kernel/training step", |b| {
        b.iter_batched(
            || state.clone(),
            |mut s| accel_kernel(&conv, &mut s, true).unwrap(),
            BatchSize::SmallInput,
        )
    });
}

criterion_group!(benches, host, accel);
criterion_main!(benches);
