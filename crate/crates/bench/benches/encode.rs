use bmi_bench::scene;
use bmi_core::encoder::{encode_with, Accumulation, EncodeOptions};
use bmi_core::{BlockGrid, MaskProvenance};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use std::hint::black_box;

fn encode(c: &mut Criterion) {
    let grid = BlockGrid::new(4, 4).unwrap();
    let mut group = c.benchmark_group("encode");
    for side in [256usize, 512, 1024, 2048] {
        let (image, mask) = scene(side, side, 1);
        let prov = MaskProvenance::Seeded { seed: 1, density: 0.5 };
        group.throughput(Throughput::Elements((side * side) as u64));
        for (name, acc) in [("f32", Accumulation::F32), ("f64", Accumulation::F64)] {
            let opts = EncodeOptions { pad: false, accumulation: acc };
            group.bench_with_input(BenchmarkId::new(name, side), &side, |b, _| {
                b.iter(|| encode_with(black_box(&image), &mask, grid, prov.clone(), opts).unwrap())
            });
        }
    }
    group.finish();
}

criterion_group!(benches, encode);
criterion_main!(benches);
