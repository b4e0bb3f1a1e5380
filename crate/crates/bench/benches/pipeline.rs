use std::f64::consts::PI;
use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use mfelab::blowup::{default_radius_schedule, estimate_masses, liouville_bubble, BubbleSpec, Peak};
use mfelab::meanfield::{functional, rhs, ProblemSpec, Variant};
use mfelab::measure::IntensityMeasure;
use mfelab_bench::{grid, rough_field, standard_spec};

fn bench_poisson(c: &mut Criterion) {
    let mut group = c.benchmark_group("poisson_solve");
    for n in [64usize, 128, 256] {
        let f = rough_field(grid(n), 11);
        group.bench_with_input(BenchmarkId::from_parameter(n), &f, |b, f| {
            b.iter(|| black_box(f).solve_poisson())
        });
    }
    group.finish();
}

fn bench_rhs(c: &mut Criterion) {
    let spec = standard_spec(Variant::SawadaSuzuki, 128);
    let v = rough_field(spec.grid, 12);
    c.bench_function("rhs_two_mass_128", |b| {
        b.iter(|| rhs(black_box(&spec), black_box(&v)).unwrap())
    });
}

fn bench_functional(c: &mut Criterion) {
    let mut group = c.benchmark_group("functional_128");
    for variant in [Variant::SawadaSuzuki, Variant::Neri] {
        let spec = standard_spec(variant, 128);
        let v = rough_field(spec.grid, 13);
        let name = match variant {
            Variant::SawadaSuzuki => "per_intensity",
            Variant::Neri => "shared",
        };
        group.bench_function(name, |b| {
            b.iter(|| functional(black_box(&spec), black_box(&v)).unwrap())
        });
    }
    group.finish();
}

fn bench_blowup_scan(c: &mut Criterion) {
    let g = grid(256);
    let center = (PI, PI);
    let spec =
        ProblemSpec::new(Variant::SawadaSuzuki, 8.0 * PI, IntensityMeasure::dirac_one(), g)
            .unwrap();
    let v = liouville_bubble(g, &BubbleSpec { center, scale: 40.0, sign: 1.0 });
    let peak = Peak { i: g.n() / 2, j: g.n() / 2, x1: center.0, x2: center.1, value: v.max() };
    let schedule = default_radius_schedule(g);
    let mut group = c.benchmark_group("blowup_scan_256");
    group.sample_size(20);
    group.bench_function("bubble_mass_estimate", |b| {
        b.iter(|| {
            estimate_masses(black_box(&spec), black_box(&v), &[peak], &[], &schedule).unwrap()
        })
    });
    group.finish();
}

criterion_group!(benches, bench_poisson, bench_rhs, bench_functional, bench_blowup_scan);
criterion_main!(benches);
