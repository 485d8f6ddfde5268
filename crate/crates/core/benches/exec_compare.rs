use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use num_bigint::BigInt;

use toral_recurrence::cantor_mass::{build_tree_with, select_levels};
use toral_recurrence::periodic_lattice::{count_in_ball_with, PeriodicLattice};
use toral_recurrence::recurrence_geometry::{box_count_dimension_with, decompose_rn, ellipsoid_min_distance_scan, BoxRegion};
use toral_recurrence::{Alpha, Exec, IntegerMatrix, RateFunction, Spectrum};

const MODES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn ball_count(c: &mut Criterion) {
    let a = IntegerMatrix::from_i64_rows(&[[3, 1], [1, 2]]).unwrap();
    let lattice = PeriodicLattice::new(&a, 7).unwrap();
    let mut g = c.benchmark_group("count_in_ball");
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::new(name, lattice.len()), |b| {
            b.iter(|| count_in_ball_with(exec, &lattice, black_box(&[0.3, 0.7]), 0.2).unwrap())
        });
    }
    g.finish();
}

fn separation_scan(c: &mut Criterion) {
    let a = IntegerMatrix::from_i64_rows(&[[2, 1], [1, 1]]).unwrap();
    let psi = RateFunction::exponential(Alpha::ln(4)).unwrap();
    let fam = decompose_rn(&a, 6, &psi, &BigInt::from(100_000)).unwrap();
    let mut g = c.benchmark_group("separation_scan");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::new(name, fam.len()), |b| {
            b.iter(|| ellipsoid_min_distance_scan(exec, black_box(&fam)).unwrap())
        });
    }
    g.finish();
}

fn box_count(c: &mut Criterion) {
    let a = IntegerMatrix::diag(&[2]);
    let psi = RateFunction::exponential(Alpha::ln(2)).unwrap();
    let region = BoxRegion::new(&a, &psi, 6, 12, &BigInt::from(100_000)).unwrap();
    let exps: Vec<u32> = (4..=14).collect();
    let mut g = c.benchmark_group("box_count");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(name, |b| b.iter(|| box_count_dimension_with(exec, &region, black_box(&exps)).unwrap()));
    }
    g.finish();
}

fn mass_tree(c: &mut Criterion) {
    let a = IntegerMatrix::diag(&[3]);
    let spec = Spectrum::from_integers(&[3]).unwrap();
    let psi = RateFunction::exponential(Alpha::ln(3)).unwrap();
    let seq = select_levels(&spec, &psi, 3, 0.5).unwrap();
    let mut g = c.benchmark_group("mass_tree");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(name, |b| b.iter(|| build_tree_with(exec, &a, &psi, black_box(&seq), 1_000_000).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, ball_count, separation_scan, box_count, mass_tree);
criterion_main!(benches);
