use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use kinsusp_core::exec::ExecPolicy;
use kinsusp_core::operators::{Engine, FlowSource, PhysGrid, Terms};
use kinsusp_core::state::{random_state, Lattice, Params};
use kinsusp_core::volterra::{growth_scan, ScanOptions};
use kinsusp_core::C64;

const POLICIES: [(&str, ExecPolicy); 2] = [("sequential", ExecPolicy::Sequential), ("parallel", ExecPolicy::Parallel)];

fn rhs(c: &mut Criterion) {
    let params = Params { gamma: 1.0, iota: -1.0, nu: 1e-2, kmax: 2, lmax: 12 };
    let state = random_state(Lattice::new(2), 12, 7, |_, l| 1.0 / (1.0 + l as f64).powi(2));
    let mut g = c.benchmark_group("rhs_kmax2_L12");
    g.sample_size(10);
    for (name, policy) in POLICIES {
        let engine = Engine::new(&params).unwrap().with_policy(policy);
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| engine.rhs(black_box(&state), Terms::FULL, FlowSource::Coupled).unwrap())
        });
    }
    g.finish();
}

fn lattice_transforms(c: &mut Criterion) {
    let lat = Lattice::new(2);
    let grid = PhysGrid::for_kmax(2);
    let count = 169;
    let mut g = c.benchmark_group("synthesize_analyze_169");
    g.sample_size(20);
    for (name, policy) in POLICIES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| {
                let v = grid.synthesize_many(policy, &lat, count, |n, row| {
                    for (j, r) in row.iter_mut().enumerate() {
                        *r = C64::new(n[0] as f64 + j as f64, n[2] as f64);
                    }
                });
                grid.analyze_many(policy, &lat, count, black_box(&v))
            })
        });
    }
    g.finish();
}

fn scan(c: &mut Criterion) {
    let k = [0.0, 0.0, 2.0 * std::f64::consts::PI];
    let opts = ScanOptions { t_end_rescaled: 60.0, fit_from_rescaled: 30.0, ..ScanOptions::default() };
    let iotas = [-8.0, -6.0, -4.0, 2.0, 4.0, 8.0];
    let mut g = c.benchmark_group("growth_scan_6_points");
    g.sample_size(10);
    for (name, policy) in POLICIES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            ExecPolicy::set_current(policy);
            b.iter(|| growth_scan(k, 1.0, black_box(&iotas), 0.0, opts).unwrap())
        });
    }
    ExecPolicy::set_current(ExecPolicy::Parallel);
    g.finish();
}

criterion_group!(benches, rhs, lattice_transforms, scan);
criterion_main!(benches);
