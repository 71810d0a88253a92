use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use battflow_core::bench::build_scenario;
use battflow_core::case::{synthetic_case, LoadProfile, Strategy};
use battflow_core::formulation::build_problem;
use battflow_core::ipm::{solve_observed, IterationEvent, SolverOptions};
use battflow_core::kkt::{
    direct_factorize, direct_solve, schur_factorize, schur_solve, ArrowheadSystem, Backend, OrderingCache,
};
use battflow_core::par;

/// Newton system from an early iteration of a synth30 scenario.
fn captured(periods: usize, ny: usize) -> ArrowheadSystem {
    let case = build_scenario(&synthetic_case(30, 30), periods, 1.0, ny, Strategy::FairDist, &LoadProfile::default());
    let p = build_problem(&case).expect("scenario builds");
    let opts = SolverOptions { max_iter: 4, ..SolverOptions::with_backend(Backend::Schur) };
    let mut sys = None;
    let _ = solve_observed(&p, &opts, &mut |ev: &IterationEvent<'_>| sys = Some(ev.system.clone()));
    sys.expect("at least one iteration")
}

fn schur(sys: &ArrowheadSystem, cache: &mut OrderingCache) {
    let f = schur_factorize(sys, cache).expect("factors");
    schur_solve(&f, sys).expect("solves");
}

fn direct(sys: &ArrowheadSystem, cache: &mut OrderingCache) {
    let f = direct_factorize(sys, cache).expect("factors");
    direct_solve(&f, sys).expect("solves");
}

fn backends(c: &mut Criterion) {
    let mut g = c.benchmark_group("kkt_backend");
    g.sample_size(10);
    for periods in [12, 48] {
        let sys = captured(periods, 10);
        let mut sc = OrderingCache::new();
        let mut dc = OrderingCache::new();
        g.bench_with_input(BenchmarkId::new("schur", periods), &sys, |b, s| b.iter(|| schur(s, &mut sc)));
        g.bench_with_input(BenchmarkId::new("direct-lu", periods), &sys, |b, s| b.iter(|| direct(s, &mut dc)));
    }
    g.finish();
}

fn threading(c: &mut Criterion) {
    let sys = captured(48, 10);
    let mut g = c.benchmark_group("schur_threads");
    g.sample_size(10);
    let wide = std::thread::available_parallelism().map_or(4, |n| n.get().max(2));
    for threads in [1, wide] {
        let mut cache = OrderingCache::new();
        g.bench_with_input(BenchmarkId::from_parameter(threads), &sys, |b, s| {
            par::with_threads(threads, || b.iter(|| schur(s, &mut cache)))
        });
    }
    g.finish();
}

criterion_group!(kkt, backends, threading);
criterion_main!(kkt);
