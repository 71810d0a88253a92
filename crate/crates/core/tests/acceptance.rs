//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Criterion 9 compares wall-clock times and is reported without gating the
//! exit status.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use battflow_core::bench::build_scenario;
use battflow_core::case::{
    case9, sample_ev_population, synthetic_case, BinMatrix, Case, EvGenParams, LoadProfile, Schedules, Strategy,
};
use battflow_core::derivatives::{
    fd_jacobian, hess_lagrangian, jac_all, lagrangian_gradient, max_rel_error, random_interior_point,
    template_violations,
};
use battflow_core::formulation::{build_problem, Group, Problem};
use battflow_core::ipm::{solve, solve_observed, unreduced_residual, IterationEvent, Solution, SolverOptions};
use battflow_core::kkt::{
    direct_factorize, direct_solve, predict_schur_nnz, schur_factorize, schur_solve, Backend, OrderingCache,
};
use battflow_core::par;
use battflow_core::sparse::{max_abs_diff, norm_inf};

const DIRECTION_RTOL: f64 = 1e-8;
const OBJECTIVE_RTOL: f64 = 1e-6;
const FD_JAC_RTOL: f64 = 1e-6;
const FD_HESS_RTOL: f64 = 1e-5;
const FD_STEP: f64 = 1e-6;
const FD_POINTS: usize = 5;
const KKT_TOL: f64 = 1e-8;
const MAX_ITER: usize = 150;
const STRATEGY_SPREAD: f64 = 0.15;
const STRATEGY_REPEATS: usize = 5;
const MEMORY_RATIO: f64 = 2.0;
const CROSSOVER_ITERS: usize = 3;
const EV_SAMPLES: usize = 10_000;
const UNREDUCED_TOL: f64 = 1e-9;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn scenario(base: &Case, periods: usize, ny: usize, strategy: Strategy) -> Problem {
    build_problem(&build_scenario(base, periods, 1.0, ny, strategy, &LoadProfile::default())).expect("scenario builds")
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

fn static_golden() -> Outcome {
    let pat = predict_schur_nnz(&Schedules::all_ones(5, 1, 10), 5, 10);
    let per = pat.block_nnz();
    let ok = pat.nnz() == 340 && per[..9].iter().all(|&n| n == 40) && per[9] == 25;
    outcome(ok, format!("nnz={} per-block={:?}", pat.nnz(), per))
}

fn dynamic_golden() -> Outcome {
    let rows = ["0011111100", "0001111000", "0011110000", "0000111110", "0000111000"];
    let avbp = BinMatrix::from_strings("AVBP", &rows).expect("valid rows");
    let s = Schedules {
        conch: avbp.clone(),
        condi: BinMatrix::zeros(5, 10),
        avbq: BinMatrix::zeros(5, 10),
        avg: BinMatrix::ones(1, 10),
        avbp,
    };
    let n = predict_schur_nnz(&s, 5, 10).nnz();
    outcome(n == 202, format!("nnz={n}"))
}

/// Worst per-iteration gap between the two backends on the same systems,
/// plus the converged Schur solution.
fn direction_gap(p: &Problem) -> (f64, Result<Solution, String>) {
    let mut worst = 0.0_f64;
    let res = solve_observed(p, &SolverOptions::with_backend(Backend::Schur), &mut |ev: &IterationEvent<'_>| {
        let sys = ev.system;
        let lu = direct_factorize(sys, &mut OrderingCache::new()).and_then(|f| direct_solve(&f, sys));
        let sc = schur_factorize(sys, &mut OrderingCache::new()).and_then(|f| schur_solve(&f, sys));
        match (lu, sc) {
            (Ok(a), Ok(b)) => {
                let (a, b) = (sys.stack(&a), sys.stack(&b));
                worst = worst.max(max_abs_diff(&b, &a) / (1.0 + norm_inf(&a)));
            }
            _ => worst = f64::INFINITY,
        }
    });
    (worst, res.map_err(|e| e.to_string()))
}

fn backend_equivalence() -> Outcome {
    let cases = [
        ("case9 T=24 n_y=3", scenario(&case9(), 24, 3, Strategy::FairDist)),
        ("synth30 T=48 n_y=10", scenario(&synthetic_case(30, 30), 48, 10, Strategy::FairDist)),
    ];
    let mut ok = true;
    let mut notes = Vec::new();
    for (name, p) in &cases {
        let (gap, schur) = direction_gap(p);
        let direct = solve(p, &SolverOptions::with_backend(Backend::DirectLu));
        match (schur, direct) {
            (Ok(a), Ok(b)) => {
                let r = rel(a.objective, b.objective);
                ok &= gap <= DIRECTION_RTOL && r <= OBJECTIVE_RTOL;
                notes.push(format!("{name}: direction gap {gap:.1e}, objective gap {r:.1e}"));
            }
            (a, b) => {
                ok = false;
                notes.push(format!("{name}: schur {:?} direct {:?}", a.err(), b.err().map(|e| e.to_string())));
            }
        }
    }
    outcome(ok, notes.join("; "))
}

fn derivative_check(p: &Problem, seed: u64) -> (f64, f64, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut jac, mut hess, mut bad) = (0.0_f64, 0.0_f64, 0);
    for _ in 0..FD_POINTS {
        let x = random_interior_point(p, &mut rng);
        let d = jac_all(p, &x);
        let (_, g) = fd_jacobian(|z| p.equalities(z), &x, FD_STEP);
        let (_, h) = fd_jacobian(|z| p.inequalities(z), &x, FD_STEP);
        let (_, f) = fd_jacobian(|z| vec![p.objective(z)], &x, FD_STEP);
        let fe = d.f_x.iter().zip(&f).map(|(a, b)| (a - b).abs() / b.abs().max(1.0)).fold(0.0, f64::max);
        jac = jac.max(max_rel_error(&d.g_x, &g)).max(max_rel_error(&d.h_x, &h)).max(fe);

        let lam: Vec<f64> = (0..p.ng_rows()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mu: Vec<f64> = (0..p.nh_rows()).map(|_| rng.gen_range(0.0..1.0)).collect();
        let lxx = hess_lagrangian(p, &x, &lam, &mu, 1.0);
        let (_, fd) = fd_jacobian(|z| lagrangian_gradient(&jac_all(p, z), &lam, &mu), &x, FD_STEP);
        hess = hess.max(max_rel_error(&lxx, &fd));
        bad += template_violations(p, &d.g_x, &d.h_x, &lxx).len();
    }
    (jac, hess, bad)
}

fn derivatives() -> Outcome {
    let cases = [
        ("case9", scenario(&case9(), 3, 2, Strategy::LoadBus), 11),
        ("synth30", scenario(&synthetic_case(30, 30), 2, 3, Strategy::FairDist), 12),
    ];
    let mut ok = true;
    let mut notes = Vec::new();
    for (name, p, seed) in &cases {
        let (j, h, bad) = derivative_check(p, *seed);
        ok &= j <= FD_JAC_RTOL && h <= FD_HESS_RTOL && bad == 0;
        notes.push(format!("{name}: jac {j:.1e}, hess {h:.1e}, template misses {bad}"));
    }
    outcome(ok, notes.join("; "))
}

fn decoupling() -> Outcome {
    let flat = LoadProfile::flat();
    let one = build_problem(&build_scenario(&case9(), 1, 1.0, 0, Strategy::FairDist, &flat)).expect("builds");
    let three = build_problem(&build_scenario(&case9(), 3, 1.0, 0, Strategy::FairDist, &flat)).expect("builds");
    match (solve(&one, &SolverOptions::default()), solve(&three, &SolverOptions::default())) {
        (Ok(a), Ok(b)) => {
            let r = rel(b.objective, 3.0 * a.objective);
            outcome(r <= OBJECTIVE_RTOL, format!("3 x {:.4} vs {:.4}, rel {r:.1e}", a.objective, b.objective))
        }
        (a, b) => outcome(false, format!("solve failed: {:?} / {:?}", a.err(), b.err())),
    }
}

/// Convergence suite run: the solution and the worst unreduced residual
/// over its iterations.
fn convergence_run(backend: Backend) -> (Problem, Result<Solution, String>, f64) {
    let p = scenario(&case9(), 24, 3, Strategy::FairDist);
    let mut worst = 0.0_f64;
    let opts = SolverOptions { max_iter: MAX_ITER, ..SolverOptions::with_backend(backend) };
    let res = solve_observed(&p, &opts, &mut |ev: &IterationEvent<'_>| {
        worst = unreduced_residual(ev).into_iter().fold(worst, f64::max);
    });
    (p, res.map_err(|e| e.to_string()), worst)
}

fn convergence(p: &Problem, res: &Result<Solution, String>) -> Outcome {
    let s = match res {
        Ok(s) => s,
        Err(e) => return outcome(false, e.clone()),
    };
    let r = s.residuals;
    let tol_ok = r.feas <= KKT_TOL && r.max_h <= KKT_TOL && r.grad <= KKT_TOL && r.comp <= KKT_TOL;
    let v = &p.vars;
    let load: Vec<f64> = (0..v.periods).map(|t| p.pd[t].iter().sum()).collect();
    let mut sorted = load.clone();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let median = 0.5 * (sorted[(n - 1) / 2] + sorted[n / 2]);
    let (mut charge_ok, mut discharge_ok, mut charged, mut discharged) = (true, true, 0, 0);
    for t in 0..v.periods {
        let net: f64 = (0..v.ny).map(|i| s.x[v.index(t, Group::Pch, i)] - s.x[v.index(t, Group::Pdch, i)]).sum::<f64>()
            * p.case.base_mva;
        if net > 1e-3 {
            charged += 1;
            charge_ok &= load[t] < median;
        } else if net < -1e-3 {
            discharged += 1;
            discharge_ok &= load[t] > median;
        }
    }
    let ok = tol_ok && s.iterations <= MAX_ITER && charge_ok && discharge_ok && charged > 0 && discharged > 0;
    outcome(
        ok,
        format!(
            "{} iterations, feas {:.1e} grad {:.1e} comp {:.1e}; {charged} charging steps below median, {discharged} discharging above",
            s.iterations, r.feas, r.grad, r.comp
        ),
    )
}

fn lower_decile(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 10]
}

/// Lower-decile per-iteration time pooled over interleaved repeats, which
/// filters out stalls from other tenants of the machine.
fn strategies() -> Outcome {
    let base = synthetic_case(30, 30);
    let problems: Vec<(Strategy, Problem)> = Strategy::ALL.iter().map(|&s| (s, scenario(&base, 24, 10, s))).collect();
    let mut samples: Vec<Vec<f64>> = vec![Vec::new(); problems.len()];
    for _ in 0..STRATEGY_REPEATS {
        for ((s, p), acc) in problems.iter().zip(samples.iter_mut()) {
            match par::with_threads(1, || solve(p, &SolverOptions::default())) {
                Ok(sol) => acc.extend(sol.timings.iter().map(|t| t.eval + t.kkt + t.step)),
                Err(e) => return outcome(false, format!("{s}: {e}")),
            }
        }
    }
    let per_iter: Vec<(Strategy, f64)> =
        problems.iter().map(|(s, _)| *s).zip(samples.into_iter().map(lower_decile)).collect();
    let lo = per_iter.iter().map(|x| x.1).fold(f64::INFINITY, f64::min);
    let hi = per_iter.iter().map(|x| x.1).fold(0.0, f64::max);
    let spread = (hi - lo) / lo;
    let list: Vec<String> = per_iter.iter().map(|(s, t)| format!("{s} {:.2} ms", 1e3 * t)).collect();
    outcome(spread <= STRATEGY_SPREAD, format!("spread {:.1}% ({})", 100.0 * spread, list.join(", ")))
}

fn memory() -> Outcome {
    let p = scenario(&synthetic_case(118, 118), 96, 10, Strategy::FairDist);
    let run = |b| par::with_threads(1, || solve(&p, &SolverOptions::with_backend(b)));
    match (run(Backend::Schur), run(Backend::DirectLu)) {
        (Ok(s), Ok(d)) => {
            let ratio = d.peak_factor_nnz as f64 / s.peak_factor_nnz as f64;
            outcome(
                ratio >= MEMORY_RATIO,
                format!("schur {} vs direct-lu {} nnz, ratio {ratio:.2}", s.peak_factor_nnz, d.peak_factor_nnz),
            )
        }
        (a, b) => outcome(false, format!("solve failed: {:?} / {:?}", a.err(), b.err())),
    }
}

/// KKT seconds over the first few iterations (the whole solve when it
/// converges sooner).
fn kkt_time(p: &Problem, backend: Backend, max_iter: usize) -> f64 {
    let opts = SolverOptions { max_iter, ..SolverOptions::with_backend(backend) };
    let sol = par::with_threads(1, || match solve(p, &opts) {
        Ok(s) => Some(s),
        Err(battflow_core::error::SolveError::MaxIterations(s)) => Some(*s),
        Err(_) => None,
    });
    sol.map_or(f64::NAN, |s| s.kkt_seconds())
}

fn crossover() -> Outcome {
    let mut small_ok = true;
    let mut wins = Vec::new();
    for periods in [6, 12, 24] {
        for ny in [0, 3, 10] {
            let p = scenario(&case9(), periods, ny, Strategy::FairDist);
            let s = kkt_time(&p, Backend::Schur, MAX_ITER);
            let d = kkt_time(&p, Backend::DirectLu, MAX_ITER);
            if !(d <= s) {
                small_ok = false;
                wins.push(format!("T={periods},n_y={ny}"));
            }
        }
    }
    let p = scenario(&synthetic_case(118, 118), 96, 50, Strategy::FairDist);
    let s = kkt_time(&p, Backend::Schur, CROSSOVER_ITERS);
    let d = kkt_time(&p, Backend::DirectLu, CROSSOVER_ITERS);
    let large_ok = s < d;
    outcome(
        small_ok && large_ok,
        format!(
            "case9 direct-lu slower at [{}]; synth118 T=96 n_y=50 first {CROSSOVER_ITERS} iterations schur {s:.2}s vs direct-lu {d:.2}s",
            wins.join(" ")
        ),
    )
}

fn ev_statistics() -> Outcome {
    let p = EvGenParams { n_ev: EV_SAMPLES, seed: 2024, ..Default::default() };
    let s = match sample_ev_population(&p) {
        Ok(s) => s,
        Err(e) => return outcome(false, e.to_string()),
    };
    let n = s.len() as f64;
    let mean = |f: &dyn Fn(&battflow_core::case::EvSample) -> f64| s.iter().map(f).sum::<f64>() / n;
    let dist = mean(&|e| e.distance_km);
    let std = (mean(&|e| (e.distance_km - dist).powi(2))).sqrt();
    let arrival = mean(&|e| e.arrival_hour);
    let kw: Vec<f64> = p.charger_amps.iter().map(|a| a * p.charger_volts / 1000.0).collect();
    let shares: Vec<f64> =
        kw.iter().map(|k| s.iter().filter(|e| (e.charger_kw - k).abs() < 1e-9).count() as f64 / n).collect();
    let mix_ok = shares.iter().zip(&p.charger_share).all(|(a, b)| (a - b).abs() <= 0.01);
    let stay_ok = s.iter().all(|e| e.departure_hour == e.arrival_hour + p.stay_hours);
    let ok = (dist - 52.0).abs() <= 2.0
        && (std - 22.0).abs() <= 2.0
        && (arrival - 17.0).abs() * 60.0 <= 10.0
        && mix_ok
        && stay_ok;
    outcome(
        ok,
        format!(
            "distance {dist:.2} ± {std:.2} km, arrival {:02}:{:02}, chargers {:?}, stay exact {stay_ok}",
            arrival.floor() as u32,
            ((arrival.fract()) * 60.0).round() as u32,
            shares.iter().map(|x| (x * 1000.0).round() / 10.0).collect::<Vec<_>>()
        ),
    )
}

fn main() {
    let mut failures = 0;
    let mut report = |id: u32, name: &str, gating: bool, f: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let o = f();
        let verdict = match (o.pass, gating) {
            (true, _) => "PASS",
            (false, true) => "FAIL",
            (false, false) => "FAIL (non-gating)",
        };
        if !o.pass && gating {
            failures += 1;
        }
        println!("[{verdict}] {id:>2} {name}: {} ({:.1}s)", o.detail, start.elapsed().as_secs_f64());
    };
    report(1, "Schur nnz golden, static", true, &mut static_golden);
    report(2, "Schur nnz golden, dynamic", true, &mut dynamic_golden);
    report(3, "backend equivalence", true, &mut backend_equivalence);
    report(4, "derivative correctness", true, &mut derivatives);
    report(5, "decoupling oracle", true, &mut decoupling);
    let (p, schur, schur_worst) = convergence_run(Backend::Schur);
    report(6, "convergence suite", true, &mut || convergence(&p, &schur));
    report(7, "strategy insensitivity", true, &mut strategies);
    report(8, "memory proxy", true, &mut memory);
    report(9, "performance crossover", false, &mut crossover);
    report(10, "EV generator statistics", true, &mut ev_statistics);
    report(11, "full-KKT residual", true, &mut || {
        let (_, direct, direct_worst) = convergence_run(Backend::DirectLu);
        let worst = schur_worst.max(direct_worst);
        let ran = schur.is_ok() && direct.is_ok();
        outcome(ran && worst <= UNREDUCED_TOL, format!("worst scaled residual {worst:.1e} over both backends"))
    });
    if failures > 0 {
        println!("{failures} gating criteria failed");
        std::process::exit(1);
    }
}
