//! Primal-dual interior point loop.
//!
//! Each iteration eliminates `ΔZ` and `Δμ` from the barrier KKT conditions,
//! solves the reduced Newton system
//!
//! ```text
//! [ M    G_Xᵀ ] [ΔX]   [-N]      M = L_XX + H_Xᵀ diag(μ/Z) H_X
//! [ G_X  0    ] [Δλ] = [-G]      N = ∇L + H_Xᵀ Z⁻¹ (γe + μ∘H)
//! ```
//!
//! through the arrowhead reordering, recovers the eliminated directions and
//! takes a fraction-to-boundary step.

use std::sync::Arc;
use std::time::Instant;

use serde::Serialize;

use crate::derivatives::{hess_blocks, jac_all_scaled, lagrangian_gradient, DerivBundle};
use crate::error::{KktError, SolveError};
use crate::formulation::Problem;
use crate::kkt::{build_arrowhead, predict_for_problem, ArrowheadSystem, Backend, KktSolver};
use crate::par;
use crate::sparse::{norm_inf, SparseMat};

/// Regularization added to the diagonal of `M` after a singular factorization.
pub const SINGULAR_REG: f64 = 1e-10;
/// Step lengths below this abort the solve.
pub const MIN_STEP: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolverOptions {
    pub tol_feas: f64,
    pub tol_grad: f64,
    pub tol_comp: f64,
    pub tol_cost: f64,
    pub max_iter: usize,
    pub sigma: f64,
    pub xi_ftb: f64,
    #[serde(serialize_with = "ser_backend")]
    pub backend: Backend,
    /// Weight applied to the objective inside the solver.
    pub cost_scale: f64,
}

fn ser_backend<S: serde::Serializer>(b: &Backend, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(b.name())
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol_feas: 1e-8,
            tol_grad: 1e-8,
            tol_comp: 1e-8,
            tol_cost: 1e-8,
            max_iter: 150,
            sigma: 0.1,
            xi_ftb: 0.99995,
            backend: Backend::Schur,
            cost_scale: 1e-4,
        }
    }
}

impl SolverOptions {
    pub fn with_backend(backend: Backend) -> Self {
        SolverOptions { backend, ..Self::default() }
    }
}

/// Primal-dual iterate.
#[derive(Clone, Debug, PartialEq)]
pub struct IterState {
    pub x: Vec<f64>,
    pub z: Vec<f64>,
    pub lam: Vec<f64>,
    pub mu: Vec<f64>,
    pub gamma: f64,
    pub iter: usize,
}

impl IterState {
    /// `Z₀ = max(1, −H(X₀))`, `μ₀ = γ₀/Z₀`, `λ₀ = 0`.
    pub fn initial(p: &Problem, gamma0: f64) -> IterState {
        let x = p.initial_point();
        let h = p.inequalities(&x);
        let z: Vec<f64> = h.iter().map(|&v| (-v).max(1.0)).collect();
        let mu = z.iter().map(|&v| gamma0 / v).collect();
        IterState { x, z, lam: vec![0.0; p.ng_rows()], mu, gamma: gamma0, iter: 0 }
    }
}

/// Wall-clock split of one iteration, in seconds.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct IterTiming {
    pub eval: f64,
    pub kkt: f64,
    pub step: f64,
}

/// Scaled convergence measures.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct Residuals {
    /// `‖G‖∞ / (1 + ‖X‖∞)`.
    pub feas: f64,
    /// `max(H)`, clipped at zero.
    pub max_h: f64,
    /// `‖∇L‖∞ / (1 + ‖λ, μ‖∞)`.
    pub grad: f64,
    /// `Zᵀμ / N_h`.
    pub comp: f64,
    /// Relative objective change of the last step.
    pub cost: f64,
}

impl Residuals {
    pub fn within(&self, o: &SolverOptions) -> bool {
        self.feas <= o.tol_feas
            && self.max_h <= o.tol_feas
            && self.grad <= o.tol_grad
            && self.comp <= o.tol_comp
            && self.cost <= o.tol_cost
    }
}

/// One line of the iteration log.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct IterRecord {
    pub iter: usize,
    pub objective: f64,
    pub gamma: f64,
    pub alpha_p: f64,
    pub alpha_d: f64,
    pub residuals: Residuals,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Solution {
    pub x: Vec<f64>,
    /// Unscaled objective at `x`.
    pub objective: f64,
    pub lam: Vec<f64>,
    pub mu: Vec<f64>,
    pub z: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub residuals: Residuals,
    pub timings: Vec<IterTiming>,
    pub history: Vec<IterRecord>,
    pub peak_factor_nnz: usize,
    pub amd_calls: usize,
    pub ldl_fallbacks: usize,
    pub backend: Backend,
}

impl Solution {
    pub fn kkt_seconds(&self) -> f64 {
        self.timings.iter().map(|t| t.kkt).sum()
    }

    pub fn eval_seconds(&self) -> f64 {
        self.timings.iter().map(|t| t.eval).sum()
    }

    pub fn step_seconds(&self) -> f64 {
        self.timings.iter().map(|t| t.step).sum()
    }

    pub fn seconds_per_iteration(&self) -> f64 {
        if self.timings.is_empty() {
            return 0.0;
        }
        let total: f64 = self.timings.iter().map(|t| t.eval + t.kkt + t.step).sum();
        total / self.timings.len() as f64
    }
}

/// Everything known at the moment a Newton direction has been computed.
pub struct IterationEvent<'a> {
    pub iter: usize,
    pub problem: &'a Problem,
    pub state: &'a IterState,
    pub deriv: &'a DerivBundle,
    pub g: &'a [f64],
    pub h: &'a [f64],
    /// `∇L` at the current iterate.
    pub grad_l: &'a [f64],
    pub lxx: &'a [SparseMat],
    pub system: &'a ArrowheadSystem,
    pub dx: &'a [f64],
    pub dlam: &'a [f64],
    pub dz: &'a [f64],
    pub dmu: &'a [f64],
}

/// Receives every iteration of a solve.
pub trait Observer {
    fn on_iteration(&mut self, ev: &IterationEvent<'_>);
}

impl<F: FnMut(&IterationEvent<'_>)> Observer for F {
    fn on_iteration(&mut self, ev: &IterationEvent<'_>) {
        self(ev)
    }
}

struct NoObserver;

impl Observer for NoObserver {
    fn on_iteration(&mut self, _: &IterationEvent<'_>) {}
}

/// Reduced Newton system: per-step blocks of `M` and the vector `N`.
pub fn newton_system(
    p: &Problem,
    s: &IterState,
    d: &DerivBundle,
    lxx: &[SparseMat],
    h: &[f64],
    grad_l: &[f64],
) -> (Vec<SparseMat>, Vec<f64>) {
    let c = &p.cons;
    let w: Vec<f64> = s.mu.iter().zip(&s.z).map(|(m, z)| m / z).collect();
    let m_blocks = par::map_range(p.periods(), |t| {
        let st = &d.steps[t];
        let (h0, l0) = (c.hn_row(t), c.hl_row(t));
        let wn = &w[h0..h0 + c.n_hn];
        let wl = &w[l0..l0 + c.n_hl(t)];
        let hn = st.hn.transpose().matmul(&st.hn.scale_rows(wn));
        let hl = st.hl.transpose().matmul(&st.hl.scale_rows(wl));
        let m = lxx[t].add(&hn).add(&hl);
        m.add_scaled(0.5, &m.transpose(), 0.5)
    });
    let r: Vec<f64> = (0..h.len()).map(|k| (s.gamma + s.mu[k] * h[k]) / s.z[k]).collect();
    let hr = d.h_x.tr_mul_vec(&r);
    let n = grad_l.iter().zip(hr).map(|(a, b)| a + b).collect();
    (m_blocks, n)
}

/// `(ΔZ, Δμ)` from `ΔX`.
pub fn recover_step(s: &IterState, h: &[f64], h_x: &SparseMat, dx: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let hdx = h_x.mul_vec(dx);
    let dz: Vec<f64> = (0..h.len()).map(|k| -h[k] - s.z[k] - hdx[k]).collect();
    let dmu = (0..h.len()).map(|k| -s.mu[k] + (s.gamma - s.mu[k] * dz[k]) / s.z[k]).collect();
    (dz, dmu)
}

/// Fraction-to-boundary step lengths `(α_p, α_d)`.
pub fn step_lengths(z: &[f64], dz: &[f64], mu: &[f64], dmu: &[f64], xi: f64) -> (f64, f64) {
    let ratio = |v: &[f64], dv: &[f64]| {
        let m = v.iter().zip(dv).filter(|(_, d)| **d < 0.0).map(|(a, d)| -a / d).fold(f64::INFINITY, f64::min);
        (xi * m).min(1.0)
    };
    (ratio(z, dz), ratio(mu, dmu))
}

/// `γ' = σ·Zᵀμ / N_h`.
pub fn update_barrier(z: &[f64], mu: &[f64], sigma: f64) -> f64 {
    if z.is_empty() {
        return 0.0;
    }
    sigma * z.iter().zip(mu).map(|(a, b)| a * b).sum::<f64>() / z.len() as f64
}

fn residuals(s: &IterState, g: &[f64], h: &[f64], grad_l: &[f64], f: f64, f_prev: f64) -> Residuals {
    let xn = norm_inf(&s.x);
    let dual = norm_inf(&s.lam).max(norm_inf(&s.mu));
    Residuals {
        feas: norm_inf(g) / (1.0 + xn),
        max_h: h.iter().copied().fold(0.0, f64::max),
        grad: norm_inf(grad_l) / (1.0 + dual),
        comp: if h.is_empty() { 0.0 } else { s.z.iter().zip(&s.mu).map(|(a, b)| a * b).sum::<f64>() / h.len() as f64 },
        cost: (f - f_prev).abs() / (1.0 + f_prev.abs()),
    }
}

/// Scaled residuals of the four rows of the unreduced Newton system for the
/// directions in `ev`: stationarity, complementarity, equalities and
/// inequalities. Each row's `‖r‖∞` is divided by `1 +` the sum of the
/// norms of its terms.
pub fn unreduced_residual(ev: &IterationEvent<'_>) -> [f64; 4] {
    let p = ev.problem;
    let s = ev.state;
    let d = ev.deriv;
    let v = &p.vars;
    let mut lxx_dx = vec![0.0; v.nx()];
    for (t, b) in ev.lxx.iter().enumerate() {
        let r = v.block(t);
        let y = b.mul_vec(&ev.dx[r.clone()]);
        lxx_dx[r].copy_from_slice(&y);
    }
    let hmu = d.h_x.tr_mul_vec(ev.dmu);
    let glam = d.g_x.tr_mul_vec(ev.dlam);
    let r1: Vec<f64> = (0..v.nx()).map(|k| lxx_dx[k] + hmu[k] + glam[k] + ev.grad_l[k]).collect();
    let s1 = 1.0 + norm_inf(&lxx_dx) + norm_inf(&hmu) + norm_inf(&glam) + norm_inf(ev.grad_l);

    let nh = ev.h.len();
    let a: Vec<f64> = (0..nh).map(|k| s.mu[k] * ev.dz[k]).collect();
    let b: Vec<f64> = (0..nh).map(|k| s.z[k] * ev.dmu[k]).collect();
    let c: Vec<f64> = (0..nh).map(|k| s.gamma - s.mu[k] * s.z[k]).collect();
    let r2: Vec<f64> = (0..nh).map(|k| a[k] + b[k] - c[k]).collect();
    let s2 = 1.0 + norm_inf(&a) + norm_inf(&b) + norm_inf(&c);

    let gdx = d.g_x.mul_vec(ev.dx);
    let r3: Vec<f64> = gdx.iter().zip(ev.g).map(|(a, b)| a + b).collect();
    let s3 = 1.0 + norm_inf(&gdx) + norm_inf(ev.g);

    let hdx = d.h_x.mul_vec(ev.dx);
    let r4: Vec<f64> = (0..nh).map(|k| hdx[k] + ev.dz[k] + ev.h[k] + s.z[k]).collect();
    let s4 = 1.0 + norm_inf(&hdx) + norm_inf(ev.dz) + norm_inf(ev.h) + norm_inf(&s.z);

    [norm_inf(&r1) / s1, norm_inf(&r2) / s2, norm_inf(&r3) / s3, norm_inf(&r4) / s4]
}

pub fn solve(p: &Problem, opts: &SolverOptions) -> Result<Solution, SolveError> {
    solve_observed(p, opts, &mut NoObserver)
}

fn all_finite(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite())
}

pub fn solve_observed(p: &Problem, opts: &SolverOptions, obs: &mut dyn Observer) -> Result<Solution, SolveError> {
    let cs = opts.cost_scale;
    let pattern = Arc::new(predict_for_problem(p));
    let mut kkt = KktSolver::new(opts.backend);
    let mut s = IterState::initial(p, 1.0);
    let mut timings = Vec::new();
    let mut history = Vec::new();

    let clock = Instant::now();
    let mut d = jac_all_scaled(p, &s.x, cs);
    let mut g = p.equalities(&s.x);
    let mut h = p.inequalities(&s.x);
    let mut f = cs * p.objective(&s.x);
    let mut grad_l = lagrangian_gradient(&d, &s.lam, &s.mu);
    let mut res = residuals(&s, &g, &h, &grad_l, f, f);
    res.cost = f64::INFINITY;
    let mut eval_time = clock.elapsed().as_secs_f64();

    let finish = |s: IterState, res: Residuals, converged: bool, timings, history, kkt: &KktSolver| Solution {
        objective: p.objective(&s.x),
        x: s.x,
        lam: s.lam,
        mu: s.mu,
        z: s.z,
        iterations: s.iter,
        converged,
        residuals: res,
        timings,
        history,
        peak_factor_nnz: kkt.stats.peak_factor_nnz,
        amd_calls: kkt.orderings.amd_calls,
        ldl_fallbacks: kkt.stats.ldl_fallbacks,
        backend: opts.backend,
    };

    while s.iter < opts.max_iter {
        let iteration = s.iter + 1;
        let clock = Instant::now();
        let lxx = hess_blocks(p, &s.x, &s.lam, &s.mu, cs);
        let (mut m_blocks, n) = newton_system(p, &s, &d, &lxx, &h, &grad_l);
        eval_time += clock.elapsed().as_secs_f64();

        let clock = Instant::now();
        let mut regularized = false;
        let (sys, sol) = loop {
            let sys = build_arrowhead(p, pattern.clone(), &m_blocks, &d, &n, &g)
                .map_err(|source| SolveError::Kkt { iteration, source })?;
            match kkt.solve(&sys) {
                Ok(sol) if all_finite(&sol.dlam_s) && sol.omega.iter().all(|w| all_finite(w)) => break (sys, sol),
                Ok(_) if !regularized => {}
                Ok(_) => {
                    return Err(SolveError::Singular {
                        iteration,
                        source: KktError::Inconsistent("non-finite Newton direction".into()),
                    })
                }
                Err(e) if e.is_singular() && !regularized => {}
                Err(e) if e.is_singular() => return Err(SolveError::Singular { iteration, source: e }),
                Err(source) => return Err(SolveError::Kkt { iteration, source }),
            }
            log::debug!("iteration {iteration}: singular KKT system, regularizing");
            regularized = true;
            for m in &mut m_blocks {
                *m = m.add_diag(&vec![SINGULAR_REG; m.nrows()]);
            }
        };
        let (dx, dlam) = sys.to_original(&sol, p.nx());
        let kkt_time = clock.elapsed().as_secs_f64();

        let clock = Instant::now();
        let (dz, dmu) = recover_step(&s, &h, &d.h_x, &dx);
        obs.on_iteration(&IterationEvent {
            iter: iteration,
            problem: p,
            state: &s,
            deriv: &d,
            g: &g,
            h: &h,
            grad_l: &grad_l,
            lxx: &lxx,
            system: &sys,
            dx: &dx,
            dlam: &dlam,
            dz: &dz,
            dmu: &dmu,
        });
        let (ap, ad) = step_lengths(&s.z, &dz, &s.mu, &dmu, opts.xi_ftb);
        if ap < MIN_STEP || ad < MIN_STEP {
            return Err(SolveError::StepCollapse { iteration, alpha: ap.min(ad) });
        }
        for (a, b) in s.x.iter_mut().zip(&dx) {
            *a += ap * b;
        }
        for (a, b) in s.z.iter_mut().zip(&dz) {
            *a += ap * b;
        }
        for (a, b) in s.lam.iter_mut().zip(&dlam) {
            *a += ad * b;
        }
        for (a, b) in s.mu.iter_mut().zip(&dmu) {
            *a += ad * b;
        }
        s.gamma = update_barrier(&s.z, &s.mu, opts.sigma);
        s.iter = iteration;
        if !all_finite(&s.x) || !all_finite(&s.z) || !all_finite(&s.lam) || !all_finite(&s.mu) {
            return Err(SolveError::NonFinite { iteration });
        }
        let step_time = clock.elapsed().as_secs_f64();

        let clock = Instant::now();
        d = jac_all_scaled(p, &s.x, cs);
        g = p.equalities(&s.x);
        h = p.inequalities(&s.x);
        let f_prev = f;
        f = cs * p.objective(&s.x);
        grad_l = lagrangian_gradient(&d, &s.lam, &s.mu);
        res = residuals(&s, &g, &h, &grad_l, f, f_prev);
        eval_time += clock.elapsed().as_secs_f64();

        timings.push(IterTiming { eval: eval_time, kkt: kkt_time, step: step_time });
        eval_time = 0.0;
        history.push(IterRecord {
            iter: iteration,
            objective: f / cs,
            gamma: s.gamma,
            alpha_p: ap,
            alpha_d: ad,
            residuals: res,
        });
        log::debug!(
            "it {iteration:3} obj {:.6e} feas {:.2e} grad {:.2e} comp {:.2e} cost {:.2e} ap {ap:.3} ad {ad:.3}",
            f / cs,
            res.feas,
            res.grad,
            res.comp,
            res.cost
        );
        if res.within(opts) {
            return Ok(finish(s, res, true, timings, history, &kkt));
        }
    }
    Err(SolveError::MaxIterations(Box::new(finish(s, res, false, timings, history, &kkt))))
}


#[cfg(test)]
mod solve_tests {
    use super::*;
    use crate::bench::build_scenario;
    use crate::case::{case9, LoadProfile, Strategy};
    use crate::formulation::{build_problem, Group};

    fn scenario(periods: usize, ny: usize, profile: &LoadProfile) -> Problem {
        build_problem(&build_scenario(&case9(), periods, 1.0, ny, Strategy::FairDist, profile)).unwrap()
    }

    #[test]
    fn case9_storage_converges_and_arbitrages() {
        let p = scenario(24, 3, &LoadProfile::default());
        let s = solve(&p, &SolverOptions::default()).unwrap();
        assert!(s.converged && s.iterations <= 150);
        assert!(s.residuals.within(&SolverOptions::default()));
        let load: Vec<f64> = (0..24).map(|t| p.pd[t].iter().sum()).collect();
        let mut sorted = load.clone();
        sorted.sort_by(f64::total_cmp);
        let median = 0.5 * (sorted[11] + sorted[12]);
        let v = &p.vars;
        for t in 0..24 {
            let net: f64 = (0..3).map(|i| s.x[v.index(t, Group::Pch, i)] - s.x[v.index(t, Group::Pdch, i)]).sum();
            if net > 1e-4 {
                assert!(load[t] < median, "charging at t={t}");
            }
            if net < -1e-4 {
                assert!(load[t] > median, "discharging at t={t}");
            }
        }
        let first = s.history.first().unwrap().gamma;
        let last = s.history.last().unwrap().gamma;
        assert!(first >= 10.0 * last);
    }

    #[test]
    fn horizon_without_storage_decouples() {
        let single = solve(&scenario(1, 0, &LoadProfile::flat()), &SolverOptions::default()).unwrap();
        let triple = solve(&scenario(3, 0, &LoadProfile::flat()), &SolverOptions::default()).unwrap();
        assert!((single.objective - 5296.69).abs() < 0.5, "{}", single.objective);
        assert!((triple.objective - 3.0 * single.objective).abs() <= 1e-6 * triple.objective);
    }

    #[test]
    fn infeasible_load_never_reports_success() {
        let mut c = build_scenario(&case9(), 2, 1.0, 0, Strategy::FairDist, &LoadProfile::flat());
        for t in 0..2 {
            for b in 0..c.nb() {
                let v = c.pd.get(b, t);
                c.pd.set(b, t, 5.0 * v);
            }
        }
        let p = build_problem(&c).unwrap();
        let opts = SolverOptions { max_iter: 60, ..Default::default() };
        match solve(&p, &opts) {
            Ok(s) => panic!("infeasible case converged after {} iterations", s.iterations),
            Err(SolveError::MaxIterations(s)) => assert!(!s.converged),
            Err(_) => {}
        }
    }

    #[test]
    fn backends_reach_the_same_optimum() {
        let p = scenario(12, 2, &LoadProfile::default());
        let a = solve(&p, &SolverOptions::with_backend(Backend::Schur)).unwrap();
        let b = solve(&p, &SolverOptions::with_backend(Backend::DirectLu)).unwrap();
        assert!((a.objective - b.objective).abs() <= 1e-6 * b.objective.abs());
        assert_eq!(a.iterations, b.iterations);
        assert!(a.peak_factor_nnz > 0 && b.peak_factor_nnz > 0);
    }

    #[test]
    fn newton_matrix_matches_term_sum() {
        let p = scenario(3, 2, &LoadProfile::default());
        let mut checked = 0;
        let opts = SolverOptions { max_iter: 4, ..Default::default() };
        let _ = solve_observed(&p, &opts, &mut |ev: &IterationEvent<'_>| {
            let s = ev.state;
            let (m, n) = newton_system(&p, s, ev.deriv, ev.lxx, ev.h, ev.grad_l);
            let v = &p.vars;
            let x: Vec<f64> = (0..p.nx()).map(|k| ((k * 37 % 11) as f64 - 5.0) / 3.0).collect();
            let hx = ev.deriv.h_x.mul_vec(&x);
            let w: Vec<f64> = (0..hx.len()).map(|k| s.mu[k] / s.z[k] * hx[k]).collect();
            let third = ev.deriv.h_x.tr_mul_vec(&w);
            for t in 0..p.periods() {
                let r = v.block(t);
                let got = m[t].mul_vec(&x[r.clone()]);
                let lx = ev.lxx[t].mul_vec(&x[r.clone()]);
                let scale = 1.0 + norm_inf(&got);
                for (k, j) in r.enumerate() {
                    assert!((got[k] - lx[k] - third[j]).abs() <= 1e-10 * scale);
                }
            }
            let hr: Vec<f64> = (0..ev.h.len()).map(|k| (s.gamma + s.mu[k] * ev.h[k]) / s.z[k]).collect();
            let extra = ev.deriv.h_x.tr_mul_vec(&hr);
            for k in 0..p.nx() {
                assert!((n[k] - ev.grad_l[k] - extra[k]).abs() <= 1e-12 * (1.0 + n[k].abs()));
            }
            checked += 1;
        });
        assert_eq!(checked, 4);
    }

    #[test]
    fn unreduced_system_holds_every_iteration() {
        let p = scenario(6, 2, &LoadProfile::default());
        let mut worst = 0.0_f64;
        let sol = solve_observed(&p, &SolverOptions::default(), &mut |ev: &IterationEvent<'_>| {
            worst = unreduced_residual(ev).into_iter().fold(worst, f64::max);
        })
        .unwrap();
        assert!(sol.converged);
        assert!(worst <= 1e-9, "{worst:e}");
    }

    #[test]
    fn iterates_stay_interior() {
        let p = scenario(4, 1, &LoadProfile::default());
        let opts = SolverOptions::default();
        let _ = solve_observed(&p, &opts, &mut |ev: &IterationEvent<'_>| {
            assert!(ev.state.z.iter().all(|&z| z > 0.0));
            assert!(ev.state.mu.iter().all(|&m| m > 0.0));
        })
        .unwrap();
    }
}
