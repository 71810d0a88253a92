//! Analytical first and second derivatives of the objective and the
//! constraints, assembled per step and globally, plus a central
//! finite-difference oracle.

use rand::Rng;

use crate::formulation::{Group, Problem};
use crate::network::{d2asbr_dv2, d2sbus_dv2, dabr_dv, dsbr_dv, dsbus_dv};
use crate::par;
use crate::sparse::{SparseMat, Triplets};

/// Derivatives of the rows owned by one step, with step-local columns.
#[derive(Clone, Debug)]
pub struct StepJac {
    /// Power-balance rows, `2 n_b × N_xt`.
    pub gn: SparseMat,
    /// Pinning rows, `n_gl_t × N_xt`.
    pub gl: SparseMat,
    /// Line-limit rows, `2 n_lc × N_xt`.
    pub hn: SparseMat,
    /// Box rows, `n_hl_t × N_xt`.
    pub hl: SparseMat,
    /// Objective gradient over the step variables.
    pub f_x: Vec<f64>,
}

/// Constant storage-row coefficients, `n_y × N_xt` each.
#[derive(Clone, Debug)]
pub struct StorageJac {
    /// Coefficients on the variables of the row's own step.
    pub cur: SparseMat,
    /// Coefficients on the previous step (unused at the first step).
    pub prev: SparseMat,
}

/// First derivatives of the whole problem.
#[derive(Clone, Debug)]
pub struct DerivBundle {
    pub steps: Vec<StepJac>,
    pub storage: StorageJac,
    pub f_x: Vec<f64>,
    pub g_x: SparseMat,
    pub h_x: SparseMat,
}

/// Storage-row Jacobian blocks; identical for every step.
pub fn storage_jacobian(p: &Problem) -> StorageJac {
    let v = &p.vars;
    let dt = p.case.dt_hours;
    let mut cur = Triplets::new(v.ny, v.nxt);
    let mut prev = Triplets::new(v.ny, v.nxt);
    for (i, s) in p.case.storage.iter().enumerate() {
        cur.push(i, v.offset(Group::Soc) + i, p.emax[i]);
        cur.push(i, v.offset(Group::Pch) + i, -s.eff_ch * dt);
        cur.push(i, v.offset(Group::Pdch) + i, dt / s.eff_dch);
        prev.push(i, v.offset(Group::Soc) + i, -p.emax[i]);
    }
    StorageJac { cur: cur.to_csc(), prev: prev.to_csc() }
}

/// Jacobian blocks of step `t` with the objective weighted by `cost_scale`.
pub fn step_jacobian(p: &Problem, x: &[f64], t: usize, cost_scale: f64) -> StepJac {
    let v = &p.vars;
    let (nb, nxt) = (v.nb, v.nxt);
    let volt = p.voltages(x, t);

    let (dva, dvm) = dsbus_dv(&p.net.ybus, &volt);
    let mut gn = Triplets::with_capacity(2 * nb, nxt, 4 * (dva.nnz() + dvm.nnz()) + 2 * nxt);
    for (i, j, s) in dva.iter() {
        gn.push(i, j, -s.re);
        gn.push(nb + i, j, -s.im);
    }
    for (i, j, s) in dvm.iter() {
        gn.push(i, nb + j, -s.re);
        gn.push(nb + i, nb + j, -s.im);
    }
    for (g, &b) in p.gen_bus.iter().enumerate() {
        if p.gen_on[t][g] {
            gn.push(b, v.offset(Group::Pg) + g, 1.0);
            gn.push(nb + b, v.offset(Group::Qg) + g, 1.0);
        }
    }
    for (i, &b) in p.storage_bus.iter().enumerate() {
        if p.ch_on[t][i] {
            gn.push(b, v.offset(Group::Pch) + i, -1.0);
        }
        if p.dch_on[t][i] {
            gn.push(b, v.offset(Group::Pdch) + i, 1.0);
        }
        if p.qs_on[t][i] {
            gn.push(nb + b, v.offset(Group::Qs) + i, 1.0);
        }
    }

    let pins = &p.cons.gl_vars[t];
    let mut gl = Triplets::with_capacity(pins.len(), nxt, pins.len());
    for (r, &k) in pins.iter().enumerate() {
        gl.push(r, k, 1.0);
    }

    let l = &p.lines;
    let nlc = l.len();
    let mut hn = Triplets::new(2 * nlc, nxt);
    for (end, (y, c)) in [(&l.yf, &l.cf), (&l.yt, &l.ct)].into_iter().enumerate() {
        let (sa, sm, s) = dsbr_dv(y, c, &volt);
        let (aa, am) = dabr_dv(&sa, &sm, &s);
        hn.push_block(end * nlc, 0, &aa);
        hn.push_block(end * nlc, nb, &am);
    }

    let boxes = &p.cons.hl_rows[t];
    let mut hl = Triplets::with_capacity(boxes.len(), nxt, boxes.len());
    for (r, &(k, upper)) in boxes.iter().enumerate() {
        hl.push(r, k, if upper { 1.0 } else { -1.0 });
    }

    let mut f_x = vec![0.0; nxt];
    for (g, &(c2, c1, _)) in p.cost.iter().enumerate() {
        if p.gen_on[t][g] {
            let pg = x[v.index(t, Group::Pg, g)];
            f_x[v.offset(Group::Pg) + g] = cost_scale * (2.0 * c2 * pg + c1);
        }
    }

    StepJac { gn: gn.to_csc(), gl: gl.to_csc(), hn: hn.to_csc(), hl: hl.to_csc(), f_x }
}

/// Stacks step blocks into the global `G_X`.
pub fn assemble_g(p: &Problem, steps: &[StepJac], storage: &StorageJac) -> SparseMat {
    let c = &p.cons;
    let v = &p.vars;
    let cap: usize = steps.iter().map(|s| s.gn.nnz() + s.gl.nnz()).sum::<usize>()
        + v.periods * (storage.cur.nnz() + storage.prev.nnz());
    let mut tr = Triplets::with_capacity(c.total_g(), v.nx(), cap);
    for (t, s) in steps.iter().enumerate() {
        let col = v.block(t).start;
        tr.push_block(c.gn_row(t), col, &s.gn);
        tr.push_block(c.gl_row(t), col, &s.gl);
        tr.push_block(c.gs_row(t, 0), col, &storage.cur);
        if t > 0 {
            tr.push_block(c.gs_row(t, 0), v.block(t - 1).start, &storage.prev);
        }
    }
    tr.to_csc()
}

/// Stacks step blocks into the global `H_X`.
pub fn assemble_h(p: &Problem, steps: &[StepJac]) -> SparseMat {
    let c = &p.cons;
    let v = &p.vars;
    let cap: usize = steps.iter().map(|s| s.hn.nnz() + s.hl.nnz()).sum();
    let mut tr = Triplets::with_capacity(c.total_h(), v.nx(), cap);
    for (t, s) in steps.iter().enumerate() {
        let col = v.block(t).start;
        tr.push_block(c.hn_row(t), col, &s.hn);
        tr.push_block(c.hl_row(t), col, &s.hl);
    }
    tr.to_csc()
}

/// All first derivatives with the objective weighted by `cost_scale`.
pub fn jac_all_scaled(p: &Problem, x: &[f64], cost_scale: f64) -> DerivBundle {
    let steps = par::map_range(p.periods(), |t| step_jacobian(p, x, t, cost_scale));
    let storage = storage_jacobian(p);
    let g_x = assemble_g(p, &steps, &storage);
    let h_x = assemble_h(p, &steps);
    let f_x = steps.iter().flat_map(|s| s.f_x.iter().copied()).collect();
    DerivBundle { steps, storage, f_x, g_x, h_x }
}

/// All first derivatives of the unscaled problem.
pub fn jac_all(p: &Problem, x: &[f64]) -> DerivBundle {
    jac_all_scaled(p, x, 1.0)
}

/// Hessian of the Lagrangian restricted to step `t` (`N_xt × N_xt`).
///
/// `lam_gn` are the multipliers of the step's power-balance rows and
/// `mu_hn` those of its line-limit rows. Linear rows contribute nothing.
pub fn hess_step(p: &Problem, x: &[f64], t: usize, lam_gn: &[f64], mu_hn: &[f64], cost_scale: f64) -> SparseMat {
    let v = &p.vars;
    let (nb, nxt) = (v.nb, v.nxt);
    let volt = p.voltages(x, t);
    let [pa, pav, pva, pvv] = d2sbus_dv2(&p.net.ybus, &volt, &lam_gn[..nb]);
    let [qa, qav, qva, qvv] = d2sbus_dv2(&p.net.ybus, &volt, &lam_gn[nb..]);
    let mut tr = Triplets::with_capacity(nxt, nxt, 8 * pa.nnz() + nxt);
    let blocks = [(&pa, &qa, 0, 0), (&pav, &qav, 0, nb), (&pva, &qva, nb, 0), (&pvv, &qvv, nb, nb)];
    for (bp, bq, r0, c0) in blocks {
        for (i, j, s) in bp.iter() {
            tr.push(r0 + i, c0 + j, -s.re);
        }
        for (i, j, s) in bq.iter() {
            tr.push(r0 + i, c0 + j, -s.im);
        }
    }
    let l = &p.lines;
    let nlc = l.len();
    if nlc > 0 {
        for (end, (y, c)) in [(&l.yf, &l.cf), (&l.yt, &l.ct)].into_iter().enumerate() {
            let mu = &mu_hn[end * nlc..(end + 1) * nlc];
            let (sa, sm, s) = dsbr_dv(y, c, &volt);
            let [haa, hav, hva, hvv] = d2asbr_dv2(&sa, &sm, &s, c, y, &volt, mu);
            tr.push_block(0, 0, &haa);
            tr.push_block(0, nb, &hav);
            tr.push_block(nb, 0, &hva);
            tr.push_block(nb, nb, &hvv);
        }
    }
    for k in 0..nxt {
        tr.push(k, k, 0.0);
    }
    for (g, &(c2, _, _)) in p.cost.iter().enumerate() {
        if p.gen_on[t][g] {
            let k = v.offset(Group::Pg) + g;
            tr.push(k, k, cost_scale * 2.0 * c2);
        }
    }
    tr.to_csc()
}

/// Step blocks of the Lagrangian Hessian for global multipliers.
pub fn hess_blocks(p: &Problem, x: &[f64], lam: &[f64], mu: &[f64], cost_scale: f64) -> Vec<SparseMat> {
    let c = &p.cons;
    par::map_range(p.periods(), |t| {
        let g0 = c.gn_row(t);
        let h0 = c.hn_row(t);
        hess_step(p, x, t, &lam[g0..g0 + c.n_gn], &mu[h0..h0 + c.n_hn], cost_scale)
    })
}

/// Global block-diagonal Lagrangian Hessian `L_XX`.
pub fn hess_lagrangian(p: &Problem, x: &[f64], lam: &[f64], mu: &[f64], cost_scale: f64) -> SparseMat {
    let blocks = hess_blocks(p, x, lam, mu, cost_scale);
    let v = &p.vars;
    let mut tr = Triplets::with_capacity(v.nx(), v.nx(), blocks.iter().map(|b| b.nnz()).sum());
    for (t, b) in blocks.iter().enumerate() {
        let o = v.block(t).start;
        tr.push_block(o, o, b);
    }
    tr.to_csc()
}

/// Gradient of the Lagrangian `∇f + G_Xᵀλ + H_Xᵀμ`.
pub fn lagrangian_gradient(d: &DerivBundle, lam: &[f64], mu: &[f64]) -> Vec<f64> {
    let gl = d.g_x.tr_mul_vec(lam);
    let hl = d.h_x.tr_mul_vec(mu);
    d.f_x.iter().zip(gl).zip(hl).map(|((a, b), c)| a + b + c).collect()
}

/// A point strictly inside the variable box: bounded variables are drawn
/// from the middle 80 % of their range, unbounded ones near zero, pinned
/// ones keep their value.
pub fn random_interior_point(p: &Problem, rng: &mut impl Rng) -> Vec<f64> {
    let mut x = p.initial_point();
    for (j, xj) in x.iter_mut().enumerate() {
        if p.is_pinned(j) {
            continue;
        }
        let (lo, hi) = (p.xmin[j], p.xmax[j]);
        *xj = if lo.is_finite() && hi.is_finite() {
            lo + (hi - lo) * rng.gen_range(0.1..0.9)
        } else {
            rng.gen_range(-0.3..0.3)
        };
    }
    x
}

/// Central finite-difference Jacobian, row-major `m × n`, with step
/// `h_rel · max(1, |x_j|)`.
pub fn fd_jacobian(f: impl Fn(&[f64]) -> Vec<f64> + Sync, x: &[f64], h_rel: f64) -> (usize, Vec<f64>) {
    let n = x.len();
    let cols = par::map_range(n, |j| {
        let h = h_rel * x[j].abs().max(1.0);
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[j] += h;
        xm[j] -= h;
        let (fp, fm) = (f(&xp), f(&xm));
        fp.iter().zip(&fm).map(|(a, b)| (a - b) / (2.0 * h)).collect::<Vec<f64>>()
    });
    let m = cols.first().map_or(0, Vec::len);
    let mut out = vec![0.0; m * n];
    for (j, c) in cols.iter().enumerate() {
        for (i, &val) in c.iter().enumerate() {
            out[i * n + j] = val;
        }
    }
    (m, out)
}

/// Largest `|a − b| / max(1, |b|)` between a sparse matrix and a dense
/// row-major reference.
pub fn max_rel_error(a: &SparseMat, dense: &[f64]) -> f64 {
    let ad = a.to_dense();
    ad.iter().zip(dense).map(|(x, y)| (x - y).abs() / y.abs().max(1.0)).fold(0.0, f64::max)
}

fn ybus_adjacent(p: &Problem) -> Vec<Vec<bool>> {
    let nb = p.vars.nb;
    let mut adj = vec![vec![false; nb]; nb];
    for (i, j, _) in p.net.ybus.iter() {
        adj[i][j] = true;
        adj[j][i] = true;
    }
    for (k, row) in adj.iter_mut().enumerate() {
        row[k] = true;
    }
    adj
}

/// Entries of `G_X`, `H_X` and `L_XX` that fall outside the structural
/// templates, as `(matrix, row, col)`.
pub fn template_violations(
    p: &Problem,
    g_x: &SparseMat,
    h_x: &SparseMat,
    lxx: &SparseMat,
) -> Vec<(&'static str, usize, usize)> {
    let v = &p.vars;
    let c = &p.cons;
    let (nb, nxt, ny) = (v.nb, v.nxt, v.ny);
    let adj = ybus_adjacent(p);
    let mut bad = Vec::new();
    let step_of_g = |r: usize| -> (u8, usize, usize) {
        if r < c.total_gn() {
            (0, r / c.n_gn, r % c.n_gn)
        } else if r < c.total_gn() + c.total_gl() {
            let t = (0..v.periods).rfind(|&t| c.gl_row(t) <= r).unwrap_or(0);
            (1, t, r - c.gl_row(t))
        } else {
            let k = r - c.total_gn() - c.total_gl();
            (2, k / ny.max(1), k % ny.max(1))
        }
    };
    for (r, col, val) in g_x.iter() {
        if val == 0.0 {
            continue;
        }
        let (tc, local) = (col / nxt, col % nxt);
        let (grp, k) = v.locate(local);
        let (kind, t, rr) = step_of_g(r);
        let ok = match kind {
            0 => {
                let (bus, is_q) = (rr % nb, rr >= nb);
                tc == t
                    && match grp {
                        Group::Theta | Group::Vm => adj[bus][k],
                        Group::Pg => !is_q && p.gen_bus[k] == bus,
                        Group::Qg => is_q && p.gen_bus[k] == bus,
                        Group::Pch | Group::Pdch => !is_q && p.storage_bus[k] == bus,
                        Group::Qs => is_q && p.storage_bus[k] == bus,
                        Group::Soc => false,
                    }
            }
            1 => tc == t && c.gl_vars[t][rr] == local,
            _ => {
                k == rr
                    && ((tc == t && matches!(grp, Group::Soc | Group::Pch | Group::Pdch))
                        || (t > 0 && tc + 1 == t && grp == Group::Soc))
            }
        };
        if !ok {
            bad.push(("G_X", r, col));
        }
    }
    let nlc = p.lines.len();
    let ends: Vec<(usize, usize)> = p
        .lines
        .rows
        .iter()
        .map(|&l| {
            let k = p.net.branch_of_row[l];
            let b = &p.case.branches[k];
            (p.case.bus_index(b.from).unwrap_or(0), p.case.bus_index(b.to).unwrap_or(0))
        })
        .collect();
    for (r, col, val) in h_x.iter() {
        if val == 0.0 {
            continue;
        }
        let (tc, local) = (col / nxt, col % nxt);
        let (grp, k) = v.locate(local);
        let ok = if r < c.total_hn() {
            let (t, rr) = (r / c.n_hn, r % c.n_hn);
            let (f, to) = ends[rr % nlc];
            tc == t && matches!(grp, Group::Theta | Group::Vm) && (k == f || k == to)
        } else {
            let t = (0..v.periods).rfind(|&t| c.hl_row(t) <= r).unwrap_or(0);
            tc == t && c.hl_rows[t][r - c.hl_row(t)].0 == local
        };
        if !ok {
            bad.push(("H_X", r, col));
        }
    }
    for (r, col, val) in lxx.iter() {
        if val == 0.0 {
            continue;
        }
        let (tr, lr) = (r / nxt, r % nxt);
        let (tc, lc) = (col / nxt, col % nxt);
        let (gr, kr) = v.locate(lr);
        let (gc, kc) = v.locate(lc);
        let net = |g: Group| matches!(g, Group::Theta | Group::Vm);
        let ok = tr == tc && ((net(gr) && net(gc) && adj[kr][kc]) || (lr == lc && matches!(gr, Group::Pg | Group::Qg)));
        if !ok {
            bad.push(("L_XX", r, col));
        }
    }
    bad
}
