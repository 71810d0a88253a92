//! The multi-period nonlinear program: variable and constraint layouts,
//! bounds, and evaluation of the objective and constraint residuals.
//!
//! Variables of step `t` are stacked as
//! `[Θ, |V|, Pg, Qg, SOC, Pch, Pdch, Qs]`, and `X` concatenates the steps.
//! Equalities are stacked as all power-balance rows, then all pinning rows,
//! then all storage rows. Inequalities are all line-limit rows, then all
//! box rows.

use std::ops::Range;

use num_complex::Complex64 as C64;

use crate::case::Case;
use crate::error::CaseError;
use crate::network::{branch_flow, build_admittance, bus_injection, polar, Network};
use crate::par;
use crate::sparse::{ComplexMat, SparseMat, Triplets};

/// Variable groups of a single step, in layout order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Group {
    Theta,
    Vm,
    Pg,
    Qg,
    Soc,
    Pch,
    Pdch,
    Qs,
}

impl Group {
    pub const ALL: [Group; 8] =
        [Group::Theta, Group::Vm, Group::Pg, Group::Qg, Group::Soc, Group::Pch, Group::Pdch, Group::Qs];
}

/// Offsets of the eight groups inside one step.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VarLayout {
    pub nb: usize,
    pub ng: usize,
    pub ny: usize,
    pub periods: usize,
    /// Variables per step.
    pub nxt: usize,
}

impl VarLayout {
    pub fn new(nb: usize, ng: usize, ny: usize, periods: usize) -> Self {
        VarLayout { nb, ng, ny, periods, nxt: 2 * nb + 2 * ng + 4 * ny }
    }

    pub fn nx(&self) -> usize {
        self.nxt * self.periods
    }

    pub fn len(&self, g: Group) -> usize {
        match g {
            Group::Theta | Group::Vm => self.nb,
            Group::Pg | Group::Qg => self.ng,
            _ => self.ny,
        }
    }

    /// Offset of a group within a step.
    pub fn offset(&self, g: Group) -> usize {
        let (nb, ng, ny) = (self.nb, self.ng, self.ny);
        match g {
            Group::Theta => 0,
            Group::Vm => nb,
            Group::Pg => 2 * nb,
            Group::Qg => 2 * nb + ng,
            Group::Soc => 2 * nb + 2 * ng,
            Group::Pch => 2 * nb + 2 * ng + ny,
            Group::Pdch => 2 * nb + 2 * ng + 2 * ny,
            Group::Qs => 2 * nb + 2 * ng + 3 * ny,
        }
    }

    /// Global index of element `k` of group `g` at step `t`.
    pub fn index(&self, t: usize, g: Group, k: usize) -> usize {
        t * self.nxt + self.offset(g) + k
    }

    /// Global range of step `t`.
    pub fn block(&self, t: usize) -> Range<usize> {
        t * self.nxt..(t + 1) * self.nxt
    }

    /// Group and position of a local index.
    pub fn locate(&self, local: usize) -> (Group, usize) {
        for g in Group::ALL.iter().rev() {
            if local >= self.offset(*g) && self.len(*g) > 0 {
                return (*g, local - self.offset(*g));
            }
        }
        (Group::Theta, local)
    }
}

/// Row counts and offsets of the stacked constraints.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConLayout {
    pub periods: usize,
    /// Power-balance rows per step (`2 n_b`).
    pub n_gn: usize,
    /// Pinned local variable indices per step, ascending.
    pub gl_vars: Vec<Vec<usize>>,
    gl_start: Vec<usize>,
    /// Storage rows per step (`n_y`).
    pub n_gs: usize,
    /// Line-limit rows per step (`2 n_lc`).
    pub n_hn: usize,
    /// Box rows per step as `(local variable, is_upper)`.
    pub hl_rows: Vec<Vec<(usize, bool)>>,
    hl_start: Vec<usize>,
}

impl ConLayout {
    fn new(n_gn: usize, n_gs: usize, n_hn: usize, gl_vars: Vec<Vec<usize>>, hl_rows: Vec<Vec<(usize, bool)>>) -> Self {
        let prefix = |v: &mut dyn Iterator<Item = usize>| {
            let mut acc = 0;
            let mut out = vec![0];
            for n in v {
                acc += n;
                out.push(acc);
            }
            out
        };
        let gl_start = prefix(&mut gl_vars.iter().map(Vec::len));
        let hl_start = prefix(&mut hl_rows.iter().map(Vec::len));
        ConLayout { periods: gl_vars.len(), n_gn, gl_vars, gl_start, n_gs, n_hn, hl_rows, hl_start }
    }

    pub fn n_gl(&self, t: usize) -> usize {
        self.gl_vars[t].len()
    }

    pub fn n_hl(&self, t: usize) -> usize {
        self.hl_rows[t].len()
    }

    pub fn total_gn(&self) -> usize {
        self.n_gn * self.periods
    }

    pub fn total_gl(&self) -> usize {
        self.gl_start[self.periods]
    }

    pub fn total_gs(&self) -> usize {
        self.n_gs * self.periods
    }

    pub fn total_g(&self) -> usize {
        self.total_gn() + self.total_gl() + self.total_gs()
    }

    pub fn total_hn(&self) -> usize {
        self.n_hn * self.periods
    }

    pub fn total_hl(&self) -> usize {
        self.hl_start[self.periods]
    }

    pub fn total_h(&self) -> usize {
        self.total_hn() + self.total_hl()
    }

    /// First power-balance row of step `t`.
    pub fn gn_row(&self, t: usize) -> usize {
        t * self.n_gn
    }

    /// First pinning row of step `t`.
    pub fn gl_row(&self, t: usize) -> usize {
        self.total_gn() + self.gl_start[t]
    }

    /// Storage row of device `i` at step `t`.
    pub fn gs_row(&self, t: usize, i: usize) -> usize {
        self.total_gn() + self.total_gl() + t * self.n_gs + i
    }

    pub fn hn_row(&self, t: usize) -> usize {
        t * self.n_hn
    }

    pub fn hl_row(&self, t: usize) -> usize {
        self.total_hn() + self.hl_start[t]
    }
}

/// Per-step connectivity of generators and storage to buses.
#[derive(Clone, Debug)]
pub struct Connectivity {
    pub cg: SparseMat,
    pub cch: SparseMat,
    pub cdch: SparseMat,
    pub cs: SparseMat,
}

/// Branch matrices restricted to lines with a finite rating.
#[derive(Clone, Debug)]
pub struct LimitedLines {
    pub yf: ComplexMat,
    pub yt: ComplexMat,
    pub cf: ComplexMat,
    pub ct: ComplexMat,
    /// Squared rating, per-unit.
    pub smax2: Vec<f64>,
    /// Row of each limited line in the full branch matrices.
    pub rows: Vec<usize>,
}

impl LimitedLines {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

fn select_rows(m: &ComplexMat, rows: &[usize]) -> ComplexMat {
    let mut pos = vec![usize::MAX; m.nrows()];
    for (k, &r) in rows.iter().enumerate() {
        pos[r] = k;
    }
    let mut tr = Triplets::new(rows.len(), m.ncols());
    for (i, j, v) in m.iter() {
        if pos[i] != usize::MAX {
            tr.push(pos[i], j, v);
        }
    }
    tr.to_csc()
}

/// An assembled multi-period problem.
#[derive(Clone, Debug)]
pub struct Problem {
    pub case: Case,
    pub net: Network,
    pub lines: LimitedLines,
    pub vars: VarLayout,
    pub cons: ConLayout,
    pub xmin: Vec<f64>,
    pub xmax: Vec<f64>,
    /// Pinned variables and their values (`NaN` where free).
    pub pin: Vec<f64>,
    /// Cost coefficients `(c2, c1, c0)` per generator, in per-unit power.
    pub cost: Vec<(f64, f64, f64)>,
    pub gen_bus: Vec<usize>,
    pub storage_bus: Vec<usize>,
    /// Generator running, `[t][g]`.
    pub gen_on: Vec<Vec<bool>>,
    /// Charge connected, `[t][i]`.
    pub ch_on: Vec<Vec<bool>>,
    /// Discharge connected, `[t][i]`.
    pub dch_on: Vec<Vec<bool>>,
    /// Reactive provision connected, `[t][i]`.
    pub qs_on: Vec<Vec<bool>>,
    /// Demand per step, per-unit.
    pub pd: Vec<Vec<f64>>,
    pub qd: Vec<Vec<f64>>,
    /// Capacity per device, per-unit hours.
    pub emax: Vec<f64>,
    /// Identical per-step structure across the horizon.
    pub static_structure: bool,
}

impl Problem {
    pub fn nx(&self) -> usize {
        self.vars.nx()
    }

    pub fn ng_rows(&self) -> usize {
        self.cons.total_g()
    }

    pub fn nh_rows(&self) -> usize {
        self.cons.total_h()
    }

    pub fn periods(&self) -> usize {
        self.vars.periods
    }

    pub fn is_pinned(&self, k: usize) -> bool {
        !self.pin[k].is_nan()
    }

    /// Complex bus voltages of step `t`.
    pub fn voltages(&self, x: &[f64], t: usize) -> Vec<C64> {
        let v = &self.vars;
        let th = &x[v.index(t, Group::Theta, 0)..v.index(t, Group::Theta, 0) + v.nb];
        let vm = &x[v.index(t, Group::Vm, 0)..v.index(t, Group::Vm, 0) + v.nb];
        polar(th, vm)
    }

    /// Connectivity matrices of step `t`.
    pub fn connectivity(&self, t: usize) -> Connectivity {
        let nb = self.vars.nb;
        let build = |bus: &[usize], on: &[bool]| {
            let mut tr = Triplets::new(nb, bus.len());
            for (k, (&b, &o)) in bus.iter().zip(on).enumerate() {
                if o {
                    tr.push(b, k, 1.0);
                }
            }
            tr.to_csc()
        };
        Connectivity {
            cg: build(&self.gen_bus, &self.gen_on[t]),
            cch: build(&self.storage_bus, &self.ch_on[t]),
            cdch: build(&self.storage_bus, &self.dch_on[t]),
            cs: build(&self.storage_bus, &self.qs_on[t]),
        }
    }

    /// Total generation cost in currency per hour summed over the steps.
    pub fn objective(&self, x: &[f64]) -> f64 {
        let v = &self.vars;
        let mut f = 0.0;
        for t in 0..v.periods {
            for (g, &(c2, c1, c0)) in self.cost.iter().enumerate() {
                if self.gen_on[t][g] {
                    let p = x[v.index(t, Group::Pg, g)];
                    f += c2 * p * p + c1 * p + c0;
                }
            }
        }
        f
    }

    /// Power-balance rows of step `t`: `[P; Q]` mismatches.
    pub fn balance(&self, x: &[f64], t: usize) -> Vec<f64> {
        let v = &self.vars;
        let nb = v.nb;
        let s = bus_injection(&self.net.ybus, &self.voltages(x, t));
        let mut out = vec![0.0; 2 * nb];
        for b in 0..nb {
            out[b] = -self.pd[t][b] - s[b].re;
            out[nb + b] = -self.qd[t][b] - s[b].im;
        }
        for (g, &b) in self.gen_bus.iter().enumerate() {
            if self.gen_on[t][g] {
                out[b] += x[v.index(t, Group::Pg, g)];
                out[nb + b] += x[v.index(t, Group::Qg, g)];
            }
        }
        for (i, &b) in self.storage_bus.iter().enumerate() {
            if self.ch_on[t][i] {
                out[b] -= x[v.index(t, Group::Pch, i)];
            }
            if self.dch_on[t][i] {
                out[b] += x[v.index(t, Group::Pdch, i)];
            }
            if self.qs_on[t][i] {
                out[nb + b] += x[v.index(t, Group::Qs, i)];
            }
        }
        out
    }

    /// Storage energy-balance row of device `i` at step `t`.
    pub fn storage_residual(&self, x: &[f64], t: usize, i: usize) -> f64 {
        let v = &self.vars;
        let st = &self.case.storage[i];
        let dt = self.case.dt_hours;
        let e = self.emax[i];
        let prev = if t > 0 { x[v.index(t - 1, Group::Soc, i)] } else { 0.0 };
        e * (x[v.index(t, Group::Soc, i)] - prev - self.case.soci.get(i, t))
            - st.eff_ch * x[v.index(t, Group::Pch, i)] * dt
            + x[v.index(t, Group::Pdch, i)] * dt / st.eff_dch
    }

    /// Equality residuals `G(X)`.
    pub fn equalities(&self, x: &[f64]) -> Vec<f64> {
        let c = &self.cons;
        let periods = self.periods();
        let mut g = Vec::with_capacity(c.total_g());
        for rows in par::map_range(periods, |t| self.balance(x, t)) {
            g.extend(rows);
        }
        for t in 0..periods {
            let base = self.vars.block(t).start;
            for &k in &c.gl_vars[t] {
                g.push(x[base + k] - self.pin[base + k]);
            }
        }
        for t in 0..periods {
            for i in 0..self.vars.ny {
                g.push(self.storage_residual(x, t, i));
            }
        }
        g
    }

    /// Line-limit rows of step `t`: `[|Sf|² − Smax²; |St|² − Smax²]`.
    pub fn line_limits(&self, x: &[f64], t: usize) -> Vec<f64> {
        let l = &self.lines;
        let v = self.voltages(x, t);
        let sf = branch_flow(&l.yf, &l.cf, &v);
        let st = branch_flow(&l.yt, &l.ct, &v);
        sf.iter()
            .zip(&l.smax2)
            .map(|(s, m)| s.norm_sqr() - m)
            .chain(st.iter().zip(&l.smax2).map(|(s, m)| s.norm_sqr() - m))
            .collect()
    }

    /// Inequality residuals `H(X) ≤ 0`.
    pub fn inequalities(&self, x: &[f64]) -> Vec<f64> {
        let c = &self.cons;
        let periods = self.periods();
        let mut h = Vec::with_capacity(c.total_h());
        for rows in par::map_range(periods, |t| self.line_limits(x, t)) {
            h.extend(rows);
        }
        for t in 0..periods {
            let base = self.vars.block(t).start;
            for &(k, upper) in &c.hl_rows[t] {
                let j = base + k;
                h.push(if upper { x[j] - self.xmax[j] } else { self.xmin[j] - x[j] });
            }
        }
        h
    }

    /// Flat start: bound midpoints, unit voltage and zero angle where
    /// unbounded, pinned values where pinned.
    pub fn initial_point(&self) -> Vec<f64> {
        let v = &self.vars;
        (0..self.nx())
            .map(|j| {
                if self.is_pinned(j) {
                    return self.pin[j];
                }
                let (lo, hi) = (self.xmin[j], self.xmax[j]);
                match (lo.is_finite(), hi.is_finite()) {
                    (true, true) => 0.5 * (lo + hi),
                    (true, false) => lo + 1.0,
                    (false, true) => hi - 1.0,
                    (false, false) => match v.locate(j % v.nxt).0 {
                        Group::Vm => 1.0,
                        _ => 0.0,
                    },
                }
            })
            .collect()
    }
}

/// Assembles the problem for a validated case.
pub fn build_problem(case: &Case) -> Result<Problem, CaseError> {
    case.validate()?;
    let (nb, ng, ny, periods) = (case.nb(), case.ng(), case.ny(), case.periods);
    let base = case.base_mva;
    let net = build_admittance(case);
    for (l, &k) in net.branch_of_row.iter().enumerate() {
        let br = &case.branches[k];
        if br.r == 0.0 && br.x == 0.0 {
            return Err(CaseError::InvalidEntry {
                matrix: "BRANCH".into(),
                row: k,
                col: 3,
                detail: format!("zero impedance on in-service line {l}"),
            });
        }
    }
    let limited: Vec<usize> = (0..net.rate_a.len()).filter(|&l| net.rate_a[l] > 0.0).collect();
    let lines = LimitedLines {
        yf: select_rows(&net.yf, &limited),
        yt: select_rows(&net.yt, &limited),
        cf: select_rows(&net.cf, &limited),
        ct: select_rows(&net.ct, &limited),
        smax2: limited.iter().map(|&l| net.rate_a[l] * net.rate_a[l]).collect(),
        rows: limited,
    };
    let vars = VarLayout::new(nb, ng, ny, periods);
    let nx = vars.nx();
    let gen_bus: Vec<usize> = case.gens.iter().map(|g| case.bus_index(g.bus).expect("validated")).collect();
    let storage_bus: Vec<usize> = case.storage.iter().map(|s| case.bus_index(s.bus).expect("validated")).collect();
    let sch = &case.schedules;
    let gen_on: Vec<Vec<bool>> =
        (0..periods).map(|t| (0..ng).map(|g| case.gens[g].in_service && sch.avg.get(g, t)).collect()).collect();
    let dev = |f: &dyn Fn(usize, usize) -> bool| -> Vec<Vec<bool>> {
        (0..periods).map(|t| (0..ny).map(|i| f(i, t)).collect()).collect()
    };
    let ch_on = dev(&|i, t| sch.avbp.get(i, t) && sch.conch.get(i, t));
    let dch_on = dev(&|i, t| sch.avbp.get(i, t) && sch.condi.get(i, t));
    let qs_on = dev(&|i, t| sch.avbp.get(i, t) && sch.avbq.get(i, t));

    let mut xmin = vec![f64::NEG_INFINITY; nx];
    let mut xmax = vec![f64::INFINITY; nx];
    let mut pin = vec![f64::NAN; nx];
    let slack = net.slack;
    for t in 0..periods {
        let ix = |g, k| vars.index(t, g, k);
        pin[ix(Group::Theta, slack)] = case.buses[slack].va.to_radians();
        for (b, bus) in case.buses.iter().enumerate() {
            xmin[ix(Group::Vm, b)] = bus.vmin;
            xmax[ix(Group::Vm, b)] = bus.vmax;
        }
        for (g, gen) in case.gens.iter().enumerate() {
            xmin[ix(Group::Pg, g)] = gen.pmin / base;
            xmax[ix(Group::Pg, g)] = gen.pmax / base;
            xmin[ix(Group::Qg, g)] = gen.qmin / base;
            xmax[ix(Group::Qg, g)] = gen.qmax / base;
            if !gen_on[t][g] {
                pin[ix(Group::Pg, g)] = 0.0;
                pin[ix(Group::Qg, g)] = 0.0;
            }
        }
        for (i, s) in case.storage.iter().enumerate() {
            xmin[ix(Group::Soc, i)] = s.soc_min.max(case.socmi.get(i, t));
            xmax[ix(Group::Soc, i)] = s.soc_max;
            xmin[ix(Group::Pch, i)] = 0.0;
            xmax[ix(Group::Pch, i)] = s.pch_max / base;
            xmin[ix(Group::Pdch, i)] = 0.0;
            xmax[ix(Group::Pdch, i)] = s.pdch_max / base;
            xmin[ix(Group::Qs, i)] = s.qs_min / base;
            xmax[ix(Group::Qs, i)] = s.qs_max / base;
            if !ch_on[t][i] {
                pin[ix(Group::Pch, i)] = 0.0;
            }
            if !dch_on[t][i] {
                pin[ix(Group::Pdch, i)] = 0.0;
            }
            if !qs_on[t][i] {
                pin[ix(Group::Qs, i)] = 0.0;
            }
        }
    }
    for j in 0..nx {
        if xmin[j] > xmax[j] {
            let (t, local) = (j / vars.nxt, j % vars.nxt);
            let (g, k) = vars.locate(local);
            return Err(CaseError::Invalid(format!(
                "inconsistent bounds for {g:?}[{k}] at step {t}: {} > {}",
                xmin[j], xmax[j]
            )));
        }
        if pin[j].is_nan() && xmin[j] == xmax[j] {
            pin[j] = xmin[j];
        }
    }

    let gl_vars: Vec<Vec<usize>> = (0..periods)
        .map(|t| {
            let r = vars.block(t);
            (0..vars.nxt).filter(|&k| !pin[r.start + k].is_nan()).collect()
        })
        .collect();
    let hl_rows: Vec<Vec<(usize, bool)>> = (0..periods)
        .map(|t| {
            let r = vars.block(t);
            let mut rows = Vec::new();
            for k in 0..vars.nxt {
                let j = r.start + k;
                if !pin[j].is_nan() {
                    continue;
                }
                if xmax[j].is_finite() {
                    rows.push((k, true));
                }
                if xmin[j].is_finite() {
                    rows.push((k, false));
                }
            }
            rows
        })
        .collect();
    let static_structure = (1..periods).all(|t| {
        gl_vars[t] == gl_vars[0]
            && hl_rows[t] == hl_rows[0]
            && gen_on[t] == gen_on[0]
            && ch_on[t] == ch_on[0]
            && dch_on[t] == dch_on[0]
            && qs_on[t] == qs_on[0]
    });
    let cons = ConLayout::new(2 * nb, ny, 2 * lines.len(), gl_vars, hl_rows);

    let mut cost = Vec::with_capacity(ng);
    for (g, c) in case.costs.iter().enumerate().take(ng) {
        if c.coeffs.len() > 3 {
            return Err(CaseError::Unsupported(format!("gencost row {g}: polynomial degree above 2")));
        }
        let (c2, c1, c0) = c.quadratic();
        cost.push((c2 * base * base, c1 * base, c0));
    }
    if cost.len() < ng {
        return Err(CaseError::Invalid(format!("{} generators but {} cost rows", ng, cost.len())));
    }
    let pd = (0..periods).map(|t| (0..nb).map(|b| case.pd.get(b, t) / base).collect()).collect();
    let qd = (0..periods).map(|t| (0..nb).map(|b| case.qd.get(b, t) / base).collect()).collect();
    let emax = case.storage.iter().map(|s| s.emax / base).collect();

    Ok(Problem {
        case: case.clone(),
        net,
        lines,
        vars,
        cons,
        xmin,
        xmax,
        pin,
        cost,
        gen_bus,
        storage_bus,
        gen_on,
        ch_on,
        dch_on,
        qs_on,
        pd,
        qd,
        emax,
        static_structure,
    })
}
