//! π-model network: admittance matrices, injections, branch flows and their
//! first and second derivatives with respect to voltage angle and magnitude.
//!
//! All quantities are per-unit on the case base. Second-derivative routines
//! return the four blocks `(θθ, θV, Vθ, VV)` of `∂²(λᵀ s)/∂x²` for
//! `x = [θ; |V|]`.

use num_complex::Complex64 as C64;

use crate::case::Case;
use crate::sparse::{ComplexMat, SparseMat, Triplets};

/// Admittance data of the in-service network.
#[derive(Clone, Debug)]
pub struct Network {
    pub nb: usize,
    /// Bus admittance, `n_b × n_b`.
    pub ybus: ComplexMat,
    /// From-end branch admittance, `n_l × n_b`.
    pub yf: ComplexMat,
    /// To-end branch admittance, `n_l × n_b`.
    pub yt: ComplexMat,
    /// From-end incidence, `n_l × n_b`.
    pub cf: ComplexMat,
    /// To-end incidence, `n_l × n_b`.
    pub ct: ComplexMat,
    /// Case branch index of each in-service row.
    pub branch_of_row: Vec<usize>,
    /// Apparent power rating in per-unit, zero when unlimited.
    pub rate_a: Vec<f64>,
    pub slack: usize,
}

/// Assembles `Ybus = Cfᵀ·Yf + Ctᵀ·Yt + Ysh` and the branch matrices.
pub fn build_admittance(case: &Case) -> Network {
    let nb = case.nb();
    let base = case.base_mva;
    let rows: Vec<usize> = (0..case.nl()).filter(|&k| case.branches[k].in_service).collect();
    let nl = rows.len();
    let mut yf = Triplets::new(nl, nb);
    let mut yt = Triplets::new(nl, nb);
    let mut cf = Triplets::new(nl, nb);
    let mut ct = Triplets::new(nl, nb);
    let mut rate_a = Vec::with_capacity(nl);
    for (l, &k) in rows.iter().enumerate() {
        let br = &case.branches[k];
        let f = case.bus_index(br.from).expect("validated bus");
        let t = case.bus_index(br.to).expect("validated bus");
        let ys = C64::new(1.0, 0.0) / C64::new(br.r, br.x);
        let bc = C64::new(0.0, br.b / 2.0);
        let ratio = if br.ratio == 0.0 { 1.0 } else { br.ratio };
        let tap = C64::from_polar(ratio, br.angle.to_radians());
        let ytt = ys + bc;
        let yff = ytt / (tap * tap.conj());
        let yft = -ys / tap.conj();
        let ytf = -ys / tap;
        yf.push(l, f, yff);
        yf.push(l, t, yft);
        yt.push(l, f, ytf);
        yt.push(l, t, ytt);
        cf.push(l, f, C64::new(1.0, 0.0));
        ct.push(l, t, C64::new(1.0, 0.0));
        rate_a.push(br.rate_a / base);
    }
    let (yf, yt, cf, ct) = (yf.to_csc(), yt.to_csc(), cf.to_csc(), ct.to_csc());
    let ysh: Vec<C64> = case.buses.iter().map(|b| C64::new(b.gs, b.bs) / base).collect();
    let ybus = cf.transpose().matmul(&yf).add(&ct.transpose().matmul(&yt)).add(&ComplexMat::from_diag(&ysh));
    Network { nb, ybus, yf, yt, cf, ct, branch_of_row: rows, rate_a, slack: case.slack_index() }
}

/// Complex voltages from polar coordinates.
pub fn polar(theta: &[f64], vm: &[f64]) -> Vec<C64> {
    theta.iter().zip(vm).map(|(&a, &m)| C64::from_polar(m, a)).collect()
}

/// Bus injections `S = diag(V)·conj(Ybus·V)`.
pub fn bus_injection(ybus: &ComplexMat, v: &[C64]) -> Vec<C64> {
    let i = ybus.mul_vec(v);
    v.iter().zip(&i).map(|(a, b)| a * b.conj()).collect()
}

/// Branch-end flows `S = diag(C·V)·conj(Y·V)`.
pub fn branch_flow(ybr: &ComplexMat, cbr: &ComplexMat, v: &[C64]) -> Vec<C64> {
    let i = ybr.mul_vec(v);
    let vb = cbr.mul_vec(v);
    vb.iter().zip(&i).map(|(a, b)| a * b.conj()).collect()
}

fn cdiag(d: &[C64]) -> ComplexMat {
    ComplexMat::from_diag(d)
}

fn unit(v: &[C64]) -> Vec<C64> {
    v.iter().map(|x| x / x.norm()).collect()
}

const J: C64 = C64 { re: 0.0, im: 1.0 };

/// `(∂S/∂θ, ∂S/∂|V|)` of the bus injections.
pub fn dsbus_dv(ybus: &ComplexMat, v: &[C64]) -> (ComplexMat, ComplexMat) {
    let ibus = ybus.mul_vec(v);
    let dv = cdiag(v);
    let vn = unit(v);
    let ibus_c: Vec<C64> = ibus.iter().map(|x| x.conj()).collect();
    let dvm = dv.matmul(&ybus.scale_cols(&vn).conj()).add(&cdiag(&ibus_c).matmul(&cdiag(&vn)));
    let dva = dv
        .matmul(&cdiag(&ibus).add_scaled(C64::new(1.0, 0.0), &ybus.scale_cols(v), C64::new(-1.0, 0.0)).conj())
        .scale(J);
    (dva, dvm)
}

/// `(∂S/∂θ, ∂S/∂|V|, S)` of one set of branch-end flows.
pub fn dsbr_dv(ybr: &ComplexMat, cbr: &ComplexMat, v: &[C64]) -> (ComplexMat, ComplexMat, Vec<C64>) {
    let ibr = ybr.mul_vec(v);
    let vbr = cbr.mul_vec(v);
    let vn = unit(v);
    let ibr_c: Vec<C64> = ibr.iter().map(|x| x.conj()).collect();
    let dva = cdiag(&ibr_c)
        .matmul(&cbr.scale_cols(v))
        .add_scaled(C64::new(1.0, 0.0), &cdiag(&vbr).matmul(&ybr.scale_cols(v).conj()), C64::new(-1.0, 0.0))
        .scale(J);
    let dvm = cdiag(&vbr).matmul(&ybr.scale_cols(&vn).conj()).add(&cdiag(&ibr_c).matmul(&cbr.scale_cols(&vn)));
    let s = vbr.iter().zip(&ibr).map(|(a, b)| a * b.conj()).collect();
    (dva, dvm, s)
}

/// `(∂|S|²/∂θ, ∂|S|²/∂|V|)` from flow derivatives.
pub fn dabr_dv(dva: &ComplexMat, dvm: &ComplexMat, s: &[C64]) -> (SparseMat, SparseMat) {
    let re: Vec<f64> = s.iter().map(|x| 2.0 * x.re).collect();
    let im: Vec<f64> = s.iter().map(|x| 2.0 * x.im).collect();
    let f = |d: &ComplexMat| SparseMat::real_of(d).scale_rows(&re).add(&SparseMat::imag_of(d).scale_rows(&im));
    (f(dva), f(dvm))
}

/// Second derivatives of `λᵀ S` for real weights `λ` on the bus injections.
pub fn d2sbus_dv2(ybus: &ComplexMat, v: &[C64], lam: &[f64]) -> [ComplexMat; 4] {
    let n = v.len();
    let one = C64::new(1.0, 0.0);
    let lamc: Vec<C64> = lam.iter().map(|&l| C64::new(l, 0.0)).collect();
    let ibus = ybus.mul_vec(v);
    let diag_v = cdiag(v);
    let a = cdiag(&lamc.iter().zip(v).map(|(l, x)| l * x).collect::<Vec<_>>());
    let b = ybus.matmul(&diag_v);
    let c = a.matmul(&b.conj());
    let d = ybus.transpose().conj().matmul(&diag_v);
    let dlam = d.mul_vec(&lamc);
    let e = diag_v.conj().matmul(&d.matmul(&cdiag(&lamc)).add_scaled(one, &cdiag(&dlam), -one));
    let ibus_c: Vec<C64> = ibus.iter().map(|x| x.conj()).collect();
    let f = c.add_scaled(one, &a.matmul(&cdiag(&ibus_c)), -one);
    let g = cdiag(&(0..n).map(|k| C64::new(1.0 / v[k].norm(), 0.0)).collect::<Vec<_>>());
    let gaa = e.add(&f);
    let gva = g.matmul(&e.add_scaled(one, &f, -one)).scale(J);
    let gav = gva.transpose();
    let gvv = g.matmul(&c.add(&c.transpose())).matmul(&g);
    [gaa, gav, gva, gvv]
}

/// Second derivatives of `λᵀ S_br` for complex weights on branch flows.
pub fn d2sbr_dv2(cbr: &ComplexMat, ybr: &ComplexMat, v: &[C64], lam: &[C64]) -> [ComplexMat; 4] {
    let nb = v.len();
    let one = C64::new(1.0, 0.0);
    let diag_v = cdiag(v);
    let a = ybr.transpose().conj().matmul(&cdiag(lam)).matmul(cbr);
    let b = diag_v.conj().matmul(&a).matmul(&diag_v);
    let av = a.mul_vec(v);
    let vc: Vec<C64> = v.iter().map(|x| x.conj()).collect();
    let d = cdiag(&av.iter().zip(&vc).map(|(p, q)| p * q).collect::<Vec<_>>());
    let atv = a.transpose().mul_vec(&vc);
    let e = cdiag(&atv.iter().zip(v).map(|(p, q)| p * q).collect::<Vec<_>>());
    let bt = b.transpose();
    let f = b.add(&bt);
    let g = cdiag(&(0..nb).map(|k| C64::new(1.0 / v[k].norm(), 0.0)).collect::<Vec<_>>());
    let haa = f.add_scaled(one, &d, -one).add_scaled(one, &e, -one);
    let hva = g.matmul(&b.add_scaled(one, &bt, -one).add_scaled(one, &d, -one).add(&e)).scale(J);
    let hav = hva.transpose();
    let hvv = g.matmul(&f).matmul(&g);
    [haa, hav, hva, hvv]
}

/// Second derivatives of `μᵀ |S_br|²` for real weights `μ`.
pub fn d2asbr_dv2(
    dva: &ComplexMat,
    dvm: &ComplexMat,
    sbr: &[C64],
    cbr: &ComplexMat,
    ybr: &ComplexMat,
    v: &[C64],
    mu: &[f64],
) -> [SparseMat; 4] {
    let w: Vec<C64> = sbr.iter().zip(mu).map(|(s, &m)| s.conj() * m).collect();
    let [saa, sav, sva, svv] = d2sbr_dv2(cbr, ybr, v, &w);
    let dm = cdiag(&mu.iter().map(|&m| C64::new(m, 0.0)).collect::<Vec<_>>());
    let quad = |x: &ComplexMat, y: &ComplexMat| x.transpose().matmul(&dm).matmul(&y.conj());
    let two_re = |m: ComplexMat| SparseMat::real_of(&m).scale(2.0);
    [
        two_re(saa.add(&quad(dva, dva))),
        two_re(sav.add(&quad(dva, dvm))),
        two_re(sva.add(&quad(dvm, dva))),
        two_re(svv.add(&quad(dvm, dvm))),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::case::case9;

    fn sample_v(n: usize) -> Vec<C64> {
        (0..n).map(|k| C64::from_polar(1.0 + 0.02 * (k as f64).sin(), 0.05 * (k as f64).cos())).collect()
    }

    #[test]
    fn ybus_rows_sum_to_shunts_without_charging() {
        let mut c = case9();
        for b in &mut c.branches {
            b.b = 0.0;
        }
        let net = build_admittance(&c);
        for i in 0..net.nb {
            let s: C64 = net.ybus.col_iter(i).map(|(_, v)| v).sum();
            assert!(s.norm() < 1e-12);
        }
    }

    #[test]
    fn injection_equals_sum_of_flows() {
        let net = build_admittance(&case9());
        let v = sample_v(9);
        let s = bus_injection(&net.ybus, &v);
        let sf = branch_flow(&net.yf, &net.cf, &v);
        let st = branch_flow(&net.yt, &net.ct, &v);
        let agg = net
            .cf
            .transpose()
            .mul_vec(&sf)
            .iter()
            .zip(net.ct.transpose().mul_vec(&st))
            .map(|(a, b)| a + b)
            .collect::<Vec<_>>();
        for i in 0..9 {
            assert!((agg[i] - s[i]).norm() < 1e-12);
        }
    }

    fn fd_check(f: impl Fn(&[f64], &[f64]) -> Vec<C64>, da: &ComplexMat, dm: &ComplexMat, n: usize) {
        let th: Vec<f64> = (0..n).map(|k| 0.05 * (k as f64).cos()).collect();
        let vm: Vec<f64> = (0..n).map(|k| 1.0 + 0.02 * (k as f64).sin()).collect();
        let h = 1e-6;
        for j in 0..n {
            let (mut tp, mut tm) = (th.clone(), th.clone());
            tp[j] += h;
            tm[j] -= h;
            let (sp, sm) = (f(&tp, &vm), f(&tm, &vm));
            for i in 0..sp.len() {
                let fd = (sp[i] - sm[i]) / (2.0 * h);
                assert!((fd - da.get(i, j)).norm() < 1e-6 * (1.0 + fd.norm()), "dθ ({i},{j})");
            }
            let (mut vp, mut vmn) = (vm.clone(), vm.clone());
            vp[j] += h;
            vmn[j] -= h;
            let (sp, sm) = (f(&th, &vp), f(&th, &vmn));
            for i in 0..sp.len() {
                let fd = (sp[i] - sm[i]) / (2.0 * h);
                assert!((fd - dm.get(i, j)).norm() < 1e-6 * (1.0 + fd.norm()), "d|V| ({i},{j})");
            }
        }
    }

    #[test]
    fn injection_derivatives_match_fd() {
        let net = build_admittance(&case9());
        let th: Vec<f64> = (0..9).map(|k| 0.05 * (k as f64).cos()).collect();
        let vm: Vec<f64> = (0..9).map(|k| 1.0 + 0.02 * (k as f64).sin()).collect();
        let (da, dm) = dsbus_dv(&net.ybus, &polar(&th, &vm));
        fd_check(|t, m| bus_injection(&net.ybus, &polar(t, m)), &da, &dm, 9);
    }

    #[test]
    fn flow_derivatives_match_fd() {
        let net = build_admittance(&case9());
        let th: Vec<f64> = (0..9).map(|k| 0.05 * (k as f64).cos()).collect();
        let vm: Vec<f64> = (0..9).map(|k| 1.0 + 0.02 * (k as f64).sin()).collect();
        let (da, dm, _) = dsbr_dv(&net.yf, &net.cf, &polar(&th, &vm));
        fd_check(|t, m| branch_flow(&net.yf, &net.cf, &polar(t, m)), &da, &dm, 9);
    }

    #[test]
    fn tap_and_shift_are_used() {
        let mut c = case9();
        c.branches[0].ratio = 1.05;
        c.branches[0].angle = 3.0;
        let a = build_admittance(&case9());
        let b = build_admittance(&c);
        assert!((a.ybus.get(0, 3) - b.ybus.get(0, 3)).norm() > 1e-3);
        assert!((b.ybus.get(0, 3) - b.ybus.get(3, 0)).norm() > 1e-6);
    }

    fn grad(d: &ComplexMat, w: &[C64]) -> Vec<C64> {
        d.transpose().mul_vec(w)
    }

    fn hess_fd(g: impl Fn(&[f64], &[f64]) -> (Vec<C64>, Vec<C64>), h4: [ComplexMat; 4], n: usize) {
        let th: Vec<f64> = (0..n).map(|k| 0.05 * (k as f64).cos()).collect();
        let vm: Vec<f64> = (0..n).map(|k| 1.0 + 0.02 * (k as f64).sin()).collect();
        let h = 1e-6;
        let [aa, av, va, vv] = h4;
        for j in 0..n {
            for (wrt_v, col_a, col_v) in [(false, &aa, &va), (true, &av, &vv)] {
                let (mut tp, mut tm, mut vp, mut vmn) = (th.clone(), th.clone(), vm.clone(), vm.clone());
                if wrt_v {
                    vp[j] += h;
                    vmn[j] -= h;
                } else {
                    tp[j] += h;
                    tm[j] -= h;
                }
                let (ga_p, gv_p) = g(&tp, &vp);
                let (ga_m, gv_m) = g(&tm, &vmn);
                for i in 0..n {
                    let fa = (ga_p[i] - ga_m[i]) / (2.0 * h);
                    let fv = (gv_p[i] - gv_m[i]) / (2.0 * h);
                    assert!((fa - col_a.get(i, j)).norm() < 1e-5 * (1.0 + fa.norm()), "θ row {i} col {j} v={wrt_v}");
                    assert!((fv - col_v.get(i, j)).norm() < 1e-5 * (1.0 + fv.norm()), "V row {i} col {j} v={wrt_v}");
                }
            }
        }
    }

    #[test]
    fn injection_hessian_matches_fd() {
        let net = build_admittance(&case9());
        let lam: Vec<f64> = (0..9).map(|k| 0.3 + 0.1 * k as f64).collect();
        let w: Vec<C64> = lam.iter().map(|&l| C64::new(l, 0.0)).collect();
        let v = sample_v(9);
        let h4 = d2sbus_dv2(&net.ybus, &v, &lam);
        hess_fd(
            |t, m| {
                let (a, b) = dsbus_dv(&net.ybus, &polar(t, m));
                (grad(&a, &w), grad(&b, &w))
            },
            h4,
            9,
        );
    }

    #[test]
    fn flow_hessian_matches_fd() {
        let net = build_admittance(&case9());
        let w: Vec<C64> = (0..9).map(|k| C64::new(0.2 * k as f64, 0.1 - 0.05 * k as f64)).collect();
        let v = sample_v(9);
        let h4 = d2sbr_dv2(&net.ct, &net.yt, &v, &w);
        hess_fd(
            |t, m| {
                let (a, b, _) = dsbr_dv(&net.yt, &net.ct, &polar(t, m));
                (grad(&a, &w), grad(&b, &w))
            },
            h4,
            9,
        );
    }

    #[test]
    fn squared_flow_hessian_matches_fd() {
        let net = build_admittance(&case9());
        let mu: Vec<f64> = (0..9).map(|k| 0.5 + 0.2 * k as f64).collect();
        let w: Vec<C64> = mu.iter().map(|&m| C64::new(m, 0.0)).collect();
        let v = sample_v(9);
        let (da, dm, s) = dsbr_dv(&net.yf, &net.cf, &v);
        let h4 = d2asbr_dv2(&da, &dm, &s, &net.cf, &net.yf, &v, &mu).map(|m| m.map(|x| C64::new(x, 0.0)));
        hess_fd(
            |t, m| {
                let (a, b, s) = dsbr_dv(&net.yf, &net.cf, &polar(t, m));
                let (ra, rb) = dabr_dv(&a, &b, &s);
                let c = |m: SparseMat| m.map(|x| C64::new(x, 0.0));
                (grad(&c(ra), &w), grad(&c(rb), &w))
            },
            h4,
            9,
        );
    }
}
