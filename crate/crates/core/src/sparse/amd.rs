//! Approximate minimum degree ordering on the pattern of `A + Aᵀ`.
//!
//! Quotient-graph elimination with element absorption, approximate external
//! degrees, mass elimination, supervariable detection by hashing, and dense
//! row postponement, followed by a postorder of the assembly tree.

use super::{CscMatrix, Permutation, Scalar};

#[inline]
fn flip(i: isize) -> isize {
    -i - 2
}

fn wclear(mark: isize, lemax: isize, w: &mut [isize], n: usize) -> isize {
    if mark < 2 || mark + lemax < 0 {
        for x in w.iter_mut().take(n) {
            if *x != 0 {
                *x = 1;
            }
        }
        2
    } else {
        mark
    }
}

fn tdfs(j: isize, mut k: isize, head: &mut [isize], next: &[isize], post: &mut [isize], stack: &mut [isize]) -> isize {
    let mut top: isize = 0;
    stack[0] = j;
    while top >= 0 {
        let p = stack[top as usize];
        let i = head[p as usize];
        if i == -1 {
            top -= 1;
            post[k as usize] = p;
            k += 1;
        } else {
            head[p as usize] = next[i as usize];
            top += 1;
            stack[top as usize] = i;
        }
    }
    k
}

/// Fill-reducing symmetric ordering for a square matrix.
///
/// Only the pattern is used; the diagonal is ignored. The result maps new
/// positions to original indices.
pub fn amd_order<T: Scalar>(a: &CscMatrix<T>) -> Permutation {
    assert_eq!(a.nrows(), a.ncols(), "amd_order needs a square matrix");
    let n = a.ncols();
    if n == 0 {
        return Permutation::identity(0);
    }
    let c = a.sym_pattern();
    let ni = n as isize;
    let dense = ((16.0f64).max(10.0 * (n as f64).sqrt()) as isize).min(ni - 2);

    let mut cp: Vec<isize> = c.colptr().iter().map(|&p| p as isize).collect();
    let cnz0 = c.nnz();
    let nzmax = cnz0 + cnz0 / 5 + 2 * n;
    let mut ci: Vec<isize> = vec![0; nzmax.max(1)];
    for (k, &r) in c.rowind().iter().enumerate() {
        ci[k] = r as isize;
    }
    let mut cnz = cnz0 as isize;
    let nzmax = ci.len() as isize;

    let sz = n + 1;
    let mut len = vec![0isize; sz];
    let mut nv = vec![0isize; sz];
    let mut next = vec![0isize; sz];
    let mut head = vec![0isize; sz];
    let mut elen = vec![0isize; sz];
    let mut degree = vec![0isize; sz];
    let mut w = vec![0isize; sz];
    let mut hhead = vec![0isize; sz];
    let mut last = vec![0isize; sz];

    for k in 0..n {
        len[k] = cp[k + 1] - cp[k];
    }
    len[n] = 0;
    for i in 0..=n {
        head[i] = -1;
        last[i] = -1;
        next[i] = -1;
        hhead[i] = -1;
        nv[i] = 1;
        w[i] = 1;
        elen[i] = 0;
        degree[i] = len[i];
    }
    let mut mark = wclear(0, 0, &mut w, n);
    elen[n] = -2;
    cp[n] = -1;
    w[n] = 0;

    let mut nel: isize = 0;
    for i in 0..n {
        let d = degree[i];
        if d == 0 {
            elen[i] = -2;
            nel += 1;
            cp[i] = -1;
            w[i] = 0;
        } else if d > dense {
            nv[i] = 0;
            elen[i] = -1;
            nel += 1;
            cp[i] = flip(ni);
            nv[n] += 1;
        } else {
            if head[d as usize] != -1 {
                last[head[d as usize] as usize] = i as isize;
            }
            next[i] = head[d as usize];
            head[d as usize] = i as isize;
        }
    }

    let mut mindeg: isize = 0;
    let mut lemax: isize = 0;
    while nel < ni {
        // select node of minimum approximate degree
        let mut k: isize = -1;
        while mindeg < ni {
            k = head[mindeg as usize];
            if k != -1 {
                break;
            }
            mindeg += 1;
        }
        let ku = k as usize;
        if next[ku] != -1 {
            last[next[ku] as usize] = -1;
        }
        head[mindeg as usize] = next[ku];
        let elenk = elen[ku];
        let mut nvk = nv[ku];
        nel += nvk;

        // garbage collection
        if elenk > 0 && cnz + mindeg >= nzmax {
            for j in 0..n {
                let p = cp[j];
                if p >= 0 {
                    cp[j] = ci[p as usize];
                    ci[p as usize] = flip(j as isize);
                }
            }
            let (mut q, mut p) = (0isize, 0isize);
            while p < cnz {
                let j = flip(ci[p as usize]);
                p += 1;
                if j >= 0 {
                    let ju = j as usize;
                    ci[q as usize] = cp[ju];
                    cp[ju] = q;
                    q += 1;
                    for _ in 0..(len[ju] - 1) {
                        ci[q as usize] = ci[p as usize];
                        q += 1;
                        p += 1;
                    }
                }
            }
            cnz = q;
        }

        // construct new element
        let mut dk: isize = 0;
        nv[ku] = -nvk;
        let mut p = cp[ku];
        let pk1 = if elenk == 0 { p } else { cnz };
        let mut pk2 = pk1;
        for k1 in 1..=(elenk + 1) {
            let (e, mut pj, ln);
            if k1 > elenk {
                e = k;
                pj = p;
                ln = len[ku] - elenk;
            } else {
                e = ci[p as usize];
                p += 1;
                pj = cp[e as usize];
                ln = len[e as usize];
            }
            for _ in 1..=ln {
                let i = ci[pj as usize];
                pj += 1;
                let iu = i as usize;
                let nvi = nv[iu];
                if nvi <= 0 {
                    continue;
                }
                dk += nvi;
                nv[iu] = -nvi;
                ci[pk2 as usize] = i;
                pk2 += 1;
                if next[iu] != -1 {
                    last[next[iu] as usize] = last[iu];
                }
                if last[iu] != -1 {
                    next[last[iu] as usize] = next[iu];
                } else {
                    head[degree[iu] as usize] = next[iu];
                }
            }
            if e != k {
                cp[e as usize] = flip(k);
                w[e as usize] = 0;
            }
        }
        if elenk != 0 {
            cnz = pk2;
        }
        degree[ku] = dk;
        cp[ku] = pk1;
        len[ku] = pk2 - pk1;
        elen[ku] = -2;

        // find set differences
        mark = wclear(mark, lemax, &mut w, n);
        for pk in pk1..pk2 {
            let i = ci[pk as usize] as usize;
            let eln = elen[i];
            if eln <= 0 {
                continue;
            }
            let nvi = -nv[i];
            let wnvi = mark - nvi;
            for p in cp[i]..=(cp[i] + eln - 1) {
                let e = ci[p as usize] as usize;
                if w[e] >= mark {
                    w[e] -= nvi;
                } else if w[e] != 0 {
                    w[e] = degree[e] + wnvi;
                }
            }
        }

        // degree update
        for pk in pk1..pk2 {
            let i = ci[pk as usize] as usize;
            let p1 = cp[i];
            let p2 = p1 + elen[i] - 1;
            let mut pn = p1;
            let mut h: u64 = 0;
            let mut d: isize = 0;
            for p in p1..=p2 {
                let e = ci[p as usize];
                let eu = e as usize;
                if w[eu] != 0 {
                    let dext = w[eu] - mark;
                    if dext > 0 {
                        d += dext;
                        ci[pn as usize] = e;
                        pn += 1;
                        h = h.wrapping_add(e as u64);
                    } else {
                        cp[eu] = flip(k);
                        w[eu] = 0;
                    }
                }
            }
            elen[i] = pn - p1 + 1;
            let p3 = pn;
            let p4 = p1 + len[i];
            for p in (p2 + 1)..p4 {
                let j = ci[p as usize];
                let nvj = nv[j as usize];
                if nvj <= 0 {
                    continue;
                }
                d += nvj;
                ci[pn as usize] = j;
                pn += 1;
                h = h.wrapping_add(j as u64);
            }
            if d == 0 {
                cp[i] = flip(k);
                let nvi = -nv[i];
                dk -= nvi;
                nvk += nvi;
                nel += nvi;
                nv[i] = 0;
                elen[i] = -1;
            } else {
                degree[i] = degree[i].min(d);
                ci[pn as usize] = ci[p3 as usize];
                ci[p3 as usize] = ci[p1 as usize];
                ci[p1 as usize] = k;
                len[i] = pn - p1 + 1;
                let hb = (h % n as u64) as usize;
                next[i] = hhead[hb];
                hhead[hb] = i as isize;
                last[i] = hb as isize;
            }
        }
        degree[ku] = dk;
        lemax = lemax.max(dk);
        mark = wclear(mark + lemax, lemax, &mut w, n);

        // supernode detection
        for pk in pk1..pk2 {
            let i0 = ci[pk as usize] as usize;
            if nv[i0] >= 0 {
                continue;
            }
            let hb = last[i0] as usize;
            let mut i = hhead[hb];
            hhead[hb] = -1;
            while i != -1 && next[i as usize] != -1 {
                let iu = i as usize;
                let ln = len[iu];
                let eln = elen[iu];
                for p in (cp[iu] + 1)..=(cp[iu] + ln - 1) {
                    w[ci[p as usize] as usize] = mark;
                }
                let mut jlast = i;
                let mut j = next[iu];
                while j != -1 {
                    let ju = j as usize;
                    let mut ok = len[ju] == ln && elen[ju] == eln;
                    let mut p = cp[ju] + 1;
                    while ok && p < cp[ju] + ln {
                        if w[ci[p as usize] as usize] != mark {
                            ok = false;
                        }
                        p += 1;
                    }
                    if ok {
                        cp[ju] = flip(i);
                        nv[iu] += nv[ju];
                        nv[ju] = 0;
                        elen[ju] = -1;
                        j = next[ju];
                        next[jlast as usize] = j;
                    } else {
                        jlast = j;
                        j = next[ju];
                    }
                }
                i = next[iu];
                mark += 1;
            }
        }

        // finalize new element
        let mut p = pk1;
        for pk in pk1..pk2 {
            let i = ci[pk as usize] as usize;
            let nvi = -nv[i];
            if nvi <= 0 {
                continue;
            }
            nv[i] = nvi;
            let mut d = degree[i] + dk - nvi;
            d = d.min(ni - nel - nvi);
            if head[d as usize] != -1 {
                last[head[d as usize] as usize] = i as isize;
            }
            next[i] = head[d as usize];
            last[i] = -1;
            head[d as usize] = i as isize;
            mindeg = mindeg.min(d);
            degree[i] = d;
            ci[p as usize] = i as isize;
            p += 1;
        }
        nv[ku] = nvk;
        len[ku] = p - pk1;
        if len[ku] == 0 {
            cp[ku] = -1;
            w[ku] = 0;
        }
        if elenk != 0 {
            cnz = p;
        }
    }

    // postorder the assembly tree
    for x in cp.iter_mut().take(n) {
        *x = flip(*x);
    }
    for x in head.iter_mut() {
        *x = -1;
    }
    for j in (0..=n).rev() {
        if nv[j] > 0 {
            continue;
        }
        let parent = cp[j] as usize;
        next[j] = head[parent];
        head[parent] = j as isize;
    }
    for e in (0..=n).rev() {
        if nv[e] <= 0 {
            continue;
        }
        if cp[e] != -1 {
            let parent = cp[e] as usize;
            next[e] = head[parent];
            head[parent] = e as isize;
        }
    }
    let mut post = vec![0isize; sz];
    let mut k: isize = 0;
    for i in 0..=n {
        if cp[i] == -1 {
            k = tdfs(i as isize, k, &mut head, &next, &mut post, &mut w);
        }
    }
    let perm: Vec<usize> = post.iter().filter(|&&v| (v as usize) < n).map(|&v| v as usize).collect();
    Permutation::new(perm).expect("amd produced an invalid permutation")
}
