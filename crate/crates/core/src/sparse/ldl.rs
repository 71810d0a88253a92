//! Symmetric indefinite `L D Lᵀ` factorization with 1×1 and 2×2 pivots.
//!
//! Right-looking elimination over sparse rows. The nominal order comes from
//! [`amd_order`]; the Bunch-Kaufman test may promote the largest off-diagonal
//! partner of the candidate, either as a 1×1 pivot on its own or as a 2×2
//! block with the candidate.

use super::{amd_order, SparseMat};
use crate::error::SparseError;

const BK_ALPHA: f64 = 0.640_388_203_202_208; // (1 + sqrt(17)) / 8

/// A diagonal block of `D`.
#[derive(Clone, Debug, PartialEq)]
pub enum LdlPivot {
    One { idx: usize, d: f64 },
    Two { idx: [usize; 2], d: [[f64; 2]; 2] },
}

/// Result of [`ldl_factor`]: `A = P L D Lᵀ Pᵀ`.
#[derive(Clone, Debug)]
pub struct LdlFactors {
    n: usize,
    pivots: Vec<LdlPivot>,
    /// For each pivot, the sub-diagonal entries of its column(s) of `L`.
    cols: Vec<Vec<(usize, [f64; 2])>>,
    nnz_l: usize,
}

fn merge_into(row: &mut Vec<(usize, f64)>, upd: &[(usize, f64)], done: &[bool], scratch: &mut Vec<(usize, f64)>) {
    scratch.clear();
    let (mut a, mut b) = (0, 0);
    while a < row.len() || b < upd.len() {
        if a < row.len() && done[row[a].0] {
            a += 1;
            continue;
        }
        let ra = row.get(a).map_or(usize::MAX, |e| e.0);
        let rb = upd.get(b).map_or(usize::MAX, |e| e.0);
        if ra == rb {
            scratch.push((ra, row[a].1 + upd[b].1));
            a += 1;
            b += 1;
        } else if ra < rb {
            scratch.push(row[a]);
            a += 1;
        } else {
            scratch.push(upd[b]);
            b += 1;
        }
    }
    std::mem::swap(row, scratch);
}

impl LdlFactors {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn pivots(&self) -> &[LdlPivot] {
        &self.pivots
    }

    /// Strictly-lower nonzeros of `L`.
    pub fn nnz_l(&self) -> usize {
        self.nnz_l
    }

    /// `nnz(L)` plus the stored entries of `D`.
    pub fn nnz(&self) -> usize {
        self.nnz_l
            + self
                .pivots
                .iter()
                .map(|p| match p {
                    LdlPivot::One { .. } => 1,
                    LdlPivot::Two { .. } => 4,
                })
                .sum::<usize>()
    }

    pub fn two_by_two_count(&self) -> usize {
        self.pivots.iter().filter(|p| matches!(p, LdlPivot::Two { .. })).count()
    }

    /// `(positive, negative, zero)` eigenvalue counts of `D`.
    pub fn inertia(&self) -> (usize, usize, usize) {
        let mut c = (0, 0, 0);
        let mut tally = |v: f64| {
            if v > 0.0 {
                c.0 += 1
            } else if v < 0.0 {
                c.1 += 1
            } else {
                c.2 += 1
            }
        };
        for p in &self.pivots {
            match p {
                LdlPivot::One { d, .. } => tally(*d),
                LdlPivot::Two { d, .. } => {
                    let tr = d[0][0] + d[1][1];
                    let disc = ((d[0][0] - d[1][1]).powi(2) / 4.0 + d[0][1] * d[1][0]).sqrt();
                    tally(tr / 2.0 + disc);
                    tally(tr / 2.0 - disc);
                }
            }
        }
        c
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let mut x = b.to_vec();
        for (piv, col) in self.pivots.iter().zip(&self.cols) {
            match piv {
                LdlPivot::One { idx, .. } => {
                    let xp = x[*idx];
                    for &(i, l) in col {
                        x[i] -= l[0] * xp;
                    }
                }
                LdlPivot::Two { idx, .. } => {
                    let (xp, xq) = (x[idx[0]], x[idx[1]]);
                    for &(i, l) in col {
                        x[i] -= l[0] * xp + l[1] * xq;
                    }
                }
            }
        }
        for piv in &self.pivots {
            match piv {
                LdlPivot::One { idx, d } => x[*idx] /= d,
                LdlPivot::Two { idx, d } => {
                    let det = d[0][0] * d[1][1] - d[0][1] * d[1][0];
                    let (a, b2) = (x[idx[0]], x[idx[1]]);
                    x[idx[0]] = (d[1][1] * a - d[0][1] * b2) / det;
                    x[idx[1]] = (d[0][0] * b2 - d[1][0] * a) / det;
                }
            }
        }
        for (piv, col) in self.pivots.iter().zip(&self.cols).rev() {
            match piv {
                LdlPivot::One { idx, .. } => {
                    let s: f64 = col.iter().map(|&(i, l)| l[0] * x[i]).sum();
                    x[*idx] -= s;
                }
                LdlPivot::Two { idx, .. } => {
                    let (mut s0, mut s1) = (0.0, 0.0);
                    for &(i, l) in col {
                        s0 += l[0] * x[i];
                        s1 += l[1] * x[i];
                    }
                    x[idx[0]] -= s0;
                    x[idx[1]] -= s1;
                }
            }
        }
        x
    }
}

/// Factors a symmetric matrix. Both triangles must be stored.
///
/// Fails with [`SparseError::Singular`] when a zero pivot (or singular 2×2
/// block) is met, and with [`SparseError::Malformed`] when the input is not
/// symmetric to `sym_rtol` relative to its largest entry.
pub fn ldl_factor(a: &SparseMat, sym_rtol: f64) -> Result<LdlFactors, SparseError> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(SparseError::NotSquare { nrows: a.nrows(), ncols: a.ncols() });
    }
    if a.asymmetry() > sym_rtol {
        return Err(SparseError::Malformed("matrix is not symmetric"));
    }
    let order = amd_order(a);
    let amax = a.max_abs();
    let zero_tol = super::lu::SINGULAR_PIVOT_RTOL * amax.max(f64::MIN_POSITIVE);

    // active rows, full symmetric storage, indexed by original position
    let mut rows: Vec<Vec<(usize, f64)>> = (0..n).map(|j| a.col_iter(j).collect::<Vec<_>>()).collect();
    let mut done = vec![false; n];
    let mut pivots = Vec::with_capacity(n);
    let mut cols = Vec::with_capacity(n);
    let mut nnz_l = 0;
    let mut scratch = Vec::new();
    let mut upd: Vec<(usize, f64)> = Vec::new();

    let live = |row: &Vec<(usize, f64)>, done: &[bool], skip: usize| -> (f64, usize, f64) {
        // (diag, argmax off-diagonal, max off-diagonal)
        let mut diag = 0.0;
        let (mut arg, mut mx) = (usize::MAX, 0.0f64);
        for &(i, v) in row {
            if done[i] {
                continue;
            }
            if i == skip {
                diag = v;
            } else if v.abs() > mx {
                mx = v.abs();
                arg = i;
            }
        }
        (diag, arg, mx)
    };

    let mut cursor = 0;
    let mut eliminated = 0;
    while eliminated < n {
        while done[order.get(cursor)] {
            cursor += 1;
        }
        let k = order.get(cursor);
        let (akk, r, lambda) = live(&rows[k], &done, k);
        let choice: (usize, Option<usize>) = if lambda == 0.0 || akk.abs() >= BK_ALPHA * lambda {
            (k, None)
        } else {
            let (arr, _, sigma) = live(&rows[r], &done, r);
            // sigma excludes r's diagonal but includes the (r,k) entry
            let sigma = sigma.max(lambda);
            if akk.abs() * sigma >= BK_ALPHA * lambda * lambda {
                (k, None)
            } else if arr.abs() >= BK_ALPHA * sigma {
                (r, None)
            } else {
                (k, Some(r))
            }
        };
        match choice {
            (p, None) => {
                let d = rows[p].iter().find(|e| e.0 == p).map_or(0.0, |e| e.1);
                if d.abs() <= zero_tol {
                    return Err(SparseError::Singular { column: p, pivot: d.abs() });
                }
                let colp: Vec<(usize, f64)> = rows[p].iter().filter(|e| e.0 != p && !done[e.0]).copied().collect();
                done[p] = true;
                for &(i, ai) in &colp {
                    upd.clear();
                    upd.extend(colp.iter().map(|&(j, aj)| (j, -ai * aj / d)));
                    merge_into(&mut rows[i], &upd, &done, &mut scratch);
                }
                nnz_l += colp.len();
                cols.push(colp.iter().map(|&(i, v)| (i, [v / d, 0.0])).collect());
                pivots.push(LdlPivot::One { idx: p, d });
                rows[p] = Vec::new();
                eliminated += 1;
            }
            (p, Some(q)) => {
                let get = |row: &Vec<(usize, f64)>, c: usize| row.iter().find(|e| e.0 == c).map_or(0.0, |e| e.1);
                let d = [[get(&rows[p], p), get(&rows[p], q)], [get(&rows[q], p), get(&rows[q], q)]];
                let det = d[0][0] * d[1][1] - d[0][1] * d[1][0];
                let dmax = d.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
                if det.abs() <= zero_tol * dmax {
                    return Err(SparseError::Singular { column: p, pivot: det.abs() });
                }
                let inv = [[d[1][1] / det, -d[0][1] / det], [-d[1][0] / det, d[0][0] / det]];
                // union of the live neighbours of p and q
                let mut nb: Vec<(usize, f64, f64)> = Vec::new();
                {
                    let rp: Vec<(usize, f64)> =
                        rows[p].iter().filter(|e| e.0 != p && e.0 != q && !done[e.0]).copied().collect();
                    let rq: Vec<(usize, f64)> =
                        rows[q].iter().filter(|e| e.0 != p && e.0 != q && !done[e.0]).copied().collect();
                    let (mut a_, mut b_) = (0, 0);
                    while a_ < rp.len() || b_ < rq.len() {
                        let ia = rp.get(a_).map_or(usize::MAX, |e| e.0);
                        let ib = rq.get(b_).map_or(usize::MAX, |e| e.0);
                        if ia == ib {
                            nb.push((ia, rp[a_].1, rq[b_].1));
                            a_ += 1;
                            b_ += 1;
                        } else if ia < ib {
                            nb.push((ia, rp[a_].1, 0.0));
                            a_ += 1;
                        } else {
                            nb.push((ib, 0.0, rq[b_].1));
                            b_ += 1;
                        }
                    }
                }
                // L rows: [l_ip, l_iq] = [a_ip, a_iq] D^{-1}
                let lrows: Vec<(usize, [f64; 2])> = nb
                    .iter()
                    .map(|&(i, ap, aq)| (i, [ap * inv[0][0] + aq * inv[1][0], ap * inv[0][1] + aq * inv[1][1]]))
                    .collect();
                done[p] = true;
                done[q] = true;
                for (&(i, _, _), &(_, li)) in nb.iter().zip(&lrows) {
                    upd.clear();
                    upd.extend(nb.iter().map(|&(j, apj, aqj)| (j, -(li[0] * apj + li[1] * aqj))));
                    merge_into(&mut rows[i], &upd, &done, &mut scratch);
                }
                nnz_l += 2 * lrows.len();
                cols.push(lrows);
                pivots.push(LdlPivot::Two { idx: [p, q], d });
                rows[p] = Vec::new();
                rows[q] = Vec::new();
                eliminated += 2;
            }
        }
    }
    Ok(LdlFactors { n, pivots, cols, nnz_l })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::Triplets;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_sym(n: usize, seed: u64, indefinite: bool) -> SparseMat {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut t = Triplets::new(n, n);
        for i in 0..n {
            let d = if indefinite && i % 3 == 0 { 0.0 } else { rng.gen_range(1.0..3.0) };
            let s = if indefinite && i % 2 == 1 { -1.0 } else { 1.0 };
            t.push(i, i, s * d);
            for j in 0..i {
                if rng.gen::<f64>() < 0.15 {
                    let v = rng.gen_range(-1.0..1.0);
                    t.push(i, j, v);
                    t.push(j, i, v);
                }
            }
        }
        t.to_csc()
    }

    #[test]
    fn solves_definite_and_indefinite() {
        let mut solved_indefinite = 0;
        for seed in 0..6 {
            for &indef in &[false, true] {
                let a = random_sym(30, seed, indef);
                let b: Vec<f64> = (0..30).map(|i| 1.0 + (i as f64).cos()).collect();
                let f = match ldl_factor(&a, 1e-12) {
                    Ok(f) => f,
                    Err(SparseError::Singular { .. }) => continue,
                    Err(e) => panic!("{e}"),
                };
                let x = f.solve(&b);
                let r = a.mul_vec(&x);
                let err = r.iter().zip(&b).fold(0.0f64, |m, (p, q)| m.max((p - q).abs()));
                assert!(err < 1e-9, "seed {seed} indefinite {indef}: {err}");
                if indef {
                    solved_indefinite += 1;
                }
            }
        }
        assert!(solved_indefinite >= 4);
    }

    #[test]
    fn zero_diagonal_uses_two_by_two() {
        let a = SparseMat::from_dense(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let f = ldl_factor(&a, 1e-12).unwrap();
        assert_eq!(f.two_by_two_count(), 1);
        assert_eq!(f.inertia(), (1, 1, 0));
        let x = f.solve(&[2.0, 3.0]);
        assert!((x[0] - 3.0).abs() < 1e-14 && (x[1] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn negative_definite_inertia() {
        let a = SparseMat::from_dense(2, 2, &[-2.0, 0.5, 0.5, -1.0]);
        let f = ldl_factor(&a, 1e-12).unwrap();
        assert_eq!(f.inertia(), (0, 2, 0));
    }

    #[test]
    fn rejects_asymmetric() {
        let a = SparseMat::from_dense(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        assert!(matches!(ldl_factor(&a, 1e-12), Err(SparseError::Malformed(_))));
    }

    #[test]
    fn singular_detected() {
        let a = SparseMat::from_dense(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(matches!(ldl_factor(&a, 1e-12), Err(SparseError::Singular { .. })));
    }
}
