//! Left-looking sparse LU with threshold partial pivoting and row scaling.
//!
//! Factors `P · R · A · Q = L · U` where `R` equilibrates rows by their
//! largest magnitude, `Q` is a fill-reducing column order and `P` comes from
//! partial pivoting that prefers the symmetric candidate when it is within a
//! factor of the column maximum.

use super::{amd_order, Permutation, SparseMat};
use crate::error::SparseError;

/// Relative magnitude below which a pivot column is declared singular.
pub const SINGULAR_PIVOT_RTOL: f64 = 1e-13;
/// Preference threshold for the diagonal candidate during pivoting.
pub const DIAG_PIVOT_TOL: f64 = 0.1;

/// Result of [`lu_factor`].
#[derive(Clone, Debug)]
pub struct LuFactors {
    n: usize,
    /// Unit lower factor, rows in pivot order, diagonal stored first.
    l: SparseMat,
    /// Upper factor, diagonal stored last in each column.
    u: SparseMat,
    /// `pinv[row] = pivot step`.
    pinv: Vec<usize>,
    q: Permutation,
    row_scale: Vec<f64>,
}

impl LuFactors {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn l(&self) -> &SparseMat {
        &self.l
    }

    pub fn u(&self) -> &SparseMat {
        &self.u
    }

    /// Nonzeros of `L` including its unit diagonal.
    pub fn nnz_l(&self) -> usize {
        self.l.nnz()
    }

    pub fn nnz_u(&self) -> usize {
        self.u.nnz()
    }

    /// `nnz(L) + nnz(U)`, the memory proxy used by the benchmarks.
    pub fn nnz(&self) -> usize {
        self.l.nnz() + self.u.nnz()
    }

    /// Row permutation as `perm[step] = row`.
    pub fn row_perm(&self) -> Permutation {
        let mut p = vec![0; self.n];
        for (row, &step) in self.pinv.iter().enumerate() {
            p[step] = row;
        }
        Permutation::new(p).expect("pivot sequence is a permutation")
    }

    pub fn col_perm(&self) -> &Permutation {
        &self.q
    }

    pub fn row_scale(&self) -> &[f64] {
        &self.row_scale
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        assert_eq!(b.len(), self.n);
        let n = self.n;
        let mut y = vec![0.0; n];
        for i in 0..n {
            y[self.pinv[i]] = b[i] * self.row_scale[i];
        }
        let (lp, li, lx) = (self.l.colptr(), self.l.rowind(), self.l.values());
        for j in 0..n {
            let yj = y[j];
            if yj != 0.0 {
                for p in (lp[j] + 1)..lp[j + 1] {
                    y[li[p]] -= lx[p] * yj;
                }
            }
        }
        let (up, ui, ux) = (self.u.colptr(), self.u.rowind(), self.u.values());
        for j in (0..n).rev() {
            let d = up[j + 1] - 1;
            y[j] /= ux[d];
            let yj = y[j];
            if yj != 0.0 {
                for p in up[j]..d {
                    y[ui[p]] -= ux[p] * yj;
                }
            }
        }
        for k in 0..n {
            b[self.q.get(k)] = y[k];
        }
    }

    /// Reassembles `P R A Q` from the factors, for verification.
    pub fn product(&self) -> SparseMat {
        self.l.matmul(&self.u)
    }
}

struct Workspace {
    x: Vec<f64>,
    xi: Vec<usize>,
    pstack: Vec<usize>,
    marked: Vec<bool>,
}

/// Depth-first reach of column `col` of `a` through the partial `L`.
fn reach(lp: &[usize], li: &[usize], a: &SparseMat, col: usize, pinv: &[isize], ws: &mut Workspace) -> usize {
    let n = a.nrows();
    let mut top = n;
    for (start, _) in a.col_iter(col) {
        if ws.marked[start] {
            continue;
        }
        let mut head: isize = 0;
        ws.xi[0] = start;
        while head >= 0 {
            let j = ws.xi[head as usize];
            let jnew = pinv[j];
            if !ws.marked[j] {
                ws.marked[j] = true;
                ws.pstack[head as usize] = if jnew < 0 { 0 } else { lp[jnew as usize] };
            }
            let mut done = true;
            let p2 = if jnew < 0 { 0 } else { lp[jnew as usize + 1] };
            let mut p = ws.pstack[head as usize];
            while p < p2 {
                let i = li[p];
                if ws.marked[i] {
                    p += 1;
                    continue;
                }
                ws.pstack[head as usize] = p;
                head += 1;
                ws.xi[head as usize] = i;
                done = false;
                break;
            }
            if done {
                head -= 1;
                top -= 1;
                // xi doubles as the output stack from the top
                ws.pstack[n + top] = j;
            }
        }
    }
    for k in top..n {
        let j = ws.pstack[n + k];
        ws.marked[j] = false;
    }
    top
}

/// Factors a square matrix, computing a fill-reducing column order on the
/// pattern of `A + Aᵀ` when `col_order` is `None`.
pub fn lu_factor(a: &SparseMat, col_order: Option<&Permutation>) -> Result<LuFactors, SparseError> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(SparseError::NotSquare { nrows: a.nrows(), ncols: a.ncols() });
    }
    let q = match col_order {
        Some(p) => {
            if p.len() != n {
                return Err(SparseError::Dimension(format!("ordering of length {} for a {n}x{n} matrix", p.len())));
            }
            p.clone()
        }
        None => amd_order(a),
    };

    let mut row_scale = vec![0.0f64; n];
    for (i, _, v) in a.iter() {
        row_scale[i] = row_scale[i].max(v.abs());
    }
    for (i, s) in row_scale.iter_mut().enumerate() {
        if *s == 0.0 {
            return Err(SparseError::Singular { column: i, pivot: 0.0 });
        }
        *s = 1.0 / *s;
    }
    let scaled = a.scale_rows(&row_scale);
    let amax = scaled.max_abs();
    let threshold = SINGULAR_PIVOT_RTOL * amax;

    let mut lp = vec![0usize; n + 1];
    let mut li: Vec<usize> = Vec::with_capacity(4 * a.nnz() + n);
    let mut lx: Vec<f64> = Vec::with_capacity(4 * a.nnz() + n);
    let mut up = vec![0usize; n + 1];
    let mut ui: Vec<usize> = Vec::with_capacity(4 * a.nnz() + n);
    let mut ux: Vec<f64> = Vec::with_capacity(4 * a.nnz() + n);
    let mut pinv = vec![-1isize; n];
    let mut ws = Workspace { x: vec![0.0; n], xi: vec![0; n], pstack: vec![0; 2 * n], marked: vec![false; n] };

    for k in 0..n {
        lp[k] = li.len();
        up[k] = ui.len();
        let col = q.get(k);

        // sparse triangular solve x = L \ A(:, col)
        let top = reach(&lp, &li, &scaled, col, &pinv, &mut ws);
        for t in top..n {
            ws.x[ws.pstack[n + t]] = 0.0;
        }
        for (i, v) in scaled.col_iter(col) {
            ws.x[i] = v;
        }
        for t in top..n {
            let j = ws.pstack[n + t];
            let jn = pinv[j];
            if jn < 0 {
                continue;
            }
            let jn = jn as usize;
            let xj = ws.x[j];
            for p in (lp[jn] + 1)..lp[jn + 1] {
                ws.x[li[p]] -= lx[p] * xj;
            }
        }

        // choose pivot
        let mut ipiv = usize::MAX;
        let mut amax_col = -1.0f64;
        for t in top..n {
            let i = ws.pstack[n + t];
            if pinv[i] < 0 {
                let v = ws.x[i].abs();
                if v > amax_col {
                    amax_col = v;
                    ipiv = i;
                }
            } else {
                ui.push(pinv[i] as usize);
                ux.push(ws.x[i]);
            }
        }
        if ipiv == usize::MAX || amax_col <= threshold {
            return Err(SparseError::Singular { column: col, pivot: amax_col.max(0.0) });
        }
        if pinv[col] < 0 && ws.x[col].abs() >= amax_col * DIAG_PIVOT_TOL {
            ipiv = col;
        }
        let pivot = ws.x[ipiv];
        ui.push(k);
        ux.push(pivot);
        pinv[ipiv] = k as isize;
        li.push(ipiv);
        lx.push(1.0);
        for t in top..n {
            let i = ws.pstack[n + t];
            if pinv[i] < 0 {
                li.push(i);
                lx.push(ws.x[i] / pivot);
            }
            ws.x[i] = 0.0;
        }
    }
    lp[n] = li.len();
    up[n] = ui.len();

    let pinv: Vec<usize> = pinv.into_iter().map(|p| p as usize).collect();
    for r in li.iter_mut() {
        *r = pinv[*r];
    }
    // rows of L are now in pivot order; sort each column keeping the unit
    // diagonal first
    let l = sorted_csc(n, lp, li, lx, true);
    let u = sorted_csc(n, up, ui, ux, false);
    Ok(LuFactors { n, l, u, pinv, q, row_scale })
}

fn sorted_csc(n: usize, colptr: Vec<usize>, mut rowind: Vec<usize>, mut values: Vec<f64>, lower: bool) -> SparseMat {
    let mut buf: Vec<(usize, f64)> = Vec::new();
    for j in 0..n {
        let (a, b) = (colptr[j], colptr[j + 1]);
        buf.clear();
        buf.extend(rowind[a..b].iter().copied().zip(values[a..b].iter().copied()));
        buf.sort_unstable_by_key(|e| e.0);
        for (k, &(r, v)) in buf.iter().enumerate() {
            rowind[a + k] = r;
            values[a + k] = v;
        }
        debug_assert!(if lower { rowind[a] == j } else { rowind[b - 1] == j });
    }
    SparseMat::from_parts(n, n, colptr, rowind, values).expect("factor structure")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::Triplets;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_sparse(n: usize, density: f64, seed: u64) -> SparseMat {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut t = Triplets::new(n, n);
        for i in 0..n {
            t.push(i, i, rng.gen_range(0.5..2.0));
            for j in 0..n {
                if i != j && rng.gen::<f64>() < density {
                    t.push(i, j, rng.gen_range(-1.0..1.0));
                }
            }
        }
        t.to_csc()
    }

    fn residual(a: &SparseMat, x: &[f64], b: &[f64]) -> f64 {
        let ax = a.mul_vec(x);
        ax.iter().zip(b).fold(0.0f64, |m, (p, q)| m.max((p - q).abs()))
    }

    #[test]
    fn solves_random_systems() {
        for seed in 0..5 {
            let a = random_sparse(40, 0.08, seed);
            let b: Vec<f64> = (0..40).map(|i| (i as f64).sin()).collect();
            let f = lu_factor(&a, None).unwrap();
            let x = f.solve(&b);
            assert!(residual(&a, &x, &b) < 1e-10);
        }
    }

    #[test]
    fn reassembles_scaled_permuted_matrix() {
        let a = random_sparse(25, 0.1, 7);
        let f = lu_factor(&a, None).unwrap();
        let p = f.row_perm();
        let scaled = a.scale_rows(f.row_scale());
        let ad = scaled.to_dense();
        let lu = f.product().to_dense();
        let n = 25;
        for k in 0..n {
            for j in 0..n {
                let expect = ad[p.get(k) * n + f.col_perm().get(j)];
                assert!((lu[k * n + j] - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_diagonal_needs_pivoting() {
        // saddle point [[1, 1], [1, 0]]
        let a = SparseMat::from_dense(2, 2, &[1.0, 1.0, 1.0, 0.0]);
        let f = lu_factor(&a, Some(&Permutation::new(vec![1, 0]).unwrap())).unwrap();
        let x = f.solve(&[3.0, 2.0]);
        assert!((x[0] - 2.0).abs() < 1e-14 && (x[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn singular_reports_column() {
        let a = SparseMat::from_dense(3, 3, &[1.0, 2.0, 0.0, 2.0, 4.0, 0.0, 0.0, 0.0, 1.0]);
        let err = lu_factor(&a, Some(&Permutation::identity(3))).unwrap_err();
        assert!(matches!(err, SparseError::Singular { column: 1, .. }));
    }

    #[test]
    fn zero_row_is_singular() {
        let a = SparseMat::from_dense(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        assert!(matches!(lu_factor(&a, None), Err(SparseError::Singular { .. })));
    }
}
