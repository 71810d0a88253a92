//! Block Schur-complement factorization and substitution.

use super::{ArrowSolution, ArrowheadSystem, OrderingCache};
use crate::error::{KktError, SparseError};
use crate::par;
use crate::sparse::{ldl_factor, lu_factor, LdlFactors, LuFactors, SparseMat};

/// Relative asymmetry tolerated when handing `σᶜ` to LDLᵀ.
const SCHUR_SYM_RTOL: f64 = 1e-10;

/// Factorization of the Schur complement.
#[derive(Clone, Debug)]
pub enum SchurFactor {
    Empty,
    Ldl(LdlFactors),
    Lu(LuFactors),
}

impl SchurFactor {
    pub fn nnz(&self) -> usize {
        match self {
            SchurFactor::Empty => 0,
            SchurFactor::Ldl(f) => f.nnz(),
            SchurFactor::Lu(f) => f.nnz(),
        }
    }

    fn solve(&self, b: &[f64]) -> Vec<f64> {
        match self {
            SchurFactor::Empty => Vec::new(),
            SchurFactor::Ldl(f) => f.solve(b),
            SchurFactor::Lu(f) => f.solve(b),
        }
    }
}

/// Everything retained between factorization and substitution.
#[derive(Clone, Debug)]
pub struct FactorCache {
    pub blocks: Vec<LuFactors>,
    /// `σᶜ = Σ_t S_t` on the predicted pattern.
    pub sigma_c: SparseMat,
    /// `σˡ = Σ_t Ξ_t`.
    pub sigma_l: Vec<f64>,
    pub schur: SchurFactor,
    /// Set when LDLᵀ failed and LU was used instead.
    pub ldl_fallback: bool,
    /// `nnz(L_t) + nnz(U_t)` per block.
    pub block_nnz: Vec<usize>,
}

impl FactorCache {
    /// Live factor nonzeros after factorization: every block LU plus the
    /// Schur factor.
    pub fn peak_nnz(&self) -> usize {
        self.block_nnz.iter().sum::<usize>() + self.schur.nnz()
    }
}

struct BlockPart {
    lu: LuFactors,
    /// `(position in σᶜ values, value)` contributions of `S_t`.
    s: Vec<(usize, f64)>,
    xi: Vec<(usize, f64)>,
}

/// Sparse rows of `ρ_t`: `(σᶜ row, [(column, value)])`.
fn rho_rows(rho: &SparseMat) -> Vec<(usize, Vec<(usize, f64)>)> {
    let rt = rho.transpose();
    (0..rt.ncols())
        .filter_map(|r| {
            let entries: Vec<(usize, f64)> = rt.col_iter(r).collect();
            (!entries.is_empty()).then_some((r, entries))
        })
        .collect()
}

fn dot(row: &[(usize, f64)], y: &[f64]) -> f64 {
    row.iter().map(|&(j, v)| v * y[j]).sum()
}

/// Factorizes every `Υ_t`, forms `σᶜ` and `σˡ` and factorizes `σᶜ`.
pub fn schur_factorize(sys: &ArrowheadSystem, orderings: &mut OrderingCache) -> Result<FactorCache, KktError> {
    let n_gs = sys.n_gs();
    let pattern = &sys.pattern;
    if pattern.dim != n_gs || pattern.blocks.len() != sys.periods() {
        return Err(KktError::Inconsistent(format!(
            "Schur pattern of order {} for {} storage rows",
            pattern.dim, n_gs
        )));
    }
    let mut tr = crate::sparse::Triplets::with_capacity(n_gs, n_gs, pattern.nnz());
    for &(i, j) in &pattern.positions {
        tr.push(i, j, 0.0);
    }
    let mut sigma_c = tr.to_csc();
    let slot = |i: usize, j: usize| sigma_c.find(i, j);
    let slots: Vec<Vec<Option<usize>>> =
        pattern.blocks.iter().map(|b| b.iter().map(|&(i, j)| slot(i, j)).collect()).collect();

    let orders = orderings.block_orders(&sys.upsilon, sys.static_structure);
    let parts = par::try_map_range(sys.periods(), |t| -> Result<BlockPart, KktError> {
        let lu = lu_factor(&sys.upsilon[t], Some(&orders[t])).map_err(|source| KktError::Block { block: t, source })?;
        let rows = rho_rows(&sys.rho[t]);
        let n = sys.upsilon[t].nrows();
        let mut solved: Vec<Option<Vec<f64>>> = vec![None; n_gs];
        let needed: Vec<usize> = {
            let mut v: Vec<usize> = pattern.blocks[t].iter().map(|&(_, j)| j).collect();
            v.sort_unstable();
            v.dedup();
            v
        };
        for (r, entries) in &rows {
            if needed.binary_search(r).is_ok() {
                let mut rhs = vec![0.0; n];
                for &(j, v) in entries {
                    rhs[j] = v;
                }
                lu.solve_in_place(&mut rhs);
                solved[*r] = Some(rhs);
            }
        }
        let row_of = |r: usize| rows.iter().find(|(k, _)| *k == r).map(|(_, e)| e.as_slice());
        let mut s = Vec::with_capacity(pattern.blocks[t].len());
        for (k, &(i, j)) in pattern.blocks[t].iter().enumerate() {
            let (a, b) = if i <= j { (i, j) } else { (j, i) };
            let val = match (row_of(a), solved[b].as_ref()) {
                (Some(ra), Some(yb)) => -dot(ra, yb),
                _ => 0.0,
            };
            if let Some(pos) = slots[t][k] {
                s.push((pos, val));
            }
        }
        let w = lu.solve(&sys.zeta[t]);
        let xi = rows.iter().map(|(r, e)| (*r, -dot(e, &w))).collect();
        Ok(BlockPart { lu, s, xi })
    })?;

    let mut sigma_l = vec![0.0; n_gs];
    let mut blocks = Vec::with_capacity(parts.len());
    let mut block_nnz = Vec::with_capacity(parts.len());
    {
        let vals = sigma_c.values_mut();
        for part in parts {
            for (pos, v) in part.s {
                vals[pos] += v;
            }
            for (r, v) in part.xi {
                sigma_l[r] += v;
            }
            block_nnz.push(part.lu.nnz());
            blocks.push(part.lu);
        }
    }

    let (schur, ldl_fallback) = if n_gs == 0 {
        (SchurFactor::Empty, false)
    } else {
        match ldl_factor(&sigma_c, SCHUR_SYM_RTOL) {
            Ok(f) => (SchurFactor::Ldl(f), false),
            Err(e) => {
                log::debug!("LDLᵀ of the Schur complement failed ({e}); falling back to LU");
                let f = lu_factor(&sigma_c, None).map_err(KktError::Schur)?;
                (SchurFactor::Lu(f), true)
            }
        }
    };
    Ok(FactorCache { blocks, sigma_c, sigma_l, schur, ldl_fallback, block_nnz })
}

/// Forward and backward substitution through the cached factors.
pub fn schur_solve(cache: &FactorCache, sys: &ArrowheadSystem) -> Result<ArrowSolution, KktError> {
    let n_gs = sys.n_gs();
    if cache.sigma_l.len() != n_gs || cache.blocks.len() != sys.periods() {
        return Err(KktError::Inconsistent("factor cache does not match the system".into()));
    }
    let xi: Vec<f64> = sys.gamma.iter().zip(&cache.sigma_l).map(|(g, s)| g + s).collect();
    let dlam_s = cache.schur.solve(&xi);
    if dlam_s.iter().any(|v| !v.is_finite()) {
        return Err(KktError::Schur(SparseError::Singular { column: 0, pivot: f64::NAN }));
    }
    let omega = par::map_range(sys.periods(), |t| {
        let mut kappa = sys.zeta[t].clone();
        let rt = &sys.rho[t];
        for j in 0..rt.ncols() {
            for (r, v) in rt.col_iter(j) {
                kappa[j] -= v * dlam_s[r];
            }
        }
        cache.blocks[t].solve_in_place(&mut kappa);
        kappa
    });
    Ok(ArrowSolution { omega, dlam_s })
}
