//! Newton-system reordering into arrowhead form and its two solvers.
//!
//! The reduced Newton system
//!
//! ```text
//! [ M    G_Xᵀ ] [ΔX]   [-N]
//! [ G_X  0    ] [Δλ] = [-G]
//! ```
//!
//! is regrouped per step as `ω_t = [Δx_t; Δλ_gn,t; Δλ_gl,t]` with the storage
//! multipliers last, giving a block diagonal of `Υ_t` bordered by the
//! storage coupling `ρ_t`.

mod direct;
mod predict;
mod schur;

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

pub use direct::{direct_factorize, direct_solve, DirectFactors};
pub use predict::{predict_for_problem, predict_schur_nnz, SchurPattern};
pub use schur::{schur_factorize, schur_solve, FactorCache, SchurFactor};

use crate::derivatives::DerivBundle;
use crate::error::KktError;
use crate::formulation::Problem;
use crate::sparse::{amd_order, Permutation, SparseMat, Triplets};

/// The arrowhead-ordered Newton system.
#[derive(Clone, Debug)]
pub struct ArrowheadSystem {
    pub upsilon: Vec<SparseMat>,
    /// Coupling blocks, `N_gs × N_Υt`.
    pub rho: Vec<SparseMat>,
    pub zeta: Vec<Vec<f64>>,
    pub gamma: Vec<f64>,
    /// Maps arrowhead positions to the original `[X; λ]` positions.
    pub perm_to_original: Permutation,
    pub pattern: Arc<SchurPattern>,
    pub static_structure: bool,
}

/// Solution of an arrowhead system.
#[derive(Clone, Debug, PartialEq)]
pub struct ArrowSolution {
    pub omega: Vec<Vec<f64>>,
    pub dlam_s: Vec<f64>,
}

impl ArrowheadSystem {
    pub fn periods(&self) -> usize {
        self.upsilon.len()
    }

    pub fn n_gs(&self) -> usize {
        self.gamma.len()
    }

    pub fn block_sizes(&self) -> Vec<usize> {
        self.upsilon.iter().map(SparseMat::nrows).collect()
    }

    pub fn dim(&self) -> usize {
        self.block_sizes().iter().sum::<usize>() + self.n_gs()
    }

    /// Full arrowhead matrix.
    pub fn assemble(&self) -> SparseMat {
        let n = self.dim();
        let n_gs = self.n_gs();
        let border = n - n_gs;
        let cap = self.upsilon.iter().map(SparseMat::nnz).sum::<usize>()
            + 2 * self.rho.iter().map(SparseMat::nnz).sum::<usize>();
        let mut tr = Triplets::with_capacity(n, n, cap);
        let mut off = 0;
        for (u, r) in self.upsilon.iter().zip(&self.rho) {
            tr.push_block(off, off, u);
            tr.push_block(border, off, r);
            tr.push_block_transposed(off, border, r);
            off += u.nrows();
        }
        tr.to_csc()
    }

    /// Right-hand side `[ζ_1; …; ζ_T; Γ]`.
    pub fn rhs(&self) -> Vec<f64> {
        let mut b: Vec<f64> = self.zeta.iter().flatten().copied().collect();
        b.extend_from_slice(&self.gamma);
        b
    }

    /// Concatenated solution `[ω_1; …; ω_T; δλ]`.
    pub fn stack(&self, s: &ArrowSolution) -> Vec<f64> {
        let mut y: Vec<f64> = s.omega.iter().flatten().copied().collect();
        y.extend_from_slice(&s.dlam_s);
        y
    }

    /// Splits a stacked vector into per-step parts.
    pub fn split(&self, y: &[f64]) -> ArrowSolution {
        let mut omega = Vec::with_capacity(self.periods());
        let mut off = 0;
        for n in self.block_sizes() {
            omega.push(y[off..off + n].to_vec());
            off += n;
        }
        ArrowSolution { omega, dlam_s: y[off..].to_vec() }
    }

    /// Returns `(ΔX, Δλ)` in the original ordering.
    pub fn to_original(&self, s: &ArrowSolution, nx: usize) -> (Vec<f64>, Vec<f64>) {
        let y = self.stack(s);
        let orig = self.perm_to_original.apply_inverse(&y);
        let (dx, dl) = orig.split_at(nx);
        (dx.to_vec(), dl.to_vec())
    }

    /// `‖A·y − b‖∞ / (1 + ‖b‖∞)` for a candidate solution.
    pub fn residual(&self, s: &ArrowSolution) -> f64 {
        let a = self.assemble();
        let b = self.rhs();
        let ay = a.mul_vec(&self.stack(s));
        let r = ay.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        r / (1.0 + b.iter().fold(0.0_f64, |m, v| m.max(v.abs())))
    }
}

/// Reorders a reduced Newton system into arrowhead form.
///
/// `m_blocks[t]` is the step block of `M`, `n` the full `N` vector and `g`
/// the equality residuals.
pub fn build_arrowhead(
    p: &Problem,
    pattern: Arc<SchurPattern>,
    m_blocks: &[SparseMat],
    d: &DerivBundle,
    n: &[f64],
    g: &[f64],
) -> Result<ArrowheadSystem, KktError> {
    let v = &p.vars;
    let c = &p.cons;
    let periods = v.periods;
    let (nx, nxt, ny) = (v.nx(), v.nxt, v.ny);
    let n_gs = c.total_gs();
    if m_blocks.len() != periods || n.len() != nx || g.len() != c.total_g() || d.steps.len() != periods {
        return Err(KktError::Inconsistent(format!(
            "layout mismatch: {} M blocks, N {} (want {nx}), G {} (want {})",
            m_blocks.len(),
            n.len(),
            g.len(),
            c.total_g()
        )));
    }
    let mut upsilon = Vec::with_capacity(periods);
    let mut rho = Vec::with_capacity(periods);
    let mut zeta = Vec::with_capacity(periods);
    let mut perm = Vec::with_capacity(nx + c.total_g());
    for t in 0..periods {
        let s = &d.steps[t];
        let n_gl = c.n_gl(t);
        let size = nxt + c.n_gn + n_gl;
        let m = &m_blocks[t];
        let cap = m.nnz() + 2 * (s.gn.nnz() + s.gl.nnz());
        let mut tr = Triplets::with_capacity(size, size, cap);
        tr.push_block(0, 0, m);
        tr.push_block(nxt, 0, &s.gn);
        tr.push_block_transposed(0, nxt, &s.gn);
        tr.push_block(nxt + c.n_gn, 0, &s.gl);
        tr.push_block_transposed(0, nxt + c.n_gn, &s.gl);
        upsilon.push(tr.to_csc());

        let mut rt = Triplets::with_capacity(n_gs, size, 4 * ny);
        rt.push_block(t * ny, 0, &d.storage.cur);
        if t + 1 < periods {
            rt.push_block((t + 1) * ny, 0, &d.storage.prev);
        }
        rho.push(rt.to_csc());

        let b = v.block(t);
        let mut z: Vec<f64> = n[b.clone()].iter().map(|x| -x).collect();
        let gn0 = c.gn_row(t);
        z.extend(g[gn0..gn0 + c.n_gn].iter().map(|x| -x));
        let gl0 = c.gl_row(t);
        z.extend(g[gl0..gl0 + n_gl].iter().map(|x| -x));
        zeta.push(z);

        perm.extend(b);
        perm.extend((gn0..gn0 + c.n_gn).map(|r| nx + r));
        perm.extend((gl0..gl0 + n_gl).map(|r| nx + r));
    }
    let gs0 = c.gs_row(0, 0);
    perm.extend((gs0..gs0 + n_gs).map(|r| nx + r));
    let gamma = g[gs0..gs0 + n_gs].iter().map(|x| -x).collect();
    let perm_to_original = Permutation::new(perm).map_err(|e| KktError::Inconsistent(e.to_string()))?;
    Ok(ArrowheadSystem { upsilon, rho, zeta, gamma, perm_to_original, pattern, static_structure: p.static_structure })
}

/// Which linear solver handles the Newton system.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Backend {
    Schur,
    DirectLu,
}

impl Backend {
    pub const ALL: [Backend; 2] = [Backend::Schur, Backend::DirectLu];

    pub fn name(self) -> &'static str {
        match self {
            Backend::Schur => "schur",
            Backend::DirectLu => "direct-lu",
        }
    }
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Backend {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "schur" => Ok(Backend::Schur),
            "direct-lu" | "direct" | "lu" => Ok(Backend::DirectLu),
            _ => Err(format!("unknown backend {s:?} (expected schur or direct-lu)")),
        }
    }
}

/// Fill-reducing orderings keyed by sparsity pattern.
#[derive(Clone, Debug, Default)]
pub struct OrderingCache {
    orders: HashMap<u64, Permutation>,
    pinned: Option<Permutation>,
    /// Number of AMD computations performed so far.
    pub amd_calls: usize,
}

impl OrderingCache {
    pub fn new() -> Self {
        Self::default()
    }

    /// Ordering for `a`, computed on first sight of its pattern.
    pub fn order(&mut self, a: &SparseMat) -> Permutation {
        let h = a.pattern_hash();
        if let Some(p) = self.orders.get(&h) {
            return p.clone();
        }
        self.amd_calls += 1;
        let p = amd_order(a);
        self.orders.insert(h, p.clone());
        p
    }

    /// Orderings for every block. With a static structure the first block's
    /// ordering is computed once and reused for all steps.
    pub fn block_orders(&mut self, blocks: &[SparseMat], static_structure: bool) -> Vec<Permutation> {
        if static_structure && !blocks.is_empty() {
            let n = blocks[0].nrows();
            let p = match &self.pinned {
                Some(p) if p.len() == n => p.clone(),
                _ => {
                    self.amd_calls += 1;
                    let p = amd_order(&blocks[0]);
                    self.pinned = Some(p.clone());
                    p
                }
            };
            return vec![p; blocks.len()];
        }
        blocks.iter().map(|b| self.order(b)).collect()
    }
}

/// Per-solve statistics of a backend.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct KktStats {
    /// Peak live factor nonzeros over all factorizations.
    pub peak_factor_nnz: usize,
    /// Factor nonzeros of the last factorization.
    pub last_factor_nnz: usize,
    pub factorizations: usize,
    /// Times the Schur complement fell back from LDLᵀ to LU.
    pub ldl_fallbacks: usize,
}

/// A Newton-system solver that keeps orderings across iterations.
#[derive(Clone, Debug)]
pub struct KktSolver {
    pub backend: Backend,
    pub orderings: OrderingCache,
    pub stats: KktStats,
}

impl KktSolver {
    pub fn new(backend: Backend) -> Self {
        KktSolver { backend, orderings: OrderingCache::new(), stats: KktStats::default() }
    }

    pub fn solve(&mut self, sys: &ArrowheadSystem) -> Result<ArrowSolution, KktError> {
        let (sol, nnz) = match self.backend {
            Backend::Schur => {
                let cache = schur_factorize(sys, &mut self.orderings)?;
                if cache.ldl_fallback {
                    self.stats.ldl_fallbacks += 1;
                }
                (schur_solve(&cache, sys)?, cache.peak_nnz())
            }
            Backend::DirectLu => {
                let f = direct_factorize(sys, &mut self.orderings)?;
                (direct_solve(&f, sys)?, f.nnz())
            }
        };
        self.stats.factorizations += 1;
        self.stats.last_factor_nnz = nnz;
        self.stats.peak_factor_nnz = self.stats.peak_factor_nnz.max(nnz);
        Ok(sol)
    }
}
