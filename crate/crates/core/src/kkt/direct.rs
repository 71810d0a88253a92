//! Direct sparse LU of the whole arrowhead matrix.

use super::{ArrowSolution, ArrowheadSystem, OrderingCache};
use crate::error::KktError;
use crate::sparse::{lu_factor, LuFactors};

/// LU factors of the assembled arrowhead matrix.
#[derive(Clone, Debug)]
pub struct DirectFactors {
    pub lu: LuFactors,
}

impl DirectFactors {
    pub fn nnz(&self) -> usize {
        self.lu.nnz()
    }
}

pub fn direct_factorize(sys: &ArrowheadSystem, orderings: &mut OrderingCache) -> Result<DirectFactors, KktError> {
    let a = sys.assemble();
    let q = orderings.order(&a);
    let lu = lu_factor(&a, Some(&q)).map_err(KktError::Full)?;
    Ok(DirectFactors { lu })
}

pub fn direct_solve(f: &DirectFactors, sys: &ArrowheadSystem) -> Result<ArrowSolution, KktError> {
    let b = sys.rhs();
    if b.len() != f.lu.dim() {
        return Err(KktError::Inconsistent(format!(
            "factor of order {} for a system of order {}",
            f.lu.dim(),
            b.len()
        )));
    }
    Ok(sys.split(&f.lu.solve(&b)))
}
