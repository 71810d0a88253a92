//! Symbolic prediction of the Schur-complement pattern.
//!
//! Each storage row that touches the variables of step `t` is tagged with
//! the coupling classes it reaches through `Υ_t⁻¹`: the device's own SOC
//! (isolated from the network inside `Υ_t`) and the network, reached through
//! a free charge or discharge variable. Two rows interact in `S_t` exactly
//! when they share a class.

use std::collections::BTreeSet;

use crate::case::Schedules;
use crate::formulation::{Group, Problem};

/// Predicted nonzero positions of `σᶜ` and of every `S_t`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SchurPattern {
    /// Order of `σᶜ` (`T · n_y`).
    pub dim: usize,
    /// Positions of each `S_t`, `(row, col)` in ascending order.
    pub blocks: Vec<Vec<(usize, usize)>>,
    /// Union of the block positions in column-major order.
    pub positions: Vec<(usize, usize)>,
}

impl SchurPattern {
    pub fn nnz(&self) -> usize {
        self.positions.len()
    }

    pub fn block_nnz(&self) -> Vec<usize> {
        self.blocks.iter().map(Vec::len).collect()
    }

    /// Largest `|i − j|` over the predicted positions.
    pub fn bandwidth(&self) -> usize {
        self.positions.iter().map(|&(i, j)| i.abs_diff(j)).max().unwrap_or(0)
    }
}

const NET: usize = usize::MAX;

fn predict(
    ny: usize,
    periods: usize,
    soc_free: impl Fn(usize, usize) -> bool,
    net: impl Fn(usize, usize) -> bool,
) -> SchurPattern {
    let mut blocks = Vec::with_capacity(periods);
    let mut all = BTreeSet::new();
    for t in 0..periods {
        let mut rows: Vec<(usize, Vec<usize>)> = Vec::with_capacity(2 * ny);
        for i in 0..ny {
            let mut cls = Vec::new();
            if soc_free(i, t) {
                cls.push(i);
            }
            if net(i, t) {
                cls.push(NET);
            }
            rows.push((t * ny + i, cls));
        }
        if t + 1 < periods {
            for i in 0..ny {
                let cls = if soc_free(i, t) { vec![i] } else { Vec::new() };
                rows.push(((t + 1) * ny + i, cls));
            }
        }
        let mut pos = BTreeSet::new();
        for (a, ca) in &rows {
            for (b, cb) in &rows {
                if ca.iter().any(|c| cb.contains(c)) {
                    pos.insert((*a, *b));
                }
            }
        }
        all.extend(pos.iter().map(|&(i, j)| (j, i)));
        blocks.push(pos.into_iter().collect());
    }
    SchurPattern { dim: ny * periods, blocks, positions: all.into_iter().map(|(j, i)| (i, j)).collect() }
}

/// Prediction from availability schedules alone: SOC is always free, and
/// charge or discharge is free when the device is present and the option
/// is connected.
pub fn predict_schur_nnz(s: &Schedules, ny: usize, periods: usize) -> SchurPattern {
    predict(ny, periods, |_, _| true, |i, t| s.avbp.get(i, t) && (s.conch.get(i, t) || s.condi.get(i, t)))
}

/// Prediction from the pinned variables of an assembled problem.
pub fn predict_for_problem(p: &Problem) -> SchurPattern {
    let v = &p.vars;
    let free = |t: usize, g: Group, i: usize| !p.is_pinned(v.index(t, g, i));
    predict(v.ny, v.periods, |i, t| free(t, Group::Soc, i), |i, t| free(t, Group::Pch, i) || free(t, Group::Pdch, i))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::case::BinMatrix;

    #[test]
    fn static_golden() {
        let s = Schedules::all_ones(5, 1, 10);
        let pat = predict_schur_nnz(&s, 5, 10);
        assert_eq!(pat.nnz(), 340);
        let per = pat.block_nnz();
        assert!(per[..9].iter().all(|&n| n == 40));
        assert_eq!(per[9], 25);
        assert!(pat.bandwidth() <= 5);
    }

    #[test]
    fn dynamic_golden() {
        let rows = ["0011111100", "0001111000", "0011110000", "0000111110", "0000111000"];
        let avbp = BinMatrix::from_strings("AVBP", &rows).unwrap();
        let s = Schedules {
            conch: avbp.clone(),
            condi: BinMatrix::zeros(5, 10),
            avbq: BinMatrix::zeros(5, 10),
            avg: BinMatrix::ones(1, 10),
            avbp,
        };
        assert_eq!(predict_schur_nnz(&s, 5, 10).nnz(), 202);
    }

    #[test]
    fn tiny_brute_force() {
        let pat = predict_schur_nnz(&Schedules::all_ones(1, 1, 2), 1, 2);
        assert_eq!(pat.block_nnz(), vec![4, 1]);
        assert_eq!(pat.nnz(), 4);
    }

    #[test]
    fn no_storage_is_empty() {
        let pat = predict_schur_nnz(&Schedules::all_ones(0, 1, 4), 0, 4);
        assert_eq!((pat.dim, pat.nnz()), (0, 0));
    }
}
