//! Storage placement strategies.

use std::fmt;
use std::str::FromStr;

use super::Case;

/// How `n_y` devices are spread over the buses of a case.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Strategy {
    /// Buses in case order, wrapping around.
    FirstLast,
    /// Buses in reverse case order, wrapping around.
    LastFirst,
    /// Buses with non-zero nominal demand, wrapping around.
    LoadBus,
    /// Every `⌊n_b / n_y⌋`-th bus.
    FairDist,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [Strategy::FirstLast, Strategy::LastFirst, Strategy::LoadBus, Strategy::FairDist];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::FirstLast => "first-last",
            Strategy::LastFirst => "last-first",
            Strategy::LoadBus => "load-bus",
            Strategy::FairDist => "fair-dist",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Strategy::ALL
            .iter()
            .copied()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown strategy {s:?} (expected first-last, last-first, load-bus or fair-dist)"))
    }
}

/// External bus numbers hosting each of the `ny` devices.
pub fn distribute_storage(case: &Case, ny: usize, strategy: Strategy) -> Vec<usize> {
    let nb = case.nb();
    if ny == 0 || nb == 0 {
        return Vec::new();
    }
    let ids: Vec<usize> = case.buses.iter().map(|b| b.id).collect();
    match strategy {
        Strategy::FirstLast => (0..ny).map(|k| ids[k % nb]).collect(),
        Strategy::LastFirst => (0..ny).map(|k| ids[nb - 1 - k % nb]).collect(),
        Strategy::LoadBus => {
            let loads: Vec<usize> = case
                .buses
                .iter()
                .enumerate()
                .filter(|(i, b)| b.pd != 0.0 || (0..case.periods).any(|t| case.pd.get(*i, t) != 0.0))
                .map(|(_, b)| b.id)
                .collect();
            let pool = if loads.is_empty() { &ids } else { &loads };
            (0..ny).map(|k| pool[k % pool.len()]).collect()
        }
        Strategy::FairDist => {
            let stride = (nb / ny).max(1);
            (0..ny).map(|k| ids[((k + 1) * stride - 1) % nb]).collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::case::{case9, synthetic_case};

    #[test]
    fn first_last_cycles() {
        let c = case9();
        assert_eq!(distribute_storage(&c, 3, Strategy::FirstLast), vec![1, 2, 3]);
        assert_eq!(distribute_storage(&c, 11, Strategy::FirstLast)[9..], [1, 2]);
    }

    #[test]
    fn last_first_reverses() {
        let c = case9();
        assert_eq!(distribute_storage(&c, 3, Strategy::LastFirst), vec![9, 8, 7]);
    }

    #[test]
    fn load_bus_only_loaded() {
        let c = case9();
        assert_eq!(distribute_storage(&c, 4, Strategy::LoadBus), vec![5, 7, 9, 5]);
    }

    #[test]
    fn fair_dist_every_tenth() {
        let mut c = synthetic_case(100, 1);
        c.name = "grid100".into();
        let got = distribute_storage(&c, 10, Strategy::FairDist);
        assert_eq!(got, (1..=10).map(|k| 10 * k).collect::<Vec<_>>());
    }

    #[test]
    fn names_roundtrip() {
        for s in Strategy::ALL {
            assert_eq!(s.name().parse::<Strategy>().unwrap(), s);
        }
        assert!("zigzag".parse::<Strategy>().is_err());
    }
}
