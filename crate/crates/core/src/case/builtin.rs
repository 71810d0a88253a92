//! Built-in networks: the standard 9-bus case and seeded synthetic meshes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{BinMatrix, Branch, Bus, BusKind, Case, DenseMatrix, Gen, GenCost, Schedules};
use crate::error::CaseError;

/// Names accepted by [`builtin_case`].
pub const BUILTIN_NAMES: &[&str] = &["case9", "synth30", "synth118"];

/// Resolves a built-in case name.
pub fn builtin_case(name: &str) -> Result<Case, CaseError> {
    match name {
        "case9" => Ok(case9()),
        "synth30" => Ok(synthetic_case(30, 30)),
        "synth118" => Ok(synthetic_case(118, 118)),
        other => Err(CaseError::NotFound(other.to_string())),
    }
}

fn bus(id: usize, kind: BusKind, pd: f64, qd: f64, base_kv: f64, vmax: f64, vmin: f64) -> Bus {
    Bus { id, kind, pd, qd, gs: 0.0, bs: 0.0, area: 1, vm: 1.0, va: 0.0, base_kv, zone: 1, vmax, vmin }
}

fn line(from: usize, to: usize, r: f64, x: f64, b: f64, rate: f64) -> Branch {
    Branch {
        from,
        to,
        r,
        x,
        b,
        rate_a: rate,
        rate_b: rate,
        rate_c: rate,
        ratio: 0.0,
        angle: 0.0,
        in_service: true,
        angmin: -360.0,
        angmax: 360.0,
    }
}

fn single_period(
    name: &str,
    base_mva: f64,
    buses: Vec<Bus>,
    gens: Vec<Gen>,
    branches: Vec<Branch>,
    costs: Vec<GenCost>,
) -> Case {
    let nb = buses.len();
    let ng = gens.len();
    let mut pd = DenseMatrix::zeros(nb, 1);
    let mut qd = DenseMatrix::zeros(nb, 1);
    for (i, b) in buses.iter().enumerate() {
        pd.set(i, 0, b.pd);
        qd.set(i, 0, b.qd);
    }
    Case {
        name: name.to_string(),
        base_mva,
        buses,
        gens,
        branches,
        costs,
        storage: Vec::new(),
        periods: 1,
        dt_hours: 1.0,
        pd,
        qd,
        schedules: Schedules { avg: BinMatrix::ones(ng, 1), ..Schedules::all_ones(0, ng, 1) },
        soci: DenseMatrix::zeros(0, 1),
        socmi: DenseMatrix::zeros(0, 1),
    }
}

/// The standard 9-bus, 3-generator, 9-branch test system.
pub fn case9() -> Case {
    use BusKind::*;
    let buses = vec![
        bus(1, Ref, 0.0, 0.0, 345.0, 1.1, 0.9),
        bus(2, Pv, 0.0, 0.0, 345.0, 1.1, 0.9),
        bus(3, Pv, 0.0, 0.0, 345.0, 1.1, 0.9),
        bus(4, Pq, 0.0, 0.0, 345.0, 1.1, 0.9),
        bus(5, Pq, 90.0, 30.0, 345.0, 1.1, 0.9),
        bus(6, Pq, 0.0, 0.0, 345.0, 1.1, 0.9),
        bus(7, Pq, 100.0, 35.0, 345.0, 1.1, 0.9),
        bus(8, Pq, 0.0, 0.0, 345.0, 1.1, 0.9),
        bus(9, Pq, 125.0, 50.0, 345.0, 1.1, 0.9),
    ];
    let gen = |bus, pg, qg, vg, pmax, pmin| Gen {
        bus,
        pg,
        qg,
        qmax: 300.0,
        qmin: -300.0,
        vg,
        mbase: 100.0,
        in_service: true,
        pmax,
        pmin,
    };
    let gens = vec![
        gen(1, 72.3, 27.03, 1.04, 250.0, 10.0),
        gen(2, 163.0, 6.54, 1.025, 300.0, 10.0),
        gen(3, 85.0, -10.95, 1.025, 270.0, 10.0),
    ];
    let branches = vec![
        line(1, 4, 0.0, 0.0576, 0.0, 250.0),
        line(4, 5, 0.017, 0.092, 0.158, 250.0),
        line(5, 6, 0.039, 0.17, 0.358, 150.0),
        line(3, 6, 0.0, 0.0586, 0.0, 300.0),
        line(6, 7, 0.0119, 0.1008, 0.209, 150.0),
        line(7, 8, 0.0085, 0.072, 0.149, 250.0),
        line(8, 2, 0.0, 0.0625, 0.0, 250.0),
        line(8, 9, 0.032, 0.161, 0.306, 250.0),
        line(9, 4, 0.01, 0.085, 0.176, 250.0),
    ];
    let cost = |startup, c2, c1, c0| GenCost { startup, shutdown: 0.0, coeffs: vec![c2, c1, c0] };
    let costs = vec![cost(1500.0, 0.11, 5.0, 150.0), cost(2000.0, 0.085, 1.2, 600.0), cost(3000.0, 0.1225, 1.0, 335.0)];
    single_period("case9", 100.0, buses, gens, branches, costs)
}

/// A seeded meshed transmission network with `n` buses.
///
/// Buses form a ring with short local chords (about 1.45 branches per bus).
/// Roughly one bus in five hosts a generator, and generation capacity is
/// about twice the nominal demand.
pub fn synthetic_case(n: usize, seed: u64) -> Case {
    assert!(n >= 3, "synthetic case needs at least three buses");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ng = (n / 5).max(2);
    let gen_pos: Vec<usize> = (0..ng).map(|k| k * n / ng).collect();
    let mut buses = Vec::with_capacity(n);
    for i in 0..n {
        let is_gen = gen_pos.contains(&i);
        let kind = if i == 0 {
            BusKind::Ref
        } else if is_gen {
            BusKind::Pv
        } else {
            BusKind::Pq
        };
        let (pd, qd) = if !is_gen && rng.gen::<f64>() < 0.7 {
            let p = rng.gen_range(5.0..30.0_f64).round();
            (p, (p * rng.gen_range(0.2..0.4_f64)).round())
        } else {
            (0.0, 0.0)
        };
        buses.push(bus(i + 1, kind, pd, qd, 138.0, 1.06, 0.94));
    }
    let total: f64 = buses.iter().map(|b| b.pd).sum();
    let mut edges: Vec<(usize, usize)> = (0..n).map(|i| (i, (i + 1) % n)).collect();
    let extra = (0.45 * n as f64).round() as usize;
    let mut tries = 0;
    while edges.len() < n + extra && tries < 100 * n {
        tries += 1;
        let i = rng.gen_range(0..n);
        let j = (i + rng.gen_range(2..=8usize)) % n;
        let key = (i.min(j), i.max(j));
        if i == j || edges.iter().any(|&(a, b)| (a.min(b), a.max(b)) == key) {
            continue;
        }
        edges.push((i, j));
    }
    let branches = edges
        .iter()
        .map(|&(i, j)| {
            let x = rng.gen_range(0.02..0.10_f64);
            let r = x * rng.gen_range(0.15..0.35_f64);
            let b = rng.gen_range(0.0..0.04_f64);
            line(i + 1, j + 1, r, x, b, 200.0)
        })
        .collect();
    let pmax = (1.8 * total / ng as f64).max(50.0).round();
    let gens = gen_pos
        .iter()
        .map(|&i| Gen {
            bus: i + 1,
            pg: 0.0,
            qg: 0.0,
            qmax: (0.6 * pmax).round(),
            qmin: -(0.3 * pmax).round(),
            vg: 1.0,
            mbase: 100.0,
            in_service: true,
            pmax,
            pmin: 0.0,
        })
        .collect();
    let costs = (0..ng)
        .map(|_| GenCost {
            startup: 0.0,
            shutdown: 0.0,
            coeffs: vec![
                (rng.gen_range(0.01..0.06_f64) * 1e4).round() / 1e4,
                rng.gen_range(15.0..35.0_f64).round(),
                rng.gen_range(0.0..200.0_f64).round(),
            ],
        })
        .collect();
    single_period(&format!("synth{n}"), 100.0, buses, gens, branches, costs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn case9_dimensions() {
        let c = case9();
        assert_eq!((c.nb(), c.ng(), c.nl()), (9, 3, 9));
        assert_eq!(c.buses.iter().map(|b| b.pd).sum::<f64>(), 315.0);
        assert!(c.validate().is_ok());
    }

    #[test]
    fn synthetic_is_deterministic_and_valid() {
        let a = synthetic_case(30, 7);
        let b = synthetic_case(30, 7);
        assert_eq!(a, b);
        assert!(a.validate().is_ok());
        assert_eq!(a.nb(), 30);
        assert_eq!(a.ng(), 6);
        assert!(a.nl() >= 40);
        let cap: f64 = a.gens.iter().map(|g| g.pmax).sum();
        let load: f64 = a.buses.iter().map(|b| b.pd).sum();
        assert!(cap > 1.5 * load);
    }

    #[test]
    fn builtin_names_resolve() {
        for n in BUILTIN_NAMES {
            assert!(builtin_case(n).is_ok());
        }
        assert!(builtin_case("nope").is_err());
    }
}
