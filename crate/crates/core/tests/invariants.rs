use proptest::collection::vec;
use proptest::prelude::*;

use battflow_core::case::{
    distribute_storage, generate_ev_schedules, synthetic_case, BinMatrix, EvGenParams, Schedules, Strategy as Placement,
};
use battflow_core::ipm::{step_lengths, update_barrier};
use battflow_core::kkt::predict_schur_nnz;
use battflow_core::sparse::{
    amd_order, ldl_factor, lu_factor, max_abs_diff, norm_inf, Permutation, SparseMat, Triplets,
};

fn permutation(n: usize) -> impl Strategy<Value = Vec<usize>> {
    Just((0..n).collect::<Vec<_>>()).prop_shuffle()
}

/// Random sparse matrix with a dominant diagonal.
fn sparse_matrix(symmetric: bool) -> impl Strategy<Value = SparseMat> {
    (2usize..30).prop_flat_map(move |n| {
        (Just(n), vec((0..n, 0..n, -1.0f64..1.0), 0..4 * n), vec(1.0f64..5.0, n), any::<bool>()).prop_map(
            move |(n, offd, diag, indefinite)| {
                let mut t = Triplets::new(n, n);
                for (k, d) in diag.iter().enumerate() {
                    let sign = if indefinite && symmetric && k % 2 == 1 { -1.0 } else { 1.0 };
                    t.push(k, k, sign * (d + 4.0 * n as f64));
                }
                for (i, j, v) in offd {
                    if i != j {
                        t.push(i, j, v);
                        if symmetric {
                            t.push(j, i, v);
                        }
                    }
                }
                t.to_csc()
            },
        )
    })
}

fn bin_matrix(rows: usize, cols: usize) -> impl Strategy<Value = BinMatrix> {
    vec(vec(any::<bool>(), cols), rows).prop_map(move |bits| {
        let mut m = BinMatrix::zeros(rows, cols);
        for (i, r) in bits.iter().enumerate() {
            for (j, &b) in r.iter().enumerate() {
                m.set(i, j, b);
            }
        }
        m
    })
}

fn schedules() -> impl Strategy<Value = (Schedules, usize, usize)> {
    (1usize..6, 1usize..8).prop_flat_map(|(ny, periods)| {
        (bin_matrix(ny, periods), bin_matrix(ny, periods), bin_matrix(ny, periods)).prop_map(
            move |(avbp, conch, condi)| {
                let s = Schedules { avbq: avbp.clone(), avg: BinMatrix::ones(1, periods), avbp, conch, condi };
                (s, ny, periods)
            },
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn step_keeps_iterates_positive(
        pairs in vec((1e-6f64..10.0, -10.0f64..10.0, 1e-6f64..10.0, -10.0f64..10.0), 1..40),
        xi in 0.5f64..0.99999,
    ) {
        let (z, dz, mu, dmu): (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>) = pairs.into_iter().fold(
            Default::default(),
            |mut acc, (a, b, c, d)| {
                acc.0.push(a);
                acc.1.push(b);
                acc.2.push(c);
                acc.3.push(d);
                acc
            },
        );
        let (ap, ad) = step_lengths(&z, &dz, &mu, &dmu, xi);
        prop_assert!(ap > 0.0 && ap <= 1.0);
        prop_assert!(ad > 0.0 && ad <= 1.0);
        prop_assert!(z.iter().zip(&dz).all(|(a, d)| a + ap * d > 0.0));
        prop_assert!(mu.iter().zip(&dmu).all(|(a, d)| a + ad * d > 0.0));
    }

    #[test]
    fn barrier_is_scaled_mean_complementarity(
        zm in vec((1e-6f64..10.0, 1e-6f64..10.0), 1..40),
        sigma in 0.01f64..1.0,
    ) {
        let z: Vec<f64> = zm.iter().map(|p| p.0).collect();
        let mu: Vec<f64> = zm.iter().map(|p| p.1).collect();
        let gamma = update_barrier(&z, &mu, sigma);
        let mean = zm.iter().map(|(a, b)| a * b).sum::<f64>() / zm.len() as f64;
        prop_assert!(gamma > 0.0);
        prop_assert!((gamma - sigma * mean).abs() <= 1e-12 * (1.0 + mean));
    }

    #[test]
    fn schur_pattern_is_symmetric_and_banded((s, ny, periods) in schedules()) {
        let pat = predict_schur_nnz(&s, ny, periods);
        let full = predict_schur_nnz(&Schedules::all_ones(ny, 1, periods), ny, periods);
        prop_assert_eq!(pat.dim, ny * periods);
        prop_assert!(pat.bandwidth() < 2 * ny);
        for &(i, j) in &pat.positions {
            prop_assert!(i < pat.dim && j < pat.dim);
            prop_assert!(pat.positions.binary_search_by(|&(a, b)| (b, a).cmp(&(i, j))).is_ok());
            prop_assert!(full.positions.binary_search_by(|&(a, b)| (b, a).cmp(&(j, i))).is_ok());
        }
        for t in 0..periods {
            for i in 0..ny {
                prop_assert!(pat.positions.binary_search_by(|&(a, b)| (b, a).cmp(&(t * ny + i, t * ny + i))).is_ok());
            }
        }
    }

    #[test]
    fn lu_solves_random_systems(a in sparse_matrix(false), seed in any::<u64>()) {
        let n = a.nrows();
        let b: Vec<f64> = (0..n).map(|i| ((seed.wrapping_add(i as u64) % 97) as f64) - 48.0).collect();
        let f = lu_factor(&a, None).unwrap();
        let x = f.solve(&b);
        let r = a.mul_vec(&x);
        prop_assert!(max_abs_diff(&r, &b) <= 1e-10 * (1.0 + norm_inf(&b)));
        prop_assert_eq!(f.product().nrows(), n);
    }

    #[test]
    fn ldl_solves_quasi_definite_systems(a in sparse_matrix(true)) {
        let n = a.nrows();
        let b: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let f = ldl_factor(&a, 1e-12).unwrap();
        let x = f.solve(&b);
        prop_assert!(max_abs_diff(&a.mul_vec(&x), &b) <= 1e-10 * (1.0 + norm_inf(&b)));
        let (pos, neg, zero) = f.inertia();
        prop_assert_eq!(pos + neg + zero, n);
        prop_assert_eq!(zero, 0);
    }

    #[test]
    fn amd_is_a_permutation(a in sparse_matrix(true)) {
        let p = amd_order(&a);
        let mut seen = p.as_slice().to_vec();
        seen.sort_unstable();
        prop_assert_eq!(seen, (0..a.nrows()).collect::<Vec<_>>());
    }

    #[test]
    fn permutation_round_trips(perm in (1usize..50).prop_flat_map(permutation)) {
        let p = Permutation::new(perm.clone()).unwrap();
        let x: Vec<f64> = (0..perm.len()).map(|i| i as f64 * 1.5).collect();
        prop_assert_eq!(p.apply_inverse(&p.apply(&x)), x.clone());
        let round = p.compose(&p.inverse());
        prop_assert_eq!(round.as_slice(), &(0..perm.len()).collect::<Vec<_>>()[..]);
    }

    #[test]
    fn symmetric_permutation_preserves_entries(a in sparse_matrix(true), seed in any::<u64>()) {
        let n = a.nrows();
        let mut order: Vec<usize> = (0..n).collect();
        order.rotate_left((seed % n as u64) as usize);
        let p = Permutation::new(order).unwrap();
        let b = a.permute_sym(&p);
        prop_assert_eq!(a.nnz(), b.nnz());
        for i in 0..n {
            for j in 0..n {
                prop_assert_eq!(b.get(i, j), a.get(p.get(i), p.get(j)));
            }
        }
    }

    #[test]
    fn bin_matrix_strings_round_trip(m in (1usize..6, 1usize..12).prop_flat_map(|(r, c)| bin_matrix(r, c))) {
        let back = BinMatrix::from_strings("M", &m.to_strings()).unwrap();
        prop_assert_eq!(back, m);
    }

    #[test]
    fn storage_lands_on_existing_buses(ny in 0usize..80, k in 0usize..4) {
        let case = synthetic_case(30, 30);
        let strategy = Placement::ALL[k];
        let buses = distribute_storage(&case, ny, strategy);
        prop_assert_eq!(buses.len(), ny);
        prop_assert!(buses.iter().all(|b| case.bus_index(*b).is_some()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn ev_schedules_are_consistent(seed in any::<u64>(), n_ev in 1usize..60) {
        let p = EvGenParams { n_ev, seed, ..Default::default() };
        let ev = generate_ev_schedules(&p).unwrap();
        prop_assert_eq!(ev.samples.len(), n_ev);
        for (i, s) in ev.samples.iter().enumerate() {
            prop_assert_eq!(s.departure_hour, s.arrival_hour + p.stay_hours);
            prop_assert!(s.energy_kwh >= 0.0);
            for t in 0..ev.periods {
                let present = ev.avbp.get(i, t);
                prop_assert!(!ev.conch.get(i, t) || present);
                prop_assert!(!ev.condi.get(i, t) || present);
            }
        }
    }
}
