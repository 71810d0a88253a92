//! Monte Carlo generator for residential EV charging schedules.
//!
//! Each vehicle draws a habitual home-arrival time and commute distance once
//! from the population distributions, then a daily deviation around them.
//! Vehicles stay connected for a fixed number of hours after arrival, may
//! only charge, and arrive with the energy of the day's driving spent.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{distribute_storage, BinMatrix, Case, DenseMatrix, LoadProfile, Schedules, Storage, Strategy};
use crate::error::EvError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvGenParams {
    pub n_ev: usize,
    pub seed: u64,
    /// Day index; changes the daily deviations but not the population.
    pub day: u64,
    pub dt_hours: f64,
    pub window_start_hour: f64,
    pub window_hours: f64,
    pub arrival_mean_hour: f64,
    pub arrival_std_min: f64,
    pub arrival_daily_std_min: f64,
    /// Hours between arrival and departure.
    pub stay_hours: f64,
    pub distance_mean_km: f64,
    pub distance_std_km: f64,
    /// Relative standard deviation of the daily distance around the habit.
    pub distance_daily_rel_std: f64,
    pub consumption_kwh_per_100km: Vec<f64>,
    pub consumption_share: Vec<f64>,
    pub charger_amps: Vec<f64>,
    pub charger_share: Vec<f64>,
    pub charger_volts: f64,
    pub battery_kwh: f64,
    pub soc_max: f64,
    pub eff_ch: f64,
    pub eff_dch: f64,
}

impl Default for EvGenParams {
    fn default() -> Self {
        EvGenParams {
            n_ev: 10,
            seed: 1,
            day: 0,
            dt_hours: 0.25,
            window_start_hour: 12.0,
            window_hours: 24.0,
            arrival_mean_hour: 17.0,
            arrival_std_min: 90.0,
            arrival_daily_std_min: 15.0,
            stay_hours: 9.5,
            distance_mean_km: 52.0,
            distance_std_km: 22.0,
            distance_daily_rel_std: 0.10,
            consumption_kwh_per_100km: vec![18.0, 24.0],
            consumption_share: vec![0.8, 0.2],
            charger_amps: vec![10.0, 16.0, 48.0],
            charger_share: vec![0.7, 0.2, 0.1],
            charger_volts: 230.0,
            battery_kwh: 60.0,
            soc_max: 1.0,
            eff_ch: 0.95,
            eff_dch: 0.97,
        }
    }
}

/// One vehicle's draw for the simulated day.
#[derive(Clone, Debug, PartialEq)]
pub struct EvSample {
    /// Clock hour of arrival (may exceed 24 past midnight).
    pub arrival_hour: f64,
    pub departure_hour: f64,
    pub distance_km: f64,
    pub consumption_kwh_per_100km: f64,
    pub charger_kw: f64,
    pub energy_kwh: f64,
}

/// Schedules and device rows for a generated fleet.
#[derive(Clone, Debug, PartialEq)]
pub struct EvSchedules {
    pub periods: usize,
    pub dt_hours: f64,
    pub samples: Vec<EvSample>,
    /// Device rows with `bus` left at zero until placement.
    pub storage: Vec<Storage>,
    pub avbp: BinMatrix,
    pub conch: BinMatrix,
    pub condi: BinMatrix,
    pub avbq: BinMatrix,
    pub soci: DenseMatrix,
    pub socmi: DenseMatrix,
}

fn check_shares(name: &'static str, values: &[f64], shares: &[f64]) -> Result<(), EvError> {
    let sum: f64 = shares.iter().sum();
    if values.is_empty() || values.len() != shares.len() || (sum - 1.0).abs() > 1e-9 || shares.iter().any(|&s| s < 0.0)
    {
        return Err(EvError::Parameter {
            name,
            detail: "classes and shares must be non-empty, equal length, non-negative and sum to one".into(),
        });
    }
    Ok(())
}

fn pick(rng: &mut ChaCha8Rng, shares: &[f64]) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (k, s) in shares.iter().enumerate() {
        acc += s;
        if u < acc {
            return k;
        }
    }
    shares.len() - 1
}

fn normal(mean: f64, std: f64, name: &'static str) -> Result<Normal<f64>, EvError> {
    Normal::new(mean, std).map_err(|e| EvError::Parameter { name, detail: e.to_string() })
}

fn validate(p: &EvGenParams) -> Result<(), EvError> {
    if p.window_hours < p.stay_hours {
        return Err(EvError::WindowTooShort { window_h: p.window_hours, offset_h: p.stay_hours });
    }
    if !(p.dt_hours > 0.0) {
        return Err(EvError::Parameter { name: "dt_hours", detail: "must be positive".into() });
    }
    if !(p.battery_kwh > 0.0) {
        return Err(EvError::Parameter { name: "battery_kwh", detail: "must be positive".into() });
    }
    check_shares("consumption_share", &p.consumption_kwh_per_100km, &p.consumption_share)?;
    check_shares("charger_share", &p.charger_amps, &p.charger_share)
}

/// Draws arrival, distance, consumption class and charger for each vehicle.
pub fn sample_ev_population(p: &EvGenParams) -> Result<Vec<EvSample>, EvError> {
    validate(p)?;
    let habit_arrival = normal(p.arrival_mean_hour, p.arrival_std_min / 60.0, "arrival_std_min")?;
    let daily_arrival = normal(0.0, p.arrival_daily_std_min / 60.0, "arrival_daily_std_min")?;
    let habit_distance = normal(p.distance_mean_km, p.distance_std_km, "distance_std_km")?;
    let daily_distance = normal(0.0, p.distance_daily_rel_std, "distance_daily_rel_std")?;

    let mut pop = ChaCha8Rng::seed_from_u64(p.seed);
    let mut daily = ChaCha8Rng::seed_from_u64(p.seed ^ p.day.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    let mut out = Vec::with_capacity(p.n_ev);
    for _ in 0..p.n_ev {
        let arrival_habit = habit_arrival.sample(&mut pop);
        let distance_habit = habit_distance.sample(&mut pop).max(0.0);
        let cons = p.consumption_kwh_per_100km[pick(&mut pop, &p.consumption_share)];
        let amps = p.charger_amps[pick(&mut pop, &p.charger_share)];

        let arrival = arrival_habit + daily_arrival.sample(&mut daily);
        let distance = (distance_habit * (1.0 + daily_distance.sample(&mut daily))).max(0.0);
        out.push(EvSample {
            arrival_hour: arrival,
            departure_hour: arrival + p.stay_hours,
            distance_km: distance,
            consumption_kwh_per_100km: cons,
            charger_kw: amps * p.charger_volts / 1000.0,
            energy_kwh: distance * cons / 100.0,
        });
    }
    Ok(out)
}

/// Builds availability, connection and state-of-charge matrices.
///
/// A vehicle is present from the step containing its arrival through the
/// step containing its departure, clipped to the window. It may charge but
/// not discharge, arrives with `soci = (E_max − energy) / E_max` (floored at
/// zero) and must reach `SOC_max` by its last connected step.
pub fn generate_ev_schedules(p: &EvGenParams) -> Result<EvSchedules, EvError> {
    let samples = sample_ev_population(p)?;
    let periods = (p.window_hours / p.dt_hours).round() as usize;
    let n = samples.len();
    let mut avbp = BinMatrix::zeros(n, periods);
    let mut soci = DenseMatrix::zeros(n, periods);
    let mut socmi = DenseMatrix::zeros(n, periods);
    let mut storage = Vec::with_capacity(n);
    for (i, s) in samples.iter().enumerate() {
        let a_rel = s.arrival_hour - p.window_start_hour;
        let d_rel = s.departure_hour - p.window_start_hour;
        let step = |h: f64| (h / p.dt_hours + 1e-9).floor();
        if periods > 0 && a_rel < p.window_hours && d_rel >= 0.0 {
            let a = step(a_rel).max(0.0) as usize;
            let d = (step(d_rel) as usize).min(periods - 1);
            for t in a..=d {
                avbp.set(i, t, true);
            }
            let emax = p.battery_kwh;
            soci.set(i, a, ((emax - s.energy_kwh) / emax).clamp(0.0, 1.0));
            socmi.set(i, d, p.soc_max);
            let reachable = soci.get(i, a) + s.charger_kw * p.eff_ch * (d + 1 - a) as f64 * p.dt_hours / emax;
            if reachable < p.soc_max {
                log::warn!("EV {i} cannot reach SOC {:.2} before departure (at most {reachable:.2})", p.soc_max);
            }
        }
        storage.push(Storage {
            bus: 0,
            soc_init: 0.0,
            pch_init: 0.0,
            pdch_init: 0.0,
            qs_init: 0.0,
            soc_max: p.soc_max,
            soc_min: 0.0,
            qs_max: 0.0,
            qs_min: 0.0,
            emax: p.battery_kwh / 1000.0,
            pch_max: s.charger_kw / 1000.0,
            pdch_max: s.charger_kw / 1000.0,
            eff_ch: p.eff_ch,
            eff_dch: p.eff_dch,
        });
    }
    Ok(EvSchedules {
        periods,
        dt_hours: p.dt_hours,
        samples,
        storage,
        conch: avbp.clone(),
        condi: BinMatrix::zeros(n, periods),
        avbq: BinMatrix::zeros(n, periods),
        avbp,
        soci,
        socmi,
    })
}

/// Places a fleet on a network and spreads its demand over the window.
pub fn attach_evs(base: &Case, evs: &EvSchedules, strategy: Strategy, profile: &LoadProfile) -> Case {
    let mut case = profile.apply(&base.with_horizon(evs.periods, evs.dt_hours));
    let buses = distribute_storage(&case, evs.storage.len(), strategy);
    case.storage = evs.storage.iter().zip(buses).map(|(s, bus)| Storage { bus, ..s.clone() }).collect();
    case.schedules = Schedules {
        avbp: evs.avbp.clone(),
        conch: evs.conch.clone(),
        condi: evs.condi.clone(),
        avbq: evs.avbq.clone(),
        avg: case.schedules.avg.clone(),
    };
    case.soci = evs.soci.clone();
    case.socmi = evs.socmi.clone();
    case
}
