//! Case data: network tables, storage devices, horizon, loads and schedules.
//!
//! Quantities are stored in the units of the case file (MW, MVAr, MWh,
//! degrees); conversion to per-unit happens when the optimisation problem is
//! built. Bus references use external bus numbers, resolved through
//! [`Case::bus_index`].

mod builtin;
mod ev;
mod json;
mod profile;
mod strategy;

pub use builtin::{builtin_case, case9, synthetic_case, BUILTIN_NAMES};
pub use ev::{attach_evs, generate_ev_schedules, sample_ev_population, EvGenParams, EvSample, EvSchedules};
pub use json::{ev_fragment_json, load_case, merge_ev_fragment, parse_case, save_case, to_json};
pub use profile::{diurnal_factors, load_profiles, LoadProfile};
pub use strategy::{distribute_storage, Strategy};

use crate::error::CaseError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BusKind {
    Pq,
    Pv,
    Ref,
    Isolated,
}

impl BusKind {
    pub fn code(self) -> u8 {
        match self {
            BusKind::Pq => 1,
            BusKind::Pv => 2,
            BusKind::Ref => 3,
            BusKind::Isolated => 4,
        }
    }

    pub fn from_code(c: u8) -> Option<Self> {
        match c {
            1 => Some(BusKind::Pq),
            2 => Some(BusKind::Pv),
            3 => Some(BusKind::Ref),
            4 => Some(BusKind::Isolated),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Bus {
    pub id: usize,
    pub kind: BusKind,
    pub pd: f64,
    pub qd: f64,
    pub gs: f64,
    pub bs: f64,
    pub area: usize,
    pub vm: f64,
    pub va: f64,
    pub base_kv: f64,
    pub zone: usize,
    pub vmax: f64,
    pub vmin: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Gen {
    pub bus: usize,
    pub pg: f64,
    pub qg: f64,
    pub qmax: f64,
    pub qmin: f64,
    pub vg: f64,
    pub mbase: f64,
    pub in_service: bool,
    pub pmax: f64,
    pub pmin: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Branch {
    pub from: usize,
    pub to: usize,
    pub r: f64,
    pub x: f64,
    pub b: f64,
    pub rate_a: f64,
    pub rate_b: f64,
    pub rate_c: f64,
    /// Off-nominal tap ratio; zero means none.
    pub ratio: f64,
    /// Phase shift in degrees.
    pub angle: f64,
    pub in_service: bool,
    pub angmin: f64,
    pub angmax: f64,
}

/// Polynomial generator cost, coefficients from highest order down, in
/// $/h with power in MW.
#[derive(Clone, Debug, PartialEq)]
pub struct GenCost {
    pub startup: f64,
    pub shutdown: f64,
    pub coeffs: Vec<f64>,
}

impl GenCost {
    /// `(c2, c1, c0)` padded with zeros.
    pub fn quadratic(&self) -> (f64, f64, f64) {
        let mut c = [0.0; 3];
        for (k, v) in self.coeffs.iter().rev().enumerate().take(3) {
            c[k] = *v;
        }
        (c[2], c[1], c[0])
    }

    pub fn eval(&self, p_mw: f64) -> f64 {
        self.coeffs.iter().fold(0.0, |acc, c| acc * p_mw + c)
    }
}

/// One storage device (stationary battery or EV).
#[derive(Clone, Debug, PartialEq)]
pub struct Storage {
    pub bus: usize,
    /// Initial guesses for state of charge, charge, discharge and reactive
    /// injection.
    pub soc_init: f64,
    pub pch_init: f64,
    pub pdch_init: f64,
    pub qs_init: f64,
    pub soc_max: f64,
    pub soc_min: f64,
    /// Reactive injection limits in MVAr.
    pub qs_max: f64,
    pub qs_min: f64,
    /// Energy capacity in MWh.
    pub emax: f64,
    /// Charge and discharge limits in MW.
    pub pch_max: f64,
    pub pdch_max: f64,
    pub eff_ch: f64,
    pub eff_dch: f64,
}

impl Storage {
    /// Stationary battery used by the benchmarks: 100 MWh, 10 MW, 95 % / 97 %.
    pub fn benchmark(bus: usize) -> Self {
        Storage {
            bus,
            soc_init: 0.0,
            pch_init: 0.0,
            pdch_init: 0.0,
            qs_init: 0.0,
            soc_max: 1.0,
            soc_min: 0.0,
            qs_max: 0.0,
            qs_min: 0.0,
            emax: 100.0,
            pch_max: 10.0,
            pdch_max: 10.0,
            eff_ch: 0.95,
            eff_dch: 0.97,
        }
    }
}

/// Row-major dense real matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column_sum(&self, j: usize) -> f64 {
        (0..self.rows).map(|i| self.get(i, j)).sum()
    }
}

/// Row-major 0/1 matrix.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinMatrix {
    pub rows: usize,
    pub cols: usize,
    bits: Vec<bool>,
}

impl BinMatrix {
    pub fn filled(rows: usize, cols: usize, v: bool) -> Self {
        BinMatrix { rows, cols, bits: vec![v; rows * cols] }
    }

    pub fn ones(rows: usize, cols: usize) -> Self {
        Self::filled(rows, cols, true)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::filled(rows, cols, false)
    }

    /// Parses rows of `'0'`/`'1'` characters; `name` labels errors.
    pub fn from_strings<S: AsRef<str>>(name: &str, rows: &[S]) -> Result<Self, CaseError> {
        let cols = rows.first().map_or(0, |r| r.as_ref().chars().count());
        let mut bits = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            let n = r.chars().count();
            if n != cols {
                return Err(CaseError::Shape {
                    matrix: name.to_string(),
                    rows: rows.len(),
                    cols,
                    found_rows: rows.len(),
                    found_cols: n,
                });
            }
            for (j, ch) in r.chars().enumerate() {
                match ch {
                    '0' => bits.push(false),
                    '1' => bits.push(true),
                    other => {
                        return Err(CaseError::InvalidEntry {
                            matrix: name.to_string(),
                            row: i,
                            col: j,
                            detail: format!("expected 0 or 1, found {other:?}"),
                        })
                    }
                }
            }
        }
        Ok(BinMatrix { rows: rows.len(), cols, bits })
    }

    pub fn to_strings(&self) -> Vec<String> {
        (0..self.rows).map(|i| (0..self.cols).map(|j| if self.get(i, j) { '1' } else { '0' }).collect()).collect()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> bool {
        self.bits[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: bool) {
        self.bits[i * self.cols + j] = v;
    }

    pub fn all(&self) -> bool {
        self.bits.iter().all(|&b| b)
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }
}

/// Availability and connection schedules.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Schedules {
    /// Device present on the grid, `n_y × T`.
    pub avbp: BinMatrix,
    /// Charging allowed, `n_y × T`.
    pub conch: BinMatrix,
    /// Discharging allowed, `n_y × T`.
    pub condi: BinMatrix,
    /// Reactive provision allowed, `n_y × T`.
    pub avbq: BinMatrix,
    /// Generator available, `n_g × T`.
    pub avg: BinMatrix,
}

impl Schedules {
    pub fn all_ones(ny: usize, ng: usize, periods: usize) -> Self {
        Schedules {
            avbp: BinMatrix::ones(ny, periods),
            conch: BinMatrix::ones(ny, periods),
            condi: BinMatrix::ones(ny, periods),
            avbq: BinMatrix::ones(ny, periods),
            avg: BinMatrix::ones(ng, periods),
        }
    }

    /// True when every device is present and may charge and discharge in
    /// every period, which keeps the per-period structure identical.
    pub fn storage_static(&self) -> bool {
        self.avbp.all() && self.conch.all() && self.condi.all()
    }
}

/// A complete multi-period case.
#[derive(Clone, Debug, PartialEq)]
pub struct Case {
    pub name: String,
    pub base_mva: f64,
    pub buses: Vec<Bus>,
    pub gens: Vec<Gen>,
    pub branches: Vec<Branch>,
    pub costs: Vec<GenCost>,
    pub storage: Vec<Storage>,
    pub periods: usize,
    pub dt_hours: f64,
    /// Active demand in MW, `n_b × T`.
    pub pd: DenseMatrix,
    /// Reactive demand in MVAr, `n_b × T`.
    pub qd: DenseMatrix,
    pub schedules: Schedules,
    /// Initial state of charge at arrival, `n_y × T`.
    pub soci: DenseMatrix,
    /// Minimum state of charge requirement, `n_y × T`.
    pub socmi: DenseMatrix,
}

impl Case {
    pub fn nb(&self) -> usize {
        self.buses.len()
    }
    pub fn ng(&self) -> usize {
        self.gens.len()
    }
    pub fn nl(&self) -> usize {
        self.branches.len()
    }
    pub fn ny(&self) -> usize {
        self.storage.len()
    }

    /// Internal index of an external bus number.
    pub fn bus_index(&self, id: usize) -> Option<usize> {
        self.buses.iter().position(|b| b.id == id)
    }

    /// Index of the reference bus, falling back to the first bus.
    pub fn slack_index(&self) -> usize {
        self.buses.iter().position(|b| b.kind == BusKind::Ref).unwrap_or(0)
    }

    /// Repeats the static bus demand over `periods` steps and clears storage.
    pub fn with_horizon(&self, periods: usize, dt_hours: f64) -> Case {
        let mut c = self.clone();
        c.periods = periods;
        c.dt_hours = dt_hours;
        c.pd = DenseMatrix::zeros(self.nb(), periods);
        c.qd = DenseMatrix::zeros(self.nb(), periods);
        for (i, b) in self.buses.iter().enumerate() {
            for t in 0..periods {
                c.pd.set(i, t, b.pd);
                c.qd.set(i, t, b.qd);
            }
        }
        c.storage.clear();
        c.schedules = Schedules::all_ones(0, self.ng(), periods);
        c.soci = DenseMatrix::zeros(0, periods);
        c.socmi = DenseMatrix::zeros(0, periods);
        c
    }

    /// Installs storage devices with always-available schedules and zero
    /// initial and minimum state of charge.
    pub fn with_storage(&self, devices: Vec<Storage>) -> Case {
        let mut c = self.clone();
        let ny = devices.len();
        c.storage = devices;
        c.schedules = Schedules { avg: self.schedules.avg.clone(), ..Schedules::all_ones(ny, self.ng(), self.periods) };
        c.soci = DenseMatrix::zeros(ny, self.periods);
        c.socmi = DenseMatrix::zeros(ny, self.periods);
        c
    }

    /// Checks shapes, ranges and references.
    pub fn validate(&self) -> Result<(), CaseError> {
        let (nb, ng, ny, t) = (self.nb(), self.ng(), self.ny(), self.periods);
        if !(self.base_mva > 0.0) {
            return Err(CaseError::Invalid("baseMVA must be positive".into()));
        }
        if nb == 0 {
            return Err(CaseError::Invalid("case has no buses".into()));
        }
        if t == 0 {
            return Err(CaseError::Invalid("horizon T must be at least 1".into()));
        }
        if !(self.dt_hours > 0.0) || !self.dt_hours.is_finite() {
            return Err(CaseError::Invalid("dt must be positive".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for b in &self.buses {
            if !seen.insert(b.id) {
                return Err(CaseError::Invalid(format!("duplicate bus number {}", b.id)));
            }
            if b.vmin > b.vmax {
                return Err(CaseError::Invalid(format!("bus {} has Vmin > Vmax", b.id)));
            }
        }
        for (k, g) in self.gens.iter().enumerate() {
            if self.bus_index(g.bus).is_none() {
                return Err(CaseError::UnknownBus { table: "gen".into(), row: k, bus: g.bus });
            }
            if g.pmin > g.pmax || g.qmin > g.qmax {
                return Err(CaseError::Invalid(format!("generator {k} has inverted limits")));
            }
        }
        for (k, br) in self.branches.iter().enumerate() {
            for bus in [br.from, br.to] {
                if self.bus_index(bus).is_none() {
                    return Err(CaseError::UnknownBus { table: "branch".into(), row: k, bus });
                }
            }
            if br.in_service && br.r == 0.0 && br.x == 0.0 {
                return Err(CaseError::Invalid(format!("branch {k} has zero impedance")));
            }
        }
        if self.costs.len() != ng {
            return Err(CaseError::Shape {
                matrix: "gencost".into(),
                rows: ng,
                cols: 0,
                found_rows: self.costs.len(),
                found_cols: 0,
            });
        }
        for (k, s) in self.storage.iter().enumerate() {
            if self.bus_index(s.bus).is_none() {
                return Err(CaseError::UnknownBus { table: "batt".into(), row: k, bus: s.bus });
            }
            if !(s.emax > 0.0) {
                return Err(CaseError::Invalid(format!("storage {k} has non-positive capacity")));
            }
            if !(s.eff_ch > 0.0 && s.eff_ch <= 1.0 && s.eff_dch > 0.0 && s.eff_dch <= 1.0) {
                return Err(CaseError::Invalid(format!("storage {k} efficiency outside (0, 1]")));
            }
            if s.pch_max < 0.0 || s.pdch_max < 0.0 || s.soc_min > s.soc_max || s.qs_min > s.qs_max {
                return Err(CaseError::Invalid(format!("storage {k} has inconsistent limits")));
            }
        }
        let shapes: [(&str, usize, usize, usize, usize); 4] = [
            ("PD", nb, t, self.pd.rows, self.pd.cols),
            ("QD", nb, t, self.qd.rows, self.qd.cols),
            ("SOCI", ny, t, self.soci.rows, self.soci.cols),
            ("SOCMI", ny, t, self.socmi.rows, self.socmi.cols),
        ];
        let bins = [
            ("AVBP", ny, &self.schedules.avbp),
            ("CONCH", ny, &self.schedules.conch),
            ("CONDI", ny, &self.schedules.condi),
            ("AVBQ", ny, &self.schedules.avbq),
            ("AVG", ng, &self.schedules.avg),
        ];
        for (name, r, c, fr, fc) in shapes.into_iter().chain(bins.iter().map(|(n, r, m)| (*n, *r, t, m.rows, m.cols))) {
            if (r, c) != (fr, fc) {
                return Err(CaseError::Shape { matrix: name.into(), rows: r, cols: c, found_rows: fr, found_cols: fc });
            }
        }
        for i in 0..ny {
            for tt in 0..t {
                let v = self.soci.get(i, tt);
                if !(0.0..=1.0).contains(&v) {
                    return Err(CaseError::InvalidEntry {
                        matrix: "SOCI".into(),
                        row: i,
                        col: tt,
                        detail: format!("{v} outside [0, 1]"),
                    });
                }
                let v = self.socmi.get(i, tt);
                if !(0.0..=self.storage[i].soc_max).contains(&v) {
                    return Err(CaseError::InvalidEntry {
                        matrix: "SOCMI".into(),
                        row: i,
                        col: tt,
                        detail: format!("{v} outside [0, SOCmax]"),
                    });
                }
            }
        }
        for (name, m) in [("PD", &self.pd), ("QD", &self.qd)] {
            if let Some(k) = m.data.iter().position(|v| !v.is_finite()) {
                return Err(CaseError::InvalidEntry {
                    matrix: name.into(),
                    row: k / t,
                    col: k % t,
                    detail: "not finite".into(),
                });
            }
        }
        Ok(())
    }
}
