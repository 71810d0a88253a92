//! The `*.battcase.json` format.
//!
//! Network tables follow the MATPOWER column layout (`bus`, `gen`, `branch`,
//! `gencost`) with a 14-column `batt` table. Demand series are dense
//! `n_b × T` nested arrays in MW/MVAr, binary schedules are one string of
//! `0`/`1` per row, and `soci`/`socmi` are sparse `[row, period, value]`
//! triplets with zero-based indices. Missing demand series repeat the static
//! bus demand, missing schedules default to all ones and missing state of
//! charge data defaults to zero.

use serde::{Deserialize, Serialize};
use std::path::Path;

use super::{
    attach_evs, BinMatrix, Branch, Bus, BusKind, Case, DenseMatrix, EvSchedules, Gen, GenCost, LoadProfile, Schedules,
    Storage, Strategy,
};
use crate::error::CaseError;

#[derive(Serialize, Deserialize, Debug)]
struct CaseDoc {
    #[serde(default)]
    name: String,
    #[serde(rename = "baseMVA")]
    base_mva: f64,
    bus: Vec<Vec<f64>>,
    gen: Vec<Vec<f64>>,
    branch: Vec<Vec<f64>>,
    gencost: Vec<Vec<f64>>,
    #[serde(default)]
    batt: Vec<Vec<f64>>,
    #[serde(rename = "T", default, skip_serializing_if = "Option::is_none")]
    periods: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pd: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    qd: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    avbp: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    conch: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    condi: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    avbq: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    avg: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    soci: Option<Vec<(usize, usize, f64)>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    socmi: Option<Vec<(usize, usize, f64)>>,
}

fn need(table: &str, row: usize, r: &[f64], n: usize) -> Result<(), CaseError> {
    if r.len() < n {
        return Err(CaseError::Shape {
            matrix: table.to_uppercase(),
            rows: row + 1,
            cols: n,
            found_rows: row + 1,
            found_cols: r.len(),
        });
    }
    Ok(())
}

fn as_index(table: &str, row: usize, col: usize, v: f64) -> Result<usize, CaseError> {
    if v < 0.0 || v.fract() != 0.0 || !v.is_finite() {
        return Err(CaseError::InvalidEntry {
            matrix: table.to_uppercase(),
            row,
            col,
            detail: format!("expected a non-negative integer, found {v}"),
        });
    }
    Ok(v as usize)
}

fn dense(name: &str, rows: usize, cols: usize, data: &[Vec<f64>]) -> Result<DenseMatrix, CaseError> {
    let bad_cols = data.iter().find(|r| r.len() != cols).map(|r| r.len());
    if data.len() != rows || bad_cols.is_some() {
        return Err(CaseError::Shape {
            matrix: name.into(),
            rows,
            cols,
            found_rows: data.len(),
            found_cols: bad_cols.unwrap_or(cols),
        });
    }
    Ok(DenseMatrix { rows, cols, data: data.iter().flatten().copied().collect() })
}

fn triplets(name: &str, rows: usize, cols: usize, data: &[(usize, usize, f64)]) -> Result<DenseMatrix, CaseError> {
    let mut m = DenseMatrix::zeros(rows, cols);
    for &(i, t, v) in data {
        if i >= rows || t >= cols {
            return Err(CaseError::InvalidEntry {
                matrix: name.into(),
                row: i,
                col: t,
                detail: format!("index outside {rows}x{cols}"),
            });
        }
        m.set(i, t, v);
    }
    Ok(m)
}

fn bins(name: &str, rows: usize, cols: usize, data: &Option<Vec<String>>) -> Result<BinMatrix, CaseError> {
    match data {
        None => Ok(BinMatrix::ones(rows, cols)),
        Some(v) => {
            let m = BinMatrix::from_strings(name, v)?;
            if m.rows != rows || (rows > 0 && m.cols != cols) {
                return Err(CaseError::Shape {
                    matrix: name.into(),
                    rows,
                    cols,
                    found_rows: m.rows,
                    found_cols: m.cols,
                });
            }
            Ok(if rows == 0 { BinMatrix::ones(0, cols) } else { m })
        }
    }
}

impl CaseDoc {
    fn into_case(self) -> Result<Case, CaseError> {
        let mut buses = Vec::with_capacity(self.bus.len());
        for (k, r) in self.bus.iter().enumerate() {
            need("bus", k, r, 13)?;
            let code = as_index("bus", k, 1, r[1])?;
            let kind = BusKind::from_code(code as u8).ok_or_else(|| CaseError::InvalidEntry {
                matrix: "BUS".into(),
                row: k,
                col: 1,
                detail: format!("unknown bus type {code}"),
            })?;
            buses.push(Bus {
                id: as_index("bus", k, 0, r[0])?,
                kind,
                pd: r[2],
                qd: r[3],
                gs: r[4],
                bs: r[5],
                area: as_index("bus", k, 6, r[6])?,
                vm: r[7],
                va: r[8],
                base_kv: r[9],
                zone: as_index("bus", k, 10, r[10])?,
                vmax: r[11],
                vmin: r[12],
            });
        }
        let mut gens = Vec::with_capacity(self.gen.len());
        for (k, r) in self.gen.iter().enumerate() {
            need("gen", k, r, 10)?;
            gens.push(Gen {
                bus: as_index("gen", k, 0, r[0])?,
                pg: r[1],
                qg: r[2],
                qmax: r[3],
                qmin: r[4],
                vg: r[5],
                mbase: r[6],
                in_service: r[7] > 0.0,
                pmax: r[8],
                pmin: r[9],
            });
        }
        let mut branches = Vec::with_capacity(self.branch.len());
        for (k, r) in self.branch.iter().enumerate() {
            need("branch", k, r, 11)?;
            branches.push(Branch {
                from: as_index("branch", k, 0, r[0])?,
                to: as_index("branch", k, 1, r[1])?,
                r: r[2],
                x: r[3],
                b: r[4],
                rate_a: r[5],
                rate_b: r[6],
                rate_c: r[7],
                ratio: r[8],
                angle: r[9],
                in_service: r[10] > 0.0,
                angmin: r.get(11).copied().unwrap_or(-360.0),
                angmax: r.get(12).copied().unwrap_or(360.0),
            });
        }
        let mut costs = Vec::with_capacity(self.gencost.len());
        for (k, r) in self.gencost.iter().enumerate() {
            need("gencost", k, r, 4)?;
            let model = as_index("gencost", k, 0, r[0])?;
            if model != 2 {
                return Err(CaseError::Unsupported(format!(
                    "gencost row {k}: only polynomial costs (model 2) are supported"
                )));
            }
            let n = as_index("gencost", k, 3, r[3])?;
            need("gencost", k, r, 4 + n)?;
            if n > 3 {
                return Err(CaseError::Unsupported(format!(
                    "gencost row {k}: polynomial of degree {} exceeds quadratic",
                    n.saturating_sub(1)
                )));
            }
            costs.push(GenCost { startup: r[1], shutdown: r[2], coeffs: r[4..4 + n].to_vec() });
        }
        let storage = parse_batt(&self.batt)?;
        let (nb, ng, ny) = (buses.len(), gens.len(), storage.len());
        let t = self.periods.unwrap_or(1);
        let pd = match &self.pd {
            Some(d) => dense("PD", nb, t, d)?,
            None => repeat(buses.iter().map(|b| b.pd), nb, t),
        };
        let qd = match &self.qd {
            Some(d) => dense("QD", nb, t, d)?,
            None => repeat(buses.iter().map(|b| b.qd), nb, t),
        };
        let schedules = Schedules {
            avbp: bins("AVBP", ny, t, &self.avbp)?,
            conch: bins("CONCH", ny, t, &self.conch)?,
            condi: bins("CONDI", ny, t, &self.condi)?,
            avbq: bins("AVBQ", ny, t, &self.avbq)?,
            avg: bins("AVG", ng, t, &self.avg)?,
        };
        let soci = triplets("SOCI", ny, t, self.soci.as_deref().unwrap_or(&[]))?;
        let socmi = triplets("SOCMI", ny, t, self.socmi.as_deref().unwrap_or(&[]))?;
        let case = Case {
            name: self.name,
            base_mva: self.base_mva,
            buses,
            gens,
            branches,
            costs,
            storage,
            periods: t,
            dt_hours: self.dt.unwrap_or(1.0),
            pd,
            qd,
            schedules,
            soci,
            socmi,
        };
        case.validate()?;
        Ok(case)
    }

    fn from_case(c: &Case) -> CaseDoc {
        let rows = |m: &DenseMatrix| (0..m.rows).map(|i| m.row(i).to_vec()).collect::<Vec<_>>();
        CaseDoc {
            name: c.name.clone(),
            base_mva: c.base_mva,
            bus: c
                .buses
                .iter()
                .map(|b| {
                    vec![
                        b.id as f64,
                        b.kind.code() as f64,
                        b.pd,
                        b.qd,
                        b.gs,
                        b.bs,
                        b.area as f64,
                        b.vm,
                        b.va,
                        b.base_kv,
                        b.zone as f64,
                        b.vmax,
                        b.vmin,
                    ]
                })
                .collect(),
            gen: c
                .gens
                .iter()
                .map(|g| {
                    vec![
                        g.bus as f64,
                        g.pg,
                        g.qg,
                        g.qmax,
                        g.qmin,
                        g.vg,
                        g.mbase,
                        if g.in_service { 1.0 } else { 0.0 },
                        g.pmax,
                        g.pmin,
                    ]
                })
                .collect(),
            branch: c
                .branches
                .iter()
                .map(|b| {
                    vec![
                        b.from as f64,
                        b.to as f64,
                        b.r,
                        b.x,
                        b.b,
                        b.rate_a,
                        b.rate_b,
                        b.rate_c,
                        b.ratio,
                        b.angle,
                        if b.in_service { 1.0 } else { 0.0 },
                        b.angmin,
                        b.angmax,
                    ]
                })
                .collect(),
            gencost: c
                .costs
                .iter()
                .map(|g| {
                    let mut r = vec![2.0, g.startup, g.shutdown, g.coeffs.len() as f64];
                    r.extend_from_slice(&g.coeffs);
                    r
                })
                .collect(),
            batt: c.storage.iter().map(batt_row).collect(),
            periods: Some(c.periods),
            dt: Some(c.dt_hours),
            pd: Some(rows(&c.pd)),
            qd: Some(rows(&c.qd)),
            avbp: Some(c.schedules.avbp.to_strings()),
            conch: Some(c.schedules.conch.to_strings()),
            condi: Some(c.schedules.condi.to_strings()),
            avbq: Some(c.schedules.avbq.to_strings()),
            avg: Some(c.schedules.avg.to_strings()),
            soci: Some(nonzeros(&c.soci)),
            socmi: Some(nonzeros(&c.socmi)),
        }
    }
}

fn parse_batt(rows: &[Vec<f64>]) -> Result<Vec<Storage>, CaseError> {
    let mut storage = Vec::with_capacity(rows.len());
    for (k, r) in rows.iter().enumerate() {
        need("batt", k, r, 14)?;
        storage.push(Storage {
            bus: as_index("batt", k, 0, r[0])?,
            soc_init: r[1],
            pch_init: r[2],
            pdch_init: r[3],
            qs_init: r[4],
            soc_max: r[5],
            soc_min: r[6],
            qs_max: r[7],
            qs_min: r[8],
            emax: r[9],
            pch_max: r[10],
            pdch_max: r[11],
            eff_ch: r[12],
            eff_dch: r[13],
        });
    }
    Ok(storage)
}

fn batt_row(s: &Storage) -> Vec<f64> {
    vec![
        s.bus as f64,
        s.soc_init,
        s.pch_init,
        s.pdch_init,
        s.qs_init,
        s.soc_max,
        s.soc_min,
        s.qs_max,
        s.qs_min,
        s.emax,
        s.pch_max,
        s.pdch_max,
        s.eff_ch,
        s.eff_dch,
    ]
}

fn nonzeros(m: &DenseMatrix) -> Vec<(usize, usize, f64)> {
    let mut v = Vec::new();
    for i in 0..m.rows {
        for t in 0..m.cols {
            let x = m.get(i, t);
            if x != 0.0 {
                v.push((i, t, x));
            }
        }
    }
    v
}

/// EV part of a case document: device rows with unassigned buses plus the
/// schedule and state-of-charge matrices.
#[derive(Serialize, Deserialize, Debug)]
struct EvFragment {
    #[serde(rename = "T")]
    periods: usize,
    dt: f64,
    batt: Vec<Vec<f64>>,
    avbp: Vec<String>,
    conch: Vec<String>,
    condi: Vec<String>,
    avbq: Vec<String>,
    soci: Vec<(usize, usize, f64)>,
    socmi: Vec<(usize, usize, f64)>,
}

/// Serializes a generated fleet as a case fragment.
pub fn ev_fragment_json(evs: &EvSchedules) -> String {
    let doc = EvFragment {
        periods: evs.periods,
        dt: evs.dt_hours,
        batt: evs.storage.iter().map(batt_row).collect(),
        avbp: evs.avbp.to_strings(),
        conch: evs.conch.to_strings(),
        condi: evs.condi.to_strings(),
        avbq: evs.avbq.to_strings(),
        soci: nonzeros(&evs.soci),
        socmi: nonzeros(&evs.socmi),
    };
    serde_json::to_string_pretty(&doc).expect("fragment serializes")
}

/// Places the fleet of a fragment on `base` and validates the result.
pub fn merge_ev_fragment(
    base: &Case,
    fragment: &str,
    strategy: Strategy,
    profile: &LoadProfile,
) -> Result<Case, CaseError> {
    let f: EvFragment = serde_json::from_str(fragment)?;
    let storage = parse_batt(&f.batt)?;
    let (ny, t) = (storage.len(), f.periods);
    let evs = EvSchedules {
        periods: t,
        dt_hours: f.dt,
        samples: Vec::new(),
        storage,
        avbp: bins("AVBP", ny, t, &Some(f.avbp))?,
        conch: bins("CONCH", ny, t, &Some(f.conch))?,
        condi: bins("CONDI", ny, t, &Some(f.condi))?,
        avbq: bins("AVBQ", ny, t, &Some(f.avbq))?,
        soci: triplets("SOCI", ny, t, &f.soci)?,
        socmi: triplets("SOCMI", ny, t, &f.socmi)?,
    };
    let case = attach_evs(base, &evs, strategy, profile);
    case.validate()?;
    Ok(case)
}

fn repeat(v: impl Iterator<Item = f64>, rows: usize, cols: usize) -> DenseMatrix {
    let mut m = DenseMatrix::zeros(rows, cols);
    for (i, x) in v.enumerate() {
        for t in 0..cols {
            m.set(i, t, x);
        }
    }
    m
}

/// Parses and validates a case document.
pub fn parse_case(text: &str) -> Result<Case, CaseError> {
    let doc: CaseDoc = serde_json::from_str(text)?;
    doc.into_case()
}

/// Serializes a case; [`parse_case`] inverts this exactly.
pub fn to_json(case: &Case) -> String {
    serde_json::to_string_pretty(&CaseDoc::from_case(case)).expect("case serializes")
}

/// Reads a case file, reporting a missing file as [`CaseError::NotFound`].
pub fn load_case(path: impl AsRef<Path>) -> Result<Case, CaseError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => CaseError::NotFound(path.display().to_string()),
        _ => CaseError::Io(e),
    })?;
    parse_case(&text)
}

pub fn save_case(case: &Case, path: impl AsRef<Path>) -> Result<(), CaseError> {
    std::fs::write(path, to_json(case))?;
    Ok(())
}
