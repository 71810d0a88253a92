//! Benchmark scenarios, sweeps and their CSV and SVG outputs.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::case::{builtin_case, distribute_storage, load_case, Case, LoadProfile, Storage, Strategy};
use crate::error::{CaseError, SolveError};
use crate::formulation::build_problem;
use crate::ipm::{solve, SolverOptions};
use crate::kkt::Backend;
use crate::par;

/// Loads a case file, or resolves a built-in name when no such file exists.
pub fn resolve_case(name: &str) -> Result<Case, CaseError> {
    let path = Path::new(name);
    if path.is_file() {
        return load_case(path);
    }
    let stem = name.trim_end_matches(".battcase.json").trim_end_matches(".json");
    let stem = Path::new(stem).file_name().and_then(|s| s.to_str()).unwrap_or(stem);
    builtin_case(stem).map_err(|_| CaseError::NotFound(name.to_string()))
}

/// Spreads `base` over `periods` steps with `profile` and places `ny`
/// benchmark batteries by `strategy`.
pub fn build_scenario(
    base: &Case,
    periods: usize,
    dt_hours: f64,
    ny: usize,
    strategy: Strategy,
    profile: &LoadProfile,
) -> Case {
    let c = profile.apply(&base.with_horizon(periods, dt_hours));
    let devices = distribute_storage(&c, ny, strategy).into_iter().map(Storage::benchmark).collect();
    c.with_storage(devices)
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchConfig {
    pub cases: Vec<String>,
    pub periods: Vec<usize>,
    pub ny: Vec<usize>,
    pub backends: Vec<Backend>,
    pub strategies: Vec<Strategy>,
    pub repeats: usize,
    pub seed: u64,
    pub dt_hours: f64,
    pub profile: LoadProfile,
    pub out_dir: PathBuf,
    /// Run cells concurrently, each on its own single-thread pool.
    pub parallel_cells: bool,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            cases: vec!["case9".into()],
            periods: vec![24],
            ny: vec![3],
            backends: Backend::ALL.to_vec(),
            strategies: vec![Strategy::FairDist],
            repeats: 1,
            seed: 1,
            dt_hours: 1.0,
            profile: LoadProfile::default(),
            out_dir: PathBuf::from("bench-out"),
            parallel_cells: false,
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<(), String> {
        let lists = [
            ("cases", self.cases.is_empty()),
            ("T", self.periods.is_empty()),
            ("n_y", self.ny.is_empty()),
            ("backends", self.backends.is_empty()),
            ("strategies", self.strategies.is_empty()),
        ];
        if let Some((name, _)) = lists.iter().find(|(_, empty)| *empty) {
            return Err(format!("sweep list {name} is empty"));
        }
        if self.repeats == 0 {
            return Err("repeats must be at least 1".into());
        }
        if self.periods.contains(&0) {
            return Err("T must be positive".into());
        }
        if !(self.dt_hours > 0.0) {
            return Err("dt must be positive".into());
        }
        Ok(())
    }
}

/// One sweep cell result.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchRecord {
    pub case: String,
    #[serde(rename = "T")]
    pub periods: usize,
    #[serde(rename = "n_y")]
    pub ny: usize,
    pub backend: String,
    pub strategy: String,
    pub iterations: usize,
    pub kkt_seconds: f64,
    pub seconds_per_iteration: f64,
    pub eval_seconds: f64,
    pub peak_factor_nnz: usize,
    pub converged: bool,
    pub objective: f64,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
struct CellKey {
    case: String,
    periods: usize,
    ny: usize,
    backend: Backend,
    strategy: Strategy,
    repeat: usize,
}

/// Solves one scenario and summarizes it.
pub fn run_cell(case_id: &str, scenario: &Case, backend: Backend, strategy: Strategy) -> BenchRecord {
    let mut rec = BenchRecord {
        case: case_id.to_string(),
        periods: scenario.periods,
        ny: scenario.ny(),
        backend: backend.name().into(),
        strategy: strategy.name().into(),
        iterations: 0,
        kkt_seconds: 0.0,
        seconds_per_iteration: 0.0,
        eval_seconds: 0.0,
        peak_factor_nnz: 0,
        converged: false,
        objective: f64::NAN,
    };
    let problem = match build_problem(scenario) {
        Ok(p) => p,
        Err(e) => {
            log::warn!("{case_id} T={} n_y={}: {e}", rec.periods, rec.ny);
            return rec;
        }
    };
    let sol = match solve(&problem, &SolverOptions::with_backend(backend)) {
        Ok(s) => s,
        Err(SolveError::MaxIterations(s)) => *s,
        Err(e) => {
            log::warn!("{case_id} T={} n_y={} {backend}: {e}", rec.periods, rec.ny);
            return rec;
        }
    };
    rec.iterations = sol.iterations;
    rec.kkt_seconds = sol.kkt_seconds();
    rec.seconds_per_iteration = sol.seconds_per_iteration();
    rec.eval_seconds = sol.eval_seconds();
    rec.peak_factor_nnz = sol.peak_factor_nnz;
    rec.converged = sol.converged;
    rec.objective = sol.objective;
    rec
}

/// Runs every cell of the sweep, single-threaded per cell, and returns the
/// records sorted by (case, T, n_y, backend, strategy, repeat).
pub fn run_sweep(cfg: &BenchConfig) -> Result<Vec<BenchRecord>, CaseError> {
    let mut cells = Vec::new();
    let mut bases = Vec::new();
    for name in &cfg.cases {
        bases.push((name.clone(), resolve_case(name)?));
    }
    for (name, _) in &bases {
        for &periods in &cfg.periods {
            for &ny in &cfg.ny {
                for &backend in &cfg.backends {
                    for &strategy in &cfg.strategies {
                        for repeat in 0..cfg.repeats {
                            cells.push(CellKey { case: name.clone(), periods, ny, backend, strategy, repeat });
                        }
                    }
                }
            }
        }
    }
    cells.sort();
    let run = |k: &CellKey| {
        let base = &bases.iter().find(|(n, _)| *n == k.case).expect("resolved case").1;
        let scenario = build_scenario(base, k.periods, cfg.dt_hours, k.ny, k.strategy, &cfg.profile);
        let id = case_label(&k.case);
        par::with_threads(1, || run_cell(&id, &scenario, k.backend, k.strategy))
    };
    let records = if cfg.parallel_cells {
        par::map_range(cells.len(), |i| run(&cells[i]))
    } else {
        cells.iter().map(run).collect()
    };
    Ok(records)
}

fn case_label(name: &str) -> String {
    let file = Path::new(name).file_name().and_then(|s| s.to_str()).unwrap_or(name);
    file.trim_end_matches(".json").trim_end_matches(".battcase").to_string()
}

/// Serializes records as CSV with the record fields as columns.
pub fn records_csv(records: &[BenchRecord]) -> Result<String, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    if records.is_empty() {
        w.write_record([
            "case",
            "T",
            "n_y",
            "backend",
            "strategy",
            "iterations",
            "kkt_seconds",
            "seconds_per_iteration",
            "eval_seconds",
            "peak_factor_nnz",
            "converged",
            "objective",
        ])?;
    }
    for r in records {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

/// Peak factor nonzeros per (case, T, n_y), one column per backend.
pub fn memory_csv(records: &[BenchRecord]) -> String {
    let mut keys: Vec<(String, usize, usize)> = records.iter().map(|r| (r.case.clone(), r.periods, r.ny)).collect();
    keys.sort();
    keys.dedup();
    let peak = |k: &(String, usize, usize), b: Backend| {
        records
            .iter()
            .filter(|r| r.case == k.0 && r.periods == k.1 && r.ny == k.2 && r.backend == b.name())
            .map(|r| r.peak_factor_nnz)
            .max()
    };
    let mut out = String::from("case,T,n_y,schur_peak_nnz,direct_lu_peak_nnz,ratio\n");
    for k in &keys {
        let s = peak(k, Backend::Schur);
        let d = peak(k, Backend::DirectLu);
        let ratio = match (s, d) {
            (Some(s), Some(d)) if s > 0 => format!("{:.4}", d as f64 / s as f64),
            _ => String::new(),
        };
        let cell = |v: Option<usize>| v.map(|v| v.to_string()).unwrap_or_default();
        let _ = writeln!(out, "{},{},{},{},{},{}", k.0, k.1, k.2, cell(s), cell(d), ratio);
    }
    out
}

/// Total KKT time against `T` on log-log axes, one curve per
/// (backend, n_y) pair, for the records of one case.
pub fn time_curves_svg(case: &str, records: &[BenchRecord]) -> String {
    let rows: Vec<&BenchRecord> = records.iter().filter(|r| r.case == case && r.kkt_seconds > 0.0).collect();
    let mut series: Vec<(String, Vec<(f64, f64)>)> = Vec::new();
    for r in &rows {
        let label = format!("{} n_y={}", r.backend, r.ny);
        let point = (r.periods as f64, r.kkt_seconds);
        match series.iter_mut().find(|(l, _)| *l == label) {
            Some((_, pts)) => pts.push(point),
            None => series.push((label, vec![point])),
        }
    }
    for (_, pts) in &mut series {
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    }
    let title = format!("{case}: total KKT time");
    line_chart(&title, "T", "seconds", &series, true)
}

const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf"];

/// Minimal standalone SVG line chart.
pub fn line_chart(
    title: &str,
    xlabel: &str,
    ylabel: &str,
    series: &[(String, Vec<(f64, f64)>)],
    log_axes: bool,
) -> String {
    let (w, h) = (720.0, 440.0);
    let (l, r, t, b) = (70.0, 180.0, 40.0, 50.0);
    let tx = |v: f64| if log_axes { v.max(1e-300).log10() } else { v };
    let pts = series.iter().flat_map(|(_, p)| p.iter().map(|&(x, y)| (tx(x), tx(y))));
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for (x, y) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 - x0 < 1e-12 {
        x1 = x0 + 1.0;
    }
    if y1 - y0 < 1e-12 {
        y1 = y0 + 1.0;
    }
    let px = |x: f64| l + (tx(x) - x0) / (x1 - x0) * (w - l - r);
    let py = |y: f64| h - b - (tx(y) - y0) / (y1 - y0) * (h - t - b);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        (w - r + l) / 2.0,
        escape(title)
    );
    let _ = writeln!(s, r#"<path d="M{l} {t} V{} H{}" fill="none" stroke="black"/>"#, h - b, w - r);
    let fmt_tick = |v: f64| {
        let v = if log_axes { 10f64.powf(v) } else { v };
        if v != 0.0 && (v.abs() >= 1e4 || v.abs() < 1e-2) {
            format!("{v:.2e}")
        } else {
            format!("{}", (v * 1000.0).round() / 1000.0)
        }
    };
    for k in 0..=4 {
        let f = k as f64 / 4.0;
        let xv = x0 + f * (x1 - x0);
        let yv = y0 + f * (y1 - y0);
        let xp = l + f * (w - l - r);
        let yp = h - b - f * (h - t - b);
        let _ = writeln!(s, r#"<text x="{xp}" y="{}" text-anchor="middle">{}</text>"#, h - b + 16.0, fmt_tick(xv));
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, l - 6.0, yp + 4.0, fmt_tick(yv));
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        (w - r + l) / 2.0,
        h - 12.0,
        escape(xlabel)
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        (h - b + t) / 2.0,
        (h - b + t) / 2.0,
        escape(ylabel)
    );
    for (k, (label, p)) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let d: Vec<String> = p.iter().map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
        if !d.is_empty() {
            let _ =
                writeln!(s, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#, d.join(" "));
        }
        let ly = t + 16.0 * k as f64;
        let _ = writeln!(
            s,
            r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#,
            w - r + 10.0,
            w - r + 30.0
        );
        let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, w - r + 36.0, ly + 4.0, escape(label));
    }
    s.push_str("</svg>\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Writes `bench.csv`, `memory.csv` and one SVG per case into `dir`.
pub fn write_outputs(dir: &Path, records: &[BenchRecord]) -> std::io::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let csv = records_csv(records).map_err(std::io::Error::other)?;
    let p = dir.join("bench.csv");
    std::fs::write(&p, csv)?;
    written.push(p);
    let p = dir.join("memory.csv");
    std::fs::write(&p, memory_csv(records))?;
    written.push(p);
    let mut cases: Vec<&str> = records.iter().map(|r| r.case.as_str()).collect();
    cases.dedup();
    for c in cases {
        let p = dir.join(format!("{c}-time.svg"));
        std::fs::write(&p, time_curves_svg(c, records))?;
        written.push(p);
    }
    Ok(written)
}
