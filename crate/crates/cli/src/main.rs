use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use battflow_core::bench::{build_scenario, line_chart, resolve_case, run_sweep, write_outputs, BenchConfig};
use battflow_core::case::{
    ev_fragment_json, generate_ev_schedules, merge_ev_fragment, Case, EvGenParams, LoadProfile, Strategy,
};
use battflow_core::error::{CaseError, SolveError};
use battflow_core::formulation::{build_problem, Group, Problem};
use battflow_core::ipm::{solve, Solution, SolverOptions};
use battflow_core::kkt::Backend;
use battflow_core::par;

#[derive(Parser)]
#[command(name = "battflow", version, about = "Multi-period AC OPF with storage")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one scenario and write a JSON report.
    Solve(SolveArgs),
    /// Run a benchmark sweep and write CSV and SVG outputs.
    Bench(BenchArgs),
    /// Generate an EV fleet as a case fragment.
    Evgen(EvgenArgs),
    /// Parse a case and check that a problem can be built from it.
    Validate(ValidateArgs),
}

#[derive(Args)]
struct SolveArgs {
    /// Case file or built-in name (case9, synth30, synth118).
    #[arg(long)]
    case: String,
    /// Number of steps. Defaults to the case horizon for multi-period
    /// files and to 24 otherwise.
    #[arg(long = "T")]
    periods: Option<usize>,
    #[arg(long, default_value_t = 0)]
    ny: usize,
    #[arg(long, default_value = "schur")]
    backend: Backend,
    #[arg(long, default_value = "fair-dist")]
    strategy: Strategy,
    /// Step length, e.g. `1h`, `15min` or hours as a number.
    #[arg(long, value_parser = parse_dt)]
    dt: Option<f64>,
    /// EV generator parameters (JSON); replaces `--ny` batteries by the fleet.
    #[arg(long)]
    ev_config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Report path; also writes an SVG profile next to it.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    max_iter: Option<usize>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, value_delimiter = ',', default_value = "case9")]
    case: Vec<String>,
    #[arg(long = "T", value_delimiter = ',', default_value = "24")]
    periods: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "3")]
    ny: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "schur,direct-lu")]
    backend: Vec<Backend>,
    #[arg(long, value_delimiter = ',', default_value = "fair-dist")]
    strategy: Vec<Strategy>,
    #[arg(long, default_value_t = 1)]
    repeats: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, value_parser = parse_dt, default_value = "1h")]
    dt: f64,
    #[arg(long, default_value = "bench-out")]
    out: PathBuf,
    /// Run sweep cells concurrently; each timed solve stays single-threaded.
    #[arg(long)]
    parallel_cells: bool,
}

#[derive(Args)]
struct EvgenArgs {
    #[arg(long)]
    ev_config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_parser = parse_dt)]
    dt: Option<f64>,
    #[arg(long)]
    n_ev: Option<usize>,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    case: String,
}

fn parse_dt(s: &str) -> Result<f64, String> {
    let s = s.trim();
    let (num, scale) = if let Some(v) = s.strip_suffix("min") {
        (v, 1.0 / 60.0)
    } else if let Some(v) = s.strip_suffix('h') {
        (v, 1.0)
    } else {
        (s, 1.0)
    };
    let v: f64 = num.trim().parse().map_err(|_| format!("invalid step length {s:?}"))?;
    if !(v > 0.0) {
        return Err(format!("step length must be positive, got {s:?}"));
    }
    Ok(v * scale)
}

fn threads() -> usize {
    std::env::var("BATTFLOW_THREADS").ok().and_then(|v| v.parse().ok()).filter(|&n| n > 0).unwrap_or(1)
}

fn load_ev_params(path: Option<&Path>) -> Result<EvGenParams> {
    match path {
        None => Ok(EvGenParams::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))
        }
    }
}

fn scenario(args: &SolveArgs, base: &Case) -> Result<Case> {
    let profile = LoadProfile::default();
    if let Some(path) = &args.ev_config {
        let mut params = load_ev_params(Some(path))?;
        if let Some(s) = args.seed {
            params.seed = s;
        }
        if let Some(dt) = args.dt {
            params.dt_hours = dt;
        }
        let evs = generate_ev_schedules(&params)?;
        return Ok(merge_ev_fragment(base, &ev_fragment_json(&evs), args.strategy, &profile)?);
    }
    if args.periods.is_none() && base.periods > 1 {
        return Ok(base.clone());
    }
    let dt = args.dt.unwrap_or(1.0);
    let periods = args.periods.unwrap_or(24);
    if periods == 0 {
        bail!("--T must be positive");
    }
    Ok(build_scenario(base, periods, dt, args.ny, args.strategy, &profile))
}

fn report(p: &Problem, s: &Solution) -> serde_json::Value {
    let v = &p.vars;
    let base = p.case.base_mva;
    let series = |g: Group, n: usize, scale: f64| -> Vec<Vec<f64>> {
        (0..v.periods).map(|t| (0..n).map(|k| s.x[v.index(t, g, k)] * scale).collect()).collect()
    };
    json!({
        "case": p.case.name,
        "T": v.periods,
        "n_y": v.ny,
        "dt_hours": p.case.dt_hours,
        "backend": s.backend.name(),
        "converged": s.converged,
        "iterations": s.iterations,
        "objective": s.objective,
        "residuals": s.residuals,
        "kkt_seconds": s.kkt_seconds(),
        "eval_seconds": s.eval_seconds(),
        "seconds_per_iteration": s.seconds_per_iteration(),
        "peak_factor_nnz": s.peak_factor_nnz,
        "pg_mw": series(Group::Pg, v.ng, base),
        "qg_mvar": series(Group::Qg, v.ng, base),
        "soc": series(Group::Soc, v.ny, 1.0),
        "pch_mw": series(Group::Pch, v.ny, base),
        "pdch_mw": series(Group::Pdch, v.ny, base),
        "vm": series(Group::Vm, v.nb, 1.0),
        "va_deg": series(Group::Theta, v.nb, 180.0 / std::f64::consts::PI),
    })
}

fn profile_svg(p: &Problem, s: &Solution) -> String {
    let v = &p.vars;
    let base = p.case.base_mva;
    let sum = |t: usize, g: Group, n: usize| (0..n).map(|k| s.x[v.index(t, g, k)]).sum::<f64>() * base;
    let steps = 0..v.periods;
    let series = vec![
        ("load MW".to_string(), steps.clone().map(|t| (t as f64, p.pd[t].iter().sum::<f64>() * base)).collect()),
        ("generation MW".to_string(), steps.clone().map(|t| (t as f64, sum(t, Group::Pg, v.ng))).collect()),
        (
            "net charge MW".to_string(),
            steps.clone().map(|t| (t as f64, sum(t, Group::Pch, v.ny) - sum(t, Group::Pdch, v.ny))).collect(),
        ),
        (
            "total SOC x100".to_string(),
            steps.map(|t| (t as f64, 100.0 * (0..v.ny).map(|i| s.x[v.index(t, Group::Soc, i)]).sum::<f64>())).collect(),
        ),
    ];
    line_chart(&format!("{}: operating profile", p.case.name), "step", "MW", &series, false)
}

fn cmd_solve(args: SolveArgs) -> Result<ExitCode> {
    let base = resolve_case(&args.case)?;
    let case = scenario(&args, &base)?;
    let problem = build_problem(&case)?;
    let mut opts = SolverOptions::with_backend(args.backend);
    if let Some(m) = args.max_iter {
        opts.max_iter = m;
    }
    let (sol, ok) = match solve(&problem, &opts) {
        Ok(s) => (s, true),
        Err(SolveError::MaxIterations(s)) => (*s, false),
        Err(e) => return Err(e.into()),
    };
    let rep = report(&problem, &sol);
    println!(
        "{} T={} n_y={} backend={} converged={} iterations={} objective={:.6} kkt={:.3}s",
        case.name,
        case.periods,
        case.ny(),
        args.backend,
        sol.converged,
        sol.iterations,
        sol.objective,
        sol.kkt_seconds()
    );
    if let Some(out) = &args.out {
        std::fs::write(out, serde_json::to_string_pretty(&rep)?)
            .with_context(|| format!("writing {}", out.display()))?;
        std::fs::write(out.with_extension("svg"), profile_svg(&problem, &sol))?;
    }
    if !ok {
        eprintln!("no convergence after {} iterations", sol.iterations);
        return Ok(ExitCode::from(1));
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_bench(args: BenchArgs) -> Result<ExitCode> {
    let cfg = BenchConfig {
        cases: args.case,
        periods: args.periods,
        ny: args.ny,
        backends: args.backend,
        strategies: args.strategy,
        repeats: args.repeats,
        seed: args.seed,
        dt_hours: args.dt,
        profile: LoadProfile::default(),
        out_dir: args.out,
        parallel_cells: args.parallel_cells,
    };
    if let Err(e) = cfg.validate() {
        bail!(e);
    }
    let records = run_sweep(&cfg)?;
    for r in &records {
        println!(
            "{} T={} n_y={} {} {}: iterations={} kkt={:.4}s per-iter={:.4}s nnz={} converged={}",
            r.case,
            r.periods,
            r.ny,
            r.backend,
            r.strategy,
            r.iterations,
            r.kkt_seconds,
            r.seconds_per_iteration,
            r.peak_factor_nnz,
            r.converged
        );
    }
    for p in write_outputs(&cfg.out_dir, &records)? {
        println!("wrote {}", p.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_evgen(args: EvgenArgs) -> Result<ExitCode> {
    let mut params = load_ev_params(args.ev_config.as_deref())?;
    if let Some(s) = args.seed {
        params.seed = s;
    }
    if let Some(dt) = args.dt {
        params.dt_hours = dt;
    }
    if let Some(n) = args.n_ev {
        params.n_ev = n;
    }
    let text = ev_fragment_json(&generate_ev_schedules(&params)?);
    match args.out {
        Some(p) => std::fs::write(&p, text).with_context(|| format!("writing {}", p.display()))?,
        None => println!("{text}"),
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_validate(args: ValidateArgs) -> Result<ExitCode> {
    let case = resolve_case(&args.case)?;
    let p = build_problem(&case)?;
    println!(
        "{}: {} buses, {} generators, {} branches, {} storage, T={}, {} variables, {} equalities, {} inequalities",
        case.name,
        case.nb(),
        case.ng(),
        case.nl(),
        case.ny(),
        case.periods,
        p.nx(),
        p.ng_rows(),
        p.nh_rows()
    );
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let run = move || match cli.cmd {
        Command::Solve(a) => cmd_solve(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Evgen(a) => cmd_evgen(a),
        Command::Validate(a) => cmd_validate(a),
    };
    match par::with_threads(threads(), run) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            if matches!(e.downcast_ref::<CaseError>(), Some(CaseError::NotFound(_))) {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
