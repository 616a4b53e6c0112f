//! Command-line front end: `qplife <subcommand> [flags]`.
//!
//! Every parameter is resolved as flag, then config file (`--config`), then
//! built-in default. The effective configuration is printed and stored in a
//! JSON sidecar next to each CSV. Config files are either flat `key = value`
//! lines (`#` comments allowed, lists comma-separated) or one flat JSON
//! object; keys are the long flag names.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use serde::Serialize;
use serde_json::{json, Value};

use crate::analysis::{
    collapse_table, extract_rate, fit_scaling_with, CollapseSeries, FitOptions, WindowPolicy,
};
use crate::classical::{autocorrelator, EnsembleSpec, Hopping};
use crate::error::{Error, Result};
use crate::fgr::{
    classify_divergences, fgr_rate, log_slope, log_spaced, Channel, FgrRequest, SearchOptions, Statistics,
    Temperature,
};
use crate::ladder::{ladder_asymptotics, ladder_rate, MIN_RESOLUTION};
use crate::melonic::{solve, solve_until_decayed, Frame, Integrator, KernelMode, SolverConfig};
use crate::model::{band_omega, Dispersion};
use crate::verify;

/// Identifier of the sidecar layout; bump on incompatible changes.
pub const SIDECAR_SCHEMA: &str = "qplife-run/1";

#[derive(Debug, Parser)]
#[command(name = "qplife", version, about = "Quasiparticle decay rates in weakly interacting 1d lattice models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Flat key=value or JSON config file; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; falls back to QPLIFE_THREADS, then all cores.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Golden-rule rate versus broadening, with the stationary-point classification.
    Fgr(FgrArgs),
    /// Resummed ladder rate and its small-Delta asymptotics.
    Ladder(LadderArgs),
    /// Melonic memory-matrix evolution of G_k(t) and |Sigma_k(t)|.
    Melonic(MelonicArgs),
    /// Classical Floquet Monte Carlo autocorrelator C_k(t).
    Classical(ClassicalArgs),
    /// Decay rates from time series and the Delta^2 vs Delta^2 log Delta^-2 comparison.
    Fit(FitArgs),
    /// Rescaled time tables and the collapse metric.
    Collapse(CollapseArgs),
    /// Built-in oracle checks.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
struct FgrArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    k: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    /// Sites of the momentum grid.
    #[arg(long = "L")]
    l: Option<usize>,
    #[arg(long)]
    eta_max: Option<f64>,
    #[arg(long)]
    eta_min: Option<f64>,
    #[arg(long)]
    n_eta: Option<usize>,
    /// fermion | boson
    #[arg(long)]
    statistics: Option<String>,
    /// Inverse temperature; omitted means infinite temperature.
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    mu: Option<f64>,
    /// cosine | staggered-lower | staggered-upper | table
    #[arg(long)]
    dispersion: Option<String>,
    /// Staggered potential for the staggered bands.
    #[arg(long)]
    h: Option<f64>,
    /// Two-column `k eps` table for `--dispersion table`.
    #[arg(long)]
    table: Option<String>,
}

#[derive(Debug, Args)]
struct LadderArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    k: Option<f64>,
    /// One or more couplings, comma-separated.
    #[arg(long, value_delimiter = ',')]
    delta: Vec<f64>,
    #[arg(long)]
    resolution: Option<usize>,
}

#[derive(Debug, Args)]
struct MelonicArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long = "L")]
    l: Option<usize>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    h: Option<f64>,
    #[arg(long)]
    tmax: Option<f64>,
    /// Reported momenta, comma-separated.
    #[arg(long, value_delimiter = ',')]
    k: Vec<f64>,
    /// self-consistent | frozen
    #[arg(long)]
    mode: Option<String>,
    /// trapezoid | rectangle
    #[arg(long)]
    integrator: Option<String>,
    /// rotating | lab (frame of the reported G)
    #[arg(long)]
    frame: Option<String>,
    /// Stop at 1.5x the time |G| first falls below this fraction (0 disables).
    #[arg(long)]
    stop_below: Option<f64>,
    #[arg(long)]
    norm_tolerance: Option<f64>,
}

#[derive(Debug, Args)]
struct ClassicalArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long = "L")]
    l: Option<usize>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    periods: Option<usize>,
    /// Momentum grid indices j (k = 2 pi j / L), comma-separated.
    #[arg(long, value_delimiter = ',')]
    k_index: Vec<usize>,
    /// Time origins averaged per trajectory.
    #[arg(long)]
    origins: Option<usize>,
}

#[derive(Debug, Args)]
struct FitArgs {
    #[command(flatten)]
    common: Common,
    /// CSV files: time series from `melonic`/`classical`, or tables with Delta and rate columns.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    input: Vec<PathBuf>,
    /// Momentum to select from multi-k time series.
    #[arg(long)]
    k: Option<f64>,
    #[arg(long)]
    upper: Option<f64>,
    #[arg(long)]
    lower: Option<f64>,
    #[arg(long)]
    min_span: Option<f64>,
    #[arg(long)]
    min_points: Option<usize>,
}

#[derive(Debug, Args)]
struct CollapseArgs {
    #[command(flatten)]
    common: Common,
    /// Time-series CSV files from `melonic` or `classical`.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    input: Vec<PathBuf>,
    #[arg(long)]
    k: Option<f64>,
    /// log (1/tau = D^2 log D^-2) | quadratic (1/tau = D^2)
    #[arg(long)]
    tau: Option<String>,
    /// G | Sigma (melonic only)
    #[arg(long)]
    value: Option<String>,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[command(flatten)]
    common: Common,
}

/// Parses `argv` (including the program name), runs the subcommand and
/// returns the process exit code: 0 success, 2 invalid configuration,
/// 3 numerical failure.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("qplife: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Fgr(a) => run_fgr(a),
        Command::Ladder(a) => run_ladder(a),
        Command::Melonic(a) => run_melonic(a),
        Command::Classical(a) => run_classical(a),
        Command::Fit(a) => run_fit(a),
        Command::Collapse(a) => run_collapse(a),
        Command::Verify(a) => run_verify(a),
    }
}

/// Flag > config file > default resolution with an audit trail.
struct Resolver {
    file: BTreeMap<String, String>,
    effective: BTreeMap<String, Value>,
}

impl Resolver {
    fn new(path: Option<&Path>) -> Result<Self> {
        let file = match path {
            Some(p) => parse_config(&fs::read_to_string(p)?)?,
            None => BTreeMap::new(),
        };
        Ok(Self { file, effective: BTreeMap::new() })
    }

    fn file_value<T: FromStr>(&mut self, key: &str) -> Result<Option<T>>
    where
        T::Err: Display,
    {
        match self.file.remove(key) {
            None => Ok(None),
            Some(s) => s
                .parse()
                .map(Some)
                .map_err(|e| Error::invalid(format!("config key `{key}` = `{s}`: {e}"))),
        }
    }

    fn value<T>(&mut self, key: &str, flag: Option<T>, default: T) -> Result<T>
    where
        T: FromStr + Serialize + Clone,
        T::Err: Display,
    {
        let file = self.file_value(key)?;
        let v = flag.or(file).unwrap_or(default);
        self.effective.insert(key.to_string(), serde_json::to_value(v.clone())?);
        Ok(v)
    }

    fn optional<T>(&mut self, key: &str, flag: Option<T>) -> Result<Option<T>>
    where
        T: FromStr + Serialize + Clone,
        T::Err: Display,
    {
        let file = self.file_value(key)?;
        let v = flag.or(file);
        self.effective.insert(key.to_string(), serde_json::to_value(v.clone())?);
        Ok(v)
    }

    fn list<T>(&mut self, key: &str, flag: Vec<T>, default: Vec<T>) -> Result<Vec<T>>
    where
        T: FromStr + Serialize + Clone,
        T::Err: Display,
    {
        let file = match self.file.remove(key) {
            None => None,
            Some(s) => Some(
                s.split(',')
                    .map(str::trim)
                    .filter(|x| !x.is_empty())
                    .map(|x| x.parse().map_err(|e| Error::invalid(format!("config key `{key}` item `{x}`: {e}"))))
                    .collect::<Result<Vec<T>>>()?,
            ),
        };
        let v = if !flag.is_empty() { flag } else { file.unwrap_or(default) };
        self.effective.insert(key.to_string(), serde_json::to_value(v.clone())?);
        Ok(v)
    }

    /// Rejects config keys nobody asked for, then echoes the configuration.
    fn finish(self, command: &str) -> Result<Value> {
        if let Some(k) = self.file.keys().next() {
            return Err(Error::invalid(format!("unknown config key `{k}` for `{command}`")));
        }
        let v = serde_json::to_value(self.effective)?;
        println!("effective config ({command}): {v}");
        Ok(v)
    }
}

/// Parses a flat key=value or JSON config into strings.
fn parse_config(text: &str) -> Result<BTreeMap<String, String>> {
    let trimmed = text.trim_start();
    let mut map = BTreeMap::new();
    if trimmed.starts_with('{') {
        let obj: serde_json::Map<String, Value> = serde_json::from_str(trimmed)?;
        for (k, v) in obj {
            let s = match v {
                Value::String(s) => s,
                Value::Number(n) => n.to_string(),
                Value::Bool(b) => b.to_string(),
                Value::Array(items) => items
                    .iter()
                    .map(|x| match x {
                        Value::String(s) => Ok(s.clone()),
                        Value::Number(n) => Ok(n.to_string()),
                        _ => Err(Error::invalid(format!("config key `{k}`: list items must be scalars"))),
                    })
                    .collect::<Result<Vec<_>>>()?
                    .join(","),
                Value::Null => continue,
                Value::Object(_) => return Err(Error::invalid(format!("config key `{k}`: nested objects are not allowed"))),
            };
            map.insert(k, s);
        }
        return Ok(map);
    }
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::invalid(format!("config line {}: expected key = value", n + 1)))?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(map)
}

fn setup_threads(common: &Common) -> Result<usize> {
    let requested = match common.threads {
        Some(n) => Some(n),
        None => match std::env::var("QPLIFE_THREADS") {
            Ok(s) => Some(s.trim().parse().map_err(|_| Error::invalid(format!("QPLIFE_THREADS = `{s}` is not a count")))?),
            Err(_) => None,
        },
    };
    if let Some(n) = requested {
        if n == 0 {
            return Err(Error::invalid("thread count must be at least 1"));
        }
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(rayon::current_num_threads())
}

/// Output location plus run bookkeeping shared by all subcommands.
struct Run {
    command: &'static str,
    dir: PathBuf,
    config: Value,
    threads: usize,
    start: Instant,
    outputs: Vec<String>,
}

impl Run {
    fn start(command: &'static str, common: &Common, resolver: Resolver) -> Result<(Self, Value)> {
        let threads = setup_threads(common)?;
        let config = resolver.finish(command)?;
        let dir = common.out.clone().unwrap_or_else(|| PathBuf::from("qplife-out"));
        fs::create_dir_all(&dir)?;
        let run = Self { command, dir, config: config.clone(), threads, start: Instant::now(), outputs: Vec::new() };
        Ok((run, config))
    }

    fn write_csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<PathBuf> {
        let path = self.dir.join(name);
        let mut w = csv::Writer::from_path(&path).map_err(csv_error)?;
        w.write_record(header).map_err(csv_error)?;
        for r in rows {
            w.write_record(r).map_err(csv_error)?;
        }
        w.flush()?;
        self.outputs.push(name.to_string());
        println!("wrote {}", path.display());
        Ok(path)
    }

    /// Writes `<command>.json` describing every CSV of this run.
    fn finish(self, results: Value) -> Result<()> {
        let sidecar = json!({
            "schema": SIDECAR_SCHEMA,
            "version": concat!("qplife ", env!("CARGO_PKG_VERSION")),
            "command": self.command,
            "config": self.config,
            "threads": self.threads,
            "outputs": self.outputs,
            "wall_time_s": self.start.elapsed().as_secs_f64(),
            "results": results,
        });
        let path = self.dir.join(format!("{}.json", self.command));
        fs::write(&path, serde_json::to_string_pretty(&sidecar)? + "\n")?;
        println!("wrote {}", path.display());
        Ok(())
    }
}

fn csv_error(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e.to_string()))
}

/// 17 significant digits, round-trip exact.
fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn choice<'a>(key: &str, value: &str, options: &[&'a str]) -> Result<&'a str> {
    options
        .iter()
        .find(|o| o.eq_ignore_ascii_case(value))
        .copied()
        .ok_or_else(|| Error::invalid(format!("{key} must be one of {options:?}, got `{value}`")))
}

fn run_fgr(a: FgrArgs) -> Result<()> {
    let mut r = Resolver::new(a.common.config.as_deref())?;
    let k = r.value("k", a.k, 0.0)?;
    let delta = r.value("delta", a.delta, 1.0)?;
    let l = r.value("L", a.l, 2048)?;
    let eta_max = r.value("eta-max", a.eta_max, 1e-1)?;
    let eta_min = r.value("eta-min", a.eta_min, 1e-3)?;
    let n_eta = r.value("n-eta", a.n_eta, 9)?;
    let statistics = r.value("statistics", a.statistics, "fermion".to_string())?;
    let beta = r.optional("beta", a.beta)?;
    let mu = r.value("mu", a.mu, 0.0)?;
    let dispersion = r.value("dispersion", a.dispersion, "cosine".to_string())?;
    let h = r.value("h", a.h, 0.0)?;
    let table = r.optional("table", a.table)?;
    let (mut run, _) = Run::start("fgr", &a.common, r)?;

    let statistics = match choice("statistics", &statistics, &["fermion", "boson"])? {
        "fermion" => Statistics::Fermion,
        _ => Statistics::Boson,
    };
    let temperature = match beta {
        Some(beta) => Temperature::Finite { beta, mu },
        None => Temperature::Infinite,
    };
    let dispersion = match choice("dispersion", &dispersion, &["cosine", "staggered-lower", "staggered-upper", "table"])? {
        "cosine" => Dispersion::Cosine,
        "staggered-lower" => Dispersion::Staggered { h, upper: false },
        "staggered-upper" => Dispersion::Staggered { h, upper: true },
        _ => {
            let path = table.ok_or_else(|| Error::invalid("--dispersion table needs --table FILE"))?;
            Dispersion::from_table_text(&fs::read_to_string(path)?)?
        }
    };
    if !(eta_max > eta_min && eta_min > 0.0) || n_eta == 0 {
        return Err(Error::invalid("need eta-max > eta-min > 0 and n-eta >= 1"));
    }
    let base = FgrRequest { k, delta, eta: eta_max, statistics, temperature, n_sites: l, dispersion: dispersion.clone() };
    base.validate()?;
    let etas = log_spaced(eta_max, eta_min, n_eta);
    let (samples, slope) = if n_eta >= 4 {
        let s = log_slope(&base, &etas)?;
        (s.samples.clone(), Some(s))
    } else {
        let samples =
            etas.iter().map(|&eta| Ok((eta, fgr_rate(&FgrRequest { eta, ..base.clone() })?))).collect::<Result<Vec<_>>>()?;
        (samples, None)
    };
    let fit_cols = |s: &Option<crate::fgr::LogSlope>| match s {
        Some(s) => [num(s.c0), num(s.c1), num(s.r2)],
        None => [String::new(), String::new(), String::new()],
    };
    let rows: Vec<Vec<String>> = samples
        .iter()
        .map(|&(eta, rate)| {
            let mut row = vec![num(k), num(delta), num(eta), num(rate)];
            row.extend(fit_cols(&slope));
            row
        })
        .collect();
    run.write_csv("fgr.csv", &["k", "Delta", "eta", "rate", "c0", "c1", "r2"], &rows)?;

    let report = classify_divergences(&[dispersion], k, &[Channel::single_band()], &SearchOptions::default())?;
    let point_rows: Vec<Vec<String>> = report
        .points
        .iter()
        .map(|p| {
            vec![
                num(k),
                num(p.q),
                num(p.p),
                p.hessian_signature.clone(),
                num(p.weight),
                serde_json::to_value(p.status).map(|v| v.as_str().unwrap_or("").to_string()).unwrap_or_default(),
            ]
        })
        .collect();
    run.write_csv("fgr_points.csv", &["k", "q", "p", "hessian", "weight", "status"], &point_rows)?;
    if let Some(s) = &slope {
        println!("1/tau(eta) = {:.6} + {:.6} log(1/eta), R^2 = {:.6}", s.c0, s.c1, s.r2);
    }
    for p in &report.points {
        println!("stationary point (q, p) = ({:.10}, {:.10}): {:?}", p.q, p.p, p.status);
    }
    run.finish(json!({ "log_slope": slope, "stationary_points": report }))
}

fn run_ladder(a: LadderArgs) -> Result<()> {
    let mut r = Resolver::new(a.common.config.as_deref())?;
    let k = r.value("k", a.k, 0.0)?;
    let deltas = r.list("delta", a.delta, vec![1e-3])?;
    let resolution = r.value("resolution", a.resolution, MIN_RESOLUTION)?;
    let (mut run, _) = Run::start("ladder", &a.common, r)?;

    let spread = deltas.iter().cloned().fold(0.0, f64::max) / deltas.iter().cloned().fold(f64::INFINITY, f64::min);
    let asym = if deltas.len() >= 2 && spread >= 1e3 { Some(ladder_asymptotics(k, &deltas, resolution)?) } else { None };
    let (alpha, gamma) = match &asym {
        Some(s) => (num(s.alpha), num(s.gamma)),
        None => (String::new(), String::new()),
    };
    let mut rows = Vec::new();
    let mut results = Vec::new();
    for &d in &deltas {
        let res = ladder_rate(k, d, resolution)?;
        println!("Delta = {d:e}: rate = {:.10e} (doubling error {:.1e})", res.rate, res.error_estimate);
        rows.push(vec![num(k), num(d), num(res.rate), alpha.clone(), gamma.clone()]);
        results.push(json!({ "delta": d, "rate": res.rate, "error_estimate": res.error_estimate, "nodes": res.nodes }));
    }
    run.write_csv("ladder.csv", &["k", "Delta", "rate", "alpha", "gamma"], &rows)?;
    run.finish(json!({ "rates": results, "asymptotics": asym }))
}

fn run_melonic(a: MelonicArgs) -> Result<()> {
    let mut r = Resolver::new(a.common.config.as_deref())?;
    let l = r.value("L", a.l, 400)?;
    let dt = r.value("dt", a.dt, 0.1)?;
    let delta = r.value("delta", a.delta, 0.3)?;
    let h = r.value("h", a.h, 0.0)?;
    let tmax = r.value("tmax", a.tmax, 100.0)?;
    let ks = r.list("k", a.k, vec![0.0])?;
    let mode = r.value("mode", a.mode, "self-consistent".to_string())?;
    let integrator = r.value("integrator", a.integrator, "trapezoid".to_string())?;
    let frame = r.value("frame", a.frame, "rotating".to_string())?;
    let stop_below = r.value("stop-below", a.stop_below, 0.0)?;
    let norm_tolerance = r.value("norm-tolerance", a.norm_tolerance, 1e-2)?;
    let (mut run, _) = Run::start("melonic", &a.common, r)?;

    let config = SolverConfig {
        n_sites: l,
        dt,
        t_max: tmax,
        delta,
        h,
        mode: match choice("mode", &mode, &["self-consistent", "frozen"])? {
            "frozen" => KernelMode::FgrFrozen,
            _ => KernelMode::SelfConsistent,
        },
        frame: match choice("frame", &frame, &["rotating", "lab"])? {
            "lab" => Frame::Lab,
            _ => Frame::Rotating,
        },
        integrator: match choice("integrator", &integrator, &["trapezoid", "rectangle"])? {
            "rectangle" => Integrator::Rectangle,
            _ => Integrator::Trapezoid,
        },
        norm_tolerance,
        history_cutoff: None,
    };
    if ks.is_empty() {
        return Err(Error::invalid("need at least one k"));
    }
    let sol = if stop_below > 0.0 {
        solve_until_decayed(config, ks[0], stop_below, 0.5)?
    } else {
        solve(config)?
    };
    let times = sol.times();
    let rotating = sol.config.frame == Frame::Rotating;
    let mut rows = Vec::new();
    let mut fits = Vec::new();
    for &k in &ks {
        let mut g = sol.greens(k)?;
        if rotating {
            let eps = if h == 0.0 { -k.cos() } else { -band_omega(k, h) };
            for (z, t) in g.iter_mut().zip(&times) {
                *z *= Complex64::from_polar(1.0, eps * t);
            }
        }
        let s = sol.self_energy_abs(k)?;
        for ((t, z), sig) in times.iter().zip(&g).zip(&s) {
            rows.push(vec![num(*t), num(k), num(z.re), num(z.im), num(*sig)]);
        }
        let abs: Vec<f64> = g.iter().map(|z| z.norm()).collect();
        let fit = extract_rate(&times, &abs, None, &WindowPolicy::default()).ok();
        if let Some(f) = &fit {
            println!("k = {k}: rate = {:.6} +- {:.1e} over t in [{:.2}, {:.2}]", f.rate, f.error, f.window.0, f.window.1);
        }
        fits.push(json!({ "k": k, "rate_fit": fit }));
    }
    run.write_csv("melonic.csv", &["t", "k", "Re G", "Im G", "|Sigma|"], &rows)?;
    run.finish(json!({ "t_end": times.last(), "rates": fits }))
}

fn run_classical(a: ClassicalArgs) -> Result<()> {
    let mut r = Resolver::new(a.common.config.as_deref())?;
    let l = r.value("L", a.l, 128)?;
    let samples = r.value("samples", a.samples, 20000)?;
    let seed = r.value("seed", a.seed, 1)?;
    let delta = r.value("delta", a.delta, 0.1)?;
    let periods = r.value("periods", a.periods, 200)?;
    let k_index = r.list("k-index", a.k_index, vec![0])?;
    let origins = r.value("origins", a.origins, 1)?;
    let (mut run, _) = Run::start("classical", &a.common, r)?;

    let spec = EnsembleSpec { n_samples: samples, seed, n_sites: l, delta, hopping: Hopping::NearestNeighbour, time_origins: origins };
    let corr = autocorrelator(&spec, periods, &k_index)?;
    let mut rows = Vec::new();
    let mut fits = Vec::new();
    for i in 0..corr.k_indices.len() {
        let k = corr.k(i);
        for ((t, c), e) in corr.times.iter().zip(&corr.values[i]).zip(&corr.stderr[i]) {
            rows.push(vec![num(*t), num(k), num(c.re), num(c.im), num(*e)]);
        }
        let fit = corr.rate(i, WindowPolicy::default()).ok();
        if let Some(f) = &fit {
            let flag = if corr.low_precision(i, f) { " (low precision)" } else { "" };
            println!("k = {k}: rate = {:.6} +- {:.1e}, R^2 = {:.5}{flag}", f.rate, f.error, f.r2);
        }
        fits.push(json!({ "k": k, "rate_fit": fit }));
    }
    run.write_csv("classical.csv", &["t", "k", "Re C", "Im C", "stderr"], &rows)?;
    run.finish(json!({
        "seed": seed, "L": l, "n_samples": samples, "Delta": delta,
        "n_batches": corr.n_batches, "rates": fits
    }))
}

/// One table read back from disk.
struct Table {
    header: Vec<String>,
    rows: Vec<Vec<f64>>,
}

impl Table {
    fn read(path: &Path) -> Result<Self> {
        let mut rd = csv::Reader::from_path(path).map_err(csv_error)?;
        let header: Vec<String> = rd.headers().map_err(csv_error)?.iter().map(str::to_string).collect();
        let mut rows = Vec::new();
        for rec in rd.records() {
            let rec = rec.map_err(csv_error)?;
            rows.push(rec.iter().map(|s| if s.is_empty() { f64::NAN } else { s.parse().unwrap_or(f64::NAN) }).collect());
        }
        Ok(Self { header, rows })
    }

    fn col(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }
}

/// Coupling recorded in the sidecar of a time-series CSV.
fn sidecar_delta(csv_path: &Path) -> Result<f64> {
    let side = csv_path.with_extension("json");
    let text = fs::read_to_string(&side)
        .map_err(|e| Error::invalid(format!("{}: cannot read sidecar for Delta ({e})", side.display())))?;
    let v: Value = serde_json::from_str(&text)?;
    v["config"]["delta"]
        .as_f64()
        .ok_or_else(|| Error::invalid(format!("{}: no config.delta", side.display())))
}

/// `(t, value)` of a melonic or classical CSV at momentum `k` (first k if `None`).
fn time_series(table: &Table, k: Option<f64>, value: &str) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    let (t, kc) = match (table.col("t"), table.col("k")) {
        (Some(t), Some(k)) => (t, k),
        _ => return Err(Error::invalid("time series needs t and k columns")),
    };
    let pick = match value {
        "Sigma" => table.col("|Sigma|").map(|c| (c, None)),
        _ => match (table.col("Re G").or(table.col("Re C")), table.col("Im G").or(table.col("Im C"))) {
            (Some(re), Some(im)) => Some((re, Some(im))),
            _ => None,
        },
    }
    .ok_or_else(|| Error::invalid(format!("no `{value}` columns in time series")))?;
    let first = table.rows.first().ok_or_else(|| Error::invalid("empty time series"))?[kc];
    let want = k.unwrap_or(first);
    let mut ts = Vec::new();
    let mut vs = Vec::new();
    for row in &table.rows {
        if (row[kc] - want).abs() > 1e-9 {
            continue;
        }
        ts.push(row[t]);
        vs.push(match pick.1 {
            Some(im) => row[pick.0].hypot(row[im]),
            None => row[pick.0],
        });
    }
    if ts.is_empty() {
        return Err(Error::invalid(format!("no rows at k = {want}")));
    }
    Ok((want, ts, vs))
}

fn run_fit(a: FitArgs) -> Result<()> {
    let mut r = Resolver::new(a.common.config.as_deref())?;
    let inputs = r.list("input", a.input.iter().map(|p| p.display().to_string()).collect(), Vec::new())?;
    let k = r.optional("k", a.k)?;
    let upper = r.value("upper", a.upper, 0.2)?;
    let lower = r.value("lower", a.lower, 0.02)?;
    let min_span = r.value("min-span", a.min_span, FitOptions::default().min_span)?;
    let min_points = r.value("min-points", a.min_points, FitOptions::default().min_points)?;
    let (mut run, _) = Run::start("fit", &a.common, r)?;
    if inputs.is_empty() {
        return Err(Error::invalid("fit needs --input files"));
    }
    let policy = WindowPolicy { upper, lower };
    let mut points = Vec::new();
    let mut rate_rows = Vec::new();
    for name in &inputs {
        let path = Path::new(name);
        let table = Table::read(path)?;
        if let (Some(dc), Some(rc)) = (table.col("Delta"), table.col("rate")) {
            for row in &table.rows {
                points.push((row[dc], row[rc]));
                rate_rows.push(vec![num(row[dc]), num(row[rc]), String::new(), String::new(), String::new(), String::new()]);
            }
            continue;
        }
        let delta = sidecar_delta(path)?;
        let (_, ts, vs) = time_series(&table, k, "G")?;
        let fit = extract_rate(&ts, &vs, None, &policy)?;
        points.push((delta, fit.rate));
        rate_rows.push(vec![num(delta), num(fit.rate), num(fit.error), num(fit.r2), num(fit.window.0), num(fit.window.1)]);
    }
    run.write_csv("rates.csv", &["Delta", "rate", "error", "r2", "t1", "t2"], &rate_rows)?;
    let options = FitOptions { min_span, min_points };
    let cmp = fit_scaling_with(&points, &options)?;
    let q = &cmp.quadratic;
    let l = &cmp.log_enhanced;
    let rows = vec![
        vec!["quadratic".into(), num(q.params[0]), String::new(), num(q.ssr), q.identifiable.to_string()],
        vec!["log-enhanced".into(), num(l.params[0]), num(l.params[1]), num(l.ssr), l.identifiable.to_string()],
    ];
    run.write_csv("fit.csv", &["model", "a_or_c", "b", "ssr", "identifiable"], &rows)?;
    println!("quadratic: c = {:.5}, ssr = {:.4e}", q.params[0], q.ssr);
    println!("log-enhanced: a = {:.5}, b = {:.5}, ssr = {:.4e}", l.params[0], l.params[1], l.ssr);
    println!("preferred: {}", cmp.preferred);
    run.finish(serde_json::to_value(&cmp)?)
}

fn run_collapse(a: CollapseArgs) -> Result<()> {
    let mut r = Resolver::new(a.common.config.as_deref())?;
    let inputs = r.list("input", a.input.iter().map(|p| p.display().to_string()).collect(), Vec::new())?;
    let k = r.optional("k", a.k)?;
    let tau = r.value("tau", a.tau, "log".to_string())?;
    let value = r.value("value", a.value, "G".to_string())?;
    let (mut run, _) = Run::start("collapse", &a.common, r)?;
    let tau = choice("tau", &tau, &["log", "quadratic"])?;
    let value = choice("value", &value, &["G", "Sigma"])?;
    if inputs.len() < 2 {
        return Err(Error::invalid("collapse needs at least two --input series"));
    }
    let mut series = Vec::new();
    for name in &inputs {
        let path = Path::new(name);
        let (_, times, values) = time_series(&Table::read(path)?, k, value)?;
        series.push(CollapseSeries { delta: sidecar_delta(path)?, times, values });
    }
    let table = collapse_table(&series, |d| {
        let d2 = d * d;
        if tau == "log" {
            1.0 / (d2 * (1.0 / d2).ln())
        } else {
            1.0 / d2
        }
    })?;
    let rows: Vec<Vec<String>> = table.rows.iter().map(|&(d, x, v)| vec![num(d), num(x), num(v)]).collect();
    run.write_csv("collapse.csv", &["Delta", "t/tau", "value"], &rows)?;
    println!("collapse metric ({tau} tau): {:.6e}", table.metric);
    run.finish(json!({ "metric": table.metric }))
}

fn run_verify(a: VerifyArgs) -> Result<()> {
    let r = Resolver::new(a.common.config.as_deref())?;
    let threads = setup_threads(&a.common)?;
    r.finish("verify")?;
    let checks = verify::run_all();
    for c in &checks {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    println!("{} of {} checks passed ({threads} threads)", checks.len() - failed, checks.len());
    if failed > 0 {
        return Err(Error::Numerical(format!("{failed} oracle checks failed")));
    }
    Ok(())
}
