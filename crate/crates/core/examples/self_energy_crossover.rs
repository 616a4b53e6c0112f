//! |Sigma_0(t)| in the frozen and self-consistent kernels, and the collapse
//! of the self-consistent curves in t / tau with 1/tau = D^2 log D^-2.

use qplife::analysis::{collapse_table, log_derivative, CollapseSeries};
use qplife::melonic::{solve, KernelMode, SolverConfig};

fn inv_tau(d: f64) -> f64 {
    d * d * (1.0 / (d * d)).ln()
}

fn main() -> qplife::Result<()> {
    let delta = 0.3;
    let tau = 1.0 / inv_tau(delta);
    let base = SolverConfig { n_sites: 400, dt: 0.1, delta, t_max: 4.0 * tau, ..Default::default() };
    let sc = solve(base.clone())?;
    let frozen = solve(SolverConfig { mode: KernelMode::FgrFrozen, ..base })?;
    let times = sc.times();
    let s_sc = sc.self_energy_abs(0.0)?;
    let s_fr = frozen.self_energy_abs(0.0)?;
    let d_sc = log_derivative(&times, &s_sc);
    let d_fr = log_derivative(&times, &s_fr);
    println!("Delta = {delta}, tau = {tau:.3}");
    println!("{:>7} {:>12} {:>12} {:>10} {:>10}", "t/tau", "|S| sc", "|S| frozen", "slope sc", "slope fr");
    for m in (5..times.len()).step_by(10) {
        let fmt = |s: Option<f64>| s.map(|v| format!("{v:.3}")).unwrap_or_default();
        println!(
            "{:>7.3} {:>12.4e} {:>12.4e} {:>10} {:>10}",
            times[m] / tau,
            s_sc[m],
            s_fr[m],
            fmt(d_sc[m]),
            fmt(d_fr[m])
        );
    }

    let mut series = Vec::new();
    for d in [0.3, 0.45, 0.6] {
        let cfg = SolverConfig { n_sites: 400, dt: 0.1, delta: d, t_max: 5.0 / inv_tau(d), ..Default::default() };
        let sol = solve(cfg)?;
        series.push(CollapseSeries { delta: d, times: sol.times(), values: sol.self_energy_abs(0.0)? });
    }
    let log = collapse_table(&series, |d| 1.0 / inv_tau(d))?;
    let quad = collapse_table(&series, |d| 1.0 / (d * d))?;
    println!("\ncollapse metric: t/tau {:.4}, t D^2 {:.4}", log.metric, quad.metric);
    Ok(())
}
