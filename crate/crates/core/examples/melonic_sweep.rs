//! Melonic decay rates at k = 0 and the two candidate scaling laws.
//!
//! Delta is the XXZ coupling. Runs take a few seconds in release mode.

use qplife::analysis::{fit_scaling_with, FitOptions, WindowPolicy};
use qplife::melonic::{rate_sweep, suggested_t_max, SolverConfig};

fn main() -> qplife::Result<()> {
    let deltas = [0.2, 0.3, 0.4, 0.5, 0.6];
    let mut points = Vec::new();
    for &d in &deltas {
        let cfg = SolverConfig { n_sites: 400, dt: 0.1, delta: d, t_max: suggested_t_max(d), ..Default::default() };
        let p = rate_sweep(&cfg, 0.0, &[d], &WindowPolicy::default())?.remove(0);
        println!(
            "Delta = {d:.2}  rate = {:.5} +- {:.1e}  window [{:.2}, {:.2}]  rate/D^2 = {:.3}",
            p.fit.rate,
            p.fit.error,
            p.fit.window.0,
            p.fit.window.1,
            p.fit.rate / (d * d)
        );
        points.push((d, p.fit.rate));
    }
    // the grid spans a factor of 3
    let fit = fit_scaling_with(&points, &FitOptions { min_points: 5, min_span: 3.0 })?;
    println!("\nquadratic:    c = {:.4}  ssr = {:.3e}", fit.quadratic.params[0], fit.quadratic.ssr);
    println!(
        "log-enhanced: a = {:.4}  b = {:.4}  ssr = {:.3e}",
        fit.log_enhanced.params[0], fit.log_enhanced.params[1], fit.log_enhanced.ssr
    );
    println!("preferred: {}", fit.preferred);
    Ok(())
}
