//! Melonic rates of the staggered chain (h = 0.5), lower quasiparticle band
//! at unit-cell momentum 0.

use qplife::analysis::{fit_scaling_with, FitOptions, WindowPolicy};
use qplife::melonic::{rate_sweep, suggested_t_max, SolverConfig};
use qplife::model::band_omega;

fn main() -> qplife::Result<()> {
    let h = 0.5;
    println!("band gap at the zone edge: {:.3}", 2.0 * band_omega(std::f64::consts::PI, h));
    let mut points = Vec::new();
    for d in [0.2, 0.3, 0.4, 0.5, 0.6] {
        let cfg =
            SolverConfig { n_sites: 400, dt: 0.1, delta: d, h, t_max: suggested_t_max(d), ..Default::default() };
        let p = rate_sweep(&cfg, 0.0, &[d], &WindowPolicy::default())?.remove(0);
        println!("Delta = {d:.2}  rate = {:.5}  rate/D^2 = {:.3}", p.fit.rate, p.fit.rate / (d * d));
        points.push((d, p.fit.rate));
    }
    let fit = fit_scaling_with(&points, &FitOptions { min_points: 5, min_span: 3.0 })?;
    println!(
        "log-enhanced a = {:.3}, b = {:.3}; quadratic c = {:.3}; preferred {}",
        fit.log_enhanced.params[0], fit.log_enhanced.params[1], fit.quadratic.params[0], fit.preferred
    );
    Ok(())
}
