//! Classical Floquet chain: C_0(t) from a seeded Gaussian ensemble.
//!
//! ```text
//! cargo run --release --example classical_floquet -- 4000
//! ```

use qplife::analysis::WindowPolicy;
use qplife::classical::{autocorrelator, EnsembleSpec};

fn main() -> qplife::Result<()> {
    let samples: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(2000);
    for delta in [0.05, 0.1] {
        let spec = EnsembleSpec { time_origins: 128, ..EnsembleSpec::new(samples, 7, 128, delta) };
        let corr = autocorrelator(&spec, 120, &[0])?;
        let fit = corr.rate(0, WindowPolicy::default())?;
        println!(
            "Delta = {delta}: rate = {:.5} +- {:.1e}, R^2 = {:.5}, window [{:.0}, {:.0}], {} batches",
            fit.rate, fit.error, fit.r2, fit.window.0, fit.window.1, corr.n_batches
        );
        for m in (0..corr.times.len()).step_by(20) {
            println!("  t = {:>5.0}  |C| = {:.5}  stderr = {:.1e}", corr.times[m], corr.values[0][m].norm(), corr.stderr[0][m]);
        }
    }
    Ok(())
}
