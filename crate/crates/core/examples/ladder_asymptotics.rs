//! Resummed ladder rate at small coupling.
//!
//! `rate / Delta^2 = alpha log Delta^-2 + gamma`, with alpha following
//! |cos k|^3 and vanishing at k = pi/2.

use std::f64::consts::PI;

use qplife::ladder::{ladder_asymptotics, ladder_rate, MIN_RESOLUTION};

fn main() -> qplife::Result<()> {
    for d in [1e-2, 1e-3, 1e-4, 1e-5] {
        let r = ladder_rate(0.0, d, MIN_RESOLUTION)?;
        let log = (1.0 / (d * d)).ln();
        println!(
            "Delta = {d:.0e}  rate = {:.6e}  rate/(D^2 log D^-2) = {:.5}  nodes = {}",
            r.rate,
            r.rate / (d * d * log),
            r.nodes
        );
    }

    let deltas = [1e-6, 1e-5, 1e-4, 1e-3];
    let base = ladder_asymptotics(0.0, &deltas, MIN_RESOLUTION)?;
    println!("\n{:>8} {:>10} {:>10} {:>14}", "k", "alpha", "gamma", "alpha ratio");
    for k in [0.0, PI / 6.0, PI / 3.0, PI / 2.0] {
        let a = ladder_asymptotics(k, &deltas, MIN_RESOLUTION)?;
        println!(
            "{k:>8.4} {:>10.5} {:>10.5} {:>7.4} / {:.4}",
            a.alpha,
            a.gamma,
            a.alpha / base.alpha,
            k.cos().abs().powi(3)
        );
    }
    Ok(())
}
