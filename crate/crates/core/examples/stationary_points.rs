//! Stationary points of the energy mismatch and their classification.
//!
//! For the cosine band the on-shell critical points are (0, pi - 2k),
//! (pi - 2k, 0) and (0, 0); the last carries a vanishing vertex. A contact
//! interaction between the two staggered bands has no such protection.

use std::f64::consts::PI;

use qplife::fgr::{classify_divergences, predicted_log_coefficient, Channel, SearchOptions, Vertex};
use qplife::model::Dispersion;

fn main() -> qplife::Result<()> {
    let opts = SearchOptions::default();
    for k in [0.1, 0.3, 1.0, PI / 2.0] {
        let report = classify_divergences(&[Dispersion::Cosine], k, &[Channel::single_band()], &opts)?;
        println!("k = {k:.4}");
        for p in &report.points {
            println!(
                "  (q, p) = ({:+.10}, {:+.10})  hessian {:>2}  weight {:.3e}  {:?}",
                p.q, p.p, p.hessian_signature, p.weight, p.status
            );
        }
        let c1 = predicted_log_coefficient(&report, 1.0, 0.25);
        println!("  predicted log coefficient at Delta_nn = 1: {c1:.6}");
    }

    let h = 0.5;
    let bands = [Dispersion::Staggered { h, upper: false }, Dispersion::Staggered { h, upper: true }];
    let channel = Channel { b: 0, b1: 1, b2: 0, b3: 1, vertex: Vertex::Contact };
    let report = classify_divergences(&bands, 0.4, &[channel], &opts)?;
    println!("\nstaggered chain h = {h}, interband contact channel at k = 0.4:");
    for p in &report.points {
        println!("  (q, p) = ({:+.8}, {:+.8})  {:?}", p.q, p.p, p.status);
    }
    Ok(())
}
