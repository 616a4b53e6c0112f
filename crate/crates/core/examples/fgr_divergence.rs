//! Golden-rule decay rate versus broadening at several momenta.
//!
//! At generic k the rate grows like log(1/eta); at k = pi/2 it saturates.
//!
//! ```text
//! cargo run --release --example fgr_divergence
//! ```

use std::f64::consts::PI;

use qplife::fgr::{log_slope, log_spaced, FgrRequest};

fn main() -> qplife::Result<()> {
    let etas = log_spaced(1e-1, 1e-3, 7);
    println!("{:>8} {:>10} {:>10} {:>10}  expected c1 = 2|cos k|^3/pi", "k", "c0", "c1", "R^2");
    for k in [0.0, PI / 6.0, PI / 3.0, PI / 2.0] {
        let fit = log_slope(&FgrRequest::cosine(k, 1.0, 0.0, 1024), &etas)?;
        let expected = 2.0 * k.cos().abs().powi(3) / PI;
        println!("{k:>8.4} {:>10.5} {:>10.5} {:>10.6}  {expected:.5}", fit.c0, fit.c1, fit.r2);
    }

    println!("\nrate(eta) at k = 0:");
    let fit = log_slope(&FgrRequest::cosine(0.0, 1.0, 0.0, 1024), &etas)?;
    for (eta, rate) in &fit.samples {
        println!("  eta = {eta:.2e}  rate = {rate:.6}");
    }
    Ok(())
}
