//! Golden-rule rates of fermions and bosons at finite temperature.

use qplife::fgr::{fgr_rate, FgrRequest, Statistics, Temperature};

fn main() -> qplife::Result<()> {
    let base = FgrRequest::cosine(0.4, 1.0, 1e-2, 512);
    let inf = fgr_rate(&base)?;
    println!("infinite temperature: {inf:.6}");
    for beta in [1e-3, 0.5, 1.0, 2.0, 5.0] {
        let fermi = FgrRequest { temperature: Temperature::Finite { beta, mu: 0.0 }, ..base.clone() };
        let bose = FgrRequest {
            statistics: Statistics::Boson,
            temperature: Temperature::Finite { beta, mu: -1.5 },
            ..base.clone()
        };
        println!(
            "beta = {beta:>6}: fermions (mu = 0) {:.6}   bosons (mu = -1.5) {:.6}",
            fgr_rate(&fermi)?,
            fgr_rate(&bose)?
        );
    }
    Ok(())
}
