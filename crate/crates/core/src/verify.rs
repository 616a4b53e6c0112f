//! Built-in oracle suite run by `qplife verify`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::analysis::{extract_rate, fit_scaling, ModelTag, WindowPolicy};
use crate::block::Block;
use crate::classical::{sample_initial, EnsembleSpec};
use crate::error::Result;
use crate::ladder::f_onshell;
use crate::melonic::{kernel_direct, solve, Frame, Integrator, KernelFft, SolverConfig};
use crate::model::free_propagator;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        Self { name: name.to_string(), passed, detail }
    }

    fn from_result(name: &str, r: Result<(bool, String)>) -> Self {
        match r {
            Ok((passed, detail)) => Self::new(name, passed, detail),
            Err(e) => Self::new(name, false, format!("error: {e}")),
        }
    }
}

/// Runs every oracle check. Each check is independent; a failure in one does
/// not stop the others.
pub fn run_all() -> Vec<Check> {
    vec![
        Check::from_result("kernel-fft-vs-direct", kernel_fft_vs_direct()),
        Check::from_result("zero-coupling-exactness", zero_coupling_exactness()),
        Check::from_result("onshell-f-values", onshell_values()),
        Check::from_result("gaussian-second-moment", gaussian_second_moment()),
        Check::from_result("synthetic-rate", synthetic_rate()),
        Check::from_result("synthetic-log-law", synthetic_log_law()),
        Check::from_result("synthetic-quadratic-law", synthetic_quadratic_law()),
    ]
}

fn kernel_fft_vs_direct() -> Result<(bool, String)> {
    // L = 32 sites, 16 unit cells
    let n = 16;
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    let mut c = || Complex64::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5));
    let random: Vec<Block> = (0..n).map(|_| Block::new(c(), c(), c(), c())).collect();
    let free: Vec<Block> =
        (0..n).map(|j| free_propagator(2.0 * PI * j as f64 / n as f64, 1.3, 0.25)).collect();
    let fft = KernelFft::new(n)?;
    let mut worst: f64 = 0.0;
    for row in [&random, &free] {
        let a = kernel_direct(row, 0.37)?;
        let b = fft.kernel(row, 0.37)?;
        worst = a.iter().zip(&b).map(|(x, y)| (*x - *y).max_abs()).fold(worst, f64::max);
    }
    Ok((worst < 1e-10, format!("max deviation {worst:.3e} (limit 1e-10)")))
}

fn zero_coupling_exactness() -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for (h, integrator) in [(0.0, Integrator::Trapezoid), (0.3, Integrator::Rectangle)] {
        let cfg = SolverConfig { n_sites: 32, dt: 0.1, t_max: 100.0, delta: 0.0, h, integrator, ..Default::default() };
        let sol = solve(cfg)?;
        for m in 0..sol.history.rows.len() {
            let t = m as f64 * 0.1;
            for j in 0..16 {
                let k = 2.0 * PI * j as f64 / 16.0;
                let rot = sol.block(m, j, Frame::Rotating) - Block::scaled_identity(0.5);
                let lab = sol.block(m, j, Frame::Lab) - free_propagator(k, t, h);
                worst = worst.max(rot.max_abs()).max(lab.max_abs());
            }
        }
    }
    Ok((worst < 1e-8, format!("max deviation to t=100 in both frames {worst:.3e} (limit 1e-8)")))
}

fn onshell_values() -> Result<(bool, String)> {
    let f0 = f_onshell(0, PI / 4.0, 0.0)?;
    let f2 = f_onshell(2, PI / 4.0, 0.0)?;
    let e0 = (f0 - Complex64::new(0.25, 0.0)).norm();
    let e2 = (f2 - Complex64::new(0.0, -0.25)).norm();
    Ok((e0 < 1e-12 && e2 < 1e-12, format!("f(0) = {f0:.12}, f(2) = {f2:.12}")))
}

fn gaussian_second_moment() -> Result<(bool, String)> {
    let spec = EnsembleSpec::new(1000, 2024, 100, 0.0);
    let values: Vec<f64> =
        (0..spec.n_samples as u64).flat_map(|i| sample_initial(&spec, i).psi).map(|z| z.norm_sqr()).collect();
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    let sigma = (var / n).sqrt();
    let passed = (mean - 2.0).abs() < 3.0 * sigma;
    Ok((passed, format!("<|psi|^2> = {mean:.5} +- {sigma:.5} over {n} draws (expected 2)")))
}

fn synthetic_rate() -> Result<(bool, String)> {
    let times: Vec<f64> = (0..=800).map(|m| m as f64 * 0.1).collect();
    let clean: Vec<f64> = times.iter().map(|t| (-0.1 * t).exp()).collect();
    let wobbly: Vec<f64> = times.iter().map(|t| (-0.1 * t).exp() * (1.0 + 0.05 * (3.0 * t).cos())).collect();
    let policy = WindowPolicy::default();
    let a = extract_rate(&times, &clean, None, &policy)?;
    let b = extract_rate(&times, &wobbly, None, &policy)?;
    let passed = (a.rate - 0.1).abs() < 1e-6 && (b.rate - 0.1).abs() < 2e-3 && b.error > a.error;
    Ok((passed, format!("exact {:.8}, oscillating {:.5} +- {:.1e}", a.rate, b.rate, b.error)))
}

fn synthetic_points(law: impl Fn(f64) -> f64, seed: u64) -> Vec<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..8)
        .map(|i| {
            let d = 0.01 * 10f64.powf(i as f64 / 7.0);
            let noise: f64 = StandardNormal.sample(&mut rng);
            (d, law(d) * (1.0 + 0.01 * noise))
        })
        .collect()
}

fn synthetic_log_law() -> Result<(bool, String)> {
    let pts = synthetic_points(|d| 6.7 * d * d * (0.2 / (d * d)).ln(), 7);
    let fit = fit_scaling(&pts)?;
    let (a, b) = (fit.log_enhanced.params[0], fit.log_enhanced.params[1]);
    let passed = (6.0..=7.4).contains(&a) && (0.15..=0.27).contains(&b) && fit.preferred == ModelTag::LogEnhanced;
    Ok((passed, format!("injected a=6.7 b=0.2, recovered a={a:.3} b={b:.3}, preferred {}", fit.preferred)))
}

fn synthetic_quadratic_law() -> Result<(bool, String)> {
    let pts = synthetic_points(|d| 3.0 * d * d, 11);
    let fit = fit_scaling(&pts)?;
    let c = fit.quadratic.params[0];
    let passed = (c - 3.0).abs() < 0.03 && fit.preferred == ModelTag::Quadratic;
    Ok((passed, format!("injected c=3, recovered c={c:.4}, preferred {}", fit.preferred)))
}
