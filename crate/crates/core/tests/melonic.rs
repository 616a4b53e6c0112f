use std::f64::consts::PI;

use num_complex::Complex64;
use qplife::analysis::{log_derivative, WindowPolicy};
use qplife::block::Block;
use qplife::fgr::{fgr_rate, FgrRequest};
use qplife::melonic::{
    decay_rate, kernel_direct, solve, Frame, Integrator, KernelFft, KernelMode, SolverConfig,
};
use qplife::model::free_propagator;

fn cfg(delta: f64, t_max: f64) -> SolverConfig {
    SolverConfig { n_sites: 400, delta, t_max, ..SolverConfig::default() }
}

#[test]
fn time_step_convergence_of_the_propagator() {
    let a = solve(SolverConfig { dt: 0.1, ..cfg(0.3, 20.0) }).unwrap();
    let b = solve(SolverConfig { dt: 0.05, ..cfg(0.3, 20.0) }).unwrap();
    let ga = a.greens(0.0).unwrap();
    let gb = b.greens(0.0).unwrap();
    let dev = (ga[200].norm() - gb[400].norm()).abs();
    assert!(dev < 1e-3, "{dev}");
}

#[test]
fn time_step_convergence_of_the_rate() {
    let policy = WindowPolicy::default();
    for delta in [0.2, 0.4] {
        let base = cfg(delta, 100.0);
        let (a, _) = decay_rate(&SolverConfig { dt: 0.1, ..base.clone() }, 0.0, &policy).unwrap();
        let (b, _) = decay_rate(&SolverConfig { dt: 0.05, ..base }, 0.0, &policy).unwrap();
        let rel = (a.fit.rate - b.fit.rate).abs() / b.fit.rate;
        assert!(rel < 0.02, "Delta {delta}: {} vs {}", a.fit.rate, b.fit.rate);
    }
}

#[test]
fn self_consistent_kernel_follows_dressed_lines_early() {
    // the self-consistent kernel differs from the frozen one by the decay of
    // its three internal propagators, roughly |G(t)/G(0)|^3 at early times
    let delta: f64 = 0.3;
    let tau = 1.0 / (delta * delta * (1.0 / (delta * delta)).ln());
    let t_max = 0.1 * tau;
    let sc = solve(cfg(delta, t_max)).unwrap();
    let fr = solve(SolverConfig { mode: KernelMode::FgrFrozen, ..cfg(delta, t_max) }).unwrap();
    let a = sc.self_energy_abs(0.0).unwrap();
    let b = fr.self_energy_abs(0.0).unwrap();
    let g = sc.greens(0.0).unwrap();
    for i in 0..a.len() {
        let lines = (g[i].norm() / g[0].norm()).powi(3);
        assert!((a[i] / b[i] - lines).abs() < 0.02, "t = {}: {} vs {lines}", i as f64 * 0.1, a[i] / b[i]);
    }
    // and the two agree to 2% while the lines have decayed by less than that
    assert!((a[1] / b[1] - 1.0).abs() < 0.02);
}

#[test]
fn frozen_self_energy_falls_off_as_inverse_time() {
    let sol = solve(SolverConfig { mode: KernelMode::FgrFrozen, n_sites: 800, ..cfg(0.1, 20.0) }).unwrap();
    let s = sol.self_energy_abs(0.0).unwrap();
    let ld = log_derivative(&sol.times(), &s);
    // average over a few oscillations
    let mean: f64 = (100..200).filter_map(|i| ld[i]).sum::<f64>() / 100.0;
    assert!((mean + 1.0).abs() < 0.15, "{mean}");
}

#[test]
fn kernel_periodicity_and_parity() {
    // random-ish row with the symmetry of an h = 0 history
    let n = 24;
    let row: Vec<Block> = (0..n)
        .map(|j| {
            let k = 2.0 * PI * j as f64 / n as f64;
            free_propagator(k, 1.7, 0.0) * Complex64::new(0.9, 0.0)
        })
        .collect();
    let m = KernelFft::new(n).unwrap().kernel(&row, 0.3).unwrap();
    let d = kernel_direct(&row, 0.3).unwrap();
    for j in 0..n {
        assert!((m[j] - d[j]).max_abs() < 1e-12);
        // k -> -k maps to index n - j; the reduced kernel is even in k
        let jm = (n - j) % n;
        let k = 2.0 * PI * j as f64 / n as f64;
        let red = |b: &Block, k: f64| qplife::model::unit_cell_reduce(b, k / 2.0);
        assert!((red(&m[j], k) - red(&m[jm], -k)).norm() < 1e-10);
    }
}

#[test]
fn free_off_diagonal_entries_are_related_by_conjugated_phases() {
    let sol = solve(SolverConfig { delta: 0.0, n_sites: 32, ..cfg(0.0, 5.0) }).unwrap();
    for m in [10, 37] {
        for j in 0..16 {
            let b = sol.block(m, j, Frame::Lab);
            let k = 2.0 * PI * j as f64 / 16.0;
            // G_01 e^{ik/2} = G_10 e^{-ik/2} for the free h = 0 chain
            let lhs = b[(0, 1)] * Complex64::from_polar(1.0, k / 2.0);
            let rhs = b[(1, 0)] * Complex64::from_polar(1.0, -k / 2.0);
            assert!((lhs - rhs).norm() < 1e-12);
        }
    }
}

#[test]
fn quarter_filling_rate_matches_the_golden_rule_constant() {
    // at k = pi/2 the Golden-Rule integral is finite; in the XXZ normalisation
    // of the solver the rate is 16 times the nearest-neighbour one
    let fgr = 16.0 * fgr_rate(&FgrRequest::cosine(PI / 2.0, 1.0, 2e-3, 2048)).unwrap();
    let delta = 0.1;
    let (p, _) = decay_rate(&cfg(delta, 200.0), PI / 2.0, &WindowPolicy::default()).unwrap();
    let melonic = p.fit.rate / (delta * delta);
    assert!((melonic - fgr).abs() < 0.02 * fgr, "{melonic} vs {fgr}");
}

#[test]
fn rectangle_rule_converges_to_the_trapezoid_result() {
    let at = |integrator, dt| {
        let sol = solve(SolverConfig { integrator, dt, ..cfg(0.3, 4.0) }).unwrap();
        sol.greens(0.0).unwrap().last().unwrap().norm()
    };
    let r1 = at(Integrator::Rectangle, 0.02);
    let r2 = at(Integrator::Rectangle, 0.01);
    let t = at(Integrator::Trapezoid, 0.02);
    // first order: the error halves with the step
    let (e1, e2) = ((r1 - t).abs(), (r2 - t).abs());
    assert!((e1 / e2 - 2.0).abs() < 0.3, "{e1} {e2}");
    assert!((2.0 * r2 - r1 - t).abs() < 1e-4);
}
