use std::f64::consts::PI;

use qplife::ladder::{integrand, ladder_asymptotics, ladder_rate, MIN_RESOLUTION};

const R: usize = MIN_RESOLUTION;

#[test]
fn log_enhanced_at_zero_momentum() {
    let scaled: Vec<f64> = [1e-3, 1e-4, 1e-5]
        .iter()
        .map(|&d: &f64| ladder_rate(0.0, d, R).unwrap().rate / (d * d * (d * d).recip().ln()))
        .collect();
    for w in scaled.windows(2) {
        assert!((w[1] / w[0] - 1.0).abs() < 0.05, "{scaled:?}");
    }
}

#[test]
fn quadratic_at_quarter_filling_momentum() {
    let a = ladder_rate(PI / 2.0, 1e-3, R).unwrap().rate / 1e-6;
    let b = ladder_rate(PI / 2.0, 1e-4, R).unwrap().rate / 1e-8;
    assert!((a / b - 1.0).abs() < 0.03, "{a} {b}");
    let fit = ladder_asymptotics(PI / 2.0, &[1e-6, 1e-5, 1e-4, 1e-3], R).unwrap();
    assert!(fit.alpha.abs() < 0.02 * fit.gamma.abs(), "{fit:?}");
}

#[test]
fn log_coefficient_follows_cos_cubed() {
    let deltas = [1e-6, 1e-5, 1e-4, 1e-3];
    let a0 = ladder_asymptotics(0.0, &deltas, R).unwrap();
    assert!(a0.alpha > 0.0 && !a0.ill_conditioned);
    for k in [PI / 6.0, PI / 3.0] {
        let a = ladder_asymptotics(k, &deltas, R).unwrap();
        let ratio = a.alpha / a0.alpha;
        let expected = k.cos().powi(3);
        assert!((ratio / expected - 1.0).abs() < 0.15, "k={k}: {ratio} vs {expected}");
    }
}

#[test]
fn parity_and_positivity() {
    for k in [0.2, 1.1] {
        let a = ladder_rate(k, 1e-3, R).unwrap();
        let b = ladder_rate(-k, 1e-3, R).unwrap();
        assert!(a.rate > 0.0);
        assert!((a.rate - b.rate).abs() < 1e-8 * a.rate);
        assert!(a.error_estimate < 1e-6);
        assert!(a.samples.iter().all(|s| s.1 >= 0.0));
    }
    for i in 0..1000 {
        let q = 2.0 * PI * i as f64 / 1000.0;
        assert!(integrand(q, 0.7, 0.1) >= 0.0);
    }
}

#[test]
fn asymptotics_needs_three_decades() {
    assert!(ladder_asymptotics(0.0, &[1e-4, 1e-3, 1e-2], R).is_err());
}
