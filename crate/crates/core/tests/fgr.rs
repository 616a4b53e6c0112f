use std::f64::consts::PI;

use qplife::fgr::{
    classify_divergences, fgr_rate, fgr_rate_riemann, log_slope, log_spaced, predicted_log_coefficient, Channel,
    FgrRequest, PointStatus, SearchOptions, Statistics, Temperature, Vertex,
};
use qplife::model::Dispersion;

fn single_band(k: f64) -> qplife::fgr::DivergenceReport {
    classify_divergences(&[Dispersion::Cosine], k, &[Channel::single_band()], &SearchOptions::default()).unwrap()
}

#[test]
fn stationary_points_of_the_cosine_band() {
    for k in [0.1, 0.3, 1.0] {
        let r = single_band(k);
        let div: Vec<_> = r.divergent().collect();
        assert_eq!(div.len(), 2, "k = {k}: {:?}", r.points);
        let s = PI - 2.0 * k;
        let mut expected = vec![(0.0, s), (s, 0.0)];
        expected.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (pt, (q, p)) in div.iter().zip(expected) {
            assert!((pt.q - q).abs() < 1e-8 && (pt.p - p).abs() < 1e-8, "{pt:?}");
            assert_eq!(pt.hessian_signature.len(), 2);
            assert!(pt.hessian_det < 0.0);
        }
        let nulls: Vec<_> = r.points.iter().filter(|p| p.status == PointStatus::Nullified).collect();
        assert_eq!(nulls.len(), 1);
        assert!(nulls[0].q.hypot(nulls[0].p) < 1e-8);
        assert!(r.points.iter().all(|p| p.status != PointStatus::Unresolved));
        for p in &r.points {
            assert!(p.residuals.0.abs() < 1e-8 && p.residuals.1.abs() < 1e-8 && p.residuals.2.abs() < 1e-8);
        }
    }
}

#[test]
fn points_merge_at_quarter_filling_momentum() {
    let r = single_band(PI / 2.0);
    assert!(!r.points.is_empty());
    for p in &r.points {
        assert_eq!(p.status, PointStatus::Nullified, "{p:?}");
        let d = p.q.min(2.0 * PI - p.q).hypot(p.p.min(2.0 * PI - p.p));
        assert!(d < 1e-3);
    }
}

#[test]
fn interband_contact_channel_is_not_nullified() {
    // two identical bands, a contact interaction between them: the particle
    // stays in band 0 and excites a particle-hole pair in band 1
    let bands = [Dispersion::Cosine, Dispersion::Cosine];
    let ch = Channel { b: 0, b1: 1, b2: 0, b3: 1, vertex: Vertex::Contact };
    let k = 0.3;
    let r = classify_divergences(&bands, k, &[ch], &SearchOptions::default()).unwrap();
    assert!(r.points.iter().all(|p| p.status == PointStatus::LogDivergent), "{:?}", r.points);
    // brute-force scan oracle: minima of |phi| + |grad phi| on a fine grid
    let n = 4096;
    let h = 2.0 * PI / n as f64;
    let resid = |q: f64, p: f64| {
        let (a, b, c) = qplife::fgr::mismatch(&Dispersion::Cosine, k, q, p);
        a.abs() + b.abs() + c.abs()
    };
    let mut minima = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let (q, p) = (h * i as f64, h * j as f64);
            if resid(q, p) < 3.0 * h {
                minima.push((q, p));
            }
        }
    }
    for &(q, p) in &minima {
        let near = r.points.iter().any(|s| {
            let d = |x: f64, y: f64| {
                let t = (x - y).rem_euclid(2.0 * PI);
                t.min(2.0 * PI - t)
            };
            d(s.q, q).hypot(d(s.p, p)) < 10.0 * h
        });
        assert!(near, "scan minimum ({q}, {p}) not reported");
    }
    // every reported point has the outgoing velocity matching the incoming one
    for s in &r.points {
        let v = |x: f64| x.sin();
        assert!((v(k + s.p) - v(k)).abs() < 1e-8 || s.p.abs() < 1e-8);
    }
    assert_eq!(r.points.len(), 3);
}

#[test]
fn rate_is_quadratic_in_delta() {
    let a = fgr_rate(&FgrRequest::cosine(0.2, 0.1, 0.01, 128)).unwrap();
    let b = fgr_rate(&FgrRequest::cosine(0.2, 0.3, 0.01, 128)).unwrap();
    assert!((b / a - 9.0).abs() < 1e-12);
}

#[test]
fn finite_temperature_parity() {
    let req = |k| FgrRequest {
        temperature: Temperature::Finite { beta: 2.0, mu: 0.3 },
        ..FgrRequest::cosine(k, 0.1, 0.02, 256)
    };
    let a = fgr_rate(&req(0.4)).unwrap();
    let b = fgr_rate(&req(-0.4)).unwrap();
    assert!(a > 0.0);
    assert!((a - b).abs() < 1e-10 * a);
}

#[test]
fn high_temperature_limit_matches_infinite_temperature() {
    let inf = fgr_rate(&FgrRequest::cosine(0.3, 0.1, 0.02, 128)).unwrap();
    let hot = fgr_rate(&FgrRequest {
        temperature: Temperature::Finite { beta: 1e-13, mu: 0.0 },
        ..FgrRequest::cosine(0.3, 0.1, 0.02, 128)
    })
    .unwrap();
    assert!((hot - inf).abs() < 1e-10 * inf, "{hot} vs {inf}");
}

#[test]
fn bosons_give_a_positive_rate() {
    let req = FgrRequest {
        statistics: Statistics::Boson,
        temperature: Temperature::Finite { beta: 1.0, mu: -1.5 },
        ..FgrRequest::cosine(0.0, 0.1, 0.01, 256)
    };
    assert!(fgr_rate(&req).unwrap() > 0.0);
}

#[test]
fn grid_refinement() {
    // eta well above 10 (2 pi / L)^2 max|eps''| at L = 256
    let eta = 0.02;
    let a = fgr_rate(&FgrRequest::cosine(0.0, 0.1, eta, 256)).unwrap();
    let b = fgr_rate(&FgrRequest::cosine(0.0, 0.1, eta, 512)).unwrap();
    assert!((a - b).abs() < 5e-3 * b, "{a} {b}");
}

#[test]
fn cell_integration_agrees_with_riemann_sum_at_wide_broadening() {
    let req = FgrRequest::cosine(0.7, 0.1, 0.2, 512);
    let a = fgr_rate(&req).unwrap();
    let b = fgr_rate_riemann(&req).unwrap();
    assert!((a - b).abs() < 1e-3 * b, "{a} {b}");
}

#[test]
fn log_coefficient_matches_saddle_point_prediction() {
    // near each saddle phi ~ det-normalised hyperbola, contributing
    // 2 D^2 w / (2 pi sqrt|det H|) to the coefficient of log(1/eta)
    let delta = 0.1;
    for k in [0.0, 0.3] {
        let fit = log_slope(&FgrRequest::cosine(k, delta, 0.0, 1024), &log_spaced(1e-2, 1e-3, 5)).unwrap();
        let report = single_band(k);
        let predicted = predicted_log_coefficient(&report, delta, 0.25);
        let closed_form = 2.0 * delta * delta * f64::cos(k).abs().powi(3) / PI;
        assert!((predicted - closed_form).abs() < 1e-10 * closed_form);
        assert!((fit.c1 - predicted).abs() < 0.05 * predicted, "k={k}: {} vs {predicted}", fit.c1);
    }
}

#[test]
fn quarter_filling_rate_converges() {
    let rates: Vec<f64> = [0.1, 0.05, 0.025]
        .iter()
        .map(|&eta| fgr_rate(&FgrRequest::cosine(PI / 2.0, 0.1, eta, 1024)).unwrap())
        .collect();
    assert!((rates[2] - rates[1]).abs() < 0.02 * rates[2], "{rates:?}");
}

#[test]
fn thread_count_does_not_change_the_result() {
    let req = FgrRequest::cosine(0.2, 0.1, 0.003, 256);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let serial = pool.install(|| fgr_rate(&req).unwrap());
    let parallel = fgr_rate(&req).unwrap();
    assert_eq!(serial.to_bits(), parallel.to_bits());
}
