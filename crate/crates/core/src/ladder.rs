//! Particle-particle ladder resummation of the on-shell self-energy.
//!
//! Only the closed-form end products are implemented: the contour integrals
//! `f(0)`, `f(2)` and the resummed rate
//!
//! ```text
//! 1/tau_k = 16 D^2 int dq/2pi |sin^3(q-k)| |cos q| / ((4 cos q - D cos(q-k))^2 + (D sin(q-k))^2)
//! ```
//!
//! The integrand has peaks of width `~D` next to the zeros of `cos q`, so the
//! quadrature is a composite Gauss-Legendre rule on panels that shrink
//! geometrically towards those points.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};

pub const MIN_RESOLUTION: usize = 1 << 14;
pub const TARGET_ERROR: f64 = 1e-6;

/// On-shell contour integral `f(n)` for `n` in `{0, 2}`.
pub fn f_onshell(n: u32, q: f64, k: f64) -> Result<Complex64> {
    let c = q.cos();
    let s = (q - k).sin();
    if c.abs() < 1e-14 || s.abs() < 1e-14 {
        return Err(Error::SingularPoint(format!("f({n}) at q = {q}, k = {k}")));
    }
    let denom = 8.0 * (c * s).abs();
    match n {
        0 => Ok(Complex64::new(1.0 / denom, 0.0)),
        2 => {
            let cq = (q - k).cos();
            Ok(Complex64::new((cq * cq - s * s) / denom, -cq / (4.0 * c)))
        }
        _ => Err(Error::invalid(format!("f(n) is only available for n = 0, 2; got {n}"))),
    }
}

/// Integrand of the resummed rate without the `16 D^2 / 2pi` prefactor.
pub fn integrand(q: f64, k: f64, delta: f64) -> f64 {
    let c = q.cos();
    let s = (q - k).sin();
    let a = 4.0 * c - delta * (q - k).cos();
    let b = delta * s;
    (s * s * s).abs() * c.abs() / (a * a + b * b)
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for j in 2..=n {
                let p2 = ((2 * j - 1) as f64 * z * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = p2;
            }
            if n == 1 {
                p0 = 1.0;
                p1 = z;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

/// Positions of the two resonances, where `4 cos q = D cos(q - k)`.
pub fn peak_positions(k: f64, delta: f64) -> [f64; 2] {
    let q = (4.0 - delta * k.cos()).atan2(delta * k.sin());
    [q.rem_euclid(2.0 * PI), (q + PI).rem_euclid(2.0 * PI)]
}

/// Panel edges on `[0, 2 pi]`, graded towards the zeros of `cos q` and the
/// resonances down to a size `1e-3 D`.
fn panels(k: f64, delta: f64) -> Vec<(f64, f64)> {
    let two_pi = 2.0 * PI;
    let peaks = peak_positions(k, delta);
    let focus = [PI / 2.0, 1.5 * PI, peaks[0], peaks[1]];
    let mut breaks: Vec<f64> = vec![0.0, two_pi];
    breaks.extend(focus);
    breaks.extend([k.rem_euclid(two_pi), (k + PI).rem_euclid(two_pi)]);
    breaks.sort_by(|a, b| a.partial_cmp(b).unwrap());
    breaks.dedup_by(|a, b| (*a - *b).abs() < 1e-15);
    let is_focus = |x: f64| focus.iter().any(|f| (f - x).abs() < 1e-15);
    let min_size = 1e-3 * delta.max(1e-300);
    let mut out = Vec::new();
    // geometric edges from `from` (a focus point) towards `to`
    let graded = |from: f64, to: f64, out: &mut Vec<(f64, f64)>| {
        let len = (to - from).abs();
        let dir = (to - from).signum();
        let mut edges = vec![0.0];
        let mut d = min_size.min(0.5 * len);
        while d < len {
            edges.push(d);
            d *= 2.0;
        }
        edges.push(len);
        for w in edges.windows(2) {
            let (a, b) = (from + dir * w[0], from + dir * w[1]);
            out.push(if a < b { (a, b) } else { (b, a) });
        }
    };
    for w in breaks.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b - a < 1e-15 {
            continue;
        }
        match (is_focus(a), is_focus(b)) {
            (false, false) => out.push((a, b)),
            (true, false) => graded(a, b, &mut out),
            (false, true) => graded(b, a, &mut out),
            (true, true) => {
                let m = 0.5 * (a + b);
                graded(a, m, &mut out);
                graded(b, m, &mut out);
            }
        }
    }
    out.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    out
}

fn composite(k: f64, delta: f64, panels: &[(f64, f64)], order: usize) -> (f64, Vec<f64>) {
    let (x, w) = gauss_legendre(order);
    let mut total = 0.0;
    let mut nodes = Vec::with_capacity(panels.len() * order);
    for &(a, b) in panels {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut acc = 0.0;
        for (xi, wi) in x.iter().zip(&w) {
            let q = mid + half * xi;
            nodes.push(q);
            acc += wi * integrand(q, k, delta);
        }
        total += half * acc;
    }
    (16.0 * delta * delta * total / (2.0 * PI), nodes)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LadderResult {
    pub k: f64,
    pub delta: f64,
    pub rate: f64,
    /// Relative change of the rate when the node count is doubled.
    pub error_estimate: f64,
    pub nodes: usize,
    /// `(q, integrand)` on a uniform 256-point grid, for inspection.
    pub samples: Vec<(f64, f64)>,
}

/// Resummed ladder rate with about `resolution` quadrature nodes.
pub fn ladder_rate(k: f64, delta: f64, resolution: usize) -> Result<LadderResult> {
    if !(delta > 0.0 && delta.is_finite()) || !k.is_finite() {
        return Err(Error::invalid(format!("ladder rate needs finite k and Delta > 0, got k={k}, Delta={delta}")));
    }
    if resolution < MIN_RESOLUTION {
        return Err(Error::InsufficientResolution(format!(
            "resolution {resolution} is below the minimum {MIN_RESOLUTION}; the integrand has peaks of width ~Delta"
        )));
    }
    let panels = panels(k, delta);
    let order = (resolution / panels.len()).max(4);
    let (coarse, nodes) = composite(k, delta, &panels, order);
    for q0 in peak_positions(k, delta) {
        let s = (q0 - k).sin().abs();
        if s < 1e-2 {
            continue; // numerator vanishes there, no resonance
        }
        let width = 0.25 * delta * s;
        let inside = nodes.iter().filter(|&&q| (q - q0).abs() < width).count();
        if inside < 8 {
            return Err(Error::InsufficientResolution(format!(
                "resonance at q = {q0:.6} of width {width:.2e} sampled by {inside} nodes; raise the resolution"
            )));
        }
    }
    let (fine, _) = composite(k, delta, &panels, 2 * order);
    let error_estimate = ((fine - coarse) / fine).abs();
    if error_estimate > TARGET_ERROR {
        return Err(Error::InsufficientResolution(format!(
            "doubling changed the rate by {error_estimate:.2e} (target {TARGET_ERROR:.0e}); raise the resolution"
        )));
    }
    let samples = (0..256)
        .map(|i| {
            let q = 2.0 * PI * (i as f64 + 0.5) / 256.0;
            (q, integrand(q, k, delta))
        })
        .collect();
    Ok(LadderResult { k, delta, rate: fine, error_estimate, nodes: 2 * order * panels.len(), samples })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LadderAsymptotics {
    /// Coefficient of `log D^-2` in `rate / D^2`.
    pub alpha: f64,
    pub gamma: f64,
    pub residuals: Vec<f64>,
    pub condition_number: f64,
    pub ill_conditioned: bool,
}

/// Fits `rate(D) = D^2 (alpha log D^-2 + gamma)` over the given couplings.
pub fn ladder_asymptotics(k: f64, deltas: &[f64], resolution: usize) -> Result<LadderAsymptotics> {
    if deltas.len() < 2 {
        return Err(Error::invalid("need at least two couplings"));
    }
    let (lo, hi) = deltas.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &d| (a.min(d), b.max(d)));
    if !(lo > 0.0) || hi / lo < 1e3 * (1.0 - 1e-9) {
        return Err(Error::invalid("couplings must be positive and span at least three decades"));
    }
    let xs: Vec<f64> = deltas.iter().map(|d| -2.0 * d.ln()).collect();
    let mut ys = Vec::with_capacity(deltas.len());
    for &d in deltas {
        ys.push(ladder_rate(k, d, resolution)?.rate / (d * d));
    }
    // normal equations for y = alpha x + gamma
    let n = xs.len() as f64;
    let sx: f64 = xs.iter().sum();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let sy: f64 = ys.iter().sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| x * y).sum();
    let det = sxx * n - sx * sx;
    // condition number of the 2x2 design matrix from its Gram matrix
    let tr = sxx + n;
    let disc = ((sxx - n).powi(2) + 4.0 * sx * sx).sqrt();
    let (l_min, l_max) = (0.5 * (tr - disc), 0.5 * (tr + disc));
    let condition_number = if l_min > 0.0 { (l_max / l_min).sqrt() } else { f64::INFINITY };
    if det == 0.0 {
        return Err(Error::Numerical("degenerate asymptotics fit".into()));
    }
    let alpha = (n * sxy - sx * sy) / det;
    let gamma = (sxx * sy - sx * sxy) / det;
    let residuals = xs.iter().zip(&ys).map(|(x, y)| y - alpha * x - gamma).collect();
    Ok(LadderAsymptotics { alpha, gamma, residuals, condition_number, ill_conditioned: condition_number > 1e8 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn contour_values_at_quarter_pi() {
        let f0 = f_onshell(0, PI / 4.0, 0.0).unwrap();
        assert!((f0 - Complex64::new(0.25, 0.0)).norm() < 1e-14);
        let f2 = f_onshell(2, PI / 4.0, 0.0).unwrap();
        assert!((f2 - Complex64::new(0.0, -0.25)).norm() < 1e-14);
        let fm = f_onshell(0, -PI / 4.0, 0.0).unwrap();
        assert!((fm.re - 0.25).abs() < 1e-14);
    }

    #[test]
    fn contour_singularities() {
        assert!(matches!(f_onshell(0, PI / 2.0, 0.0), Err(Error::SingularPoint(_))));
        assert!(matches!(f_onshell(2, 0.3, 0.3), Err(Error::SingularPoint(_))));
        assert!(f_onshell(1, 0.3, 0.0).is_err());
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(7);
        let s: f64 = w.iter().sum();
        assert!((s - 2.0).abs() < 1e-14);
        let m12: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(12)).sum();
        assert!((m12 - 2.0 / 13.0).abs() < 1e-14);
    }

    #[test]
    fn peaks_satisfy_the_resonance_condition() {
        for k in [0.0, 0.4, 2.0] {
            for q in peak_positions(k, 0.01) {
                assert!((4.0 * q.cos() - 0.01 * (q - k).cos()).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn panels_tile_the_circle() {
        let p = panels(0.3, 1e-3);
        assert!(p[0].0.abs() < 1e-15);
        assert!((p.last().unwrap().1 - 2.0 * PI).abs() < 1e-12);
        for w in p.windows(2) {
            assert!((w[0].1 - w[1].0).abs() < 1e-12);
        }
    }

    #[test]
    fn refuses_low_resolution() {
        assert!(matches!(ladder_rate(0.0, 1e-3, 1000), Err(Error::InsufficientResolution(_))));
        assert!(ladder_rate(0.0, 0.0, MIN_RESOLUTION).is_err());
    }

    #[test]
    fn uniform_oracle_at_moderate_coupling() {
        // large D: a fine uniform midpoint rule is accurate enough
        let (k, d) = (0.3, 0.5);
        let n = 2_000_000;
        let h = 2.0 * PI / n as f64;
        let s: f64 = (0..n).map(|i| integrand(h * (i as f64 + 0.5), k, d)).sum();
        let oracle = 16.0 * d * d * s * h / (2.0 * PI);
        let r = ladder_rate(k, d, MIN_RESOLUTION).unwrap();
        assert!((r.rate - oracle).abs() < 1e-8 * oracle, "{} {oracle}", r.rate);
    }
}
