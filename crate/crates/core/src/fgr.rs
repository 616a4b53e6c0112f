//! Golden-Rule decay rates with Lorentzian broadening, and the search for
//! on-shell stationary points of the energy mismatch that make them diverge.
//!
//! With `phi_k(q, p) = eps_k - eps_{k+q} - eps_{k+p} + eps_{k+q+p}` the rate is
//!
//! ```text
//! 1/tau_k(eta) = 2 D^2 int dq dp / (2 pi)^2  (cos q - cos p)^2 N(q, p) eta / (phi^2 + eta^2)
//! ```
//!
//! where `N` is the occupation numerator: `1/4` at infinite temperature,
//! `n3 (1 - n1 - n2) + n1 n2` for fermions and `n3 (1 + n1 + n2) - n1 n2` for
//! bosons, with `n1 = n_{k+q}`, `n2 = n_{k+p}`, `n3 = n_{k+q+p}`.
//!
//! The momentum integral is a sum over the cells of the `L x L` grid. In each
//! cell `phi` is replaced by its tangent plane at the cell centre and the
//! Lorentzian is integrated over the cell exactly; the numerator is taken at
//! the centre. A plain Riemann sum puts whole lines of points exactly on
//! shell (`q = 0`, `p = 0`) and cannot resolve `eta` below a few grid
//! spacings, whereas the cell integral stays accurate down to `eta ~ 1/L^2`.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::analysis::linear_fit;
use crate::error::{Error, Result};
use crate::model::Dispersion;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Statistics {
    Fermion,
    Boson,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Temperature {
    /// `beta = 0`: every fermion occupation is `1/2`.
    Infinite,
    Finite { beta: f64, mu: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FgrRequest {
    pub k: f64,
    pub delta: f64,
    pub eta: f64,
    pub statistics: Statistics,
    pub temperature: Temperature,
    pub n_sites: usize,
    pub dispersion: Dispersion,
}

impl FgrRequest {
    /// Infinite-temperature fermions in the cosine band.
    pub fn cosine(k: f64, delta: f64, eta: f64, n_sites: usize) -> Self {
        Self {
            k,
            delta,
            eta,
            statistics: Statistics::Fermion,
            temperature: Temperature::Infinite,
            n_sites,
            dispersion: Dispersion::Cosine,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::invalid(format!("eta must be positive, got {}", self.eta)));
        }
        if self.n_sites < 64 || !self.n_sites.is_multiple_of(2) {
            return Err(Error::invalid(format!("grid needs an even L >= 64, got {}", self.n_sites)));
        }
        if !self.k.is_finite() || !self.delta.is_finite() {
            return Err(Error::invalid("k and Delta must be finite"));
        }
        match (self.statistics, self.temperature) {
            (Statistics::Boson, Temperature::Infinite) => {
                return Err(Error::invalid("bosons need a finite temperature and a chemical potential"))
            }
            (_, Temperature::Finite { beta, mu }) => {
                if !(beta > 0.0 && beta.is_finite() && mu.is_finite()) {
                    return Err(Error::invalid("finite temperature needs 0 < beta < inf and finite mu"));
                }
                if self.statistics == Statistics::Boson {
                    let l = self.n_sites;
                    let min_eps = (0..l)
                        .map(|j| self.dispersion.energy(2.0 * PI * j as f64 / l as f64))
                        .fold(f64::INFINITY, f64::min);
                    if mu >= min_eps {
                        return Err(Error::invalid(format!(
                            "Bose occupation diverges: mu = {mu} must lie below the band minimum {min_eps}"
                        )));
                    }
                }
            }
            _ => {}
        }
        Ok(())
    }

    fn occupation(&self, eps: f64) -> f64 {
        match (self.statistics, self.temperature) {
            (_, Temperature::Infinite) => 0.5,
            (Statistics::Fermion, Temperature::Finite { beta, mu }) => {
                // 1/(e^x + 1) written to avoid overflow
                let x = beta * (eps - mu);
                if x > 0.0 {
                    let e = (-x).exp();
                    e / (1.0 + e)
                } else {
                    1.0 / (1.0 + x.exp())
                }
            }
            (Statistics::Boson, Temperature::Finite { beta, mu }) => 1.0 / (beta * (eps - mu)).exp_m1(),
        }
    }

    /// Occupation numerator `N(q, p)`.
    pub fn numerator(&self, q: f64, p: f64) -> f64 {
        if self.temperature == Temperature::Infinite && self.statistics == Statistics::Fermion {
            return 0.25;
        }
        let d = &self.dispersion;
        let n1 = self.occupation(d.energy(self.k + q));
        let n2 = self.occupation(d.energy(self.k + p));
        let n3 = self.occupation(d.energy(self.k + q + p));
        match self.statistics {
            Statistics::Fermion => n3 * (1.0 - n1 - n2) + n1 * n2,
            Statistics::Boson => n3 * (1.0 + n1 + n2) - n1 * n2,
        }
    }
}

/// `phi_k(q, p)` and its gradient for one dispersion.
pub fn mismatch(d: &Dispersion, k: f64, q: f64, p: f64) -> (f64, f64, f64) {
    let phi = d.energy(k) - d.energy(k + q) - d.energy(k + p) + d.energy(k + q + p);
    let v3 = d.velocity(k + q + p);
    (phi, v3 - d.velocity(k + q), v3 - d.velocity(k + p))
}

fn lorentzian(a: f64, eta: f64) -> f64 {
    eta / (a * a + eta * eta)
}

/// Antiderivative of `atan(x / eta)`.
fn f2(u: f64, eta: f64) -> f64 {
    u * (u / eta).atan() - 0.5 * eta * (u * u + eta * eta).ln()
}

/// Mean of `eta / (x^2 + eta^2)` for `x` uniform on `[a - w/2, a + w/2]`.
fn segment_mean(a: f64, w: f64, eta: f64) -> f64 {
    (eta * w).atan2(eta * eta + (a - 0.5 * w) * (a + 0.5 * w)) / w
}

/// Mean of `eta / (x^2 + eta^2)` over the parallelogram
/// `x = a + b u + c v`, `u, v` in `[-1/2, 1/2]`.
pub fn cell_lorentzian(a: f64, b: f64, c: f64, eta: f64) -> f64 {
    let half = 0.5 * (b.abs() + c.abs());
    let dist = (a * a + eta * eta).sqrt();
    if half < 0.02 * dist && a.abs() > half {
        // far from the resonance: second-order Taylor average
        let s = a * a + eta * eta;
        let second = eta * (6.0 * a * a - 2.0 * eta * eta) / (s * s * s);
        return lorentzian(a, eta) + (b * b + c * c) / 24.0 * second;
    }
    let scale = 1e-3 * (a.abs() + eta);
    match (b.abs() < scale, c.abs() < scale) {
        (true, true) => lorentzian(a, eta),
        (true, false) => segment_mean(a, c, eta),
        (false, true) => segment_mean(a, b, eta),
        (false, false) => {
            let (hb, hc) = (0.5 * b, 0.5 * c);
            (f2(a + hb + hc, eta) - f2(a - hb + hc, eta) - f2(a + hb - hc, eta) + f2(a - hb - hc, eta))
                / (b * c)
        }
    }
}

/// Golden-Rule rate `1/tau_k(eta)`.
pub fn fgr_rate(req: &FgrRequest) -> Result<f64> {
    req.validate()?;
    let l = req.n_sites;
    let h = 2.0 * PI / l as f64;
    let d = &req.dispersion;
    let rows: Vec<f64> = (0..l)
        .into_par_iter()
        .map(|i| {
            let q = h * i as f64;
            let cq = q.cos();
            let mut acc = 0.0;
            for j in 0..l {
                let p = h * j as f64;
                let v = cq - p.cos();
                let w = v * v * req.numerator(q, p);
                if w == 0.0 {
                    continue;
                }
                let (phi, dq, dp) = mismatch(d, req.k, q, p);
                acc += w * cell_lorentzian(phi, dq * h, dp * h, req.eta);
            }
            acc
        })
        .collect();
    let total: f64 = rows.iter().sum();
    Ok(2.0 * req.delta * req.delta * total / (l * l) as f64)
}

/// The same integral as a plain Riemann sum of the Lorentzian at the grid
/// points; only reliable when `eta` is many grid spacings wide.
pub fn fgr_rate_riemann(req: &FgrRequest) -> Result<f64> {
    req.validate()?;
    let l = req.n_sites;
    let h = 2.0 * PI / l as f64;
    let mut total = 0.0;
    for i in 0..l {
        let q = h * i as f64;
        for j in 0..l {
            let p = h * j as f64;
            let v = q.cos() - p.cos();
            let (phi, _, _) = mismatch(&req.dispersion, req.k, q, p);
            total += v * v * req.numerator(q, p) * lorentzian(phi, req.eta);
        }
    }
    Ok(2.0 * req.delta * req.delta * total / (l * l) as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LogSlope {
    pub c0: f64,
    pub c1: f64,
    pub r2: f64,
    /// `(eta, rate)` pairs the fit was made on.
    pub samples: Vec<(f64, f64)>,
}

/// Fits `1/tau(eta) = c0 + c1 log(1/eta)` over the given broadenings.
pub fn log_slope(base: &FgrRequest, etas: &[f64]) -> Result<LogSlope> {
    if etas.len() < 4 {
        return Err(Error::invalid(format!("need at least 4 eta values, got {}", etas.len())));
    }
    let mut samples = Vec::with_capacity(etas.len());
    for &eta in etas {
        let rate = fgr_rate(&FgrRequest { eta, ..base.clone() })?;
        samples.push((eta, rate));
    }
    let xs: Vec<f64> = etas.iter().map(|e| -e.ln()).collect();
    let ys: Vec<f64> = samples.iter().map(|s| s.1).collect();
    let (c0, c1, r2) = linear_fit(&xs, &ys)?;
    Ok(LogSlope { c0, c1, r2, samples })
}

/// `n` values log-spaced from `hi` down to `lo`.
pub fn log_spaced(hi: f64, lo: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![hi];
    }
    (0..n).map(|i| hi * (lo / hi).powf(i as f64 / (n - 1) as f64)).collect()
}

/// Interaction vertex attached to a scattering channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Vertex {
    /// `cos q - cos p`; vanishes for `q = p` (Pauli exclusion).
    NearestNeighbour,
    /// Momentum-independent contact interaction between distinct labels.
    Contact,
}

impl Vertex {
    pub fn weight(&self, q: f64, p: f64) -> f64 {
        match self {
            Vertex::NearestNeighbour => (q.cos() - p.cos()).powi(2),
            Vertex::Contact => 1.0,
        }
    }
}

/// Process `b(k) -> b2(k+q) + b3(k+p) - b1(k+q+p)` with mismatch
/// `eps_b(k) + eps_b1(k+q+p) - eps_b2(k+q) - eps_b3(k+p)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Channel {
    pub b: usize,
    pub b1: usize,
    pub b2: usize,
    pub b3: usize,
    pub vertex: Vertex,
}

impl Channel {
    pub fn single_band() -> Self {
        Self { b: 0, b1: 0, b2: 0, b3: 0, vertex: Vertex::NearestNeighbour }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PointStatus {
    LogDivergent,
    /// The vertex weight vanishes at the point.
    Nullified,
    /// Newton did not converge; residuals are those of the last iterate.
    Unresolved,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StationaryPoint {
    pub channel: usize,
    pub q: f64,
    pub p: f64,
    /// `(phi, d_q phi, d_p phi)`.
    pub residuals: (f64, f64, f64),
    /// Signs of the Hessian eigenvalues, e.g. `"+-"`, or `"0"` when singular.
    pub hessian_signature: String,
    pub hessian_det: f64,
    pub weight: f64,
    pub status: PointStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DivergenceReport {
    pub k: f64,
    pub points: Vec<StationaryPoint>,
}

impl DivergenceReport {
    pub fn divergent(&self) -> impl Iterator<Item = &StationaryPoint> {
        self.points.iter().filter(|p| p.status == PointStatus::LogDivergent)
    }
}

/// Options of the stationary-point search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchOptions {
    /// Points per axis of the coarse residual map.
    pub scan: usize,
    pub tolerance: f64,
    /// A point is nullified when its weight is below this fraction of the
    /// largest weight on the scan grid.
    pub null_fraction: f64,
    pub max_iter: usize,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self { scan: 256, tolerance: 1e-8, null_fraction: 1e-10, max_iter: 200 }
    }
}

struct ChannelPhi<'a> {
    bands: &'a [Dispersion],
    ch: Channel,
    k: f64,
}

impl ChannelPhi<'_> {
    fn eval(&self, q: f64, p: f64) -> (f64, f64, f64) {
        let (b, b1, b2, b3) =
            (&self.bands[self.ch.b], &self.bands[self.ch.b1], &self.bands[self.ch.b2], &self.bands[self.ch.b3]);
        let k = self.k;
        let phi = b.energy(k) + b1.energy(k + q + p) - b2.energy(k + q) - b3.energy(k + p);
        let v1 = b1.velocity(k + q + p);
        (phi, v1 - b2.velocity(k + q), v1 - b3.velocity(k + p))
    }

    /// `[[phi_qq, phi_qp], [phi_qp, phi_pp]]`.
    fn hessian(&self, q: f64, p: f64) -> [f64; 3] {
        let (b1, b2, b3) = (&self.bands[self.ch.b1], &self.bands[self.ch.b2], &self.bands[self.ch.b3]);
        let k = self.k;
        let c1 = b1.curvature(k + q + p);
        [c1 - b2.curvature(k + q), c1, c1 - b3.curvature(k + p)]
    }
}

fn wrap(x: f64) -> f64 {
    let y = x.rem_euclid(2.0 * PI);
    if 2.0 * PI - y < 1e-12 {
        0.0
    } else {
        y
    }
}

fn periodic_distance(a: (f64, f64), b: (f64, f64)) -> f64 {
    let d = |x: f64, y: f64| {
        let t = (x - y).rem_euclid(2.0 * PI);
        t.min(2.0 * PI - t)
    };
    d(a.0, b.0).hypot(d(a.1, b.1))
}

/// Levenberg-Marquardt on `grad phi = 0`; returns the final point and
/// whether the gradient reached `tol`.
fn polish(f: &ChannelPhi, mut q: f64, mut p: f64, opts: &SearchOptions) -> (f64, f64, bool) {
    let mut lambda = 1e-6;
    let norm = |q: f64, p: f64| {
        let (_, gq, gp) = f.eval(q, p);
        gq.hypot(gp)
    };
    let mut cur = norm(q, p);
    for _ in 0..opts.max_iter {
        if cur < 1e-3 * opts.tolerance {
            break;
        }
        let (_, gq, gp) = f.eval(q, p);
        let [hqq, hqp, hpp] = f.hessian(q, p);
        // (H^T H + lambda I) s = -H^T g, H symmetric
        let a11 = hqq * hqq + hqp * hqp + lambda;
        let a12 = hqq * hqp + hqp * hpp;
        let a22 = hqp * hqp + hpp * hpp + lambda;
        let r1 = -(hqq * gq + hqp * gp);
        let r2 = -(hqp * gq + hpp * gp);
        let det = a11 * a22 - a12 * a12;
        if det == 0.0 || !det.is_finite() {
            break;
        }
        let sq = (a22 * r1 - a12 * r2) / det;
        let sp = (a11 * r2 - a12 * r1) / det;
        let trial = norm(q + sq, p + sp);
        if trial < cur {
            q += sq;
            p += sp;
            cur = trial;
            lambda = (lambda * 0.3).max(1e-15);
        } else {
            lambda *= 10.0;
            if lambda > 1e12 {
                break;
            }
        }
    }
    (q, p, cur < opts.tolerance)
}

fn signature(h: [f64; 3]) -> (String, f64) {
    let [a, b, c] = h;
    let det = a * c - b * b;
    let tr = a + c;
    let disc = ((a - c) * (a - c) + 4.0 * b * b).sqrt();
    let (l1, l2) = (0.5 * (tr - disc), 0.5 * (tr + disc));
    let scale = 1e-9 * (a.abs() + b.abs() + c.abs()).max(1e-300);
    let sign = |x: f64| {
        if x.abs() <= scale {
            '0'
        } else if x > 0.0 {
            '+'
        } else {
            '-'
        }
    };
    let s: String = [sign(l1), sign(l2)].iter().collect();
    let s = if s == "00" { "0".to_string() } else { s };
    (s, det)
}

/// Locates every on-shell stationary point of each channel's mismatch.
pub fn classify_divergences(
    bands: &[Dispersion],
    k: f64,
    channels: &[Channel],
    opts: &SearchOptions,
) -> Result<DivergenceReport> {
    if bands.is_empty() || channels.is_empty() {
        return Err(Error::invalid("need at least one band and one channel"));
    }
    if opts.scan < 16 {
        return Err(Error::invalid("scan grid must have at least 16 points per axis"));
    }
    for ch in channels {
        if [ch.b, ch.b1, ch.b2, ch.b3].iter().any(|&b| b >= bands.len()) {
            return Err(Error::invalid(format!("channel {ch:?} refers to a missing band")));
        }
    }
    let n = opts.scan;
    let h = 2.0 * PI / n as f64;
    let mut points: Vec<StationaryPoint> = Vec::new();
    for (ci, &ch) in channels.iter().enumerate() {
        let f = ChannelPhi { bands, ch, k };
        let mut resid = vec![0.0; n * n];
        let mut max_weight: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let (q, p) = (h * i as f64, h * j as f64);
                let (phi, gq, gp) = f.eval(q, p);
                resid[i * n + j] = phi.abs() + gq.abs() + gp.abs();
                max_weight = max_weight.max(ch.vertex.weight(q, p));
            }
        }
        // local minima of the residual map that are small on the grid scale
        let threshold = 4.0 * h;
        let mut seeds = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let r = resid[i * n + j];
                if r > threshold {
                    continue;
                }
                let is_min = (-1i64..=1).all(|di| {
                    (-1i64..=1).all(|dj| {
                        let ii = (i as i64 + di).rem_euclid(n as i64) as usize;
                        let jj = (j as i64 + dj).rem_euclid(n as i64) as usize;
                        resid[ii * n + jj] >= r
                    })
                });
                if is_min {
                    seeds.push((h * i as f64, h * j as f64));
                }
            }
        }
        let mut found: Vec<StationaryPoint> = Vec::new();
        for (q0, p0) in seeds {
            let (q, p, ok) = polish(&f, q0, p0, opts);
            let (q, p) = (wrap(q), wrap(p));
            let res = f.eval(q, p);
            let on_shell = res.0.abs() < opts.tolerance;
            if ok && !on_shell {
                continue; // stationary but off shell: no divergence
            }
            let hess = f.hessian(q, p);
            let (sig, det) = signature(hess);
            let weight = ch.vertex.weight(q, p);
            let status = if !ok {
                PointStatus::Unresolved
            } else if weight < opts.null_fraction * max_weight {
                PointStatus::Nullified
            } else {
                PointStatus::LogDivergent
            };
            // degenerate points converge slowly, so merge generously there
            let merge = if sig.contains('0') { 1e-3 } else { 1e-6 };
            if found.iter().any(|o| periodic_distance((o.q, o.p), (q, p)) < merge) {
                continue;
            }
            if status == PointStatus::Unresolved && res.0.abs() > threshold {
                continue; // seed drifted to an off-shell region
            }
            found.push(StationaryPoint {
                channel: ci,
                q,
                p,
                residuals: res,
                hessian_signature: sig,
                hessian_det: det,
                weight,
                status,
            });
        }
        found.sort_by(|a, b| (a.q, a.p).partial_cmp(&(b.q, b.p)).unwrap());
        points.extend(found);
    }
    Ok(DivergenceReport { k, points })
}

/// Coefficient of `log(1/eta)` in `1/tau(eta)` predicted from the saddle
/// points of the report: `2 D^2 sum_points w N / (2 pi sqrt|det H|)`.
pub fn predicted_log_coefficient(report: &DivergenceReport, delta: f64, numerator: f64) -> f64 {
    report
        .divergent()
        .filter(|p| p.hessian_det < 0.0)
        .map(|p| 2.0 * delta * delta * p.weight * numerator / (2.0 * PI * p.hessian_det.abs().sqrt()))
        .sum()
}
