//! Rate extraction, scaling-law comparison and collapse tables.

use std::cmp::Ordering;

use serde::Serialize;

use crate::error::{Error, Result};

/// Window for the exponential fit, as fractions of the initial value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowPolicy {
    pub upper: f64,
    pub lower: f64,
}

impl Default for WindowPolicy {
    fn default() -> Self {
        Self { upper: 0.2, lower: 0.02 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateFit {
    pub rate: f64,
    /// Fitted `log value` at `t = 0`.
    pub intercept: f64,
    pub window: (f64, f64),
    pub r2: f64,
    /// Half-range of the rates over windows shifted by +-25% of their length.
    pub error: f64,
    pub n_points: usize,
    /// False when the series ended before reaching the lower edge.
    pub reached_lower: bool,
}

struct LineFit {
    slope: f64,
    intercept: f64,
    r2: f64,
}

fn weighted_line(xs: &[f64], ys: &[f64], ws: &[f64]) -> Option<LineFit> {
    let sw: f64 = ws.iter().sum();
    if xs.len() < 2 || sw <= 0.0 {
        return None;
    }
    let mx = xs.iter().zip(ws).map(|(x, w)| x * w).sum::<f64>() / sw;
    let my = ys.iter().zip(ws).map(|(y, w)| y * w).sum::<f64>() / sw;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for ((x, y), w) in xs.iter().zip(ys).zip(ws) {
        sxx += w * (x - mx) * (x - mx);
        sxy += w * (x - mx) * (y - my);
        syy += w * (y - my) * (y - my);
    }
    if sxx <= 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let r2 = if syy > 0.0 { (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0) } else { 1.0 };
    Some(LineFit { slope, intercept: my - slope * mx, r2 })
}

/// Ordinary least-squares line `y = c0 + c1 x`; returns `(c0, c1, r2)`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<(f64, f64, f64)> {
    if xs.len() != ys.len() {
        return Err(Error::invalid("x and y lengths differ"));
    }
    let ws = vec![1.0; xs.len()];
    let f = weighted_line(xs, ys, &ws).ok_or_else(|| Error::invalid("need two distinct abscissae"))?;
    Ok((f.intercept, f.slope, f.r2))
}

/// Fits `log|value| = intercept - rate t` on the policy window.
///
/// `errors`, when given, are standard errors of the values; points are then
/// weighted by `(value / error)^2`, the inverse variance of the log.
pub fn extract_rate(
    times: &[f64],
    values: &[f64],
    errors: Option<&[f64]>,
    policy: &WindowPolicy,
) -> Result<RateFit> {
    if times.len() != values.len() || errors.is_some_and(|e| e.len() != values.len()) {
        return Err(Error::invalid("times, values and errors must have equal lengths"));
    }
    if !(policy.upper > policy.lower && policy.lower > 0.0) {
        return Err(Error::invalid("window policy needs 0 < lower < upper"));
    }
    let Some(&v0) = values.first() else {
        return Err(Error::invalid("empty series"));
    };
    let v0 = v0.abs();
    if v0 == 0.0 {
        return Err(Error::invalid("series starts at zero"));
    }
    let ratio = |i: usize| values[i].abs() / v0;
    let min_ratio = (0..values.len()).map(ratio).fold(f64::INFINITY, f64::min);
    let start = (0..values.len()).find(|&i| ratio(i) <= policy.upper);
    let Some(start) = start else {
        return Err(Error::InsufficientDecay { min_ratio });
    };
    let end_excl = (start..values.len()).find(|&i| ratio(i) < policy.lower);
    let reached_lower = end_excl.is_some();
    let end = end_excl.map_or(values.len() - 1, |e| e.saturating_sub(1).max(start));
    if end < start + 2 {
        return Err(Error::InsufficientDecay { min_ratio });
    }

    let fit_on = |lo: f64, hi: f64| -> Option<LineFit> {
        let idx: Vec<usize> = (0..times.len())
            .filter(|&i| times[i] >= lo && times[i] <= hi && values[i] != 0.0)
            .collect();
        if idx.len() < 3 {
            return None;
        }
        let xs: Vec<f64> = idx.iter().map(|&i| times[i]).collect();
        let ys: Vec<f64> = idx.iter().map(|&i| values[i].abs().ln()).collect();
        let ws: Vec<f64> = match errors {
            Some(e) => idx
                .iter()
                .map(|&i| if e[i] > 0.0 { (values[i] / e[i]).powi(2) } else { 1.0 })
                .collect(),
            None => vec![1.0; idx.len()],
        };
        weighted_line(&xs, &ys, &ws)
    };

    let (t1, t2) = (times[start], times[end]);
    let main = fit_on(t1, t2).ok_or(Error::InsufficientDecay { min_ratio })?;
    let shift = 0.25 * (t2 - t1);
    let mut rates = vec![-main.slope];
    for s in [-shift, shift] {
        if let Some(f) = fit_on(t1 + s, t2 + s) {
            rates.push(-f.slope);
        }
    }
    let hi = rates.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = rates.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(RateFit {
        rate: -main.slope,
        intercept: main.intercept,
        window: (t1, t2),
        r2: main.r2,
        error: 0.5 * (hi - lo),
        n_points: end - start + 1,
        reached_lower,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelTag {
    Quadratic,
    LogEnhanced,
}

impl std::fmt::Display for ModelTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ModelTag::Quadratic => "quadratic",
            ModelTag::LogEnhanced => "log-enhanced",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingLaw {
    pub model: ModelTag,
    /// `[c]` for the quadratic law, `[a, b]` for `a D^2 log(b D^-2)`.
    pub params: Vec<f64>,
    /// Sum of squared residuals in `log rate`.
    pub ssr: f64,
    pub converged: bool,
    /// False when `a <= 0` or `b D^-2 <= 1` somewhere in the data range.
    pub identifiable: bool,
    /// `(a, b, ssr)` samples around the final point, filled when the
    /// optimiser did not converge.
    pub landscape: Vec<(f64, f64, f64)>,
}

impl ScalingLaw {
    /// Predicted rate at coupling `delta`.
    pub fn predict(&self, delta: f64) -> f64 {
        let d2 = delta * delta;
        match self.model {
            ModelTag::Quadratic => self.params[0] * d2,
            ModelTag::LogEnhanced => self.params[0] * d2 * (self.params[1] / d2).ln(),
        }
    }

    /// Residual variance per degree of freedom.
    pub fn ssr_per_dof(&self, n_points: usize) -> f64 {
        let dof = n_points.saturating_sub(self.params.len()).max(1);
        self.ssr / dof as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingComparison {
    pub quadratic: ScalingLaw,
    pub log_enhanced: ScalingLaw,
    /// Model with the lower residual per degree of freedom; the log-enhanced
    /// law only competes when identifiable. Ties go to the quadratic law.
    pub preferred: ModelTag,
    pub n_points: usize,
}

fn log_residuals(xs: &[f64], ys: &[f64], a: f64, b: f64) -> Option<Vec<f64>> {
    // model for y = rate / D^2 is A + B x with x = log D^-2
    xs.iter()
        .zip(ys)
        .map(|(x, y)| {
            let m = a + b * x;
            (m > 0.0).then(|| m.ln() - y.ln())
        })
        .collect()
}

fn ssr(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

/// Data requirements of [`fit_scaling_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub min_points: usize,
    /// Required ratio of the largest to the smallest coupling.
    pub min_span: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { min_points: 5, min_span: 4.0 }
    }
}

/// Compares `c D^2` with `a D^2 log(b D^-2)` by least squares in `log rate`.
///
/// The log-enhanced law is linear in `(A, B) = (a log b, a)` for
/// `rate / D^2 = A + B log D^-2`; a weighted linear fit provides the start for
/// Gauss-Newton iterations on the log residuals.
pub fn fit_scaling(points: &[(f64, f64)]) -> Result<ScalingComparison> {
    fit_scaling_with(points, &FitOptions::default())
}

/// [`fit_scaling`] with explicit data requirements.
pub fn fit_scaling_with(points: &[(f64, f64)], options: &FitOptions) -> Result<ScalingComparison> {
    if points.len() < options.min_points.max(3) {
        return Err(Error::invalid(format!(
            "need at least {} (Delta, rate) points, got {}",
            options.min_points.max(3),
            points.len()
        )));
    }
    if points.iter().any(|&(d, r)| !(d > 0.0 && r > 0.0 && d.is_finite() && r.is_finite())) {
        return Err(Error::invalid("Delta and rate must be positive and finite"));
    }
    let dmin = points.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let dmax = points.iter().map(|p| p.0).fold(0.0, f64::max);
    if dmax < options.min_span * dmin * (1.0 - 1e-12) {
        return Err(Error::invalid(format!("Delta values must span at least a factor of {}", options.min_span)));
    }
    // sort so the result does not depend on input order
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal));
    let n = pts.len();
    let xs: Vec<f64> = pts.iter().map(|&(d, _)| -2.0 * d.ln()).collect();
    let ys: Vec<f64> = pts.iter().map(|&(d, r)| r / (d * d)).collect();

    let log_c = ys.iter().map(|y| y.ln()).sum::<f64>() / n as f64;
    let quad_res: Vec<f64> = ys.iter().map(|y| log_c - y.ln()).collect();
    let quadratic = ScalingLaw {
        model: ModelTag::Quadratic,
        params: vec![log_c.exp()],
        ssr: ssr(&quad_res),
        converged: true,
        identifiable: true,
        landscape: Vec::new(),
    };

    // weights 1/y^2 make linear residuals approximate log residuals
    let ws: Vec<f64> = ys.iter().map(|y| 1.0 / (y * y)).collect();
    let start = weighted_line(&xs, &ys, &ws).ok_or_else(|| Error::invalid("degenerate Delta values"))?;
    let (mut a0, mut b0) = (start.intercept, start.slope);
    if log_residuals(&xs, &ys, a0, b0).is_none() {
        a0 = ys.iter().cloned().fold(f64::INFINITY, f64::min);
        b0 = 0.0;
    }
    let (a_fit, b_fit, converged) = gauss_newton(&xs, &ys, a0, b0);
    let res = log_residuals(&xs, &ys, a_fit, b_fit).expect("iterates stay feasible");
    let a = b_fit;
    let b = if a != 0.0 { (a_fit / a).exp() } else { f64::NAN };
    let identifiable = a > 0.0 && b.is_finite() && xs.iter().all(|x| (a_fit + a * x) > 0.0);
    let landscape = if converged {
        Vec::new()
    } else {
        let mut out = Vec::new();
        for i in -2..=2 {
            for j in -2..=2 {
                let aa = a * (1.0 + 0.1 * i as f64);
                let lb = (a_fit / a) + 0.1 * j as f64;
                if let Some(r) = log_residuals(&xs, &ys, aa * lb, aa) {
                    out.push((aa, lb.exp(), ssr(&r)));
                }
            }
        }
        out
    };
    let log_enhanced = ScalingLaw {
        model: ModelTag::LogEnhanced,
        params: vec![a, b],
        ssr: ssr(&res),
        converged,
        identifiable,
        landscape,
    };
    let preferred = if identifiable && log_enhanced.ssr_per_dof(n) < quadratic.ssr_per_dof(n) {
        ModelTag::LogEnhanced
    } else {
        ModelTag::Quadratic
    };
    Ok(ScalingComparison { quadratic, log_enhanced, preferred, n_points: n })
}

/// Damped Gauss-Newton for `min sum (log(A + B x) - log y)^2`.
fn gauss_newton(xs: &[f64], ys: &[f64], mut a: f64, mut b: f64) -> (f64, f64, bool) {
    let mut cur = ssr(&log_residuals(xs, ys, a, b).unwrap());
    for _ in 0..200 {
        // J rows: d/dA = 1/m, d/dB = x/m
        let (mut jaa, mut jab, mut jbb, mut ga, mut gb) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (x, y) in xs.iter().zip(ys) {
            let m = a + b * x;
            let r = m.ln() - y.ln();
            let (da, db) = (1.0 / m, x / m);
            jaa += da * da;
            jab += da * db;
            jbb += db * db;
            ga += da * r;
            gb += db * r;
        }
        let det = jaa * jbb - jab * jab;
        if det.abs() < 1e-300 {
            return (a, b, false);
        }
        let sa = -(jbb * ga - jab * gb) / det;
        let sb = -(-jab * ga + jaa * gb) / det;
        let mut lambda = 1.0;
        let mut improved = false;
        while lambda > 1e-10 {
            let (na, nb) = (a + lambda * sa, b + lambda * sb);
            if let Some(r) = log_residuals(xs, ys, na, nb) {
                let s = ssr(&r);
                if s <= cur {
                    let done = (cur - s) <= 1e-15 * (1.0 + cur)
                        && (lambda * sa).abs() <= 1e-10 * (1.0 + a.abs())
                        && (lambda * sb).abs() <= 1e-10 * (1.0 + b.abs());
                    a = na;
                    b = nb;
                    cur = s;
                    improved = true;
                    if done {
                        return (a, b, true);
                    }
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !improved {
            // no descent left along the Gauss-Newton direction
            let grad = (ga * ga + gb * gb).sqrt();
            return (a, b, grad < 1e-8 * (1.0 + cur.sqrt()));
        }
    }
    (a, b, false)
}

/// One decay curve of a collapse study.
#[derive(Debug, Clone, PartialEq)]
pub struct CollapseSeries {
    pub delta: f64,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CollapseTable {
    /// `(Delta, t / tau, value / value(0))`.
    pub rows: Vec<(f64, f64, f64)>,
    pub metric: f64,
}

/// Lower and upper value bounds for the collapse metric.
pub const COLLAPSE_BAND: (f64, f64) = (0.05, 0.8);

/// Rescales each curve to `t / tau(Delta)` with values relative to their
/// initial value, and measures the worst pairwise sup-distance on the shared
/// rescaled range, counting only points whose value lies in [`COLLAPSE_BAND`].
pub fn collapse_table(series: &[CollapseSeries], tau: impl Fn(f64) -> f64) -> Result<CollapseTable> {
    let mut curves = Vec::with_capacity(series.len());
    let mut rows = Vec::new();
    for s in series {
        if s.times.len() != s.values.len() || s.times.is_empty() {
            return Err(Error::invalid("collapse series needs equal, non-empty time and value arrays"));
        }
        let t = tau(s.delta);
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::invalid(format!("tau({}) = {t} is not a positive time", s.delta)));
        }
        let v0 = s.values[0].abs();
        if v0 == 0.0 {
            return Err(Error::invalid("collapse series starts at zero"));
        }
        let xs: Vec<f64> = s.times.iter().map(|x| x / t).collect();
        let vs: Vec<f64> = s.values.iter().map(|v| v.abs() / v0).collect();
        rows.extend(xs.iter().zip(&vs).map(|(&x, &v)| (s.delta, x, v)));
        curves.push((xs, vs));
    }
    let mut metric: f64 = 0.0;
    for i in 0..curves.len() {
        for j in 0..curves.len() {
            if i != j {
                metric = metric.max(directed_distance(&curves[i], &curves[j]));
            }
        }
    }
    Ok(CollapseTable { rows, metric })
}

fn directed_distance(a: &(Vec<f64>, Vec<f64>), b: &(Vec<f64>, Vec<f64>)) -> f64 {
    let (lo, hi) = (a.0[0].max(b.0[0]), a.0[a.0.len() - 1].min(b.0[b.0.len() - 1]));
    let mut worst: f64 = 0.0;
    for (&x, &v) in a.0.iter().zip(&a.1) {
        if x < lo || x > hi || v < COLLAPSE_BAND.0 || v > COLLAPSE_BAND.1 {
            continue;
        }
        if let Some(w) = interpolate(&b.0, &b.1, x) {
            worst = worst.max((v - w).abs());
        }
    }
    worst
}

/// Linear interpolation on increasing abscissae.
pub fn interpolate(xs: &[f64], ys: &[f64], x: f64) -> Option<f64> {
    if xs.is_empty() || x < xs[0] || x > xs[xs.len() - 1] {
        return None;
    }
    let i = xs.partition_point(|&v| v <= x);
    if i == 0 {
        return Some(ys[0]);
    }
    if i >= xs.len() {
        return Some(ys[xs.len() - 1]);
    }
    let (x0, x1) = (xs[i - 1], xs[i]);
    let w = if x1 > x0 { (x - x0) / (x1 - x0) } else { 0.0 };
    Some(ys[i - 1] + w * (ys[i] - ys[i - 1]))
}

/// `d log|v| / d log t` by centred differences; `None` at the ends and where
/// a value vanishes.
pub fn log_derivative(times: &[f64], values: &[f64]) -> Vec<Option<f64>> {
    (0..times.len())
        .map(|i| {
            if i == 0 || i + 1 >= times.len() {
                return None;
            }
            let (t0, t1) = (times[i - 1], times[i + 1]);
            let (v0, v1) = (values[i - 1].abs(), values[i + 1].abs());
            if t0 <= 0.0 || v0 == 0.0 || v1 == 0.0 {
                return None;
            }
            Some((v1.ln() - v0.ln()) / (t1.ln() - t0.ln()))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn grid(dt: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| i as f64 * dt).collect()
    }

    #[test]
    fn pure_exponential() {
        let t = grid(0.1, 600);
        let v: Vec<f64> = t.iter().map(|t| (-0.1 * t).exp()).collect();
        let fit = extract_rate(&t, &v, None, &WindowPolicy::default()).unwrap();
        assert!((fit.rate - 0.1).abs() < 1e-6);
        assert!(fit.error < 1e-6);
        assert!(fit.reached_lower);
        assert!((fit.window.0 - 16.1).abs() < 0.11 && (fit.window.1 - 39.1).abs() < 0.11);
    }

    #[test]
    fn oscillating_exponential() {
        let t = grid(0.05, 1200);
        let v: Vec<f64> = t.iter().map(|t| (-0.1 * t).exp() * (1.0 + 0.05 * (3.0 * t).cos())).collect();
        let fit = extract_rate(&t, &v, None, &WindowPolicy::default()).unwrap();
        assert!((fit.rate - 0.1).abs() < 0.002, "{}", fit.rate);
        assert!(fit.error > 0.0);
    }

    #[test]
    fn constant_series_is_rejected() {
        let t = grid(0.1, 100);
        let v = vec![1.0; 100];
        assert!(matches!(
            extract_rate(&t, &v, None, &WindowPolicy::default()),
            Err(Error::InsufficientDecay { .. })
        ));
    }

    #[test]
    fn synthetic_log_law_is_recovered() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let noise = Normal::new(0.0, 0.01).unwrap();
        let deltas: [f64; 7] = [0.02, 0.03, 0.05, 0.07, 0.1, 0.14, 0.2];
        let pts: Vec<(f64, f64)> = deltas
            .iter()
            .map(|&d| (d, 6.7 * d * d * (0.2 / (d * d)).ln() * (1.0 + noise.sample(&mut rng))))
            .collect();
        let cmp = fit_scaling(&pts).unwrap();
        let (a, b) = (cmp.log_enhanced.params[0], cmp.log_enhanced.params[1]);
        assert!((6.0..=7.4).contains(&a), "a = {a}");
        assert!((0.15..=0.27).contains(&b), "b = {b}");
        assert_eq!(cmp.preferred, ModelTag::LogEnhanced);
        assert!(cmp.log_enhanced.converged && cmp.log_enhanced.identifiable);
    }

    #[test]
    fn pure_quadratic_is_preferred() {
        let pts: Vec<(f64, f64)> = [0.05, 0.1, 0.15, 0.2, 0.3].iter().map(|&d| (d, 3.0 * d * d)).collect();
        let cmp = fit_scaling(&pts).unwrap();
        assert_eq!(cmp.preferred, ModelTag::Quadratic);
        assert!((cmp.quadratic.params[0] - 3.0).abs() < 1e-12);
        assert!(cmp.quadratic.ssr < 1e-20);
    }

    #[test]
    fn scaling_input_checks() {
        let few = [(0.1, 1.0), (0.2, 2.0), (0.3, 3.0), (0.4, 4.0)];
        assert!(fit_scaling(&few).is_err());
        let narrow: Vec<(f64, f64)> = (0..5).map(|i| (0.1 + 0.01 * i as f64, 1.0)).collect();
        assert!(fit_scaling(&narrow).is_err());
    }

    #[test]
    fn collapse_of_exact_family() {
        let f = |d: f64| d * d * (1.0 / (d * d)).ln();
        let series: Vec<CollapseSeries> = [0.1, 0.2, 0.3]
            .iter()
            .map(|&d| {
                let t = grid(0.01 / f(d), 2000);
                let values = t.iter().map(|t| (-t * f(d)).exp()).collect();
                CollapseSeries { delta: d, times: t, values }
            })
            .collect();
        let good = collapse_table(&series, |d| 1.0 / f(d)).unwrap();
        assert!(good.metric < 1e-10, "{}", good.metric);
        let bad = collapse_table(&series, |d| 1.0 / (d * d)).unwrap();
        assert!(bad.metric > 0.05);
        let same = collapse_table(&[series[0].clone(), series[0].clone()], |d| 1.0 / (d * d)).unwrap();
        assert_eq!(same.metric, 0.0);
    }

    #[test]
    fn log_derivative_of_power_law() {
        let t: Vec<f64> = (1..100).map(|i| i as f64 * 0.1).collect();
        let v: Vec<f64> = t.iter().map(|t| t.powf(-1.0)).collect();
        let d = log_derivative(&t, &v);
        assert!(d[0].is_none() && d[98].is_none());
        for x in d[1..98].iter() {
            assert!((x.unwrap() + 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn interpolation() {
        let xs = [0.0, 1.0, 2.0];
        let ys = [0.0, 10.0, 0.0];
        assert_eq!(interpolate(&xs, &ys, 0.5), Some(5.0));
        assert_eq!(interpolate(&xs, &ys, 2.0), Some(0.0));
        assert_eq!(interpolate(&xs, &ys, 2.5), None);
    }
}
