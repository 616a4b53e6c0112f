//! Dispersions, vertex factors and exact non-interacting propagators.
//!
//! Units: the nearest-neighbour hopping sets the energy scale (`J = 1`), so the
//! single-band dispersion is `eps(k) = -cos k`. Runs quoted with a different
//! hopping prefactor only differ by a rescaling of time.
//!
//! Phase convention: propagators follow `dG/dt + i eps G + int M G = 0`, so
//! the free propagator is `e^{-i eps t} / 2`. The thermal correlator
//! `<f_k(t) f_k^dagger(0)>` is its complex conjugate; decay rates do not depend
//! on the choice.

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;

use crate::block::{Block, HermitianEigen};
use crate::error::{Error, Result};
use crate::grid::Fourier;

/// Single-band dispersion `eps(k) = -cos k`.
pub fn epsilon_cosine(k: f64) -> f64 {
    -k.cos()
}

/// Interaction vertex of the nearest-neighbour density interaction,
/// `v(q, p) = Delta (cos q - cos p)`; it vanishes at `q = p`.
pub fn vertex_v(q: f64, p: f64, delta: f64) -> f64 {
    delta * (q.cos() - p.cos())
}

/// Free two-band Hamiltonian block of the staggered chain in unit-cell
/// momentum `k`:
///
/// ```text
/// [[ 2h,                -(1 + e^{-ik})/2 ],
///  [ -(1 + e^{ik})/2,    -2h             ]]
/// ```
pub fn two_band_matrix(k: f64, h: f64) -> Block {
    let off = -(Complex64::new(1.0, 0.0) + Complex64::from_polar(1.0, -k)) * 0.5;
    Block::new(Complex64::new(2.0 * h, 0.0), off, off.conj(), Complex64::new(-2.0 * h, 0.0))
}

/// Band energy `omega_k = sqrt((1 + cos k)/2 + 4 h^2)`; the bands are `+-omega_k`.
pub fn band_omega(k: f64, h: f64) -> f64 {
    (0.5 * (1.0 + k.cos()) + 4.0 * h * h).max(0.0).sqrt()
}

/// `G0_k(t) = exp(-i eps_k t) / 2` for the two-band model, in closed form.
///
/// At the band touching point (`k = pi`, `h = 0`) the `sin(wt)/w` factor is
/// replaced by its limit `t`.
pub fn free_propagator(k: f64, t: f64, h: f64) -> Block {
    let w = band_omega(k, h);
    let sinc = if (w * t).abs() < 1e-8 {
        t * (1.0 - (w * t).powi(2) / 6.0)
    } else {
        (w * t).sin() / w
    };
    let cos = (w * t).cos();
    let i = Complex64::i();
    let up = Complex64::new(1.0, 0.0) + Complex64::from_polar(1.0, -k);
    let down = Complex64::new(1.0, 0.0) + Complex64::from_polar(1.0, k);
    Block::new(
        Complex64::new(cos, -2.0 * h * sinc),
        i * up * (0.5 * sinc),
        i * down * (0.5 * sinc),
        Complex64::new(cos, 2.0 * h * sinc),
    ) * 0.5
}

/// Single-site propagator at momentum `k` from the two-site unit-cell block
/// sampled at unit-cell momentum `2k`:
/// `G_k = 1/2 sum_{eta, eta'} e^{i (eta - eta')/2 k} G_{2k, eta eta'}`.
///
/// Block index 0 is `eta = +` (even site), index 1 is `eta = -`.
pub fn unit_cell_reduce(block_at_2k: &Block, k: f64) -> Complex64 {
    let g = &block_at_2k.0;
    let plus = Complex64::from_polar(1.0, k);
    let minus = plus.conj();
    0.5 * (g[0][0] + g[1][1] + plus * g[0][1] + minus * g[1][0])
}

/// Unitary that diagonalises [`two_band_matrix`], lower band first.
pub fn band_basis(k: f64, h: f64) -> Result<Block> {
    HermitianEigen::new(&two_band_matrix(k, h), 1e-12)
        .map(|e| e.vectors)
        .ok_or_else(|| {
            Error::SingularPoint(format!(
                "bands are degenerate at k = {k}, h = {h}; use the unit-cell reduction for h = 0"
            ))
        })
}

/// Rotates a block into the quasiparticle basis, `U^dagger G U`. Entry (0, 0)
/// belongs to the lower band `-|omega_k|`, whose free propagator is
/// `e^{+i |omega_k| t} / 2`.
pub fn quasiparticle_basis(block: &Block, k: f64, h: f64) -> Result<Block> {
    let u = band_basis(k, h)?;
    Ok(u.adjoint() * *block * u)
}

/// Which analytic form backs a [`Dispersion`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DispersionKind {
    Cosine,
    StaggeredLower,
    StaggeredUpper,
    Table,
}

impl fmt::Display for DispersionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            DispersionKind::Cosine => "cosine",
            DispersionKind::StaggeredLower => "staggered-band-",
            DispersionKind::StaggeredUpper => "staggered-band+",
            DispersionKind::Table => "table",
        };
        f.write_str(s)
    }
}

/// A 2pi-periodic band with first and second derivatives.
#[derive(Debug, Clone, PartialEq)]
pub enum Dispersion {
    /// `-cos k`.
    Cosine,
    /// One band `+-omega_k` of the staggered chain.
    Staggered { h: f64, upper: bool },
    /// Trigonometric interpolant of a table sampled on a uniform grid.
    Table(TrigSeries),
}

impl Dispersion {
    pub fn kind(&self) -> DispersionKind {
        match self {
            Dispersion::Cosine => DispersionKind::Cosine,
            Dispersion::Staggered { upper: false, .. } => DispersionKind::StaggeredLower,
            Dispersion::Staggered { upper: true, .. } => DispersionKind::StaggeredUpper,
            Dispersion::Table(_) => DispersionKind::Table,
        }
    }

    pub fn energy(&self, k: f64) -> f64 {
        match self {
            Dispersion::Cosine => -k.cos(),
            Dispersion::Staggered { h, upper } => sign(*upper) * band_omega(k, *h),
            Dispersion::Table(s) => s.eval(k, 0),
        }
    }

    pub fn velocity(&self, k: f64) -> f64 {
        match self {
            Dispersion::Cosine => k.sin(),
            Dispersion::Staggered { h, upper } => {
                let w = band_omega(k, *h);
                if w < 1e-12 {
                    return 0.0;
                }
                sign(*upper) * (-k.sin() / (4.0 * w))
            }
            Dispersion::Table(s) => s.eval(k, 1),
        }
    }

    pub fn curvature(&self, k: f64) -> f64 {
        match self {
            Dispersion::Cosine => k.cos(),
            Dispersion::Staggered { h, upper } => {
                let w = band_omega(k, *h);
                if w < 1e-12 {
                    return 0.0;
                }
                let s = k.sin();
                sign(*upper) * (-k.cos() / (4.0 * w) - s * s / (16.0 * w * w * w))
            }
            Dispersion::Table(s) => s.eval(k, 2),
        }
    }

    /// Parses a two-column `k eps` table on the uniform grid `k_j = 2 pi j / n`.
    /// Blank lines and lines starting with `#` are skipped; columns may be
    /// separated by whitespace or commas.
    pub fn from_table_text(text: &str) -> Result<Self> {
        let mut rows = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line
                .split(|c: char| c.is_whitespace() || c == ',')
                .filter(|s| !s.is_empty())
                .collect();
            if cols.len() != 2 {
                return Err(Error::invalid(format!(
                    "dispersion table line {}: expected two columns, found {}",
                    lineno + 1,
                    cols.len()
                )));
            }
            let parse = |s: &str| {
                s.parse::<f64>().map_err(|_| {
                    Error::invalid(format!("dispersion table line {}: bad number {s:?}", lineno + 1))
                })
            };
            rows.push((parse(cols[0])?, parse(cols[1])?));
        }
        let n = rows.len();
        if n < 4 {
            return Err(Error::invalid("dispersion table needs at least 4 rows"));
        }
        let h = 2.0 * PI / n as f64;
        for (j, (k, _)) in rows.iter().enumerate() {
            if (k - h * j as f64).abs() > 1e-6 * h {
                return Err(Error::invalid(format!(
                    "dispersion table row {j}: k = {k} is not on the uniform grid 2 pi j / {n}"
                )));
            }
        }
        let values: Vec<f64> = rows.into_iter().map(|(_, e)| e).collect();
        Ok(Dispersion::Table(TrigSeries::interpolate(&values)?))
    }
}

fn sign(upper: bool) -> f64 {
    if upper {
        1.0
    } else {
        -1.0
    }
}

/// Real trigonometric polynomial `sum_m c_m e^{imk}` interpolating samples on
/// a uniform grid. The Nyquist mode of an even-length table is split evenly
/// between `+-n/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrigSeries {
    /// `(m, c_m)` pairs.
    coeffs: Vec<(i64, Complex64)>,
}

impl TrigSeries {
    pub fn interpolate(samples: &[f64]) -> Result<Self> {
        let n = samples.len();
        let fourier = Fourier::new(n)?;
        let mut c: Vec<Complex64> = samples.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        fourier.raw_forward(&mut c);
        let scale = 1.0 / n as f64;
        let mut coeffs = Vec::with_capacity(n + 1);
        for (j, v) in c.into_iter().enumerate() {
            let v = v * scale;
            if n.is_multiple_of(2) && j == n / 2 {
                let m = (n / 2) as i64;
                coeffs.push((m, v * 0.5));
                coeffs.push((-m, v * 0.5));
            } else if j <= n / 2 {
                coeffs.push((j as i64, v));
            } else {
                coeffs.push((j as i64 - n as i64, v));
            }
        }
        Ok(Self { coeffs })
    }

    /// `order`-th derivative at `k`.
    pub fn eval(&self, k: f64, order: u32) -> f64 {
        self.coeffs
            .iter()
            .map(|&(m, c)| {
                let factor = Complex64::new(0.0, m as f64).powu(order);
                (c * factor * Complex64::from_polar(1.0, m as f64 * k)).re
            })
            .sum()
    }
}
