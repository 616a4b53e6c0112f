//! Momentum and time discretisation.
//!
//! Fourier convention used throughout the crate:
//!
//! ```text
//! f_k = L^{-1/2} sum_x e^{-i k x} f_x,      k_j = 2 pi j / L,  j = 0..L-1
//! f_x = L^{-1/2} sum_k e^{+i k x} f_k
//! ```
//!
//! Momentum integrals `int dq / 2pi` are replaced by `(1/L) sum_j` over the
//! uniform grid.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Uniform Brillouin-zone grid `k_j = 2 pi j / L`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MomentumGrid {
    n_sites: usize,
}

impl MomentumGrid {
    pub fn new(n_sites: usize) -> Result<Self> {
        if n_sites == 0 || !n_sites.is_multiple_of(2) {
            return Err(Error::invalid(format!(
                "momentum grid needs a positive even number of sites, got {n_sites}"
            )));
        }
        Ok(Self { n_sites })
    }

    pub fn len(&self) -> usize {
        self.n_sites
    }

    pub fn is_empty(&self) -> bool {
        self.n_sites == 0
    }

    pub fn spacing(&self) -> f64 {
        2.0 * PI / self.n_sites as f64
    }

    pub fn point(&self, j: usize) -> f64 {
        self.spacing() * (j % self.n_sites) as f64
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = f64> + '_ {
        (0..self.n_sites).map(move |j| self.point(j))
    }

    /// Index of the grid point closest to `k` (mod 2 pi).
    pub fn nearest_index(&self, k: f64) -> usize {
        let j = (k.rem_euclid(2.0 * PI) / self.spacing()).round() as usize;
        j % self.n_sites
    }

    /// Index of `k` if it lies on the grid to within `1e-9` of the spacing.
    pub fn exact_index(&self, k: f64) -> Option<usize> {
        let x = k.rem_euclid(2.0 * PI) / self.spacing();
        let j = x.round();
        ((x - j).abs() < 1e-9).then_some(j as usize % self.n_sites)
    }
}

/// Uniform time grid `t_m = m dt`, `m = 0..=n_steps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub dt: f64,
    pub n_steps: usize,
}

impl TimeGrid {
    pub fn new(dt: f64, n_steps: usize) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::invalid(format!("time step must be positive, got {dt}")));
        }
        Ok(Self { dt, n_steps })
    }

    /// Smallest grid with `n_steps * dt >= t_max`.
    pub fn covering(dt: f64, t_max: f64) -> Result<Self> {
        if !(t_max > 0.0 && t_max.is_finite()) {
            return Err(Error::invalid(format!("t_max must be positive, got {t_max}")));
        }
        Self::new(dt, (t_max / dt - 1e-9).ceil().max(1.0) as usize)
    }

    pub fn t_max(&self) -> f64 {
        self.dt * self.n_steps as f64
    }

    pub fn time(&self, m: usize) -> f64 {
        self.dt * m as f64
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.n_steps).map(move |m| self.time(m))
    }
}

/// Unitary discrete Fourier transform in the crate convention.
///
/// Plans are cached per instance, so one `Fourier` per length is the intended
/// use inside hot loops.
#[derive(Clone)]
pub struct Fourier {
    len: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    norm: f64,
}

impl std::fmt::Debug for Fourier {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fourier").field("len", &self.len).finish()
    }
}

impl Fourier {
    pub fn new(len: usize) -> Result<Self> {
        if len == 0 {
            return Err(Error::invalid("transform length must be positive"));
        }
        let mut planner = FftPlanner::new();
        Ok(Self {
            len,
            forward: planner.plan_fft_forward(len),
            inverse: planner.plan_fft_inverse(len),
            norm: 1.0 / (len as f64).sqrt(),
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    fn check(&self, n: usize) -> Result<()> {
        if n != self.len {
            return Err(Error::invalid(format!(
                "sequence length {n} does not match transform length {}",
                self.len
            )));
        }
        Ok(())
    }

    /// `f_k = L^{-1/2} sum_x e^{-ikx} f_x`, in place.
    pub fn forward_in_place(&self, values: &mut [Complex64]) -> Result<()> {
        self.check(values.len())?;
        self.forward.process(values);
        values.iter_mut().for_each(|v| *v *= self.norm);
        Ok(())
    }

    /// `f_x = L^{-1/2} sum_k e^{+ikx} f_k`, in place.
    pub fn inverse_in_place(&self, values: &mut [Complex64]) -> Result<()> {
        self.check(values.len())?;
        self.inverse.process(values);
        values.iter_mut().for_each(|v| *v *= self.norm);
        Ok(())
    }

    pub fn forward(&self, values: &[Complex64]) -> Result<Vec<Complex64>> {
        let mut out = values.to_vec();
        self.forward_in_place(&mut out)?;
        Ok(out)
    }

    pub fn inverse(&self, values: &[Complex64]) -> Result<Vec<Complex64>> {
        let mut out = values.to_vec();
        self.inverse_in_place(&mut out)?;
        Ok(out)
    }

    /// Unnormalised transforms (plain `sum e^{-2 pi i j n / L}`), used by the
    /// convolution code where the scale is folded into the prefactors.
    pub(crate) fn raw_forward(&self, values: &mut [Complex64]) {
        debug_assert_eq!(values.len(), self.len);
        self.forward.process(values);
    }

    pub(crate) fn raw_inverse(&self, values: &mut [Complex64]) {
        debug_assert_eq!(values.len(), self.len);
        self.inverse.process(values);
    }
}

/// One-shot forward transform in the crate convention.
pub fn forward_transform(values_per_site: &[Complex64]) -> Result<Vec<Complex64>> {
    Fourier::new(values_per_site.len())?.forward(values_per_site)
}

/// One-shot inverse transform in the crate convention.
pub fn inverse_transform(values_per_k: &[Complex64]) -> Result<Vec<Complex64>> {
    Fourier::new(values_per_k.len())?.inverse(values_per_k)
}

/// Same as [`forward_transform`] but checks the length against a grid.
pub fn forward_on_grid(grid: &MomentumGrid, values_per_site: &[Complex64]) -> Result<Vec<Complex64>> {
    if values_per_site.len() != grid.len() {
        return Err(Error::invalid(format!(
            "sequence length {} does not match grid size {}",
            values_per_site.len(),
            grid.len()
        )));
    }
    forward_transform(values_per_site)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn direct_dft(x: &[Complex64]) -> Vec<Complex64> {
        let n = x.len();
        (0..n)
            .map(|j| {
                let k = 2.0 * PI * j as f64 / n as f64;
                x.iter()
                    .enumerate()
                    .map(|(s, v)| v * Complex64::from_polar(1.0, -k * s as f64))
                    .sum::<Complex64>()
                    / (n as f64).sqrt()
            })
            .collect()
    }

    #[test]
    fn constant_sequence() {
        let out = forward_transform(&[c(1.0, 0.0); 4]).unwrap();
        assert_relative_eq!(out[0].re, 2.0, epsilon = 1e-14);
        for v in &out[1..] {
            assert!(v.norm() < 1e-14);
        }
    }

    #[test]
    fn delta_sequence() {
        let mut x = vec![c(0.0, 0.0); 4];
        x[0] = c(1.0, 0.0);
        for v in forward_transform(&x).unwrap() {
            assert!((v - c(0.5, 0.0)).norm() < 1e-14);
        }
    }

    #[test]
    fn plane_wave_lands_on_one_index() {
        let n = 8;
        let x: Vec<_> = (0..n)
            .map(|s| Complex64::from_polar(1.0, 2.0 * PI * s as f64 / n as f64))
            .collect();
        let oracle = direct_dft(&x);
        let out = forward_transform(&x).unwrap();
        for (j, (a, b)) in out.iter().zip(&oracle).enumerate() {
            assert!((a - b).norm() < 1e-12);
            let expected = if j == 1 { 8f64.sqrt() } else { 0.0 };
            assert!((a - c(expected, 0.0)).norm() < 1e-12, "index {j}: {a}");
        }
    }

    #[test]
    fn length_mismatch_is_rejected() {
        let grid = MomentumGrid::new(8).unwrap();
        assert!(matches!(
            forward_on_grid(&grid, &[c(1.0, 0.0); 6]),
            Err(Error::InvalidInput(_))
        ));
        let f = Fourier::new(4).unwrap();
        assert!(f.forward(&[c(0.0, 0.0); 3]).is_err());
    }

    #[test]
    fn grid_points_and_indices() {
        assert!(MomentumGrid::new(7).is_err());
        assert!(MomentumGrid::new(0).is_err());
        let g = MomentumGrid::new(8).unwrap();
        let pts: Vec<f64> = g.points().collect();
        for w in pts.windows(2) {
            assert_relative_eq!(w[1] - w[0], g.spacing(), epsilon = 1e-14);
        }
        assert!(pts[7] < 2.0 * PI);
        assert_eq!(g.exact_index(PI), Some(4));
        assert_eq!(g.exact_index(PI / 2.0), Some(2));
        assert_eq!(g.exact_index(0.1), None);
        assert_eq!(g.nearest_index(-0.01), 0);
    }

    #[test]
    fn time_grid() {
        assert!(TimeGrid::new(0.0, 3).is_err());
        let t = TimeGrid::covering(0.1, 1.0).unwrap();
        assert_eq!(t.n_steps, 10);
        assert_relative_eq!(t.t_max(), 1.0, epsilon = 1e-12);
    }
}
