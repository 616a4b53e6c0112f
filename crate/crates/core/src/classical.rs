//! Classical U(1) Floquet field model and Monte Carlo autocorrelators.
//!
//! One period applies the free step `psi_k -> e^{i eps_k} psi_k` followed by
//! the on-site phase `psi_x -> e^{-2 i D |psi_x|^2} psi_x`. Initial fields are
//! drawn from `rho ~ exp(-sum |psi|^2 / 2)`, i.e. independent complex
//! Gaussians with `<|psi_x|^2> = 2`.
//!
//! The estimator works in momentum space, `C_k(t) = <psi_k(t) psi_k(0)*>`,
//! normalised by its `t = 0` value. Both half-steps leave the Gaussian
//! measure invariant, so the process is stationary and a trajectory may be
//! correlated against several time origins `s`, `<psi_k(s + t) psi_k(s)*>`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::analysis::{extract_rate, RateFit, WindowPolicy};
use crate::error::{Error, Result};
use crate::grid::Fourier;

/// Field configuration `psi_x`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassicalField {
    pub psi: Vec<Complex64>,
}

impl ClassicalField {
    pub fn norm_sqr(&self) -> f64 {
        self.psi.iter().map(|z| z.norm_sqr()).sum()
    }
}

/// Free single-particle Hamiltonian `h0`, diagonal in momentum.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Hopping {
    /// `eps_k = -cos k`.
    NearestNeighbour,
    /// `eps_k` on the grid `k_j = 2 pi j / L`.
    Diagonal(Vec<f64>),
}

impl Hopping {
    pub fn energies(&self, n_sites: usize) -> Result<Vec<f64>> {
        match self {
            Hopping::NearestNeighbour => {
                Ok((0..n_sites).map(|j| -(2.0 * PI * j as f64 / n_sites as f64).cos()).collect())
            }
            Hopping::Diagonal(e) if e.len() == n_sites => Ok(e.clone()),
            Hopping::Diagonal(e) => Err(Error::invalid(format!(
                "dispersion table has {} entries for {n_sites} sites",
                e.len()
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleSpec {
    pub n_samples: usize,
    pub seed: u64,
    pub n_sites: usize,
    pub delta: f64,
    pub hopping: Hopping,
    /// Number of consecutive time origins averaged per trajectory (>= 1).
    pub time_origins: usize,
}

impl EnsembleSpec {
    pub fn new(n_samples: usize, seed: u64, n_sites: usize, delta: f64) -> Self {
        Self { n_samples, seed, n_sites, delta, hopping: Hopping::NearestNeighbour, time_origins: 1 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.time_origins == 0 {
            return Err(Error::invalid("need at least one time origin"));
        }
        if self.n_samples == 0 {
            return Err(Error::invalid("need at least one sample"));
        }
        if self.n_sites < 2 || !self.n_sites.is_multiple_of(2) {
            return Err(Error::invalid(format!("L must be even and >= 2, got {}", self.n_sites)));
        }
        if !self.delta.is_finite() {
            return Err(Error::invalid("Delta must be finite"));
        }
        self.hopping.energies(self.n_sites).map(|_| ())
    }
}

/// Precomputed free phases and FFT plans for one system size.
#[derive(Debug, Clone)]
pub struct FloquetMap {
    fourier: Fourier,
    phases: Vec<Complex64>,
    delta: f64,
}

impl FloquetMap {
    pub fn new(energies: &[f64], delta: f64) -> Result<Self> {
        let fourier = Fourier::new(energies.len())?;
        let phases = energies.iter().map(|&e| Complex64::from_polar(1.0, e)).collect();
        Ok(Self { fourier, phases, delta })
    }

    /// Advances a field given in momentum space by one period; `work` is
    /// scratch of the same length. The result is again in momentum space.
    fn step_k(&self, psi_k: &mut [Complex64]) {
        for (z, ph) in psi_k.iter_mut().zip(&self.phases) {
            *z *= ph;
        }
        self.fourier.inverse_in_place(psi_k).expect("length fixed at construction");
        self.nonlinear(psi_k);
        self.fourier.forward_in_place(psi_k).expect("length fixed at construction");
    }

    fn nonlinear(&self, psi_x: &mut [Complex64]) {
        for z in psi_x.iter_mut() {
            *z *= Complex64::from_polar(1.0, -2.0 * self.delta * z.norm_sqr());
        }
    }

    /// One period applied to a real-space field.
    pub fn step(&self, field: &ClassicalField) -> Result<ClassicalField> {
        let mut psi = self.fourier.forward(&field.psi)?;
        for (z, ph) in psi.iter_mut().zip(&self.phases) {
            *z *= ph;
        }
        self.fourier.inverse_in_place(&mut psi)?;
        self.nonlinear(&mut psi);
        Ok(ClassicalField { psi })
    }
}

/// `psi' = phase(|.|^2) o IFFT o diag(e^{i eps_k}) o FFT psi`.
pub fn floquet_step(field: &ClassicalField, delta: f64, energies: &[f64]) -> Result<ClassicalField> {
    if field.psi.len() != energies.len() {
        return Err(Error::invalid("field and dispersion table lengths differ"));
    }
    FloquetMap::new(energies, delta)?.step(field)
}

fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Initial field for sample number `index`; each index has its own stream.
pub fn sample_initial(spec: &EnsembleSpec, index: u64) -> ClassicalField {
    let mut rng = sample_rng(spec.seed, index);
    let psi = (0..spec.n_sites)
        .map(|_| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            Complex64::new(re, im)
        })
        .collect();
    ClassicalField { psi }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Autocorrelator {
    /// Grid indices `j` of the recorded momenta `k = 2 pi j / L`.
    pub k_indices: Vec<usize>,
    pub n_sites: usize,
    pub times: Vec<f64>,
    /// `values[i][m]` is `C_k(t_m)` for `k_indices[i]`.
    pub values: Vec<Vec<Complex64>>,
    /// Batch-means standard error of `C_k(t_m)`.
    pub stderr: Vec<Vec<f64>>,
    pub n_batches: usize,
}

impl Autocorrelator {
    pub fn k(&self, i: usize) -> f64 {
        2.0 * PI * self.k_indices[i] as f64 / self.n_sites as f64
    }

    pub fn abs(&self, i: usize) -> Vec<f64> {
        self.values[i].iter().map(|z| z.norm()).collect()
    }

    /// Exponential fit of `|C_k(t)|`, weighted by the standard errors.
    pub fn rate(&self, i: usize, policy: WindowPolicy) -> Result<RateFit> {
        extract_rate(&self.times, &self.abs(i), Some(&self.stderr[i]), &policy)
    }

    /// True when some point inside the fit window has a standard error above
    /// 10% of `|C_k|`.
    pub fn low_precision(&self, i: usize, fit: &RateFit) -> bool {
        let (t1, t2) = fit.window;
        self.times
            .iter()
            .zip(&self.values[i])
            .zip(&self.stderr[i])
            .any(|((&t, c), &e)| t >= t1 && t <= t2 && e > 0.1 * c.norm())
    }
}

const MAX_BATCHES: usize = 64;

/// Monte Carlo estimate of `C_k(t)` for `t = 0..=n_periods`.
///
/// Samples are split into contiguous batches; each batch is accumulated
/// serially and batches are combined in index order, so the result does not
/// depend on the number of threads.
pub fn autocorrelator(spec: &EnsembleSpec, n_periods: usize, k_indices: &[usize]) -> Result<Autocorrelator> {
    spec.validate()?;
    if k_indices.is_empty() || k_indices.iter().any(|&j| j >= spec.n_sites) {
        return Err(Error::invalid("momentum indices must be non-empty and below L"));
    }
    let map = FloquetMap::new(&spec.hopping.energies(spec.n_sites)?, spec.delta)?;
    let n = spec.n_samples;
    let n_batches = n.min(MAX_BATCHES);
    let nk = k_indices.len();
    let len = n_periods + 1;
    let origins = spec.time_origins;
    let span = origins + n_periods;
    let corr = Fourier::new(span)?;
    // per batch: sums over samples and origins of psi_k(s + t) psi_k(s)^*,
    // and of |psi_k(s)|^2
    let batches: Vec<(Vec<Complex64>, Vec<f64>)> = (0..n_batches)
        .into_par_iter()
        .map(|b| {
            let lo = b * n / n_batches;
            let hi = (b + 1) * n / n_batches;
            let mut acc = vec![Complex64::new(0.0, 0.0); nk * len];
            let mut norm0 = vec![0.0; nk];
            let mut series = vec![vec![Complex64::new(0.0, 0.0); span]; nk];
            let mut head = vec![Complex64::new(0.0, 0.0); span];
            for s in lo..hi {
                let field = sample_initial(spec, s as u64);
                let mut psi = map.fourier.forward(&field.psi).expect("length checked");
                for m in 0..span {
                    if m > 0 {
                        map.step_k(&mut psi);
                    }
                    for (i, &j) in k_indices.iter().enumerate() {
                        series[i][m] = psi[j];
                    }
                }
                for i in 0..nk {
                    let x = &mut series[i];
                    norm0[i] += x[..origins].iter().map(|z| z.norm_sqr()).sum::<f64>();
                    if origins == 1 {
                        for m in 0..len {
                            acc[i * len + m] += x[m] * x[0].conj();
                        }
                        continue;
                    }
                    // sum_s x(s + t) x(s)^* via one circular correlation;
                    // no wrap-around because the origins stop at `origins`
                    head.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
                    head[..origins].copy_from_slice(&x[..origins]);
                    corr.raw_forward(x);
                    corr.raw_forward(&mut head);
                    for (a, h) in x.iter_mut().zip(&head) {
                        *a *= h.conj();
                    }
                    corr.raw_inverse(x);
                    for m in 0..len {
                        acc[i * len + m] += x[m] / span as f64;
                    }
                }
            }
            (acc, norm0)
        })
        .collect();

    let mut values = vec![vec![Complex64::new(0.0, 0.0); len]; nk];
    let mut stderr = vec![vec![0.0; len]; nk];
    for i in 0..nk {
        let total0: f64 = batches.iter().map(|b| b.1[i]).sum();
        if total0 <= 0.0 || batches.iter().any(|b| b.1[i] <= 0.0) {
            return Err(Error::Numerical("vanishing initial correlator".into()));
        }
        for m in 0..len {
            let total: Complex64 = batches.iter().map(|b| b.0[i * len + m]).sum();
            let mean = total / total0;
            values[i][m] = mean;
            // spread of the per-batch ratio estimates
            stderr[i][m] = if n_batches >= 2 {
                let var: f64 = batches
                    .iter()
                    .map(|b| (b.0[i * len + m] / b.1[i] - mean).norm_sqr())
                    .sum::<f64>()
                    / (n_batches - 1) as f64;
                (var / n_batches as f64).sqrt()
            } else {
                f64::INFINITY
            };
        }
    }
    Ok(Autocorrelator {
        k_indices: k_indices.to_vec(),
        n_sites: spec.n_sites,
        times: (0..len).map(|m| m as f64).collect(),
        values,
        stderr,
        n_batches,
    })
}
