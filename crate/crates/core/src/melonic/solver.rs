//! Time stepping of `dG/dt + i eps G + int_0^t M(s) G(t - s) ds = 0`.
//!
//! The free part is propagated exactly: with `P = e^{-i eps dt}` one step of
//! the rectangle rule reads
//!
//! ```text
//! G_{m+1} = P (G_m - dt C_m),    C_m = dt sum_{j=0}^{m-1} M_j G_{m-j}
//! ```
//!
//! which is the explicit Euler step of the rotating-frame equation for
//! `e^{i eps t} G`. The trapezoid variant uses the trapezoid rule for `C_m`
//! and a predictor-corrector step in the same frame: an Euler predictor
//! supplies `G_{m+1}` and `M_{m+1}`, and the update averages the drive at both
//! ends of the step. Histories are
//! stored in the lab frame; [`Frame`] only changes how they are reported.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::block::{expm_hermitian, Block};
use crate::error::{Error, Result};
use crate::melonic::kernel::KernelFft;
use crate::model::{free_propagator, quasiparticle_basis, two_band_matrix, unit_cell_reduce};
use crate::grid::MomentumGrid;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelMode {
    /// Kernel built from free propagators (Golden-Rule memory).
    FgrFrozen,
    /// Kernel built from the evolving propagators (melonic resummation).
    SelfConsistent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Frame {
    Lab,
    /// `e^{+i eps_k t} G_k(t)`; constant `I/2` without interactions.
    Rotating,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Integrator {
    Rectangle,
    Trapezoid,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Number of lattice sites `L = 2N`; must be a multiple of 4.
    pub n_sites: usize,
    pub dt: f64,
    pub t_max: f64,
    pub delta: f64,
    pub h: f64,
    pub mode: KernelMode,
    pub frame: Frame,
    pub integrator: Integrator,
    /// Abort when a block's spectral norm exceeds `1/2 + norm_tolerance`.
    pub norm_tolerance: f64,
    /// Drop kernel rows once they stay below this fraction of the initial
    /// kernel for a trailing window.
    pub history_cutoff: Option<f64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            n_sites: 400,
            dt: 0.1,
            t_max: 100.0,
            delta: 0.3,
            h: 0.0,
            mode: KernelMode::SelfConsistent,
            frame: Frame::Rotating,
            integrator: Integrator::Trapezoid,
            norm_tolerance: 1e-2,
            history_cutoff: None,
        }
    }
}

/// Rows of kernel magnitudes that must stay small before truncating history.
const CUTOFF_WINDOW: usize = 20;

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_sites < 8 || !self.n_sites.is_multiple_of(4) {
            return Err(Error::invalid(format!(
                "L = {} must be a multiple of 4 and at least 8",
                self.n_sites
            )));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::invalid(format!("dt must be positive, got {}", self.dt)));
        }
        if self.dt > 0.1 + 1e-12 {
            return Err(Error::invalid(format!("dt = {} exceeds the validated step 0.1", self.dt)));
        }
        if !(self.t_max > 0.0 && self.t_max.is_finite()) {
            return Err(Error::invalid(format!("t_max must be positive, got {}", self.t_max)));
        }
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return Err(Error::invalid(format!("Delta must be >= 0, got {}", self.delta)));
        }
        if !self.h.is_finite() {
            return Err(Error::invalid("h must be finite"));
        }
        if !(self.norm_tolerance > 0.0) {
            return Err(Error::invalid("norm tolerance must be positive"));
        }
        if let Some(c) = self.history_cutoff {
            if !(c > 0.0 && c < 1.0) {
                return Err(Error::invalid("history cutoff must lie in (0, 1)"));
            }
        }
        Ok(())
    }

    pub fn n_cells(&self) -> usize {
        self.n_sites / 2
    }

    pub fn n_steps(&self) -> usize {
        (self.t_max / self.dt).round().max(1.0) as usize
    }
}

/// `G[m][k]` in the lab frame, one row per completed time step.
#[derive(Debug, Clone, PartialEq)]
pub struct PropagatorHistory {
    pub dt: f64,
    pub rows: Vec<Vec<Block>>,
}

/// `M[m][k]`, one row per stored propagator row.
#[derive(Debug, Clone, PartialEq)]
pub struct MemoryKernel {
    pub rows: Vec<Vec<Block>>,
}

/// Incremental solver; `step` advances by `dt`.
#[derive(Debug)]
pub struct Solver {
    config: SolverConfig,
    cells: MomentumGrid,
    fft: KernelFft,
    /// `e^{-i eps_k dt}` per unit-cell momentum.
    propagator: Vec<Block>,
    history: PropagatorHistory,
    kernel: MemoryKernel,
    /// Convolution `C_m` at the current step, once known.
    memory: Option<Vec<Block>>,
    kernel_scale: f64,
    cutoff_row: Option<usize>,
}

impl Solver {
    pub fn new(config: SolverConfig) -> Result<Self> {
        config.validate()?;
        let n = config.n_cells();
        let cells = MomentumGrid::new(n)?;
        let propagator = cells
            .points()
            .map(|k| expm_hermitian(&two_band_matrix(k, config.h), config.dt))
            .collect();
        let first = vec![Block::scaled_identity(0.5); n];
        let mut solver = Self {
            fft: KernelFft::new(n)?,
            cells,
            propagator,
            history: PropagatorHistory { dt: config.dt, rows: Vec::new() },
            kernel: MemoryKernel { rows: Vec::new() },
            memory: None,
            kernel_scale: 0.0,
            cutoff_row: None,
            config,
        };
        solver.push_row(first)?;
        solver.kernel_scale = solver.kernel.rows[0].iter().map(Block::max_abs).fold(0.0, f64::max);
        Ok(solver)
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    /// Index of the last stored row.
    pub fn current_step(&self) -> usize {
        self.history.rows.len() - 1
    }

    pub fn history(&self) -> &PropagatorHistory {
        &self.history
    }

    pub fn kernel(&self) -> &MemoryKernel {
        &self.kernel
    }

    fn kernel_row(&self, m: usize, row: &[Block]) -> Result<Vec<Block>> {
        match self.config.mode {
            KernelMode::SelfConsistent => self.fft.kernel(row, self.config.delta),
            KernelMode::FgrFrozen => {
                let t = m as f64 * self.config.dt;
                let free: Vec<Block> =
                    self.cells.points().map(|k| free_propagator(k, t, self.config.h)).collect();
                self.fft.kernel(&free, self.config.delta)
            }
        }
    }

    fn push_row(&mut self, row: Vec<Block>) -> Result<()> {
        let m = self.history.rows.len();
        let limit = 0.5 + self.config.norm_tolerance;
        for (j, b) in row.iter().enumerate() {
            let norm = b.spectral_norm();
            if !norm.is_finite() || norm > limit {
                return Err(Error::Numerical(format!(
                    "propagator norm {norm:.6} exceeds 1/2 + {} at step {m}, unit-cell momentum index {j} \
                     (t = {:.4}); reduce dt or Delta",
                    self.config.norm_tolerance,
                    m as f64 * self.config.dt
                )));
            }
        }
        let krow = self.kernel_row(m, &row)?;
        self.history.rows.push(row);
        self.kernel.rows.push(krow);
        self.update_cutoff();
        Ok(())
    }

    fn update_cutoff(&mut self) {
        let Some(frac) = self.config.history_cutoff else { return };
        if self.cutoff_row.is_some() || self.kernel.rows.len() < CUTOFF_WINDOW {
            return;
        }
        let threshold = frac * self.kernel_scale;
        let tail = &self.kernel.rows[self.kernel.rows.len() - CUTOFF_WINDOW..];
        if tail.iter().all(|r| r.iter().all(|b| b.max_abs() < threshold)) {
            self.cutoff_row = Some(self.kernel.rows.len() - CUTOFF_WINDOW);
        }
    }

    /// `sum_{j=1}^{m-1} M_j G_{m-j}` for every momentum (zero for `m < 2`).
    fn interior(&self, m: usize) -> Vec<Block> {
        let g = &self.history.rows;
        let mk = &self.kernel.rows;
        let upper = m.saturating_sub(1).min(self.cutoff_row.unwrap_or(usize::MAX));
        (0..self.cells.len())
            .into_par_iter()
            .map(|i| {
                let mut acc = Block::ZERO;
                for j in 1..=upper {
                    acc += mk[j][i] * g[m - j][i];
                }
                acc
            })
            .collect()
    }

    /// Convolution `C_m` from the interior sum and the two end rows.
    fn close_memory(&self, interior: &[Block], m: usize, g_m: &[Block], m_m: &[Block]) -> Vec<Block> {
        let dt = self.config.dt;
        let m0 = &self.kernel.rows[0];
        let g0 = &self.history.rows[0];
        let keep_last = m <= self.cutoff_row.unwrap_or(usize::MAX);
        (0..interior.len())
            .map(|i| {
                if m == 0 {
                    return Block::ZERO;
                }
                let acc = match self.config.integrator {
                    Integrator::Rectangle => interior[i] + m0[i] * g_m[i],
                    Integrator::Trapezoid => {
                        let mut acc = interior[i] + m0[i] * g_m[i] * 0.5;
                        if keep_last {
                            acc += m_m[i] * g0[i] * 0.5;
                        }
                        acc
                    }
                };
                acc * dt
            })
            .collect()
    }

    pub fn step(&mut self) -> Result<()> {
        let m = self.current_step();
        let dt = self.config.dt;
        let memory = match self.memory.take() {
            Some(c) => c,
            None => {
                let interior = self.interior(m);
                self.close_memory(&interior, m, &self.history.rows[m], &self.kernel.rows[m])
            }
        };
        let current = &self.history.rows[m];
        let euler: Vec<Block> =
            (0..memory.len()).map(|i| self.propagator[i] * (current[i] - memory[i] * dt)).collect();
        let interior = self.interior(m + 1);
        let next = match self.config.integrator {
            Integrator::Rectangle => euler,
            Integrator::Trapezoid => {
                // predictor-corrector: average the drive over both ends of the step
                let predicted_kernel = self.kernel_row(m + 1, &euler)?;
                let predicted = self.close_memory(&interior, m + 1, &euler, &predicted_kernel);
                (0..memory.len())
                    .map(|i| {
                        let p = self.propagator[i];
                        p * current[i] - (p * memory[i] + predicted[i]) * (0.5 * dt)
                    })
                    .collect()
            }
        };
        self.push_row(next)?;
        let last = self.history.rows.len() - 1;
        self.memory =
            Some(self.close_memory(&interior, last, &self.history.rows[last], &self.kernel.rows[last]));
        Ok(())
    }

    /// Runs to `t_max` and returns the full solution.
    pub fn run(mut self) -> Result<Solution> {
        let steps = self.config.n_steps();
        while self.current_step() < steps {
            self.step()?;
        }
        Ok(Solution { config: self.config, history: self.history, kernel: self.kernel })
    }
}

/// Histories of a completed run together with reporting helpers.
#[derive(Debug, Clone)]
pub struct Solution {
    pub config: SolverConfig,
    pub history: PropagatorHistory,
    pub kernel: MemoryKernel,
}

/// Runs the solver to `t_max`.
pub fn solve(config: SolverConfig) -> Result<Solution> {
    Solver::new(config)?.run()
}

/// Runs until the reported propagator at `k` (see [`Solution::greens`])
/// first drops below `floor * |G_k(0)|` at time `t*`, then continues to
/// `(1 + extra) t*` so that shifted fit windows still have data. Stops at
/// `t_max` regardless.
pub fn solve_until_decayed(config: SolverConfig, k: f64, floor: f64, extra: f64) -> Result<Solution> {
    let probe = Probe::new(&config, k)?;
    let mut solver = Solver::new(config)?;
    let g0 = probe.value(&solver.history.rows[0])?.norm();
    let mut steps = solver.config.n_steps();
    let mut crossed = false;
    while solver.current_step() < steps {
        solver.step()?;
        let row = solver.history.rows.last().expect("history is never empty");
        if !crossed && probe.value(row)?.norm() < floor * g0 {
            crossed = true;
            let m = solver.current_step() as f64;
            steps = steps.min((m * (1.0 + extra)).ceil() as usize);
        }
    }
    Ok(Solution { config: solver.config, history: solver.history, kernel: solver.kernel })
}

/// Extracts the reported scalar propagator from one row of blocks.
struct Probe {
    index: usize,
    k: f64,
    h: f64,
}

impl Probe {
    fn new(config: &SolverConfig, k: f64) -> Result<Self> {
        config.validate()?;
        if config.h == 0.0 {
            let js = MomentumGrid::new(config.n_sites)?.exact_index(k).ok_or_else(|| {
                Error::invalid(format!("k = {k} is not on the L = {} site grid", config.n_sites))
            })?;
            let ks = 2.0 * std::f64::consts::PI * js as f64 / config.n_sites as f64;
            Ok(Self { index: js % config.n_cells(), k: ks, h: 0.0 })
        } else {
            let grid = MomentumGrid::new(config.n_cells())?;
            let j = grid.exact_index(k).ok_or_else(|| {
                Error::invalid(format!("k = {k} is not on the N = {} unit-cell grid", config.n_cells()))
            })?;
            Ok(Self { index: j, k: grid.point(j), h: config.h })
        }
    }

    fn value(&self, row: &[Block]) -> Result<Complex64> {
        if self.h == 0.0 {
            Ok(unit_cell_reduce(&row[self.index], self.k))
        } else {
            Ok(quasiparticle_basis(&row[self.index], self.k, self.h)?[(0, 0)])
        }
    }
}

impl Solution {
    pub fn times(&self) -> Vec<f64> {
        (0..self.history.rows.len()).map(|m| m as f64 * self.config.dt).collect()
    }

    fn cell_momentum(&self, j: usize) -> f64 {
        2.0 * std::f64::consts::PI * j as f64 / self.config.n_cells() as f64
    }

    /// Block at unit-cell momentum index `j` and step `m` in the requested frame.
    pub fn block(&self, m: usize, j: usize, frame: Frame) -> Block {
        let g = self.history.rows[m][j];
        match frame {
            Frame::Lab => g,
            Frame::Rotating => {
                let t = m as f64 * self.config.dt;
                expm_hermitian(&two_band_matrix(self.cell_momentum(j), self.config.h), -t) * g
            }
        }
    }

    fn probe_series(&self, rows: &[Vec<Block>], probe: &Probe) -> Result<Vec<Complex64>> {
        rows.iter().map(|r| probe.value(r)).collect()
    }

    /// Reported propagator: single-site `G_k(t)` for `h = 0` (`k` on the
    /// site grid), otherwise the lower-band quasiparticle propagator at
    /// unit-cell momentum `k`.
    pub fn greens(&self, k: f64) -> Result<Vec<Complex64>> {
        self.probe_series(&self.history.rows, &Probe::new(&self.config, k)?)
    }

    /// `|Sigma_k(t)| = |M_k(t)|` in the same representation as [`Self::greens`].
    pub fn self_energy_abs(&self, k: f64) -> Result<Vec<f64>> {
        let series = self.probe_series(&self.kernel.rows, &Probe::new(&self.config, k)?)?;
        Ok(series.into_iter().map(|z| z.norm()).collect())
    }
}
