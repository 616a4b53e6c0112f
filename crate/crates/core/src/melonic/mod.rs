//! Self-consistent memory-matrix evolution of the staggered chain.

pub mod kernel;
pub mod solver;
pub mod sweep;

pub use kernel::{kernel_direct, KernelFft};
pub use solver::{
    solve, solve_until_decayed, Frame, Integrator, KernelMode, MemoryKernel, PropagatorHistory, Solution, Solver,
    SolverConfig,
};
pub use sweep::{decay_rate, rate_sweep, suggested_t_max, RatePoint};
