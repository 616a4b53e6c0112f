//! Melonic memory kernel on the two-site unit cell.
//!
//! For unit-cell momenta `k, p1, p2` on `N` points and `a = (1 - eta)/2`:
//!
//! ```text
//! (M chi)_{k,eta eta'} =
//!     64 D^2/N^2 sum cos^2(p2/2) e^{i p2 (a'-a)}
//!         G_{k+p1,-eta,-eta'} G*_{k+p1+p2,-eta,-eta'} G_{k+p2,eta,eta'}
//!   - 16 D^2/N^2 sum (1 + e^{i p2})(1 + e^{-i p1}) e^{-i p2 a} e^{i p1 a'}
//!         G_{k+p1,-eta,eta'} G*_{k+p1+p2,-eta,-eta'} G_{k+p2,eta,-eta'}
//! ```
//!
//! and `M = (M chi) chi^{-1} = 2 (M chi)`. `D` is the coefficient of
//! `(1 - 2n_r)(1 - 2n_{r+1})` in the Hamiltonian. Block index 0 is `eta = +`
//! (so `a = 0`), index 1 is `eta = -` (`a = 1`).
//!
//! Feeding free propagators gives the Golden-Rule kernel, feeding the
//! evolving solution gives the self-consistent (melonic) one. Only
//! propagators at the same time enter, so a kernel row depends on a single
//! history row.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::block::Block;
use crate::error::{Error, Result};
use crate::grid::Fourier;

fn check_row(row: &[Block]) -> Result<usize> {
    let n = row.len();
    if n < 2 {
        return Err(Error::InvalidState(format!(
            "kernel needs a history row over at least 2 unit-cell momenta, got {n}"
        )));
    }
    Ok(n)
}

/// Kernel row by the literal double momentum sum, `O(N^3)` for the whole row.
/// Kept as the reference the fast path is tested against.
pub fn kernel_direct(row: &[Block], delta: f64) -> Result<Vec<Block>> {
    let n = check_row(row)?;
    let nf = n as f64;
    let p = |j: usize| 2.0 * PI * j as f64 / nf;
    let c1 = 64.0 * delta * delta / (nf * nf);
    let c2 = 16.0 * delta * delta / (nf * nf);
    let mut out = vec![Block::ZERO; n];
    for (i, slot) in out.iter_mut().enumerate() {
        for e in 0..2 {
            for e2 in 0..2 {
                let (a, a2) = (e as f64, e2 as f64);
                let (ne, ne2) = (1 - e, 1 - e2);
                let mut t1 = Complex64::new(0.0, 0.0);
                let mut t2 = Complex64::new(0.0, 0.0);
                for j1 in 0..n {
                    let p1 = p(j1);
                    for j2 in 0..n {
                        let p2 = p(j2);
                        let g1 = &row[(i + j1) % n];
                        let g12 = &row[(i + j1 + j2) % n];
                        let g2 = &row[(i + j2) % n];
                        let w1 = Complex64::from_polar((p2 / 2.0).cos().powi(2), p2 * (a2 - a));
                        t1 += w1 * g1[(ne, ne2)] * g12[(ne, ne2)].conj() * g2[(e, e2)];
                        let w2 = (Complex64::new(1.0, 0.0) + Complex64::from_polar(1.0, p2))
                            * (Complex64::new(1.0, 0.0) + Complex64::from_polar(1.0, -p1))
                            * Complex64::from_polar(1.0, -p2 * a + p1 * a2);
                        t2 += w2 * g1[(ne, e2)] * g12[(ne, ne2)].conj() * g2[(e, ne2)];
                    }
                }
                slot[(e, e2)] = (t1 * c1 - t2 * c2) * 2.0;
            }
        }
    }
    Ok(out)
}

/// FFT evaluation of the same kernel row in `O(N log N)`.
///
/// Both terms factor into a `k`-independent inner correlation over `p1`
/// followed by a correlation in `k` over `p2`. The `(1 + e^{-i p1})` factor of
/// the second term is split into two plane waves in the summation momentum,
/// each of which is again `k`-independent up to an overall phase.
#[derive(Debug)]
pub struct KernelFft {
    n: usize,
    fourier: Fourier,
    /// `e^{i p_j}` for each grid momentum.
    phase: Vec<Complex64>,
}

impl KernelFft {
    pub fn new(n_cells: usize) -> Result<Self> {
        if n_cells < 2 {
            return Err(Error::invalid("kernel needs at least 2 unit cells"));
        }
        let phase = (0..n_cells)
            .map(|j| Complex64::from_polar(1.0, 2.0 * PI * j as f64 / n_cells as f64))
            .collect();
        Ok(Self { n: n_cells, fourier: Fourier::new(n_cells)?, phase })
    }

    pub fn n_cells(&self) -> usize {
        self.n
    }

    fn fft(&self, v: &[Complex64]) -> Vec<Complex64> {
        let mut out = v.to_vec();
        self.fourier.raw_forward(&mut out);
        out
    }

    /// `sum_r conj(a_r) b_{r+s}` from the spectra of `a` and `b`.
    fn corr_hat(&self, a_hat: &[Complex64], b_hat: &[Complex64]) -> Vec<Complex64> {
        let scale = 1.0 / self.n as f64;
        let mut out: Vec<Complex64> =
            a_hat.iter().zip(b_hat).map(|(a, b)| a.conj() * b * scale).collect();
        self.fourier.raw_inverse(&mut out);
        out
    }

    /// `e^{i p_j alpha}` for integer `alpha` in `{-1, 0, 1}`.
    fn wave(&self, j: usize, alpha: i32) -> Complex64 {
        match alpha {
            0 => Complex64::new(1.0, 0.0),
            1 => self.phase[j],
            -1 => self.phase[j].conj(),
            _ => unreachable!("plane-wave index outside {{-1, 0, 1}}"),
        }
    }

    pub fn kernel(&self, row: &[Block], delta: f64) -> Result<Vec<Block>> {
        let n = check_row(row)?;
        if n != self.n {
            return Err(Error::InvalidState(format!(
                "history row has {n} momenta, kernel was planned for {}",
                self.n
            )));
        }
        let nf = n as f64;
        let c1 = 64.0 * delta * delta / (nf * nf);
        let c2 = 16.0 * delta * delta / (nf * nf);

        let comp = |e: usize, e2: usize| -> Vec<Complex64> { row.iter().map(|g| g[(e, e2)]).collect() };
        let comps: [[Vec<Complex64>; 2]; 2] = [[comp(0, 0), comp(0, 1)], [comp(1, 0), comp(1, 1)]];
        let hats: [[Vec<Complex64>; 2]; 2] = [
            [self.fft(&comps[0][0]), self.fft(&comps[0][1])],
            [self.fft(&comps[1][0]), self.fft(&comps[1][1])],
        ];

        let mut out = vec![Block::ZERO; n];
        for e in 0..2 {
            for e2 in 0..2 {
                let (ne, ne2) = (1 - e, 1 - e2);
                let (a, a2) = (e as i32, e2 as i32);
                let x_hat = &hats[ne][ne2];

                // first term
                let h1 = self.corr_hat(x_hat, x_hat);
                let u_conj: Vec<Complex64> = (0..n)
                    .map(|s| {
                        let c = 0.5 * (1.0 + self.phase[s].re);
                        (self.wave(s, a2 - a) * h1[s].conj() * c).conj()
                    })
                    .collect();
                let t1 = self.corr_hat(&self.fft(&u_conj), &hats[e][e2]);

                // second term
                let y = &comps[ne][e2];
                let w_hat = &hats[e][ne2];
                let mut t2 = vec![Complex64::new(0.0, 0.0); n];
                for alpha in [a2, a2 - 1] {
                    let shifted: Vec<Complex64> = (0..n).map(|r| self.wave(r, alpha) * y[r]).collect();
                    let h2 = self.corr_hat(&self.fft(&shifted), x_hat);
                    let vh_conj: Vec<Complex64> = (0..n)
                        .map(|s| {
                            let v = (Complex64::new(1.0, 0.0) + self.phase[s]) * self.wave(s, -a);
                            (v * h2[s].conj()).conj()
                        })
                        .collect();
                    let s_alpha = self.corr_hat(&self.fft(&vh_conj), w_hat);
                    for (i, acc) in t2.iter_mut().enumerate() {
                        *acc += self.wave(i, -alpha) * s_alpha[i];
                    }
                }

                for i in 0..n {
                    out[i][(e, e2)] = (t1[i] * c1 - t2[i] * c2) * 2.0;
                }
            }
        }
        Ok(out)
    }
}
