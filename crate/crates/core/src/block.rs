//! Small dense 2x2 complex matrices, the per-momentum blocks of the two-band
//! propagators and memory kernels.

use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub, SubAssign};

use num_complex::Complex64;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Block(pub [[Complex64; 2]; 2]);

impl Block {
    pub const ZERO: Block = Block([[ZERO, ZERO], [ZERO, ZERO]]);
    pub const IDENTITY: Block = Block([[ONE, ZERO], [ZERO, ONE]]);

    pub fn new(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> Self {
        Block([[a, b], [c, d]])
    }

    pub fn diag(a: Complex64, d: Complex64) -> Self {
        Block([[a, ZERO], [ZERO, d]])
    }

    pub fn scaled_identity(s: f64) -> Self {
        Block::IDENTITY * s
    }

    pub fn adjoint(&self) -> Self {
        let m = &self.0;
        Block([[m[0][0].conj(), m[1][0].conj()], [m[0][1].conj(), m[1][1].conj()]])
    }

    pub fn conj(&self) -> Self {
        let m = &self.0;
        Block([[m[0][0].conj(), m[0][1].conj()], [m[1][0].conj(), m[1][1].conj()]])
    }

    pub fn trace(&self) -> Complex64 {
        self.0[0][0] + self.0[1][1]
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().flatten().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Largest singular value.
    pub fn spectral_norm(&self) -> f64 {
        // eigenvalues of the hermitian matrix A^dagger A
        let h = self.adjoint() * *self;
        let a = h.0[0][0].re;
        let d = h.0[1][1].re;
        let b = h.0[0][1].norm();
        let mean = 0.5 * (a + d);
        let radius = (0.25 * (a - d) * (a - d) + b * b).sqrt();
        (mean + radius).max(0.0).sqrt()
    }

    pub fn sum_entries(&self) -> Complex64 {
        self.0.iter().flatten().sum()
    }
}

impl Index<(usize, usize)> for Block {
    type Output = Complex64;
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.0[i][j]
    }
}

impl IndexMut<(usize, usize)> for Block {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.0[i][j]
    }
}

impl Add for Block {
    type Output = Block;
    fn add(self, rhs: Block) -> Block {
        let (a, b) = (self.0, rhs.0);
        Block([
            [a[0][0] + b[0][0], a[0][1] + b[0][1]],
            [a[1][0] + b[1][0], a[1][1] + b[1][1]],
        ])
    }
}

impl AddAssign for Block {
    fn add_assign(&mut self, rhs: Block) {
        *self = *self + rhs;
    }
}

impl Sub for Block {
    type Output = Block;
    fn sub(self, rhs: Block) -> Block {
        self + (-rhs)
    }
}

impl SubAssign for Block {
    fn sub_assign(&mut self, rhs: Block) {
        *self = *self - rhs;
    }
}

impl Neg for Block {
    type Output = Block;
    fn neg(self) -> Block {
        self * -1.0
    }
}

impl Mul for Block {
    type Output = Block;
    fn mul(self, rhs: Block) -> Block {
        let (a, b) = (self.0, rhs.0);
        Block([
            [
                a[0][0] * b[0][0] + a[0][1] * b[1][0],
                a[0][0] * b[0][1] + a[0][1] * b[1][1],
            ],
            [
                a[1][0] * b[0][0] + a[1][1] * b[1][0],
                a[1][0] * b[0][1] + a[1][1] * b[1][1],
            ],
        ])
    }
}

impl Mul<Complex64> for Block {
    type Output = Block;
    fn mul(self, s: Complex64) -> Block {
        let a = self.0;
        Block([[a[0][0] * s, a[0][1] * s], [a[1][0] * s, a[1][1] * s]])
    }
}

impl Mul<f64> for Block {
    type Output = Block;
    fn mul(self, s: f64) -> Block {
        self * Complex64::new(s, 0.0)
    }
}

/// Eigen-decomposition of a 2x2 hermitian matrix.
#[derive(Debug, Clone, Copy)]
pub struct HermitianEigen {
    /// Ascending eigenvalues.
    pub values: [f64; 2],
    /// Columns are the normalised eigenvectors, in the order of `values`.
    pub vectors: Block,
}

impl HermitianEigen {
    /// Returns `None` when the eigenvalues are degenerate to within `tol`.
    pub fn new(m: &Block, tol: f64) -> Option<Self> {
        let a = m.0[0][0].re;
        let d = m.0[1][1].re;
        let b = m.0[0][1];
        let mean = 0.5 * (a + d);
        let half_gap = (0.25 * (a - d) * (a - d) + b.norm_sqr()).sqrt();
        if half_gap <= tol {
            return None;
        }
        let values = [mean - half_gap, mean + half_gap];
        let vector = |lambda: f64| -> [Complex64; 2] {
            // rows of (m - lambda) are orthogonal to the eigenvector; pick the
            // better conditioned one
            let (x, y) = if (a - lambda).abs() >= (d - lambda).abs() {
                (-b, Complex64::new(a - lambda, 0.0))
            } else {
                (Complex64::new(d - lambda, 0.0), -b.conj())
            };
            let n = (x.norm_sqr() + y.norm_sqr()).sqrt();
            [x / n, y / n]
        };
        let lo = vector(values[0]);
        let hi = vector(values[1]);
        Some(Self {
            values,
            vectors: Block([[lo[0], hi[0]], [lo[1], hi[1]]]),
        })
    }
}

/// `exp(-i m t)` for a 2x2 hermitian `m`, using `sin(wt)/w -> t` at `w = 0`.
pub fn expm_hermitian(m: &Block, t: f64) -> Block {
    let a = m.0[0][0].re;
    let d = m.0[1][1].re;
    let mean = 0.5 * (a + d);
    let traceless = *m - Block::scaled_identity(mean);
    let w = (0.25 * (a - d) * (a - d) + m.0[0][1].norm_sqr()).sqrt();
    let sinc_t = if (w * t).abs() < 1e-8 {
        t * (1.0 - (w * t).powi(2) / 6.0)
    } else {
        (w * t).sin() / w
    };
    let phase = Complex64::from_polar(1.0, -mean * t);
    (Block::scaled_identity((w * t).cos()) + traceless * Complex64::new(0.0, -sinc_t)) * phase
}
