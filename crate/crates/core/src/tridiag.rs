//! Complex tridiagonal matrices and their partially pivoted LU factorization.
//!
//! The factorization follows the LAPACK `gttrf`/`gttrs` layout: row
//! interchanges push fill-in onto a second superdiagonal, so `U` has
//! bandwidth two. Solves with both `A` and `A^H` are supported.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

#[derive(Debug, Clone, PartialEq)]
pub struct Tridiagonal {
    /// Subdiagonal, `lower[i] = A[i+1][i]`.
    pub lower: Vec<C64>,
    pub diag: Vec<C64>,
    /// Superdiagonal, `upper[i] = A[i][i+1]`.
    pub upper: Vec<C64>,
}

impl Tridiagonal {
    pub fn new(lower: Vec<C64>, diag: Vec<C64>, upper: Vec<C64>) -> Result<Self> {
        let n = diag.len();
        if n == 0 {
            return Err(Error::InvalidGrid("empty tridiagonal matrix".into()));
        }
        if lower.len() != n - 1 {
            return Err(Error::LengthMismatch { expected: n - 1, got: lower.len() });
        }
        if upper.len() != n - 1 {
            return Err(Error::LengthMismatch { expected: n - 1, got: upper.len() });
        }
        Ok(Self { lower, diag, upper })
    }

    pub fn n(&self) -> usize {
        self.diag.len()
    }

    /// `y = A x`.
    pub fn apply(&self, x: &[C64]) -> Result<Vec<C64>> {
        let mut y = vec![C64::new(0.0, 0.0); self.n()];
        self.apply_into(x, &mut y)?;
        Ok(y)
    }

    pub fn apply_into(&self, x: &[C64], y: &mut [C64]) -> Result<()> {
        let n = self.n();
        if x.len() != n {
            return Err(Error::LengthMismatch { expected: n, got: x.len() });
        }
        if y.len() != n {
            return Err(Error::LengthMismatch { expected: n, got: y.len() });
        }
        for i in 0..n {
            let mut acc = self.diag[i] * x[i];
            if i > 0 {
                acc += self.lower[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                acc += self.upper[i] * x[i + 1];
            }
            y[i] = acc;
        }
        Ok(())
    }

    /// `y = A^H x`.
    pub fn apply_adjoint(&self, x: &[C64]) -> Result<Vec<C64>> {
        self.adjoint().apply(x)
    }

    pub fn adjoint(&self) -> Self {
        Self {
            lower: self.upper.iter().map(|z| z.conj()).collect(),
            diag: self.diag.iter().map(|z| z.conj()).collect(),
            upper: self.lower.iter().map(|z| z.conj()).collect(),
        }
    }

    /// `s A`.
    pub fn scaled(&self, s: f64) -> Self {
        Self {
            lower: self.lower.iter().map(|z| z * s).collect(),
            diag: self.diag.iter().map(|z| z * s).collect(),
            upper: self.upper.iter().map(|z| z * s).collect(),
        }
    }

    /// `alpha I + beta A`.
    pub fn affine(&self, alpha: C64, beta: C64) -> Self {
        Self {
            lower: self.lower.iter().map(|z| z * beta).collect(),
            diag: self.diag.iter().map(|z| alpha + z * beta).collect(),
            upper: self.upper.iter().map(|z| z * beta).collect(),
        }
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let n = self.n();
        DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                self.diag[i]
            } else if i == j + 1 {
                self.lower[j]
            } else if j == i + 1 {
                self.upper[i]
            } else {
                C64::new(0.0, 0.0)
            }
        })
    }

    pub fn factor(&self) -> Result<TridiagLu> {
        TridiagLu::new(self)
    }
}

#[inline]
fn cabs1(z: C64) -> f64 {
    z.re.abs() + z.im.abs()
}

/// `P A = L U` with `L` unit lower bidiagonal (stored as multipliers) and `U`
/// upper triangular with two superdiagonals.
#[derive(Debug, Clone)]
pub struct TridiagLu {
    dl: Vec<C64>,
    d: Vec<C64>,
    du: Vec<C64>,
    du2: Vec<C64>,
    swapped: Vec<bool>,
}

impl TridiagLu {
    pub fn new(a: &Tridiagonal) -> Result<Self> {
        let n = a.n();
        let mut dl = a.lower.clone();
        let mut d = a.diag.clone();
        let mut du = a.upper.clone();
        let mut du2 = vec![C64::new(0.0, 0.0); n.saturating_sub(2)];
        let mut swapped = vec![false; n.saturating_sub(1)];

        for i in 0..n.saturating_sub(1) {
            if cabs1(d[i]) >= cabs1(dl[i]) {
                if d[i] != C64::new(0.0, 0.0) {
                    let fact = dl[i] / d[i];
                    dl[i] = fact;
                    d[i + 1] -= fact * du[i];
                }
            } else {
                let fact = d[i] / dl[i];
                d[i] = dl[i];
                dl[i] = fact;
                let temp = du[i];
                du[i] = d[i + 1];
                d[i + 1] = temp - fact * d[i + 1];
                if i + 2 < n {
                    du2[i] = du[i + 1];
                    du[i + 1] = -fact * du[i + 1];
                }
                swapped[i] = true;
            }
        }
        if d.iter().any(|z| *z == C64::new(0.0, 0.0) || !z.is_finite()) {
            return Err(Error::SingularMatrix);
        }
        Ok(Self { dl, d, du, du2, swapped })
    }

    pub fn n(&self) -> usize {
        self.d.len()
    }

    /// Overwrite `b` with `A^{-1} b`.
    pub fn solve_in_place(&self, b: &mut [C64]) {
        let n = self.n();
        debug_assert_eq!(b.len(), n);
        for i in 0..n.saturating_sub(1) {
            if !self.swapped[i] {
                b[i + 1] -= self.dl[i] * b[i];
            } else {
                let temp = b[i];
                b[i] = b[i + 1];
                b[i + 1] = temp - self.dl[i] * b[i];
            }
        }
        b[n - 1] /= self.d[n - 1];
        if n > 1 {
            b[n - 2] = (b[n - 2] - self.du[n - 2] * b[n - 1]) / self.d[n - 2];
        }
        for i in (0..n.saturating_sub(2)).rev() {
            b[i] = (b[i] - self.du[i] * b[i + 1] - self.du2[i] * b[i + 2]) / self.d[i];
        }
    }

    /// Overwrite `b` with `A^{-H} b`.
    pub fn solve_adjoint_in_place(&self, b: &mut [C64]) {
        let n = self.n();
        debug_assert_eq!(b.len(), n);
        b[0] /= self.d[0].conj();
        if n > 1 {
            b[1] = (b[1] - self.du[0].conj() * b[0]) / self.d[1].conj();
        }
        for i in 2..n {
            b[i] = (b[i] - self.du[i - 1].conj() * b[i - 1] - self.du2[i - 2].conj() * b[i - 2]) / self.d[i].conj();
        }
        for i in (0..n.saturating_sub(1)).rev() {
            if !self.swapped[i] {
                b[i] -= self.dl[i].conj() * b[i + 1];
            } else {
                let temp = b[i + 1];
                b[i + 1] = b[i] - self.dl[i].conj() * temp;
                b[i] = temp;
            }
        }
    }

    /// Solve `A X = B` where `B` is `n x width`, stored row-major in `b`.
    pub fn solve_rows_in_place(&self, b: &mut [C64], width: usize) {
        let n = self.n();
        debug_assert_eq!(b.len(), n * width);
        let axpy = |b: &mut [C64], dst: usize, src: usize, f: C64| {
            for j in 0..width {
                let s = b[src * width + j];
                b[dst * width + j] -= f * s;
            }
        };
        for i in 0..n.saturating_sub(1) {
            if !self.swapped[i] {
                axpy(b, i + 1, i, self.dl[i]);
            } else {
                let (head, tail) = b.split_at_mut((i + 1) * width);
                head[i * width..].swap_with_slice(&mut tail[..width]);
                axpy(b, i + 1, i, self.dl[i]);
            }
        }
        for i in (0..n).rev() {
            let inv = 1.0 / self.d[i];
            if i + 1 < n {
                axpy(b, i, i + 1, self.du[i]);
            }
            if i + 2 < n {
                axpy(b, i, i + 2, self.du2[i]);
            }
            for z in &mut b[i * width..(i + 1) * width] {
                *z *= inv;
            }
        }
    }

    pub fn solve(&self, b: &[C64]) -> Vec<C64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    pub fn solve_adjoint(&self, b: &[C64]) -> Vec<C64> {
        let mut x = b.to_vec();
        self.solve_adjoint_in_place(&mut x);
        x
    }
}
