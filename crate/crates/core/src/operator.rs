//! Finite-difference discretization of `H = -nu d^2/dy^2 + i k (v(y) - lambda)`.
//!
//! The diffusion part is the symmetric graph Laplacian on a uniform grid:
//! boundary rows couple only `(g_0 - g_1)` and `(g_{n-1} - g_{n-2})`. With the
//! discrete inner product `<f, g>_h = h sum f_i conj(g_i)` this gives exact
//! summation by parts,
//!
//! ```text
//! Re <H g, g>_h = nu ||D_h g||_h^2,    Im <H g, g>_h = k h sum (v_i - lambda) |g_i|^2,
//! ```
//!
//! so the matrix is accretive by construction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::levelset::Span;
use crate::profiles::{DomainSpec, ShearProfile};
use crate::tridiag::{Tridiagonal, C64};

/// Cell-centred grid: `n` cells of width `h = (hi - lo) / n`, one node at the
/// centre of each. The Neumann rows then reflect about the cell faces `lo`
/// and `hi`, which keeps the closure second order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
    pub h: f64,
}

impl Grid1D {
    pub fn new(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::InvalidGrid(format!("need n >= 3, got {n}")));
        }
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidGrid(format!("bad bounds [{lo}, {hi}]")));
        }
        Ok(Self { lo, hi, n, h: (hi - lo) / n as f64 })
    }

    pub fn node(&self, i: usize) -> f64 {
        self.lo + (i as f64 + 0.5) * self.h
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.node(i)).collect()
    }

    pub fn span(&self) -> Span {
        Span::new(self.lo, self.hi)
    }

    /// Same interval, each cell split in two.
    pub fn refined(&self) -> Self {
        Self::new(self.lo, self.hi, 2 * self.n).expect("refinement of a valid grid")
    }
}

/// How unbounded cross-sections are cut and how finely they are resolved.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TruncationPolicy {
    /// Unbounded sides are cut at distance `margin_factor * max(layer, 1)`.
    pub margin_factor: f64,
    /// Grid points per boundary-layer width `(nu/|k|)^{1/(m+2)}`.
    pub n_per_layer: f64,
    pub n_min: usize,
    pub n_cap: usize,
    /// Explicit window, overriding the cut.
    pub window: Option<Span>,
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        Self { margin_factor: 8.0, n_per_layer: 10.0, n_min: 201, n_cap: 200_000, window: None }
    }
}

impl TruncationPolicy {
    /// The same policy with every unbounded side cut twice as far out.
    pub fn doubled(&self, p: &ShearProfile) -> Self {
        let mut out = *self;
        match self.window {
            Some(w) => {
                let d = p.domain();
                let lo = if w.lo > d.lo() { d.lo().max(w.hi - 2.0 * (w.hi - w.lo)) } else { w.lo };
                let hi = if w.hi < d.hi() { d.hi().min(w.lo + 2.0 * (w.hi - w.lo)) } else { w.hi };
                out.window = Some(Span::new(lo, hi));
            }
            None => out.margin_factor *= 2.0,
        }
        out
    }
}

/// Boundary-layer width `(nu/|k|)^{1/(m+2)}` of the enhanced-dissipation regime.
pub fn layer_width(nu: f64, k: f64, m: usize) -> f64 {
    if k == 0.0 {
        1.0
    } else {
        (nu / k.abs()).powf(1.0 / (m as f64 + 2.0))
    }
}

/// Grid on a truncation of the profile's cross-section.
pub fn truncate_domain(p: &ShearProfile, nu: f64, k: f64, policy: &TruncationPolicy) -> Result<Grid1D> {
    if !(policy.margin_factor > 0.0 && policy.n_per_layer > 0.0) || policy.n_cap < 3 {
        return Err(Error::InvalidParams("truncation policy must be positive".into()));
    }
    if !(nu > 0.0) {
        return Err(Error::InvalidParams(format!("nu must be positive, got {nu}")));
    }
    let layer = layer_width(nu, k, p.m());
    let cut = policy.margin_factor * layer.max(1.0);
    let (lo, hi) = match policy.window {
        Some(w) => {
            if w.lo < p.domain().lo() || w.hi > p.domain().hi() || !(w.lo < w.hi) || !w.lo.is_finite() || !w.hi.is_finite()
            {
                return Err(Error::InvalidGrid(format!("window {w:?} outside domain of {}", p.name())));
            }
            (w.lo, w.hi)
        }
        None => match *p.domain() {
            DomainSpec::FullLine => (-cut, cut),
            DomainSpec::HalfLineRight { a } => (a, a + cut),
            DomainSpec::HalfLineLeft { b } => (b - cut, b),
            DomainSpec::Interval { a, b } => (a, b),
        },
    };
    let h_target = layer.min(1.0) / policy.n_per_layer;
    let n = (((hi - lo) / h_target).ceil() as usize + 1).clamp(policy.n_min.max(3), policy.n_cap);
    Grid1D::new(lo, hi, n)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Closure {
    /// Zero-flux ghost points; the default.
    #[default]
    Neumann,
    /// Zero ghost values outside the grid.
    Dirichlet,
}

/// Discretized `H_{nu,k,lambda}` with symmetric real off-diagonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TridiagonalOperator {
    pub n: usize,
    pub diag: Vec<C64>,
    pub off: Vec<f64>,
    pub nu: f64,
    pub k: f64,
    pub lambda: f64,
    pub grid: Grid1D,
    pub closure: Closure,
    /// Samples `v(y_i)`.
    pub potential: Vec<f64>,
}

pub fn assemble(p: &ShearProfile, grid: &Grid1D, nu: f64, k: f64, lambda: f64) -> Result<TridiagonalOperator> {
    assemble_with(p, grid, nu, k, lambda, Closure::Neumann)
}

pub fn assemble_with(
    p: &ShearProfile,
    grid: &Grid1D,
    nu: f64,
    k: f64,
    lambda: f64,
    closure: Closure,
) -> Result<TridiagonalOperator> {
    if grid.n < 3 || !(grid.h > 0.0) {
        return Err(Error::InvalidGrid(format!("{grid:?}")));
    }
    if grid.lo < p.domain().lo() || grid.hi > p.domain().hi() {
        return Err(Error::InvalidGrid(format!("grid [{}, {}] leaves the domain of {}", grid.lo, grid.hi, p.name())));
    }
    if !(nu > 0.0) {
        return Err(Error::InvalidParams(format!("nu must be positive, got {nu}")));
    }
    let potential: Vec<f64> = grid.nodes().iter().map(|&y| p.value(y)).collect();
    Ok(from_potential(potential, *grid, nu, k, lambda, closure))
}

/// Operator for sampled velocities `v_i` on `grid`.
pub fn from_potential(potential: Vec<f64>, grid: Grid1D, nu: f64, k: f64, lambda: f64, closure: Closure) -> TridiagonalOperator {
    let n = grid.n;
    let c = nu / (grid.h * grid.h);
    let diag = (0..n)
        .map(|i| {
            let edge = i == 0 || i == n - 1;
            let re = match closure {
                Closure::Neumann if edge => c,
                Closure::Dirichlet if edge => 3.0 * c,
                _ => 2.0 * c,
            };
            C64::new(re, k * (potential[i] - lambda))
        })
        .collect();
    TridiagonalOperator { n, diag, off: vec![-c; n - 1], nu, k, lambda, grid, closure, potential }
}

impl TridiagonalOperator {
    /// The operator at another level `lambda`.
    pub fn shifted(&self, lambda: f64) -> Self {
        let mut out = self.clone();
        for (d, v) in out.diag.iter_mut().zip(&self.potential) {
            d.im = self.k * (v - lambda);
        }
        out.lambda = lambda;
        out
    }

    pub fn to_tridiagonal(&self) -> Tridiagonal {
        let off: Vec<C64> = self.off.iter().map(|&o| C64::new(o, 0.0)).collect();
        Tridiagonal { lower: off.clone(), diag: self.diag.clone(), upper: off }
    }

    pub fn apply(&self, g: &[C64]) -> Result<Vec<C64>> {
        if g.len() != self.n {
            return Err(Error::LengthMismatch { expected: self.n, got: g.len() });
        }
        let n = self.n;
        let mut out = vec![C64::new(0.0, 0.0); n];
        for i in 0..n {
            let mut acc = self.diag[i] * g[i];
            if i > 0 {
                acc += g[i - 1] * self.off[i - 1];
            }
            if i + 1 < n {
                acc += g[i + 1] * self.off[i];
            }
            out[i] = acc;
        }
        Ok(out)
    }

    pub fn inner(&self, f: &[C64], g: &[C64]) -> C64 {
        inner_h(f, g, self.grid.h)
    }

    pub fn norm(&self, g: &[C64]) -> f64 {
        norm_h(g, self.grid.h)
    }
}

/// `<f, g>_h = h sum f_i conj(g_i)`.
pub fn inner_h(f: &[C64], g: &[C64], h: f64) -> C64 {
    f.iter().zip(g).map(|(a, b)| a * b.conj()).sum::<C64>() * h
}

pub fn norm_h(g: &[C64], h: f64) -> f64 {
    (h * g.iter().map(|z| z.norm_sqr()).sum::<f64>()).sqrt()
}

/// `||D_h g||_h` with forward differences.
pub fn grad_norm_h(g: &[C64], h: f64) -> f64 {
    let s: f64 = g.windows(2).map(|w| ((w[1] - w[0]) / h).norm_sqr()).sum();
    (h * s).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NumericalRangeResidual {
    pub re_residual: f64,
    pub im_residual: f64,
}

/// Residuals of the two numerical-range identities, relative to `||g||_h^2`.
pub fn numerical_range_check(op: &TridiagonalOperator, g: &[C64]) -> Result<NumericalRangeResidual> {
    let hg = op.apply(g)?;
    let h = op.grid.h;
    let g2 = norm_h(g, h).powi(2);
    if g2 == 0.0 {
        return Err(Error::ZeroVector);
    }
    let q = inner_h(&hg, g, h);
    let grad = grad_norm_h(g, h);
    let im_expected =
        op.k * h * op.potential.iter().zip(g).map(|(v, z)| (v - op.lambda) * z.norm_sqr()).sum::<f64>();
    Ok(NumericalRangeResidual {
        re_residual: (q.re - op.nu * grad * grad).abs() / g2,
        im_residual: (q.im - im_expected).abs() / g2,
    })
}

/// Edge-to-peak ratio above which the interpolation inequality is not applicable.
pub const EDGE_DECAY_TOL: f64 = 1e-6;

/// `||g||_inf^2 / (2 ||g||_h ||D_h g||_h)` for vectors vanishing at the edges.
pub fn interpolation_inequality_check(g: &[C64], grid: &Grid1D) -> Result<f64> {
    if g.len() != grid.n {
        return Err(Error::LengthMismatch { expected: grid.n, got: g.len() });
    }
    let peak = g.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if peak == 0.0 {
        return Err(Error::ZeroVector);
    }
    let edge = g[0].norm().max(g[g.len() - 1].norm());
    if edge >= EDGE_DECAY_TOL * peak {
        return Err(Error::EdgeNotDecayed { ratio: edge / peak });
    }
    let denom = 2.0 * norm_h(g, grid.h) * grad_norm_h(g, grid.h);
    Ok(peak * peak / denom)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn grid_nodes() {
        let g = Grid1D::new(-1.0, 1.0, 5).unwrap();
        let want = [-0.8, -0.4, 0.0, 0.4, 0.8];
        assert!(g.nodes().iter().zip(want).all(|(a, b)| (a - b).abs() < 1e-15));
        assert!(Grid1D::new(0.0, 1.0, 2).is_err());
        assert_eq!(g.refined().n, 10);
        assert_eq!(g.refined().h, 0.5 * g.h);
    }

    #[test]
    fn truncation_examples() {
        let pol = TruncationPolicy::default();
        let g = truncate_domain(&ShearProfile::poiseuille(), 1e-3, 1.0, &pol).unwrap();
        assert_eq!((g.lo, g.hi), (-1.0, 1.0));

        let g = truncate_domain(&ShearProfile::couette(), 1e-3, 1.0, &pol).unwrap();
        assert_eq!(g.lo, -g.hi);
        assert!(g.hi >= 8.0);
        assert!(g.h <= 0.1 / 10.0 + 1e-15);

        let pol_tc = TruncationPolicy { window: Some(Span::new(1.0, 40.0)), ..pol };
        let g = truncate_domain(&ShearProfile::taylor_couette(), 1e-3, 1.0, &pol_tc).unwrap();
        assert_eq!((g.lo, g.hi), (1.0, 40.0));
    }

    #[test]
    fn doubled_policy() {
        let p = ShearProfile::taylor_couette();
        let pol = TruncationPolicy { window: Some(Span::new(1.0, 40.0)), ..Default::default() };
        assert_eq!(truncate_domain(&p, 1e-3, 1.0, &pol).unwrap().hi, 40.0);
        assert_eq!(pol.doubled(&p).window, Some(Span::new(1.0, 79.0)));
        let pol = TruncationPolicy::default();
        let c = ShearProfile::couette();
        let g = truncate_domain(&c, 1e-3, 1.0, &pol).unwrap();
        let g2 = truncate_domain(&c, 1e-3, 1.0, &pol.doubled(&c)).unwrap();
        assert_eq!(g2.hi, 2.0 * g.hi);
    }

    #[test]
    fn heat_kernel_is_constant() {
        let p = ShearProfile::kolmogorov();
        let grid = Grid1D::new(0.0, 6.0, 50).unwrap();
        let op = assemble(&p, &grid, 0.7, 0.0, 0.0).unwrap();
        let y = op.apply(&vec![c(1.0); 50]).unwrap();
        assert!(y.iter().all(|z| z.norm() < 1e-12));
    }

    #[test]
    fn couette_multiplication_part() {
        let grid = Grid1D::new(-2.0, 2.0, 41).unwrap();
        let op = assemble(&ShearProfile::couette(), &grid, 1e-3, 1.0, 0.0).unwrap();
        let y = op.apply(&vec![c(1.0); 41]).unwrap();
        for (z, yj) in y.iter().zip(grid.nodes()) {
            assert!((z - C64::new(0.0, yj)).norm() < 1e-12);
        }
    }

    #[test]
    fn apply_zero_and_basis() {
        let grid = Grid1D::new(-1.0, 1.0, 7).unwrap();
        let op = assemble(&ShearProfile::poiseuille(), &grid, 0.3, 2.0, 0.1).unwrap();
        assert!(op.apply(&vec![c(0.0); 7]).unwrap().iter().all(|z| *z == c(0.0)));
        let mut e0 = vec![c(0.0); 7];
        e0[0] = c(1.0);
        let col = op.apply(&e0).unwrap();
        let dense = op.to_tridiagonal().to_dense();
        for i in 0..7 {
            assert_eq!(col[i], dense[(i, 0)]);
        }
        assert!(matches!(op.apply(&[c(1.0)]), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn matches_dense_assembly() {
        // dense construction written out entry by entry
        let grid = Grid1D::new(-3.0, 2.0, 200).unwrap();
        let p = ShearProfile::monomial_on(3, DomainSpec::FullLine);
        let (nu, k, lambda) = (0.02, -1.5, 0.4);
        let op = assemble(&p, &grid, nu, k, lambda).unwrap();
        let h = grid.h;
        let n = grid.n;
        let mut dense = nalgebra::DMatrix::<C64>::zeros(n, n);
        for i in 0..n {
            let y = grid.lo + (i as f64 + 0.5) * h;
            dense[(i, i)] += C64::new(0.0, k * (y.powi(3) - lambda));
            if i > 0 {
                dense[(i, i)] += c(nu / (h * h));
                dense[(i, i - 1)] -= c(nu / (h * h));
            }
            if i + 1 < n {
                dense[(i, i)] += c(nu / (h * h));
                dense[(i, i + 1)] -= c(nu / (h * h));
            }
        }
        let got = op.to_tridiagonal().to_dense();
        let scale = dense.iter().map(|z| z.norm()).fold(0.0, f64::max);
        for (a, b) in got.iter().zip(dense.iter()) {
            assert!((a - b).norm() <= 1e-13 * scale);
        }
    }

    #[test]
    fn apply_matches_dense_matvec() {
        let mut r = rng::seeded(11);
        let grid = Grid1D::new(-1.0, 1.0, 100).unwrap();
        let op = assemble(&ShearProfile::poiseuille(), &grid, 0.05, 3.0, 0.2).unwrap();
        let g = rng::complex_gaussian(&mut r, 100);
        let want = op.to_tridiagonal().to_dense() * nalgebra::DVector::from_vec(g.clone());
        let got = op.apply(&g).unwrap();
        let num: f64 = got.iter().zip(want.iter()).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
        let den: f64 = want.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        assert!(num / den <= 1e-14);
    }

    #[test]
    fn numerical_range_examples() {
        let grid = Grid1D::new(-8.0, 8.0, 1601).unwrap();
        let heat = assemble(&ShearProfile::couette(), &grid, 1e-3, 0.0, 0.0).unwrap();
        let r = numerical_range_check(&heat, &vec![c(1.0); 1601]).unwrap();
        assert!(r.re_residual < 1e-15 && r.im_residual < 1e-15);

        let op = assemble(&ShearProfile::couette(), &grid, 1e-3, 1.0, 0.0).unwrap();
        let mut rg = rng::seeded(5);
        let g = rng::complex_gaussian(&mut rg, 1601);
        let r = numerical_range_check(&op, &g).unwrap();
        assert!(r.re_residual <= 1e-12 && r.im_residual <= 1e-12, "{r:?}");

        assert!(matches!(numerical_range_check(&op, &vec![c(0.0); 1601]), Err(Error::ZeroVector)));
    }

    #[test]
    fn laplacian_eigenvector_rayleigh_quotient() {
        // Neumann graph Laplacian eigenpairs: cos(pi j (i + 1/2) / n), 4 sin^2(pi j / 2n) / h^2
        let n = 120;
        let grid = Grid1D::new(0.0, 1.0, n).unwrap();
        let nu = 0.3;
        let op = assemble(&ShearProfile::couette_on(DomainSpec::Interval { a: 0.0, b: 1.0 }), &grid, nu, 0.0, 0.0)
            .unwrap();
        for j in [1usize, 5, 40] {
            let g: Vec<C64> = (0..n)
                .map(|i| c((std::f64::consts::PI * j as f64 * (i as f64 + 0.5) / n as f64).cos()))
                .collect();
            let q = op.inner(&op.apply(&g).unwrap(), &g) / op.norm(&g).powi(2);
            let mu = 4.0 * (std::f64::consts::PI * j as f64 / (2.0 * n as f64)).sin().powi(2) / (grid.h * grid.h);
            assert!((q.re - nu * mu).abs() <= 1e-12 * nu * mu.max(1.0), "j={j}");
        }
    }

    #[test]
    fn interpolation_examples() {
        let grid = Grid1D::new(-10.0, 10.0, 4001).unwrap();
        let gauss = |s: f64| -> Vec<C64> { grid.nodes().iter().map(|&y| c((-(y / s).powi(2) / 2.0).exp())).collect() };
        let r = interpolation_inequality_check(&gauss(1.0), &grid).unwrap();
        let exact = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
        assert!((r - exact).abs() < 1e-3, "{r}");
        let r2 = interpolation_inequality_check(&gauss(0.5), &grid).unwrap();
        assert!((r2 - exact).abs() < 2e-3, "{r2}");
        let wide = vec![c(1.0); grid.n];
        assert!(matches!(interpolation_inequality_check(&wide, &grid), Err(Error::EdgeNotDecayed { .. })));
    }

    #[test]
    fn dirichlet_closure_reflects_oddly() {
        let grid = Grid1D::new(-1.0, 1.0, 11).unwrap();
        let op = assemble_with(&ShearProfile::poiseuille(), &grid, 1.0, 1.0, 0.0, Closure::Dirichlet).unwrap();
        assert_eq!(op.diag[0].re, 1.5 * op.diag[5].re);
        assert_eq!(op.diag[10].re, op.diag[0].re);
    }
}
