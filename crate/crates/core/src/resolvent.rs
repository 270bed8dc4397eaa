//! Resolvent norms along the imaginary axis and the pseudospectral abscissa
//!
//! ```text
//! Psi(H) = ( sup_{z in iR} ||(H - z)^{-1}|| )^{-1} = inf_lambda sigma_min(H - i k lambda).
//! ```
//!
//! `sigma_min` is obtained by inverse iteration on the normal equations,
//! accelerated by a Lanczos recurrence: the Krylov space of
//! `(A^H A)^{-1} = A^{-1} A^{-H}` is built with one pivoted tridiagonal solve
//! by `A^H` and one by `A` per step, and the largest Ritz value `theta` gives
//! `sigma_min = theta^{-1/2}`.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::levelset::Cutoff;
use crate::operator::{assemble, grad_norm_h, norm_h, truncate_domain, Grid1D, TridiagonalOperator, TruncationPolicy};
use crate::par::{self, Exec};
use crate::profiles::ShearProfile;
use crate::rng;
use crate::sweep::rate_target;
use crate::tridiag::{Tridiagonal, TridiagLu, C64};

/// Largest size for which the dense SVD fallback is attempted.
pub const DENSE_FALLBACK_MAX: usize = 2000;

/// Below this value `sigma_min` is reported as exactly zero.
pub const SINGULAR_FLOOR: f64 = 1e-300;

const KRYLOV_DIM: usize = 40;

/// `sigma_min` of the discretized operator.
pub fn smallest_singular_value(op: &TridiagonalOperator, tol: f64, max_iter: usize) -> Result<f64> {
    sigma_min(&op.to_tridiagonal(), tol, max_iter)
}

/// `sigma_min` of a general complex tridiagonal matrix. `max_iter` bounds the
/// total number of applications of `(A^H A)^{-1}`.
pub fn sigma_min(a: &Tridiagonal, tol: f64, max_iter: usize) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParams("tol must be positive".into()));
    }
    let n = a.n();
    if n == 1 {
        return Ok(a.diag[0].norm());
    }
    let lu = match a.factor() {
        Ok(lu) => lu,
        Err(Error::SingularMatrix) => return Ok(0.0),
        Err(e) => return Err(e),
    };
    let mut r = rng::seeded(0x5151_ab1e ^ n as u64);
    let mut q = rng::complex_gaussian(&mut r, n);
    normalize(&mut q);
    lanczos_inverse(&lu, q, tol, max_iter)
}

/// Dense SVD, for small matrices or as a fallback.
pub fn sigma_min_dense(a: &Tridiagonal) -> f64 {
    let sv = a.to_dense().singular_values();
    sv.iter().cloned().fold(f64::INFINITY, f64::min)
}

/// Iterative `sigma_min`, falling back to dense SVD on non-convergence when
/// the matrix is small enough.
pub fn sigma_min_robust(a: &Tridiagonal, tol: f64, max_iter: usize) -> Result<f64> {
    match sigma_min(a, tol, max_iter) {
        Err(Error::NoConvergence { .. }) if a.n() <= DENSE_FALLBACK_MAX => Ok(sigma_min_dense(a)),
        other => other,
    }
}

fn dot(a: &[C64], b: &[C64]) -> C64 {
    // a^H b
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm2(a: &[C64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn normalize(a: &mut [C64]) -> f64 {
    let s = norm2(a);
    if s > 0.0 {
        for z in a.iter_mut() {
            *z /= s;
        }
    }
    s
}

fn largest_ritz(alphas: &[f64], betas: &[f64]) -> (f64, Vec<f64>) {
    let k = alphas.len();
    let mut t = DMatrix::<f64>::zeros(k, k);
    for i in 0..k {
        t[(i, i)] = alphas[i];
        if i + 1 < k {
            t[(i, i + 1)] = betas[i];
            t[(i + 1, i)] = betas[i];
        }
    }
    let eig = SymmetricEigen::new(t);
    let (idx, &theta) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("nonempty");
    (theta, eig.eigenvectors.column(idx).iter().cloned().collect())
}

fn lanczos_inverse(lu: &TridiagLu, mut start: Vec<C64>, tol: f64, max_iter: usize) -> Result<f64> {
    let n = lu.n();
    let kmax = KRYLOV_DIM.min(n);
    let mut applies = 0usize;
    let mut theta_prev = 0.0f64;
    let mut flat_steps = 0usize;
    let mut best = 0.0f64;
    loop {
        let mut basis: Vec<Vec<C64>> = vec![start.clone()];
        let mut alphas = Vec::with_capacity(kmax);
        let mut betas: Vec<f64> = Vec::with_capacity(kmax);
        let mut ritz = (0.0, vec![1.0]);
        for j in 0..kmax {
            let mut w = basis[j].clone();
            lu.solve_adjoint_in_place(&mut w);
            lu.solve_in_place(&mut w);
            applies += 1;
            if w.iter().any(|z| !z.is_finite()) {
                return Ok(0.0);
            }
            let alpha = dot(&basis[j], &w).re;
            for (wi, qi) in w.iter_mut().zip(&basis[j]) {
                *wi -= qi * alpha;
            }
            if j > 0 {
                let b = betas[j - 1];
                for (wi, qi) in w.iter_mut().zip(&basis[j - 1]) {
                    *wi -= qi * b;
                }
            }
            for _ in 0..2 {
                for q in &basis {
                    let c = dot(q, &w);
                    for (wi, qi) in w.iter_mut().zip(q) {
                        *wi -= qi * c;
                    }
                }
            }
            alphas.push(alpha);
            let beta = norm2(&w);
            ritz = largest_ritz(&alphas, &betas);
            let theta = ritz.0;
            best = best.max(theta);
            let resid = beta * ritz.1.last().unwrap().abs();
            let invariant = beta <= 1e-14 * theta.abs().max(f64::MIN_POSITIVE);
            // clustered top eigenvalues: the Ritz value settles long before the residual
            if (theta - theta_prev).abs() <= tol * theta {
                flat_steps += 1;
            } else {
                flat_steps = 0;
            }
            let settled = flat_steps >= 3;
            if theta > 0.0 && (resid <= tol * theta || invariant || settled) {
                return finish(theta);
            }
            theta_prev = theta;
            if applies >= max_iter {
                return Err(Error::NoConvergence { iterations: applies, best: finish(best)? });
            }
            if j + 1 < kmax {
                betas.push(beta);
                basis.push(w.into_iter().map(|z| z / beta).collect());
            }
        }
        // restart from the current Ritz vector
        let mut x = vec![C64::new(0.0, 0.0); n];
        for (q, &s) in basis.iter().zip(&ritz.1) {
            for (xi, qi) in x.iter_mut().zip(q) {
                *xi += qi * s;
            }
        }
        normalize(&mut x);
        start = x;
    }
}

fn finish(theta: f64) -> Result<f64> {
    if !(theta > 0.0) || !theta.is_finite() {
        return Ok(0.0);
    }
    let s = 1.0 / theta.sqrt();
    Ok(if s < SINGULAR_FLOOR { 0.0 } else { s })
}

/// Solver and search knobs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PsiSearch {
    pub coarse_points: usize,
    /// Golden-section stops when the bracket is this fraction of the coarse spacing.
    pub refine_tol: f64,
    /// `sigma_min` tolerance for refinement and reported values.
    pub svd_tol: f64,
    /// Looser tolerance for the coarse scan, which only has to locate minima.
    /// Ritz values approach from below, so a loose scan can only overestimate.
    pub scan_tol: f64,
    pub max_iter: usize,
    /// Compare against the operator on the refined grid.
    pub check_grid: bool,
    /// Compare against the search on a truncation twice as long.
    pub check_truncation: bool,
    #[serde(skip)]
    pub exec: Exec,
}

impl Default for PsiSearch {
    fn default() -> Self {
        Self {
            coarse_points: 512,
            refine_tol: 1e-4,
            svd_tol: 1e-10,
            scan_tol: 1e-6,
            max_iter: 4000,
            check_grid: true,
            check_truncation: false,
            exec: Exec::Auto,
        }
    }
}

/// Relative change below which a doubled grid or truncation counts as converged.
pub const CONVERGENCE_REL: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncationCheck {
    pub psi_doubled: f64,
    pub doubled_hi: f64,
    pub doubled_lo: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsiEstimate {
    pub psi: f64,
    pub lambda_star: f64,
    /// Coarse scan `(lambda, sigma_min)`; failed points are omitted.
    pub scan: Vec<(f64, f64)>,
    pub refined: bool,
    pub grid_converged: bool,
    pub psi_refined_grid: Option<f64>,
    pub truncation: Option<TruncationCheck>,
    /// `psi` is numerically zero (kernel on the imaginary axis).
    pub zero_on_axis: bool,
    /// A refinement or scan point failed to converge; `psi` is best-so-far.
    pub stalled: bool,
    pub nu: f64,
    pub k: f64,
    pub grid: Grid1D,
}

impl PsiEstimate {
    /// Grid and (when checked) truncation doubling both converged.
    pub fn converged(&self) -> bool {
        self.grid_converged && self.truncation.as_ref().is_none_or(|t| t.converged)
    }
}

/// One point of a resolvent scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolventPoint {
    pub lambda: f64,
    pub sigma_min: Option<f64>,
    pub error: Option<String>,
}

fn sigma_at(op: &TridiagonalOperator, lambda: f64, search: &PsiSearch) -> Result<f64> {
    sigma_min_robust(&op.shifted(lambda).to_tridiagonal(), search.svd_tol, search.max_iter)
}

/// `sigma_min(H - i k lambda)` for each `lambda` on a fixed operator.
pub fn resolvent_scan(op: &TridiagonalOperator, lambda_grid: &[f64], search: &PsiSearch) -> Vec<ResolventPoint> {
    par::map(search.exec, lambda_grid, |&lambda| match sigma_at(op, lambda, search) {
        Ok(s) => ResolventPoint { lambda, sigma_min: Some(s), error: None },
        Err(e) => ResolventPoint { lambda, sigma_min: None, error: Some(e.to_string()) },
    })
}

/// Scan for a profile on its truncated grid.
pub fn resolvent_profile(
    p: &ShearProfile,
    nu: f64,
    k: f64,
    lambda_grid: &[f64],
    policy: &TruncationPolicy,
    search: &PsiSearch,
) -> Result<Vec<ResolventPoint>> {
    if lambda_grid.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidParams("lambda grid must be sorted".into()));
    }
    let grid = truncate_domain(p, nu, k, policy)?;
    let op = assemble(p, &grid, nu, k, 0.0)?;
    Ok(resolvent_scan(&op, lambda_grid, search))
}

const GOLDEN: f64 = 0.618_033_988_749_894_9;

/// Golden-section minimisation of `sigma_min` over `[a, b]`.
fn golden(op: &TridiagonalOperator, mut a: f64, mut b: f64, width: f64, search: &PsiSearch) -> Result<(f64, f64)> {
    let f = |x: f64| sigma_at(op, x, search);
    let mut c = b - GOLDEN * (b - a);
    let mut d = a + GOLDEN * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    for _ in 0..200 {
        if (b - a).abs() <= width {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - GOLDEN * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + GOLDEN * (b - a);
            fd = f(d)?;
        }
    }
    Ok(if fc < fd { (c, fc) } else { (d, fd) })
}

/// Indices of coarse local minima worth refining: strict (beyond relative
/// noise `1e-9`) and within a factor two of the coarse global minimum.
fn local_minima(vals: &[f64]) -> Vec<usize> {
    let n = vals.len();
    let gmin = vals.iter().cloned().fold(f64::INFINITY, f64::min);
    let below = |a: f64, b: f64| a < b * (1.0 - 1e-9);
    let mut out: Vec<usize> = (0..n)
        .filter(|&i| {
            let left = i == 0 || below(vals[i], vals[i - 1]) || vals[i] == gmin;
            let right = i + 1 == n || below(vals[i], vals[i + 1]) || vals[i] == gmin;
            left && right && vals[i] <= 2.0 * gmin
        })
        .collect();
    out.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
    out.truncate(16);
    out.sort_unstable();
    out
}

/// Search over `lambda` on an assembled operator (any `lambda` stored in `op`
/// is ignored). `margin` widens the bracket around the sampled range of `v`.
pub fn psi_on_operator(op: &TridiagonalOperator, margin: f64, search: &PsiSearch) -> Result<(f64, f64, Vec<(f64, f64)>, bool, bool)> {
    let base = op.shifted(0.0);
    if op.k == 0.0 {
        let s = sigma_at(&base, 0.0, search)?;
        return Ok((s, 0.0, vec![(0.0, s)], false, false));
    }
    let vmin = base.potential.iter().cloned().fold(f64::INFINITY, f64::min);
    let vmax = base.potential.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let np = search.coarse_points.max(3);
    let lambdas = crate::profiles::uniform_points(vmin - margin, vmax + margin, np);
    let spacing = lambdas[1] - lambdas[0];
    let coarse = PsiSearch { svd_tol: search.scan_tol.max(search.svd_tol), ..*search };
    let pts = resolvent_scan(&base, &lambdas, &coarse);
    let mut stalled = pts.iter().any(|p| p.sigma_min.is_none());
    let scan: Vec<(f64, f64)> = pts.iter().filter_map(|p| p.sigma_min.map(|s| (p.lambda, s))).collect();
    if scan.is_empty() {
        return Err(Error::NoConvergence { iterations: search.max_iter, best: f64::NAN });
    }
    let vals: Vec<f64> = scan.iter().map(|p| p.1).collect();
    let mut best = scan
        .iter()
        .cloned()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("nonempty scan");
    let mins = local_minima(&vals);
    if let Ok(s) = sigma_at(&base, best.0, search) {
        best.1 = s;
    }
    let refinements = par::map(search.exec, &mins, |&i| {
        let a = if i == 0 { scan[0].0 - spacing } else { scan[i - 1].0 };
        let b = if i + 1 == scan.len() { scan[i].0 + spacing } else { scan[i + 1].0 };
        golden(&base, a, b, search.refine_tol * spacing, search)
    });
    let mut refined = false;
    for r in refinements {
        match r {
            Ok((l, s)) => {
                refined = true;
                if s < best.1 {
                    best = (l, s);
                }
            }
            Err(_) => stalled = true,
        }
    }
    Ok((best.1, best.0, scan, refined, stalled))
}

/// Pseudospectral abscissa of the truncated operator for `(nu, k)`.
pub fn pseudospectral_abscissa(
    p: &ShearProfile,
    nu: f64,
    k: f64,
    policy: &TruncationPolicy,
    search: &PsiSearch,
) -> Result<PsiEstimate> {
    let grid = truncate_domain(p, nu, k, policy)?;
    let op = assemble(p, &grid, nu, k, 0.0)?;
    let margin = if k == 0.0 { 0.0 } else { 2.0 * rate_target(nu, k, p.m())? / k.abs() };
    let (psi, lambda_star, scan, refined, stalled) = psi_on_operator(&op, margin, search)?;
    let scale = op.diag.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let zero_on_axis = psi <= 1e-10 * scale.max(1.0);

    let mut psi_refined_grid = None;
    let mut grid_converged = true;
    if search.check_grid && !zero_on_axis {
        let fine = assemble(p, &grid.refined(), nu, k, 0.0)?;
        let spacing = scan.get(1).map_or(margin.max(1e-3), |s| s.0 - scan[0].0);
        let (_, s2) = golden(&fine, lambda_star - spacing, lambda_star + spacing, search.refine_tol * spacing, search)?;
        let s2 = s2.min(sigma_at(&fine, lambda_star, search)?);
        grid_converged = (s2 - psi).abs() <= CONVERGENCE_REL * psi;
        psi_refined_grid = Some(s2);
    }

    let mut truncation = None;
    if search.check_truncation && !p.domain().is_bounded() && !zero_on_axis {
        let doubled = policy.doubled(p);
        let inner = PsiSearch { check_grid: false, check_truncation: false, ..*search };
        let g2 = truncate_domain(p, nu, k, &doubled)?;
        let op2 = assemble(p, &g2, nu, k, 0.0)?;
        let (psi2, ..) = psi_on_operator(&op2, margin, &inner)?;
        truncation = Some(TruncationCheck {
            psi_doubled: psi2,
            doubled_lo: g2.lo,
            doubled_hi: g2.hi,
            converged: (psi2 - psi).abs() <= CONVERGENCE_REL * psi,
        });
    }

    Ok(PsiEstimate {
        psi,
        lambda_star,
        scan,
        refined,
        grid_converged,
        psi_refined_grid,
        truncation,
        zero_on_axis,
        stalled,
        nu,
        k,
        grid,
    })
}

/// Both sides of the inequalities that drive the resolvent lower bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub ineq_imaginary: bool,
    pub ineq_outside: bool,
    pub ineq_inside: bool,
    pub ineq_full: bool,
    /// `(lhs, rhs)` per inequality, in the order imaginary, outside, inside, full.
    pub sides: [(f64, f64); 4],
    /// `(rhs - lhs) / rhs` per inequality.
    pub slack: [f64; 4],
    /// Discrete measure `h * #{nodes in the neighbourhood}`.
    pub measure_ecal: f64,
}

/// Relative tolerance on the certificate inequalities.
pub const CERTIFICATE_TOL: f64 = 1e-8;

/// Evaluate the chain
///
/// ```text
/// |k| <chi (v - lambda) g, g>   <= ||Hg|| ||g|| + (nu/delta) ||g'|| ||g||
/// int_{outside} |g|^2           <= ||Hg|| ||g|| / (|k| delta^m) + nu^{1/2} ||Hg||^{1/2} ||g||^{3/2} / (|k| delta^{m+1})
/// int_{inside} |g|^2            <= 2 nu^{-1/2} m(Ecal) ||Hg||^{1/2} ||g||^{3/2}
/// ||g||^2                       <= sum of the two right-hand sides above
/// ```
///
/// on the grid of `op`, with `chi` and the neighbourhood of the thickened
/// level set taken from [`Cutoff`].
pub fn resolvent_certificate(
    op: &TridiagonalOperator,
    p: &ShearProfile,
    delta: f64,
    m: usize,
    g: &[C64],
) -> Result<CertificateReport> {
    let h = op.grid.h;
    let ng = norm_h(g, h);
    if ng == 0.0 {
        return Err(Error::ZeroVector);
    }
    let hg = op.apply(g)?;
    let nh = norm_h(&hg, h);
    let ngrad = grad_norm_h(g, h);
    let (nu, k, lambda) = (op.nu, op.k.abs(), op.lambda);
    let cut = Cutoff::new(p, lambda, delta, m, op.grid.span())?;
    let nodes = op.grid.nodes();

    let mut chi_term = 0.0;
    let mut outside = 0.0;
    let mut inside = 0.0;
    let mut count_inside = 0usize;
    for ((&y, z), v) in nodes.iter().zip(g).zip(&op.potential) {
        let w = z.norm_sqr();
        chi_term += cut.eval(y) * (v - lambda) * w;
        if cut.in_neighborhood(y) {
            inside += w;
            count_inside += 1;
        } else {
            outside += w;
        }
    }
    let chi_term = k * h * chi_term;
    let outside = h * outside;
    let inside = h * inside;
    let m_ecal = h * count_inside as f64;
    let dm = delta.powi(m as i32);

    let rhs_imag = nh * ng + nu / delta * ngrad * ng;
    let rhs_out = nh * ng / (k * dm) + nu.sqrt() / (k * dm * delta) * nh.sqrt() * ng.powf(1.5);
    let rhs_in = 2.0 / nu.sqrt() * m_ecal * nh.sqrt() * ng.powf(1.5);
    let sides = [(chi_term, rhs_imag), (outside, rhs_out), (inside, rhs_in), (ng * ng, rhs_out + rhs_in)];
    let holds = |(l, r): (f64, f64)| l <= r * (1.0 + CERTIFICATE_TOL);
    let slack = sides.map(|(l, r)| if r > 0.0 { (r - l) / r } else if l <= 0.0 { 0.0 } else { -1.0 });
    Ok(CertificateReport {
        ineq_imaginary: holds(sides[0]),
        ineq_outside: holds(sides[1]),
        ineq_inside: holds(sides[2]),
        ineq_full: holds(sides[3]),
        sides,
        slack,
        measure_ecal: m_ecal,
    })
}
