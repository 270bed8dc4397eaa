//! Separable profiles `v(y1, y2) = v1(y1) + v2(y2)`: the 2D operator is the
//! Kronecker sum `H1 (x) I + I (x) H2`, so `e^{-tH} = e^{-tH1} (x) e^{-tH2}` and
//! operator norms multiply. The direct check evolves the 2D operator with
//! Crank–Nicolson, solving each implicit step by GMRES preconditioned with the
//! ADI factor `(I + a H1) (x) (I + a H2)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::{assemble, norm_h, truncate_domain, Grid1D, TruncationPolicy};
use crate::par::{self, Exec};
use crate::profiles::{check_infinity_nondegeneracy, check_nondegeneracy, sample_window, uniform_points, ShearProfile, DEFAULT_PROBE_RADII};
use crate::semigroup::CnPropagator;
use crate::sweep::rate_target;
use crate::tridiag::{Tridiagonal, TridiagLu, C64};

/// Largest grid per axis for the direct 2D evolution.
pub const TENSOR_GRID_CAP: usize = 200;

/// Allowed relative mismatch between the 2D norm and the product of 1D norms.
pub const PRODUCT_TOL: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TensorConfig {
    /// Grid points per axis.
    pub n: usize,
    pub checkpoints: usize,
    /// Horizon in units of `1 / sum_rate`.
    pub horizon: f64,
    pub power_steps: usize,
    pub power_tol: f64,
    pub gmres_tol: f64,
    pub policy: TruncationPolicy,
    #[serde(skip)]
    pub exec: Exec,
}

impl Default for TensorConfig {
    fn default() -> Self {
        Self {
            n: 160,
            checkpoints: 10,
            horizon: 4.0,
            power_steps: 20,
            power_tol: 1e-4,
            gmres_tol: 1e-10,
            policy: TruncationPolicy::default(),
            exec: Exec::Auto,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductCheck {
    pub times: Vec<f64>,
    pub norm_2d: Vec<f64>,
    pub product_1d: Vec<f64>,
    pub factor_norms: Vec<Vec<f64>>,
    /// Largest `|norm_2d - product_1d| / product_1d` over the checkpoints.
    pub rel_err: f64,
    pub dt: f64,
    pub max_gmres_iterations: usize,
}

impl ProductCheck {
    pub fn passes(&self) -> bool {
        self.rel_err <= PRODUCT_TOL
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorReport {
    pub factor_targets: Vec<f64>,
    pub sum_rate: f64,
    /// Present for two factors.
    pub product_check: Option<ProductCheck>,
}

/// Local and at-infinity non-degeneracy of one factor.
pub fn check_factor(p: &ShearProfile) -> Result<()> {
    let (lo, hi) = sample_window(p.domain(), 20.0);
    let local = check_nondegeneracy(p, &uniform_points(lo, hi, 2001))?;
    if !local.pass {
        return Err(Error::FactorCheckFailed {
            profile: p.name().to_string(),
            reason: format!("order-{} non-degeneracy fails near y = {}", local.order, local.witness_y),
        });
    }
    let inf = check_infinity_nondegeneracy(p, &DEFAULT_PROBE_RADII)?;
    if !inf.pass {
        return Err(Error::FactorCheckFailed {
            profile: p.name().to_string(),
            reason: "infinity non-degeneracy failed".into(),
        });
    }
    Ok(())
}

/// Sum of per-factor rate targets, plus the direct 2D product check when
/// there are exactly two factors.
pub fn tensor_rate(factors: &[ShearProfile], nu: f64, k: f64, cfg: &TensorConfig) -> Result<TensorReport> {
    if factors.is_empty() {
        return Err(Error::InvalidParams("at least one factor is required".into()));
    }
    for f in factors {
        check_factor(f)?;
    }
    let factor_targets = factors.iter().map(|f| rate_target(nu, k, f.m())).collect::<Result<Vec<_>>>()?;
    let sum_rate = factor_targets.iter().sum();
    let product_check = if factors.len() == 2 {
        Some(product_check(&factors[0], &factors[1], nu, k, sum_rate, cfg)?)
    } else {
        None
    };
    Ok(TensorReport { factor_targets, sum_rate, product_check })
}

fn factor_grid(p: &ShearProfile, nu: f64, k: f64, cfg: &TensorConfig) -> Result<Grid1D> {
    let g = truncate_domain(p, nu, k, &cfg.policy)?;
    Grid1D::new(g.lo, g.hi, cfg.n)
}

fn centre(v: &[f64]) -> (f64, f64) {
    let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    (0.5 * (lo + hi), 0.5 * (hi - lo))
}

fn product_check(
    p1: &ShearProfile,
    p2: &ShearProfile,
    nu: f64,
    k: f64,
    sum_rate: f64,
    cfg: &TensorConfig,
) -> Result<ProductCheck> {
    if cfg.n > TENSOR_GRID_CAP {
        return Err(Error::GridTooLarge { n1: cfg.n, n2: cfg.n, cap: TENSOR_GRID_CAP });
    }
    let g1 = factor_grid(p1, nu, k, cfg)?;
    let g2 = factor_grid(p2, nu, k, cfg)?;
    let raw1 = assemble(p1, &g1, nu, k, 0.0)?;
    let raw2 = assemble(p2, &g2, nu, k, 0.0)?;
    let (c1, s1) = centre(&raw1.potential);
    let (c2, s2) = centre(&raw2.potential);
    let op1 = raw1.shifted(c1);
    let op2 = raw2.shifted(c2);

    let t_end = cfg.horizon / sum_rate;
    let mut dt = 0.05 / sum_rate;
    if s1 + s2 > 0.0 {
        dt = dt.min(0.15 / (k.abs() * (s1 + s2)));
    }
    let ncp = cfg.checkpoints.max(1);
    let stride = ((t_end / dt).ceil() as usize).div_ceil(ncp).max(1);
    let dt = t_end / (stride * ncp) as f64;
    let times: Vec<f64> = (1..=ncp).map(|j| (j * stride) as f64 * dt).collect();

    let prop1 = CnPropagator::new(&op1, dt)?;
    let prop2 = CnPropagator::new(&op2, dt)?;
    let (n1_norms, x1) = power_series_1d(&prop1, g1.h, ncp, stride, cfg);
    let (n2_norms, x2) = power_series_1d(&prop2, g2.h, ncp, stride, cfg);

    let fwd = Cn2d::new(op1.to_tridiagonal(), op2.to_tridiagonal(), dt, cfg)?;
    let adj = Cn2d::new(op1.to_tridiagonal().adjoint(), op2.to_tridiagonal().adjoint(), dt, cfg)?;
    let h2 = g1.h * g2.h;
    let norm2 = |x: &[C64]| (h2 * x.iter().map(|z| z.norm_sqr()).sum::<f64>()).sqrt();

    let mut norm_2d = Vec::with_capacity(ncp);
    let mut max_iters = 0usize;
    for j in 0..ncp {
        let s = (j + 1) * stride;
        let mut y: Vec<C64> = x1[j].iter().flat_map(|a| x2[j].iter().map(move |b| a * b)).collect();
        let ny = norm2(&y);
        scale_to_unit(&mut y, ny);
        max_iters = max_iters.max(fwd.run(&mut y, s)?);
        let mut est = norm2(&y);
        for _ in 0..cfg.power_steps {
            max_iters = max_iters.max(adj.run(&mut y, s)?);
            let ny = norm2(&y);
            if ny == 0.0 {
                break;
            }
            scale_to_unit(&mut y, ny);
            max_iters = max_iters.max(fwd.run(&mut y, s)?);
            let next = norm2(&y);
            let gain = next - est;
            est = est.max(next);
            if gain <= cfg.power_tol * est {
                break;
            }
        }
        norm_2d.push(est);
    }
    let product_1d: Vec<f64> = n1_norms.iter().zip(&n2_norms).map(|(a, b)| a * b).collect();
    let rel_err = norm_2d.iter().zip(&product_1d).map(|(a, b)| (a - b).abs() / b).fold(0.0, f64::max);
    Ok(ProductCheck {
        times,
        norm_2d,
        product_1d,
        factor_norms: vec![n1_norms, n2_norms],
        rel_err,
        dt,
        max_gmres_iterations: max_iters,
    })
}

fn scale_to_unit(x: &mut [C64], s: f64) {
    if s > 0.0 {
        for z in x.iter_mut() {
            *z /= s;
        }
    }
}

/// Power-iteration estimates of `||P^{s_j}||` at `s_j = j * stride` with the
/// corresponding top right singular vectors.
fn power_series_1d(prop: &CnPropagator, h: f64, ncp: usize, stride: usize, cfg: &TensorConfig) -> (Vec<f64>, Vec<Vec<C64>>) {
    let n = prop.n();
    let mut x = vec![C64::new(1.0, 0.0); n];
    // break symmetry of the constant start
    for (i, z) in x.iter_mut().enumerate() {
        *z += C64::new(0.0, 1e-3 * (i as f64 / n as f64));
    }
    let nx = norm_h(&x, h);
    scale_to_unit(&mut x, nx);
    let mut norms = Vec::with_capacity(ncp);
    let mut vecs = Vec::with_capacity(ncp);
    for j in 1..=ncp {
        let s = j * stride;
        let mut y = x.clone();
        prop.forward(&mut y, s);
        let mut est = norm_h(&y, h);
        for _ in 0..cfg.power_steps.max(50) {
            prop.backward_adjoint(&mut y, s);
            let ny = norm_h(&y, h);
            if ny == 0.0 {
                break;
            }
            scale_to_unit(&mut y, ny);
            let cand = y.clone();
            prop.forward(&mut y, s);
            let next = norm_h(&y, h);
            let gain = next - est;
            if next >= est {
                x = cand;
                est = next;
            }
            if gain <= 1e-10 * est {
                break;
            }
        }
        norms.push(est);
        vecs.push(x.clone());
    }
    (norms, vecs)
}

/// Implicit CN step for the Kronecker sum on an `n1 x n2` row-major grid.
struct Cn2d {
    a: f64,
    h1: Tridiagonal,
    h2: Tridiagonal,
    pre1: TridiagLu,
    pre2: TridiagLu,
    tol: f64,
    exec: Exec,
}

impl Cn2d {
    fn new(h1: Tridiagonal, h2: Tridiagonal, dt: f64, cfg: &TensorConfig) -> Result<Self> {
        let a = 0.5 * dt;
        let one = C64::new(1.0, 0.0);
        let pre1 = h1.affine(one, C64::new(a, 0.0)).factor()?;
        let pre2 = h2.affine(one, C64::new(a, 0.0)).factor()?;
        Ok(Self { a, h1, h2, pre1, pre2, tol: cfg.gmres_tol, exec: cfg.exec })
    }

    fn n2(&self) -> usize {
        self.h2.n()
    }

    /// `y = x + s H x`.
    fn apply(&self, s: f64, x: &[C64], y: &mut [C64]) {
        let (n1, n2) = (self.h1.n(), self.n2());
        let h1 = &self.h1;
        let h2 = &self.h2;
        par::for_rows_mut(self.exec, y, n2, |i, row| {
            let xr = &x[i * n2..(i + 1) * n2];
            h2.apply_into(xr, row).expect("row length");
            let d = h1.diag[i];
            for (r, xv) in row.iter_mut().zip(xr) {
                *r += d * xv;
            }
            if i > 0 {
                let l = h1.lower[i - 1];
                for (r, xv) in row.iter_mut().zip(&x[(i - 1) * n2..i * n2]) {
                    *r += l * xv;
                }
            }
            if i + 1 < n1 {
                let u = h1.upper[i];
                for (r, xv) in row.iter_mut().zip(&x[(i + 1) * n2..(i + 2) * n2]) {
                    *r += u * xv;
                }
            }
            for (r, xv) in row.iter_mut().zip(xr) {
                *r = xv + *r * s;
            }
        });
    }

    fn precondition(&self, x: &mut [C64]) {
        let n2 = self.n2();
        let pre2 = &self.pre2;
        par::for_rows_mut(self.exec, x, n2, |_, row| pre2.solve_in_place(row));
        self.pre1.solve_rows_in_place(x, n2);
    }

    /// Advance `x` by `steps` CN steps; returns the largest GMRES iteration count.
    fn run(&self, x: &mut Vec<C64>, steps: usize) -> Result<usize> {
        let mut rhs = vec![C64::new(0.0, 0.0); x.len()];
        let mut worst = 0;
        for _ in 0..steps {
            self.apply(-self.a, x, &mut rhs);
            // initial guess: preconditioner applied to the right-hand side
            let mut guess = rhs.clone();
            self.precondition(&mut guess);
            let (sol, it) = gmres(
                |v, out| self.apply(self.a, v, out),
                |v| self.precondition(v),
                &rhs,
                guess,
                self.tol,
                30,
                20,
            )?;
            worst = worst.max(it);
            *x = sol;
        }
        Ok(worst)
    }
}

fn cdot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn cnorm(a: &[C64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Restarted right-preconditioned GMRES. Returns the solution and the total
/// number of inner iterations.
pub fn gmres<A, P>(
    apply: A,
    precondition: P,
    b: &[C64],
    x0: Vec<C64>,
    tol: f64,
    restart: usize,
    max_cycles: usize,
) -> Result<(Vec<C64>, usize)>
where
    A: Fn(&[C64], &mut [C64]),
    P: Fn(&mut [C64]),
{
    let n = b.len();
    let zero = C64::new(0.0, 0.0);
    let bnorm = cnorm(b);
    if bnorm == 0.0 {
        return Ok((vec![zero; n], 0));
    }
    let mut x = x0;
    let mut work = vec![zero; n];
    let mut total = 0;
    let mut last = f64::INFINITY;
    for _ in 0..max_cycles {
        apply(&x, &mut work);
        let r: Vec<C64> = b.iter().zip(&work).map(|(bi, wi)| bi - wi).collect();
        let beta = cnorm(&r);
        last = beta / bnorm;
        if beta <= tol * bnorm {
            return Ok((x, total));
        }
        let mut v: Vec<Vec<C64>> = vec![r.into_iter().map(|z| z / beta).collect()];
        let mut hcols: Vec<Vec<C64>> = Vec::with_capacity(restart);
        let mut cs: Vec<f64> = Vec::with_capacity(restart);
        let mut sn: Vec<C64> = Vec::with_capacity(restart);
        let mut g = vec![C64::new(beta, 0.0)];
        for j in 0..restart {
            let mut z = v[j].clone();
            precondition(&mut z);
            let mut w = vec![zero; n];
            apply(&z, &mut w);
            total += 1;
            let mut col = vec![zero; j + 2];
            for (i, vi) in v.iter().enumerate() {
                let hij = cdot(vi, &w);
                col[i] = hij;
                for (wk, vk) in w.iter_mut().zip(vi) {
                    *wk -= hij * vk;
                }
            }
            let hnext = cnorm(&w);
            col[j + 1] = C64::new(hnext, 0.0);
            for i in 0..j {
                let t = cs[i] * col[i] + sn[i] * col[i + 1];
                col[i + 1] = -sn[i].conj() * col[i] + cs[i] * col[i + 1];
                col[i] = t;
            }
            let (a, bb) = (col[j], col[j + 1]);
            let r = (a.norm_sqr() + bb.norm_sqr()).sqrt();
            let (c, s) = if a.norm() == 0.0 { (0.0, C64::new(1.0, 0.0)) } else { (a.norm() / r, (a / a.norm()) * bb.conj() / r) };
            col[j] = c * a + s * bb;
            col[j + 1] = zero;
            cs.push(c);
            sn.push(s);
            let gj = g[j];
            g.push(-s.conj() * gj);
            g[j] = c * gj;
            hcols.push(col);
            let done = g[j + 1].norm() <= tol * bnorm;
            if done || hnext == 0.0 || j + 1 == restart {
                break;
            }
            v.push(w.into_iter().map(|z| z / hnext).collect());
        }
        // back substitution on the rotated Hessenberg matrix
        let m = hcols.len();
        let mut y = vec![zero; m];
        for i in (0..m).rev() {
            let mut acc = g[i];
            for (jj, yj) in y.iter().enumerate().skip(i + 1) {
                acc -= hcols[jj][i] * yj;
            }
            y[i] = acc / hcols[i][i];
        }
        let mut u = vec![zero; n];
        for (vi, yi) in v.iter().zip(&y) {
            for (uk, vk) in u.iter_mut().zip(vi) {
                *uk += yi * vk;
            }
        }
        precondition(&mut u);
        for (xk, uk) in x.iter_mut().zip(&u) {
            *xk += uk;
        }
    }
    Err(Error::NoConvergence { iterations: total, best: last })
}
