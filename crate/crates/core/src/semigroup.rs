//! Crank–Nicolson evolution of `g_t + H g = 0` and estimates of `||e^{-tH}||`.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::{assemble, norm_h, truncate_domain, Grid1D, TridiagonalOperator, TruncationPolicy};
use crate::par::{self, Exec};
use crate::profiles::ShearProfile;
use crate::resolvent::PsiEstimate;
use crate::rng;
use crate::sweep::rate_target;
use crate::tridiag::{Tridiagonal, TridiagLu, C64};

/// One CN step `P = (I + dt/2 H)^{-1} (I - dt/2 H)` and its adjoint.
#[derive(Debug, Clone)]
pub struct CnPropagator {
    plus: TridiagLu,
    minus: Tridiagonal,
    minus_adj: Tridiagonal,
    pub dt: f64,
}

impl CnPropagator {
    pub fn new(op: &TridiagonalOperator, dt: f64) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidParams(format!("dt must be positive, got {dt}")));
        }
        let a = op.to_tridiagonal();
        let one = C64::new(1.0, 0.0);
        let half = C64::new(0.5 * dt, 0.0);
        let plus = a.affine(one, half).factor()?;
        let minus = a.affine(one, -half);
        let minus_adj = minus.adjoint();
        Ok(Self { plus, minus, minus_adj, dt })
    }

    pub fn n(&self) -> usize {
        self.minus.n()
    }

    pub fn step(&self, g: &mut Vec<C64>, scratch: &mut Vec<C64>) {
        scratch.resize(g.len(), C64::new(0.0, 0.0));
        self.minus.apply_into(g, scratch).expect("length checked by caller");
        self.plus.solve_in_place(scratch);
        std::mem::swap(g, scratch);
    }

    pub fn step_adjoint(&self, g: &mut Vec<C64>, scratch: &mut Vec<C64>) {
        scratch.resize(g.len(), C64::new(0.0, 0.0));
        self.plus.solve_adjoint_in_place(g);
        self.minus_adj.apply_into(g, scratch).expect("length checked by caller");
        std::mem::swap(g, scratch);
    }

    pub fn forward(&self, g: &mut Vec<C64>, steps: usize) {
        let mut s = Vec::with_capacity(g.len());
        for _ in 0..steps {
            self.step(g, &mut s);
        }
    }

    pub fn backward_adjoint(&self, g: &mut Vec<C64>, steps: usize) {
        let mut s = Vec::with_capacity(g.len());
        for _ in 0..steps {
            self.step_adjoint(g, &mut s);
        }
    }
}

/// Evolve `g0` to time `t_end` with step `dt`, returning `(t, ||g(t)||_h)` after
/// every step (and at `t = 0`). The last step is shortened to land on `t_end`.
pub fn evolve_cn(op: &TridiagonalOperator, g0: &[C64], dt: f64, t_end: f64) -> Result<Vec<(f64, f64)>> {
    if g0.len() != op.n {
        return Err(Error::LengthMismatch { expected: op.n, got: g0.len() });
    }
    if !(t_end >= dt) {
        return Err(Error::InvalidParams(format!("T={t_end} must be at least dt={dt}")));
    }
    let steps = (t_end / dt).ceil() as usize;
    let dt = t_end / steps as f64;
    let prop = CnPropagator::new(op, dt)?;
    let h = op.grid.h;
    let mut g = g0.to_vec();
    let mut s = Vec::with_capacity(g.len());
    let mut out = Vec::with_capacity(steps + 1);
    out.push((0.0, norm_h(&g, h)));
    for i in 1..=steps {
        prop.step(&mut g, &mut s);
        out.push((i as f64 * dt, norm_h(&g, h)));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayMethod {
    Ensemble,
    AdjointPowerIteration,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DecayConfig {
    pub ensemble_size: usize,
    pub power_steps: usize,
    /// Relative change at which power iteration stops early.
    pub power_tol: f64,
    pub checkpoints: usize,
    pub seed: u64,
    #[serde(skip)]
    pub exec: Exec,
}

impl Default for DecayConfig {
    fn default() -> Self {
        Self { ensemble_size: 8, power_steps: 20, power_tol: 1e-6, checkpoints: 32, seed: 0, exec: Exec::Auto }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecaySeries {
    pub times: Vec<f64>,
    /// Power-iteration estimates of `||e^{-tH}||`.
    pub norm_bounds: Vec<f64>,
    /// Max over the random ensemble of `||g(t)|| / ||g0||`.
    pub ensemble_bounds: Vec<f64>,
    pub method: DecayMethod,
    pub fitted_rate: f64,
    pub fit_window: (f64, f64),
    pub residual: f64,
    pub dt: f64,
    pub nu: f64,
    pub k: f64,
    pub grid: Grid1D,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub rate: f64,
    pub intercept: f64,
    /// RMS residual of the log fit.
    pub residual: f64,
    pub points: usize,
}

/// Step size: `0.05 / lambda_target`, further capped so that `|k| max|v - c| dt <= 0.15`
/// where `c` is the centre of the sampled range of `v`.
pub fn suggested_dt(op: &TridiagonalOperator, m: usize) -> Result<f64> {
    let (lo, hi) = potential_range(op);
    let spread = 0.5 * (hi - lo);
    let mut dt = f64::INFINITY;
    if op.k != 0.0 {
        dt = 0.05 / rate_target(op.nu, op.k, m)?;
        if spread > 0.0 {
            dt = dt.min(0.15 / (op.k.abs() * spread));
        }
    }
    if !dt.is_finite() {
        // heat path: resolve the slowest nonconstant mode
        let len = op.grid.hi - op.grid.lo;
        dt = 0.05 * len * len / (op.nu * std::f64::consts::PI.powi(2));
    }
    Ok(dt)
}

/// Default horizon `8 / lambda_target`; the fit window starts at `1 / lambda_target`.
pub fn suggested_horizon(nu: f64, k: f64, m: usize) -> Result<(f64, (f64, f64))> {
    let r = rate_target(nu, k, m)?;
    Ok((8.0 / r, (1.0 / r, 8.0 / r)))
}

fn potential_range(op: &TridiagonalOperator) -> (f64, f64) {
    let lo = op.potential.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = op.potential.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

/// `||e^{-tH}||` on a checkpoint grid for an assembled operator. The shift
/// `lambda` only changes a unimodular factor, so the operator is re-centred on
/// the range of `v` to keep CN phase errors small.
pub fn norm_decay_on_operator(
    op: &TridiagonalOperator,
    dt: f64,
    t_end: f64,
    fit_window: Option<(f64, f64)>,
    cfg: &DecayConfig,
) -> Result<DecaySeries> {
    if cfg.ensemble_size == 0 {
        return Err(Error::InvalidParams("ensemble_size must be at least 1".into()));
    }
    if !(t_end >= dt) || !(dt > 0.0) {
        return Err(Error::InvalidParams(format!("need 0 < dt <= T, got dt={dt}, T={t_end}")));
    }
    let (vlo, vhi) = potential_range(op);
    let centred = op.shifted(0.5 * (vlo + vhi));
    let ncp = cfg.checkpoints.max(1);
    let total = ((t_end / dt).ceil() as usize).max(ncp);
    let stride = total.div_ceil(ncp);
    let steps = stride * ncp;
    let dt = t_end / steps as f64;
    let prop = CnPropagator::new(&centred, dt)?;
    let h = op.grid.h;
    let n = op.n;

    let times: Vec<f64> = (0..=ncp).map(|j| (j * stride) as f64 * dt).collect();

    // random ensemble, evolved independently
    let mut r = rng::seeded(cfg.seed);
    let nodes = op.grid.nodes();
    let starts: Vec<Vec<C64>> = (0..cfg.ensemble_size)
        .map(|i| if i % 2 == 0 { rng::smooth_bumps(&mut r, &nodes) } else { rng::complex_gaussian(&mut r, n) })
        .collect();
    let trajectories: Vec<Vec<f64>> = par::map(cfg.exec, &starts, |g0| {
        let mut g: Vec<C64> = g0.clone();
        normalize_h(&mut g, h);
        let mut out = vec![1.0];
        for _ in 0..ncp {
            prop.forward(&mut g, stride);
            out.push(norm_h(&g, h));
        }
        out
    });
    let ensemble_bounds: Vec<f64> =
        (0..=ncp).map(|j| trajectories.iter().map(|tr| tr[j]).fold(0.0, f64::max)).collect();

    // power iteration on (P^s)^H P^s, warm-started across checkpoints
    let mut power = vec![1.0f64];
    let mut x: Vec<C64> = starts[0].clone();
    normalize_h(&mut x, h);
    for j in 1..=ncp {
        let s = j * stride;
        let (best_member, best_val) = trajectories
            .iter()
            .enumerate()
            .map(|(i, tr)| (i, tr[j]))
            .fold((0, -1.0), |a, b| if b.1 > a.1 { b } else { a });
        let mut est = propagate_norm(&prop, &x, s, h);
        if best_val > est {
            x = starts[best_member].clone();
            normalize_h(&mut x, h);
            est = best_val;
        }
        for _ in 0..cfg.power_steps {
            let mut y = x.clone();
            prop.forward(&mut y, s);
            prop.backward_adjoint(&mut y, s);
            if normalize_h(&mut y, h) == 0.0 {
                break;
            }
            let next = propagate_norm(&prop, &y, s, h);
            let gain = next - est;
            if next >= est {
                x = y;
                est = next;
            }
            if gain <= cfg.power_tol * est {
                break;
            }
        }
        power.push(est);
    }
    // each estimate is a lower bound for a nonincreasing quantity
    let mut norm_bounds = power;
    for j in (0..ncp).rev() {
        norm_bounds[j] = norm_bounds[j].max(norm_bounds[j + 1]);
    }

    let window = match fit_window {
        Some(w) => w,
        None if op.k != 0.0 => (t_end / 8.0, t_end),
        None => (0.25 * t_end, t_end),
    };
    let mut series = DecaySeries {
        times,
        norm_bounds,
        ensemble_bounds,
        method: DecayMethod::AdjointPowerIteration,
        fitted_rate: 0.0,
        fit_window: window,
        residual: 0.0,
        dt,
        nu: op.nu,
        k: op.k,
        grid: op.grid,
    };
    let fit = fit_decay_rate(&series, window)?;
    series.fitted_rate = fit.rate.max(0.0);
    series.residual = fit.residual;
    Ok(series)
}

fn normalize_h(x: &mut [C64], h: f64) -> f64 {
    let s = norm_h(x, h);
    if s > 0.0 {
        for z in x.iter_mut() {
            *z /= s;
        }
    }
    s
}

fn propagate_norm(prop: &CnPropagator, x: &[C64], steps: usize, h: f64) -> f64 {
    let mut y = x.to_vec();
    prop.forward(&mut y, steps);
    norm_h(&y, h)
}

/// Decay of `||e^{-tH}||` for a profile on its truncated grid. `dt` and `t_end`
/// default to [`suggested_dt`] and [`suggested_horizon`].
pub fn operator_norm_decay(
    p: &ShearProfile,
    nu: f64,
    k: f64,
    dt: Option<f64>,
    t_end: Option<f64>,
    policy: &TruncationPolicy,
    cfg: &DecayConfig,
) -> Result<DecaySeries> {
    let grid = truncate_domain(p, nu, k, policy)?;
    let op = assemble(p, &grid, nu, k, 0.0)?;
    let dt = match dt {
        Some(d) => d,
        None => suggested_dt(&op, p.m())?,
    };
    let (t_end, window) = if k != 0.0 {
        let (t, w) = suggested_horizon(nu, k, p.m())?;
        let t = t_end.unwrap_or(t);
        (t, Some((w.0.min(0.5 * t), t)))
    } else {
        (t_end.unwrap_or(200.0 * dt), None)
    };
    norm_decay_on_operator(&op, dt, t_end, window, cfg)
}

/// Least-squares slope of `-log(norm)` against `t` over `window`.
pub fn fit_decay_rate(series: &DecaySeries, window: (f64, f64)) -> Result<DecayFit> {
    let pts: Vec<(f64, f64)> = series
        .times
        .iter()
        .zip(&series.norm_bounds)
        .filter(|(t, _)| **t >= window.0 * (1.0 - 1e-12) && **t <= window.1 * (1.0 + 1e-12))
        .map(|(&t, &b)| (t, -b.ln()))
        .collect();
    if pts.len() < 5 {
        return Err(Error::WindowTooSmall { found: pts.len(), needed: 5 });
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let stt: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    let sty: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    if stt == 0.0 {
        return Err(Error::WindowTooSmall { found: 1, needed: 5 });
    }
    let rate = sty / stt;
    let intercept = my - rate * mt;
    let ss: f64 = pts.iter().map(|p| (p.1 - intercept - rate * p.0).powi(2)).sum();
    Ok(DecayFit { rate, intercept, residual: (ss / n).sqrt(), points: pts.len() })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeiCheck {
    pub holds: bool,
    /// `min_t (bound - norm) / bound`, with the 2% slack included in `bound`.
    pub worst_slack: f64,
}

pub const WEI_SLACK: f64 = 0.02;

/// `norm(t) <= e^{pi/2 - psi t} (1 + 0.02)` at every checkpoint.
pub fn check_wei_bound(series: &DecaySeries, psi: &PsiEstimate) -> Result<WeiCheck> {
    wei_bound_with(series, psi.psi, Some((&psi.grid, psi.nu, psi.k)))
}

/// Same check with a bare `psi`; `origin` enables the grid/parameter match.
pub fn wei_bound_with(series: &DecaySeries, psi: f64, origin: Option<(&Grid1D, f64, f64)>) -> Result<WeiCheck> {
    if let Some((g, nu, k)) = origin {
        if *g != series.grid || nu != series.nu || k != series.k {
            return Err(Error::GridMismatch);
        }
    }
    let mut worst = f64::INFINITY;
    for (&t, &b) in series.times.iter().zip(&series.norm_bounds) {
        let bound = (FRAC_PI_2 - psi * t).exp() * (1.0 + WEI_SLACK);
        worst = worst.min((bound - b) / bound);
    }
    Ok(WeiCheck { holds: worst >= 0.0, worst_slack: worst })
}

/// Decay rate of the full Fourier mode, `nu k^2 + g_rate`.
pub fn full_scalar_rate(nu: f64, k: f64, g_rate: f64) -> Result<f64> {
    if !(g_rate >= 0.0) {
        return Err(Error::InvalidParams(format!("g_rate must be nonnegative, got {g_rate}")));
    }
    Ok(nu * k * k + g_rate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::Grid1D;

    fn synthetic(f: impl Fn(f64) -> f64) -> DecaySeries {
        let times: Vec<f64> = (0..=20).map(|i| i as f64 * 0.5).collect();
        let norm_bounds = times.iter().map(|&t| f(t)).collect();
        DecaySeries {
            ensemble_bounds: vec![],
            norm_bounds,
            times,
            method: DecayMethod::Ensemble,
            fitted_rate: 0.0,
            fit_window: (0.0, 10.0),
            residual: 0.0,
            dt: 0.5,
            nu: 1.0,
            k: 1.0,
            grid: Grid1D::new(0.0, 1.0, 3).unwrap(),
        }
    }

    #[test]
    fn fit_synthetic_exponentials() {
        let s = synthetic(|t| (-0.3 * t).exp());
        let f = fit_decay_rate(&s, (0.0, 10.0)).unwrap();
        assert!((f.rate - 0.3).abs() < 1e-12 && f.residual < 1e-12);
        let s = synthetic(|t| 5.0 * (-0.3 * t).exp());
        let f = fit_decay_rate(&s, (2.0, 10.0)).unwrap();
        assert!((f.rate - 0.3).abs() < 1e-12);
        assert!((f.intercept + 5f64.ln()).abs() < 1e-12);
        assert!(matches!(fit_decay_rate(&s, (9.0, 10.0)), Err(Error::WindowTooSmall { .. })));
    }

    #[test]
    fn full_rate_identity() {
        assert!((full_scalar_rate(1e-3, 1.0, 0.1).unwrap() - 0.101).abs() < 1e-15);
        assert_eq!(full_scalar_rate(0.7, 0.0, 0.25).unwrap(), 0.25);
        assert!((full_scalar_rate(1.0, 0.1, 0.01).unwrap() - 0.02).abs() < 1e-15);
        assert!(full_scalar_rate(1.0, 1.0, -1.0).is_err());
    }

    #[test]
    fn heat_constant_is_preserved() {
        let grid = Grid1D::new(0.0, 1.0, 101).unwrap();
        let op = assemble(&ShearProfile::poiseuille(), &grid, 0.1, 0.0, 0.0).unwrap();
        let g0 = vec![C64::new(1.0, 0.0); 101];
        let tr = evolve_cn(&op, &g0, 0.01, 1.0).unwrap();
        let n0 = tr[0].1;
        for (_, nrm) in tr {
            assert!((nrm - n0).abs() < 1e-12 * n0);
        }
    }

    #[test]
    fn heat_cosine_mode_rate() {
        let (lo, hi) = (0.0, 2.0);
        let nu = 0.5;
        let grid = Grid1D::new(lo, hi, 401).unwrap();
        let op = assemble(&ShearProfile::poiseuille_line(), &grid, nu, 0.0, 0.0).unwrap();
        // Neumann cosine on the cell-centred grid the closure is exact for
        let g0: Vec<C64> = (0..grid.n)
            .map(|i| C64::new((std::f64::consts::PI * (i as f64 + 0.5) / grid.n as f64).cos(), 0.0))
            .collect();
        let tr = evolve_cn(&op, &g0, 0.01, 2.0).unwrap();
        let rate = -(tr.last().unwrap().1 / tr[0].1).ln() / 2.0;
        let expect = nu * (std::f64::consts::PI / (hi - lo)).powi(2);
        assert!((rate / expect - 1.0).abs() < 0.02, "{rate} vs {expect}");
    }

    #[test]
    fn cn_is_norm_nonincreasing() {
        let grid = Grid1D::new(-3.0, 3.0, 300).unwrap();
        let op = assemble(&ShearProfile::couette(), &grid, 1e-3, 1.0, 0.0).unwrap();
        let mut r = rng::seeded(5);
        let g0 = rng::complex_gaussian(&mut r, 300);
        for dt in [1e-3, 0.1, 10.0] {
            let tr = evolve_cn(&op, &g0, dt, 20.0 * dt).unwrap();
            for w in tr.windows(2) {
                assert!(w[1].1 <= w[0].1 * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn adjoint_step_matches_gram_form() {
        let grid = Grid1D::new(-1.0, 1.0, 120).unwrap();
        let op = assemble(&ShearProfile::poiseuille(), &grid, 1e-2, 1.0, 0.2).unwrap();
        let prop = CnPropagator::new(&op, 0.05).unwrap();
        let mut r = rng::seeded(9);
        let x = rng::complex_gaussian(&mut r, 120);
        let y = rng::complex_gaussian(&mut r, 120);
        let mut px = x.clone();
        prop.forward(&mut px, 7);
        let mut pty = y.clone();
        prop.backward_adjoint(&mut pty, 7);
        let lhs: C64 = px.iter().zip(&y).map(|(a, b)| a * b.conj()).sum();
        let rhs: C64 = x.iter().zip(&pty).map(|(a, b)| a * b.conj()).sum();
        assert!((lhs - rhs).norm() <= 1e-12 * lhs.norm().max(1.0));
    }

    #[test]
    fn heat_operator_norm_is_one() {
        let cfg = DecayConfig { checkpoints: 10, ..Default::default() };
        let s = operator_norm_decay(
            &ShearProfile::poiseuille(),
            0.1,
            0.0,
            Some(0.01),
            Some(2.0),
            &TruncationPolicy::default(),
            &cfg,
        )
        .unwrap();
        assert_eq!(s.norm_bounds[0], 1.0);
        for b in &s.norm_bounds {
            assert!((b - 1.0).abs() < 1e-9, "{b}");
        }
        let w = wei_bound_with(&s, 0.0, None).unwrap();
        assert!(w.holds);
    }

    #[test]
    fn grid_mismatch_detected() {
        let s = synthetic(|t| (-t).exp());
        let other = Grid1D::new(0.0, 2.0, 3).unwrap();
        assert!(matches!(wei_bound_with(&s, 0.1, Some((&other, 1.0, 1.0))), Err(Error::GridMismatch)));
    }
}
