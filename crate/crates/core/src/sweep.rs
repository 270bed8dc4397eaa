//! Parameter sweeps over `(nu, k)`, power-law fits, and the truncation scan
//! on unbounded cross-sections.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::levelset::Span;
use crate::operator::TruncationPolicy;
use crate::par::{self, Exec};
use crate::profiles::ShearProfile;
use crate::resolvent::{pseudospectral_abscissa, PsiSearch};
use crate::semigroup::{operator_norm_decay, DecayConfig};

/// Empirical floor for `psi / rate_target` on converged enhanced-regime rows of
/// the built-in profiles. Taylor-regime prefactors are profile variances and can
/// sit well below it (8/945 for Poiseuille).
pub const LOWER_BOUND_FLOOR: f64 = 0.05;

/// `nu^{m/(m+2)} |k|^{2/(m+2)}` if `nu <= |k|`, else `k^2 / nu`.
pub fn rate_target(nu: f64, k: f64, m: usize) -> Result<f64> {
    if !(nu > 0.0) || !nu.is_finite() {
        return Err(Error::InvalidParams(format!("nu must be positive, got {nu}")));
    }
    if k == 0.0 || !k.is_finite() {
        return Err(Error::InvalidParams(format!("k must be nonzero, got {k}")));
    }
    if m < 1 {
        return Err(Error::InvalidParams("m must be at least 1".into()));
    }
    let ka = k.abs();
    Ok(if nu <= ka {
        let mf = m as f64;
        nu.powf(mf / (mf + 2.0)) * ka.powf(2.0 / (mf + 2.0))
    } else {
        ka * ka / nu
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Enhanced,
    Taylor,
}

impl Regime {
    pub fn classify(nu: f64, k: f64) -> Self {
        if nu <= k.abs() {
            Regime::Enhanced
        } else {
            Regime::Taylor
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Regime::Enhanced => "enhanced",
            Regime::Taylor => "taylor",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub nu: f64,
    pub k: f64,
    pub psi: Option<f64>,
    pub semigroup_rate: Option<f64>,
    pub grid_converged: bool,
    pub regime: Regime,
    pub lambda_star: Option<f64>,
    pub target: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateTable {
    pub profile: String,
    pub m: usize,
    pub rows: Vec<RateRow>,
}

impl RateTable {
    /// Converged enhanced-regime rows with `psi < LOWER_BOUND_FLOOR * rate_target`.
    pub fn lower_bound_violations(&self) -> Vec<&RateRow> {
        self.rows
            .iter()
            .filter(|r| {
                r.grid_converged
                    && r.regime == Regime::Enhanced
                    && matches!((r.psi, r.target), (Some(p), Some(t)) if p < LOWER_BOUND_FLOOR * t)
            })
            .collect()
    }

    /// `(k, nu_lo, nu_hi)` where psi decreases as nu increases (converged rows only).
    pub fn monotonicity_flags(&self) -> Vec<(f64, f64, f64)> {
        let mut out = Vec::new();
        for a in &self.rows {
            for b in &self.rows {
                if a.k == b.k && a.nu < b.nu && a.grid_converged && b.grid_converged {
                    if let (Some(pa), Some(pb)) = (a.psi, b.psi) {
                        if pb < pa {
                            out.push((a.k, a.nu, b.nu));
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepConfig {
    pub policy: TruncationPolicy,
    pub search: PsiSearch,
    /// Also fit the semigroup decay rate for each row.
    pub semigroup: bool,
    pub decay: DecayConfig,
    #[serde(skip)]
    pub exec: Exec,
}

/// One row per `(nu, k)` pair, `nu` outer. Failed rows keep their error.
pub fn psi_sweep(p: &ShearProfile, nu_list: &[f64], k_list: &[f64], cfg: &SweepConfig) -> Result<RateTable> {
    if nu_list.is_empty() || k_list.is_empty() {
        return Err(Error::InvalidParams("nu_list and k_list must be nonempty".into()));
    }
    if let Some(k) = k_list.iter().find(|k| **k == 0.0 || !k.is_finite()) {
        return Err(Error::InvalidParams(format!("k must be nonzero, got {k}")));
    }
    let pairs: Vec<(f64, f64)> = nu_list.iter().flat_map(|&nu| k_list.iter().map(move |&k| (nu, k))).collect();
    let rows = par::map(cfg.exec, &pairs, |&(nu, k)| sweep_row(p, nu, k, cfg));
    Ok(RateTable { profile: p.name().to_string(), m: p.m(), rows })
}

fn sweep_row(p: &ShearProfile, nu: f64, k: f64, cfg: &SweepConfig) -> RateRow {
    let regime = Regime::classify(nu, k);
    let mut row = RateRow {
        nu,
        k,
        psi: None,
        semigroup_rate: None,
        grid_converged: false,
        regime,
        lambda_star: None,
        target: None,
        error: None,
    };
    match rate_target(nu, k, p.m()) {
        Ok(t) => row.target = Some(t),
        Err(e) => {
            row.error = Some(e.to_string());
            return row;
        }
    }
    let search = PsiSearch { exec: cfg.exec, ..cfg.search };
    match pseudospectral_abscissa(p, nu, k, &cfg.policy, &search) {
        Ok(est) => {
            row.grid_converged = est.converged() && !est.stalled;
            row.psi = Some(est.psi);
            row.lambda_star = Some(est.lambda_star);
        }
        Err(e) => {
            row.error = Some(e.to_string());
            return row;
        }
    }
    if cfg.semigroup {
        let decay = DecayConfig { exec: cfg.exec, ..cfg.decay };
        match operator_norm_decay(p, nu, k, None, None, &cfg.policy, &decay) {
            Ok(s) => row.semigroup_rate = Some(s.fitted_rate),
            Err(e) => row.error = Some(e.to_string()),
        }
    }
    row
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub regime: Regime,
    /// `None` when `nu` does not vary across the fitted rows.
    pub exponent_nu: Option<f64>,
    /// `None` when `|k|` does not vary across the fitted rows.
    pub exponent_k: Option<f64>,
    pub prefactor: f64,
    pub r_squared: f64,
    pub rows_used: usize,
}

/// OLS of `log psi` on `(log nu, log |k|, 1)` over the converged rows of `regime`.
pub fn fit_scaling(table: &RateTable, regime: Regime) -> Result<ScalingFit> {
    let pts: Vec<(f64, f64, f64)> = table
        .rows
        .iter()
        .filter(|r| r.regime == regime && r.grid_converged)
        .filter_map(|r| r.psi.filter(|p| *p > 0.0).map(|p| (r.nu.ln(), r.k.abs().ln(), p.ln())))
        .collect();
    if pts.len() < 4 {
        return Err(Error::InsufficientRows { found: pts.len(), needed: 4 });
    }
    let varies = |f: fn(&(f64, f64, f64)) -> f64| {
        let first = f(&pts[0]);
        pts.iter().any(|p| (f(p) - first).abs() > 1e-12)
    };
    let use_nu = varies(|p| p.0);
    let use_k = varies(|p| p.1);
    if !use_nu && !use_k {
        return Err(Error::DegenerateDesign("neither nu nor k varies".into()));
    }
    let cols = 1 + use_nu as usize + use_k as usize;
    let n = pts.len();
    let x = DMatrix::from_fn(n, cols, |i, j| {
        let mut c = Vec::with_capacity(3);
        if use_nu {
            c.push(pts[i].0);
        }
        if use_k {
            c.push(pts[i].1);
        }
        c.push(1.0);
        c[j]
    });
    let y = DVector::from_iterator(n, pts.iter().map(|p| p.2));
    let svd = x.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if smin <= 1e-10 * smax {
        return Err(Error::DegenerateDesign("log nu and log |k| are collinear".into()));
    }
    let beta = svd.solve(&y, 1e-14).map_err(|e| Error::DegenerateDesign(e.to_string()))?;
    let fitted = &x * &beta;
    let mean = y.mean();
    let ss_tot: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let ss_res: f64 = y.iter().zip(fitted.iter()).map(|(a, b)| (a - b).powi(2)).sum();
    let r_squared = if ss_tot > 0.0 { (1.0 - ss_res / ss_tot).clamp(0.0, 1.0) } else { 1.0 };
    let mut it = beta.iter().cloned();
    let exponent_nu = if use_nu { it.next() } else { None };
    let exponent_k = if use_k { it.next() } else { None };
    let intercept = it.next().expect("intercept column");
    Ok(ScalingFit { regime, exponent_nu, exponent_k, prefactor: intercept.exp(), r_squared, rows_used: n })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncationRow {
    pub length: f64,
    pub psi: f64,
    pub lambda_star: f64,
    pub n: usize,
}

/// `psi` of `p` restricted to `(a, L)` for each `L`, where `a` is the left end
/// of the domain of `p` (or `start` when given).
pub fn truncation_scan(
    p: &ShearProfile,
    start: Option<f64>,
    nu: f64,
    k: f64,
    lengths: &[f64],
    cfg: &SweepConfig,
) -> Result<Vec<TruncationRow>> {
    if lengths.is_empty() {
        return Err(Error::InvalidParams("L_list must be nonempty".into()));
    }
    if lengths.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParams("L_list must be increasing".into()));
    }
    let a = match start {
        Some(a) => a,
        None if p.domain().lo().is_finite() => p.domain().lo(),
        None => return Err(Error::InvalidParams(format!("{} has no finite left end", p.name()))),
    };
    let search = PsiSearch { exec: cfg.exec, check_truncation: false, ..cfg.search };
    let rows = par::map(cfg.exec, lengths, |&l| -> Result<TruncationRow> {
        let policy = TruncationPolicy { window: Some(Span::new(a, l)), ..cfg.policy };
        let est = pseudospectral_abscissa(p, nu, k, &policy, &search)?;
        Ok(TruncationRow { length: l, psi: est.psi, lambda_star: est.lambda_star, n: est.grid.n })
    });
    rows.into_iter().collect()
}

/// Truncation scan of the Taylor–Couette profile on `(1, L)`.
pub fn counterexample_scan(nu: f64, k: f64, lengths: &[f64], cfg: &SweepConfig) -> Result<Vec<TruncationRow>> {
    truncation_scan(&ShearProfile::taylor_couette(), None, nu, k, lengths, cfg)
}

/// Strictly decreasing psi with `psi(last) <= psi(first) / 2`; `None` for a single length.
pub fn counterexample_verdict(rows: &[TruncationRow]) -> Option<bool> {
    if rows.len() < 2 {
        return None;
    }
    let decreasing = rows.windows(2).all(|w| w[1].psi < w[0].psi);
    Some(decreasing && rows[rows.len() - 1].psi <= rows[0].psi / 2.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(nu: f64, k: f64, psi: f64) -> RateRow {
        RateRow {
            nu,
            k,
            psi: Some(psi),
            semigroup_rate: None,
            grid_converged: true,
            regime: Regime::classify(nu, k),
            lambda_star: None,
            target: rate_target(nu, k, 1).ok(),
            error: None,
        }
    }

    #[test]
    fn rate_target_examples() {
        assert!((rate_target(1e-3, 1.0, 1).unwrap() - 0.1).abs() < 1e-15);
        assert!((rate_target(1.0, 0.1, 3).unwrap() - 0.01).abs() < 1e-15);
        assert!((rate_target(0.5, 0.5, 2).unwrap() - 0.5).abs() < 1e-15);
        assert!((rate_target(0.5, -0.5, 2).unwrap() - 0.5).abs() < 1e-15);
        assert!(rate_target(0.0, 1.0, 1).is_err());
        assert!(rate_target(1.0, 0.0, 1).is_err());
        assert!(rate_target(1.0, 1.0, 0).is_err());
    }

    #[test]
    fn seam_is_continuous() {
        for m in 1..=6 {
            for &k in &[1e-3, 0.3, 1.0, 7.0] {
                let below = rate_target(k * (1.0 - 1e-9), k, m).unwrap();
                let above = rate_target(k * (1.0 + 1e-9), k, m).unwrap();
                assert!((below - above).abs() <= 1e-8 * k, "m={m} k={k}");
            }
        }
    }

    #[test]
    fn tie_is_enhanced() {
        assert_eq!(Regime::classify(0.5, -0.5), Regime::Enhanced);
        assert_eq!(Regime::classify(0.5, 0.4), Regime::Taylor);
    }

    #[test]
    fn exact_power_law_fit() {
        let mut rows = Vec::new();
        for &nu in &[1e-4, 1e-3, 1e-2] {
            for &k in &[0.5, 1.0, 2.0] {
                rows.push(row(nu, k, 2.0 * nu.powf(1.0 / 3.0) * k.powf(2.0 / 3.0)));
            }
        }
        let t = RateTable { profile: "synthetic".into(), m: 1, rows };
        let f = fit_scaling(&t, Regime::Enhanced).unwrap();
        assert!((f.exponent_nu.unwrap() - 1.0 / 3.0).abs() < 1e-10);
        assert!((f.exponent_k.unwrap() - 2.0 / 3.0).abs() < 1e-10);
        assert!((f.prefactor - 2.0).abs() < 1e-10);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_nu_leaves_nu_exponent_unidentified() {
        let rows = [0.25, 0.5, 1.0, 2.0].iter().map(|&k| row(1e-4, k, k * k)).collect();
        let f = fit_scaling(&RateTable { profile: "s".into(), m: 1, rows }, Regime::Enhanced).unwrap();
        assert!(f.exponent_nu.is_none());
        assert!((f.exponent_k.unwrap() - 2.0).abs() < 1e-10);
    }

    #[test]
    fn fit_errors() {
        let rows = vec![row(1e-3, 1.0, 0.1); 3];
        let t = RateTable { profile: "s".into(), m: 1, rows };
        assert!(matches!(fit_scaling(&t, Regime::Enhanced), Err(Error::InsufficientRows { found: 3, .. })));
        let rows = [1e-3, 1e-2, 1e-1, 0.5].iter().map(|&nu| row(nu, nu, nu)).collect();
        let t = RateTable { profile: "s".into(), m: 1, rows };
        assert!(matches!(fit_scaling(&t, Regime::Enhanced), Err(Error::DegenerateDesign(_))));
    }

    #[test]
    fn verdicts() {
        let mk = |ps: &[f64]| -> Vec<TruncationRow> {
            ps.iter()
                .enumerate()
                .map(|(i, &p)| TruncationRow { length: 10.0 * (i + 1) as f64, psi: p, lambda_star: 0.0, n: 3 })
                .collect()
        };
        assert_eq!(counterexample_verdict(&mk(&[1.0])), None);
        assert_eq!(counterexample_verdict(&mk(&[1.0, 0.6, 0.4])), Some(true));
        assert_eq!(counterexample_verdict(&mk(&[1.0, 0.9, 0.8])), Some(false));
        assert_eq!(counterexample_verdict(&mk(&[1.0, 1.1, 0.1])), Some(false));
    }
}
