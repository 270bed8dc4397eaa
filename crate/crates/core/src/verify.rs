//! The ten end-to-end verification criteria behind `verify-all`.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::levelset::{Cutoff, LevelGeometry, Span};
use crate::operator::{assemble, numerical_range_check, inner_h, interpolation_inequality_check, norm_h, truncate_domain, Grid1D, TruncationPolicy};
use crate::par::Exec;
use crate::profiles::{DomainSpec, ShearProfile};
use crate::resolvent::{pseudospectral_abscissa, resolvent_certificate, sigma_min, sigma_min_dense, PsiSearch};
use crate::rng;
use crate::semigroup::{check_wei_bound, operator_norm_decay, DecayConfig};
use crate::sweep::{counterexample_scan, counterexample_verdict, fit_scaling, psi_sweep, rate_target, truncation_scan, RateTable, Regime, SweepConfig};
use crate::tensor::{tensor_rate, TensorConfig};
use crate::tridiag::Tridiagonal;

pub const NU_GRID: [f64; 4] = [1e-2, 1e-3, 1e-4, 1e-5];
pub const CRITERIA: [(u8, &str); 10] = [
    (1, "enhanced-dissipation exponent, m=1"),
    (2, "enhanced-dissipation exponent, m=2"),
    (3, "k-exponent in the enhanced regime"),
    (4, "Taylor-dispersion regime"),
    (5, "level-set measure bound"),
    (6, "non-degeneracy at infinity is necessary"),
    (7, "pseudospectral abscissa bounds the semigroup"),
    (8, "sigma_min against dense SVD"),
    (9, "structural identities"),
    (10, "tensorization"),
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyOptions {
    pub seed: u64,
    pub exec: Exec,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self { seed: 0, exec: Exec::Auto }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionOutcome {
    pub id: u8,
    pub name: String,
    pub passed: bool,
    /// A numerical routine failed to converge.
    pub nonconverged: bool,
    /// Measured quantities; only finite values are recorded.
    pub metrics: BTreeMap<String, f64>,
    pub notes: Vec<String>,
    pub seconds: f64,
}

impl CriterionOutcome {
    pub fn metric(&self, key: &str) -> Option<f64> {
        self.metrics.get(key).copied()
    }

    pub fn line(&self) -> String {
        let verdict = if self.passed { "PASS" } else if self.nonconverged { "NONCONVERGED" } else { "FAIL" };
        format!("criterion {:>2} [{verdict}] {} ({:.1}s)", self.id, self.name, self.seconds)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifySummary {
    pub criteria: Vec<CriterionOutcome>,
    pub passed: bool,
}

impl VerifySummary {
    pub fn get(&self, id: u8) -> Option<&CriterionOutcome> {
        self.criteria.iter().find(|c| c.id == id)
    }
}

struct Rec {
    passed: bool,
    nonconverged: bool,
    metrics: BTreeMap<String, f64>,
    notes: Vec<String>,
}

impl Rec {
    fn new() -> Self {
        Self { passed: true, nonconverged: false, metrics: BTreeMap::new(), notes: Vec::new() }
    }

    fn metric(&mut self, key: impl Into<String>, value: f64) {
        if value.is_finite() {
            self.metrics.insert(key.into(), value);
        }
    }

    fn require(&mut self, ok: bool, note: impl Into<String>) {
        if !ok {
            self.passed = false;
            self.notes.push(note.into());
        }
    }

    fn nonconverged(&mut self, note: impl Into<String>) {
        self.passed = false;
        self.nonconverged = true;
        self.notes.push(note.into());
    }
}

pub fn run_criterion(id: u8, opts: &VerifyOptions) -> CriterionOutcome {
    let name = CRITERIA.iter().find(|c| c.0 == id).map_or("unknown", |c| c.1).to_string();
    let start = Instant::now();
    let mut rec = Rec::new();
    let res = match id {
        1 => c1(&mut rec, opts),
        2 => c2(&mut rec, opts),
        3 => c3(&mut rec, opts),
        4 => c4(&mut rec, opts),
        5 => c5(&mut rec, opts),
        6 => c6(&mut rec, opts),
        7 => c7(&mut rec, opts),
        8 => c8(&mut rec, opts),
        9 => c9(&mut rec, opts),
        10 => c10(&mut rec, opts),
        _ => Err(Error::InvalidParams(format!("no criterion {id}"))),
    };
    match res {
        Ok(()) => {}
        Err(e @ Error::NoConvergence { .. }) => rec.nonconverged(e.to_string()),
        Err(e) => rec.require(false, e.to_string()),
    }
    CriterionOutcome {
        id,
        name,
        passed: rec.passed,
        nonconverged: rec.nonconverged,
        metrics: rec.metrics,
        notes: rec.notes,
        seconds: start.elapsed().as_secs_f64(),
    }
}

pub fn verify_all(opts: &VerifyOptions) -> VerifySummary {
    let criteria: Vec<CriterionOutcome> = CRITERIA.iter().map(|&(id, _)| run_criterion(id, opts)).collect();
    let passed = criteria.iter().all(|c| c.passed);
    VerifySummary { criteria, passed }
}

fn sweep_cfg(opts: &VerifyOptions, check_truncation: bool) -> SweepConfig {
    SweepConfig {
        search: PsiSearch { check_truncation, exec: opts.exec, ..PsiSearch::default() },
        exec: opts.exec,
        ..SweepConfig::default()
    }
}

fn require_converged(rec: &mut Rec, table: &RateTable) {
    for r in &table.rows {
        if r.psi.is_none() || !r.grid_converged {
            let why = r.error.clone().unwrap_or_else(|| "grid or truncation doubling changed psi by more than 1%".into());
            rec.nonconverged(format!("{} nu={} k={}: {why}", table.profile, r.nu, r.k));
        }
    }
}

fn record_rows(rec: &mut Rec, table: &RateTable) {
    for r in &table.rows {
        if let Some(p) = r.psi {
            rec.metric(format!("{}.psi[nu={:e},k={}]", table.profile, r.nu, r.k), p);
        }
    }
}

fn exponent_check(rec: &mut Rec, key: &str, value: Option<f64>, target: f64, tol: f64) {
    match value {
        Some(x) => {
            rec.metric(key, x);
            rec.require((x - target).abs() <= tol, format!("{key} = {x:.4}, want {target:.4} +- {tol}"));
        }
        None => rec.require(false, format!("{key} not identified")),
    }
}

fn c1(rec: &mut Rec, o: &VerifyOptions) -> Result<()> {
    let t = psi_sweep(&ShearProfile::couette(), &NU_GRID, &[1.0], &sweep_cfg(o, true))?;
    record_rows(rec, &t);
    require_converged(rec, &t);
    let fit = fit_scaling(&t, Regime::Enhanced)?;
    exponent_check(rec, "couette.exponent_nu", fit.exponent_nu, 1.0 / 3.0, 0.03);
    Ok(())
}

fn c2(rec: &mut Rec, o: &VerifyOptions) -> Result<()> {
    for p in [ShearProfile::poiseuille(), ShearProfile::kolmogorov()] {
        let t = psi_sweep(&p, &NU_GRID, &[1.0], &sweep_cfg(o, true))?;
        record_rows(rec, &t);
        require_converged(rec, &t);
        let fit = fit_scaling(&t, Regime::Enhanced)?;
        exponent_check(rec, &format!("{}.exponent_nu", p.name()), fit.exponent_nu, 0.5, 0.05);
    }
    Ok(())
}

fn c3(rec: &mut Rec, o: &VerifyOptions) -> Result<()> {
    let t = psi_sweep(&ShearProfile::couette(), &[1e-4], &[0.25, 0.5, 1.0, 2.0, 4.0], &sweep_cfg(o, false))?;
    record_rows(rec, &t);
    require_converged(rec, &t);
    let fit = fit_scaling(&t, Regime::Enhanced)?;
    exponent_check(rec, "couette.exponent_k", fit.exponent_k, 2.0 / 3.0, 0.05);
    Ok(())
}

fn c4(rec: &mut Rec, o: &VerifyOptions) -> Result<()> {
    let t = psi_sweep(&ShearProfile::poiseuille(), &[1.0, 2.0, 4.0], &[0.02, 0.05, 0.1, 0.2], &sweep_cfg(o, false))?;
    record_rows(rec, &t);
    require_converged(rec, &t);
    let fit = fit_scaling(&t, Regime::Taylor)?;
    rec.metric("poiseuille.rows_used", fit.rows_used as f64);
    exponent_check(rec, "poiseuille.exponent_k", fit.exponent_k, 2.0, 0.1);
    exponent_check(rec, "poiseuille.exponent_nu", fit.exponent_nu, -1.0, 0.15);
    Ok(())
}

/// Profiles, windows and lambda ranges for the level-set criterion. The
/// Couette range is taken over `[-1, 1]` since `v` is unbounded on the line.
pub fn measure_cases() -> Vec<(ShearProfile, Span, (f64, f64))> {
    let pi2 = 2.0 * std::f64::consts::PI;
    vec![
        (ShearProfile::couette(), Span::new(-2.0, 2.0), (-1.5, 1.5)),
        (ShearProfile::poiseuille(), Span::new(-1.0, 1.0), (-0.5, 1.5)),
        (ShearProfile::kolmogorov(), Span::new(0.0, pi2), (-1.5, 1.5)),
        (ShearProfile::monomial(3), Span::new(-1.0, 1.0), (-1.5, 1.5)),
    ]
}

pub const MEASURE_DELTAS: [f64; 5] = [0.2, 0.1, 0.05, 0.025, 0.0125];

/// Grid oracle for `m(E)` and `m(Ecal)` from samples `v` at `n` equispaced
/// nodes including both ends of `window`. `E` is located by the sampled
/// condition plus sign changes of `v - lambda` between neighbours; `Ecal` is
/// the exact `delta`-dilation of the sampled runs, clipped to the window.
fn grid_measures(v: &[f64], window: Span, lambda: f64, delta: f64, m: usize) -> (f64, f64) {
    let n = v.len();
    let h = window.len() / (n - 1) as f64;
    let eps = delta.powi(m as i32);
    let mut hit: Vec<bool> = v.iter().map(|x| (x - lambda).abs() < eps).collect();
    let e = h * hit.iter().filter(|b| **b).count() as f64;
    for i in 0..n - 1 {
        if (v[i] - lambda) * (v[i + 1] - lambda) < 0.0 {
            hit[i] = true;
            hit[i + 1] = true;
        }
    }
    let y = |i: usize| window.lo + i as f64 * h;
    let mut ecal = 0.0;
    let mut cur: Option<(f64, f64)> = None;
    let mut i = 0;
    while i < n {
        if !hit[i] {
            i += 1;
            continue;
        }
        let start = i;
        while i + 1 < n && hit[i + 1] {
            i += 1;
        }
        let (lo, hi) = ((y(start) - delta).max(window.lo), (y(i) + delta).min(window.hi));
        cur = match cur {
            Some((a, b)) if lo <= b => Some((a, b.max(hi))),
            Some((a, b)) => {
                ecal += b - a;
                Some((lo, hi))
            }
            None => Some((lo, hi)),
        };
        i += 1;
    }
    if let Some((a, b)) = cur {
        ecal += b - a;
    }
    (e, ecal)
}

fn c5(rec: &mut Rec, o: &VerifyOptions) -> Result<()> {
    const ORACLE_POINTS: usize = 1_000_000;
    for (p, window, (l0, l1)) in measure_cases() {
        let lambdas: Vec<f64> = (0..61).map(|i| l0 + (l1 - l0) * i as f64 / 60.0).collect();
        let sweep = crate::levelset::measure_sweep(&p, window, &lambdas, &MEASURE_DELTAS, p.m(), o.exec)?;
        match sweep.max_halving_factor() {
            Some(f) => {
                rec.metric(format!("{}.halving_factor", p.name()), f);
                rec.require(f <= 1.5, format!("{}: sup ratio changes by {f:.3} across a halving", p.name()));
            }
            None => rec.require(false, format!("{}: no unsaturated rows", p.name())),
        }
        if let Some(s) = sweep.sup_ratio {
            rec.metric(format!("{}.sup_ratio", p.name()), s);
        }

        let h = window.len() / (ORACLE_POINTS - 1) as f64;
        let v: Vec<f64> = (0..ORACLE_POINTS).map(|i| p.value(window.lo + i as f64 * h)).collect();
        let geo = LevelGeometry::new(&p, window, MEASURE_DELTAS[0])?;
        let mut worst: f64 = 0.0;
        for &lambda in &lambdas {
            for &delta in &MEASURE_DELTAS {
                let e = geo.thickened(lambda, delta, p.m());
                let ecal = geo.neighborhood(lambda, delta, p.m());
                let (ge, gecal) = grid_measures(&v, window, lambda, delta, p.m());
                let cells_e = (e.measure - ge).abs() / h / e.intervals.len().max(1) as f64;
                let cells_ecal = (ecal.measure - gecal).abs() / h / ecal.intervals.len().max(1) as f64;
                worst = worst.max(cells_e).max(cells_ecal);
            }
        }
        rec.metric(format!("{}.oracle_cells_per_component", p.name()), worst);
        rec.require(worst <= 2.0, format!("{}: measure differs from grid oracle by {worst:.2} cells", p.name()));
    }
    Ok(())
}

fn c6(rec: &mut Rec, o: &VerifyOptions) -> Result<()> {
    let lengths = [10.0, 20.0, 40.0, 80.0];
    let cfg = sweep_cfg(o, false);
    let tc = counterexample_scan(1e-3, 1.0, &lengths, &cfg)?;
    for r in &tc {
        rec.metric(format!("taylor_couette.psi[L={}]", r.length), r.psi);
    }
    rec.require(counterexample_verdict(&tc) == Some(true), "taylor_couette psi is not strictly decreasing to at most half");
    let ctl = truncation_scan(&ShearProfile::couette(), Some(1.0), 1e-3, 1.0, &lengths, &cfg)?;
    for r in &ctl {
        rec.metric(format!("couette.psi[L={}]", r.length), r.psi);
    }
    let ratio = ctl[3].psi / ctl[2].psi;
    rec.metric("couette.psi80_over_psi40", ratio);
    rec.require(ratio >= 0.9, format!("couette control psi(80)/psi(40) = {ratio:.4}"));
    Ok(())
}

pub fn acceptance_profiles() -> Vec<ShearProfile> {
    vec![ShearProfile::couette(), ShearProfile::poiseuille(), ShearProfile::kolmogorov()]
}

fn c7(rec: &mut Rec, o: &VerifyOptions) -> Result<()> {
    let (nu, k) = (1e-3, 1.0);
    let policy = TruncationPolicy::default();
    let search = PsiSearch { exec: o.exec, ..PsiSearch::default() };
    let decay = DecayConfig { seed: o.seed, exec: o.exec, ..DecayConfig::default() };
    for p in acceptance_profiles() {
        let est = pseudospectral_abscissa(&p, nu, k, &policy, &search)?;
        if est.stalled {
            rec.nonconverged(format!("{}: psi search stalled", p.name()));
        }
        let series = operator_norm_decay(&p, nu, k, None, None, &policy, &decay)?;
        let wei = check_wei_bound(&series, &est)?;
        let ratio = series.fitted_rate / est.psi;
        rec.metric(format!("{}.psi", p.name()), est.psi);
        rec.metric(format!("{}.fitted_rate", p.name()), series.fitted_rate);
        rec.metric(format!("{}.rate_over_psi", p.name()), ratio);
        rec.metric(format!("{}.wei_worst_slack", p.name()), wei.worst_slack);
        rec.require(wei.holds, format!("{}: norm exceeds the exponential bound (slack {:.3e})", p.name(), wei.worst_slack));
        rec.require(ratio >= 0.98, format!("{}: fitted rate / psi = {ratio:.4}", p.name()));
    }
    Ok(())
}

/// Random complex tridiagonal matrix with standard Gaussian entries.
pub fn random_tridiagonal(r: &mut rng::Pcg32, n: usize) -> Tridiagonal {
    let g = |r: &mut rng::Pcg32, len| rng::complex_gaussian(r, len);
    let sub = g(r, n - 1);
    let diag = g(r, n);
    let sup = g(r, n - 1);
    Tridiagonal::new(sub, diag, sup).expect("consistent lengths")
}

fn c8(rec: &mut Rec, o: &VerifyOptions) -> Result<()> {
    let mut r = rng::seeded(o.seed ^ 0x8);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let n = r_size(&mut r);
        let a = random_tridiagonal(&mut r, n);
        let dense = sigma_min_dense(&a);
        let s = sigma_min(&a, 1e-13, 20_000)?;
        worst = worst.max((s - dense).abs() / dense);
    }
    rec.metric("max_rel_err", worst);
    rec.require(worst <= 1e-8, format!("relative error {worst:.3e}"));
    Ok(())
}

fn r_size(r: &mut rng::Pcg32) -> usize {
    use rand::RngExt;
    r.random_range(1..=200)
}

fn c9(rec: &mut Rec, o: &VerifyOptions) -> Result<()> {
    let mut r = rng::seeded(o.seed ^ 0x9);
    let mut profiles = acceptance_profiles();
    profiles.push(ShearProfile::monomial(3));

    // accretivity and numerical range
    let mut worst_re: f64 = 0.0;
    let mut worst_im: f64 = 0.0;
    let mut worst_acc: f64 = 0.0;
    for p in &profiles {
        let grid = truncate_domain(p, 1e-2, 1.0, &TruncationPolicy::default())?;
        let nodes = grid.nodes();
        let base = assemble(p, &grid, 1e-2, 1.0, 0.0)?;
        let (vmin, vmax) = range_of(&base.potential);
        for i in 0..1000 {
            let op = base.shifted(rng::uniform(&mut r, vmin, vmax));
            let g = if i % 2 == 0 { rng::complex_gaussian(&mut r, grid.n) } else { rng::smooth_bumps(&mut r, &nodes) };
            let res = numerical_range_check(&op, &g)?;
            let g2 = norm_h(&g, grid.h).powi(2);
            let re = inner_h(&op.apply(&g)?, &g, grid.h).re;
            worst_re = worst_re.max(res.re_residual);
            worst_im = worst_im.max(res.im_residual);
            worst_acc = worst_acc.max(-re / g2);
        }
    }
    rec.metric("numrange_re_residual", worst_re);
    rec.metric("numrange_im_residual", worst_im);
    rec.metric("accretivity_deficit", worst_acc);
    rec.require(worst_re <= 1e-12 && worst_im <= 1e-12, format!("numerical-range residuals {worst_re:.2e}, {worst_im:.2e}"));
    rec.require(worst_acc <= 1e-12, format!("Re<Hg,g> below zero by {worst_acc:.2e}"));

    // cutoff properties
    let mut chi_fail = 0usize;
    for (p, window, (l0, l1)) in measure_cases() {
        for &lambda in &[l0 + 0.5, 0.5 * (l0 + l1), l1 - 0.5] {
            for &delta in &[0.2, 0.05] {
                let cut = Cutoff::new(&p, lambda, delta, p.m(), window)?;
                for _ in 0..10_000 {
                    let y = rng::uniform(&mut r, window.lo, window.hi);
                    let chi = cut.eval(y);
                    let diff = p.value(y) - lambda;
                    let mut ok = chi.abs() <= 1.0 && chi * diff >= 0.0;
                    if cut.distance(y) >= delta {
                        ok &= chi == diff.signum() || diff == 0.0;
                    }
                    let y2 = (y + rng::uniform(&mut r, -delta, delta)).clamp(window.lo, window.hi);
                    if y2 != y {
                        let q = (cut.eval(y2) - chi).abs() / (y2 - y).abs();
                        ok &= q <= 1.0 / delta * (1.0 + 1e-9) + 1e-9;
                    }
                    if !ok {
                        chi_fail += 1;
                    }
                }
            }
        }
    }
    rec.metric("cutoff_failures", chi_fail as f64);
    rec.require(chi_fail == 0, format!("{chi_fail} cutoff samples violate its properties"));

    // sup-norm interpolation inequality
    let grid = Grid1D::new(-1.0, 1.0, 2001)?;
    let nodes = grid.nodes();
    let mut worst_ratio: f64 = 0.0;
    for _ in 0..1000 {
        let g = rng::smooth_bumps(&mut r, &nodes);
        worst_ratio = worst_ratio.max(interpolation_inequality_check(&g, &grid)?);
    }
    rec.metric("interpolation_ratio", worst_ratio);
    rec.require(worst_ratio <= 1.0 + 10.0 * grid.h, format!("interpolation ratio {worst_ratio:.6}"));

    // resolvent certificate at the enhanced-regime points, where delta < 1
    let mut points: Vec<(ShearProfile, f64, f64)> = Vec::new();
    for p in acceptance_profiles() {
        for &nu in &NU_GRID {
            points.push((p.clone(), nu, 1.0));
        }
    }
    for &k in &[0.25, 0.5, 2.0, 4.0] {
        points.push((ShearProfile::couette(), 1e-4, k));
    }
    let mut cert_fail = 0usize;
    let mut min_slack = f64::INFINITY;
    for (p, nu, k) in &points {
        let m = p.m();
        let delta = (nu / k.abs()).powf(1.0 / (m as f64 + 2.0));
        let grid = truncate_domain(p, *nu, *k, &TruncationPolicy::default())?;
        let nodes = grid.nodes();
        let base = assemble(p, &grid, *nu, *k, 0.0)?;
        let (vmin, vmax) = range_of(&base.potential);
        for i in 0..50 {
            let op = base.shifted(rng::uniform(&mut r, vmin, vmax));
            let g = if i % 2 == 0 { rng::complex_gaussian(&mut r, grid.n) } else { rng::smooth_bumps(&mut r, &nodes) };
            let c = resolvent_certificate(&op, p, delta, m, &g)?;
            if !(c.ineq_imaginary && c.ineq_outside && c.ineq_inside && c.ineq_full) {
                cert_fail += 1;
            }
            min_slack = c.slack.iter().cloned().fold(min_slack, f64::min);
        }
    }
    rec.metric("certificate_failures", cert_fail as f64);
    rec.metric("certificate_min_slack", min_slack);
    rec.require(cert_fail == 0, format!("{cert_fail} certificate evaluations failed"));
    Ok(())
}

fn range_of(v: &[f64]) -> (f64, f64) {
    v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)))
}

/// Factors of `v = y1 + y2^2` on `[-1, 1]^2`.
pub fn tensor_factors() -> Vec<ShearProfile> {
    let unit = DomainSpec::Interval { a: -1.0, b: 1.0 };
    vec![ShearProfile::couette_on(unit), ShearProfile::monomial(2)]
}

fn c10(rec: &mut Rec, o: &VerifyOptions) -> Result<()> {
    let (nu, k) = (1e-2, 1.0);
    let factors = tensor_factors();
    let cfg = TensorConfig { exec: o.exec, ..TensorConfig::default() };
    let rep = tensor_rate(&factors, nu, k, &cfg)?;
    let expected: f64 = factors.iter().map(|f| rate_target(nu, k, f.m())).sum::<Result<f64>>()?;
    rec.metric("sum_rate", rep.sum_rate);
    rec.require(rep.sum_rate == expected, format!("sum_rate {} != {expected}", rep.sum_rate));
    match rep.product_check {
        Some(pc) => {
            rec.metric("rel_err", pc.rel_err);
            rec.metric("checkpoints", pc.times.len() as f64);
            rec.require(pc.times.len() >= 10, format!("only {} checkpoints", pc.times.len()));
            rec.require(pc.passes(), format!("2D norm differs from the product by {:.3e}", pc.rel_err));
        }
        None => rec.require(false, "no product check"),
    }
    Ok(())
}
