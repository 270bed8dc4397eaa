//! Command dispatch, artifacts and exit codes for the `shearlab` binary.
//!
//! Exit codes: 0 success, 1 configuration or I/O error, 2 a verification
//! criterion failed, 3 numerical non-convergence. Every failure produces a
//! [`Diagnostic`], which the binary prints to stderr and which is also written
//! to `diagnostic.json` in the output directory.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::levelset::{measure_sweep, Span};
use crate::par::Exec;
use crate::profiles::{
    check_infinity_nondegeneracy, check_nondegeneracy, sample_window, uniform_points, DEFAULT_PROBE_RADII,
};
use crate::report::{emit_json, emit_report, Format, Table, Tabular};
use crate::resolvent::{pseudospectral_abscissa, resolvent_profile, PsiSearch, ResolventPoint};
use crate::semigroup::{operator_norm_decay, wei_bound_with, DecayConfig};
use crate::sweep::{counterexample_scan, counterexample_verdict, fit_scaling, psi_sweep, Regime, SweepConfig};
use crate::tensor::{tensor_rate, TensorConfig};
use crate::verify::{verify_all, VerifyOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_CRITERION: i32 = 2;
pub const EXIT_NONCONVERGED: i32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    ProfileCheck,
    LevelsetMeasure,
    ResolventPsi,
    SemigroupDecay,
    SweepScaling,
    TensorCheck,
    Counterexample,
    VerifyAll,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::ProfileCheck => "profile-check",
            Command::LevelsetMeasure => "levelset-measure",
            Command::ResolventPsi => "resolvent-psi",
            Command::SemigroupDecay => "semigroup-decay",
            Command::SweepScaling => "sweep-scaling",
            Command::TensorCheck => "tensor-check",
            Command::Counterexample => "counterexample",
            Command::VerifyAll => "verify-all",
        }
    }
}

/// Machine-readable failure report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub command: String,
    pub exit_code: i32,
    pub kind: String,
    pub message: String,
    #[serde(default)]
    pub details: serde_json::Value,
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub format: Format,
    /// Takes precedence over the environment override and the config.
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub exit_code: i32,
    pub out_dir: PathBuf,
    pub artifacts: Vec<PathBuf>,
    /// Human-readable summary lines for stdout.
    pub lines: Vec<String>,
    pub diagnostic: Option<Diagnostic>,
}

pub fn exit_code_for(e: &Error) -> i32 {
    match e {
        Error::NoConvergence { .. } | Error::SingularMatrix | Error::WindowTooSmall { .. } | Error::ZeroVector => {
            EXIT_NONCONVERGED
        }
        Error::FactorCheckFailed { .. } | Error::DegenerateProfile { .. } | Error::EdgeNotDecayed { .. } => {
            EXIT_CRITERION
        }
        _ => EXIT_CONFIG,
    }
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::OutOfDomain { .. } => "out_of_domain",
        Error::OrderUnavailable { .. } => "order_unavailable",
        Error::EmptyGrid => "empty_grid",
        Error::DegenerateProfile { .. } => "degenerate_profile",
        Error::InvalidGrid(_) => "invalid_grid",
        Error::LengthMismatch { .. } => "length_mismatch",
        Error::ZeroVector => "zero_vector",
        Error::EdgeNotDecayed { .. } => "edge_not_decayed",
        Error::SingularMatrix => "singular_matrix",
        Error::NoConvergence { .. } => "no_convergence",
        Error::WindowTooSmall { .. } => "window_too_small",
        Error::GridMismatch => "grid_mismatch",
        Error::InvalidParams(_) => "invalid_params",
        Error::InsufficientRows { .. } => "insufficient_rows",
        Error::DegenerateDesign(_) => "degenerate_design",
        Error::FactorCheckFailed { .. } => "factor_check_failed",
        Error::GridTooLarge { .. } => "grid_too_large",
        Error::EmptyResults => "empty_results",
        Error::Config(_) => "config",
        Error::Io(_) => "io",
        Error::Json(_) => "json",
    }
}

impl Diagnostic {
    pub fn from_error(command: &str, e: &Error) -> Self {
        Self {
            command: command.to_string(),
            exit_code: exit_code_for(e),
            kind: error_kind(e).to_string(),
            message: e.to_string(),
            details: serde_json::Value::Null,
        }
    }
}

/// Output directory: explicit `out`, then the environment, then the config.
pub fn resolve_out_dir(out: Option<&Path>, cfg: &RunConfig) -> PathBuf {
    out.map_or_else(|| cfg.resolved_output_dir(), Path::to_path_buf)
}

struct Ctx<'a> {
    cfg: &'a RunConfig,
    format: Format,
    dir: PathBuf,
    exec: Exec,
    artifacts: Vec<PathBuf>,
    lines: Vec<String>,
    /// Set when the run completes but a check fails.
    failure: Option<Diagnostic>,
}

impl Ctx<'_> {
    fn table(&mut self, t: Table, stem: &str) -> Result<()> {
        let p = emit_report(&t, self.format, &self.dir, stem)?;
        self.artifacts.push(p);
        Ok(())
    }

    fn json<T: Serialize + ?Sized>(&mut self, v: &T, name: &str) -> Result<()> {
        let p = emit_json(v, &self.dir, name)?;
        self.artifacts.push(p);
        Ok(())
    }

    fn fail(&mut self, code: i32, kind: &str, message: impl Into<String>, details: serde_json::Value) {
        if self.failure.as_ref().is_none_or(|d| d.exit_code < code && code == EXIT_CRITERION) {
            self.failure = Some(Diagnostic {
                command: String::new(),
                exit_code: code,
                kind: kind.into(),
                message: message.into(),
                details,
            });
        }
    }

    fn search(&self) -> PsiSearch {
        PsiSearch { exec: self.exec, ..self.cfg.solver }
    }

    fn decay(&self) -> DecayConfig {
        DecayConfig { seed: self.cfg.seed, exec: self.exec, ..self.cfg.decay }
    }
}

/// Run `cmd`. Never panics on bad input; all failures become exit codes.
pub fn run_command(cmd: Command, cfg: &RunConfig, opts: &RunOptions) -> Outcome {
    let dir = resolve_out_dir(opts.out.as_deref(), cfg);
    let exec = if cfg.workers == Some(1) { Exec::Sequential } else { Exec::Auto };
    let mut ctx = Ctx {
        cfg,
        format: opts.format,
        dir: dir.clone(),
        exec,
        artifacts: Vec::new(),
        lines: Vec::new(),
        failure: None,
    };
    let res = cfg.validate().and_then(|_| dispatch(cmd, &mut ctx));
    let diagnostic = match res {
        Err(e) => Some(Diagnostic::from_error(cmd.name(), &e)),
        Ok(()) => ctx.failure.take().map(|mut d| {
            d.command = cmd.name().to_string();
            d
        }),
    };
    let exit_code = diagnostic.as_ref().map_or(EXIT_OK, |d| d.exit_code);
    if let Some(d) = &diagnostic {
        if let Ok(p) = emit_json(d, &dir, "diagnostic.json") {
            ctx.artifacts.push(p);
        }
    }
    Outcome { exit_code, out_dir: dir, artifacts: ctx.artifacts, lines: ctx.lines, diagnostic }
}

fn dispatch(cmd: Command, ctx: &mut Ctx) -> Result<()> {
    match cmd {
        Command::ProfileCheck => profile_check(ctx),
        Command::LevelsetMeasure => levelset_measure(ctx),
        Command::ResolventPsi => resolvent_psi(ctx),
        Command::SemigroupDecay => semigroup_decay(ctx),
        Command::SweepScaling => sweep_scaling(ctx),
        Command::TensorCheck => tensor_check(ctx),
        Command::Counterexample => counterexample(ctx),
        Command::VerifyAll => verify(ctx),
    }
}

fn probe_radii(cfg: &RunConfig) -> Vec<f64> {
    if cfg.probe_radii.is_empty() {
        DEFAULT_PROBE_RADII.to_vec()
    } else {
        cfg.probe_radii.clone()
    }
}

fn profile_check(ctx: &mut Ctx) -> Result<()> {
    let p = ctx.cfg.profile.build()?;
    let (lo, hi) = sample_window(p.domain(), 20.0);
    let local = check_nondegeneracy(&p, &uniform_points(lo, hi, 2001))?;
    let inf = check_infinity_nondegeneracy(&p, &probe_radii(ctx.cfg))?;
    let report = json!({
        "profile": p.name(),
        "m": p.m(),
        "domain": p.domain(),
        "local": local,
        "infinity": inf,
        "pass": local.pass && inf.pass,
    });
    ctx.json(&report, "profile_check.json")?;
    ctx.lines.push(format!("{}: local {}, infinity {}", p.name(), verdict(local.pass), verdict(inf.pass)));
    if !local.pass {
        ctx.fail(EXIT_CRITERION, "criterion_failed", "local non-degeneracy failed", json!(local));
    } else if !inf.pass {
        ctx.fail(EXIT_CRITERION, "criterion_failed", "infinity non-degeneracy failed", json!(inf));
    }
    Ok(())
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "pass"
    } else {
        "FAIL"
    }
}

fn nonempty<'a>(v: &'a [f64], name: &str) -> Result<&'a [f64]> {
    if v.is_empty() {
        Err(Error::Config(format!("`{name}` must be a nonempty list")))
    } else {
        Ok(v)
    }
}

fn levelset_measure(ctx: &mut Ctx) -> Result<()> {
    let cfg = ctx.cfg;
    let p = cfg.profile.build()?;
    let window = cfg.window.unwrap_or_else(|| {
        let (lo, hi) = sample_window(p.domain(), 20.0);
        Span::new(lo, hi)
    });
    let m = cfg.m.unwrap_or(p.m());
    let lambdas = nonempty(&cfg.lambda_grid, "lambda_grid")?;
    let deltas = nonempty(&cfg.delta_grid, "delta_grid")?;
    let sweep = measure_sweep(&p, window, lambdas, deltas, m, ctx.exec)?;
    ctx.table(sweep.table(), "measure_sweep")?;
    let summary = json!({
        "profile": p.name(),
        "m": m,
        "window": window,
        "sup_ratio": sweep.sup_ratio,
        "sup_by_delta": sweep.sup_by_delta,
        "max_halving_factor": sweep.max_halving_factor(),
        "saturated_rows": sweep.rows.iter().filter(|r| r.saturated).count(),
    });
    ctx.json(&summary, "measure_summary.json")?;
    ctx.lines.push(format!("{}: sup m(Ecal)/delta = {:?}", p.name(), sweep.sup_ratio));
    Ok(())
}

fn resolvent_psi(ctx: &mut Ctx) -> Result<()> {
    let cfg = ctx.cfg;
    let p = cfg.profile.build()?;
    let (nu, k) = (cfg.require_nu()?, cfg.require_k()?);
    let search = ctx.search();
    let est = pseudospectral_abscissa(&p, nu, k, &cfg.grid, &search)?;
    let scan: Vec<ResolventPoint> = if cfg.lambda_grid.is_empty() {
        est.scan
            .iter()
            .map(|&(lambda, s)| ResolventPoint { lambda, sigma_min: Some(s), error: None })
            .collect()
    } else {
        resolvent_profile(&p, nu, k, &cfg.lambda_grid, &cfg.grid, &search)?
    };
    ctx.table(scan.table(), "resolvent_scan")?;
    ctx.json(&est, "psi.json")?;
    ctx.lines.push(format!(
        "{}: psi = {:.6e} at lambda* = {:.6}, grid converged: {}",
        p.name(),
        est.psi,
        est.lambda_star,
        est.converged()
    ));
    if est.stalled || !est.converged() {
        ctx.fail(
            EXIT_NONCONVERGED,
            "no_convergence",
            "psi changed by more than 1% under grid or truncation doubling, or the search stalled",
            json!({"psi": est.psi, "psi_refined_grid": est.psi_refined_grid, "truncation": est.truncation, "stalled": est.stalled}),
        );
    }
    Ok(())
}

fn semigroup_decay(ctx: &mut Ctx) -> Result<()> {
    let cfg = ctx.cfg;
    let p = cfg.profile.build()?;
    let nu = cfg.require_nu()?;
    let k = cfg.k.ok_or_else(|| Error::Config("missing field `k`".into()))?;
    let series = operator_norm_decay(&p, nu, k, None, None, &cfg.grid, &ctx.decay())?;
    ctx.table(series.table(), "decay")?;
    let mut summary = json!({
        "profile": p.name(),
        "nu": nu,
        "k": k,
        "fitted_rate": series.fitted_rate,
        "fit_window": series.fit_window,
        "residual": series.residual,
        "method": series.method,
        "dt": series.dt,
    });
    let mut line = format!("{}: fitted rate {:.6e}", p.name(), series.fitted_rate);
    if k != 0.0 {
        let est = pseudospectral_abscissa(&p, nu, k, &cfg.grid, &ctx.search())?;
        let wei = wei_bound_with(&series, est.psi, Some((&est.grid, est.nu, est.k)))?;
        let rate_ok = series.fitted_rate >= est.psi * 0.98;
        summary["psi"] = json!(est.psi);
        summary["bound_check"] = json!(wei);
        summary["rate_at_least_psi"] = json!(rate_ok);
        summary["verdict"] = json!(wei.holds && rate_ok);
        line.push_str(&format!(", psi {:.6e}, bound {}", est.psi, verdict(wei.holds && rate_ok)));
        if !(wei.holds && rate_ok) {
            ctx.fail(EXIT_CRITERION, "criterion_failed", "semigroup bound check failed", summary.clone());
        }
    }
    ctx.json(&summary, "decay_summary.json")?;
    ctx.lines.push(line);
    Ok(())
}

fn sweep_scaling(ctx: &mut Ctx) -> Result<()> {
    let cfg = ctx.cfg;
    let p = cfg.profile.build()?;
    let sweep_cfg = SweepConfig {
        policy: cfg.grid,
        search: ctx.search(),
        semigroup: cfg.sweep_semigroup,
        decay: ctx.decay(),
        exec: ctx.exec,
    };
    let table = psi_sweep(&p, nonempty(&cfg.nu_list, "nu_list")?, nonempty(&cfg.k_list, "k_list")?, &sweep_cfg)?;
    ctx.table(table.table(), "rate_table")?;
    let fits: Vec<serde_json::Value> = [Regime::Enhanced, Regime::Taylor]
        .into_iter()
        .map(|r| match fit_scaling(&table, r) {
            Ok(f) => json!({"regime": r, "fit": f}),
            Err(e) => json!({"regime": r, "error": e.to_string()}),
        })
        .collect();
    ctx.json(&fits, "scaling_fit.json")?;
    ctx.json(&table, "rate_table.json")?;
    for f in &fits {
        ctx.lines.push(f.to_string());
    }
    let violations = table.lower_bound_violations();
    if !violations.is_empty() {
        let pts: Vec<(f64, f64)> = violations.iter().map(|r| (r.nu, r.k)).collect();
        ctx.fail(EXIT_CRITERION, "criterion_failed", "psi below the lower-bound floor", json!(pts));
    }
    let bad: Vec<(f64, f64)> = table.rows.iter().filter(|r| !r.grid_converged).map(|r| (r.nu, r.k)).collect();
    if !bad.is_empty() {
        ctx.fail(EXIT_NONCONVERGED, "no_convergence", "rows without grid convergence", json!(bad));
    }
    Ok(())
}

fn tensor_check(ctx: &mut Ctx) -> Result<()> {
    let cfg = ctx.cfg;
    if cfg.tensor_factors.is_empty() {
        return Err(Error::Config("`tensor_factors` must list at least one profile".into()));
    }
    let factors = cfg.tensor_factors.iter().map(|f| f.build()).collect::<Result<Vec<_>>>()?;
    let (nu, k) = (cfg.require_nu()?, cfg.require_k()?);
    let tcfg = TensorConfig { exec: ctx.exec, ..cfg.tensor };
    let rep = tensor_rate(&factors, nu, k, &tcfg)?;
    ctx.json(&rep, "tensor.json")?;
    ctx.lines.push(format!("sum rate {:.6e}", rep.sum_rate));
    if let Some(pc) = &rep.product_check {
        ctx.lines.push(format!("2D vs product: max rel err {:.3e}", pc.rel_err));
        if !pc.passes() {
            ctx.fail(EXIT_CRITERION, "criterion_failed", "2D norm does not match the product of 1D norms", json!(pc.rel_err));
        }
    }
    Ok(())
}

fn counterexample(ctx: &mut Ctx) -> Result<()> {
    let cfg = ctx.cfg;
    let (nu, k) = (cfg.require_nu()?, cfg.require_k()?);
    let lengths = nonempty(&cfg.l_list, "L_list")?;
    let sweep_cfg = SweepConfig { policy: cfg.grid, search: ctx.search(), exec: ctx.exec, ..SweepConfig::default() };
    let rows = counterexample_scan(nu, k, lengths, &sweep_cfg)?;
    ctx.table(rows.table(), "counterexample")?;
    let v = counterexample_verdict(&rows);
    ctx.json(&json!({"rows": rows, "verdict": v}), "counterexample.json")?;
    for r in &rows {
        ctx.lines.push(format!("L = {}: psi = {:.6e}", r.length, r.psi));
    }
    if v == Some(false) {
        ctx.fail(EXIT_CRITERION, "criterion_failed", "psi does not collapse as the truncation grows", json!(rows));
    }
    Ok(())
}

fn verify(ctx: &mut Ctx) -> Result<()> {
    let summary = verify_all(&VerifyOptions { seed: ctx.cfg.seed, exec: ctx.exec });
    ctx.json(&summary, "summary.json")?;
    for c in &summary.criteria {
        ctx.lines.push(c.line());
    }
    let failed: Vec<u8> = summary.criteria.iter().filter(|c| !c.passed).map(|c| c.id).collect();
    let numeric = summary.criteria.iter().any(|c| !c.passed && !c.nonconverged);
    if !failed.is_empty() {
        let code = if numeric { EXIT_CRITERION } else { EXIT_NONCONVERGED };
        let notes: Vec<_> = summary.criteria.iter().filter(|c| !c.passed).map(|c| json!({"id": c.id, "notes": c.notes})).collect();
        ctx.fail(code, "criterion_failed", format!("criteria {failed:?} failed"), json!(notes));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code_for(&Error::Config("x".into())), EXIT_CONFIG);
        assert_eq!(exit_code_for(&Error::NoConvergence { iterations: 1, best: 0.0 }), EXIT_NONCONVERGED);
        let f = Error::FactorCheckFailed { profile: "p".into(), reason: "r".into() };
        assert_eq!(exit_code_for(&f), EXIT_CRITERION);
    }

    #[test]
    fn explicit_out_wins() {
        let cfg = RunConfig::default();
        assert_eq!(resolve_out_dir(Some(Path::new("/tmp/x")), &cfg), PathBuf::from("/tmp/x"));
    }
}
