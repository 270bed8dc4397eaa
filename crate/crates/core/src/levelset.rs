//! Level-set geometry of a shear profile: monotone decomposition, level
//! points, thickened level sets `E = {|v - lambda| < delta^m}`, their
//! `delta`-neighbourhoods and the odd cutoff built from the distance to `E`.
//!
//! All measures are computed piecewise-analytically: on each monotone piece
//! the preimage of an open band of values is a single interval whose ends are
//! located by bisection.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par::{self, Exec};
use crate::profiles::ShearProfile;

/// Default number of samples used to bracket sign changes of `v'`.
pub const SLOPE_SAMPLES: usize = 4096;

/// Closed interval `[lo, hi]`; used both for windows and for set components.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Span {
    pub lo: f64,
    pub hi: f64,
}

impl Span {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn is_empty(&self) -> bool {
        self.hi <= self.lo
    }

    pub fn contains(&self, y: f64) -> bool {
        y >= self.lo && y <= self.hi
    }

    pub fn distance(&self, y: f64) -> f64 {
        if y < self.lo {
            self.lo - y
        } else if y > self.hi {
            y - self.hi
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Up,
    Down,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonotonePiece {
    pub lo: f64,
    pub hi: f64,
    pub direction: Direction,
}

/// Bisection for a sign change of `f` on `[a, b]`, down to width `tol`
/// (or machine resolution when `tol == 0`).
pub fn bisect<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let mut fa = f(a);
    let fb = f(b);
    if fa == 0.0 {
        return a;
    }
    if fb == 0.0 {
        return b;
    }
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b || b - a <= tol {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm < 0.0) == (fa < 0.0) {
            a = mid;
            fa = fm;
        } else {
            b = mid;
        }
    }
    0.5 * (a + b)
}

fn check_window(p: &ShearProfile, w: Span) -> Result<()> {
    if !(w.lo.is_finite() && w.hi.is_finite() && w.lo < w.hi) {
        return Err(Error::InvalidParams(format!("window must be finite with lo < hi, got {w:?}")));
    }
    let d = p.domain();
    if w.lo < d.lo() {
        return Err(Error::OutOfDomain { profile: p.name().into(), y: w.lo });
    }
    if w.hi > d.hi() {
        return Err(Error::OutOfDomain { profile: p.name().into(), y: w.hi });
    }
    Ok(())
}

/// Split `window` into maximal pieces on which `v` is strictly monotone.
///
/// Breakpoints are sign changes of `v'`, bracketed on a uniform sample and
/// refined by bisection to width `tol`.
pub fn find_monotone_pieces(p: &ShearProfile, window: Span, tol: f64) -> Result<Vec<MonotonePiece>> {
    find_monotone_pieces_sampled(p, window, tol, SLOPE_SAMPLES)
}

pub fn find_monotone_pieces_sampled(
    p: &ShearProfile,
    window: Span,
    tol: f64,
    samples: usize,
) -> Result<Vec<MonotonePiece>> {
    check_window(p, window)?;
    if tol <= 0.0 {
        return Err(Error::InvalidParams("tol must be positive".into()));
    }
    let n = samples.max(16);
    let ys = crate::profiles::uniform_points(window.lo, window.hi, n + 1);
    let slopes: Vec<f64> = ys.iter().map(|&y| p.slope(y)).collect();

    let mut breaks = vec![window.lo];
    let mut last_sign = 0.0;
    let mut last_idx = 0usize;
    for (i, &d) in slopes.iter().enumerate() {
        if i > 0 && d == 0.0 && slopes[i - 1] == 0.0 {
            return Err(Error::DegenerateProfile { y: ys[i] });
        }
        if d == 0.0 {
            continue;
        }
        let s = d.signum();
        if last_sign != 0.0 && s != last_sign {
            let r = bisect(|y| p.slope(y), ys[last_idx], ys[i], tol);
            breaks.push(r);
        }
        last_sign = s;
        last_idx = i;
    }
    if last_sign == 0.0 {
        return Err(Error::DegenerateProfile { y: window.lo });
    }
    breaks.push(window.hi);
    breaks.dedup_by(|b, a| *b <= *a);

    let mut pieces = Vec::with_capacity(breaks.len() - 1);
    for w in breaks.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let dv = p.value(hi) - p.value(lo);
        if dv == 0.0 {
            return Err(Error::DegenerateProfile { y: 0.5 * (lo + hi) });
        }
        let direction = if dv > 0.0 { Direction::Up } else { Direction::Down };
        pieces.push(MonotonePiece { lo, hi, direction });
    }
    Ok(pieces)
}

/// Result of a set computation restricted to a window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetMeasure {
    pub measure: f64,
    pub intervals: Vec<Span>,
    /// The set reaches a window edge beyond which the domain continues, so
    /// `measure` is only a lower bound.
    pub truncation_saturated: bool,
}

/// Level-set machinery for one profile on one window.
///
/// Monotone pieces are computed once on the window widened by `reach` (and
/// clipped to the domain), which is what neighbourhoods of width up to
/// `reach` need.
#[derive(Debug, Clone)]
pub struct LevelGeometry<'a> {
    profile: &'a ShearProfile,
    window: Span,
    ext: Span,
    pieces: Vec<MonotonePiece>,
}

impl<'a> LevelGeometry<'a> {
    pub fn new(profile: &'a ShearProfile, window: Span, reach: f64) -> Result<Self> {
        check_window(profile, window)?;
        let d = profile.domain();
        let ext = Span::new((window.lo - reach).max(d.lo()), (window.hi + reach).min(d.hi()));
        let pieces = find_monotone_pieces(profile, ext, 1e-13 * (1.0 + ext.lo.abs().max(ext.hi.abs())))?;
        Ok(Self { profile, window, ext, pieces })
    }

    pub fn window(&self) -> Span {
        self.window
    }

    pub fn reach(&self) -> f64 {
        (self.window.lo - self.ext.lo).min(self.ext.hi - self.window.hi)
    }

    /// Monotone pieces of the widened window.
    pub fn pieces(&self) -> &[MonotonePiece] {
        &self.pieces
    }

    /// Monotone pieces restricted to the window.
    pub fn window_pieces(&self) -> Vec<MonotonePiece> {
        self.pieces
            .iter()
            .filter_map(|pc| {
                let lo = pc.lo.max(self.window.lo);
                let hi = pc.hi.min(self.window.hi);
                (hi > lo).then_some(MonotonePiece { lo, hi, direction: pc.direction })
            })
            .collect()
    }

    /// Sorted roots of `v = lambda` inside the window, one per piece at most.
    pub fn level_points(&self, lambda: f64) -> Vec<f64> {
        let v = |y: f64| self.profile.value(y) - lambda;
        let mut roots: Vec<f64> = Vec::new();
        for pc in self.window_pieces() {
            let (a, b) = (v(pc.lo), v(pc.hi));
            if a.min(b) <= 0.0 && a.max(b) >= 0.0 {
                let r = bisect(v, pc.lo, pc.hi, 0.0);
                if roots.last().is_none_or(|&q| (r - q).abs() > 1e-12 * (1.0 + r.abs())) {
                    roots.push(r);
                }
            }
        }
        roots
    }

    /// Components of `{lower < v < upper}` on the widened window.
    fn band(&self, lower: f64, upper: f64) -> Vec<Span> {
        let p = self.profile;
        let mut out: Vec<Span> = Vec::new();
        for pc in &self.pieces {
            let (vlo, vhi) = (p.value(pc.lo), p.value(pc.hi));
            let (vmin, vmax) = if vlo < vhi { (vlo, vhi) } else { (vhi, vlo) };
            if vmax <= lower || vmin >= upper {
                continue;
            }
            let root = |c: f64| bisect(|y| p.value(y) - c, pc.lo, pc.hi, 0.0);
            let (start, end) = match pc.direction {
                Direction::Up => (
                    if vlo >= lower { pc.lo } else { root(lower) },
                    if vhi <= upper { pc.hi } else { root(upper) },
                ),
                Direction::Down => (
                    if vlo <= upper { pc.lo } else { root(upper) },
                    if vhi >= lower { pc.hi } else { root(lower) },
                ),
            };
            if end > start {
                push_merged(&mut out, Span::new(start, end));
            }
        }
        out
    }

    /// `E = {|v - lambda| < delta^m}` on the widened window.
    pub fn thickened_full(&self, lambda: f64, delta: f64, m: usize) -> Vec<Span> {
        let eps = delta.powi(m as i32);
        self.band(lambda - eps, lambda + eps)
    }

    /// `E` restricted to the window.
    pub fn thickened(&self, lambda: f64, delta: f64, m: usize) -> SetMeasure {
        let full = self.thickened_full(lambda, delta, m);
        self.clip(&full)
    }

    /// `{y : dist(y, E) < delta}` restricted to the window.
    pub fn neighborhood(&self, lambda: f64, delta: f64, m: usize) -> SetMeasure {
        let full = self.thickened_full(lambda, delta, m);
        let mut grown: Vec<Span> = Vec::with_capacity(full.len());
        for s in full {
            push_merged(&mut grown, Span::new(s.lo - delta, s.hi + delta));
        }
        self.clip(&grown)
    }

    fn clip(&self, spans: &[Span]) -> SetMeasure {
        let w = self.window;
        let d = self.profile.domain();
        let lo_trunc = w.lo > d.lo();
        let hi_trunc = w.hi < d.hi();
        let mut intervals = Vec::new();
        let mut saturated = false;
        for s in spans {
            let c = Span::new(s.lo.max(w.lo), s.hi.min(w.hi));
            if c.is_empty() {
                continue;
            }
            if (lo_trunc && c.lo <= w.lo) || (hi_trunc && c.hi >= w.hi) {
                saturated = true;
            }
            intervals.push(c);
        }
        let measure = intervals.iter().map(Span::len).sum();
        SetMeasure { measure, intervals, truncation_saturated: saturated }
    }
}

fn push_merged(out: &mut Vec<Span>, s: Span) {
    if let Some(last) = out.last_mut() {
        if s.lo <= last.hi {
            last.hi = last.hi.max(s.hi);
            return;
        }
    }
    out.push(s);
}

/// Sorted roots of `v = lambda` in `window`.
pub fn level_set_points(p: &ShearProfile, lambda: f64, window: Span) -> Result<Vec<f64>> {
    Ok(LevelGeometry::new(p, window, 0.0)?.level_points(lambda))
}

/// Measure of `E^m_{lambda,delta}` inside `window`.
pub fn thickened_measure(p: &ShearProfile, lambda: f64, delta: f64, m: usize, window: Span) -> Result<SetMeasure> {
    check_delta(delta)?;
    Ok(LevelGeometry::new(p, window, 0.0)?.thickened(lambda, delta, m))
}

/// Measure of the `delta`-neighbourhood of `E^m_{lambda,delta}` inside `window`.
pub fn neighborhood_measure(
    p: &ShearProfile,
    lambda: f64,
    delta: f64,
    m: usize,
    window: Span,
) -> Result<SetMeasure> {
    check_delta(delta)?;
    Ok(LevelGeometry::new(p, window, delta)?.neighborhood(lambda, delta, m))
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParams(format!("delta must lie in (0,1), got {delta}")))
    }
}

/// Root data and measures for one `(lambda, delta, m)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelSetReport {
    pub lambda: f64,
    pub delta: f64,
    pub m: usize,
    pub roots: Vec<f64>,
    pub card: usize,
    pub measure_e: f64,
    pub measure_ecal: f64,
    /// Either measure is a truncation-limited lower bound.
    pub unbounded: bool,
    pub ratio: f64,
}

pub fn level_set_report(p: &ShearProfile, lambda: f64, delta: f64, m: usize, window: Span) -> Result<LevelSetReport> {
    check_delta(delta)?;
    let geo = LevelGeometry::new(p, window, delta)?;
    let roots = geo.level_points(lambda);
    let e = geo.thickened(lambda, delta, m);
    let ecal = geo.neighborhood(lambda, delta, m);
    Ok(LevelSetReport {
        lambda,
        delta,
        m,
        card: roots.len(),
        roots,
        measure_e: e.measure,
        measure_ecal: ecal.measure,
        unbounded: e.truncation_saturated || ecal.truncation_saturated,
        ratio: ecal.measure / delta,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureRow {
    pub lambda: f64,
    pub delta: f64,
    pub m: usize,
    pub measure_e: f64,
    pub measure_ecal: f64,
    pub ratio: f64,
    pub saturated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureSweep {
    pub rows: Vec<MeasureRow>,
    /// Supremum of `m(Ecal)/delta` over unsaturated rows.
    pub sup_ratio: Option<f64>,
    /// Per-delta supremum over unsaturated rows, in `delta_grid` order.
    pub sup_by_delta: Vec<(f64, Option<f64>)>,
}

impl MeasureSweep {
    /// Largest ratio between consecutive per-delta suprema (either direction).
    pub fn max_halving_factor(&self) -> Option<f64> {
        let sups: Vec<f64> = self.sup_by_delta.iter().filter_map(|(_, s)| *s).collect();
        sups.windows(2).map(|w| (w[0] / w[1]).max(w[1] / w[0])).reduce(f64::max)
    }
}

/// Scan `m(Ecal)/delta` over a `(lambda, delta)` grid. Rows are ordered by
/// `lambda` then `delta` as given.
pub fn measure_sweep(
    p: &ShearProfile,
    window: Span,
    lambda_grid: &[f64],
    delta_grid: &[f64],
    m: usize,
    exec: Exec,
) -> Result<MeasureSweep> {
    if lambda_grid.is_empty() || delta_grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    for &d in delta_grid {
        check_delta(d)?;
    }
    let reach = delta_grid.iter().cloned().fold(0.0, f64::max);
    let geo = LevelGeometry::new(p, window, reach)?;
    let per_lambda = par::map(exec, lambda_grid, |&lambda| {
        delta_grid
            .iter()
            .map(|&delta| {
                let e = geo.thickened(lambda, delta, m);
                let ecal = geo.neighborhood(lambda, delta, m);
                MeasureRow {
                    lambda,
                    delta,
                    m,
                    measure_e: e.measure,
                    measure_ecal: ecal.measure,
                    ratio: ecal.measure / delta,
                    saturated: e.truncation_saturated || ecal.truncation_saturated,
                }
            })
            .collect::<Vec<_>>()
    });
    let rows: Vec<MeasureRow> = per_lambda.into_iter().flatten().collect();
    let sup_of = |it: &mut dyn Iterator<Item = &MeasureRow>| {
        it.filter(|r| !r.saturated).map(|r| r.ratio).reduce(f64::max)
    };
    let sup_ratio = sup_of(&mut rows.iter());
    let sup_by_delta = delta_grid
        .iter()
        .map(|&d| (d, sup_of(&mut rows.iter().filter(|r| r.delta == d))))
        .collect();
    Ok(MeasureSweep { rows, sup_ratio, sup_by_delta })
}

/// `phi(t) = sign(t) min(|t|, 1)`.
#[inline]
pub fn clipped_identity(t: f64) -> f64 {
    t.clamp(-1.0, 1.0)
}

/// The odd cutoff `chi(y) = phi(sign(v(y) - lambda) dist(y, E) / delta)`.
#[derive(Debug, Clone)]
pub struct Cutoff<'a> {
    profile: &'a ShearProfile,
    lambda: f64,
    delta: f64,
    e: Vec<Span>,
}

impl<'a> Cutoff<'a> {
    pub fn new(p: &'a ShearProfile, lambda: f64, delta: f64, m: usize, window: Span) -> Result<Self> {
        check_delta(delta)?;
        let geo = LevelGeometry::new(p, window, delta)?;
        let e = geo.thickened_full(lambda, delta, m);
        Ok(Self { profile: p, lambda, delta, e })
    }

    /// Components of `E` used for the distance (window widened by `delta`).
    pub fn set(&self) -> &[Span] {
        &self.e
    }

    /// Distance from `y` to `E`; `+inf` when `E` is empty.
    pub fn distance(&self, y: f64) -> f64 {
        // components are sorted and disjoint
        let idx = self.e.partition_point(|s| s.hi < y);
        let mut d = f64::INFINITY;
        if idx < self.e.len() {
            d = d.min(self.e[idx].distance(y));
        }
        if idx > 0 {
            d = d.min(self.e[idx - 1].distance(y));
        }
        d
    }

    /// True when `dist(y, E) < delta`.
    pub fn in_neighborhood(&self, y: f64) -> bool {
        self.distance(y) < self.delta
    }

    pub fn eval(&self, y: f64) -> f64 {
        let diff = self.profile.value(y) - self.lambda;
        let s = if diff > 0.0 {
            1.0
        } else if diff < 0.0 {
            -1.0
        } else {
            0.0
        };
        let d = self.distance(y);
        if d.is_infinite() {
            return s;
        }
        clipped_identity(s * d / self.delta)
    }
}

/// One-shot evaluation of the cutoff at `y`.
pub fn cutoff_chi(p: &ShearProfile, lambda: f64, delta: f64, m: usize, window: Span, y: f64) -> Result<f64> {
    Ok(Cutoff::new(p, lambda, delta, m, window)?.eval(y))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles::ShearProfile;
    use std::f64::consts::PI;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn monotone_pieces_examples() {
        let k = find_monotone_pieces(&ShearProfile::kolmogorov(), Span::new(0.0, 2.0 * PI), 1e-13).unwrap();
        assert_eq!(k.len(), 3);
        assert!(close(k[0].hi, PI / 2.0, 1e-12));
        assert!(close(k[1].hi, 1.5 * PI, 1e-12));
        let dirs: Vec<_> = k.iter().map(|p| p.direction).collect();
        assert_eq!(dirs, vec![Direction::Up, Direction::Down, Direction::Up]);

        let c = find_monotone_pieces(&ShearProfile::couette(), Span::new(-5.0, 5.0), 1e-13).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].direction, Direction::Up);

        let p = find_monotone_pieces(&ShearProfile::poiseuille(), Span::new(-1.0, 1.0), 1e-13).unwrap();
        assert_eq!(p.len(), 2);
        assert!(close(p[0].hi, 0.0, 1e-12));
        assert_eq!(p[0].direction, Direction::Down);
        assert_eq!(p[1].direction, Direction::Up);
    }

    #[test]
    fn cubic_has_single_piece() {
        let p = find_monotone_pieces(&ShearProfile::monomial(3), Span::new(-1.0, 1.0), 1e-13).unwrap();
        assert_eq!(p.len(), 1);
    }

    #[test]
    fn flat_profile_is_degenerate() {
        let flat = ShearProfile::polynomial("flat", vec![1.0], 1, crate::profiles::DomainSpec::FullLine, None).unwrap();
        assert!(matches!(
            find_monotone_pieces(&flat, Span::new(-1.0, 1.0), 1e-12),
            Err(Error::DegenerateProfile { .. })
        ));
    }

    #[test]
    fn level_points_examples() {
        let k = ShearProfile::kolmogorov();
        let w = Span::new(0.0, 2.0 * PI);
        let r = level_set_points(&k, 0.5, w).unwrap();
        assert_eq!(r.len(), 2);
        assert!(close(r[0], PI / 6.0, 1e-12) && close(r[1], 5.0 * PI / 6.0, 1e-12));
        assert!(level_set_points(&k, 2.0, w).unwrap().is_empty());

        let p = level_set_points(&ShearProfile::poiseuille(), 0.25, Span::new(-1.0, 1.0)).unwrap();
        assert_eq!(p.len(), 2);
        assert!(close(p[0], -0.5, 1e-12) && close(p[1], 0.5, 1e-12));

        let z = level_set_points(&ShearProfile::poiseuille(), 0.0, Span::new(-1.0, 1.0)).unwrap();
        assert_eq!(z.len(), 1);
    }

    #[test]
    fn thickened_examples() {
        let c = thickened_measure(&ShearProfile::couette(), 0.0, 0.1, 1, Span::new(-5.0, 5.0)).unwrap();
        assert!(close(c.measure, 0.2, 1e-12));
        assert_eq!(c.intervals.len(), 1);
        assert!(!c.truncation_saturated);

        let p = thickened_measure(&ShearProfile::poiseuille(), 0.0, 0.1, 2, Span::new(-1.0, 1.0)).unwrap();
        assert!(close(p.measure, 0.2, 1e-12));
        assert!(close(p.intervals[0].lo, -0.1, 1e-12) && close(p.intervals[0].hi, 0.1, 1e-12));

        let tc = thickened_measure(&ShearProfile::taylor_couette(), 0.0, 0.1, 2, Span::new(1.0, 1000.0)).unwrap();
        assert!(tc.truncation_saturated);
        assert_eq!(tc.intervals.len(), 1);
        assert!(close(tc.intervals[0].lo, 10.0, 1e-9));
        assert_eq!(tc.intervals[0].hi, 1000.0);
    }

    #[test]
    fn neighborhood_examples() {
        let c = neighborhood_measure(&ShearProfile::couette(), 0.0, 0.1, 1, Span::new(-5.0, 5.0)).unwrap();
        assert!(close(c.measure, 0.4, 1e-12));
        let p = neighborhood_measure(&ShearProfile::poiseuille(), 0.0, 0.1, 2, Span::new(-1.0, 1.0)).unwrap();
        assert!(close(p.measure, 0.4, 1e-12));
        assert!(!p.truncation_saturated);
        let k = neighborhood_measure(&ShearProfile::kolmogorov(), 0.0, 0.1, 1, Span::new(0.0, 2.0 * PI)).unwrap();
        let expected = 4.0 * 0.1f64.asin() + 0.4;
        assert!(close(k.measure, expected, 1e-12), "{} vs {}", k.measure, expected);
        assert!(close(expected, 0.8007, 1e-4));
    }

    #[test]
    fn couette_sweep_sup_is_four() {
        let lambdas = crate::profiles::uniform_points(-3.0, 3.0, 61);
        let s = measure_sweep(
            &ShearProfile::couette(),
            Span::new(-5.0, 5.0),
            &lambdas,
            &[0.2, 0.1, 0.05, 0.025],
            1,
            Exec::Auto,
        )
        .unwrap();
        assert!(close(s.sup_ratio.unwrap(), 4.0, 1e-9));
        assert!(s.rows.iter().all(|r| !r.saturated));
    }

    #[test]
    fn taylor_couette_sweep_flags_zero_level() {
        let p = ShearProfile::taylor_couette();
        let lambdas = crate::profiles::uniform_points(-0.5, 1.5, 41);
        let s = measure_sweep(&p, Span::new(1.0, 1000.0), &lambdas, &[0.2, 0.1], 2, Exec::Auto).unwrap();
        assert!(s.rows.iter().filter(|r| r.lambda.abs() < 1e-12).all(|r| r.saturated));
        assert!(s.sup_ratio.unwrap().is_finite());
    }

    #[test]
    fn cutoff_examples() {
        let c = ShearProfile::couette();
        let w = Span::new(-5.0, 5.0);
        assert!(close(cutoff_chi(&c, 0.0, 0.1, 1, w, 0.5).unwrap(), 1.0, 1e-15));
        assert!(close(cutoff_chi(&c, 0.0, 0.1, 1, w, 0.15).unwrap(), 0.5, 1e-12));
        assert!(close(cutoff_chi(&c, 0.0, 0.1, 1, w, -0.5).unwrap(), -1.0, 1e-15));
        // empty E: chi is the sign of v - lambda
        assert_eq!(cutoff_chi(&c, 100.0, 0.1, 1, w, 0.0).unwrap(), -1.0);
    }

    #[test]
    fn delta_out_of_range() {
        let c = ShearProfile::couette();
        assert!(thickened_measure(&c, 0.0, 1.0, 1, Span::new(-1.0, 1.0)).is_err());
        assert!(neighborhood_measure(&c, 0.0, 0.0, 1, Span::new(-1.0, 1.0)).is_err());
    }
}
