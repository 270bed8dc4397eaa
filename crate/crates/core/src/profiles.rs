//! Shear profiles `v(y)` on one-dimensional cross-sections.
//!
//! Every built-in profile carries closed-form derivatives up to
//! [`MAX_ORDER`], its non-degeneracy order `m` and, for unbounded
//! cross-sections, a claimed lower bound `c0` for `|v'|` at infinity.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Highest derivative order exposed by built-in profiles.
pub const MAX_ORDER: usize = 8;

/// Default threshold for the pointwise non-degeneracy sums.
pub const NONDEGENERACY_TOL: f64 = 1e-12;

/// One-dimensional cross-section.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DomainSpec {
    FullLine,
    HalfLineLeft { b: f64 },
    HalfLineRight { a: f64 },
    Interval { a: f64, b: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainKind {
    FullLine,
    HalfLineLeft,
    HalfLineRight,
    Interval,
}

impl DomainSpec {
    pub fn interval(a: f64, b: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(Error::InvalidParams(format!("interval needs finite a < b, got ({a}, {b})")));
        }
        Ok(DomainSpec::Interval { a, b })
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            DomainSpec::FullLine => Ok(()),
            DomainSpec::HalfLineLeft { b } if b.is_finite() => Ok(()),
            DomainSpec::HalfLineRight { a } if a.is_finite() => Ok(()),
            DomainSpec::Interval { a, b } => Self::interval(a, b).map(|_| ()),
            _ => Err(Error::InvalidParams(format!("bad domain endpoint in {self:?}"))),
        }
    }

    pub fn kind(&self) -> DomainKind {
        match self {
            DomainSpec::FullLine => DomainKind::FullLine,
            DomainSpec::HalfLineLeft { .. } => DomainKind::HalfLineLeft,
            DomainSpec::HalfLineRight { .. } => DomainKind::HalfLineRight,
            DomainSpec::Interval { .. } => DomainKind::Interval,
        }
    }

    /// Left endpoint, `-inf` when unbounded.
    pub fn lo(&self) -> f64 {
        match *self {
            DomainSpec::HalfLineRight { a } | DomainSpec::Interval { a, .. } => a,
            _ => f64::NEG_INFINITY,
        }
    }

    /// Right endpoint, `+inf` when unbounded.
    pub fn hi(&self) -> f64 {
        match *self {
            DomainSpec::HalfLineLeft { b } | DomainSpec::Interval { b, .. } => b,
            _ => f64::INFINITY,
        }
    }

    pub fn is_bounded(&self) -> bool {
        matches!(self, DomainSpec::Interval { .. })
    }

    /// Membership in the closed domain.
    pub fn contains(&self, y: f64) -> bool {
        y >= self.lo() && y <= self.hi()
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Shape {
    Couette,
    Poiseuille,
    Kolmogorov,
    Monomial(u32),
    TaylorCouette,
    Tanh,
    Polynomial(Vec<f64>),
}

/// A velocity profile `v` on a cross-section.
#[derive(Debug, Clone, PartialEq)]
pub struct ShearProfile {
    name: String,
    shape: Shape,
    m: usize,
    domain: DomainSpec,
    c0_hint: Option<f64>,
}

impl ShearProfile {
    /// `v(y) = y` on the real line.
    pub fn couette() -> Self {
        Self::couette_on(DomainSpec::FullLine)
    }

    pub fn couette_on(domain: DomainSpec) -> Self {
        let c0_hint = (!domain.is_bounded()).then_some(1.0);
        Self { name: "couette".into(), shape: Shape::Couette, m: 1, domain, c0_hint }
    }

    /// `v(y) = y^2` on `[-1, 1]`.
    pub fn poiseuille() -> Self {
        Self::poiseuille_on(DomainSpec::Interval { a: -1.0, b: 1.0 })
    }

    /// `v(y) = y^2` on the real line.
    pub fn poiseuille_line() -> Self {
        Self::poiseuille_on(DomainSpec::FullLine)
    }

    pub fn poiseuille_on(domain: DomainSpec) -> Self {
        let c0_hint = (!domain.is_bounded()).then_some(1.0);
        Self { name: "poiseuille".into(), shape: Shape::Poiseuille, m: 2, domain, c0_hint }
    }

    /// `v(y) = sin y` on `[0, 2 pi]`.
    pub fn kolmogorov() -> Self {
        Self {
            name: "kolmogorov".into(),
            shape: Shape::Kolmogorov,
            m: 2,
            domain: DomainSpec::Interval { a: 0.0, b: 2.0 * std::f64::consts::PI },
            c0_hint: None,
        }
    }

    /// `v(y) = y^p` on `[-1, 1]`, non-degenerate of order `p`.
    pub fn monomial(degree: u32) -> Self {
        Self::monomial_on(degree, DomainSpec::Interval { a: -1.0, b: 1.0 })
    }

    pub fn monomial_on(degree: u32, domain: DomainSpec) -> Self {
        assert!(degree >= 1, "monomial degree must be positive");
        let c0_hint = (!domain.is_bounded()).then_some(1.0);
        Self {
            name: format!("monomial{degree}"),
            shape: Shape::Monomial(degree),
            m: degree as usize,
            domain,
            c0_hint,
        }
    }

    /// `v(y) = 1/y^2` on `(1, inf)`: flat at infinity.
    pub fn taylor_couette() -> Self {
        Self {
            name: "taylor_couette".into(),
            shape: Shape::TaylorCouette,
            m: 1,
            domain: DomainSpec::HalfLineRight { a: 1.0 },
            c0_hint: None,
        }
    }

    /// `v(y) = tanh y` on the real line: `v'` vanishes at infinity.
    pub fn tanh() -> Self {
        Self { name: "tanh".into(), shape: Shape::Tanh, m: 1, domain: DomainSpec::FullLine, c0_hint: None }
    }

    /// Custom polynomial `sum_i coeffs[i] y^i`.
    pub fn polynomial(
        name: impl Into<String>,
        coeffs: Vec<f64>,
        m: usize,
        domain: DomainSpec,
        c0_hint: Option<f64>,
    ) -> Result<Self> {
        domain.validate()?;
        if coeffs.is_empty() || coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParams("polynomial needs finite coefficients".into()));
        }
        if m == 0 || m > MAX_ORDER {
            return Err(Error::InvalidParams(format!("non-degeneracy order {m} outside 1..={MAX_ORDER}")));
        }
        Ok(Self { name: name.into(), shape: Shape::Polynomial(coeffs), m, domain, c0_hint })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Non-degeneracy order.
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn domain(&self) -> &DomainSpec {
        &self.domain
    }

    pub fn c0_hint(&self) -> Option<f64> {
        self.c0_hint
    }

    pub fn max_order(&self) -> usize {
        MAX_ORDER
    }

    /// Same profile on another cross-section.
    pub fn with_domain(mut self, domain: DomainSpec) -> Result<Self> {
        domain.validate()?;
        self.domain = domain;
        Ok(self)
    }

    pub fn with_c0_hint(mut self, c0: Option<f64>) -> Self {
        self.c0_hint = c0;
        self
    }

    /// `v(y)` without domain checks.
    #[inline]
    pub fn value(&self, y: f64) -> f64 {
        self.derivative_unchecked(y, 0)
    }

    /// `v'(y)` without domain checks.
    #[inline]
    pub fn slope(&self, y: f64) -> f64 {
        self.derivative_unchecked(y, 1)
    }

    /// `v^(order)(y)` without domain or order checks.
    pub fn derivative_unchecked(&self, y: f64, order: usize) -> f64 {
        match &self.shape {
            Shape::Couette => match order {
                0 => y,
                1 => 1.0,
                _ => 0.0,
            },
            Shape::Poiseuille => match order {
                0 => y * y,
                1 => 2.0 * y,
                2 => 2.0,
                _ => 0.0,
            },
            Shape::Kolmogorov => match order % 4 {
                0 => y.sin(),
                1 => y.cos(),
                2 => -y.sin(),
                _ => -y.cos(),
            },
            Shape::Monomial(p) => {
                let p = *p as usize;
                if order > p {
                    return 0.0;
                }
                let falling: f64 = ((p - order + 1)..=p).map(|i| i as f64).product();
                falling * y.powi((p - order) as i32)
            }
            Shape::TaylorCouette => {
                // d^j/dy^j y^{-2} = (-1)^j (j+1)! y^{-(j+2)}
                let fact: f64 = (1..=order + 1).map(|i| i as f64).product();
                let sign = if order % 2 == 0 { 1.0 } else { -1.0 };
                sign * fact * y.powi(-((order + 2) as i32))
            }
            Shape::Tanh => {
                let t = y.tanh();
                horner(&tanh_derivative_poly(order), t)
            }
            Shape::Polynomial(c) => {
                if order >= c.len() {
                    return 0.0;
                }
                let dc: Vec<f64> = (order..c.len())
                    .map(|i| {
                        let falling: f64 = ((i - order + 1)..=i).map(|j| j as f64).product();
                        falling * c[i]
                    })
                    .collect();
                horner(&dc, y)
            }
        }
    }
}

fn horner(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

/// Coefficients (in `t = tanh y`) of the `order`-th derivative of `tanh y`,
/// using `d/dy P(t) = P'(t) (1 - t^2)`.
fn tanh_derivative_poly(order: usize) -> Vec<f64> {
    let mut p = vec![0.0, 1.0];
    for _ in 0..order {
        let dp: Vec<f64> = (1..p.len()).map(|i| i as f64 * p[i]).collect();
        let mut next = vec![0.0; dp.len() + 2];
        for (i, c) in dp.iter().enumerate() {
            next[i] += c;
            next[i + 2] -= c;
        }
        p = next;
    }
    p
}

/// Checked evaluation of `v^(order)(y)`.
pub fn eval_profile(p: &ShearProfile, y: f64, order: usize) -> Result<f64> {
    if !p.domain.contains(y) || y.is_nan() {
        return Err(Error::OutOfDomain { profile: p.name.clone(), y });
    }
    if order > p.max_order() {
        return Err(Error::OrderUnavailable { profile: p.name.clone(), order, max: p.max_order() });
    }
    Ok(p.derivative_unchecked(y, order))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NondegeneracyReport {
    pub order: usize,
    pub min_sum: f64,
    pub witness_y: f64,
    pub pass: bool,
}

/// Minimum over `grid` of `|v'| + ... + |v^(m)|`, with `m` the profile's order.
pub fn check_nondegeneracy(p: &ShearProfile, grid: &[f64]) -> Result<NondegeneracyReport> {
    check_nondegeneracy_order(p, grid, p.m)
}

/// As [`check_nondegeneracy`] with an explicit order.
pub fn check_nondegeneracy_order(p: &ShearProfile, grid: &[f64], order: usize) -> Result<NondegeneracyReport> {
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    if order == 0 || order > p.max_order() {
        return Err(Error::OrderUnavailable { profile: p.name.clone(), order, max: p.max_order() });
    }
    let mut min_sum = f64::INFINITY;
    let mut witness_y = grid[0];
    for &y in grid {
        if !p.domain.contains(y) {
            return Err(Error::OutOfDomain { profile: p.name.clone(), y });
        }
        let s: f64 = (1..=order).map(|j| p.derivative_unchecked(y, j).abs()).sum();
        if s < min_sum {
            min_sum = s;
            witness_y = y;
        }
    }
    Ok(NondegeneracyReport { order, min_sum, witness_y, pass: min_sum > NONDEGENERACY_TOL })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trend {
    Increasing,
    Flat,
    Vanishing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfinityReport {
    /// Minimum of `|v'|` over the outermost probe shell; `None` on bounded domains.
    pub liminf_estimate: Option<f64>,
    /// Per-shell minima of `|v'|`, innermost first.
    pub shell_minima: Vec<f64>,
    pub trend: Trend,
    pub pass: bool,
    /// True when the domain is bounded and the condition holds vacuously.
    pub vacuous: bool,
}

const SHELL_SAMPLES: usize = 257;

/// Probe radii used when none are configured.
pub const DEFAULT_PROBE_RADII: [f64; 5] = [10.0, 20.0, 40.0, 80.0, 160.0];

/// Finite proxy for `liminf_{|y|->inf} |v'(y)| >= c0`.
///
/// Shells are the annuli between consecutive probe radii on every unbounded
/// side. The check passes when the outermost-shell minimum reaches `c0_hint`
/// (or exceeds [`NONDEGENERACY_TOL`] without a hint) and the shell minima are
/// not trending to zero.
pub fn check_infinity_nondegeneracy(p: &ShearProfile, probe_radii: &[f64]) -> Result<InfinityReport> {
    let dom = p.domain;
    if dom.is_bounded() {
        return Ok(InfinityReport {
            liminf_estimate: None,
            shell_minima: vec![],
            trend: Trend::Flat,
            pass: true,
            vacuous: true,
        });
    }
    if probe_radii.is_empty() {
        return Err(Error::EmptyGrid);
    }
    if probe_radii.windows(2).any(|w| w[0] >= w[1]) || probe_radii[0] <= 0.0 {
        return Err(Error::InvalidParams("probe radii must be positive and strictly increasing".into()));
    }
    let mut sides = Vec::new();
    if dom.hi().is_infinite() {
        sides.push(1.0);
    }
    if dom.lo().is_infinite() {
        sides.push(-1.0);
    }
    let shells: Vec<(f64, f64)> = if probe_radii.len() == 1 {
        vec![(probe_radii[0], probe_radii[0])]
    } else {
        probe_radii.windows(2).map(|w| (w[0], w[1])).collect()
    };
    let mut shell_minima = Vec::with_capacity(shells.len());
    for &(r0, r1) in &shells {
        let mut min = f64::INFINITY;
        for &side in &sides {
            for i in 0..SHELL_SAMPLES {
                let s = i as f64 / (SHELL_SAMPLES - 1) as f64;
                let y = side * r0 * (r1 / r0).powf(s);
                if !dom.contains(y) {
                    return Err(Error::OutOfDomain { profile: p.name.clone(), y });
                }
                min = min.min(p.slope(y).abs());
            }
        }
        shell_minima.push(min);
    }
    let first = shell_minima[0];
    let last = *shell_minima.last().unwrap();
    let trend = if shell_minima.len() < 2 {
        Trend::Flat
    } else if last <= first / 1.5 {
        Trend::Vanishing
    } else if last >= first * 1.5 {
        Trend::Increasing
    } else {
        Trend::Flat
    };
    let threshold_ok = match p.c0_hint {
        Some(c0) => last >= c0,
        None => last > NONDEGENERACY_TOL,
    };
    Ok(InfinityReport {
        liminf_estimate: Some(last),
        shell_minima,
        trend,
        pass: threshold_ok && trend != Trend::Vanishing,
        vacuous: false,
    })
}

/// Finite part of a domain: the domain itself when bounded, `[a, a + len]`
/// or `[b - len, b]` on half-lines, `[-len, len]` on the line.
pub fn sample_window(domain: &DomainSpec, len: f64) -> (f64, f64) {
    match *domain {
        DomainSpec::Interval { a, b } => (a, b),
        DomainSpec::HalfLineRight { a } => (a, a + len),
        DomainSpec::HalfLineLeft { b } => (b - len, b),
        DomainSpec::FullLine => (-len, len),
    }
}

/// Uniform sample of `[lo, hi]` with `n` points, endpoints exact.
pub fn uniform_points(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => (0..n)
            .map(|i| if i == n - 1 { hi } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 })
            .collect(),
    }
}
