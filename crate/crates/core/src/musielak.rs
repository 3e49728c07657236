//! Musielak (generalized Young) functions `Phi(x, y, t) = int_0^t phi(x, y, s) ds`
//! with `phi(x, y, t) = a(x, y, |t|) t`, their diagonal restrictions
//! `Phi_hat(x, t) = Phi(x, x, t)`, conjugates, and sampled checks of the
//! structural conditions used by the modular estimates.

use std::f64::consts::E;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::expr::Expression;
use crate::fields::{Interval, SymmetricField};

/// Piecewise-linear `phi(t)` through `(t_k, phi_k)` with `t_0 = 0`,
/// `phi_0 = 0`, continued linearly past the last knot.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedPhi {
    knots: Vec<(f64, f64)>,
    /// Running integral of `phi` at each knot.
    primitive: Vec<f64>,
}

impl TabulatedPhi {
    pub fn new(points: &[(f64, f64)]) -> Result<TabulatedPhi> {
        let mut knots = vec![(0.0, 0.0)];
        for &(t, v) in points {
            if t == 0.0 {
                if v != 0.0 {
                    return Err(Error::InvalidFamily("phi(0) must be 0".into()));
                }
                continue;
            }
            knots.push((t, v));
        }
        if knots.len() < 2 {
            return Err(Error::InvalidFamily(
                "table needs at least one knot t > 0".into(),
            ));
        }
        for w in knots.windows(2) {
            if !(w[1].0 > w[0].0) || !w[1].1.is_finite() {
                return Err(Error::InvalidFamily(
                    "table abscissae must be strictly increasing and values finite".into(),
                ));
            }
        }
        let mut primitive = vec![0.0];
        for w in knots.windows(2) {
            let last = *primitive.last().unwrap();
            primitive.push(last + 0.5 * (w[1].0 - w[0].0) * (w[0].1 + w[1].1));
        }
        Ok(TabulatedPhi { knots, primitive })
    }

    fn segment(&self, t: f64) -> usize {
        // index k with knots[k].0 <= t, clamped to the last segment
        let n = self.knots.len();
        match self.knots.binary_search_by(|k| k.0.total_cmp(&t)) {
            Ok(k) => k.min(n - 2),
            Err(k) => k.saturating_sub(1).min(n - 2),
        }
    }

    fn phi(&self, t: f64) -> f64 {
        let k = self.segment(t);
        let (t0, v0) = self.knots[k];
        let (t1, v1) = self.knots[k + 1];
        v0 + (v1 - v0) * (t - t0) / (t1 - t0)
    }

    fn big_phi(&self, t: f64) -> f64 {
        let k = self.segment(t);
        let (t0, v0) = self.knots[k];
        let v = self.phi(t);
        self.primitive[k] + 0.5 * (t - t0) * (v0 + v)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FamilyKind {
    /// `Phi = t^p / p`
    Power,
    /// `Phi = t^p ln(e + t)`
    PowerLog,
    /// `(x, y)`-independent tabulated `phi`.
    Tabulated(Arc<TabulatedPhi>),
}

impl FamilyKind {
    pub fn name(&self) -> &'static str {
        match self {
            FamilyKind::Power => "power",
            FamilyKind::PowerLog => "powerlog",
            FamilyKind::Tabulated(_) => "tabulated",
        }
    }
}

/// The family frozen at one point `(x, y)`: a one-variable Young function.
#[derive(Debug, Clone, PartialEq)]
pub enum LocalYoung {
    Power { p: f64 },
    PowerLog { p: f64 },
    Tabulated(Arc<TabulatedPhi>),
}

impl LocalYoung {
    /// `Phi(t)` for `t >= 0`.
    #[inline]
    pub fn big_phi(&self, t: f64) -> f64 {
        if t == 0.0 {
            return 0.0;
        }
        match self {
            LocalYoung::Power { p } => t.powf(*p) / p,
            LocalYoung::PowerLog { p } => t.powf(*p) * (E + t).ln(),
            LocalYoung::Tabulated(tab) => tab.big_phi(t),
        }
    }

    /// Odd extension `phi(t) = a(|t|) t`.
    #[inline]
    pub fn phi(&self, t: f64) -> f64 {
        if t == 0.0 {
            return 0.0;
        }
        let m = t.abs();
        let v = match self {
            LocalYoung::Power { p } => m.powf(p - 1.0),
            LocalYoung::PowerLog { p } => {
                let mp1 = m.powf(p - 1.0);
                p * mp1 * (E + m).ln() + mp1 * m / (E + m)
            }
            LocalYoung::Tabulated(tab) => tab.phi(m),
        };
        if t < 0.0 {
            -v
        } else {
            v
        }
    }

    /// `a(t) = phi(t) / t` for `t > 0`.
    pub fn a(&self, t: f64) -> f64 {
        self.phi(t) / t
    }

    /// Generalized inverse `sup { s : phi(s) <= tau }` for `tau >= 0`, by
    /// bracketing and bisection.
    pub fn phi_inverse(&self, tau: f64) -> Result<f64> {
        if tau <= 0.0 {
            return Ok(0.0);
        }
        if let LocalYoung::Power { p } = self {
            return Ok(tau.powf(1.0 / (p - 1.0)));
        }
        invert_increasing(|s| self.phi(s), tau)
    }

    /// Inverse of `Phi` on `[0, inf)`.
    pub fn big_phi_inverse(&self, tau: f64) -> Result<f64> {
        if tau <= 0.0 {
            return Ok(0.0);
        }
        if let LocalYoung::Power { p } = self {
            return Ok((p * tau).powf(1.0 / p));
        }
        invert_increasing(|s| self.big_phi(s), tau)
    }

    /// Conjugate `Phi*(t) = int_0^t phi^{-1}`, by bisection inversion of
    /// `phi` under 64-panel adaptive Simpson quadrature.
    pub fn conjugate_quadrature(&self, t: f64) -> Result<f64> {
        if t <= 0.0 {
            return Ok(0.0);
        }
        let mut failure = None;
        let value = adaptive_simpson_panels(
            |tau| match self.phi_inverse(tau) {
                Ok(v) => v,
                Err(e) => {
                    failure.get_or_insert(e);
                    f64::NAN
                }
            },
            0.0,
            t,
            64,
            1e-13,
        );
        match failure {
            Some(e) => Err(e),
            None if value.is_finite() => Ok(value),
            None => Err(Error::Numeric(format!("conjugate quadrature at t = {t}"))),
        }
    }

    /// Conjugate through the Young equality
    /// `Phi*(phi(s)) = s phi(s) - Phi(s)`.
    pub fn conjugate_legendre(&self, t: f64) -> Result<f64> {
        if t <= 0.0 {
            return Ok(0.0);
        }
        let s = self.phi_inverse(t)?;
        Ok((s * t - self.big_phi(s)).max(0.0))
    }
    /// `phi'(t)` for `t >= 0` (one-sided at knots of a table).
    pub fn phi_prime(&self, t: f64) -> f64 {
        let m = t.abs();
        match self {
            LocalYoung::Power { p } => {
                if m == 0.0 {
                    return if *p > 2.0 {
                        0.0
                    } else if *p == 2.0 {
                        1.0
                    } else {
                        f64::INFINITY
                    };
                }
                (p - 1.0) * m.powf(p - 2.0)
            }
            LocalYoung::PowerLog { p } => {
                if m == 0.0 {
                    return if *p > 2.0 { 0.0 } else { f64::INFINITY };
                }
                let l = (E + m).ln();
                let em = E + m;
                p * (p - 1.0) * m.powf(p - 2.0) * l + 2.0 * p * m.powf(p - 1.0) / em
                    - m.powf(*p) / (em * em)
            }
            LocalYoung::Tabulated(tab) => {
                let k = tab.segment(m);
                let (t0, v0) = tab.knots[k];
                let (t1, v1) = tab.knots[k + 1];
                (v1 - v0) / (t1 - t0)
            }
        }
    }

    /// `Phi(a + delta) - Phi(a)` for `a >= 0`, `a + delta >= 0`, without
    /// cancellation when `delta` is small relative to `a`.
    pub fn big_phi_increment(&self, a: f64, delta: f64) -> f64 {
        if delta == 0.0 {
            return 0.0;
        }
        if a == 0.0 {
            return self.big_phi(delta);
        }
        let b = a + delta;
        match self {
            LocalYoung::Power { p } => a.powf(*p) / p * (p * (delta / a).ln_1p()).exp_m1(),
            LocalYoung::PowerLog { p } => {
                let grow = a.powf(*p) * (p * (delta / a).ln_1p()).exp_m1();
                grow * (E + b).ln() + a.powf(*p) * (delta / (E + a)).ln_1p()
            }
            LocalYoung::Tabulated(tab) => {
                if tab.segment(a) == tab.segment(b) {
                    0.5 * delta * (tab.phi(a) + tab.phi(b))
                } else {
                    tab.big_phi(b) - tab.big_phi(a)
                }
            }
        }
    }
}

fn invert_increasing(f: impl Fn(f64) -> f64, target: f64) -> Result<f64> {
    let mut lo = 0.0;
    let mut hi = 1.0;
    let mut doublings = 0;
    while f(hi) <= target {
        lo = hi;
        hi *= 2.0;
        doublings += 1;
        if doublings > 1100 || !hi.is_finite() {
            return Err(Error::Numeric(format!(
                "inversion bracket failed for target {target}"
            )));
        }
    }
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || hi - lo <= 1e-15 * hi {
            break;
        }
        if f(mid) <= target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if !(hi - lo <= 1e-12 * hi.max(f64::MIN_POSITIVE)) {
        return Err(Error::Numeric(format!(
            "inversion did not converge for target {target}"
        )));
    }
    Ok(0.5 * (lo + hi))
}

/// Adaptive Simpson over `panels` equal sub-intervals of `[a, b]`.
pub fn adaptive_simpson_panels(
    mut f: impl FnMut(f64) -> f64,
    a: f64,
    b: f64,
    panels: usize,
    rel_tol: f64,
) -> f64 {
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &mut dyn FnMut(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: usize,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    let h = (b - a) / panels as f64;
    // crude scale for the absolute tolerance
    let scale = (f(b).abs() * (b - a)).max(f64::MIN_POSITIVE);
    let mut total = 0.0;
    for k in 0..panels {
        let lo = a + h * k as f64;
        let hi = if k + 1 == panels {
            b
        } else {
            a + h * (k + 1) as f64
        };
        let (fa, fb) = (f(lo), f(hi));
        let fm = f(0.5 * (lo + hi));
        let whole = (hi - lo) / 6.0 * (fa + 4.0 * fm + fb);
        total += recurse(
            &mut f,
            lo,
            hi,
            fa,
            fm,
            fb,
            whole,
            rel_tol * scale / panels as f64,
            40,
        );
    }
    total
}

/// A Musielak family `Phi(x, y, t)` over a computational box.
#[derive(Debug, Clone)]
pub struct MusielakFamily {
    kind: FamilyKind,
    p_field: SymmetricField,
    domain: Interval,
    /// Sampled bounds of `p(x, y)`.
    pub p_minus: f64,
    pub p_plus: f64,
    /// Lower and upper bounds of `t phi / Phi`.
    pub phi_minus: f64,
    pub phi_plus: f64,
}

impl MusielakFamily {
    /// Power or power-log family with exponent field `p(x, y)` over
    /// `domain x domain`.
    pub fn new(kind: FamilyKind, p: Expression, domain: Interval) -> Result<MusielakFamily> {
        if let FamilyKind::Tabulated(tab) = kind {
            return MusielakFamily::tabulated(tab, domain);
        }
        let p_field = SymmetricField::new(p);
        let (p_minus, p_plus) = p_field.bounds(domain)?;
        if !(p_minus > 1.0) || !p_plus.is_finite() {
            return Err(Error::InvalidFamily(format!(
                "p = {} takes values in [{p_minus}, {p_plus}]; need p > 1",
                p_field.expression()
            )));
        }
        let (phi_minus, phi_plus) = match kind {
            FamilyKind::Power => (p_minus, p_plus),
            // t phi / Phi = p + t / ((e + t) ln(e + t)); the correction is
            // positive and vanishes at both ends.
            _ => (p_minus, p_plus + powerlog_excess_max()),
        };
        Ok(MusielakFamily {
            kind,
            p_field,
            domain,
            p_minus,
            p_plus,
            phi_minus,
            phi_plus,
        })
    }

    pub fn power(p: &str, domain: Interval) -> Result<MusielakFamily> {
        MusielakFamily::new(FamilyKind::Power, Expression::parse(p)?, domain)
    }

    pub fn power_log(p: &str, domain: Interval) -> Result<MusielakFamily> {
        MusielakFamily::new(FamilyKind::PowerLog, Expression::parse(p)?, domain)
    }

    /// Tabulated family; the Simonenko exponents are estimated from samples
    /// of `t phi / Phi` and widened by a 10% margin.
    pub fn tabulated(table: Arc<TabulatedPhi>, domain: Interval) -> Result<MusielakFamily> {
        let local = LocalYoung::Tabulated(table.clone());
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for t in log_grid(1e-6, 1e6, 241) {
            let big = local.big_phi(t);
            if big > 0.0 {
                let r = t * local.phi(t) / big;
                lo = lo.min(r);
                hi = hi.max(r);
            }
        }
        if !(lo > 1.0) || !hi.is_finite() {
            return Err(Error::InvalidFamily(format!(
                "tabulated phi has t phi / Phi in [{lo}, {hi}]; need > 1"
            )));
        }
        Ok(MusielakFamily {
            kind: FamilyKind::Tabulated(table),
            p_field: SymmetricField::constant(lo),
            domain,
            p_minus: lo,
            p_plus: hi,
            phi_minus: 1.0 + (lo - 1.0) / 1.1,
            phi_plus: hi * 1.1,
        })
    }

    pub fn kind(&self) -> &FamilyKind {
        &self.kind
    }

    pub fn domain(&self) -> Interval {
        self.domain
    }

    pub fn p_expression(&self) -> &Expression {
        self.p_field.expression()
    }

    pub fn exponent(&self, x: f64, y: f64) -> Result<f64> {
        let p = self.p_field.value(x, y)?;
        if p > 1.0 {
            Ok(p)
        } else {
            Err(Error::InvalidFamily(format!("p({x}, {y}) = {p} <= 1")))
        }
    }

    /// The family frozen at `(x, y)`.
    pub fn local(&self, x: f64, y: f64) -> Result<LocalYoung> {
        Ok(match &self.kind {
            FamilyKind::Power => LocalYoung::Power {
                p: self.exponent(x, y)?,
            },
            FamilyKind::PowerLog => LocalYoung::PowerLog {
                p: self.exponent(x, y)?,
            },
            FamilyKind::Tabulated(t) => LocalYoung::Tabulated(t.clone()),
        })
    }

    /// `Phi(x, y, t)`.
    pub fn phi_value(&self, x: f64, y: f64, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(Error::Domain(format!("Phi needs t >= 0, got {t}")));
        }
        Ok(self.local(x, y)?.big_phi(t))
    }

    /// `phi(x, y, t)`, odd in `t`.
    pub fn small_phi_value(&self, x: f64, y: f64, t: f64) -> Result<f64> {
        Ok(self.local(x, y)?.phi(t))
    }

    /// `Phi_hat(x, t) = Phi(x, x, t)`.
    pub fn diag_phi_hat(&self, x: f64, t: f64) -> Result<f64> {
        self.phi_value(x, x, t)
    }

    /// `phi_hat(x, t) = phi(x, x, t)`.
    pub fn diag_phi_hat_derivative(&self, x: f64, t: f64) -> Result<f64> {
        self.small_phi_value(x, x, t)
    }

    /// Conjugate `Phi*(x, y, t)` by inversion and quadrature.
    pub fn conjugate_phi(&self, x: f64, y: f64, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(Error::Domain(format!("conjugate needs t >= 0, got {t}")));
        }
        self.local(x, y)?.conjugate_quadrature(t)
    }

    /// Sampled check of the Simonenko bracket
    /// `phi- <= t phi(t) / Phi(t) <= phi+`, together with the monotonicity
    /// of `phi` and `Phi(0) = 0` that the bracket presupposes.
    pub fn check_phi1(&self, budget: usize) -> Result<Phi1Report> {
        let n = budget.max(1);
        let mut report = Phi1Report {
            phi_minus_observed: f64::INFINITY,
            phi_plus_observed: f64::NEG_INFINITY,
            monotone: true,
            samples: 0,
            pass: true,
        };
        let mut ts: Vec<f64> = log_grid(1e-6, 1e6, 8 * n + 1).collect();
        if let FamilyKind::Tabulated(table) = &self.kind {
            for w in table.knots.windows(2) {
                ts.extend([0.5 * (w[0].0 + w[1].0), w[1].0]);
            }
            ts.sort_by(f64::total_cmp);
            ts.dedup();
        }
        for x in self.domain.grid(n) {
            for y in self.domain.grid(n) {
                let local = self.local(x, y)?;
                if local.big_phi(0.0) != 0.0 || local.phi(0.0) != 0.0 {
                    report.monotone = false;
                }
                let mut prev = 0.0;
                for &t in &ts {
                    let v = local.phi(t);
                    if !(v > prev) {
                        report.monotone = false;
                    }
                    prev = v;
                    let big = local.big_phi(t);
                    let ratio = t * v / big;
                    report.samples += 1;
                    if !ratio.is_finite() {
                        report.pass = false;
                        continue;
                    }
                    report.phi_minus_observed = report.phi_minus_observed.min(ratio);
                    report.phi_plus_observed = report.phi_plus_observed.max(ratio);
                }
            }
        }
        report.pass &= report.monotone
            && report.phi_minus_observed >= self.phi_minus - 1e-10
            && report.phi_plus_observed <= self.phi_plus + 1e-10;
        Ok(report)
    }

    /// `K = 2^{phi+}`, a global Delta_2 constant for `Phi` and `Phi_hat`.
    pub fn delta2_constant(&self) -> f64 {
        2f64.powf(self.phi_plus)
    }

    /// Largest sampled `Phi(2t) / Phi(t)` and whether it stays below `K`.
    pub fn check_delta2(&self, budget: usize) -> Result<Delta2Report> {
        let n = budget.max(1);
        let k = self.delta2_constant();
        let mut worst: f64 = 0.0;
        for x in self.domain.grid(n) {
            for y in self.domain.grid(n) {
                let local = self.local(x, y)?;
                for t in log_grid(1e-6, 1e6, 8 * n + 1) {
                    worst = worst.max(local.big_phi(2.0 * t) / local.big_phi(t));
                }
            }
        }
        Ok(Delta2Report {
            constant: k,
            worst_ratio: worst,
            pass: worst <= k * (1.0 + 1e-12),
        })
    }

    /// Midpoint convexity of `t -> Phi(x, y, sqrt t)` on samples.
    pub fn check_phi2_sqrt_convexity(&self, budget: usize) -> Result<bool> {
        Ok(self.phi2_counterexample(budget)?.is_none())
    }

    /// First sampled `(x, y, a, b)` where
    /// `Phi(sqrt((a+b)/2)) > (Phi(sqrt a) + Phi(sqrt b)) / 2`.
    pub fn phi2_counterexample(&self, budget: usize) -> Result<Option<(f64, f64, f64, f64)>> {
        let n = budget.max(1);
        let ts: Vec<f64> = log_grid(1e-6, 1e6, 8 * n + 1).collect();
        for x in self.domain.grid(n) {
            for y in self.domain.grid(n) {
                let local = self.local(x, y)?;
                let g = |t: f64| local.big_phi(t.sqrt());
                for w in ts.windows(3) {
                    for (a, b) in [(w[0], w[1]), (w[0], w[2])] {
                        let mid = g(0.5 * (a + b));
                        let chord = 0.5 * (g(a) + g(b));
                        if mid > chord * (1.0 + 1e-12) {
                            return Ok(Some((x, y, a, b)));
                        }
                    }
                }
            }
        }
        Ok(None)
    }

    /// Sampled `sup Phi(x, y, 1)`; finite means the fractional boundedness
    /// condition holds on the box.
    pub fn phi3_sup(&self, budget: usize) -> Result<f64> {
        let mut sup: f64 = 0.0;
        for x in self.domain.grid(budget.max(1)) {
            for y in self.domain.grid(budget.max(1)) {
                sup = sup.max(self.phi_value(x, y, 1.0)?);
            }
        }
        Ok(sup)
    }

    /// Classifies the two integrals of `Phi_hat^{-1}(tau) tau^{-(N+s-)/N}`
    /// (near 0 and near infinity). Power families use the exact exponent
    /// criterion; other kinds fall back to the dyadic growth estimate.
    pub fn embedding_condition_check(&self, s_minus: f64, dim: usize) -> Result<EmbeddingReport> {
        if !(s_minus > 0.0 && s_minus < 1.0) || dim == 0 {
            return Err(Error::Domain(format!(
                "embedding check needs s- in (0, 1) and N >= 1, got s- = {s_minus}, N = {dim}"
            )));
        }
        if self.kind != FamilyKind::Power {
            return self.embedding_condition_numeric(s_minus, dim);
        }
        let n = dim as f64;
        let mut diag_max: f64 = 0.0;
        for x in self.domain.grid(4 * crate::fields::BOUND_SAMPLES) {
            diag_max = diag_max.max(self.exponent(x, x)?);
        }
        // integrand ~ tau^{1/p - 1 - s/N}
        let at_zero = if s_minus * diag_max < n {
            Integrability::Convergent
        } else {
            Integrability::Divergent
        };
        let at_infinity = if s_minus * diag_max <= n {
            Integrability::Divergent
        } else {
            Integrability::Convergent
        };
        Ok(EmbeddingReport {
            at_zero,
            at_infinity,
            worst_slope_at_zero: 1.0 / diag_max - 1.0 - s_minus / n,
            worst_slope_at_infinity: 1.0 / diag_max - 1.0 - s_minus / n,
        })
    }

    /// Growth-rate classification from log-log slopes of the integrand on
    /// dyadic scales `2^{-k}` and `2^{k}`, `k = 60, 61`.
    pub fn embedding_condition_numeric(&self, s_minus: f64, dim: usize) -> Result<EmbeddingReport> {
        let n = dim as f64;
        let shift = (n + s_minus) / n;
        let mut slope_zero_min = f64::INFINITY;
        let mut slope_inf_max = f64::NEG_INFINITY;
        for x in self.domain.grid(crate::fields::BOUND_SAMPLES) {
            let local = self.local(x, x)?;
            let log_g = |tau: f64| -> Result<f64> {
                Ok(local.big_phi_inverse(tau)?.ln() - shift * tau.ln())
            };
            let (t1, t2) = (2f64.powi(-60), 2f64.powi(-61));
            let slope0 = (log_g(t1)? - log_g(t2)?) / (t1.ln() - t2.ln());
            let (t1, t2) = (2f64.powi(60), 2f64.powi(61));
            let slope_inf = (log_g(t2)? - log_g(t1)?) / (t2.ln() - t1.ln());
            slope_zero_min = slope_zero_min.min(slope0);
            slope_inf_max = slope_inf_max.max(slope_inf);
        }
        const CRITICAL_BAND: f64 = 1e-3;
        let at_zero = if slope_zero_min > -1.0 + CRITICAL_BAND {
            Integrability::Convergent
        } else if slope_zero_min < -1.0 - CRITICAL_BAND {
            Integrability::Divergent
        } else {
            Integrability::Critical
        };
        let at_infinity = if slope_inf_max > -1.0 + CRITICAL_BAND {
            Integrability::Divergent
        } else if slope_inf_max < -1.0 - CRITICAL_BAND {
            Integrability::Convergent
        } else {
            Integrability::Critical
        };
        Ok(EmbeddingReport {
            at_zero,
            at_infinity,
            worst_slope_at_zero: slope_zero_min,
            worst_slope_at_infinity: slope_inf_max,
        })
    }
}

fn powerlog_excess_max() -> f64 {
    // maximize g(t) = t / ((e + t) ln(e + t)) over a log grid, then golden
    // section around the best node
    let g = |t: f64| t / ((E + t) * (E + t).ln());
    let grid: Vec<f64> = log_grid(1e-3, 1e3, 601).collect();
    let (best, _) = grid
        .iter()
        .enumerate()
        .max_by(|a, b| g(*a.1).total_cmp(&g(*b.1)))
        .unwrap();
    let mut lo = grid[best.saturating_sub(1)];
    let mut hi = grid[(best + 1).min(grid.len() - 1)];
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..200 {
        let a = hi - ratio * (hi - lo);
        let b = lo + ratio * (hi - lo);
        if g(a) < g(b) {
            lo = a;
        } else {
            hi = b;
        }
    }
    // tiny upward pad so the bracket is never violated by rounding
    g(0.5 * (lo + hi)) + 1e-12
}

/// `count` log-spaced points from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> impl Iterator<Item = f64> {
    let count = count.max(2);
    let (l, h) = (lo.ln(), hi.ln());
    (0..count).map(move |k| (l + (h - l) * k as f64 / (count - 1) as f64).exp())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Phi1Report {
    pub phi_minus_observed: f64,
    pub phi_plus_observed: f64,
    pub monotone: bool,
    pub samples: usize,
    pub pass: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Delta2Report {
    pub constant: f64,
    pub worst_ratio: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Integrability {
    Convergent,
    Divergent,
    Critical,
}

impl std::fmt::Display for Integrability {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Integrability::Convergent => "convergent",
            Integrability::Divergent => "divergent",
            Integrability::Critical => "critical",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmbeddingReport {
    /// Integral over `(0, 1)`.
    pub at_zero: Integrability,
    /// Integral over `(1, inf)`.
    pub at_infinity: Integrability,
    pub worst_slope_at_zero: f64,
    pub worst_slope_at_infinity: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dom() -> Interval {
        Interval::new(-1.0, 2.0)
    }

    #[test]
    fn power_values() {
        let f = MusielakFamily::power("2", dom()).unwrap();
        assert_eq!(f.phi_value(0.0, 0.5, 2.0).unwrap(), 2.0);
        assert_eq!(f.phi_value(0.3, 0.1, 0.0).unwrap(), 0.0);
        let g = MusielakFamily::power("2+abs(x-y)", dom()).unwrap();
        assert!((g.phi_value(0.0, 1.0, 1.0).unwrap() - 1.0 / 3.0).abs() < 1e-16);
    }

    #[test]
    fn negative_argument_and_bad_exponent() {
        let f = MusielakFamily::power("2", dom()).unwrap();
        assert!(matches!(f.phi_value(0.0, 0.0, -1.0), Err(Error::Domain(_))));
        assert!(matches!(
            MusielakFamily::power("1", dom()),
            Err(Error::InvalidFamily(_))
        ));
        assert!(matches!(
            MusielakFamily::power("1.5 - x", dom()),
            Err(Error::InvalidFamily(_))
        ));
    }

    #[test]
    fn small_phi_values() {
        let f2 = MusielakFamily::power("2", dom()).unwrap();
        assert_eq!(f2.small_phi_value(0.0, 0.0, 3.0).unwrap(), 3.0);
        assert_eq!(f2.small_phi_value(0.0, 0.0, 0.0).unwrap(), 0.0);
        let f3 = MusielakFamily::power("3", dom()).unwrap();
        assert_eq!(f3.small_phi_value(0.0, 0.0, -2.0).unwrap(), -4.0);
    }

    #[test]
    fn diagonal_restrictions() {
        let f = MusielakFamily::power("2", dom()).unwrap();
        assert_eq!(f.diag_phi_hat(0.7, 1.0).unwrap(), 0.5);
        assert_eq!(f.diag_phi_hat(0.7, 0.0).unwrap(), 0.0);
        let g = MusielakFamily::power("2+abs(x-y)", dom()).unwrap();
        for x in [-1.0, 0.0, 0.25, 1.9] {
            for t in [0.1, 1.0, 3.0] {
                assert_eq!(g.diag_phi_hat(x, t).unwrap(), t * t / 2.0);
                assert_eq!(g.diag_phi_hat_derivative(x, t).unwrap(), t);
            }
        }
    }

    #[test]
    fn conjugates() {
        let f2 = MusielakFamily::power("2", dom()).unwrap();
        assert!((f2.conjugate_phi(0.0, 0.0, 1.0).unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(f2.conjugate_phi(0.0, 0.0, 0.0).unwrap(), 0.0);
        // Legendre transform of t^3/3 is (2/3) t^{3/2}
        let f3 = MusielakFamily::power("3", dom()).unwrap();
        for t in [0.25f64, 1.0, 4.0] {
            let exact = 2.0 / 3.0 * t * t.sqrt();
            let quad = f3.conjugate_phi(0.0, 0.0, t).unwrap();
            let leg = f3.local(0.0, 0.0).unwrap().conjugate_legendre(t).unwrap();
            assert!((quad - exact).abs() <= 1e-10 * exact, "{quad} vs {exact}");
            assert!((leg - exact).abs() <= 1e-12 * exact);
        }
    }

    #[test]
    fn conjugate_routes_agree_for_powerlog() {
        let f = MusielakFamily::power_log("2.5", dom()).unwrap();
        let local = f.local(0.0, 0.0).unwrap();
        for t in [1e-3, 0.1, 1.0, 10.0, 300.0] {
            let a = local.conjugate_quadrature(t).unwrap();
            let b = local.conjugate_legendre(t).unwrap();
            assert!((a - b).abs() <= 1e-9 * b.max(1e-300), "t={t}: {a} vs {b}");
        }
    }

    #[test]
    fn phi1_bracket() {
        let f = MusielakFamily::power("2", dom()).unwrap();
        let r = f.check_phi1(4).unwrap();
        assert!(r.pass);
        assert!((r.phi_minus_observed - 2.0).abs() < 1e-12);
        assert!((r.phi_plus_observed - 2.0).abs() < 1e-12);

        let g = MusielakFamily::power("2+abs(x-y)/3", dom()).unwrap();
        assert_eq!((g.phi_minus, g.phi_plus), (2.0, 3.0));
        let r = g.check_phi1(6).unwrap();
        assert!(r.pass);
        assert!(r.phi_minus_observed >= 2.0 - 1e-12 && r.phi_plus_observed <= 3.0 + 1e-12);

        let h = MusielakFamily::power_log("3", dom()).unwrap();
        assert!(h.check_phi1(3).unwrap().pass);
    }

    #[test]
    fn nonmonotone_table_fails_phi1() {
        let table = TabulatedPhi::new(&[(1.0, 1.0), (2.0, 0.8), (3.0, 3.0), (4.0, 6.0)]).unwrap();
        let f = MusielakFamily::tabulated(Arc::new(table), dom()).unwrap();
        let r = f.check_phi1(2).unwrap();
        assert!(!r.monotone);
        assert!(!r.pass);
    }

    #[test]
    fn increasing_table_is_a_musielak_function() {
        let pts: Vec<(f64, f64)> = (1..=50)
            .map(|k| (0.1 * k as f64, (0.1 * k as f64).powi(2)))
            .collect();
        let f =
            MusielakFamily::tabulated(Arc::new(TabulatedPhi::new(&pts).unwrap()), dom()).unwrap();
        let local = f.local(0.0, 0.0).unwrap();
        // exact integral of the interpolant at a knot
        let t = 1.0;
        let expected: f64 = (0..10)
            .map(|k| 0.05 * ((0.1 * k as f64).powi(2) + (0.1 * (k + 1) as f64).powi(2)))
            .sum();
        assert!((local.big_phi(t) - expected).abs() < 1e-14);
        assert!(f.check_phi1(2).unwrap().pass);
    }

    #[test]
    fn delta2() {
        let f = MusielakFamily::power("2", dom()).unwrap();
        assert_eq!(f.delta2_constant(), 4.0);
        assert_eq!(
            f.phi_value(0.0, 0.0, 2.0).unwrap(),
            4.0 * f.phi_value(0.0, 0.0, 1.0).unwrap()
        );
        let g = MusielakFamily::power("2+abs(x-y)/3", dom()).unwrap();
        assert_eq!(g.delta2_constant(), 8.0);
        assert!(g.check_delta2(5).unwrap().pass);
        let h = MusielakFamily::power("3", dom()).unwrap();
        assert_eq!(h.delta2_constant(), 8.0);
        let r = h.check_delta2(3).unwrap();
        assert!((r.worst_ratio - 8.0).abs() < 1e-12 && r.pass);
    }

    #[test]
    fn phi2_sqrt_convexity() {
        assert!(MusielakFamily::power("2", dom())
            .unwrap()
            .check_phi2_sqrt_convexity(3)
            .unwrap());
        assert!(MusielakFamily::power("3", dom())
            .unwrap()
            .check_phi2_sqrt_convexity(3)
            .unwrap());
        let f = MusielakFamily::power("1.5", dom()).unwrap();
        assert!(!f.check_phi2_sqrt_convexity(3).unwrap());
        assert!(f.phi2_counterexample(3).unwrap().is_some());
    }

    #[test]
    fn embedding_classifier() {
        let p2 = MusielakFamily::power("2", dom()).unwrap();
        let r = p2.embedding_condition_check(0.4, 1).unwrap();
        assert_eq!(r.at_zero, Integrability::Convergent);
        assert_eq!(r.at_infinity, Integrability::Divergent);
        let p3 = MusielakFamily::power("3", dom()).unwrap();
        assert_eq!(
            p3.embedding_condition_check(0.5, 1).unwrap().at_zero,
            Integrability::Divergent
        );
        // the numeric route agrees with the exact criterion away from the
        // critical line
        for (s, p) in [(0.4, 2.0), (0.5, 3.0), (0.2, 4.0), (0.7, 1.2), (0.45, 2.0)] {
            let f = MusielakFamily::power(&p.to_string(), dom()).unwrap();
            let exact = f.embedding_condition_check(s, 1).unwrap();
            let num = f.embedding_condition_numeric(s, 1).unwrap();
            assert_eq!(exact.at_zero, num.at_zero, "s={s} p={p}");
            assert_eq!(exact.at_infinity, num.at_infinity, "s={s} p={p}");
        }
        let crit = MusielakFamily::power("2", dom()).unwrap();
        let num = crit.embedding_condition_numeric(0.5, 1).unwrap();
        assert_eq!(num.at_zero, Integrability::Critical);
        assert!(p2.embedding_condition_check(1.0, 1).is_err());
    }

    #[test]
    fn young_inequality_and_symmetry_on_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let fams = [
            MusielakFamily::power("2+0.5*abs(x-y)", dom()).unwrap(),
            MusielakFamily::power_log("2.2+0.3*cos(x+y)", dom()).unwrap(),
        ];
        for f in &fams {
            for _ in 0..1000 {
                let x = rng.gen_range(-1.0..2.0);
                let y = rng.gen_range(-1.0..2.0);
                let t: f64 = 10f64.powf(rng.gen_range(-3.0..3.0));
                assert_eq!(f.phi_value(x, y, t).unwrap(), f.phi_value(y, x, t).unwrap());
            }
            for _ in 0..100 {
                let x = rng.gen_range(-1.0..2.0);
                let y = rng.gen_range(-1.0..2.0);
                let u: f64 = 10f64.powf(rng.gen_range(-2.0..2.0));
                let v: f64 = 10f64.powf(rng.gen_range(-2.0..2.0));
                let local = f.local(x, y).unwrap();
                let rhs = local.big_phi(u) + local.conjugate_legendre(v).unwrap();
                assert!(u * v <= rhs + 1e-10 * rhs.max(1.0));
                // Phi strictly increasing and convex on samples
                assert!(local.big_phi(u) < local.big_phi(1.01 * u));
                let mid = local.big_phi(0.5 * (u + v));
                assert!(mid <= 0.5 * (local.big_phi(u) + local.big_phi(v)) * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn phi_prime_matches_differences() {
        for local in [
            LocalYoung::Power { p: 3.5 },
            LocalYoung::PowerLog { p: 2.5 },
        ] {
            for t in [0.01, 0.3, 1.0, 4.0, 25.0] {
                let h = 1e-6 * t;
                let fd = (local.phi(t + h) - local.phi(t - h)) / (2.0 * h);
                let d = local.phi_prime(t);
                assert!(
                    (fd - d).abs() <= 1e-6 * d.abs().max(1.0),
                    "{local:?} t={t}: {fd} vs {d}"
                );
            }
        }
        assert_eq!(LocalYoung::Power { p: 3.0 }.phi_prime(0.0), 0.0);
        assert_eq!(LocalYoung::Power { p: 2.0 }.phi_prime(0.0), 1.0);
    }

    #[test]
    fn phi_increment_matches_direct_difference() {
        let table = Arc::new(
            TabulatedPhi::new(&[(0.0, 0.0), (1.0, 1.0), (2.0, 3.0), (4.0, 10.0)]).unwrap(),
        );
        let kinds = [
            LocalYoung::Power { p: 3.0 },
            LocalYoung::PowerLog { p: 2.2 },
            LocalYoung::Tabulated(table),
        ];
        for local in &kinds {
            for (a, d) in [
                (0.0, 0.7),
                (0.5, 0.25),
                (1.5, -0.75),
                (3.0, 1.0),
                (2.0, 1e-3),
            ] {
                let direct = local.big_phi(a + d) - local.big_phi(a);
                let inc = local.big_phi_increment(a, d);
                assert!(
                    (direct - inc).abs() <= 1e-12 * direct.abs().max(1.0),
                    "{local:?} {a} {d}"
                );
            }
        }
        // tiny increments keep full relative accuracy: Phi'(a) delta
        let local = LocalYoung::Power { p: 4.0 };
        let inc = local.big_phi_increment(1e3, 1e-9);
        assert!((inc - 1e9 * 1e-9).abs() <= 1e-6 * inc);
    }
}
