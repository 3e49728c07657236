//! Phase and combined modulars, Luxemburg norms by bisection, and sampled
//! checks of the modular-norm brackets and the Hölder inequality.

use crate::error::{Error, Result};
use crate::mesh::GridFunction;
use crate::problem::Problem;

/// Terms of the phase modular `rho_i(u)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModularBreakdown {
    /// Double integral over `R^2 \ (C Omega)^2` against `dx dy / |x - y|`.
    pub gagliardo: f64,
    /// `int_Omega Phi_hat(|u|)`.
    pub interior: f64,
    /// `int_{C Omega} beta Phi_hat(|u|)` over the collar.
    pub exterior_beta: f64,
    pub total: f64,
}

const MAX_SCALINGS: usize = 200;
const BISECTIONS: usize = 60;

/// `inf { eta > 0 : modular(u / eta) <= 1 }` for a modular that is
/// nondecreasing along rays. Returns the upper end of the final bracket, so
/// `modular(u / eta) <= 1` holds for the returned value.
pub fn luxemburg_norm(u: &[f64], mut modular: impl FnMut(&[f64]) -> Result<f64>) -> Result<f64> {
    if u.iter().all(|&v| v == 0.0) {
        return Ok(0.0);
    }
    let mut buf = vec![0.0; u.len()];
    let mut at = |eta: f64| -> Result<f64> {
        for (b, v) in buf.iter_mut().zip(u) {
            *b = v / eta;
        }
        let m = modular(&buf)?;
        if m.is_nan() {
            return Err(Error::Numeric(format!("modular is NaN at eta = {eta}")));
        }
        Ok(m)
    };
    let first = at(1.0)?;
    if first == 0.0 {
        return Err(Error::DegenerateModular);
    }
    let (mut lo, mut hi) = (1.0, 1.0);
    if first > 1.0 {
        let mut k = 0;
        while at(hi)? > 1.0 {
            lo = hi;
            hi *= 2.0;
            k += 1;
            if k > MAX_SCALINGS {
                return Err(Error::Numeric(
                    "Luxemburg bracket: modular stays above 1".into(),
                ));
            }
        }
    } else {
        let mut k = 0;
        while at(lo)? <= 1.0 {
            hi = lo;
            lo *= 0.5;
            k += 1;
            if k > MAX_SCALINGS {
                return Err(Error::Numeric(
                    "Luxemburg bracket: modular stays below 1".into(),
                ));
            }
        }
    }
    for _ in 0..BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if at(mid)? <= 1.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Like [`luxemburg_norm`], but a modular vanishing on a nonzero function
/// gives norm 0. Used for the seminorm and weighted parts.
fn seminorm(u: &[f64], modular: impl FnMut(&[f64]) -> Result<f64>) -> Result<f64> {
    match luxemburg_norm(u, modular) {
        Err(Error::DegenerateModular) => Ok(0.0),
        other => other,
    }
}

/// Two-sided check of one modular-norm bracket.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bracket {
    pub norm: f64,
    pub modular: f64,
    pub lower: f64,
    pub upper: f64,
    /// `min(modular - lower, upper - modular)`; nonnegative when it holds.
    pub margin: f64,
}

impl Bracket {
    /// Brackets `norm^{lo}`/`norm^{hi}` in the order fixed by `norm` vs 1.
    pub fn new(norm: f64, modular: f64, exp_minus: f64, exp_plus: f64) -> Bracket {
        let (lower, upper) = if norm > 1.0 {
            (norm.powf(exp_minus), norm.powf(exp_plus))
        } else if norm < 1.0 {
            (norm.powf(exp_plus), norm.powf(exp_minus))
        } else {
            (1.0, 1.0)
        };
        Bracket {
            norm,
            modular,
            lower,
            upper,
            margin: (modular - lower).min(upper - modular),
        }
    }

    pub fn holds(&self, slack: f64) -> bool {
        self.margin >= -slack
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BracketReport {
    pub phases: [Bracket; 2],
    pub combined: Bracket,
    /// `rho(u / ||u||)`.
    pub unit_modular: f64,
}

impl BracketReport {
    pub fn worst_margin(&self) -> f64 {
        self.phases
            .iter()
            .chain(std::iter::once(&self.combined))
            .map(|b| b.margin)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn pass(&self, slack: f64) -> bool {
        self.worst_margin() >= -slack && (self.unit_modular - 1.0).abs() <= slack
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HolderReport {
    /// `|int_Omega u v|`
    pub lhs: f64,
    /// `2 ||u||_{Phi_hat} ||v||_{conjugate}`
    pub rhs: f64,
    pub pass: bool,
}

impl Problem {
    /// `rho_i(u)` term by term.
    pub fn phase_modular(&self, u: &GridFunction, phase: usize) -> Result<ModularBreakdown> {
        self.check_len(u)?;
        self.phase_modular_values(u.values(), phase)
    }

    fn phase_modular_values(&self, u: &[f64], phase: usize) -> Result<ModularBreakdown> {
        let gagliardo = self.gagliardo_modular(u, phase);
        let interior = self.interior_modular(u, phase);
        let exterior_beta = self.exterior_modular(u, phase);
        let total = gagliardo + interior + exterior_beta;
        if !total.is_finite() {
            return Err(Error::Numeric(format!(
                "phase {} modular is not finite",
                phase + 1
            )));
        }
        Ok(ModularBreakdown {
            gagliardo,
            interior,
            exterior_beta,
            total,
        })
    }

    fn gagliardo_modular(&self, u: &[f64], phase: usize) -> f64 {
        2.0 * self.table(phase).half_gagliardo(u)
    }

    fn interior_modular(&self, u: &[f64], phase: usize) -> f64 {
        let table = self.table(phase);
        let cells = self.mesh().cells();
        self.mesh()
            .interior_cells()
            .map(|i| cells[i].width * table.hat(i).big_phi(u[i].abs()))
            .sum()
    }

    fn exterior_modular(&self, u: &[f64], phase: usize) -> f64 {
        let table = self.table(phase);
        let cells = self.mesh().cells();
        self.mesh()
            .exterior_cells()
            .map(|i| self.beta()[i] * cells[i].width * table.hat(i).big_phi(u[i].abs()))
            .sum()
    }

    /// `rho(u) = rho_1(u) + rho_2(u)`.
    pub fn combined_modular(&self, u: &GridFunction) -> Result<f64> {
        self.check_len(u)?;
        self.combined_modular_values(u.values())
    }

    fn combined_modular_values(&self, u: &[f64]) -> Result<f64> {
        Ok(self.phase_modular_values(u, 0)?.total + self.phase_modular_values(u, 1)?.total)
    }

    /// `||u||_i`, the Luxemburg norm of `rho_i`.
    pub fn phase_norm(&self, u: &GridFunction, phase: usize) -> Result<f64> {
        self.check_len(u)?;
        luxemburg_norm(u.values(), |w| {
            Ok(self.phase_modular_values(w, phase)?.total)
        })
    }

    /// `||u||`, the Luxemburg norm of the combined modular.
    pub fn norm(&self, u: &GridFunction) -> Result<f64> {
        self.check_len(u)?;
        luxemburg_norm(u.values(), |w| self.combined_modular_values(w))
    }

    /// `||u||_{Phi_hat_i}` over `Omega`.
    pub fn phi_hat_norm(&self, u: &GridFunction, phase: usize) -> Result<f64> {
        self.check_len(u)?;
        seminorm(u.values(), |w| Ok(self.interior_modular(w, phase)))
    }

    /// `||u||_{X_i} = [u]_i + ||u||_{Phi_hat_i} + ||u||_{Phi_hat_i, beta, C Omega}`.
    pub fn phase_norm_x(&self, u: &GridFunction, phase: usize) -> Result<f64> {
        self.check_len(u)?;
        let v = u.values();
        let semi = seminorm(v, |w| Ok(self.gagliardo_modular(w, phase)))?;
        let inner = seminorm(v, |w| Ok(self.interior_modular(w, phase)))?;
        let outer = seminorm(v, |w| Ok(self.exterior_modular(w, phase)))?;
        Ok(semi + inner + outer)
    }

    /// `||u||_X = ||u||_{X_1} + ||u||_{X_2}`; a diagnostic, equivalent to
    /// [`Problem::norm`].
    pub fn norm_x(&self, u: &GridFunction) -> Result<f64> {
        Ok(self.phase_norm_x(u, 0)? + self.phase_norm_x(u, 1)?)
    }

    /// Evaluates the per-phase and combined brackets at `u`.
    pub fn check_modular_norm_bracketing(&self, u: &GridFunction) -> Result<BracketReport> {
        self.check_len(u)?;
        if u.is_zero() {
            return Err(Error::Precondition("bracketing needs u != 0".into()));
        }
        let mut phases = [Bracket::new(0.0, 0.0, 0.0, 0.0); 2];
        for (i, slot) in phases.iter_mut().enumerate() {
            let norm = self.phase_norm(u, i)?;
            let modular = self.phase_modular(u, i)?.total;
            *slot = Bracket::new(norm, modular, self.phi_minus(i), self.phi_plus(i));
        }
        let norm = self.norm(u)?;
        let modular = self.combined_modular(u)?;
        let combined = Bracket::new(norm, modular, self.min_phi_minus(), self.max_phi_plus());
        let unit_modular = self.combined_modular(&u.scaled(1.0 / norm))?;
        Ok(BracketReport {
            phases,
            combined,
            unit_modular,
        })
    }

    /// Hölder inequality with factor 2 on `Omega`, for `Phi_hat_i` and its
    /// conjugate.
    pub fn holder_check(
        &self,
        u: &GridFunction,
        v: &GridFunction,
        phase: usize,
    ) -> Result<HolderReport> {
        self.check_len(u)?;
        self.check_len(v)?;
        let cells = self.mesh().cells();
        let table = self.table(phase);
        let lhs = self
            .mesh()
            .interior_cells()
            .map(|i| cells[i].width * u[i] * v[i])
            .sum::<f64>()
            .abs();
        let nu = self.phi_hat_norm(u, phase)?;
        let nv = seminorm(v.values(), |w| {
            let mut acc = 0.0;
            for i in self.mesh().interior_cells() {
                acc += cells[i].width * table.hat(i).conjugate_legendre(w[i].abs())?;
            }
            Ok(acc)
        })?;
        let rhs = 2.0 * nu * nv;
        Ok(HolderReport {
            lhs,
            rhs,
            pass: lhs <= rhs + 1e-10,
        })
    }
}
