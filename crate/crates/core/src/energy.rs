//! The energy `J_lambda = I_1 - lambda I_2` and its exact nodal gradient.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::expr::Expression;
use crate::fields::{Interval, ScalarField};
use crate::mesh::GridFunction;
use crate::problem::{Problem, CHUNK};

/// Power reaction `f(x, t) = |t|^{q(x)-2} t` with primitive
/// `F(x, t) = |t|^{q(x)} / q(x)`. Growth constants: `c1 = 1`, `c2 = 1/q+`.
#[derive(Debug, Clone)]
pub struct ReactionSpec {
    q: ScalarField,
    pub q_minus: f64,
    pub q_plus: f64,
    pub c1: f64,
    pub c2: f64,
}

impl ReactionSpec {
    /// `q` sampled over the closed `omega` for its bounds.
    pub fn new(q: Expression, omega: Interval) -> Result<ReactionSpec> {
        let q = ScalarField::new(q)?;
        let (q_minus, q_plus) = q.bounds(omega)?;
        if !(q_minus > 1.0) {
            return Err(Error::InvalidProblem(format!(
                "reaction exponent q = {} must exceed 1 (min {q_minus})",
                q.expression()
            )));
        }
        Ok(ReactionSpec {
            q,
            q_minus,
            q_plus,
            c1: 1.0,
            c2: 1.0 / q_plus,
        })
    }

    pub fn constant(q: f64, omega: Interval) -> Result<ReactionSpec> {
        ReactionSpec::new(Expression::constant(q), omega)
    }

    pub fn expression(&self) -> &Expression {
        self.q.expression()
    }

    pub fn exponent(&self, x: f64) -> Result<f64> {
        let q = self.q.value(x)?;
        if q > 1.0 {
            Ok(q)
        } else {
            Err(Error::InvalidProblem(format!("q({x}) = {q} <= 1")))
        }
    }

    /// `f(x, t)`.
    pub fn reaction_value(&self, x: f64, t: f64) -> Result<f64> {
        Ok(power_reaction(self.exponent(x)?, t))
    }

    /// `F(x, t)`.
    pub fn reaction_primitive(&self, x: f64, t: f64) -> Result<f64> {
        Ok(power_primitive(self.exponent(x)?, t))
    }
}

#[inline]
pub(crate) fn power_reaction(q: f64, t: f64) -> f64 {
    if t == 0.0 {
        0.0
    } else {
        t.abs().powf(q - 1.0) * t.signum()
    }
}

#[inline]
pub(crate) fn power_primitive(q: f64, t: f64) -> f64 {
    if t == 0.0 {
        0.0
    } else {
        t.abs().powf(q) / q
    }
}

/// `|t|^q / q` increment from `a >= 0` by `delta`, `a + delta >= 0`.
fn power_primitive_increment(q: f64, a: f64, delta: f64) -> f64 {
    if delta == 0.0 {
        0.0
    } else if a == 0.0 {
        power_primitive(q, delta)
    } else {
        a.powf(q) / q * (q * (delta / a).ln_1p()).exp_m1()
    }
}

/// `G(|y|) - G(|x|)` through a cancellation-free increment when `x` and `y`
/// lie on the same side of 0.
fn abs_increment(
    x: f64,
    y: f64,
    increment: impl Fn(f64, f64) -> f64,
    value: impl Fn(f64) -> f64,
) -> f64 {
    if x == y {
        0.0
    } else if x == 0.0 {
        value(y.abs())
    } else if (x > 0.0) == (y > 0.0) || y == 0.0 {
        let step = if x > 0.0 { y - x } else { x - y };
        increment(x.abs(), step)
    } else {
        value(y.abs()) - value(x.abs())
    }
}

/// Term-by-term values of the energy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyParts {
    /// `1/2` Gagliardo modular per phase.
    pub half_gagliardo: [f64; 2],
    pub interior: [f64; 2],
    pub exterior: [f64; 2],
    /// `int_Omega F(x, u)`.
    pub reaction: f64,
}

impl EnergyParts {
    /// `I_1(u)`.
    pub fn principal(&self) -> f64 {
        (0..2)
            .map(|i| self.half_gagliardo[i] + self.interior[i] + self.exterior[i])
            .sum()
    }

    pub fn total(&self, lambda: f64) -> f64 {
        self.principal() - lambda * self.reaction
    }
}

impl Problem {
    pub fn energy_parts(&self, u: &GridFunction) -> Result<EnergyParts> {
        self.check_len(u)?;
        let v = u.values();
        let cells = self.mesh().cells();
        let mut parts = EnergyParts {
            half_gagliardo: [0.0; 2],
            interior: [0.0; 2],
            exterior: [0.0; 2],
            reaction: 0.0,
        };
        for phase in 0..2 {
            let table = self.table(phase);
            parts.half_gagliardo[phase] = table.half_gagliardo(v);
            for (i, c) in cells.iter().enumerate() {
                let local = table.hat(i).big_phi(v[i].abs()) * c.width;
                if self.mesh().is_interior(i) {
                    parts.interior[phase] += local;
                } else {
                    parts.exterior[phase] += self.beta()[i] * local;
                }
            }
        }
        for i in self.mesh().interior_cells() {
            parts.reaction += cells[i].width * power_primitive(self.q()[i], v[i]);
        }
        let all = parts
            .half_gagliardo
            .iter()
            .chain(&parts.interior)
            .chain(&parts.exterior);
        if !all
            .chain(std::iter::once(&parts.reaction))
            .all(|x| x.is_finite())
        {
            return Err(Error::Numeric("non-finite energy".into()));
        }
        Ok(parts)
    }

    /// `J_lambda(u)`.
    pub fn energy(&self, u: &GridFunction) -> Result<f64> {
        Ok(self.energy_parts(u)?.total(self.lambda()))
    }

    /// Exact derivative of the discrete energy with respect to each nodal
    /// value; entry `z` equals `A_s(u, e_z) - lambda int f(x, u) e_z`.
    pub fn energy_gradient(&self, u: &GridFunction) -> Result<GridFunction> {
        self.check_len(u)?;
        let v = u.values();
        let cells = self.mesh().cells();
        let mut grad = vec![0.0; v.len()];
        for phase in 0..2 {
            let table = self.table(phase);
            let flux = table.fluxes(v);
            for (&(i, j), f) in table.pairs().iter().zip(&flux) {
                grad[i as usize] += f;
                grad[j as usize] -= f;
            }
            let local: Vec<f64> = (0..v.len())
                .into_par_iter()
                .with_min_len(CHUNK)
                .map(|i| {
                    let w = cells[i].width * table.hat(i).phi(v[i]);
                    if self.mesh().is_interior(i) {
                        w
                    } else {
                        self.beta()[i] * w
                    }
                })
                .collect();
            for (g, l) in grad.iter_mut().zip(local) {
                *g += l;
            }
        }
        let lambda = self.lambda();
        for i in self.mesh().interior_cells() {
            grad[i] -= lambda * cells[i].width * power_reaction(self.q()[i], v[i]);
        }
        GridFunction::new(grad)
    }

    /// `J(w) - J(u)`, summed term by term from increments computed without
    /// cancellation, so it stays accurate when `w` is close to `u`.
    pub fn energy_difference(&self, u: &GridFunction, w: &GridFunction) -> Result<f64> {
        self.check_len(u)?;
        self.check_len(w)?;
        let (a, b) = (u.values(), w.values());
        let cells = self.mesh().cells();
        let mut total = 0.0;
        for phase in 0..2 {
            let table = self.table(phase);
            total += table.half_gagliardo_increment(a, b);
            for (i, c) in cells.iter().enumerate() {
                let weight = if self.mesh().is_interior(i) {
                    1.0
                } else {
                    self.beta()[i]
                };
                if weight == 0.0 {
                    continue;
                }
                let inc = abs_increment(
                    a[i],
                    b[i],
                    |x, d| table.hat(i).big_phi_increment(x, d),
                    |x| table.hat(i).big_phi(x),
                );
                total += weight * c.width * inc;
            }
        }
        let lambda = self.lambda();
        for i in self.mesh().interior_cells() {
            let q = self.q()[i];
            let inc = abs_increment(
                a[i],
                b[i],
                |x, d| power_primitive_increment(q, x, d),
                |x| power_primitive(q, x),
            );
            total -= lambda * cells[i].width * inc;
        }
        if !total.is_finite() {
            return Err(Error::Numeric("non-finite energy difference".into()));
        }
        Ok(total)
    }

    /// Diagonal of the Hessian of `I_1` at `u`, nonnegative.
    pub fn principal_hessian_diagonal(&self, u: &GridFunction) -> Result<Vec<f64>> {
        self.check_len(u)?;
        let v = u.values();
        let cells = self.mesh().cells();
        let mut diag = vec![0.0; v.len()];
        for phase in 0..2 {
            let table = self.table(phase);
            for (&(i, j), k) in table.pairs().iter().zip(table.stiffnesses(v)) {
                diag[i as usize] += k;
                diag[j as usize] += k;
            }
            for (i, c) in cells.iter().enumerate() {
                let weight = if self.mesh().is_interior(i) {
                    1.0
                } else {
                    self.beta()[i]
                };
                if weight > 0.0 {
                    diag[i] += weight * c.width * table.hat(i).phi_prime(v[i]);
                }
            }
        }
        Ok(diag)
    }

    /// Derivative of `I_2(u) = int_Omega F(x, u)` in each nodal value.
    pub fn reaction_gradient(&self, u: &GridFunction) -> Result<GridFunction> {
        self.check_len(u)?;
        let cells = self.mesh().cells();
        let mut out = vec![0.0; u.len()];
        for i in self.mesh().interior_cells() {
            out[i] = cells[i].width * power_reaction(self.q()[i], u[i]);
        }
        GridFunction::new(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testing::{instance, random_function};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn omega() -> Interval {
        Interval::new(0.0, 1.0)
    }

    #[test]
    fn reaction_values() {
        let r = ReactionSpec::constant(2.0, omega()).unwrap();
        assert_eq!(r.reaction_value(0.5, 0.0).unwrap(), 0.0);
        assert_eq!(r.reaction_primitive(0.5, 0.0).unwrap(), 0.0);
        assert_eq!(r.reaction_value(0.5, 3.0).unwrap(), 3.0);
        assert_eq!(r.reaction_primitive(0.5, 3.0).unwrap(), 4.5);
        assert_eq!((r.c1, r.c2), (1.0, 0.5));
        assert!(ReactionSpec::constant(1.0, omega()).is_err());
    }

    #[test]
    fn growth_conditions_on_a_grid() {
        let r = ReactionSpec::new(Expression::parse("1.5 + x").unwrap(), omega()).unwrap();
        assert_eq!((r.q_minus, r.q_plus), (1.5, 2.5));
        for k in 0..=20 {
            let x = k as f64 / 20.0;
            let q = r.exponent(x).unwrap();
            for t in [-7.0, -1.0, -0.01, 0.0, 1e-4, 0.3, 2.0, 40.0] {
                let f = r.reaction_value(x, t).unwrap();
                let big = r.reaction_primitive(x, t).unwrap();
                let m = f64::abs(t).powf(q);
                assert!(f.abs() <= r.c1 * f64::abs(t).powf(q - 1.0) * (1.0 + 1e-15));
                assert!(r.c2 * m <= big * (1.0 + 1e-15));
                assert!(big <= r.c1 / r.q_minus * m * (1.0 + 1e-15));
            }
        }
    }

    #[test]
    fn zero_function_has_zero_energy_and_gradient() {
        let p = instance(8, 4, "2", "3", "0.4", "0.6", "1", 0.7);
        let z = p.zeros();
        assert_eq!(p.energy(&z).unwrap(), 0.0);
        assert!(p
            .energy_gradient(&z)
            .unwrap()
            .values()
            .iter()
            .all(|&g| g == 0.0));
    }

    #[test]
    fn constant_function_closed_form() {
        let lambda = 0.7;
        let p = instance(8, 4, "2", "3", "0.4", "0.6", "0", lambda);
        for t0 in [0.5, 1.0, 2.5] {
            let u = GridFunction::constant(p.mesh().len(), t0);
            let expected = t0 * t0 / 2.0 + t0.powi(3) / 3.0 - lambda * t0 * t0 / 2.0;
            let got = p.energy(&u).unwrap();
            assert!(
                (got - expected).abs() <= 1e-13 * expected.abs().max(1.0),
                "{got} vs {expected}"
            );
        }
    }

    #[test]
    fn gradient_is_odd() {
        let p = instance(8, 4, "2.5", "3", "0.3+0.1*abs(x-y)", "0.6", "1", 1.3);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u = random_function(&p, &mut rng);
        let g = p.energy_gradient(&u).unwrap();
        let gm = p.energy_gradient(&u.scaled(-1.0)).unwrap();
        for (a, b) in g.values().iter().zip(gm.values()) {
            assert_eq!(*a, -*b);
        }
    }

    #[test]
    fn gradient_matches_central_differences() {
        let p = instance(
            8,
            4,
            "3",
            "2.5+0.5*abs(x-y)",
            "0.4",
            "0.3+0.2*abs(x-y)",
            "1+x*x",
            0.9,
        );
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..3 {
            let u = random_function(&p, &mut rng);
            let g = p.energy_gradient(&u).unwrap();
            for z in 0..u.len() {
                let h = 1e-6;
                let mut up = u.clone();
                up.values_mut()[z] += h;
                let mut dn = u.clone();
                dn.values_mut()[z] -= h;
                let fd = (p.energy(&up).unwrap() - p.energy(&dn).unwrap()) / (2.0 * h);
                assert!(
                    (fd - g[z]).abs() <= 1e-6 * (1.0 + g[z].abs()),
                    "z={z}: {fd} vs {}",
                    g[z]
                );
            }
        }
    }

    #[test]
    fn principal_part_is_convex() {
        let p = instance(8, 4, "2", "3.5", "0.45", "0.25", "0.5", 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for k in 0..20 {
            let u = random_function(&p, &mut rng);
            let v = random_function(&p, &mut rng);
            let t = (k as f64 + 0.5) / 20.0;
            let mix = GridFunction::new(
                u.values()
                    .iter()
                    .zip(v.values())
                    .map(|(a, b)| t * a + (1.0 - t) * b)
                    .collect(),
            )
            .unwrap();
            let i1 = |w: &GridFunction| p.energy_parts(w).unwrap().principal();
            assert!(i1(&mix) <= t * i1(&u) + (1.0 - t) * i1(&v) + 1e-12);
        }
    }
}
