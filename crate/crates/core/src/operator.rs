//! The nonlocal operator on `Omega`, the Neumann derivative on the collar,
//! the form `A_s(u, v)`, and the integration-by-parts and Green identities.
//!
//! Both the operator at an interior cell and the Neumann derivative at a
//! collar cell are `(1 / h) sum_J F_IJ` over the pair fluxes of the shared
//! weight table, so the identities reduce to antisymmetry of `F`.

use crate::error::{Error, Result};
use crate::mesh::GridFunction;
use crate::problem::Problem;

/// `A_s(u, v)` term by term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FormValue {
    /// Half of the ordered Gagliardo form, per phase.
    pub gagliardo: [f64; 2],
    /// `int_Omega a_hat(|u|) u v`, per phase.
    pub interior: [f64; 2],
    /// `int_{C Omega} beta a_hat(|u|) u v`, per phase.
    pub exterior: [f64; 2],
    pub total: f64,
}

/// An identity residual with the magnitude it is measured against.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Defect {
    pub defect: f64,
    /// `max(|terms|..., 1)`
    pub scale: f64,
}

impl Defect {
    fn new(defect: f64, terms: &[f64]) -> Defect {
        let scale = terms.iter().fold(1.0f64, |m, t| m.max(t.abs()));
        Defect { defect, scale }
    }

    pub fn relative(&self) -> f64 {
        self.defect / self.scale
    }
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
struct Compensated {
    sum: f64,
    carry: f64,
}

impl Compensated {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(self) -> f64 {
        self.sum + self.carry
    }
}

impl Problem {
    /// `sum_J F_cJ` for every cell `c`, compensated.
    fn cell_flux_sums(&self, u: &GridFunction, phase: usize) -> Result<Vec<f64>> {
        self.check_len(u)?;
        let table = self.table(phase);
        let flux = table.fluxes(u.values());
        let mut acc = vec![Compensated::default(); u.len()];
        for (&(i, j), f) in table.pairs().iter().zip(&flux) {
            acc[i as usize].add(*f);
            acc[j as usize].add(-f);
        }
        Ok(acc.into_iter().map(Compensated::value).collect())
    }

    /// `(1 / h_c) sum_J F_cJ` for every cell `c`: the operator on interior
    /// cells and the Neumann derivative on collar cells.
    pub fn cell_fluxes(&self, u: &GridFunction, phase: usize) -> Result<Vec<f64>> {
        let mut out = self.cell_flux_sums(u, phase)?;
        for (o, c) in out.iter_mut().zip(self.mesh().cells()) {
            *o /= c.width;
        }
        Ok(out)
    }

    /// Operator of phase `phase` at interior cell `cell`.
    pub fn apply_operator(&self, u: &GridFunction, phase: usize, cell: usize) -> Result<f64> {
        if cell >= self.mesh().len() || !self.mesh().is_interior(cell) {
            return Err(Error::Precondition(format!(
                "cell {cell} is not an interior cell"
            )));
        }
        Ok(self.cell_fluxes(u, phase)?[cell])
    }

    /// Neumann derivative of phase `phase` at collar cell `cell`.
    pub fn neumann_derivative(&self, u: &GridFunction, phase: usize, cell: usize) -> Result<f64> {
        if cell >= self.mesh().len() || self.mesh().is_interior(cell) {
            return Err(Error::Precondition(format!(
                "cell {cell} is not a collar cell"
            )));
        }
        Ok(self.cell_fluxes(u, phase)?[cell])
    }

    /// `A_s(u, v)`.
    pub fn form_a(&self, u: &GridFunction, v: &GridFunction) -> Result<FormValue> {
        self.check_len(u)?;
        self.check_len(v)?;
        let cells = self.mesh().cells();
        let mut out = FormValue {
            gagliardo: [0.0; 2],
            interior: [0.0; 2],
            exterior: [0.0; 2],
            total: 0.0,
        };
        for phase in 0..2 {
            let table = self.table(phase);
            let flux = table.fluxes(u.values());
            out.gagliardo[phase] = table
                .pairs()
                .iter()
                .zip(&flux)
                .map(|(&(i, j), f)| f * (v[i as usize] - v[j as usize]))
                .sum();
            for (i, c) in cells.iter().enumerate() {
                let w = c.width * table.hat(i).phi(u[i]) * v[i];
                if self.mesh().is_interior(i) {
                    out.interior[phase] += w;
                } else {
                    out.exterior[phase] += self.beta()[i] * w;
                }
            }
        }
        out.total = (0..2)
            .map(|i| out.gagliardo[i] + out.interior[i] + out.exterior[i])
            .sum();
        Ok(out)
    }

    /// `|int_Omega op(u) + int_{C Omega} N(u)|`.
    pub fn ibp_defect(&self, u: &GridFunction, phase: usize) -> Result<Defect> {
        let flux = self.cell_flux_sums(u, phase)?;
        let (mut inner, mut outer) = (Compensated::default(), Compensated::default());
        for (i, f) in flux.iter().enumerate() {
            if self.mesh().is_interior(i) {
                inner.add(*f);
            } else {
                outer.add(*f);
            }
        }
        let (inner, outer) = (inner.value(), outer.value());
        Ok(Defect::new((inner + outer).abs(), &[inner, outer]))
    }

    /// `|(1/2) G(u, v) - int_Omega v op(u) - int_{C Omega} v N(u)|` with `G`
    /// the ordered Gagliardo form.
    pub fn green_defect(&self, u: &GridFunction, v: &GridFunction, phase: usize) -> Result<Defect> {
        self.check_len(v)?;
        let table = self.table(phase);
        let pair_flux = table.fluxes(u.values());
        let mut form = Compensated::default();
        for (&(i, j), f) in table.pairs().iter().zip(&pair_flux) {
            form.add(f * (v[i as usize] - v[j as usize]));
        }
        let half_form = form.value();
        let flux = self.cell_flux_sums(u, phase)?;
        let (mut inner, mut outer) = (Compensated::default(), Compensated::default());
        for (i, f) in flux.iter().enumerate() {
            if self.mesh().is_interior(i) {
                inner.add(v[i] * f);
            } else {
                outer.add(v[i] * f);
            }
        }
        let (inner, outer) = (inner.value(), outer.value());
        Ok(Defect::new(
            (half_form - inner - outer).abs(),
            &[half_form, inner, outer],
        ))
    }

    /// `sum_i (N_i u + beta a_hat_i(|u|) u)` at each collar cell, in the
    /// order of [`crate::mesh::Mesh::exterior_cells`].
    pub fn neumann_residual(&self, u: &GridFunction) -> Result<Vec<f64>> {
        let fluxes = [self.cell_fluxes(u, 0)?, self.cell_fluxes(u, 1)?];
        Ok(self
            .mesh()
            .exterior_cells()
            .map(|e| {
                (0..2)
                    .map(|i| fluxes[i][e] + self.beta()[e] * self.table(i).hat(e).phi(u[e]))
                    .sum()
            })
            .collect())
    }
}
