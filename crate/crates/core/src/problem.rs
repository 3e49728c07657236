//! Problem description and its assembled discretization.
//!
//! Every pair integral in the crate (modulars, the form, the operator, the
//! Neumann derivative, the energy and its gradient) reads the same
//! [`PhaseTable`]. Sharing one weight table is what makes the discrete
//! integration-by-parts and Green identities exact up to rounding.

use rayon::prelude::*;

use crate::energy::ReactionSpec;
use crate::error::{Error, Result};
use crate::expr::Expression;
use crate::fields::{OrderField, ScalarField};
use crate::mesh::{GridFunction, Mesh, MeshConfig, PairPoint};
use crate::musielak::{FamilyKind, LocalYoung, MusielakFamily};

/// Pairs per rayon task; fixed so reductions do not depend on thread count.
pub(crate) const CHUNK: usize = 256;

#[derive(Debug, Clone)]
pub struct PhaseSpec {
    pub order: OrderField,
    pub family: MusielakFamily,
}

#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub mesh: MeshConfig,
    pub phases: [PhaseSpec; 2],
    pub beta: ScalarField,
    pub reaction: ReactionSpec,
    pub lambda: f64,
}

impl ProblemSpec {
    pub fn assemble(&self) -> Result<Problem> {
        Problem::assemble(self.clone())
    }
}

/// Kernel data at one quadrature point of a cell pair.
#[derive(Debug, Clone)]
pub struct KernelPoint {
    /// `|x - y|^{s(x, y)}`
    pub scale: f64,
    /// `dx dy / |x - y|^N`
    pub dmu: f64,
    pub young: LocalYoung,
}

/// Quadrature data of one phase over all interacting cell pairs.
#[derive(Debug, Clone)]
pub struct PhaseTable {
    pairs: Vec<(u32, u32)>,
    offsets: Vec<usize>,
    points: Vec<KernelPoint>,
    /// `Phi_hat` frozen at each cell center.
    hat: Vec<LocalYoung>,
    pub phi_minus: f64,
    pub phi_plus: f64,
}

impl PhaseTable {
    fn build(mesh: &Mesh, phase: &PhaseSpec) -> Result<PhaseTable> {
        let pairs: Vec<(u32, u32)> = mesh
            .interacting_pairs()
            .map(|(i, j)| (i as u32, j as u32))
            .collect();
        let per_pair: Vec<Result<Vec<KernelPoint>>> = pairs
            .par_iter()
            .map(|&(i, j)| {
                let mut raw: Vec<PairPoint> = Vec::new();
                mesh.pair_points(i as usize, j as usize, &mut raw);
                raw.iter()
                    .map(|p| {
                        let s = phase.order.value(p.x, p.y)?;
                        Ok(KernelPoint {
                            scale: p.distance.powf(s),
                            dmu: p.weight / p.distance,
                            young: phase.family.local(p.x, p.y)?,
                        })
                    })
                    .collect()
            })
            .collect();
        let mut offsets = Vec::with_capacity(pairs.len() + 1);
        let mut points = Vec::new();
        offsets.push(0);
        for chunk in per_pair {
            points.extend(chunk?);
            offsets.push(points.len());
        }
        let hat = mesh
            .cells()
            .iter()
            .map(|c| phase.family.local(c.center, c.center))
            .collect::<Result<Vec<_>>>()?;

        let (mut phi_minus, mut phi_plus) = (phase.family.phi_minus, phase.family.phi_plus);
        if !matches!(phase.family.kind(), FamilyKind::Tabulated(_)) {
            let excess = phase.family.phi_plus - phase.family.p_plus;
            for y in points.iter().map(|k| &k.young).chain(hat.iter()) {
                let p = match y {
                    LocalYoung::Power { p } | LocalYoung::PowerLog { p } => *p,
                    LocalYoung::Tabulated(_) => continue,
                };
                phi_minus = phi_minus.min(p);
                phi_plus = phi_plus.max(p + excess);
            }
        }
        Ok(PhaseTable {
            pairs,
            offsets,
            points,
            hat,
            phi_minus,
            phi_plus,
        })
    }

    pub fn pairs(&self) -> &[(u32, u32)] {
        &self.pairs
    }

    pub fn pair_points(&self, pair: usize) -> &[KernelPoint] {
        &self.points[self.offsets[pair]..self.offsets[pair + 1]]
    }

    pub fn hat(&self, cell: usize) -> &LocalYoung {
        &self.hat[cell]
    }

    pub fn point_count(&self) -> usize {
        self.points.len()
    }

    /// `sum_k Phi_k(|du| / scale_k) dmu_k` for one pair: half of the ordered
    /// pair integral of the modular integrand.
    #[inline]
    fn pair_modular(&self, pair: usize, du: f64) -> f64 {
        if du == 0.0 {
            return 0.0;
        }
        let m = du.abs();
        self.pair_points(pair)
            .iter()
            .map(|k| k.young.big_phi(m / k.scale) * k.dmu)
            .sum()
    }

    /// `sum_k phi_k(du / scale_k) dmu_k / scale_k`: the flux from cell `i` to
    /// cell `j` for `du = u_i - u_j`. Odd in `du`.
    #[inline]
    fn pair_flux(&self, pair: usize, du: f64) -> f64 {
        if du == 0.0 {
            return 0.0;
        }
        self.pair_points(pair)
            .iter()
            .map(|k| k.young.phi(du / k.scale) * k.dmu / k.scale)
            .sum()
    }

    /// `sum_k (Phi_k(|du'| / scale_k) - Phi_k(|du| / scale_k)) dmu_k` with
    /// `step = du' - du` supplied separately to avoid cancellation.
    #[inline]
    fn pair_modular_increment(&self, pair: usize, du: f64, du_new: f64, step: f64) -> f64 {
        if step == 0.0 {
            return 0.0;
        }
        let same_side = du == 0.0 || du_new == 0.0 || (du > 0.0) == (du_new > 0.0);
        let (a, signed_step) = if du >= 0.0 && (du > 0.0 || du_new >= 0.0) {
            (du, step)
        } else {
            (-du, -step)
        };
        self.pair_points(pair)
            .iter()
            .map(|k| {
                let x = a / k.scale;
                let d = signed_step / k.scale;
                let inc = if same_side && x + d >= 0.0 {
                    k.young.big_phi_increment(x, d)
                } else {
                    k.young.big_phi(du_new.abs() / k.scale) - k.young.big_phi(x)
                };
                inc * k.dmu
            })
            .sum()
    }

    /// `sum_k phi_k'(|du| / scale_k) dmu_k / scale_k^2`: the second derivative
    /// of the pair term in `du`.
    #[inline]
    fn pair_stiffness(&self, pair: usize, du: f64) -> f64 {
        let m = du.abs();
        self.pair_points(pair)
            .iter()
            .map(|k| k.young.phi_prime(m / k.scale) * k.dmu / (k.scale * k.scale))
            .sum()
    }

    /// Change of [`PhaseTable::half_gagliardo`] from `u` to `w`.
    pub fn half_gagliardo_increment(&self, u: &[f64], w: &[f64]) -> f64 {
        let parts: Vec<f64> = self
            .pairs
            .par_chunks(CHUNK)
            .enumerate()
            .map(|(c, chunk)| {
                chunk
                    .iter()
                    .enumerate()
                    .map(|(k, &(i, j))| {
                        let (i, j) = (i as usize, j as usize);
                        let step = (w[i] - u[i]) - (w[j] - u[j]);
                        self.pair_modular_increment(c * CHUNK + k, u[i] - u[j], w[i] - w[j], step)
                    })
                    .sum::<f64>()
            })
            .collect();
        parts.iter().sum()
    }

    /// Pair stiffness for every pair, in pair order.
    pub fn stiffnesses(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.pairs.len()];
        out.par_chunks_mut(CHUNK).enumerate().for_each(|(c, slot)| {
            for (k, f) in slot.iter_mut().enumerate() {
                let idx = c * CHUNK + k;
                let (i, j) = self.pairs[idx];
                *f = self.pair_stiffness(idx, u[i as usize] - u[j as usize]);
            }
        });
        out
    }

    /// Half of the Gagliardo modular: `sum over unordered pairs`.
    pub fn half_gagliardo(&self, u: &[f64]) -> f64 {
        let parts: Vec<f64> = self
            .pairs
            .par_chunks(CHUNK)
            .enumerate()
            .map(|(c, chunk)| {
                chunk
                    .iter()
                    .enumerate()
                    .map(|(k, &(i, j))| {
                        self.pair_modular(c * CHUNK + k, u[i as usize] - u[j as usize])
                    })
                    .sum::<f64>()
            })
            .collect();
        parts.iter().sum()
    }

    /// Flux `F_ij` for every pair, in pair order.
    pub fn fluxes(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.pairs.len()];
        out.par_chunks_mut(CHUNK).enumerate().for_each(|(c, slot)| {
            for (k, f) in slot.iter_mut().enumerate() {
                let idx = c * CHUNK + k;
                let (i, j) = self.pairs[idx];
                *f = self.pair_flux(idx, u[i as usize] - u[j as usize]);
            }
        });
        out
    }
}

/// Assembled problem: mesh, per-phase tables, and cellwise coefficients.
#[derive(Debug, Clone)]
pub struct Problem {
    spec: ProblemSpec,
    mesh: Mesh,
    tables: [PhaseTable; 2],
    /// `beta` at exterior cell centers, 0 on interior cells.
    beta: Vec<f64>,
    /// `q` at interior cell centers, unused on exterior cells.
    q: Vec<f64>,
}

impl Problem {
    pub fn assemble(spec: ProblemSpec) -> Result<Problem> {
        if !(spec.lambda > 0.0 && spec.lambda.is_finite()) {
            return Err(Error::InvalidProblem(format!(
                "lambda must be positive, got {}",
                spec.lambda
            )));
        }
        let mesh = Mesh::build(spec.mesh)?;
        let mut beta = vec![0.0; mesh.len()];
        for i in mesh.exterior_cells() {
            let b = spec.beta.value(mesh.cells()[i].center)?;
            if !(b >= 0.0) {
                return Err(Error::InvalidProblem(format!(
                    "beta must be >= 0 on the collar; beta({}) = {b}",
                    mesh.cells()[i].center
                )));
            }
            beta[i] = b;
        }
        let mut q = vec![0.0; mesh.len()];
        for i in mesh.interior_cells() {
            q[i] = spec.reaction.exponent(mesh.cells()[i].center)?;
        }
        let tables = [
            PhaseTable::build(&mesh, &spec.phases[0])?,
            PhaseTable::build(&mesh, &spec.phases[1])?,
        ];
        let min_phi_minus = tables[0].phi_minus.min(tables[1].phi_minus);
        if spec.reaction.q_plus > min_phi_minus {
            return Err(Error::InvalidProblem(format!(
                "need q+ <= min(phi1-, phi2-); q+ = {}, min = {min_phi_minus}",
                spec.reaction.q_plus
            )));
        }
        Ok(Problem {
            spec,
            mesh,
            tables,
            beta,
            q,
        })
    }

    pub fn spec(&self) -> &ProblemSpec {
        &self.spec
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn table(&self, phase: usize) -> &PhaseTable {
        &self.tables[phase]
    }

    pub fn lambda(&self) -> f64 {
        self.spec.lambda
    }

    /// Same discretization with another `lambda`.
    pub fn with_lambda(&self, lambda: f64) -> Result<Problem> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidProblem(format!(
                "lambda must be positive, got {lambda}"
            )));
        }
        let mut p = self.clone();
        p.spec.lambda = lambda;
        Ok(p)
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    pub fn q(&self) -> &[f64] {
        &self.q
    }

    pub fn reaction(&self) -> &ReactionSpec {
        &self.spec.reaction
    }

    pub fn phi_minus(&self, phase: usize) -> f64 {
        self.tables[phase].phi_minus
    }

    pub fn phi_plus(&self, phase: usize) -> f64 {
        self.tables[phase].phi_plus
    }

    pub fn min_phi_minus(&self) -> f64 {
        self.phi_minus(0).min(self.phi_minus(1))
    }

    pub fn max_phi_plus(&self) -> f64 {
        self.phi_plus(0).max(self.phi_plus(1))
    }

    pub fn zeros(&self) -> GridFunction {
        GridFunction::zeros(self.mesh.len())
    }

    pub(crate) fn check_len(&self, u: &GridFunction) -> Result<()> {
        if u.len() != self.mesh.len() {
            return Err(Error::InvalidProblem(format!(
                "grid function has {} values, mesh has {} cells",
                u.len(),
                self.mesh.len()
            )));
        }
        Ok(())
    }
}

/// Expression-level description of a problem with built-in phase families;
/// the default is the reference instance.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub mesh: MeshConfig,
    pub family: [String; 2],
    pub p: [String; 2],
    pub s: [String; 2],
    pub beta: String,
    pub q: String,
    pub lambda: f64,
}

impl Default for Instance {
    fn default() -> Self {
        Instance {
            mesh: MeshConfig::default(),
            family: ["power".into(), "power".into()],
            p: ["3".into(), "4".into()],
            s: ["0.4".into(), "0.6".into()],
            beta: "1".into(),
            q: "2".into(),
            lambda: 1.0,
        }
    }
}

impl Instance {
    pub fn spec(&self) -> Result<ProblemSpec> {
        let mesh = Mesh::build(self.mesh)?;
        let domain = mesh.computational_box();
        let phase = |i: usize| -> Result<PhaseSpec> {
            let order = OrderField::new(Expression::parse(&self.s[i])?, domain)?;
            let p = Expression::parse(&self.p[i])?;
            let kind = match self.family[i].as_str() {
                "power" => FamilyKind::Power,
                "powerlog" => FamilyKind::PowerLog,
                other => {
                    return Err(Error::InvalidFamily(format!(
                        "unknown family {other:?}; expected \"power\" or \"powerlog\""
                    )))
                }
            };
            Ok(PhaseSpec {
                order,
                family: MusielakFamily::new(kind, p, domain)?,
            })
        };
        Ok(ProblemSpec {
            mesh: self.mesh,
            phases: [phase(0)?, phase(1)?],
            beta: ScalarField::new(Expression::parse(&self.beta)?)?,
            reaction: ReactionSpec::new(Expression::parse(&self.q)?, mesh.omega())?,
            lambda: self.lambda,
        })
    }

    pub fn assemble(&self) -> Result<Problem> {
        Problem::assemble(self.spec()?)
    }
}
