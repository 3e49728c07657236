//! Minimization of `J_lambda` and the two existence branches: a
//! negative-energy minimizer inside a small ball for `lambda < lambda_*`,
//! and a global minimizer started from `t0 1_Omega` for `lambda >= lambda^*`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::mesh::GridFunction;
use crate::modular::luxemburg_norm;
use crate::problem::Problem;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    /// Stop when the sup-norm of the nodal gradient is below this.
    pub tol: f64,
    /// ... and the sup Neumann residual is below this times `sup |u|`.
    pub residual_tol: f64,
    pub max_iters: usize,
    /// Ball radius for the small-lambda branch.
    pub rho: f64,
    /// Amplitude of the large-lambda initializer, `> 1`.
    pub t0: f64,
    /// Trial functions for the embedding constant.
    pub trials: usize,
    pub seed: u64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol: 1e-6,
            residual_tol: 1e-5,
            max_iters: 50_000,
            rho: 0.5,
            t0: 2.0,
            trials: 8,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    SmallLambda,
    LargeLambda,
    Custom,
}

impl Branch {
    pub fn name(self) -> &'static str {
        match self {
            Branch::SmallLambda => "small-lambda",
            Branch::LargeLambda => "large-lambda",
            Branch::Custom => "custom",
        }
    }
}

impl std::str::FromStr for Branch {
    type Err = Error;
    fn from_str(s: &str) -> Result<Branch> {
        match s {
            "small" | "small-lambda" => Ok(Branch::SmallLambda),
            "large" | "large-lambda" => Ok(Branch::LargeLambda),
            "custom" => Ok(Branch::Custom),
            other => Err(Error::Config(format!("unknown branch {other:?}"))),
        }
    }
}

/// Outcome of [`minimize`].
#[derive(Debug, Clone)]
pub struct Minimization {
    pub u: GridFunction,
    pub energy: f64,
    pub gradient_sup_norm: f64,
    pub neumann_sup_residual: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Energy after each accepted step, starting with the initial energy and
    /// accumulated from the accepted decreases.
    pub energies: Vec<f64>,
    /// Iterates at steps `0, 1, 2, 4, 8, ...`, every multiple of
    /// [`SNAPSHOT_STRIDE`], and the final step.
    pub snapshots: Vec<(usize, GridFunction)>,
}

pub const SNAPSHOT_STRIDE: usize = 64;
const ARMIJO: f64 = 1e-4;
const MAX_HALVINGS: usize = 80;
const HESSIAN_FLOOR: f64 = 1e-10;

/// `sup |u|`, the scale of the Neumann residual test.
fn solution_scale(u: &GridFunction) -> f64 {
    u.sup_norm()
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Descent along `-g / H` with `H` the (floored) Hessian diagonal of the
/// convex part, unit trial steps, and Armijo backtracking by halving. The
/// Armijo test uses [`Problem::energy_difference`], so it stays meaningful
/// when the decrease is far below the rounding level of `J` itself.
pub fn minimize(
    problem: &Problem,
    init: &GridFunction,
    opts: &SolveOptions,
) -> Result<Minimization> {
    problem.check_len(init)?;
    let mut u = init.clone();
    let mut energy = problem.energy(&u)?;
    let mut grad = problem.energy_gradient(&u)?;
    let mut energies = vec![energy];
    let mut snapshots = vec![(0, u.clone())];
    let mut last_step: f64 = 0.5;
    let mut iterations = 0;
    let converged = loop {
        let gsup = grad.sup_norm();
        let residual = sup(&problem.neumann_residual(&u)?);
        if gsup < opts.tol && residual <= opts.residual_tol * solution_scale(&u) {
            break true;
        }
        if gsup == 0.0 {
            break residual == 0.0;
        }
        if iterations >= opts.max_iters {
            break false;
        }
        let diag = problem.principal_hessian_diagonal(&u)?;
        let floor = HESSIAN_FLOOR
            * diag
                .iter()
                .fold(0.0f64, |m, &h| m.max(h))
                .max(f64::MIN_POSITIVE);
        let dir: Vec<f64> = grad
            .values()
            .iter()
            .zip(&diag)
            .map(|(g, h)| -g / h.max(floor))
            .collect();
        let slope: f64 = grad.values().iter().zip(&dir).map(|(g, d)| g * d).sum();
        let mut alpha = (2.0 * last_step).min(1.0);
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let trial = GridFunction::new(
                u.values()
                    .iter()
                    .zip(&dir)
                    .map(|(x, d)| x + alpha * d)
                    .collect(),
            )?;
            match problem.energy_difference(&u, &trial) {
                Ok(de) if de <= ARMIJO * alpha * slope => {
                    accepted = Some((trial, de));
                    break;
                }
                Ok(_) | Err(Error::Numeric(_)) => alpha *= 0.5,
                Err(e) => return Err(e),
            }
        }
        let Some((next, decrease)) = accepted else {
            return Err(Error::Stagnation {
                iterations,
                gradient_sup_norm: gsup,
                last_iterate: u.into_values(),
            });
        };
        last_step = alpha;
        grad = problem.energy_gradient(&next)?;
        u = next;
        energy += decrease;
        iterations += 1;
        energies.push(energy);
        if iterations.is_power_of_two() || iterations % SNAPSHOT_STRIDE == 0 {
            snapshots.push((iterations, u.clone()));
        }
    };
    if snapshots.last().map(|s| s.0) != Some(iterations) {
        snapshots.push((iterations, u.clone()));
    }
    let neumann_sup_residual = sup(&problem.neumann_residual(&u)?);
    Ok(Minimization {
        energy: problem.energy(&u)?,
        gradient_sup_norm: grad.sup_norm(),
        neumann_sup_residual,
        iterations,
        converged,
        energies,
        snapshots,
        u,
    })
}

/// `||u||_{q(x)}`: Luxemburg norm of `int_Omega |u|^{q(x)}`.
pub fn lq_norm(problem: &Problem, u: &GridFunction) -> Result<f64> {
    problem.check_len(u)?;
    let cells = problem.mesh().cells();
    let range = problem.mesh().interior_cells();
    let q = problem.q();
    match luxemburg_norm(&u.values()[range.clone()], |w| {
        Ok(w.iter()
            .zip(range.clone())
            .map(|(v, i)| cells[i].width * v.abs().powf(q[i]))
            .sum())
    }) {
        Err(Error::DegenerateModular) => Ok(0.0),
        other => other,
    }
}

/// Lower estimate of the embedding constant of `X` into `L^{q(x)}(Omega)`.
#[derive(Debug, Clone)]
pub struct EmbeddingEstimate {
    pub c_hat: f64,
    pub best: GridFunction,
    pub trials: usize,
}

fn embedding_ratio(problem: &Problem, u: &GridFunction) -> Result<f64> {
    let n = problem.norm(u)?;
    if n == 0.0 {
        return Ok(0.0);
    }
    Ok(lq_norm(problem, u)? / n)
}

fn trial_function(problem: &Problem, k: usize, rng: &mut ChaCha8Rng) -> GridFunction {
    let mesh = problem.mesh();
    let omega = mesh.omega();
    let values: Vec<f64> = match k {
        0 => vec![1.0; mesh.len()],
        1 => (0..mesh.len())
            .map(|i| if mesh.is_interior(i) { 1.0 } else { 0.0 })
            .collect(),
        _ if k.is_multiple_of(2) => {
            let modes: Vec<(f64, f64)> = (1..=4)
                .map(|m| {
                    (
                        rng.gen_range(-1.0..1.0) / m as f64,
                        rng.gen_range(0.0..std::f64::consts::TAU),
                    )
                })
                .collect();
            let offset = rng.gen_range(-1.0..1.0);
            mesh.cells()
                .iter()
                .map(|c| {
                    let z = (c.center - omega.lo) / omega.len();
                    offset
                        + modes
                            .iter()
                            .enumerate()
                            .map(|(m, (a, ph))| {
                                a * (std::f64::consts::PI * (m + 1) as f64 * z + ph).sin()
                            })
                            .sum::<f64>()
                })
                .collect()
        }
        _ => (0..mesh.len()).map(|_| rng.gen_range(-1.0..1.0)).collect(),
    };
    GridFunction::new(values).expect("finite trial values")
}

/// Coordinate ascent of the ratio over block scalings of `u`.
fn refine_trial(problem: &Problem, u: GridFunction, ratio: f64) -> Result<(GridFunction, f64)> {
    const BLOCKS: usize = 8;
    const SWEEPS: usize = 2;
    let n = u.len();
    let mut best = (u, ratio);
    let mut delta = 0.5;
    for _ in 0..SWEEPS {
        for b in 0..BLOCKS {
            let range = (b * n / BLOCKS)..((b + 1) * n / BLOCKS);
            for factor in [1.0 + delta, 1.0 - delta] {
                let mut cand = best.0.clone();
                for k in range.clone() {
                    cand.values_mut()[k] *= factor;
                }
                let r = embedding_ratio(problem, &cand)?;
                if r > best.1 {
                    best = (cand, r);
                }
            }
        }
        delta *= 0.5;
    }
    Ok(best)
}

/// `c_hat = max ||u||_{q(x)} / ||u||` over `trials` seeded trial functions,
/// each refined by coordinate ascent. Nondecreasing in `trials` for a fixed
/// seed.
pub fn estimate_embedding_constant(
    problem: &Problem,
    trials: usize,
    seed: u64,
) -> Result<EmbeddingEstimate> {
    if trials == 0 {
        return Err(Error::Precondition("at least one trial is required".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(GridFunction, f64)> = None;
    for k in 0..trials {
        let u = trial_function(problem, k, &mut rng);
        let r = embedding_ratio(problem, &u)?;
        let refined = refine_trial(problem, u, r)?;
        if best.as_ref().is_none_or(|b| refined.1 > b.1) {
            best = Some(refined);
        }
    }
    let (best, c_hat) = best.expect("trials >= 1");
    Ok(EmbeddingEstimate {
        c_hat,
        best,
        trials,
    })
}

/// `rho^{max phi+ - q+} / (2 c2 c^{q+})`.
pub fn lambda_star_formula(rho: f64, max_phi_plus: f64, q_plus: f64, c2: f64, c: f64) -> f64 {
    rho.powf(max_phi_plus - q_plus) / (2.0 * c2 * c.powf(q_plus))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaStar {
    pub rho: f64,
    pub c_hat: f64,
    pub max_phi_plus: f64,
    pub q_plus: f64,
    pub c2: f64,
    pub value: f64,
}

/// `lambda_*` for ball radius `rho` and embedding constant `c_hat`.
pub fn estimate_lambda_star_small(problem: &Problem, rho: f64, c_hat: f64) -> Result<LambdaStar> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::Precondition(format!(
            "rho must lie in (0, 1), got {rho}"
        )));
    }
    if !(c_hat > 0.0 && c_hat.is_finite()) {
        return Err(Error::Precondition(format!(
            "embedding constant must be positive, got {c_hat}"
        )));
    }
    if rho >= 1.0 / c_hat {
        return Err(Error::Precondition(format!(
            "rho = {rho} must be below 1/c = {}",
            1.0 / c_hat
        )));
    }
    let r = problem.reaction();
    let max_phi_plus = problem.max_phi_plus();
    Ok(LambdaStar {
        rho,
        c_hat,
        max_phi_plus,
        q_plus: r.q_plus,
        c2: r.c2,
        value: lambda_star_formula(rho, max_phi_plus, r.q_plus, r.c2, c_hat),
    })
}

/// Empirical large-lambda threshold for `u0 = t0 1_Omega`.
#[derive(Debug, Clone, PartialEq)]
pub struct Threshold {
    pub t0: f64,
    pub u0: GridFunction,
    /// `I_1(u0)`, including the Gagliardo term of the jump at the boundary.
    pub principal: f64,
    /// `I_2(u0)`
    pub reaction: f64,
    /// Smallest tested `lambda` with `J_lambda(u0) < 0`.
    pub lambda_hat: f64,
    /// `I_1 / I_2` at the globally constant `u = t0`.
    pub constant_variant: f64,
    /// `sum_i int_Omega Phi_hat_i(t0) / I_2(u0)`: the threshold when the
    /// Gagliardo term of the jump is left out.
    pub without_jump: f64,
}

pub fn large_lambda_initializer(problem: &Problem, t0: f64) -> GridFunction {
    let mesh = problem.mesh();
    GridFunction::new(
        (0..mesh.len())
            .map(|i| if mesh.is_interior(i) { t0 } else { 0.0 })
            .collect(),
    )
    .expect("finite t0")
}

/// Bisection over `lambda` to 1e-3 relative for the sign change of
/// `J_lambda(u0)`.
pub fn large_lambda_threshold(problem: &Problem, t0: f64) -> Result<Threshold> {
    if !(t0 > 1.0 && t0.is_finite()) {
        return Err(Error::Precondition(format!("t0 must exceed 1, got {t0}")));
    }
    let u0 = large_lambda_initializer(problem, t0);
    let parts = problem.energy_parts(&u0)?;
    let energy_at = |lambda: f64| parts.total(lambda);
    let mut hi = 1.0;
    let mut k = 0;
    while energy_at(hi) >= 0.0 {
        hi *= 2.0;
        k += 1;
        if k > 1100 || !hi.is_finite() {
            return Err(Error::Numeric("no lambda makes J(u0) negative".into()));
        }
    }
    let mut lo = 0.0;
    while hi - lo > 1e-3 * hi {
        let mid = 0.5 * (lo + hi);
        if energy_at(mid) < 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let constant = problem.energy_parts(&GridFunction::constant(u0.len(), t0))?;
    Ok(Threshold {
        t0,
        principal: parts.principal(),
        reaction: parts.reaction,
        lambda_hat: hi,
        constant_variant: constant.principal() / constant.reaction,
        without_jump: (parts.interior[0] + parts.interior[1]) / parts.reaction,
        u0,
    })
}

/// Certified outcome of a solve.
#[derive(Debug, Clone)]
pub struct SolveReport {
    pub minimizer: GridFunction,
    pub energy: f64,
    pub gradient_sup_norm: f64,
    pub neumann_sup_residual: f64,
    /// `sup |u|`
    pub solution_scale: f64,
    pub norm_of_minimizer: f64,
    /// `||u||_X / ||u||`
    pub norm_equivalence_ratio: f64,
    pub branch: Branch,
    pub iterations: usize,
    pub converged: bool,
    pub lambda: f64,
    pub lambda_star_estimate: f64,
    pub lambda_hat_star: f64,
    pub embedding_constant_estimate: f64,
    pub rho: f64,
    pub inside_ball: bool,
    /// Estimate of the interactions dropped beyond the collar.
    pub tail_bound: f64,
    pub warnings: Vec<String>,
    pub energies: Vec<f64>,
    pub snapshots: Vec<(usize, GridFunction)>,
}

impl SolveReport {
    /// `key=value` lines of `report.txt`, in a fixed order.
    pub fn key_values(&self) -> Vec<(&'static str, String)> {
        vec![
            ("energy", format!("{:.16e}", self.energy)),
            (
                "gradient_sup_norm",
                format!("{:.16e}", self.gradient_sup_norm),
            ),
            (
                "neumann_sup_residual",
                format!("{:.16e}", self.neumann_sup_residual),
            ),
            ("solution_scale", format!("{:.16e}", self.solution_scale)),
            ("norm", format!("{:.16e}", self.norm_of_minimizer)),
            (
                "norm_equivalence_ratio",
                format!("{:.16e}", self.norm_equivalence_ratio),
            ),
            ("branch", self.branch.name().to_string()),
            ("iterations", self.iterations.to_string()),
            ("converged", self.converged.to_string()),
            ("lambda", format!("{:.16e}", self.lambda)),
            (
                "lambda_star_estimate",
                format!("{:.16e}", self.lambda_star_estimate),
            ),
            ("lambda_hat_star", format!("{:.16e}", self.lambda_hat_star)),
            (
                "embedding_constant_estimate",
                format!("{:.16e}", self.embedding_constant_estimate),
            ),
            ("rho", format!("{:.16e}", self.rho)),
            ("inside_ball", self.inside_ball.to_string()),
            ("collar_tail_bound", format!("{:.16e}", self.tail_bound)),
            ("q_convention", "q+ used for q^-/+ in lambda_*".to_string()),
        ]
    }

    /// Nontrivial, converged, and within the residual tolerances.
    pub fn certified(&self, opts: &SolveOptions) -> bool {
        self.converged
            && self.energy < 0.0
            && self.gradient_sup_norm < opts.tol
            && self.neumann_sup_residual <= opts.residual_tol * self.solution_scale
    }
}

/// Dropped-tail estimate `sum_i 2 |Omega| Phi_i(M R^{-s-}) / (s- phi-)`
/// with `M = sup |u|` and `R` the collar width, assuming `u` vanishes
/// beyond the collar.
pub fn collar_tail_bound(problem: &Problem, u: &GridFunction) -> f64 {
    let mesh = problem.mesh();
    let r = mesh.config().collar;
    let m = u.sup_norm();
    let omega = mesh.omega().len();
    (0..2)
        .map(|i| {
            let phase = &problem.spec().phases[i];
            let s = phase.order.s_minus;
            let t = m * r.powf(-s);
            let phi = mesh
                .interior_cells()
                .map(|c| problem.table(i).hat(c).big_phi(t))
                .fold(0.0, f64::max);
            2.0 * omega * phi / (s * problem.phi_minus(i))
        })
        .sum()
}

/// Inputs shared by the branches: `c_hat`, `lambda_*`, and `lambda_hat*`.
#[derive(Debug, Clone)]
pub struct Thresholds {
    pub embedding: EmbeddingEstimate,
    pub lambda_star: LambdaStar,
    pub large: Threshold,
}

pub fn thresholds(problem: &Problem, opts: &SolveOptions) -> Result<Thresholds> {
    let embedding = estimate_embedding_constant(problem, opts.trials, opts.seed)?;
    let lambda_star = estimate_lambda_star_small(problem, opts.rho, embedding.c_hat)?;
    let large = large_lambda_threshold(problem, opts.t0)?;
    Ok(Thresholds {
        embedding,
        lambda_star,
        large,
    })
}

fn report(
    problem: &Problem,
    run: Minimization,
    branch: Branch,
    th: &Thresholds,
    mut warnings: Vec<String>,
) -> Result<SolveReport> {
    let norm = problem.norm(&run.u)?;
    let ratio = if norm > 0.0 {
        problem.norm_x(&run.u)? / norm
    } else {
        f64::NAN
    };
    let inside_ball = norm < th.lambda_star.rho;
    if !run.converged {
        warnings.push(format!(
            "not converged after {} iterations (gradient sup-norm {:e})",
            run.iterations, run.gradient_sup_norm
        ));
    }
    if run.energy >= 0.0 {
        warnings.push(format!(
            "energy {:e} is not negative: no nontrivial solution certified",
            run.energy
        ));
    }
    if branch == Branch::SmallLambda && !inside_ball {
        warnings.push(format!(
            "branch violation: ||u|| = {norm} is not below rho = {}",
            th.lambda_star.rho
        ));
    }
    if problem.reaction().q_plus >= problem.min_phi_minus() {
        warnings.push("q+ equals min phi-: the small-t argument needs strict inequality".into());
    }
    Ok(SolveReport {
        tail_bound: collar_tail_bound(problem, &run.u),
        solution_scale: solution_scale(&run.u),
        energy: run.energy,
        gradient_sup_norm: run.gradient_sup_norm,
        neumann_sup_residual: run.neumann_sup_residual,
        norm_of_minimizer: norm,
        norm_equivalence_ratio: ratio,
        branch,
        iterations: run.iterations,
        converged: run.converged,
        lambda: problem.lambda(),
        lambda_star_estimate: th.lambda_star.value,
        lambda_hat_star: th.large.lambda_hat,
        embedding_constant_estimate: th.lambda_star.c_hat,
        rho: th.lambda_star.rho,
        inside_ball,
        warnings,
        energies: run.energies,
        snapshots: run.snapshots,
        minimizer: run.u,
    })
}

/// Smooth bump with `theta(x0) = 1`, supported in `B_{2R}(x0)`, `x0` the
/// midpoint of `Omega`, `R = |Omega| / 8`.
pub fn bump(problem: &Problem) -> GridFunction {
    let omega = problem.mesh().omega();
    let x0 = 0.5 * (omega.lo + omega.hi);
    let radius = 2.0 * omega.len() / 8.0;
    GridFunction::from_fn(problem.mesh(), |x| {
        let z = (x - x0) / radius;
        if z.abs() < 1.0 {
            (1.0 - 1.0 / (1.0 - z * z)).exp()
        } else {
            0.0
        }
    })
}

pub const SMALL_T_HALVINGS: usize = 40;

/// `J(t theta)` for `t = 2^{-k}`, `k = 0..=40`.
pub fn small_t_scan(problem: &Problem) -> Result<Vec<(f64, f64)>> {
    let theta = bump(problem);
    (0..=SMALL_T_HALVINGS)
        .map(|k| {
            let t = 0.5f64.powi(k as i32);
            Ok((t, problem.energy(&theta.scaled(t))?))
        })
        .collect()
}

pub fn solve_small_lambda(
    problem: &Problem,
    th: &Thresholds,
    opts: &SolveOptions,
) -> Result<SolveReport> {
    let lambda = problem.lambda();
    if lambda >= th.lambda_star.value {
        return Err(Error::Precondition(format!(
            "lambda = {lambda} is not below lambda_* = {}",
            th.lambda_star.value
        )));
    }
    let scan = small_t_scan(problem)?;
    let (t, e) = scan
        .iter()
        .copied()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("nonempty scan");
    if !(e < 0.0) {
        return Err(Error::SmallTimeFailure {
            halvings: SMALL_T_HALVINGS,
        });
    }
    let run = minimize(problem, &bump(problem).scaled(t), opts)?;
    report(problem, run, Branch::SmallLambda, th, Vec::new())
}

pub fn solve_large_lambda(
    problem: &Problem,
    th: &Thresholds,
    opts: &SolveOptions,
) -> Result<SolveReport> {
    let lambda = problem.lambda();
    let energy = problem.energy(&th.large.u0)?;
    if energy >= 0.0 {
        return Err(Error::BelowThreshold {
            lambda,
            threshold: th.large.lambda_hat,
            energy,
        });
    }
    let run = minimize(problem, &th.large.u0, opts)?;
    report(problem, run, Branch::LargeLambda, th, Vec::new())
}

/// Branch from `lambda` unless forced: below `lambda_*` small, at or above
/// `lambda_hat*` large, otherwise a custom descent from `u0`.
pub fn solve(
    problem: &Problem,
    branch: Option<Branch>,
    opts: &SolveOptions,
) -> Result<SolveReport> {
    let th = thresholds(problem, opts)?;
    let lambda = problem.lambda();
    let branch = branch.unwrap_or(if lambda < th.lambda_star.value {
        Branch::SmallLambda
    } else if lambda >= th.large.lambda_hat {
        Branch::LargeLambda
    } else {
        Branch::Custom
    });
    match branch {
        Branch::SmallLambda => solve_small_lambda(problem, &th, opts),
        Branch::LargeLambda => solve_large_lambda(problem, &th, opts),
        Branch::Custom => {
            let warning = format!(
                "lambda = {lambda} lies in [lambda_*, lambda_hat*) = [{}, {}), where no existence result applies",
                th.lambda_star.value, th.large.lambda_hat
            );
            let run = minimize(problem, &th.large.u0, opts)?;
            report(problem, run, Branch::Custom, &th, vec![warning])
        }
    }
}
