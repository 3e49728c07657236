//! The verification suite: structural conditions of both phases, the
//! integration-by-parts and Green identities, modular-norm brackets, the
//! Luxemburg closed form, gradient consistency, and the embedding
//! classifier.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::fields::Interval;
use crate::mesh::{GridFunction, MeshConfig};
use crate::musielak::{Integrability, MusielakFamily};
use crate::problem::{Instance, Problem};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    fn push(&mut self, name: impl Into<String>, pass: bool, detail: String) {
        self.checks.push(Check {
            name: name.into(),
            pass,
            detail,
        });
    }

    /// One `name: PASS|FAIL (detail)` line per check.
    pub fn lines(&self) -> Vec<String> {
        self.checks
            .iter()
            .map(|c| {
                format!(
                    "{}: {} ({})",
                    c.name,
                    if c.pass { "PASS" } else { "FAIL" },
                    c.detail
                )
            })
            .collect()
    }
}

/// Sample counts of the suite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuiteSize {
    pub identity_samples: usize,
    pub bracket_samples: usize,
    pub holder_samples: usize,
    pub gradient_samples: usize,
    pub condition_budget: usize,
}

impl Default for SuiteSize {
    fn default() -> Self {
        SuiteSize {
            identity_samples: 10,
            bracket_samples: 10,
            holder_samples: 10,
            gradient_samples: 2,
            condition_budget: 8,
        }
    }
}

/// `(s, p)` pairs of the embedding classifier check, none on `s p = 1`.
pub const EMBEDDING_CASES: [(f64, f64); 6] = [
    (0.4, 2.0),
    (0.5, 3.0),
    (0.3, 3.0),
    (0.6, 2.0),
    (0.2, 4.0),
    (0.7, 1.5),
];

pub fn random_function(problem: &Problem, rng: &mut impl Rng) -> GridFunction {
    GridFunction::new(
        (0..problem.mesh().len())
            .map(|_| rng.gen_range(-1.0..1.0))
            .collect(),
    )
    .expect("finite samples")
}

pub fn run_suite(problem: &Problem, seed: u64, size: SuiteSize) -> Result<VerifyReport> {
    let mut rep = VerifyReport::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    structural_checks(problem, size, &mut rep)?;
    embedding_checks(&mut rep)?;

    for phase in 0..2 {
        let mut worst_ibp: f64 = 0.0;
        let mut worst_green: f64 = 0.0;
        for _ in 0..size.identity_samples {
            let u = random_function(problem, &mut rng);
            let v = random_function(problem, &mut rng);
            worst_ibp = worst_ibp.max(problem.ibp_defect(&u, phase)?.relative());
            worst_green = worst_green.max(problem.green_defect(&u, &v, phase)?.relative());
        }
        rep.push(
            format!("phase{}.integration_by_parts", phase + 1),
            worst_ibp <= 1e-12,
            format!("worst relative defect {worst_ibp:.3e}"),
        );
        rep.push(
            format!("phase{}.green_formula", phase + 1),
            worst_green <= 1e-12,
            format!("worst relative defect {worst_green:.3e}"),
        );
        let mut holder_ok = true;
        let mut worst_ratio: f64 = 0.0;
        for _ in 0..size.holder_samples {
            let u = random_function(problem, &mut rng);
            let v = random_function(problem, &mut rng);
            let h = problem.holder_check(&u, &v, phase)?;
            holder_ok &= h.pass;
            if h.rhs > 0.0 {
                worst_ratio = worst_ratio.max(h.lhs / h.rhs);
            }
        }
        rep.push(
            format!("phase{}.holder", phase + 1),
            holder_ok,
            format!("max lhs/rhs {worst_ratio:.4}"),
        );
    }

    let mut worst_margin = f64::INFINITY;
    let mut worst_unit: f64 = 0.0;
    for target in [0.3, 3.0] {
        for _ in 0..size.bracket_samples {
            let u = random_function(problem, &mut rng);
            let u = u.scaled(target / problem.norm(&u)?);
            let r = problem.check_modular_norm_bracketing(&u)?;
            worst_margin = worst_margin.min(r.worst_margin());
            worst_unit = worst_unit.max((r.unit_modular - 1.0).abs());
        }
    }
    rep.push(
        "modular_norm_brackets",
        worst_margin >= -1e-8 && worst_unit <= 1e-8,
        format!("worst margin {worst_margin:.3e}, worst |rho(u/||u||) - 1| {worst_unit:.3e}"),
    );

    let worst = luxemburg_closed_form(problem.mesh().config(), seed)?;
    rep.push(
        "luxemburg_closed_form",
        worst <= 1e-8,
        format!("worst relative error {worst:.3e}"),
    );

    let mut worst_fd: f64 = 0.0;
    for _ in 0..size.gradient_samples {
        let u = random_function(problem, &mut rng);
        worst_fd = worst_fd.max(gradient_fd_error(problem, &u)?);
    }
    rep.push(
        "gradient_finite_differences",
        worst_fd <= 1e-6,
        format!("worst |g - fd| / (1 + |g|) {worst_fd:.3e}"),
    );
    Ok(rep)
}

fn structural_checks(problem: &Problem, size: SuiteSize, rep: &mut VerifyReport) -> Result<()> {
    for (k, phase) in problem.spec().phases.iter().enumerate() {
        let fam = &phase.family;
        let tag = format!("phase{}", k + 1);
        let phi1 = fam.check_phi1(size.condition_budget)?;
        rep.push(
            format!("{tag}.phi1"),
            phi1.pass,
            format!(
                "observed [{:.6}, {:.6}] within [{:.6}, {:.6}]",
                phi1.phi_minus_observed, phi1.phi_plus_observed, fam.phi_minus, fam.phi_plus
            ),
        );
        let d2 = fam.check_delta2(size.condition_budget)?;
        rep.push(
            format!("{tag}.delta2"),
            d2.pass,
            format!(
                "K = {:.6}, worst Phi(2t)/Phi(t) = {:.6}",
                d2.constant, d2.worst_ratio
            ),
        );
        let cex = fam.phi2_counterexample(size.condition_budget)?;
        rep.push(
            format!("{tag}.phi2_sqrt_convexity"),
            cex.is_none(),
            match cex {
                None => "midpoint convex on all samples".into(),
                Some((x, y, a, b)) => format!("fails at x={x}, y={y}, t in [{a:e}, {b:e}]"),
            },
        );
        let sup1 = fam.phi3_sup(size.condition_budget)?;
        rep.push(
            format!("{tag}.phi3"),
            sup1.is_finite(),
            format!("sup Phi(x, y, 1) = {sup1:.6}"),
        );
        let emb = fam.embedding_condition_check(phase.order.s_minus, 1)?;
        rep.push(
            format!("{tag}.embedding_conditions"),
            true,
            format!("near 0: {}, at infinity: {}", emb.at_zero, emb.at_infinity),
        );
    }
    let q_plus = problem.reaction().q_plus;
    let min_phi_minus = problem.min_phi_minus();
    rep.push(
        "reaction_growth",
        q_plus <= min_phi_minus,
        format!(
            "q+ = {q_plus}, min phi- = {min_phi_minus}{}",
            if q_plus < min_phi_minus {
                " (strict)"
            } else {
                " (not strict)"
            }
        ),
    );
    // |t|^{q+} / Phi_hat_i(t) must not grow along t = 10^3 .. 10^6
    let mut worst_growth: f64 = 0.0;
    for i in 0..2 {
        for c in problem.mesh().interior_cells() {
            let hat = problem.table(i).hat(c);
            let ratio = |t: f64| (q_plus * t.ln() - hat.big_phi(t).ln()).exp();
            worst_growth = worst_growth.max(ratio(1e6) / ratio(1e3));
        }
    }
    rep.push(
        "reaction_growth_ratio",
        worst_growth <= 1.0,
        format!("max over cells of (t^q+ / Phi_hat(t)) at 1e6 over 1e3: {worst_growth:.3e}"),
    );
    Ok(())
}

/// Numeric classifier against the exact rule `s p < N` for constant-exponent
/// power families.
fn embedding_checks(rep: &mut VerifyReport) -> Result<()> {
    let mut agree = 0;
    let mut detail = Vec::new();
    for (s, p) in EMBEDDING_CASES {
        let fam = MusielakFamily::power(&p.to_string(), Interval::new(0.0, 1.0))?;
        let numeric = fam.embedding_condition_numeric(s, 1)?;
        let exact = if s * p < 1.0 {
            (Integrability::Convergent, Integrability::Divergent)
        } else {
            (Integrability::Divergent, Integrability::Convergent)
        };
        if (numeric.at_zero, numeric.at_infinity) == exact {
            agree += 1;
        }
        detail.push(format!("s={s},p={p}:{}", numeric.at_zero));
    }
    rep.push(
        "embedding_classifier",
        agree == EMBEDDING_CASES.len(),
        format!(
            "{agree}/{} agree with s p < N; {}",
            EMBEDDING_CASES.len(),
            detail.join(" ")
        ),
    );
    Ok(())
}

/// Worst relative error of `||u||_{Phi_hat}` against
/// `(int_Omega |u|^p / p)^{1/p}` over 20 constant-exponent cases.
pub fn luxemburg_closed_form(mesh: &MeshConfig, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut worst: f64 = 0.0;
    for k in 0..20 {
        let p = 1.5 + 0.25 * k as f64;
        let problem = Instance {
            mesh: *mesh,
            p: [p.to_string(), "2".into()],
            q: "1.2".into(),
            ..Instance::default()
        }
        .assemble()?;
        let u = random_function(&problem, &mut rng).scaled(rng.gen_range(0.1..10.0));
        let cells = problem.mesh().cells();
        let integral: f64 = problem
            .mesh()
            .interior_cells()
            .map(|i| cells[i].width * u[i].abs().powf(p) / p)
            .sum();
        let exact = integral.powf(1.0 / p);
        let got = problem.phi_hat_norm(&u, 0)?;
        worst = worst.max((got - exact).abs() / exact);
    }
    Ok(worst)
}

/// `max_z |g_z - fd_z| / (1 + |g_z|)` with central differences, step 1e-6,
/// each side taken as an energy increment from `u`.
pub fn gradient_fd_error(problem: &Problem, u: &GridFunction) -> Result<f64> {
    let g = problem.energy_gradient(u)?;
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    let mut w = u.clone();
    for z in 0..u.len() {
        w.values_mut()[z] = u[z] + h;
        let up = problem.energy_difference(u, &w)?;
        w.values_mut()[z] = u[z] - h;
        let dn = problem.energy_difference(u, &w)?;
        w.values_mut()[z] = u[z];
        let fd = (up - dn) / (2.0 * h);
        worst = worst.max((fd - g[z]).abs() / (1.0 + g[z].abs()));
    }
    Ok(worst)
}
