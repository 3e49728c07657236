//! The eight acceptance criteria on the reference instance. Prints one
//! `criterion N: PASS|FAIL` line each and exits nonzero if any fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use fracneumann::solver::{self, SolveOptions};
use fracneumann::verify::{gradient_fd_error, luxemburg_closed_form, random_function};
use fracneumann::{Instance, Problem};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome, Duration);

fn reference(beta: &str) -> Problem {
    Instance {
        beta: beta.into(),
        ..Instance::default()
    }
    .assemble()
    .expect("reference instance assembles")
}

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn integration_by_parts() -> Outcome {
    let p = reference("1");
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let u = random_function(&p, &mut rng);
        for phase in 0..2 {
            worst = worst.max(
                p.ibp_defect(&u, phase)
                    .map_err(|e| e.to_string())?
                    .relative(),
            );
        }
    }
    ensure(
        worst <= 1e-12,
        format!("worst relative defect {worst:.3e} over 50 functions x 2 phases"),
    )
}

fn green_formula() -> Outcome {
    let p = reference("1");
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let u = random_function(&p, &mut rng);
        let v = random_function(&p, &mut rng);
        for phase in 0..2 {
            worst = worst.max(
                p.green_defect(&u, &v, phase)
                    .map_err(|e| e.to_string())?
                    .relative(),
            );
        }
    }
    ensure(
        worst <= 1e-12,
        format!("worst relative defect {worst:.3e} over 50 pairs x 2 phases"),
    )
}

fn modular_norm_brackets() -> Outcome {
    let p = reference("1");
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst_margin = f64::INFINITY;
    let mut worst_unit: f64 = 0.0;
    let mut checked = 0;
    for target in [0.3, 3.0] {
        for _ in 0..100 {
            let u = random_function(&p, &mut rng);
            let n = p.norm(&u).map_err(|e| e.to_string())?;
            let u = u.scaled(target / n);
            let r = p
                .check_modular_norm_bracketing(&u)
                .map_err(|e| e.to_string())?;
            worst_margin = worst_margin.min(r.worst_margin());
            worst_unit = worst_unit.max((r.unit_modular - 1.0).abs());
            checked += 1;
        }
    }
    ensure(
        worst_margin >= -1e-8 && worst_unit <= 1e-8,
        format!("{checked} functions, worst margin {worst_margin:.3e}, worst |rho(u/||u||) - 1| {worst_unit:.3e}"),
    )
}

fn luxemburg() -> Outcome {
    let worst = luxemburg_closed_form(&Instance::default().mesh, 4).map_err(|e| e.to_string())?;
    ensure(
        worst <= 1e-8,
        format!("worst relative error {worst:.3e} over 20 cases"),
    )
}

fn gradient() -> Outcome {
    let p = reference("1");
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let u = random_function(&p, &mut rng);
        worst = worst.max(gradient_fd_error(&p, &u).map_err(|e| e.to_string())?);
    }
    ensure(
        worst <= 1e-6,
        format!("worst |g - fd| / (1 + |g|) {worst:.3e} over 20 functions"),
    )
}

fn certified(r: &solver::SolveReport, opts: &SolveOptions) -> bool {
    r.energy < 0.0
        && r.gradient_sup_norm < opts.tol
        && r.neumann_sup_residual < 1e-4 * r.solution_scale
}

fn small_lambda() -> Outcome {
    let p = reference("1");
    let opts = SolveOptions::default();
    let th = solver::thresholds(&p, &opts).map_err(|e| e.to_string())?;
    let c = th.embedding.c_hat;
    // rho^{phi+ - q+} / (2 c2 c^{q+}) with rho = 1/2, phi+ = 4, q+ = 2, c2 = 1/2
    let hand = 0.25 / (c * c);
    let got = th.lambda_star.value;
    let formula_err = (got - hand).abs() / hand;
    if formula_err > 1e-12 {
        return Err(format!("lambda_* = {got} but the hand value is {hand}"));
    }
    let mut details = vec![format!(
        "lambda_* = {got:.6} (c_hat = {c:.6}, rel. err {formula_err:.1e})"
    )];
    for frac in [0.05, 0.2, 0.4, 0.6, 0.8] {
        let q = p.with_lambda(frac * got).map_err(|e| e.to_string())?;
        let r = solver::solve_small_lambda(&q, &th, &opts).map_err(|e| e.to_string())?;
        let ok = certified(&r, &opts) && r.norm_of_minimizer < opts.rho;
        let line = format!(
            "lambda = {frac} lambda_*: J = {:.3e}, ||u|| = {:.4}, |g| = {:.1e}, residual/scale = {:.1e}",
            r.energy,
            r.norm_of_minimizer,
            r.gradient_sup_norm,
            r.neumann_sup_residual / r.solution_scale
        );
        if !ok {
            return Err(line);
        }
        details.push(line);
    }
    Ok(details.join("; "))
}

fn large_lambda() -> Outcome {
    let p = reference("0");
    let opts = SolveOptions::default();
    let th = solver::thresholds(&p, &opts).map_err(|e| e.to_string())?;
    let hat = th.large.lambda_hat;
    if !(hat.is_finite() && hat > 0.0) {
        return Err(format!("threshold {hat} is not finite and positive"));
    }
    let q = p.with_lambda(2.0 * hat).map_err(|e| e.to_string())?;
    let r = solver::solve_large_lambda(&q, &th, &opts).map_err(|e| e.to_string())?;
    ensure(
        certified(&r, &opts),
        format!(
            "lambda_hat* = {hat:.6e}; at 2 lambda_hat*: J = {:.6e}, |g| = {:.1e}, residual/scale = {:.1e}, {} iterations",
            r.energy,
            r.gradient_sup_norm,
            r.neumann_sup_residual / r.solution_scale,
            r.iterations
        ),
    )
}

fn structural_suite() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("ref.toml");
    std::fs::write(&path, "seed = 0\n").map_err(|e| e.to_string())?;
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = fracneumann_cli::run(
        ["fracneumann", "verify", "--config", path.to_str().unwrap()],
        &mut out,
        &mut err,
    );
    let text = String::from_utf8_lossy(&out);
    let required = [
        "phase1.phi1: PASS",
        "phase2.phi1: PASS",
        "phase1.delta2: PASS (K = 8.000000",
        "phase2.delta2: PASS (K = 16.000000",
        "phase1.phi2_sqrt_convexity: PASS",
        "phase2.phi2_sqrt_convexity: PASS",
        "phase1.holder: PASS",
        "phase2.holder: PASS",
        "embedding_classifier: PASS (6/6",
    ];
    let missing: Vec<&str> = required
        .iter()
        .copied()
        .filter(|r| !text.contains(r))
        .collect();
    ensure(
        code == 0 && missing.is_empty() && !text.contains("FAIL"),
        format!(
            "verify exit {code}; missing {missing:?}; {} lines{}",
            text.lines().count(),
            String::from_utf8_lossy(&err)
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        (
            "integration by parts",
            integration_by_parts,
            Duration::from_secs(30),
        ),
        ("Green formula", green_formula, Duration::from_secs(60)),
        (
            "modular-norm brackets",
            modular_norm_brackets,
            Duration::MAX,
        ),
        ("Luxemburg closed form", luxemburg, Duration::MAX),
        ("gradient consistency", gradient, Duration::MAX),
        (
            "small-lambda branch",
            small_lambda,
            Duration::from_secs(600),
        ),
        ("large-lambda branch", large_lambda, Duration::MAX),
        (
            "structural condition suite",
            structural_suite,
            Duration::MAX,
        ),
    ];
    let mut failed = 0;
    for (k, (name, run, limit)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let elapsed = start.elapsed();
        let outcome = match outcome {
            Ok(d) if elapsed > limit => {
                Err(format!("{d}; runtime {elapsed:.1?} exceeds {limit:?}"))
            }
            other => other,
        };
        let (status, detail) = match &outcome {
            Ok(d) => ("PASS", d),
            Err(d) => ("FAIL", d),
        };
        println!(
            "criterion {} [{name}]: {status} ({detail}; {:.2}s)",
            k + 1,
            elapsed.as_secs_f64()
        );
        failed += outcome.is_err() as usize;
    }
    println!("acceptance: {}/8 criteria passed", 8 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
