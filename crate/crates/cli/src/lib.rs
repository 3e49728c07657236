//! Command-line harness: `solve`, `verify`, `norm`, and `lambda-star`.
//!
//! Exit status is 0 on success, 1 when a verification or solve fails, and 2
//! on usage or configuration errors.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use fracneumann::io::{read_solution_csv, write_key_values, write_solution_csv};
use fracneumann::solver::{self, Branch};
use fracneumann::{run_suite, Error, Problem, RunConfig, SuiteSize};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "fracneumann",
    version,
    about = "Double-phase fractional Musielak Neumann problems in one dimension"
)]
struct Cli {
    /// Cap on worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct ConfigArg {
    /// TOML configuration file.
    #[arg(long)]
    config: PathBuf,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Minimize the energy and write solution.csv and report.txt.
    Solve {
        #[command(flatten)]
        config: ConfigArg,
        /// Overrides `lambda` from the config.
        #[arg(long)]
        lambda: Option<f64>,
        /// Forces a branch instead of choosing from lambda.
        #[arg(long, value_parser = ["small", "large"])]
        branch: Option<String>,
        /// Output directory.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Run the identity and structural-condition suite.
    Verify {
        #[command(flatten)]
        config: ConfigArg,
    },
    /// Modulars and norms of a stored solution.
    Norm {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        input: PathBuf,
    },
    /// The small-lambda threshold and the empirical large-lambda threshold.
    LambdaStar {
        #[command(flatten)]
        config: ConfigArg,
    },
}

enum Failure {
    Usage(String),
    Failed(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Failure {
        match e {
            Error::Config(_)
            | Error::Parse(_)
            | Error::InvalidFamily(_)
            | Error::InvalidOrder(_)
            | Error::InvalidMesh(_)
            | Error::InvalidProblem(_) => Failure::Usage(e.to_string()),
            _ => Failure::Failed(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Failure {
        Failure::Failed(format!("io: {e}"))
    }
}

/// Parses `args` (program name first) and runs the subcommand.
pub fn run<I, T>(args: I, out: &mut (dyn Write + Send), err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                err.write_all(text.as_bytes())
            } else {
                out.write_all(text.as_bytes())
            };
            return code;
        }
    };
    let result = match cli.threads {
        Some(0) => Err(Failure::Usage("--threads must be at least 1".into())),
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| dispatch(cli.command, out)),
            Err(e) => Err(Failure::Failed(format!("thread pool: {e}"))),
        },
        None => dispatch(cli.command, out),
    };
    match result {
        Ok(code) => code,
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_USAGE
        }
        Err(Failure::Failed(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_FAILURE
        }
    }
}

fn load(config: &ConfigArg) -> Result<RunConfig, Failure> {
    if !config.config.is_file() {
        return Err(Failure::Usage(format!(
            "config file {} not found",
            config.config.display()
        )));
    }
    RunConfig::load(&config.config).map_err(|e| match e {
        Error::Io(io) => Failure::Usage(format!("{}: {io}", config.config.display())),
        other => Failure::Usage(format!("{}: {other}", config.config.display())),
    })
}

fn dispatch(command: Command, out: &mut (dyn Write + Send)) -> Result<i32, Failure> {
    match command {
        Command::Solve {
            config,
            lambda,
            branch,
            out: dir,
        } => {
            let mut cfg = load(&config)?;
            if let Some(l) = lambda {
                cfg.instance.lambda = l;
            }
            let branch = branch.map(|b| b.parse::<Branch>()).transpose()?;
            solve(&cfg, branch, &dir, out)
        }
        Command::Verify { config } => {
            let cfg = load(&config)?;
            let problem = cfg.instance.assemble()?;
            let report = run_suite(&problem, cfg.seed, SuiteSize::default())?;
            for line in report.lines() {
                writeln!(out, "{line}")?;
            }
            let pass = report.pass();
            writeln!(out, "verify: {}", if pass { "PASS" } else { "FAIL" })?;
            Ok(if pass { EXIT_OK } else { EXIT_FAILURE })
        }
        Command::Norm { config, input } => {
            let cfg = load(&config)?;
            let problem = cfg.instance.assemble()?;
            let file = File::open(&input)
                .map_err(|e| Failure::Usage(format!("{}: {e}", input.display())))?;
            let u = read_solution_csv(file, problem.mesh())?;
            write_key_values(&mut *out, &norm_lines(&problem, &u)?)?;
            Ok(EXIT_OK)
        }
        Command::LambdaStar { config } => {
            let cfg = load(&config)?;
            let problem = cfg.instance.assemble()?;
            let th = solver::thresholds(&problem, &cfg.solver)?;
            let f = |v: f64| format!("{v:.16e}");
            let lines = vec![
                ("lambda_star", f(th.lambda_star.value)),
                ("embedding_constant_estimate", f(th.embedding.c_hat)),
                ("rho", f(th.lambda_star.rho)),
                ("max_phi_plus", f(th.lambda_star.max_phi_plus)),
                ("q_plus", f(th.lambda_star.q_plus)),
                ("c2", f(th.lambda_star.c2)),
                ("lambda_hat_star", f(th.large.lambda_hat)),
                ("lambda_hat_star_without_jump", f(th.large.without_jump)),
                ("lambda_hat_constant_variant", f(th.large.constant_variant)),
                ("t0", f(th.large.t0)),
            ];
            write_key_values(&mut *out, &lines)?;
            Ok(EXIT_OK)
        }
    }
}

fn norm_lines(
    problem: &Problem,
    u: &fracneumann::GridFunction,
) -> Result<Vec<(String, String)>, Failure> {
    let f = |v: f64| format!("{v:.16e}");
    let mut lines = Vec::new();
    for phase in 0..2 {
        let m = problem.phase_modular(u, phase)?;
        let tag = format!("phase{}", phase + 1);
        lines.push((format!("{tag}.modular"), f(m.total)));
        lines.push((format!("{tag}.modular_gagliardo"), f(m.gagliardo)));
        lines.push((format!("{tag}.modular_interior"), f(m.interior)));
        lines.push((format!("{tag}.modular_exterior"), f(m.exterior_beta)));
        lines.push((format!("{tag}.norm"), f(problem.phase_norm(u, phase)?)));
    }
    lines.push(("modular".into(), f(problem.combined_modular(u)?)));
    lines.push(("norm".into(), f(problem.norm(u)?)));
    lines.push(("norm_x".into(), f(problem.norm_x(u)?)));
    Ok(lines)
}

fn solve(
    cfg: &RunConfig,
    branch: Option<Branch>,
    dir: &Path,
    out: &mut dyn Write,
) -> Result<i32, Failure> {
    let problem = cfg.instance.assemble()?;
    let report = solver::solve(&problem, branch, &cfg.solver)?;
    std::fs::create_dir_all(dir)?;
    let mut csv = BufWriter::new(File::create(dir.join("solution.csv"))?);
    write_solution_csv(&mut csv, problem.mesh(), &report.minimizer)?;
    csv.flush()?;

    let mut lines: Vec<(String, String)> = report
        .key_values()
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
    lines.push((
        "certified".into(),
        report.certified(&cfg.solver).to_string(),
    ));
    lines.extend(
        cfg.key_values()
            .into_iter()
            .map(|(k, v)| (format!("config.{k}"), v)),
    );
    lines.extend(
        report
            .warnings
            .iter()
            .map(|w| ("warning".to_string(), w.clone())),
    );
    let mut txt = BufWriter::new(File::create(dir.join("report.txt"))?);
    write_key_values(&mut txt, &lines)?;
    txt.flush()?;

    writeln!(
        out,
        "branch={} energy={:.6e} gradient_sup_norm={:.3e} iterations={} converged={}",
        report.branch.name(),
        report.energy,
        report.gradient_sup_norm,
        report.iterations,
        report.converged
    )?;
    for w in &report.warnings {
        writeln!(out, "warning: {w}")?;
    }
    Ok(EXIT_OK)
}
