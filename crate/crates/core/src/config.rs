//! Run configuration: one TOML file with dotted keys. Every key is optional
//! and defaults to the reference instance; unknown keys are rejected.

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::mesh::MeshConfig;
use crate::problem::Instance;
use crate::solver::SolveOptions;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    domain: RawDomain,
    #[serde(default)]
    mesh: RawMesh,
    #[serde(default)]
    phase1: RawPhase,
    #[serde(default)]
    phase2: RawPhase,
    #[serde(default)]
    reaction: RawReaction,
    beta: Option<String>,
    lambda: Option<f64>,
    seed: Option<u64>,
    #[serde(default)]
    solver: RawSolver,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDomain {
    a: Option<f64>,
    b: Option<f64>,
    collar: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMesh {
    n_interior: Option<usize>,
    n_collar: Option<usize>,
    diag_depth: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPhase {
    family: Option<String>,
    p: Option<String>,
    s: Option<String>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawReaction {
    q: Option<String>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSolver {
    tol: Option<f64>,
    residual_tol: Option<f64>,
    max_iters: Option<usize>,
    rho: Option<f64>,
    t0: Option<f64>,
    trials: Option<usize>,
}

/// Parsed configuration with defaults filled in.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunConfig {
    pub instance: Instance,
    pub solver: SolveOptions,
    pub seed: u64,
}

impl RunConfig {
    /// Parses TOML text; errors carry the line and column of the offending
    /// key or value.
    pub fn parse(text: &str) -> Result<RunConfig> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let d = RunConfig::default();
        let (i, s) = (&d.instance, &d.solver);
        let phase = |raw: &RawPhase, k: usize| -> [String; 3] {
            [
                raw.family.clone().unwrap_or_else(|| i.family[k].clone()),
                raw.p.clone().unwrap_or_else(|| i.p[k].clone()),
                raw.s.clone().unwrap_or_else(|| i.s[k].clone()),
            ]
        };
        let [f1, p1, s1] = phase(&raw.phase1, 0);
        let [f2, p2, s2] = phase(&raw.phase2, 1);
        let seed = raw.seed.unwrap_or(d.seed);
        let config = RunConfig {
            instance: Instance {
                mesh: MeshConfig {
                    a: raw.domain.a.unwrap_or(i.mesh.a),
                    b: raw.domain.b.unwrap_or(i.mesh.b),
                    collar: raw.domain.collar.unwrap_or(i.mesh.collar),
                    n_interior: raw.mesh.n_interior.unwrap_or(i.mesh.n_interior),
                    n_collar: raw.mesh.n_collar.unwrap_or(i.mesh.n_collar),
                    diag_depth: raw.mesh.diag_depth.unwrap_or(i.mesh.diag_depth),
                },
                family: [f1, f2],
                p: [p1, p2],
                s: [s1, s2],
                beta: raw.beta.unwrap_or_else(|| i.beta.clone()),
                q: raw.reaction.q.unwrap_or_else(|| i.q.clone()),
                lambda: raw.lambda.unwrap_or(i.lambda),
            },
            solver: SolveOptions {
                tol: raw.solver.tol.unwrap_or(s.tol),
                residual_tol: raw.solver.residual_tol.unwrap_or(s.residual_tol),
                max_iters: raw.solver.max_iters.unwrap_or(s.max_iters),
                rho: raw.solver.rho.unwrap_or(s.rho),
                t0: raw.solver.t0.unwrap_or(s.t0),
                trials: raw.solver.trials.unwrap_or(s.trials),
                seed,
            },
            seed,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &std::path::Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)?;
        RunConfig::parse(&text)
    }

    fn validate(&self) -> Result<()> {
        let s = &self.solver;
        if !(s.tol > 0.0 && s.residual_tol > 0.0) {
            return Err(Error::Config("solver tolerances must be positive".into()));
        }
        if s.trials == 0 {
            return Err(Error::Config("solver.trials must be at least 1".into()));
        }
        for (k, f) in self.instance.family.iter().enumerate() {
            if f != "power" && f != "powerlog" {
                return Err(Error::Config(format!(
                    "phase{}.family = {f:?}; expected \"power\" or \"powerlog\"",
                    k + 1
                )));
            }
        }
        Ok(())
    }

    /// Every effective setting as `key=value`, defaults included.
    pub fn key_values(&self) -> Vec<(String, String)> {
        let i = &self.instance;
        let s = &self.solver;
        let mut out = vec![
            ("domain.a".to_string(), i.mesh.a.to_string()),
            ("domain.b".into(), i.mesh.b.to_string()),
            ("domain.collar".into(), i.mesh.collar.to_string()),
            ("mesh.n_interior".into(), i.mesh.n_interior.to_string()),
            ("mesh.n_collar".into(), i.mesh.n_collar.to_string()),
            ("mesh.diag_depth".into(), i.mesh.diag_depth.to_string()),
        ];
        for k in 0..2 {
            out.push((format!("phase{}.family", k + 1), i.family[k].clone()));
            out.push((format!("phase{}.p", k + 1), i.p[k].clone()));
            out.push((format!("phase{}.s", k + 1), i.s[k].clone()));
        }
        out.extend([
            ("reaction.q".into(), i.q.clone()),
            ("beta".into(), i.beta.clone()),
            ("lambda".into(), i.lambda.to_string()),
            ("seed".into(), self.seed.to_string()),
            ("solver.tol".into(), s.tol.to_string()),
            ("solver.residual_tol".into(), s.residual_tol.to_string()),
            ("solver.max_iters".into(), s.max_iters.to_string()),
            ("solver.rho".into(), s.rho.to_string()),
            ("solver.t0".into(), s.t0.to_string()),
            ("solver.trials".into(), s.trials.to_string()),
        ]);
        out
    }
}
