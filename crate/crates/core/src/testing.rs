use crate::mesh::MeshConfig;
use crate::problem::{Instance, Problem};

/// Small power-family instance on `Omega = (0, 1)` with collar 1, `q = 2`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn instance(
    n_interior: usize,
    n_collar: usize,
    p1: &str,
    p2: &str,
    s1: &str,
    s2: &str,
    beta: &str,
    lambda: f64,
) -> Problem {
    Instance {
        mesh: MeshConfig {
            n_interior,
            n_collar,
            diag_depth: 3,
            ..MeshConfig::default()
        },
        p: [p1.into(), p2.into()],
        s: [s1.into(), s2.into()],
        beta: beta.into(),
        lambda,
        ..Instance::default()
    }
    .assemble()
    .unwrap()
}

pub(crate) use crate::verify::random_function;
