//! Behavior of the operator under diagonal refinement of the quadrature.

use fracneumann::{GridFunction, Instance, MeshConfig, Problem};

fn problem(p: &str, s: &str, depth: usize) -> Problem {
    Instance {
        mesh: MeshConfig {
            n_interior: 32,
            n_collar: 16,
            diag_depth: depth,
            ..MeshConfig::default()
        },
        p: [p.into(), p.into()],
        s: [s.into(), s.into()],
        q: "1.5".into(),
        ..Instance::default()
    }
    .assemble()
    .unwrap()
}

fn operator_at(p: &str, s: &str, depth: usize) -> Vec<f64> {
    let pr = problem(p, s, depth);
    let u = GridFunction::from_fn(pr.mesh(), |x| (3.0 * x).sin() + 0.5 * x * x);
    pr.cell_fluxes(&u, 0).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

#[test]
fn subcritical_refinement_converges_geometrically() {
    // adjacent-cell jump integrals converge like 2^{-d (1 - s p)}
    for (p, s) in [("2", "0.25"), ("2", "0.3")] {
        let sp: f64 = p.parse::<f64>().unwrap() * s.parse::<f64>().unwrap();
        let ops: Vec<Vec<f64>> = [4, 6, 8].iter().map(|&d| operator_at(p, s, d)).collect();
        let expected = 2f64.powf(-2.0 * (1.0 - sp));
        for cell in [20, 24, 31, 40] {
            let d1 = ops[1][cell] - ops[0][cell];
            let d2 = ops[2][cell] - ops[1][cell];
            let ratio = d2 / d1;
            assert!(
                (ratio - expected).abs() < 0.05,
                "p={p} s={s} cell {cell}: ratio {ratio}, expected {expected}"
            );
            // Richardson limit of the depth-8 value
            let limit = ops[2][cell] + d2 * expected / (1.0 - expected);
            assert!(
                rel(ops[2][cell], limit) < 5e-3,
                "cell {cell}: {} vs {limit}",
                ops[2][cell]
            );
        }
    }
}

#[test]
fn supercritical_jumps_grow_with_depth() {
    // s p > 1: the Gagliardo energy of a jump is infinite
    let ops: Vec<Vec<f64>> = [4, 6, 8]
        .iter()
        .map(|&d| operator_at("4", "0.6", d))
        .collect();
    for cell in [24, 40] {
        assert!(ops[1][cell].abs() > 2.0 * ops[0][cell].abs());
        assert!(ops[2][cell].abs() > 2.0 * ops[1][cell].abs());
    }
}

#[test]
fn cells_without_refined_neighbors_are_depth_independent() {
    // collar cell 8 only meets interior cells at positive distance
    let a = operator_at("3", "0.4", 2);
    let b = operator_at("3", "0.4", 8);
    assert!(rel(a[8], b[8]) < 1e-12, "{} vs {}", a[8], b[8]);
}

#[test]
fn identities_hold_at_every_depth() {
    for depth in [0, 2, 6] {
        let pr = problem("3", "0.4", depth);
        let u = GridFunction::from_fn(pr.mesh(), |x| (5.0 * x).cos() - x);
        let v = GridFunction::from_fn(pr.mesh(), |x| x * x - 0.3);
        for phase in 0..2 {
            assert!(pr.ibp_defect(&u, phase).unwrap().relative() <= 1e-12);
            assert!(pr.green_defect(&u, &v, phase).unwrap().relative() <= 1e-12);
        }
    }
}
