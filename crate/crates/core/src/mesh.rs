//! One-dimensional mesh of `Omega = (a, b)` plus a truncated exterior collar
//! of width `R` on each side, and the quadrature over cell pairs that covers
//! `R^2 \ (C Omega)^2` restricted to the collar.
//!
//! Functions are piecewise constant: one value per cell, located at the cell
//! midpoint. Pair integrals are assembled over unordered cell pairs; pairs of
//! adjacent cells meet the diagonal at a corner and are refined toward that
//! corner, and a cell paired with itself is refined along the diagonal with
//! the finest diagonal squares dropped.

use crate::error::{Error, Result};
use crate::fields::Interval;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshConfig {
    pub a: f64,
    pub b: f64,
    pub collar: f64,
    pub n_interior: usize,
    /// Cells on each side of `Omega`.
    pub n_collar: usize,
    pub diag_depth: usize,
}

impl Default for MeshConfig {
    fn default() -> Self {
        MeshConfig {
            a: 0.0,
            b: 1.0,
            collar: 1.0,
            n_interior: 64,
            n_collar: 32,
            diag_depth: 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    Interior,
    Exterior,
}

impl Region {
    pub fn name(self) -> &'static str {
        match self {
            Region::Interior => "interior",
            Region::Exterior => "exterior",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub left: f64,
    pub right: f64,
    pub center: f64,
    pub width: f64,
    pub region: Region,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    config: MeshConfig,
    nodes: Vec<f64>,
    cells: Vec<Cell>,
}

/// One quadrature point of a pair region. The region stands for itself and
/// its mirror image, so an ordered integral is approximated by
/// `sum weight * (k(x, y) + k(y, x))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairPoint {
    pub x: f64,
    pub y: f64,
    /// `|x - y| > 0`
    pub distance: f64,
    /// `dx dy` area of the sub-square.
    pub weight: f64,
}

impl Mesh {
    pub fn build(config: MeshConfig) -> Result<Mesh> {
        let MeshConfig {
            a,
            b,
            collar,
            n_interior,
            n_collar,
            diag_depth,
        } = config;
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(Error::InvalidMesh(format!(
                "need a < b, got a = {a}, b = {b}"
            )));
        }
        if !(collar > 0.0 && collar.is_finite()) {
            return Err(Error::InvalidMesh(format!(
                "collar width must be positive, got {collar}"
            )));
        }
        if n_interior < 4 {
            return Err(Error::InvalidMesh(format!(
                "n_interior must be >= 4, got {n_interior}"
            )));
        }
        if n_collar < 1 {
            return Err(Error::InvalidMesh(format!(
                "n_collar must be >= 1, got {n_collar}"
            )));
        }
        if diag_depth > 16 {
            return Err(Error::InvalidMesh(format!(
                "diag_depth must be <= 16, got {diag_depth}"
            )));
        }
        let hi = (b - a) / n_interior as f64;
        let hc = collar / n_collar as f64;
        let mut nodes = Vec::with_capacity(n_interior + 2 * n_collar + 1);
        for k in 0..n_collar {
            nodes.push((a - collar) + hc * k as f64);
        }
        for k in 0..n_interior {
            nodes.push(a + hi * k as f64);
        }
        nodes.push(b);
        for k in 1..n_collar {
            nodes.push(b + hc * k as f64);
        }
        nodes.push(b + collar);

        let cells = nodes
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let region = if i >= n_collar && i < n_collar + n_interior {
                    Region::Interior
                } else {
                    Region::Exterior
                };
                Cell {
                    left: w[0],
                    right: w[1],
                    center: 0.5 * (w[0] + w[1]),
                    width: w[1] - w[0],
                    region,
                }
            })
            .collect();
        Ok(Mesh {
            config,
            nodes,
            cells,
        })
    }

    pub fn config(&self) -> &MeshConfig {
        &self.config
    }

    /// Cell edges, sorted.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn omega(&self) -> Interval {
        Interval::new(self.config.a, self.config.b)
    }

    /// `Omega` together with the collar.
    pub fn computational_box(&self) -> Interval {
        Interval::new(
            self.config.a - self.config.collar,
            self.config.b + self.config.collar,
        )
    }

    pub fn is_interior(&self, cell: usize) -> bool {
        self.cells[cell].region == Region::Interior
    }

    pub fn interior_cells(&self) -> std::ops::Range<usize> {
        self.config.n_collar..self.config.n_collar + self.config.n_interior
    }

    pub fn exterior_cells(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(move |&i| !self.is_interior(i))
    }

    pub fn centers(&self) -> Vec<f64> {
        self.cells.iter().map(|c| c.center).collect()
    }

    /// Unordered pairs `(i, j)`, `i < j`, with at least one interior cell.
    pub fn interacting_pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let n = self.len();
        (0..n).flat_map(move |i| {
            (i + 1..n).filter_map(move |j| {
                if self.is_interior(i) || self.is_interior(j) {
                    Some((i, j))
                } else {
                    None
                }
            })
        })
    }

    /// Quadrature points of the unordered pair `(i, j)`, `i <= j`.
    pub fn pair_points(&self, i: usize, j: usize, out: &mut Vec<PairPoint>) {
        let (ci, cj) = (self.cells[i], self.cells[j]);
        let depth = self.config.diag_depth;
        if i == j {
            self_square(ci.left, ci.right, depth, out);
        } else if j == i + 1 {
            corner_square(ci.left, ci.right, cj.left, cj.right, depth, out);
        } else {
            push_point(ci.center, cj.center, ci.width * cj.width, out);
        }
    }

    /// `int int k(x, y) dx dy` over the collar-truncated `R^2 \ (C Omega)^2`.
    ///
    /// The callback sees every point in both orders, so swapping its
    /// arguments does not change the result. Non-finite callback values are
    /// reported with the offending point.
    pub fn pair_quadrature(&self, mut kernel: impl FnMut(f64, f64) -> f64) -> Result<f64> {
        let mut total = 0.0;
        let mut points = Vec::new();
        for i in 0..self.len() {
            for j in i..self.len() {
                if !(self.is_interior(i) || self.is_interior(j)) {
                    continue;
                }
                points.clear();
                self.pair_points(i, j, &mut points);
                for p in &points {
                    let v = kernel(p.x, p.y) + kernel(p.y, p.x);
                    if !v.is_finite() {
                        return Err(Error::Numeric(format!(
                            "non-finite kernel value at (x, y) = ({}, {})",
                            p.x, p.y
                        )));
                    }
                    total += p.weight * v;
                }
            }
        }
        Ok(total)
    }
}

fn push_point(x: f64, y: f64, weight: f64, out: &mut Vec<PairPoint>) {
    out.push(PairPoint {
        x,
        y,
        distance: (y - x).abs(),
        weight,
    });
}

/// `[x0, x1] x [y0, y1]` with `x1 == y0`: the corner `(x1, y0)` lies on the
/// diagonal.
fn corner_square(x0: f64, x1: f64, y0: f64, y1: f64, depth: usize, out: &mut Vec<PairPoint>) {
    let (hx, hy) = (x1 - x0, y1 - y0);
    if depth == 0 {
        push_point(0.5 * (x0 + x1), 0.5 * (y0 + y1), hx * hy, out);
        return;
    }
    let xm = 0.5 * (x0 + x1);
    let ym = 0.5 * (y0 + y1);
    let q = 0.25 * hx * hy;
    push_point(0.5 * (x0 + xm), 0.5 * (y0 + ym), q, out);
    push_point(0.5 * (x0 + xm), 0.5 * (ym + y1), q, out);
    push_point(0.5 * (xm + x1), 0.5 * (ym + y1), q, out);
    corner_square(xm, x1, y0, ym, depth - 1, out);
}

/// `[x0, x1]^2`, symmetric about the diagonal. Each level splits into two
/// diagonal squares and one off-diagonal square (standing for itself and its
/// mirror); diagonal squares at the finest level are dropped.
fn self_square(x0: f64, x1: f64, depth: usize, out: &mut Vec<PairPoint>) {
    if depth == 0 {
        return;
    }
    let xm = 0.5 * (x0 + x1);
    corner_square(x0, xm, xm, x1, depth - 1, out);
    self_square(x0, xm, depth - 1, out);
    self_square(xm, x1, depth - 1, out);
}

/// Nodal values of a piecewise-constant function on the mesh cells.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(values: Vec<f64>) -> Result<GridFunction> {
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!(
                "grid function value {k} is not finite"
            )));
        }
        Ok(GridFunction { values })
    }

    pub fn zeros(len: usize) -> GridFunction {
        GridFunction {
            values: vec![0.0; len],
        }
    }

    pub fn constant(len: usize, value: f64) -> GridFunction {
        GridFunction {
            values: vec![value; len],
        }
    }

    /// Samples `f` at the cell centers.
    pub fn from_fn(mesh: &Mesh, f: impl Fn(f64) -> f64) -> GridFunction {
        GridFunction {
            values: mesh.cells().iter().map(|c| f(c.center)).collect(),
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn scaled(&self, c: f64) -> GridFunction {
        GridFunction {
            values: self.values.iter().map(|v| c * v).collect(),
        }
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }
}

impl std::ops::Index<usize> for GridFunction {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.values[i]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(a: f64, b: f64, collar: f64, ni: usize, nc: usize, depth: usize) -> MeshConfig {
        MeshConfig {
            a,
            b,
            collar,
            n_interior: ni,
            n_collar: nc,
            diag_depth: depth,
        }
    }

    #[test]
    fn cell_counting() {
        let m = Mesh::build(cfg(0.0, 1.0, 1.0, 8, 4, 4)).unwrap();
        assert_eq!(m.len(), 16);
        assert_eq!(m.nodes().first(), Some(&-1.0));
        assert_eq!(m.nodes().last(), Some(&2.0));
        assert_eq!(m.interior_cells().len(), 8);
        assert_eq!(m.exterior_cells().count(), 8);
    }

    #[test]
    fn uniform_nodes() {
        let m = Mesh::build(cfg(0.0, 2.0, 0.5, 4, 1, 4)).unwrap();
        assert_eq!(m.nodes(), &[-0.5, 0.0, 0.5, 1.0, 1.5, 2.0, 2.5]);
        let regions: Vec<_> = m.cells().iter().map(|c| c.region).collect();
        assert_eq!(regions.first(), Some(&Region::Exterior));
        assert_eq!(regions.last(), Some(&Region::Exterior));
        assert!(regions[1..5].iter().all(|r| *r == Region::Interior));
    }

    #[test]
    fn invalid_configs() {
        assert!(Mesh::build(cfg(0.0, 1.0, 0.0, 8, 4, 4)).is_err());
        assert!(Mesh::build(cfg(1.0, 1.0, 1.0, 8, 4, 4)).is_err());
        assert!(Mesh::build(cfg(0.0, 1.0, 1.0, 3, 4, 4)).is_err());
        assert!(Mesh::build(cfg(0.0, 1.0, 1.0, 8, 0, 4)).is_err());
    }

    #[test]
    fn nodes_are_reproducible() {
        let c = cfg(-0.3, 1.7, 0.9, 37, 11, 3);
        let a = Mesh::build(c).unwrap();
        let b = Mesh::build(c).unwrap();
        let bits = |m: &Mesh| m.nodes().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
        assert!(a.nodes().windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn pair_enumeration_skips_exterior_pairs() {
        let m = Mesh::build(cfg(0.0, 1.0, 1.0, 8, 4, 2)).unwrap();
        let n = m.len();
        let ext = 8;
        assert_eq!(
            m.interacting_pairs().count(),
            n * (n - 1) / 2 - ext * (ext - 1) / 2
        );
        assert!(m.interacting_pairs().all(|(i, j)| i < j));
    }

    #[test]
    fn refined_weights_tile_the_square() {
        let m = Mesh::build(cfg(0.0, 1.0, 0.5, 4, 2, 5)).unwrap();
        let mut pts = Vec::new();
        m.pair_points(2, 3, &mut pts);
        let area: f64 = pts.iter().map(|p| p.weight).sum();
        assert!((area - 0.25 * 0.25).abs() < 1e-15);
        assert_eq!(pts.len(), 3 * 5 + 1);
        assert!(pts.iter().all(|p| p.distance > 0.0));
        // self square: off-diagonal half, minus the dropped finest diagonal
        pts.clear();
        m.pair_points(2, 2, &mut pts);
        let covered: f64 = pts.iter().map(|p| 2.0 * p.weight).sum();
        let h: f64 = 0.25;
        let dropped = 2f64.powi(5) * (h / 32.0).powi(2);
        assert!((covered - (h * h - dropped)).abs() < 1e-15);
    }

    #[test]
    fn zero_kernel_and_swap_invariance() {
        let m = Mesh::build(cfg(0.0, 1.0, 1.0, 8, 4, 3)).unwrap();
        assert_eq!(m.pair_quadrature(|_, _| 0.0).unwrap(), 0.0);
        let k = |x: f64, y: f64| (x - 0.3 * y).exp() / (1.0 + (x - y).abs());
        let a = m.pair_quadrature(k).unwrap();
        let b = m.pair_quadrature(|x, y| k(y, x)).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn non_finite_kernel_is_reported() {
        let m = Mesh::build(cfg(0.0, 1.0, 1.0, 8, 4, 1)).unwrap();
        let err = m
            .pair_quadrature(|x, _| if x > 0.5 { f64::NAN } else { 1.0 })
            .unwrap_err();
        assert!(matches!(err, Error::Numeric(_)));
    }

    #[test]
    fn constant_kernel_integrates_the_truncated_domain() {
        // |R^2 \ (C Omega)^2| on the collar box = L^2 - (2R)^2
        let m = Mesh::build(cfg(0.0, 1.0, 1.0, 8, 4, 12)).unwrap();
        let v = m.pair_quadrature(|_, _| 1.0).unwrap();
        let exact = 9.0 - 4.0;
        // only the finest diagonal squares of Omega-cells are missing
        assert!((v - exact).abs() < 1e-3, "{v}");
    }

    fn singular_on_omega(m: &Mesh) -> f64 {
        let (a, b) = (m.config().a, m.config().b);
        m.pair_quadrature(|x, y| {
            if x > a && x < b && y > a && y < b {
                1.0 / (x - y).abs()
            } else {
                0.0
            }
        })
        .unwrap()
    }

    #[test]
    fn singular_measure_refinement_converges() {
        // depth-8 reference; the error against it shrinks with depth
        let at = |d| singular_on_omega(&Mesh::build(cfg(0.0, 1.0, 1.0, 8, 4, d)).unwrap());
        let reference = at(8);
        assert!(reference.is_finite() && reference > 0.0);
        let errors: Vec<f64> = (1..=6).map(|d| (at(d) - reference).abs()).collect();
        assert!(errors.windows(2).all(|w| w[1] < w[0]), "{errors:?}");
    }

    #[test]
    fn refinement_differences_decay_on_smooth_kernels() {
        let k = |x: f64, y: f64| (1.0 + x * x + y).cos() + 2.0;
        let at = |d| {
            Mesh::build(cfg(0.0, 1.0, 1.0, 8, 4, d))
                .unwrap()
                .pair_quadrature(k)
                .unwrap()
        };
        let v: Vec<f64> = (1..=6).map(at).collect();
        for d in 0..v.len() - 2 {
            let now = (v[d + 1] - v[d]).abs();
            let next = (v[d + 2] - v[d + 1]).abs();
            assert!(now < 10.0 * next.max(1e-300) || now < 1e-14, "{v:?}");
            assert!(next <= now, "{v:?}");
        }
    }

    #[test]
    fn grid_function_rejects_non_finite() {
        assert!(GridFunction::new(vec![0.0, f64::NAN]).is_err());
        let g = GridFunction::new(vec![1.0, -3.0]).unwrap();
        assert_eq!(g.sup_norm(), 3.0);
        assert_eq!(g.scaled(2.0).values(), &[2.0, -6.0]);
    }
}
