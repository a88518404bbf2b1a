//! Uniform structured grids with ghost layers and tensor-product quadrature.
//!
//! Cell data is stored including `GHOST` layers on each side. Storage indices
//! run over `0..n + 2 * GHOST`; interior cells occupy `GHOST..n + GHOST`.
//! Local cell coordinates `xi = (x - x_center) / dx` live in `[-1/2, 1/2]`.

use crate::error::{Error, Result};

/// Ghost layer width: reconstruction stencil radius one, plus one layer so
/// that the cells adjacent to the boundary faces can be reconstructed too.
pub const GHOST: usize = 2;

/// A quadrature rule on the reference cell `[-1/2, 1/2]` with weights summing
/// to one.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    /// Two-point Gauss-Legendre rule, exact for cubics.
    pub fn gauss_legendre2() -> Self {
        let a = 0.5 / 3f64.sqrt();
        QuadratureRule {
            nodes: vec![-a, a],
            weights: vec![0.5, 0.5],
        }
    }

    /// One-point midpoint rule, exact for linears.
    pub fn midpoint() -> Self {
        QuadratureRule {
            nodes: vec![0.0],
            weights: vec![1.0],
        }
    }

    /// Nodes in local cell coordinates.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Normalized weights (sum to one).
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Physical nodes and weights of an interval `[center - width/2,
    /// center + width/2]`; the weights sum to `width`.
    pub fn on_interval(&self, center: f64, width: f64) -> (Vec<f64>, Vec<f64>) {
        (
            self.nodes.iter().map(|xi| center + xi * width).collect(),
            self.weights.iter().map(|w| w * width).collect(),
        )
    }

    /// `sum_a w_a f(x_a)` over an interval, i.e. the approximate integral.
    pub fn integrate(&self, center: f64, width: f64, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(xi, w)| w * width * f(center + xi * width))
            .sum()
    }
}

/// Uniform one-dimensional grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid1D {
    n: usize,
    x_min: f64,
    x_max: f64,
    dx: f64,
    rule: QuadratureRule,
}

impl Grid1D {
    /// Grid on `[x_min, x_max]` with `n` cells and the two-point
    /// Gauss-Legendre rule.
    pub fn new(n: usize, x_min: f64, x_max: f64) -> Result<Self> {
        Self::with_rule(n, x_min, x_max, QuadratureRule::gauss_legendre2())
    }

    pub fn with_rule(n: usize, x_min: f64, x_max: f64, rule: QuadratureRule) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidGrid("cell count must be positive".into()));
        }
        if !(x_max > x_min) || !x_min.is_finite() || !x_max.is_finite() {
            return Err(Error::InvalidGrid(format!(
                "bad bounds [{x_min}, {x_max}]"
            )));
        }
        Ok(Grid1D {
            n,
            x_min,
            x_max,
            dx: (x_max - x_min) / n as f64,
            rule,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn bounds(&self) -> (f64, f64) {
        (self.x_min, self.x_max)
    }

    pub fn ghost(&self) -> usize {
        GHOST
    }

    pub fn rule(&self) -> &QuadratureRule {
        &self.rule
    }

    /// Number of stored cells including ghosts.
    pub fn storage_len(&self) -> usize {
        self.n + 2 * GHOST
    }

    /// Storage indices of the interior cells.
    pub fn interior(&self) -> std::ops::Range<usize> {
        GHOST..self.n + GHOST
    }

    /// Cell center of storage index `s` (ghost cells included).
    #[inline]
    pub fn center(&self, s: usize) -> f64 {
        self.x_min + (s as f64 - GHOST as f64 + 0.5) * self.dx
    }

    /// Left face of storage index `s`.
    #[inline]
    pub fn left_face(&self, s: usize) -> f64 {
        self.x_min + (s as f64 - GHOST as f64) * self.dx
    }

    /// Physical quadrature nodes of storage cell `s`.
    pub fn nodes(&self, s: usize) -> Vec<f64> {
        let c = self.center(s);
        self.rule.nodes().iter().map(|xi| c + xi * self.dx).collect()
    }

    /// Physical quadrature weights (sum to `dx`).
    pub fn weights(&self) -> Vec<f64> {
        self.rule.weights().iter().map(|w| w * self.dx).collect()
    }

    /// `Q_i(f)`, the quadrature approximation of the integral of `f` over
    /// storage cell `s`.
    pub fn cell_quadrature(&self, s: usize, f: impl Fn(f64) -> f64) -> f64 {
        self.rule.integrate(self.center(s), self.dx, f)
    }

    /// Cell averages `Q_i(u0) / dx` of a pointwise state for every stored cell,
    /// ghosts included (ghost values are overwritten by boundary filling).
    pub fn project<const NV: usize>(
        &self,
        u0: impl Fn(f64) -> Result<[f64; NV]>,
    ) -> Result<Vec<[f64; NV]>> {
        (0..self.storage_len())
            .map(|s| {
                let c = self.center(s);
                let mut avg = [0.0; NV];
                for (xi, w) in self.rule.nodes().iter().zip(self.rule.weights()) {
                    let u = u0(c + xi * self.dx).map_err(|e| e.at_cell(s))?;
                    for k in 0..NV {
                        avg[k] += w * u[k];
                    }
                }
                Ok(avg)
            })
            .collect()
    }
}

/// Uniform two-dimensional grid; cells are `I_i x I_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid2D {
    x: Grid1D,
    y: Grid1D,
}

/// Orientation of a face in a 2D grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
}

impl Grid2D {
    pub fn new(nx: usize, ny: usize, x_bounds: (f64, f64), y_bounds: (f64, f64)) -> Result<Self> {
        Ok(Grid2D {
            x: Grid1D::new(nx, x_bounds.0, x_bounds.1)?,
            y: Grid1D::new(ny, y_bounds.0, y_bounds.1)?,
        })
    }

    /// Square grid with `n x n` cells on `[lo, hi]^2`.
    pub fn square(n: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(n, n, (lo, hi), (lo, hi))
    }

    pub fn x_axis(&self) -> &Grid1D {
        &self.x
    }

    pub fn y_axis(&self) -> &Grid1D {
        &self.y
    }

    pub fn nx(&self) -> usize {
        self.x.n
    }

    pub fn ny(&self) -> usize {
        self.y.n
    }

    pub fn dx(&self) -> f64 {
        self.x.dx
    }

    pub fn dy(&self) -> f64 {
        self.y.dx
    }

    pub fn cell_volume(&self) -> f64 {
        self.x.dx * self.y.dx
    }

    pub fn rule(&self) -> &QuadratureRule {
        &self.x.rule
    }

    /// Stored cells per row.
    pub fn stride(&self) -> usize {
        self.x.storage_len()
    }

    pub fn storage_len(&self) -> usize {
        self.x.storage_len() * self.y.storage_len()
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.x.storage_len() + i
    }

    /// Storage index pair of a flat index.
    #[inline]
    pub fn ij(&self, s: usize) -> (usize, usize) {
        (s % self.x.storage_len(), s / self.x.storage_len())
    }

    pub fn is_interior(&self, i: usize, j: usize) -> bool {
        self.x.interior().contains(&i) && self.y.interior().contains(&j)
    }

    /// Flat storage indices of the interior cells in row-major order.
    pub fn interior_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.y
            .interior()
            .flat_map(move |j| self.x.interior().map(move |i| self.idx(i, j)))
    }

    #[inline]
    pub fn center(&self, i: usize, j: usize) -> (f64, f64) {
        (self.x.center(i), self.y.center(j))
    }

    /// `Q_{i,j}(f)`: tensor product of the 1D rules over the cell.
    pub fn cell_quadrature(&self, i: usize, j: usize, f: impl Fn(f64, f64) -> f64) -> f64 {
        let (xc, yc) = self.center(i, j);
        let rule = self.rule();
        let mut sum = 0.0;
        for (xi, wx) in rule.nodes().iter().zip(rule.weights()) {
            for (eta, wy) in rule.nodes().iter().zip(rule.weights()) {
                sum += wx * self.x.dx * wy * self.y.dx * f(xc + xi * self.x.dx, yc + eta * self.y.dx);
            }
        }
        sum
    }

    /// Quadrature of `f` along a face. `Axis::X` selects the face
    /// `x = x_{i-1/2}` of cell `(i, j)` (integrating in `y`), `Axis::Y` the
    /// face `y = y_{j-1/2}` (integrating in `x`).
    pub fn face_quadrature(
        &self,
        axis: Axis,
        i: usize,
        j: usize,
        f: impl Fn(f64, f64) -> f64,
    ) -> f64 {
        match axis {
            Axis::X => {
                let x = self.x.left_face(i);
                self.y.rule.integrate(self.y.center(j), self.y.dx, |y| f(x, y))
            }
            Axis::Y => {
                let y = self.y.left_face(j);
                self.x.rule.integrate(self.x.center(i), self.x.dx, |x| f(x, y))
            }
        }
    }

    /// Cell averages `Q_{i,j}(u0) / (dx dy)` for every stored cell.
    pub fn project<const NV: usize>(
        &self,
        u0: impl Fn(f64, f64) -> Result<[f64; NV]> + Sync,
    ) -> Result<Vec<[f64; NV]>> {
        let rule = self.rule();
        (0..self.storage_len())
            .map(|s| {
                let (i, j) = self.ij(s);
                let (xc, yc) = self.center(i, j);
                let mut avg = [0.0; NV];
                for (xi, wx) in rule.nodes().iter().zip(rule.weights()) {
                    for (eta, wy) in rule.nodes().iter().zip(rule.weights()) {
                        let u = u0(xc + xi * self.x.dx, yc + eta * self.y.dx)
                            .map_err(|e| e.at_cell(format!("({i}, {j})")))?;
                        for k in 0..NV {
                            avg[k] += wx * wy * u[k];
                        }
                    }
                }
                Ok(avg)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_grids() {
        assert!(Grid1D::new(0, 0.0, 1.0).is_err());
        assert!(Grid1D::new(4, 1.0, 1.0).is_err());
        assert!(Grid1D::new(4, 0.0, f64::INFINITY).is_err());
    }

    #[test]
    fn geometry_and_ghosts() {
        let g = Grid1D::new(4, 0.0, 1.0).unwrap();
        assert_eq!(g.dx(), 0.25);
        assert_eq!(g.storage_len(), 8);
        assert_eq!(g.interior(), 2..6);
        assert_eq!(g.center(2), 0.125);
        assert_eq!(g.center(0), -0.375);
        assert_eq!(g.left_face(6), 1.0);
        // every interior stencil {s-1, s, s+1} and the ghost next to it are addressable
        for s in g.interior() {
            assert!(s >= 2 && s + 2 < g.storage_len());
        }
    }

    #[test]
    fn weights_sum_to_cell_size() {
        let g = Grid1D::new(7, -1.0, 2.0).unwrap();
        let sum: f64 = g.weights().iter().sum();
        assert!((sum - g.dx()).abs() < 1e-15);
        let g2 = Grid2D::new(3, 5, (0.0, 1.0), (0.0, 2.0)).unwrap();
        let area = g2.cell_quadrature(2, 2, |_, _| 1.0);
        assert!((area - g2.cell_volume()).abs() < 1e-15);
        let face = g2.face_quadrature(Axis::X, 3, 2, |_, _| 1.0);
        assert!((face - g2.dy()).abs() < 1e-15);
    }

    #[test]
    fn constant_integrand() {
        let g = Grid1D::new(8, 0.0, 1.0).unwrap();
        assert!((g.cell_quadrature(3, |_| 2.5) - 2.5 * g.dx()).abs() < 1e-15);
    }

    #[test]
    fn exact_for_cubics() {
        let g = Grid1D::new(1, 0.0, 1.0).unwrap();
        let s = GHOST;
        assert!((g.cell_quadrature(s, |x| x.powi(3)) - 0.25).abs() < 1e-15);
        for k in 0..=3 {
            let exact = 1.0 / (k as f64 + 1.0);
            assert!((g.cell_quadrature(s, |x| x.powi(k)) - exact).abs() < 1e-15);
        }
    }

    #[test]
    fn quartic_defect_matches_analysis() {
        // GL2 on [0,1]: nodes 1/2 -+ 1/(2 sqrt 3). The defect for x^4 equals
        // f''''/4320 * h^5 = 24/4320 = 1/180.
        let g = Grid1D::new(1, 0.0, 1.0).unwrap();
        let q = g.cell_quadrature(GHOST, |x| x.powi(4));
        assert!((0.2 - q - 1.0 / 180.0).abs() < 1e-15);
    }

    #[test]
    fn face_quadrature_exactness() {
        let g = Grid2D::new(1, 1, (0.0, 1.0), (0.0, 1.0)).unwrap();
        let (i, j) = (GHOST, GHOST);
        // linear in the tangential coordinate equals the midpoint value times length
        let lin = g.face_quadrature(Axis::X, i, j, |_, y| 3.0 * y - 1.0);
        assert!((lin - 0.5).abs() < 1e-15);
        let cub = g.face_quadrature(Axis::X, i, j, |_, y| y.powi(3));
        assert!((cub - 0.25).abs() < 1e-15);
        let cubx = g.face_quadrature(Axis::Y, i, j + 1, |x, y| x.powi(3) * y);
        assert!((cubx - 0.25).abs() < 1e-15);
    }

    #[test]
    fn cell_rule_is_tensor_product() {
        let g = Grid2D::new(4, 4, (0.0, 1.0), (-1.0, 1.0)).unwrap();
        let f = |x: f64, y: f64| (x * 3.0).sin() * (1.0 + y * y);
        let (i, j) = (3, 4);
        let gx = g.x_axis();
        let gy = g.y_axis();
        let tensor = gx.cell_quadrature(i, |x| (x * 3.0).sin())
            * gy.cell_quadrature(j, |y| 1.0 + y * y);
        assert!((g.cell_quadrature(i, j, f) - tensor).abs() < 1e-15);
        // and exact for bicubic monomials
        let g1 = Grid2D::new(1, 1, (0.0, 1.0), (0.0, 1.0)).unwrap();
        let v = g1.cell_quadrature(GHOST, GHOST, |x, y| x.powi(3) * y.powi(2));
        assert!((v - 1.0 / 12.0).abs() < 1e-15);
    }

    #[test]
    fn projection_of_constant_state() {
        let g = Grid1D::new(5, 0.0, 1.0).unwrap();
        let u = g.project(|_| Ok([1.0, 0.5, 2.0])).unwrap();
        assert!(u.iter().all(|v| *v == [1.0, 0.5, 2.0]));
    }

    #[test]
    fn projection_of_symmetric_field_is_symmetric() {
        let g = Grid2D::square(8, -0.5, 0.5).unwrap();
        let u = g
            .project(|x, y| {
                let r = (x * x + y * y).sqrt();
                Ok([1.0 + r * r, (3.0 * r).cos()])
            })
            .unwrap();
        for j in 0..g.y_axis().storage_len() {
            for i in 0..g.x_axis().storage_len() {
                let a = u[g.idx(i, j)];
                let b = u[g.idx(j, i)];
                assert!((a[0] - b[0]).abs() < 1e-14 && (a[1] - b[1]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn index_round_trip() {
        let g = Grid2D::new(3, 4, (0.0, 1.0), (0.0, 1.0)).unwrap();
        for s in 0..g.storage_len() {
            let (i, j) = g.ij(s);
            assert_eq!(g.idx(i, j), s);
        }
        assert_eq!(g.interior_indices().count(), 12);
    }
}
