//! Third-order central WENO (CWENO3) reconstruction.
//!
//! From three consecutive cell averages `(a_-, a_0, a_+)` CWENO3 builds a full
//! quadratic polynomial on the central cell as a nonlinear convex combination
//! of the left and right linear polynomials and a central polynomial `P_C`,
//! chosen so that with the linear weights `(1/4, 1/2, 1/4)` the combination is
//! the optimal quadratic matching all three averages.
//!
//! Polynomials are stored in local coordinates `xi = (x - x_i) / dx` as
//! `c0 + c1 xi + c2 (xi^2 - 1/12)`, so the cell mean is exactly `c0`.

use crate::error::{Error, Result};

const D_SIDE: f64 = 0.25;
const D_CENTER: f64 = 0.5;
/// Cell width assumed by the grid-free entry points. With it the
/// regularization reduces to the classical `1e-6 * max(1, scale^2)`.
pub const DEFAULT_SPACING: f64 = 1e-3;

/// Regularization of the smoothness indicators for data of magnitude `scale`
/// on cells of width `h`: `h^2 * max(1, scale^2)`.
///
/// Tying it to `h^2` keeps the ratio of indicator to regularization fixed
/// under refinement of smooth data, so the weights approach the linear ones
/// at a rate that does not spoil third order.
#[inline]
pub fn epsilon(scale: f64, h: f64) -> f64 {
    h * h * (scale * scale).max(1.0)
}

/// Largest magnitude in a stencil.
#[inline]
pub fn data_scale(values: &[f64]) -> f64 {
    values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Quadratic on the reference cell `[-1/2, 1/2]`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Quadratic {
    /// Cell mean.
    pub c0: f64,
    pub c1: f64,
    /// Coefficient of `xi^2 - 1/12`.
    pub c2: f64,
}

impl Quadratic {
    pub fn constant(c: f64) -> Self {
        Quadratic { c0: c, c1: 0.0, c2: 0.0 }
    }

    #[inline]
    pub fn at(&self, xi: f64) -> f64 {
        self.c0 + self.c1 * xi + self.c2 * (xi * xi - 1.0 / 12.0)
    }

    /// Monomial coefficients `[a0, a1, a2]` of `a0 + a1 xi + a2 xi^2`.
    pub fn monomial(&self) -> [f64; 3] {
        [self.c0 - self.c2 / 12.0, self.c1, self.c2]
    }
}

/// Optimal (linear-weight) quadratic: the unique quadratic whose averages over
/// the three stencil cells equal the data.
#[inline]
pub fn optimal_quadratic(a: [f64; 3]) -> Quadratic {
    Quadratic {
        c0: a[1],
        c1: 0.5 * (a[2] - a[0]),
        c2: 0.5 * (a[2] - 2.0 * a[1] + a[0]),
    }
}

/// Nonlinear weights `(w_L, w_C, w_R)` for a stencil with regularization `eps`.
#[inline]
pub fn cweno3_weights(a: [f64; 3], eps: f64) -> [f64; 3] {
    let dl = a[1] - a[0];
    let dr = a[2] - a[1];
    let d2 = dr - dl;
    let b = 0.5 * (a[2] - a[0]);
    let is_l = dl * dl;
    let is_r = dr * dr;
    let is_c = 13.0 / 3.0 * d2 * d2 + b * b;
    let al = D_SIDE / ((eps + is_l) * (eps + is_l));
    let ac = D_CENTER / ((eps + is_c) * (eps + is_c));
    let ar = D_SIDE / ((eps + is_r) * (eps + is_r));
    let inv = 1.0 / (al + ac + ar);
    [al * inv, ac * inv, ar * inv]
}

/// CWENO3 polynomial with the regularization scale taken from the stencil and
/// [`DEFAULT_SPACING`].
#[inline]
pub fn cweno3(a: [f64; 3]) -> Quadratic {
    cweno3_eps(a, epsilon(data_scale(&a), DEFAULT_SPACING))
}

/// CWENO3 polynomial with an explicit regularization.
#[inline]
pub fn cweno3_eps(a: [f64; 3], eps: f64) -> Quadratic {
    let [wl, wc, wr] = cweno3_weights(a, eps);
    let dl = a[1] - a[0];
    let dr = a[2] - a[1];
    Quadratic {
        c0: a[1],
        c1: wl * dl + wc * 0.5 * (a[2] - a[0]) + wr * dr,
        c2: wc * (dr - dl),
    }
}

/// A reconstruction polynomial attached to a physical cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReconstructionPolynomial {
    pub center: f64,
    pub dx: f64,
    pub poly: Quadratic,
}

impl ReconstructionPolynomial {
    /// CWENO3 reconstruction on the cell centered at `center` from the
    /// averages of it and its two neighbours.
    pub fn cweno3(stencil: [f64; 3], center: f64, dx: f64) -> Result<Self> {
        if stencil.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("reconstruction stencil {stencil:?}")));
        }
        Ok(ReconstructionPolynomial {
            center,
            dx,
            poly: cweno3(stencil),
        })
    }

    /// Point value at `x`; interface points are part of the cell.
    pub fn evaluate(&self, x: f64) -> Result<f64> {
        let xi = (x - self.center) / self.dx;
        if xi.abs() > 0.5 * (1.0 + 1e-12) {
            return Err(Error::OutsideCell {
                x,
                lo: self.center - 0.5 * self.dx,
                hi: self.center + 0.5 * self.dx,
            });
        }
        Ok(self.poly.at(xi))
    }

    pub fn cell_average(&self) -> f64 {
        self.poly.c0
    }
}

/// Point values of a 2D reconstruction at the face and cell quadrature nodes
/// of one cell, in local coordinates.
///
/// `x_lo[b]` / `x_hi[b]` are on the faces `xi = -1/2` / `xi = +1/2` at
/// `eta = nodes[b]`; `y_lo[a]` / `y_hi[a]` on `eta = -+1/2` at `xi = nodes[a]`;
/// `inner[a][b]` at `(nodes[a], nodes[b])`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NodeValues2D {
    pub x_lo: [f64; 2],
    pub x_hi: [f64; 2],
    pub y_lo: [f64; 2],
    pub y_hi: [f64; 2],
    pub inner: [[f64; 2]; 2],
}

/// Dimension-by-dimension CWENO3 on a 3x3 stencil, `stencil[m][l]` holding
/// the average at offset `(l - 1, m - 1)` in `(x, y)`.
///
/// x-face values sweep in `x` first, y-face values in `y` first; interior
/// node values average both sweep orders so that the result transforms
/// correctly under a swap of the axes.
pub fn reconstruct_2d(stencil: &[[f64; 3]; 3], eps: f64, nodes: [f64; 2]) -> NodeValues2D {
    let mut out = NodeValues2D::default();

    // x first: one polynomial per row
    let rows = [
        cweno3_eps(stencil[0], eps),
        cweno3_eps(stencil[1], eps),
        cweno3_eps(stencil[2], eps),
    ];
    let column_at = |xi: f64| {
        cweno3_eps([rows[0].at(xi), rows[1].at(xi), rows[2].at(xi)], eps)
    };
    let lo = column_at(-0.5);
    let hi = column_at(0.5);
    let mid = [column_at(nodes[0]), column_at(nodes[1])];
    for b in 0..2 {
        out.x_lo[b] = lo.at(nodes[b]);
        out.x_hi[b] = hi.at(nodes[b]);
    }

    // y first: one polynomial per column
    let cols = [
        cweno3_eps([stencil[0][0], stencil[1][0], stencil[2][0]], eps),
        cweno3_eps([stencil[0][1], stencil[1][1], stencil[2][1]], eps),
        cweno3_eps([stencil[0][2], stencil[1][2], stencil[2][2]], eps),
    ];
    let row_at = |eta: f64| {
        cweno3_eps([cols[0].at(eta), cols[1].at(eta), cols[2].at(eta)], eps)
    };
    let bottom = row_at(-0.5);
    let top = row_at(0.5);
    let across = [row_at(nodes[0]), row_at(nodes[1])];
    for a in 0..2 {
        out.y_lo[a] = bottom.at(nodes[a]);
        out.y_hi[a] = top.at(nodes[a]);
    }

    for a in 0..2 {
        for b in 0..2 {
            out.inner[a][b] = 0.5 * (mid[a].at(nodes[b]) + across[b].at(nodes[a]));
        }
    }
    out
}

/// Point value of the x-first dimension-by-dimension reconstruction at an
/// arbitrary local point `(xi, eta)`.
pub fn evaluate_2d(stencil: &[[f64; 3]; 3], eps: f64, xi: f64, eta: f64) -> Result<f64> {
    if xi.abs() > 0.5 * (1.0 + 1e-12) || eta.abs() > 0.5 * (1.0 + 1e-12) {
        return Err(Error::OutsideCell { x: xi.max(eta), lo: -0.5, hi: 0.5 });
    }
    let col = [
        cweno3_eps(stencil[0], eps).at(xi),
        cweno3_eps(stencil[1], eps).at(xi),
        cweno3_eps(stencil[2], eps).at(xi),
    ];
    Ok(cweno3_eps(col, eps).at(eta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const GL: [f64; 2] = [-0.288_675_134_594_812_9, 0.288_675_134_594_812_9];

    /// Average of x^2 over [c - 1/2, c + 1/2].
    fn avg_sq(c: f64) -> f64 {
        c * c + 1.0 / 12.0
    }

    #[test]
    fn constant_data_gives_constant() {
        let p = cweno3([2.5, 2.5, 2.5]);
        assert_eq!(p, Quadratic::constant(2.5));
        for xi in [-0.5, -0.2, 0.0, 0.4, 0.5] {
            assert_eq!(p.at(xi), 2.5);
        }
    }

    #[test]
    fn optimal_quadratic_reproduces_parabola() {
        // cells centred at 0, 1, 2 (unit width); local xi = x - 1
        let a = [avg_sq(0.0), avg_sq(1.0), avg_sq(2.0)];
        let p = optimal_quadratic(a);
        let [a0, a1, a2] = p.monomial();
        // x^2 = (xi + 1)^2 = 1 + 2 xi + xi^2
        assert!((a0 - 1.0).abs() < 1e-12);
        assert!((a1 - 2.0).abs() < 1e-12);
        assert!((a2 - 1.0).abs() < 1e-12);
        assert!((p.at(0.5) - 2.25).abs() < 1e-12);
    }

    #[test]
    fn smooth_limit_reproduces_parabola() {
        // When the smoothness indicators are far below the regularization the
        // nonlinear weights collapse onto the linear ones.
        let s = 1e-10;
        let a = [s * avg_sq(0.0), s * avg_sq(1.0), s * avg_sq(2.0)];
        let p = cweno3(a);
        let q = optimal_quadratic(a);
        for xi in [-0.5, -GL[1], 0.0, GL[1], 0.5] {
            assert!((p.at(xi) - q.at(xi)).abs() <= 1e-12 * s);
            assert!((p.at(xi) - s * (xi + 1.0).powi(2)).abs() <= 1e-12 * s);
        }
    }

    #[test]
    fn symmetric_midpoint_value() {
        // symmetric data: point value at the center is a0 - w_C * d2 / 12
        let a = [1.3, 1.0, 1.3];
        let p = cweno3(a);
        let w = cweno3_weights(a, epsilon(data_scale(&a), DEFAULT_SPACING));
        let expect = 1.0 - w[1] * (a[0] - 2.0 * a[1] + a[2]) / 12.0;
        assert!((p.at(0.0) - expect).abs() < 1e-15);
        assert!((w[0] - w[2]).abs() < 1e-15);
        // smooth limit: the optimal curvature correction (a+ - 2a0 + a-)/24
        let s = 1e-9;
        let small = [s * 1.3, s, s * 1.3];
        let ps = cweno3(small);
        assert!((ps.at(0.0) - (s - s * 0.6 / 24.0)).abs() < 1e-12 * s);
    }

    #[test]
    fn step_stays_bounded() {
        let p = cweno3([0.0, 0.0, 1.0]);
        for k in 0..=20 {
            let xi = -0.5 + k as f64 / 20.0;
            let v = p.at(xi);
            assert!(v >= -1e-12 && v <= 1.0 + 1e-12, "{v}");
        }
        let p = cweno3([1.0, 0.0, 0.0]);
        assert!(p.at(0.5).abs() < 1e-3);
    }

    #[test]
    fn evaluate_checks_cell_bounds() {
        let r = ReconstructionPolynomial::cweno3([1.0, 2.0, 3.0], 0.5, 0.1).unwrap();
        assert!(r.evaluate(0.55).is_ok());
        assert!(r.evaluate(0.45).is_ok());
        assert!(matches!(r.evaluate(0.56), Err(Error::OutsideCell { .. })));
        assert!(ReconstructionPolynomial::cweno3([1.0, f64::NAN, 3.0], 0.0, 1.0).is_err());
        let c = ReconstructionPolynomial::cweno3([4.0, 4.0, 4.0], 0.0, 1.0).unwrap();
        assert_eq!(c.evaluate(0.3).unwrap(), 4.0);
    }

    #[test]
    fn third_order_interface_convergence() {
        // L1 error of the reconstructed interface values of sin(2 pi x) + 2
        let f_avg = |a: f64, b: f64| {
            let tp = 2.0 * std::f64::consts::PI;
            2.0 + ((tp * a).cos() - (tp * b).cos()) / (tp * (b - a))
        };
        let mut errs = Vec::new();
        let mut n = 32;
        while n <= 1024 {
            let dx = 1.0 / n as f64;
            let avg: Vec<f64> = (0..n + 2)
                .map(|k| {
                    let a = (k as f64 - 1.0) * dx;
                    f_avg(a, a + dx)
                })
                .collect();
            let mut err = 0.0;
            for i in 1..=n {
                let p = cweno3([avg[i - 1], avg[i], avg[i + 1]]);
                let xr = i as f64 * dx;
                let exact = 2.0 + (2.0 * std::f64::consts::PI * xr).sin();
                err += dx * (p.at(0.5) - exact).abs();
            }
            errs.push(err);
            n *= 2;
        }
        let rate = (errs[0] / errs[errs.len() - 1]).log2() / (errs.len() - 1) as f64;
        assert!(rate >= 2.7, "rate {rate}, errors {errs:?}");
    }

    #[test]
    fn reconstruct_2d_constant() {
        let s = [[3.0; 3]; 3];
        let v = reconstruct_2d(&s, epsilon(3.0, DEFAULT_SPACING), GL);
        assert_eq!(v.x_lo, [3.0, 3.0]);
        assert_eq!(v.y_hi, [3.0, 3.0]);
        assert_eq!(v.inner, [[3.0; 2]; 2]);
    }

    #[test]
    fn reconstruct_2d_paraboloid_in_smooth_limit() {
        // scaled x^2 + y^2 on unit cells centred at offsets -1, 0, 1
        let s = 1e-10;
        let mut st = [[0.0; 3]; 3];
        for m in 0..3 {
            for l in 0..3 {
                st[m][l] = s * (avg_sq(l as f64 - 1.0) + avg_sq(m as f64 - 1.0));
            }
        }
        let v = reconstruct_2d(&st, epsilon(data_scale(&st.concat()), DEFAULT_SPACING), GL);
        let f = |x: f64, y: f64| s * (x * x + y * y);
        for a in 0..2 {
            for b in 0..2 {
                assert!((v.inner[a][b] - f(GL[a], GL[b])).abs() < 1e-12 * s);
            }
            assert!((v.x_lo[a] - f(-0.5, GL[a])).abs() < 1e-12 * s);
            assert!((v.y_hi[a] - f(GL[a], 0.5)).abs() < 1e-12 * s);
        }
        assert!((evaluate_2d(&st, epsilon(0.0, DEFAULT_SPACING), 0.3, -0.1).unwrap() - f(0.3, -0.1)).abs() < 1e-12 * s);
    }

    #[test]
    fn reconstruct_2d_reduces_to_1d_for_x_only_data() {
        let row = [1.0, 1.7, 1.2];
        let st = [row, row, row];
        let v = reconstruct_2d(&st, epsilon(data_scale(&row), DEFAULT_SPACING), GL);
        let p = cweno3(row);
        for b in 0..2 {
            assert!((v.x_lo[b] - p.at(-0.5)).abs() < 1e-14);
            assert!((v.x_hi[b] - p.at(0.5)).abs() < 1e-14);
            assert!((v.y_lo[b] - p.at(GL[b])).abs() < 1e-14);
            for a in 0..2 {
                assert!((v.inner[a][b] - p.at(GL[a])).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn reconstruct_2d_transpose_symmetry() {
        let st = [[1.0, 2.0, 0.5], [1.1, 1.9, 3.0], [0.7, 1.4, 2.2]];
        let mut tr = [[0.0; 3]; 3];
        for m in 0..3 {
            for l in 0..3 {
                tr[m][l] = st[l][m];
            }
        }
        let a = reconstruct_2d(&st, epsilon(3.0, DEFAULT_SPACING), GL);
        let b = reconstruct_2d(&tr, epsilon(3.0, DEFAULT_SPACING), GL);
        for k in 0..2 {
            assert!((a.x_lo[k] - b.y_lo[k]).abs() < 1e-14);
            assert!((a.x_hi[k] - b.y_hi[k]).abs() < 1e-14);
            for q in 0..2 {
                assert!((a.inner[k][q] - b.inner[q][k]).abs() < 1e-14);
            }
        }
    }

    proptest! {
        #[test]
        fn mean_is_conserved(a in -1e3f64..1e3, b in -1e3f64..1e3, c in -1e3f64..1e3) {
            let p = cweno3([a, b, c]);
            // exact mean of c0 + c1 xi + c2 (xi^2 - 1/12), checked by GL2
            let gl = 0.5 * (p.at(GL[0]) + p.at(GL[1]));
            prop_assert!((gl - b).abs() <= 1e-13 * b.abs().max(1.0) * 10.0);
            prop_assert_eq!(p.c0, b);
        }

        #[test]
        fn scale_equivariance(a in 1.0f64..10.0, b in 1.0f64..10.0, c in 1.0f64..10.0,
                              lambda in 1.0f64..100.0, xi in -0.5f64..0.5) {
            let p = cweno3([a, b, c]).at(xi);
            let q = cweno3([lambda * a, lambda * b, lambda * c]).at(xi);
            prop_assert!((q - lambda * p).abs() <= 1e-12 * lambda * 10.0);
        }

        #[test]
        fn mean_of_2d_interior_nodes(v in proptest::collection::vec(0.1f64..5.0, 9)) {
            let mut st = [[0.0; 3]; 3];
            for m in 0..3 { for l in 0..3 { st[m][l] = v[3 * m + l]; } }
            let r = reconstruct_2d(&st, epsilon(data_scale(&v), DEFAULT_SPACING), GL);
            let mean = 0.25 * (r.inner[0][0] + r.inner[0][1] + r.inner[1][0] + r.inner[1][1]);
            prop_assert!((mean - st[1][1]).abs() < 1e-13 * 10.0);
        }
    }
}
