//! Local hydrostatic equilibria.
//!
//! In every cell the scheme recovers an isentropic hydrostatic profile
//! `h_eq(x) = h0 + phi_i - phi(x)` on the isentrope `K0` whose quadrature
//! averages of density and internal energy density reproduce the cell's
//! averages. For a polytropic equation of state the two constraints reduce to
//! a single monotone equation for `h0`, solved by a safeguarded Newton
//! iteration.

use crate::eos::EquationOfState;
use crate::error::{Error, Result};

/// An analytic gravitational potential. One-dimensional problems use `y = 0`
/// and the first gradient component.
pub trait GravityField: Send + Sync {
    fn potential(&self, x: f64, y: f64) -> f64;
    fn gradient(&self, x: f64, y: f64) -> [f64; 2];
}

/// No gravity.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoGravity;

impl GravityField for NoGravity {
    fn potential(&self, _x: f64, _y: f64) -> f64 {
        0.0
    }
    fn gradient(&self, _x: f64, _y: f64) -> [f64; 2] {
        [0.0, 0.0]
    }
}

/// Uniform field `phi = gx x + gy y`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformGravity {
    pub g: [f64; 2],
}

impl GravityField for UniformGravity {
    fn potential(&self, x: f64, y: f64) -> f64 {
        self.g[0] * x + self.g[1] * y
    }
    fn gradient(&self, _x: f64, _y: f64) -> [f64; 2] {
        self.g
    }
}

/// Largest relative mismatch between `gradient` and centred differences of
/// `potential` with step `step` over `points`.
pub fn gradient_mismatch(field: &dyn GravityField, points: &[[f64; 2]], step: f64) -> f64 {
    let mut worst = 0.0f64;
    for &[x, y] in points {
        let g = field.gradient(x, y);
        let fx = (field.potential(x + step, y) - field.potential(x - step, y)) / (2.0 * step);
        let fy = (field.potential(x, y + step) - field.potential(x, y - step)) / (2.0 * step);
        let scale = g[0].abs().max(g[1].abs()).max(1.0);
        worst = worst.max((fx - g[0]).abs() / scale).max((fy - g[1]).abs() / scale);
    }
    worst
}

/// `E - |m|^2 / (2 rho)` from a cell-averaged conserved state
/// `[rho, m.., E]`.
pub fn internal_energy_average(u: &[f64]) -> Result<f64> {
    let n = u.len();
    if n < 3 {
        return Err(Error::ShapeMismatch(format!("conserved state of length {n}")));
    }
    let rho = u[0];
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(Error::InvalidState(format!("density must be positive, got {rho:e}")));
    }
    let m2: f64 = u[1..n - 1].iter().map(|m| m * m).sum();
    Ok(u[n - 1] - 0.5 * m2 / rho)
}

/// Convergence controls of the equilibrium solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonControls {
    pub step_tol: f64,
    pub residual_tol: f64,
    /// Relative residual accepted after the iteration ends.
    pub certificate_tol: f64,
    pub max_iterations: usize,
}

impl Default for NewtonControls {
    fn default() -> Self {
        NewtonControls {
            step_tol: 1e-14,
            residual_tol: 1e-14,
            certificate_tol: 1e-12,
            max_iterations: 50,
        }
    }
}

/// Equilibrium profile recovered in one cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalEquilibrium {
    /// Specific enthalpy at the cell center.
    pub h0: f64,
    /// Entropy variable (polytropic constant for the ideal gas).
    pub k: f64,
    /// Potential at the cell center.
    pub phi_center: f64,
    /// Whether the cell satisfies the uniqueness bound of the scalar solve.
    pub uniqueness_ok: bool,
    pub iterations: usize,
}

impl LocalEquilibrium {
    /// Constant-potential equilibrium through a given state.
    pub fn from_state<E: EquationOfState>(eos: &E, rho: f64, p: f64, phi_center: f64) -> Result<Self> {
        Ok(LocalEquilibrium {
            h0: eos.enthalpy(rho, p)?,
            k: eos.k_from(rho, p)?,
            phi_center,
            uniqueness_ok: true,
            iterations: 0,
        })
    }

    #[inline]
    pub fn enthalpy_at(&self, phi: f64) -> f64 {
        self.h0 + self.phi_center - phi
    }

    /// `(rho, rho e, p)` of the profile where the potential is `phi`.
    #[inline]
    pub fn state_at<E: EquationOfState>(&self, eos: &E, phi: f64) -> Result<(f64, f64, f64)> {
        eos.equilibrium_state(self.enthalpy_at(phi), self.k)
    }

    /// Conserved equilibrium state `[rho, 0.., rho e]` with `NV - 2` zero
    /// momentum components.
    pub fn conserved_at<E: EquationOfState, const NV: usize>(
        &self,
        eos: &E,
        phi: f64,
    ) -> Result<[f64; NV]> {
        let (rho, rhoe, _) = self.state_at(eos, phi)?;
        let mut u = [0.0; NV];
        u[0] = rho;
        u[NV - 1] = rhoe;
        Ok(u)
    }

    /// Quadrature average `sum_a w_a U_eq(x_a)` of `(rho, rho e)` over nodes
    /// with potentials `phis` and normalized weights `weights`.
    pub fn average<E: EquationOfState>(
        &self,
        eos: &E,
        phis: &[f64],
        weights: &[f64],
    ) -> Result<(f64, f64)> {
        let mut rho = 0.0;
        let mut rhoe = 0.0;
        for (phi, w) in phis.iter().zip(weights) {
            let (r, re, _) = self.state_at(eos, *phi)?;
            rho += w * r;
            rhoe += w * re;
        }
        Ok((rho, rhoe))
    }
}

/// Upper bound on `h_max / h_min` over a cell below which the scalar
/// equilibrium equation has a unique solution.
pub fn uniqueness_ratio_bound(gamma: f64) -> f64 {
    if gamma <= 2.0 {
        gamma.sqrt()
    } else {
        gamma.powf((gamma - 1.0) / gamma)
    }
}

/// Whether `h = h0 + phi_center - phi` over the node potentials satisfies the
/// uniqueness bound for ratio of specific heats `gamma`.
pub fn uniqueness_bound_check(gamma: f64, h0: f64, phi_center: f64, phis: &[f64]) -> bool {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for phi in phis {
        let h = h0 + phi_center - phi;
        lo = lo.min(h);
        hi = hi.max(h);
    }
    lo > 0.0 && hi / lo < uniqueness_ratio_bound(gamma)
}

/// Scalar residual data of the polytropic equilibrium equation at trial `h0`.
struct Sums {
    /// `sum w a^(gamma/(gamma-1))`
    n: f64,
    /// `sum w a^(1/(gamma-1))`
    d: f64,
    /// `sum w a^((2-gamma)/(gamma-1))`
    m: f64,
}

fn sums<E: EquationOfState>(eos: &E, gm1_over_gamma: f64, h0: f64, dphi: &[f64], weights: &[f64]) -> Result<Sums> {
    let mut s = Sums { n: 0.0, d: 0.0, m: 0.0 };
    for (dp, w) in dphi.iter().zip(weights) {
        let h = h0 - dp;
        // a^(1/(gamma-1)) is the density on the unit isentrope
        let an = eos.rho_from(h, 1.0)?;
        let a = gm1_over_gamma * h;
        s.d += w * an;
        s.n += w * an * a;
        s.m += w * an / a;
    }
    Ok(s)
}

/// `f(h0)`: equilibrium internal energy average implied by matching the
/// density average `rho_bar` at trial `h0`, and its derivative.
///
/// `dphi[j] = phi(x_j) - phi_center`; `weights` are normalized.
pub fn scalar_residual<E: EquationOfState>(
    eos: &E,
    rho_bar: f64,
    h0: f64,
    dphi: &[f64],
    weights: &[f64],
) -> Result<(f64, f64)> {
    let gamma = eos.polytropic_gamma().ok_or_else(|| {
        Error::Unsupported("scalar equilibrium equation needs a polytropic equation of state".into())
    })?;
    let gm1 = gamma - 1.0;
    let s = sums(eos, gm1 / gamma, h0, dphi, weights)?;
    let f = rho_bar / gm1 * s.n / s.d;
    let df = rho_bar / gm1 * (1.0 - s.n * s.m / (gamma * s.d * s.d));
    Ok((f, df))
}

/// Recover the local equilibrium of a cell from its averages `rho_bar` and
/// `rhoe_bar`, the potential at its center and at its quadrature nodes, and
/// the normalized quadrature weights.
pub fn solve_local_equilibrium<E: EquationOfState>(
    eos: &E,
    rho_bar: f64,
    rhoe_bar: f64,
    phi_center: f64,
    node_phis: &[f64],
    weights: &[f64],
    controls: &NewtonControls,
) -> Result<LocalEquilibrium> {
    if !(rho_bar > 0.0) || !rho_bar.is_finite() {
        return Err(Error::InvalidState(format!("density average {rho_bar:e}")));
    }
    if !(rhoe_bar > 0.0) || !rhoe_bar.is_finite() {
        return Err(Error::InvalidState(format!("internal energy average {rhoe_bar:e}")));
    }
    let gamma = eos.polytropic_gamma().ok_or_else(|| {
        Error::Unsupported("equilibrium recovery needs a polytropic equation of state".into())
    })?;
    let gm1 = gamma - 1.0;
    let gm1_over_gamma = gm1 / gamma;

    let mut dphi_buf = [0.0; 16];
    let owned: Vec<f64>;
    let dphi: &[f64] = if node_phis.len() <= dphi_buf.len() {
        for (d, p) in dphi_buf.iter_mut().zip(node_phis) {
            *d = p - phi_center;
        }
        &dphi_buf[..node_phis.len()]
    } else {
        owned = node_phis.iter().map(|p| p - phi_center).collect();
        &owned
    };

    // positivity of h at every node: h0 > max dphi
    let h_floor = dphi.iter().fold(f64::NEG_INFINITY, |m, &d| m.max(d));
    let p_bar = gm1 * rhoe_bar;
    let h_guess = p_bar / (gm1_over_gamma * rho_bar);

    let mut lo = (h_guess / 10.0).max(h_floor);
    let mut hi = 10.0 * h_guess;
    if !(hi > h_floor) {
        return Err(Error::InvalidEquilibrium(format!(
            "enthalpy guess {h_guess:e} below positivity floor {h_floor:e}"
        )));
    }
    let mut h = if h_guess > h_floor { h_guess } else { 0.5 * (lo + hi) };
    let mut residual = f64::INFINITY;
    let mut iterations = 0;

    let eval = |h: f64| -> Result<(f64, f64)> {
        let s = sums(eos, gm1_over_gamma, h, dphi, weights)?;
        let f = rho_bar / gm1 * s.n / s.d;
        let df = rho_bar / gm1 * (1.0 - s.n * s.m / (gamma * s.d * s.d));
        Ok((f - rhoe_bar, df))
    };

    while iterations < controls.max_iterations {
        let (r, df) = eval(h)?;
        residual = r;
        if r.abs() <= controls.residual_tol * rhoe_bar {
            break;
        }
        // f is increasing under the uniqueness bound
        if r > 0.0 {
            hi = hi.min(h);
        } else {
            lo = lo.max(h);
        }
        let newton = h - r / df;
        let next = if df > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        let step = next - h;
        h = next;
        iterations += 1;
        if step.abs() <= controls.step_tol * h.abs() {
            residual = eval(h)?.0;
            break;
        }
    }

    if !(residual.abs() <= controls.certificate_tol * rhoe_bar) {
        return Err(Error::EquilibriumSolve(format!(
            "residual {residual:e} after {iterations} iterations (rho {rho_bar:e}, rho e {rhoe_bar:e})"
        )));
    }

    let s = sums(eos, gm1_over_gamma, h, dphi, weights)?;
    // density on isentrope K: (a / K)^(1/(gamma-1)); match the average
    let k = (s.d / rho_bar).powf(gm1);
    Ok(LocalEquilibrium {
        h0: h,
        k,
        phi_center,
        uniqueness_ok: uniqueness_bound_check(gamma, h, phi_center, node_phis),
        iterations,
    })
}
