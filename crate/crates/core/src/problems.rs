//! Closed-form initial data and gravity fields of the test problems.

use std::f64::consts::PI;

use crate::eos::{EquationOfState, IdealGas};
use crate::equilibrium::{GravityField, UniformGravity};
use crate::error::{Error, Result};

/// Width of the Gaussian pressure bumps.
pub const BUMP_WIDTH: f64 = 0.05;

/// Isentropic atmosphere in a uniform field `phi = g x` on `[0, 1]`, with an
/// additive Gaussian pressure bump of amplitude `amplitude` at `x = 1/2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atmosphere {
    pub g: f64,
    pub gamma: f64,
    pub h0: f64,
    pub k: f64,
    pub amplitude: f64,
}

impl Atmosphere {
    pub fn new(amplitude: f64) -> Self {
        Atmosphere {
            g: 3.15,
            gamma: 1.4,
            h0: 3.75,
            k: 1.0,
            amplitude,
        }
    }

    pub fn domain(&self) -> (f64, f64) {
        (0.0, 1.0)
    }

    pub fn eos(&self) -> Result<IdealGas> {
        IdealGas::new(self.gamma)
    }

    pub fn gravity(&self) -> UniformGravity {
        UniformGravity { g: [self.g, 0.0] }
    }

    /// Equilibrium specific enthalpy `h0 - g x`.
    pub fn enthalpy(&self, x: f64) -> f64 {
        self.h0 - self.g * x
    }

    pub fn density(&self, x: f64) -> Result<f64> {
        let h = self.enthalpy(x);
        if !(h > 0.0) {
            return Err(Error::InvalidEquilibrium(format!("atmosphere enthalpy {h:e} at x = {x}")));
        }
        Ok(((self.gamma - 1.0) * h / (self.gamma * self.k)).powf(1.0 / (self.gamma - 1.0)))
    }

    pub fn equilibrium_pressure(&self, x: f64) -> Result<f64> {
        Ok(self.k * self.density(x)?.powf(self.gamma))
    }

    pub fn pressure(&self, x: f64) -> Result<f64> {
        let bump = (-(x - 0.5).powi(2) / (BUMP_WIDTH * BUMP_WIDTH)).exp();
        Ok(self.equilibrium_pressure(x)? + self.amplitude * bump)
    }

    /// Conserved state `[rho, 0, p / (gamma - 1)]` of the perturbed setup.
    pub fn state(&self, x: f64) -> Result<[f64; 3]> {
        Ok([self.density(x)?, 0.0, self.pressure(x)? / (self.gamma - 1.0)])
    }

    /// Conserved state of the unperturbed equilibrium.
    pub fn equilibrium_state(&self, x: f64) -> Result<[f64; 3]> {
        Ok([self.density(x)?, 0.0, self.equilibrium_pressure(x)? / (self.gamma - 1.0)])
    }

    pub fn sound_speed(&self, x: f64) -> Result<f64> {
        self.eos()?.sound_speed(self.density(x)?, self.equilibrium_pressure(x)?)
    }
}

/// `sin(z) / z`, with a series near zero.
pub fn sinc(z: f64) -> f64 {
    let z = z.abs();
    if z < 0.1 {
        let z2 = z * z;
        1.0 - z2 / 6.0 * (1.0 - z2 / 20.0 * (1.0 - z2 / 42.0 * (1.0 - z2 / 72.0 * (1.0 - z2 / 110.0))))
    } else {
        z.sin() / z
    }
}

/// `sinc'(z) / z = (z cos z - sin z) / z^3`, with a series near zero where
/// the direct formula cancels.
pub fn sinc_derivative_over_z(z: f64) -> f64 {
    let z = z.abs();
    if z < 0.1 {
        let z2 = z * z;
        -1.0 / 3.0 + z2 / 30.0 - z2 * z2 / 840.0 + z2.powi(3) / 45_360.0 - z2.powi(4) / 3_991_680.0
            + z2.powi(5) / 518_918_400.0
    } else {
        (z * z.cos() - z.sin()) / (z * z * z)
    }
}

/// Potential `phi(r) = -2 K rho_C sinc(alpha r)` of the `gamma = 2` polytrope.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolytropeGravity {
    pub alpha: f64,
    /// `2 K rho_C`
    pub depth: f64,
}

impl GravityField for PolytropeGravity {
    fn potential(&self, x: f64, y: f64) -> f64 {
        -self.depth * sinc(self.alpha * (x * x + y * y).sqrt())
    }

    fn gradient(&self, x: f64, y: f64) -> [f64; 2] {
        let z = self.alpha * (x * x + y * y).sqrt();
        let f = -self.depth * self.alpha * self.alpha * sinc_derivative_over_z(z);
        [f * x, f * y]
    }
}

/// Self-gravitating `gamma = 2` polytrope `rho = rho_C sinc(alpha r)` on
/// `[-1/2, 1/2]^2`, with a multiplicative Gaussian pressure bump at the
/// center.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Polytrope {
    pub k: f64,
    pub grav_const: f64,
    pub rho_c: f64,
    pub amplitude: f64,
}

impl Polytrope {
    pub const GAMMA: f64 = 2.0;

    pub fn new(amplitude: f64) -> Self {
        Polytrope {
            k: 1.0,
            grav_const: 1.0,
            rho_c: 1.0,
            amplitude,
        }
    }

    pub fn domain(&self) -> (f64, f64) {
        (-0.5, 0.5)
    }

    /// `sqrt(4 pi G / (2 K))`
    pub fn alpha(&self) -> f64 {
        (4.0 * PI * self.grav_const / (2.0 * self.k)).sqrt()
    }

    pub fn eos(&self) -> Result<IdealGas> {
        IdealGas::new(Self::GAMMA)
    }

    pub fn gravity(&self) -> PolytropeGravity {
        PolytropeGravity {
            alpha: self.alpha(),
            depth: 2.0 * self.k * self.rho_c,
        }
    }

    pub fn density_at_radius(&self, r: f64) -> Result<f64> {
        let z = self.alpha() * r;
        if !(z < PI) {
            return Err(Error::InvalidEquilibrium(format!("polytrope radius {r} outside the star")));
        }
        Ok(self.rho_c * sinc(z))
    }

    pub fn equilibrium_pressure_at_radius(&self, r: f64) -> Result<f64> {
        Ok(self.k * self.density_at_radius(r)?.powi(2))
    }

    pub fn pressure_at_radius(&self, r: f64) -> Result<f64> {
        let bump = (-(r * r) / (BUMP_WIDTH * BUMP_WIDTH)).exp();
        Ok((1.0 + self.amplitude * bump) * self.equilibrium_pressure_at_radius(r)?)
    }

    /// Conserved state `[rho, 0, 0, p / (gamma - 1)]` of the perturbed setup.
    pub fn state(&self, x: f64, y: f64) -> Result<[f64; 4]> {
        let r = (x * x + y * y).sqrt();
        Ok([self.density_at_radius(r)?, 0.0, 0.0, self.pressure_at_radius(r)? / (Self::GAMMA - 1.0)])
    }

    pub fn equilibrium_state(&self, x: f64, y: f64) -> Result<[f64; 4]> {
        let r = (x * x + y * y).sqrt();
        Ok([
            self.density_at_radius(r)?,
            0.0,
            0.0,
            self.equilibrium_pressure_at_radius(r)? / (Self::GAMMA - 1.0),
        ])
    }

    /// Radial state `[rho, 0, E]` for cylindrically symmetric 1D runs.
    pub fn radial_state(&self, r: f64) -> Result<[f64; 3]> {
        Ok([self.density_at_radius(r)?, 0.0, self.pressure_at_radius(r)? / (Self::GAMMA - 1.0)])
    }

    pub fn sound_speed_at_radius(&self, r: f64) -> Result<f64> {
        self.eos()?
            .sound_speed(self.density_at_radius(r)?, self.equilibrium_pressure_at_radius(r)?)
    }
}

/// Polytrope with six high-pressure balls.
#[derive(Debug, Clone, PartialEq)]
pub struct Blast {
    pub polytrope: Polytrope,
    pub centers: Vec<[f64; 2]>,
    pub radius: f64,
    pub increment: f64,
}

impl Default for Blast {
    fn default() -> Self {
        Blast {
            polytrope: Polytrope::new(0.0),
            centers: vec![
                [-0.25, 0.3],
                [-0.15, 0.1],
                [0.025, 0.3],
                [0.025, 0.225],
                [0.1, -0.1],
                [0.1, -0.1],
            ],
            radius: 0.05,
            increment: 100.0,
        }
    }
}

impl Blast {
    /// Pressure increment: `increment` times the number of open balls
    /// containing the point.
    pub fn pressure_increment(&self, x: f64, y: f64) -> f64 {
        let inside = self
            .centers
            .iter()
            .filter(|c| (x - c[0]).powi(2) + (y - c[1]).powi(2) < self.radius * self.radius)
            .count();
        self.increment * inside as f64
    }

    pub fn state(&self, x: f64, y: f64) -> Result<[f64; 4]> {
        let mut u = self.polytrope.equilibrium_state(x, y)?;
        u[3] += self.pressure_increment(x, y) / (Polytrope::GAMMA - 1.0);
        Ok(u)
    }
}
