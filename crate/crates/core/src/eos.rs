//! Equations of state.
//!
//! The solver only talks to thermodynamics through [`EquationOfState`]. Besides
//! the usual closures (pressure, sound speed) an equation of state used by the
//! well-balanced scheme must invert an isentropic equilibrium: given a specific
//! enthalpy `h` and an entropy variable, return density and internal energy
//! density. For the ideal gas the entropy variable is the polytropic constant
//! `K` in `p = K rho^gamma` and the inversions are closed form.

use crate::error::{Error, Result};

/// Thermodynamic closure used by the solver.
///
/// The entropy variable is called `k` throughout. For the ideal gas it is the
/// polytropic constant; other equations of state may use any monotone function
/// of the specific entropy.
pub trait EquationOfState: Send + Sync {
    /// Pressure from density and specific internal energy.
    fn pressure(&self, rho: f64, e: f64) -> Result<f64>;

    /// Internal energy density `rho e` from density and pressure.
    fn internal_energy_density(&self, rho: f64, p: f64) -> Result<f64>;

    fn sound_speed(&self, rho: f64, p: f64) -> Result<f64>;

    /// Entropy variable from density and pressure.
    fn k_from(&self, rho: f64, p: f64) -> Result<f64>;

    /// Density on the isentrope `k` at specific enthalpy `h`.
    fn rho_from(&self, h: f64, k: f64) -> Result<f64>;

    /// Internal energy density on the isentrope `k` at specific enthalpy `h`.
    fn rhoe_from(&self, h: f64, k: f64) -> Result<f64>;

    /// Pressure on the isentrope `k` at specific enthalpy `h`.
    fn pressure_from(&self, h: f64, k: f64) -> Result<f64>;

    /// `(rho, rho e, p)` on the isentrope `k` at specific enthalpy `h`.
    fn equilibrium_state(&self, h: f64, k: f64) -> Result<(f64, f64, f64)> {
        Ok((
            self.rho_from(h, k)?,
            self.rhoe_from(h, k)?,
            self.pressure_from(h, k)?,
        ))
    }

    /// Specific enthalpy `h = e + p / rho`.
    fn enthalpy(&self, rho: f64, p: f64) -> Result<f64> {
        let rhoe = self.internal_energy_density(rho, p)?;
        Ok((rhoe + p) / rho)
    }

    /// Ratio of specific heats when the closed-form polytropic inversion
    /// applies, which enables the scalar equilibrium solve.
    ///
    /// Equations of state returning `None` need a two-variable Newton solve on
    /// the density and energy constraints, which is not provided yet; the
    /// equilibrium solver reports [`Error::Unsupported`] for them.
    fn polytropic_gamma(&self) -> Option<f64> {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Exponent {
    Int(i32),
    /// `n + 1/2`
    HalfInt(i32),
    General(f64),
}

impl Exponent {
    fn classify(e: f64) -> Self {
        let twice = 2.0 * e;
        if (twice - twice.round()).abs() < 1e-13 && twice.abs() < 64.0 {
            let t = twice.round() as i32;
            if t % 2 == 0 {
                Exponent::Int(t / 2)
            } else if t > 0 {
                Exponent::HalfInt(t / 2)
            } else {
                Exponent::General(e)
            }
        } else {
            Exponent::General(e)
        }
    }

    #[inline]
    fn apply(self, x: f64) -> f64 {
        match self {
            Exponent::Int(n) => x.powi(n),
            Exponent::HalfInt(n) => x.powi(n) * x.sqrt(),
            Exponent::General(e) => x.powf(e),
        }
    }
}

/// Parameters of the ideal gas law `p = rho e (gamma - 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdealGas {
    gamma: f64,
    gm1: f64,
    /// `1 / (gamma - 1)`
    inv_gm1: f64,
    /// `(gamma - 1) / gamma`
    gm1_over_gamma: f64,
    density_exponent: Exponent,
}

impl IdealGas {
    pub fn new(gamma: f64) -> Result<Self> {
        if !(gamma > 1.0) || !gamma.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "ratio of specific heats must exceed 1, got {gamma}"
            )));
        }
        let gm1 = gamma - 1.0;
        Ok(IdealGas {
            gamma,
            gm1,
            inv_gm1: 1.0 / gm1,
            gm1_over_gamma: gm1 / gamma,
            density_exponent: Exponent::classify(1.0 / gm1),
        })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    #[inline]
    fn density_on_isentrope(&self, h: f64, k: f64) -> Result<f64> {
        if !(h > 0.0) {
            return Err(Error::InvalidEquilibrium(format!(
                "non-positive specific enthalpy {h:e}"
            )));
        }
        if !(k > 0.0) {
            return Err(Error::InvalidEquilibrium(format!(
                "non-positive polytropic constant {k:e}"
            )));
        }
        Ok(self.density_exponent.apply(self.gm1_over_gamma * h / k))
    }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidState(format!("{name} must be positive, got {v:e}")))
    }
}

impl EquationOfState for IdealGas {
    #[inline]
    fn pressure(&self, rho: f64, e: f64) -> Result<f64> {
        check_positive("density", rho)?;
        check_positive("specific internal energy", e)?;
        Ok(rho * e * self.gm1)
    }

    #[inline]
    fn internal_energy_density(&self, rho: f64, p: f64) -> Result<f64> {
        check_positive("density", rho)?;
        check_positive("pressure", p)?;
        Ok(p * self.inv_gm1)
    }

    #[inline]
    fn sound_speed(&self, rho: f64, p: f64) -> Result<f64> {
        check_positive("density", rho)?;
        check_positive("pressure", p)?;
        Ok((self.gamma * p / rho).sqrt())
    }

    fn k_from(&self, rho: f64, p: f64) -> Result<f64> {
        check_positive("density", rho)?;
        check_positive("pressure", p)?;
        Ok(p / rho.powf(self.gamma))
    }

    #[inline]
    fn rho_from(&self, h: f64, k: f64) -> Result<f64> {
        self.density_on_isentrope(h, k)
    }

    #[inline]
    fn rhoe_from(&self, h: f64, k: f64) -> Result<f64> {
        // rho e = p / (gamma - 1) = rho h / gamma
        let rho = self.density_on_isentrope(h, k)?;
        Ok(rho * h / self.gamma)
    }

    #[inline]
    fn pressure_from(&self, h: f64, k: f64) -> Result<f64> {
        let rho = self.density_on_isentrope(h, k)?;
        Ok(self.gm1_over_gamma * rho * h)
    }

    #[inline]
    fn equilibrium_state(&self, h: f64, k: f64) -> Result<(f64, f64, f64)> {
        let rho = self.density_on_isentrope(h, k)?;
        let p = self.gm1_over_gamma * rho * h;
        Ok((rho, p * self.inv_gm1, p))
    }

    #[inline]
    fn enthalpy(&self, rho: f64, p: f64) -> Result<f64> {
        check_positive("density", rho)?;
        check_positive("pressure", p)?;
        Ok(p / (self.gm1_over_gamma * rho))
    }

    fn polytropic_gamma(&self) -> Option<f64> {
        Some(self.gamma)
    }
}
