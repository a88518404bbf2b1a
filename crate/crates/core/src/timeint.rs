//! Third-order strong-stability-preserving Runge-Kutta integration.

use crate::error::{Error, Result};

/// Time stepping controls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeControls {
    pub cfl: f64,
    pub t_end: f64,
    pub dt_max: Option<f64>,
}

impl TimeControls {
    pub fn new(cfl: f64, t_end: f64) -> Result<Self> {
        if !(cfl > 0.0 && cfl <= 1.0) {
            return Err(Error::InvalidParameter(format!("CFL number {cfl} outside (0, 1]")));
        }
        if !(t_end >= 0.0) || !t_end.is_finite() {
            return Err(Error::InvalidParameter(format!("final time {t_end}")));
        }
        Ok(TimeControls { cfl, t_end, dt_max: None })
    }

    /// Clip a stable step so that it does not overshoot `t_end` (and respects
    /// `dt_max`). Steps that would leave a sliver shorter than a relative
    /// `1e-12` of the remaining time are stretched to land on `t_end`.
    pub fn clip(&self, t: f64, dt_stable: f64) -> f64 {
        let mut dt = dt_stable;
        if let Some(m) = self.dt_max {
            dt = dt.min(m);
        }
        let remaining = self.t_end - t;
        if dt >= remaining * (1.0 - 1e-12) {
            remaining
        } else {
            dt
        }
    }
}

/// One SSP-RK3 step:
///
/// ```text
/// u1 = u + dt L(u)
/// u2 = 3/4 u + 1/4 (u1 + dt L(u1))
/// u  = 1/3 u + 2/3 (u2 + dt L(u2))
/// ```
///
/// `rhs` receives a mutable stage state so it can fill ghost cells, and
/// returns `L` for every stored entry.
pub fn ssprk3_step<const NV: usize>(
    u: &mut Vec<[f64; NV]>,
    dt: f64,
    mut rhs: impl FnMut(&mut [[f64; NV]]) -> Result<Vec<[f64; NV]>>,
) -> Result<()> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidParameter(format!("time step {dt}")));
    }
    let n = u.len();
    let check = |l: &[[f64; NV]], stage: usize| -> Result<()> {
        if l.len() != n {
            return Err(Error::ShapeMismatch(format!("rhs length {} for {} cells", l.len(), n)));
        }
        if let Some(i) = l.iter().position(|v| v.iter().any(|x| !x.is_finite())) {
            return Err(Error::NonFinite(format!("stage {stage} rhs at storage cell {i}")));
        }
        Ok(())
    };

    let l0 = rhs(u)?;
    check(&l0, 1)?;
    let mut u1: Vec<[f64; NV]> = u
        .iter()
        .zip(&l0)
        .map(|(a, l)| std::array::from_fn(|k| a[k] + dt * l[k]))
        .collect();

    let l1 = rhs(&mut u1)?;
    check(&l1, 2)?;
    let mut u2: Vec<[f64; NV]> = u
        .iter()
        .zip(u1.iter().zip(&l1))
        .map(|(a, (b, l))| std::array::from_fn(|k| 0.75 * a[k] + 0.25 * (b[k] + dt * l[k])))
        .collect();

    let l2 = rhs(&mut u2)?;
    check(&l2, 3)?;
    for (a, (b, l)) in u.iter_mut().zip(u2.iter().zip(&l2)) {
        for k in 0..NV {
            a[k] = a[k] / 3.0 + 2.0 / 3.0 * (b[k] + dt * l[k]);
        }
    }
    if let Some(i) = u.iter().position(|v| v.iter().any(|x| !x.is_finite())) {
        return Err(Error::NonFinite(format!("updated state at storage cell {i}")));
    }
    Ok(())
}
