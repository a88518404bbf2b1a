//! HLLC approximate Riemann solver.
//!
//! States are handled in the frame of the face normal as
//! `[rho, m_n, m_t, E]`; one-dimensional callers pass `m_t = 0`.

use crate::eos::EquationOfState;
use crate::error::{Error, Result};

/// Primitive variables of a normal-frame state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Primitive {
    pub rho: f64,
    pub vn: f64,
    pub vt: f64,
    pub p: f64,
    pub c: f64,
}

#[inline]
pub fn primitive<E: EquationOfState>(eos: &E, u: &[f64; 4]) -> Result<Primitive> {
    let rho = u[0];
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(Error::InvalidState(format!("density must be positive, got {rho:e}")));
    }
    let vn = u[1] / rho;
    let vt = u[2] / rho;
    let e = (u[3] - 0.5 * rho * (vn * vn + vt * vt)) / rho;
    let p = eos.pressure(rho, e)?;
    let c = eos.sound_speed(rho, p)?;
    Ok(Primitive { rho, vn, vt, p, c })
}

/// Physical flux through a face with unit normal in the frame of `u`.
#[inline]
pub fn physical_flux<E: EquationOfState>(eos: &E, u: &[f64; 4]) -> Result<[f64; 4]> {
    let w = primitive(eos, u)?;
    Ok(flux_of(u, &w))
}

#[inline]
fn flux_of(u: &[f64; 4], w: &Primitive) -> [f64; 4] {
    [
        u[1],
        u[1] * w.vn + w.p,
        u[2] * w.vn,
        (u[3] + w.p) * w.vn,
    ]
}

/// HLLC numerical flux between a left and a right state.
///
/// Wave speeds are the Davis estimates `S_L = min(v_L - c_L, v_R - c_R)` and
/// `S_R = max(v_L + c_L, v_R + c_R)`.
#[inline]
pub fn hllc<E: EquationOfState>(eos: &E, ul: &[f64; 4], ur: &[f64; 4]) -> Result<[f64; 4]> {
    let l = primitive(eos, ul)?;
    let r = primitive(eos, ur)?;
    let sl = (l.vn - l.c).min(r.vn - r.c);
    let sr = (l.vn + l.c).max(r.vn + r.c);

    let fl = flux_of(ul, &l);
    if sl >= 0.0 {
        return Ok(fl);
    }
    let fr = flux_of(ur, &r);
    if sr <= 0.0 {
        return Ok(fr);
    }

    let ml = l.rho * (sl - l.vn);
    let mr = r.rho * (sr - r.vn);
    let s_star = (r.p - l.p + l.vn * ml - r.vn * mr) / (ml - mr);

    let star = |u: &[f64; 4], w: &Primitive, s: f64, m: f64| -> [f64; 4] {
        let fac = m / (s - s_star);
        [
            fac,
            fac * s_star,
            fac * w.vt,
            fac * (u[3] / w.rho + (s_star - w.vn) * (s_star + w.p / m)),
        ]
    };

    let f = if s_star >= 0.0 {
        let us = star(ul, &l, sl, ml);
        [
            fl[0] + sl * (us[0] - ul[0]),
            fl[1] + sl * (us[1] - ul[1]),
            fl[2] + sl * (us[2] - ul[2]),
            fl[3] + sl * (us[3] - ul[3]),
        ]
    } else {
        let us = star(ur, &r, sr, mr);
        [
            fr[0] + sr * (us[0] - ur[0]),
            fr[1] + sr * (us[1] - ur[1]),
            fr[2] + sr * (us[2] - ur[2]),
            fr[3] + sr * (us[3] - ur[3]),
        ]
    };
    if f.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("HLLC flux {f:?}")));
    }
    Ok(f)
}

/// One-dimensional HLLC on `[rho, m, E]`.
#[inline]
pub fn hllc_1d<E: EquationOfState>(eos: &E, ul: &[f64; 3], ur: &[f64; 3]) -> Result<[f64; 3]> {
    let f = hllc(eos, &[ul[0], ul[1], 0.0, ul[2]], &[ur[0], ur[1], 0.0, ur[2]])?;
    Ok([f[0], f[1], f[3]])
}

/// Two-dimensional HLLC across a face of the given axis on
/// `[rho, m_x, m_y, E]`, returning the flux in Cartesian components.
#[inline]
pub fn hllc_2d<E: EquationOfState>(
    eos: &E,
    ul: &[f64; 4],
    ur: &[f64; 4],
    axis: crate::mesh::Axis,
) -> Result<[f64; 4]> {
    use crate::mesh::Axis;
    match axis {
        Axis::X => hllc(eos, ul, ur),
        Axis::Y => {
            let f = hllc(eos, &[ul[0], ul[2], ul[1], ul[3]], &[ur[0], ur[2], ur[1], ur[3]])?;
            Ok([f[0], f[2], f[1], f[3]])
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eos::IdealGas;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cons(g: f64, rho: f64, v: f64, vt: f64, p: f64) -> [f64; 4] {
        [rho, rho * v, rho * vt, p / (g - 1.0) + 0.5 * rho * (v * v + vt * vt)]
    }

    /// Exact Riemann solver (ideal gas), sampled at x/t = 0. Returns
    /// `(rho, v, p)`.
    fn exact_riemann(g: f64, l: (f64, f64, f64), r: (f64, f64, f64)) -> (f64, f64, f64) {
        let (rl, vl, pl) = l;
        let (rr, vr, pr) = r;
        let cl = (g * pl / rl).sqrt();
        let cr = (g * pr / rr).sqrt();
        let fk = |p: f64, rk: f64, pk: f64, ck: f64| -> (f64, f64) {
            if p > pk {
                let a = 2.0 / ((g + 1.0) * rk);
                let b = (g - 1.0) / (g + 1.0) * pk;
                let q = (a / (p + b)).sqrt();
                ((p - pk) * q, q * (1.0 - 0.5 * (p - pk) / (p + b)))
            } else {
                let e = (g - 1.0) / (2.0 * g);
                let ratio = p / pk;
                (
                    2.0 * ck / (g - 1.0) * (ratio.powf(e) - 1.0),
                    ratio.powf(-(g + 1.0) / (2.0 * g)) / (rk * ck),
                )
            }
        };
        let mut p = 0.5 * (pl + pr);
        for _ in 0..100 {
            let (f1, d1) = fk(p, rl, pl, cl);
            let (f2, d2) = fk(p, rr, pr, cr);
            let dp = (f1 + f2 + vr - vl) / (d1 + d2);
            p = (p - dp).max(1e-12);
            if dp.abs() < 1e-14 * p {
                break;
            }
        }
        let (f1, _) = fk(p, rl, pl, cl);
        let (f2, _) = fk(p, rr, pr, cr);
        let u = 0.5 * (vl + vr) + 0.5 * (f2 - f1);
        let gr = (g - 1.0) / (g + 1.0);
        if u >= 0.0 {
            // left of contact
            if p > pl {
                let s = vl - cl * ((g + 1.0) / (2.0 * g) * p / pl + (g - 1.0) / (2.0 * g)).sqrt();
                if s >= 0.0 {
                    return (rl, vl, pl);
                }
                (rl * (p / pl + gr) / (gr * p / pl + 1.0), u, p)
            } else {
                let head = vl - cl;
                let cstar = cl * (p / pl).powf((g - 1.0) / (2.0 * g));
                let tail = u - cstar;
                if head >= 0.0 {
                    (rl, vl, pl)
                } else if tail <= 0.0 {
                    (rl * (p / pl).powf(1.0 / g), u, p)
                } else {
                    let c = 2.0 / (g + 1.0) * (cl + 0.5 * (g - 1.0) * vl);
                    let rho = rl * (c / cl).powf(2.0 / (g - 1.0));
                    (rho, c, pl * (c / cl).powf(2.0 * g / (g - 1.0)))
                }
            }
        } else if p > pr {
            let s = vr + cr * ((g + 1.0) / (2.0 * g) * p / pr + (g - 1.0) / (2.0 * g)).sqrt();
            if s <= 0.0 {
                return (rr, vr, pr);
            }
            (rr * (p / pr + gr) / (gr * p / pr + 1.0), u, p)
        } else {
            let head = vr + cr;
            let cstar = cr * (p / pr).powf((g - 1.0) / (2.0 * g));
            let tail = u + cstar;
            if head <= 0.0 {
                (rr, vr, pr)
            } else if tail >= 0.0 {
                (rr * (p / pr).powf(1.0 / g), u, p)
            } else {
                let c = 2.0 / (g + 1.0) * (cr - 0.5 * (g - 1.0) * vr);
                let rho = rr * (c / cr).powf(2.0 / (g - 1.0));
                (rho, -c, pr * (c / cr).powf(2.0 * g / (g - 1.0)))
            }
        }
    }

    #[test]
    fn physical_flux_examples() {
        let gas = IdealGas::new(1.4).unwrap();
        let f = physical_flux(&gas, &cons(1.4, 1.0, 1.0, 0.0, 1.0)).unwrap();
        let expect = [1.0, 2.0, 0.0, 4.0];
        for k in 0..4 {
            assert!((f[k] - expect[k]).abs() < 1e-14);
        }
        let f = physical_flux(&gas, &cons(1.4, 2.0, 0.0, 0.0, 3.0)).unwrap();
        assert_eq!(f, [0.0, 3.0, 0.0, 0.0]);
    }

    #[test]
    fn rotational_symmetry() {
        let gas = IdealGas::new(1.4).unwrap();
        let ul = [1.0, 0.3, -0.2, 2.5];
        let ur = [0.8, -0.1, 0.4, 2.0];
        let fx = hllc_2d(&gas, &ul, &ur, crate::mesh::Axis::X).unwrap();
        let sw = |u: [f64; 4]| [u[0], u[2], u[1], u[3]];
        let fy = hllc_2d(&gas, &sw(ul), &sw(ur), crate::mesh::Axis::Y).unwrap();
        for k in 0..4 {
            assert!((fy[k] - sw(fx)[k]).abs() < 1e-15);
        }
    }

    #[test]
    fn supersonic_upwinding() {
        let gas = IdealGas::new(1.4).unwrap();
        let ul = cons(1.4, 1.0, 5.0, 0.1, 1.0);
        let ur = cons(1.4, 0.5, 4.0, 0.0, 0.8);
        assert_eq!(hllc(&gas, &ul, &ur).unwrap(), physical_flux(&gas, &ul).unwrap());
        let ul = cons(1.4, 1.0, -5.0, 0.1, 1.0);
        let ur = cons(1.4, 0.5, -4.0, 0.0, 0.8);
        assert_eq!(hllc(&gas, &ul, &ur).unwrap(), physical_flux(&gas, &ur).unwrap());
    }

    #[test]
    fn invalid_state_is_error() {
        let gas = IdealGas::new(1.4).unwrap();
        assert!(hllc(&gas, &[-1.0, 0.0, 0.0, 1.0], &[1.0, 0.0, 0.0, 1.0]).is_err());
        assert!(hllc(&gas, &[1.0, 2.0, 0.0, 1.0], &[1.0, 0.0, 0.0, 1.0]).is_err());
    }

    #[test]
    fn weak_waves_match_exact_flux() {
        // in the acoustic limit HLLC with Davis speeds resolves all three
        // waves, so the flux error is quadratic in the jump size
        let g = 1.4;
        let gas = IdealGas::new(g).unwrap();
        for base in [(1.0, 0.2, 1.0), (0.5, -0.3, 2.0)] {
            for delta in [1e-2, 1e-3] {
                let l = base;
                let r = (base.0 + delta, base.1 + 0.5 * delta, base.2 - 0.7 * delta);
                let (rho, v, p) = exact_riemann(g, l, r);
                let exact = physical_flux(&gas, &cons(g, rho, v, 0.0, p)).unwrap();
                let f = hllc(&gas, &cons(g, l.0, l.1, 0.0, l.2), &cons(g, r.0, r.1, 0.0, r.2)).unwrap();
                for k in [0, 1, 3] {
                    assert!((f[k] - exact[k]).abs() <= 5.0 * delta * delta, "{k}: {} vs {}", f[k], exact[k]);
                }
            }
        }
    }

    #[test]
    fn exact_oracle_sanity() {
        // Sod star pressure 0.30313
        let (_, _, p) = exact_riemann(1.4, (1.0, 0.0, 1.0), (1.0, 0.0, 1.0));
        assert!((p - 1.0).abs() < 1e-12);
        let g = 1.4;
        let (rho, v, p) = exact_riemann(g, (1.0, 0.0, 1.0), (0.125, 0.0, 0.1));
        assert!(rho > 0.125 && rho < 1.0 && v > 0.0 && p > 0.1 && p < 1.0);
    }

    fn random_state(rng: &mut ChaCha8Rng, g: f64) -> [f64; 4] {
        let rho = rng.gen_range(0.01..10.0);
        let v = rng.gen_range(-5.0..5.0);
        let vt = rng.gen_range(-5.0..5.0);
        let p = rng.gen_range(0.01..100.0);
        cons(g, rho, v, vt, p)
    }

    #[test]
    fn consistency_and_mirror_symmetry() {
        let gas = IdealGas::new(1.4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mirror = |u: [f64; 4]| [u[0], -u[1], u[2], u[3]];
        for _ in 0..10_000 {
            let ul = random_state(&mut rng, 1.4);
            let ur = random_state(&mut rng, 1.4);
            let f = hllc(&gas, &ul, &ul).unwrap();
            let exact = physical_flux(&gas, &ul).unwrap();
            let scale = exact.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
            for k in 0..4 {
                assert!((f[k] - exact[k]).abs() <= 1e-12 * scale);
            }
            let a = hllc(&gas, &ul, &ur).unwrap();
            let b = hllc(&gas, &mirror(ur), &mirror(ul)).unwrap();
            let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
            // F(U_L, U_R) = -M F(M U_R, M U_L)
            let mb = [-b[0], b[1], -b[2], -b[3]];
            for k in 0..4 {
                assert!((a[k] - mb[k]).abs() <= 1e-12 * scale, "{a:?} {mb:?}");
            }
        }
    }

    #[test]
    fn contact_is_resolved_exactly() {
        // stationary contact: density jump, equal pressure and zero velocity
        let gas = IdealGas::new(1.4).unwrap();
        let f = hllc(&gas, &cons(1.4, 1.0, 0.0, 0.0, 1.0), &cons(1.4, 0.1, 0.0, 0.0, 1.0)).unwrap();
        assert!(f[0].abs() < 1e-15);
        assert!((f[1] - 1.0).abs() < 1e-15);
        assert!(f[3].abs() < 1e-15);
    }
}
