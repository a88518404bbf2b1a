//! Error norms, convergence rates and related diagnostics.

use crate::error::{Error, Result};
use crate::mesh::{Grid1D, Grid2D, QuadratureRule};

/// Which notion of error a report holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormKind {
    /// `sum |q - q_ref| vol`
    Err1,
    /// `sum |(q - q_eq) - delta_ref| vol`
    Err1Delta,
    /// `sum |q - q_eq| vol`
    ErrEq1,
}

impl NormKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            NormKind::Err1 => "err1",
            NormKind::Err1Delta => "err1_delta",
            NormKind::ErrEq1 => "err_eq1",
        }
    }
}

fn same_len(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::ShapeMismatch(format!("{a} values against {b}")));
    }
    Ok(())
}

/// L1 distance `sum vol |q_i - r_i|`.
pub fn err1(q: &[f64], q_ref: &[f64], cell_volume: f64) -> Result<f64> {
    same_len(q.len(), q_ref.len())?;
    Ok(q.iter().zip(q_ref).map(|(a, b)| (a - b).abs()).sum::<f64>() * cell_volume)
}

/// Perturbation error `sum vol |(q_i - eq_i) - delta_i|`.
pub fn err1_delta(q: &[f64], q_eq: &[f64], delta_ref: &[f64], cell_volume: f64) -> Result<f64> {
    same_len(q.len(), q_eq.len())?;
    same_len(q.len(), delta_ref.len())?;
    Ok(q
        .iter()
        .zip(q_eq)
        .zip(delta_ref)
        .map(|((a, e), d)| ((a - e) - d).abs())
        .sum::<f64>()
        * cell_volume)
}

/// Equilibrium deviation `sum vol |q_i - eq_i|`.
pub fn err_eq1(q: &[f64], q_eq: &[f64], cell_volume: f64) -> Result<f64> {
    err1(q, q_eq, cell_volume)
}

/// Block means of a 1D field over `ratio` consecutive cells.
pub fn downsample(fine: &[f64], ratio: usize) -> Result<Vec<f64>> {
    if ratio == 0 || fine.len() % ratio != 0 {
        return Err(Error::InvalidParameter(format!(
            "ratio {ratio} does not divide {} cells",
            fine.len()
        )));
    }
    Ok(fine
        .chunks(ratio)
        .map(|c| c.iter().sum::<f64>() / ratio as f64)
        .collect())
}

/// Block means of a row-major `nx x ny` field over `ratio x ratio` blocks.
pub fn downsample_2d(fine: &[f64], nx: usize, ny: usize, ratio: usize) -> Result<Vec<f64>> {
    same_len(fine.len(), nx * ny)?;
    if ratio == 0 || nx % ratio != 0 || ny % ratio != 0 {
        return Err(Error::InvalidParameter(format!(
            "ratio {ratio} does not divide {nx} x {ny} cells"
        )));
    }
    let (cx, cy) = (nx / ratio, ny / ratio);
    let mut out = vec![0.0; cx * cy];
    for j in 0..ny {
        for i in 0..nx {
            out[(j / ratio) * cx + i / ratio] += fine[j * nx + i];
        }
    }
    let inv = 1.0 / (ratio * ratio) as f64;
    out.iter_mut().for_each(|v| *v *= inv);
    Ok(out)
}

/// `log2(e_{k-1} / e_k)` for consecutive entries; `None` for the first
/// entry, for pairs that are not a resolution doubling, and where an error
/// is zero or not finite.
pub fn convergence_rates(resolutions: &[usize], errors: &[f64]) -> Result<Vec<Option<f64>>> {
    same_len(resolutions.len(), errors.len())?;
    let mut rates = vec![None; errors.len()];
    for k in 1..errors.len() {
        let doubling = resolutions[k] == 2 * resolutions[k - 1];
        let (a, b) = (errors[k - 1], errors[k]);
        if doubling && a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite() {
            rates[k] = Some((a / b).log2());
        }
    }
    Ok(rates)
}

/// Errors of one variable over a resolution sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    pub norm: NormKind,
    pub variable: String,
    pub resolutions: Vec<usize>,
    pub errors: Vec<f64>,
    pub rates: Vec<Option<f64>>,
}

impl ErrorReport {
    pub fn new(norm: NormKind, variable: &str, resolutions: Vec<usize>, errors: Vec<f64>) -> Result<Self> {
        let rates = convergence_rates(&resolutions, &errors)?;
        Ok(ErrorReport {
            norm,
            variable: variable.to_string(),
            resolutions,
            errors,
            rates,
        })
    }

    /// Rate at the last resolution, if defined.
    pub fn final_rate(&self) -> Option<f64> {
        self.rates.last().copied().flatten()
    }
}

/// Sound crossing time `2 int_a^b dx / c(x)` with `n` Gauss-Legendre
/// subintervals.
pub fn sound_crossing_time(a: f64, b: f64, n: usize, c: impl Fn(f64) -> Result<f64>) -> Result<f64> {
    let grid = Grid1D::new(n, a, b)?;
    let mut total = 0.0;
    for s in grid.interior() {
        for (x, w) in grid.nodes(s).into_iter().zip(grid.weights()) {
            let v = c(x)?;
            if !(v > 0.0) {
                return Err(Error::InvalidState(format!("sound speed {v:e} at x = {x}")));
            }
            total += w / v;
        }
    }
    Ok(2.0 * total)
}

/// Linear interpolation of samples `values` at increasing abscissae `xs`,
/// clamped to the end values outside the sampled range.
pub fn interpolate(xs: &[f64], values: &[f64], x: f64) -> f64 {
    let n = xs.len();
    if x <= xs[0] {
        return values[0];
    }
    if x >= xs[n - 1] {
        return values[n - 1];
    }
    let k = xs.partition_point(|v| *v <= x);
    let (x0, x1) = (xs[k - 1], xs[k]);
    let t = (x - x0) / (x1 - x0);
    values[k - 1] * (1.0 - t) + values[k] * t
}

/// Cell averages over the interior of a 2D grid of a radial profile sampled
/// at `radii`, using the profile's linear interpolant at the quadrature
/// nodes of each cell. Row-major `nx x ny`.
pub fn radial_profile_on_grid(grid: &Grid2D, radii: &[f64], values: &[f64]) -> Result<Vec<f64>> {
    same_len(radii.len(), values.len())?;
    if radii.len() < 2 {
        return Err(Error::InvalidParameter("radial profile needs two samples".into()));
    }
    let g = grid.x_axis().ghost();
    let mut out = Vec::with_capacity(grid.nx() * grid.ny());
    for j in g..grid.ny() + g {
        for i in g..grid.nx() + g {
            let avg = grid.cell_quadrature(i, j, |x, y| interpolate(radii, values, (x * x + y * y).sqrt()))
                / grid.cell_volume();
            out.push(avg);
        }
    }
    Ok(out)
}

/// Component `c` of the interior cells of a 1D storage array.
pub fn component_1d<const NV: usize>(grid: &Grid1D, u: &[[f64; NV]], c: usize) -> Vec<f64> {
    grid.interior().map(|s| u[s][c]).collect()
}

/// Component `c` of the interior cells of a 2D storage array, row-major.
pub fn component_2d<const NV: usize>(grid: &Grid2D, u: &[[f64; NV]], c: usize) -> Vec<f64> {
    grid.interior_indices().map(|s| u[s][c]).collect()
}

/// Cell averages (quadrature of `f`) over the interior of a 1D grid.
pub fn project_scalar_1d(grid: &Grid1D, f: impl Fn(f64) -> f64) -> Vec<f64> {
    grid.interior().map(|s| grid.cell_quadrature(s, &f) / grid.dx()).collect()
}

/// Whether `rule` integrates `x^k` exactly on `[a, b]` for all `k <= degree`,
/// to relative tolerance `tol`.
pub fn quadrature_exact_to_degree(rule: &QuadratureRule, a: f64, b: f64, degree: u32, tol: f64) -> bool {
    (0..=degree).all(|k| {
        let exact = (b.powi(k as i32 + 1) - a.powi(k as i32 + 1)) / (k + 1) as f64;
        let q = rule.integrate(0.5 * (a + b), b - a, |x| x.powi(k as i32));
        (q - exact).abs() <= tol * exact.abs().max(1.0)
    })
}
