//! Drivers for the validation experiments.
//!
//! Each driver projects the initial data, evolves it, and returns the final
//! cell averages together with the quadrature of the unperturbed equilibrium,
//! so that every error notion can be evaluated afterwards.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::eos::{EquationOfState, IdealGas};
use crate::error::{Error, Result};
use crate::mesh::{Grid1D, Grid2D};
use crate::metrics::{downsample, err1_delta, err_eq1, radial_profile_on_grid};
use crate::problems::{Atmosphere, Blast, Polytrope};
use crate::refsolver::{Geometry, ReferenceConfig, ReferenceOrder, ReferenceProblem, ReferenceSolution};
use crate::solver::{AdvanceReport, Boundaries2D, BoundaryCondition, DiagnosticsSnapshot, SchemeMode, Solver1D, Solver2D};

pub const DEFAULT_CFL: f64 = 0.85;

/// Outer radius of cylindrical polytrope references; covers the corners of
/// the square domain.
pub const POLYTROPE_REFERENCE_RADIUS: f64 = 0.75;

/// Environment variable overriding the reference cache directory.
pub const REFERENCE_CACHE_ENV: &str = "WBEULER_REFERENCE_CACHE";

/// Cache directory for reference solutions: the environment override if
/// set, `fallback` otherwise.
pub fn reference_cache_dir(fallback: &Path) -> PathBuf {
    std::env::var_os(REFERENCE_CACHE_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| fallback.to_path_buf())
}

/// Reference for the planar atmosphere: the third-order unbalanced scheme.
pub fn atmosphere_reference(amplitude: f64, n: usize, t_end: f64) -> ReferenceConfig {
    ReferenceConfig {
        geometry: Geometry::Planar,
        problem: ReferenceProblem::Atmosphere { amplitude },
        n,
        t_end,
        scheme: SchemeMode::Unbalanced,
        order: ReferenceOrder::Third,
        cfl: DEFAULT_CFL,
    }
}

/// Reference for the polytrope: second-order cylindrical well-balanced run.
pub fn polytrope_reference(amplitude: f64, n: usize, t_end: f64) -> ReferenceConfig {
    ReferenceConfig {
        geometry: Geometry::Cylindrical,
        problem: ReferenceProblem::Polytrope {
            amplitude,
            r_max: POLYTROPE_REFERENCE_RADIUS,
        },
        n,
        t_end,
        scheme: SchemeMode::WellBalanced,
        order: ReferenceOrder::Second,
        cfl: DEFAULT_CFL,
    }
}

/// Common run parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub n: usize,
    pub mode: SchemeMode,
    pub t_end: f64,
    pub cfl: f64,
    /// Intermediate times at which the state is recorded, in increasing order
    /// and within `(0, t_end)`.
    pub snapshot_times: Vec<f64>,
}

impl RunSpec {
    pub fn new(n: usize, mode: SchemeMode, t_end: f64) -> Self {
        RunSpec {
            n,
            mode,
            t_end,
            cfl: DEFAULT_CFL,
            snapshot_times: Vec::new(),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InvalidParameter(format!("resolution {}", self.n)));
        }
        if !(self.t_end >= 0.0) || !self.t_end.is_finite() {
            return Err(Error::InvalidParameter(format!("final time {}", self.t_end)));
        }
        let mut prev = 0.0;
        for &t in &self.snapshot_times {
            if !(t > prev && t < self.t_end) {
                return Err(Error::InvalidParameter(format!("snapshot time {t}")));
            }
            prev = t;
        }
        Ok(())
    }
}

/// Result of a one-dimensional run. Vectors hold interior cells only.
#[derive(Debug, Clone)]
pub struct Run1D {
    pub grid: Grid1D,
    pub mode: SchemeMode,
    pub initial: Vec<[f64; 3]>,
    /// Cell averages of the unperturbed equilibrium, `Q_i(u_eq) / dx`.
    pub equilibrium: Vec<[f64; 3]>,
    pub state: Vec<[f64; 3]>,
    pub snapshots: Vec<(f64, Vec<[f64; 3]>)>,
    pub report: AdvanceReport,
    pub diagnostics: DiagnosticsSnapshot,
}

/// Result of a two-dimensional run. Vectors hold interior cells only, row
/// major with `x` fastest.
#[derive(Debug, Clone)]
pub struct Run2D {
    pub grid: Grid2D,
    pub mode: SchemeMode,
    pub initial: Vec<[f64; 4]>,
    pub equilibrium: Vec<[f64; 4]>,
    pub state: Vec<[f64; 4]>,
    pub snapshots: Vec<(f64, Vec<[f64; 4]>)>,
    pub report: AdvanceReport,
    pub diagnostics: DiagnosticsSnapshot,
}

fn column<const NV: usize>(u: &[[f64; NV]], c: usize) -> Vec<f64> {
    u.iter().map(|v| v[c]).collect()
}

impl Run1D {
    pub fn component(&self, c: usize) -> Vec<f64> {
        column(&self.state, c)
    }

    /// `err_eq,1` of component `c`.
    pub fn err_eq1(&self, c: usize) -> Result<f64> {
        err_eq1(&column(&self.state, c), &column(&self.equilibrium, c), self.grid.dx())
    }

    /// Perturbation `q - Q(q_eq) / dx` of component `c`.
    pub fn perturbation(&self, c: usize) -> Vec<f64> {
        self.state.iter().zip(&self.equilibrium).map(|(a, b)| a[c] - b[c]).collect()
    }

    /// `err_1(delta q)` of component `c` against a planar reference whose
    /// resolution is a multiple of this run's.
    pub fn err1_delta(&self, reference: &ReferenceSolution, c: usize) -> Result<f64> {
        let n_ref = reference.centers.len();
        let n = self.grid.n();
        if n_ref % n != 0 {
            return Err(Error::ShapeMismatch(format!("reference with {n_ref} cells for {n} cells")));
        }
        let delta = downsample(&reference.delta(c), n_ref / n)?;
        err1_delta(&column(&self.state, c), &column(&self.equilibrium, c), &delta, self.grid.dx())
    }
}

impl Run2D {
    pub fn component(&self, c: usize) -> Vec<f64> {
        column(&self.state, c)
    }

    pub fn err_eq1(&self, c: usize) -> Result<f64> {
        err_eq1(&column(&self.state, c), &column(&self.equilibrium, c), self.grid.cell_volume())
    }

    pub fn perturbation(&self, c: usize) -> Vec<f64> {
        self.state.iter().zip(&self.equilibrium).map(|(a, b)| a[c] - b[c]).collect()
    }

    /// `err_1(delta q)` against a cylindrical reference mapped onto the grid
    /// by radial interpolation.
    pub fn err1_delta_radial(&self, reference: &ReferenceSolution, c: usize) -> Result<f64> {
        let delta = radial_profile_on_grid(&self.grid, &reference.centers, &reference.delta(c))?;
        err1_delta(
            &column(&self.state, c),
            &column(&self.equilibrium, c),
            &delta,
            self.grid.cell_volume(),
        )
    }

    /// L1 norm of component `c` of the final state.
    pub fn l1_norm(&self, c: usize) -> f64 {
        self.state.iter().map(|v| v[c].abs()).sum::<f64>() * self.grid.cell_volume()
    }
}

fn evolve_1d<E: EquationOfState>(
    solver: &Solver1D<E>,
    mut u: Vec<[f64; 3]>,
    spec: &RunSpec,
) -> Result<(Vec<[f64; 3]>, Vec<(f64, Vec<[f64; 3]>)>, AdvanceReport)> {
    let grid = solver.grid();
    let interior = |u: &[[f64; 3]]| grid.interior().map(|s| u[s]).collect::<Vec<_>>();
    let mut t = 0.0;
    let mut steps = 0;
    let mut snaps = Vec::new();
    for &ts in &spec.snapshot_times {
        let r = solver.advance(&mut u, t, ts, spec.cfl)?;
        t = r.t;
        steps += r.steps;
        snaps.push((t, interior(&u)));
    }
    let r = solver.advance(&mut u, t, spec.t_end, spec.cfl)?;
    steps += r.steps;
    Ok((interior(&u), snaps, AdvanceReport { t: r.t, steps }))
}

fn evolve_2d<E: EquationOfState>(
    solver: &Solver2D<E>,
    mut u: Vec<[f64; 4]>,
    spec: &RunSpec,
) -> Result<(Vec<[f64; 4]>, Vec<(f64, Vec<[f64; 4]>)>, AdvanceReport)> {
    let grid = solver.grid();
    let interior = |u: &[[f64; 4]]| grid.interior_indices().map(|s| u[s]).collect::<Vec<_>>();
    let mut t = 0.0;
    let mut steps = 0;
    let mut snaps = Vec::new();
    for &ts in &spec.snapshot_times {
        let r = solver.advance(&mut u, t, ts, spec.cfl)?;
        t = r.t;
        steps += r.steps;
        snaps.push((t, interior(&u)));
    }
    let r = solver.advance(&mut u, t, spec.t_end, spec.cfl)?;
    steps += r.steps;
    Ok((interior(&u), snaps, AdvanceReport { t: r.t, steps }))
}

/// Isentropic atmosphere in uniform gravity with an optional pressure bump.
pub fn atmosphere_run(spec: &RunSpec, amplitude: f64) -> Result<Run1D> {
    spec.validate()?;
    let atm = Atmosphere::new(amplitude);
    let (a, b) = atm.domain();
    let grid = Grid1D::new(spec.n, a, b)?;
    let eos: IdealGas = atm.eos()?;
    let solver = Solver1D::new(grid.clone(), eos, Arc::new(atm.gravity()), spec.mode, BoundaryCondition::Hydrostatic)?;
    let u0 = grid.project(|x| atm.state(x))?;
    let eq = grid.project(|x| atm.equilibrium_state(x))?;
    let initial: Vec<_> = grid.interior().map(|s| u0[s]).collect();
    let equilibrium: Vec<_> = grid.interior().map(|s| eq[s]).collect();
    let (state, snapshots, report) = evolve_1d(&solver, u0, spec)?;
    Ok(Run1D {
        grid,
        mode: spec.mode,
        initial,
        equilibrium,
        state,
        snapshots,
        report,
        diagnostics: solver.diagnostics(),
    })
}

fn run_2d(
    spec: &RunSpec,
    poly: &Polytrope,
    initial_state: impl Fn(f64, f64) -> Result<[f64; 4]> + Sync,
) -> Result<Run2D> {
    spec.validate()?;
    let (a, b) = poly.domain();
    let grid = Grid2D::square(spec.n, a, b)?;
    let solver = Solver2D::new(
        grid.clone(),
        poly.eos()?,
        Arc::new(poly.gravity()),
        spec.mode,
        Boundaries2D::uniform(BoundaryCondition::Hydrostatic),
    )?;
    let u0 = grid.project(initial_state)?;
    let eq = grid.project(|x, y| poly.equilibrium_state(x, y))?;
    let initial: Vec<_> = grid.interior_indices().map(|s| u0[s]).collect();
    let equilibrium: Vec<_> = grid.interior_indices().map(|s| eq[s]).collect();
    let (state, snapshots, report) = evolve_2d(&solver, u0, spec)?;
    Ok(Run2D {
        grid,
        mode: spec.mode,
        initial,
        equilibrium,
        state,
        snapshots,
        report,
        diagnostics: solver.diagnostics(),
    })
}

/// Two-dimensional polytrope with an optional central pressure bump.
pub fn polytrope_run(spec: &RunSpec, amplitude: f64) -> Result<Run2D> {
    let poly = Polytrope::new(amplitude);
    run_2d(spec, &poly, |x, y| poly.state(x, y))
}

/// Overlapping blast waves on top of the polytrope.
pub fn blast_run(spec: &RunSpec, blast: &Blast) -> Result<Run2D> {
    run_2d(spec, &blast.polytrope, |x, y| blast.state(x, y))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equilibrium_atmosphere_run_has_zero_perturbation_at_start() {
        let spec = RunSpec::new(16, SchemeMode::WellBalanced, 0.0);
        let run = atmosphere_run(&spec, 0.0).unwrap();
        assert_eq!(run.err_eq1(0).unwrap(), 0.0);
        assert_eq!(run.report.steps, 0);
    }

    #[test]
    fn snapshots_are_recorded_in_order() {
        let mut spec = RunSpec::new(16, SchemeMode::WellBalanced, 0.1);
        spec.snapshot_times = vec![0.02, 0.05];
        let run = atmosphere_run(&spec, 1e-3).unwrap();
        assert_eq!(run.snapshots.len(), 2);
        assert_eq!(run.snapshots[0].0, 0.02);
        assert_eq!(run.snapshots[1].0, 0.05);
        assert_eq!(run.report.t, 0.1);
        spec.snapshot_times = vec![0.05, 0.02];
        assert!(atmosphere_run(&spec, 1e-3).is_err());
    }

    #[test]
    fn perturbation_error_against_reference_of_itself_vanishes() {
        let spec = RunSpec::new(32, SchemeMode::Unbalanced, 0.05);
        let run = atmosphere_run(&spec, 1e-3).unwrap();
        let reference = ReferenceSolution {
            config: atmosphere_reference(1e-3, 32, 0.05),
            centers: run.grid.interior().map(|s| run.grid.center(s)).collect(),
            baseline: run.equilibrium.clone(),
            final_state: run.state.clone(),
        };
        assert!(run.err1_delta(&reference, 0).unwrap() < 1e-16);
    }

    #[test]
    fn small_polytrope_run_stays_balanced() {
        let spec = RunSpec::new(8, SchemeMode::WellBalanced, 0.05);
        let run = polytrope_run(&spec, 0.0).unwrap();
        assert!(run.err_eq1(0).unwrap() < 1e-13);
        assert_eq!(run.state.len(), 64);
    }
}
