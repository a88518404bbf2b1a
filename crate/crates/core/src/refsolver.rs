//! High-resolution one-dimensional reference solutions.
//!
//! A compact second-order scheme (minmod-limited linear reconstruction,
//! midpoint quadrature, HLLC, SSP-RK3) runs in planar or cylindrical
//! geometry; cylindrical runs add the geometric source
//! `-(1/r) [rho v, rho v^2, (E + p) v]` at cell centers and reflect at
//! `r = 0`. Planar references can alternatively use the third-order solver.
//! Results are cached on disk, keyed by a hash of the configuration.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use sha2::{Digest, Sha256};

use crate::eos::{EquationOfState, IdealGas};
use crate::equilibrium::{
    internal_energy_average, solve_local_equilibrium, GravityField, LocalEquilibrium,
    NewtonControls,
};
use crate::error::{Error, Result};
use crate::flux::{hllc_1d, primitive};
use crate::mesh::{Grid1D, QuadratureRule, GHOST};
use crate::problems::{Atmosphere, Polytrope};
use crate::solver::{BoundaryCondition, SchemeMode, Solver1D};
use crate::timeint::{ssprk3_step, TimeControls};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Geometry {
    Planar,
    Cylindrical,
}

impl Geometry {
    pub fn as_str(&self) -> &'static str {
        match self {
            Geometry::Planar => "planar",
            Geometry::Cylindrical => "cylindrical",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReferenceOrder {
    Second,
    Third,
}

impl ReferenceOrder {
    pub fn as_str(&self) -> &'static str {
        match self {
            ReferenceOrder::Second => "2",
            ReferenceOrder::Third => "3",
        }
    }
}

/// Problem solved by a reference run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ReferenceProblem {
    /// Planar atmosphere with the given pressure bump amplitude.
    Atmosphere { amplitude: f64 },
    /// Radial profile of the polytrope with the given bump amplitude, on
    /// `[0, r_max]`.
    Polytrope { amplitude: f64, r_max: f64 },
}

impl ReferenceProblem {
    /// The same problem with a different perturbation amplitude.
    pub fn with_amplitude(self, amplitude: f64) -> Self {
        match self {
            ReferenceProblem::Atmosphere { .. } => ReferenceProblem::Atmosphere { amplitude },
            ReferenceProblem::Polytrope { r_max, .. } => ReferenceProblem::Polytrope { amplitude, r_max },
        }
    }

    fn canonical(&self) -> String {
        match self {
            ReferenceProblem::Atmosphere { amplitude } => format!("atmosphere;amplitude={amplitude:e}"),
            ReferenceProblem::Polytrope { amplitude, r_max } => {
                format!("polytrope;amplitude={amplitude:e};r_max={r_max:e}")
            }
        }
    }
}

/// Bumped whenever a change to the solvers alters reference results, so that
/// stale cache files are not reused.
pub const SOLVER_REVISION: u32 = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceConfig {
    pub geometry: Geometry,
    pub problem: ReferenceProblem,
    pub n: usize,
    pub t_end: f64,
    pub scheme: SchemeMode,
    pub order: ReferenceOrder,
    pub cfl: f64,
}

impl ReferenceConfig {
    pub fn validate(&self) -> Result<()> {
        match (self.geometry, self.problem) {
            (Geometry::Planar, ReferenceProblem::Atmosphere { .. }) => {}
            (Geometry::Cylindrical, ReferenceProblem::Polytrope { r_max, .. }) => {
                if self.order == ReferenceOrder::Third {
                    return Err(Error::Unsupported("third-order cylindrical references".into()));
                }
                if !(r_max > 0.0) {
                    return Err(Error::InvalidParameter(format!("r_max {r_max}")));
                }
            }
            (g, p) => {
                return Err(Error::InvalidParameter(format!(
                    "geometry {} does not fit problem {p:?}",
                    g.as_str()
                )))
            }
        }
        if self.n < 4 {
            return Err(Error::InvalidParameter(format!("reference resolution {}", self.n)));
        }
        if !(self.t_end >= 0.0) {
            return Err(Error::InvalidParameter(format!("final time {}", self.t_end)));
        }
        Ok(())
    }

    /// Canonical text form used for hashing.
    pub fn canonical(&self) -> String {
        format!(
            "revision={SOLVER_REVISION};geometry={};problem={};n={};t_end={:e};scheme={};order={};cfl={:e}",
            self.geometry.as_str(),
            self.problem.canonical(),
            self.n,
            self.t_end,
            self.scheme.as_str(),
            self.order.as_str(),
            self.cfl
        )
    }

    /// Hex SHA-256 of [`canonical`](Self::canonical).
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical().as_bytes());
        let mut s = String::with_capacity(64);
        for b in digest {
            let _ = write!(s, "{b:02x}");
        }
        s
    }

    fn header(&self) -> String {
        format!(
            "# wbeuler-reference v2 hash={} geometry={} n={} t_end={:e} scheme={} order={}",
            self.hash(),
            self.geometry.as_str(),
            self.n,
            self.t_end,
            self.scheme.as_str(),
            self.order.as_str()
        )
    }
}

/// Final cell averages of a reference run and the baseline its perturbation
/// is measured from.
///
/// For unbalanced schemes the baseline is the unperturbed equilibrium evolved
/// to the same time with the same solver, so the discrete drift of the
/// reference cancels from `final - baseline`. Otherwise it is the initial
/// data, which for a pressure perturbation carries the equilibrium density.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSolution {
    pub config: ReferenceConfig,
    pub centers: Vec<f64>,
    pub baseline: Vec<[f64; 3]>,
    pub final_state: Vec<[f64; 3]>,
}

impl ReferenceSolution {
    /// `final - baseline` of component `c`.
    pub fn delta(&self, c: usize) -> Vec<f64> {
        self.baseline
            .iter()
            .zip(&self.final_state)
            .map(|(a, b)| b[c] - a[c])
            .collect()
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut text = String::new();
        text.push_str(&self.config.header());
        text.push('\n');
        text.push_str("x,rho_base,mom_base,energy_base,rho,mom,energy\n");
        for ((x, a), b) in self.centers.iter().zip(&self.baseline).zip(&self.final_state) {
            let _ = writeln!(
                text,
                "{x:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
                a[0], a[1], a[2], b[0], b[1], b[2]
            );
        }
        let tmp = path.with_extension(format!("tmp{}", std::process::id()));
        {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(text.as_bytes())?;
            f.sync_all()?;
        }
        fs::rename(&tmp, path)?;
        Ok(())
    }

    /// Read a cached solution, checking that it was produced by `config`.
    pub fn read(path: &Path, config: &ReferenceConfig) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::MalformedReference("empty file".into()))?;
        if header != config.header() {
            return Err(Error::MalformedReference(format!("header mismatch: {header}")));
        }
        match lines.next() {
            Some("x,rho_base,mom_base,energy_base,rho,mom,energy") => {}
            other => return Err(Error::MalformedReference(format!("column line {other:?}"))),
        }
        let mut centers = Vec::with_capacity(config.n);
        let mut baseline = Vec::with_capacity(config.n);
        let mut final_state = Vec::with_capacity(config.n);
        for (k, line) in lines.enumerate() {
            let v = line
                .split(',')
                .map(|t| t.parse::<f64>())
                .collect::<std::result::Result<Vec<f64>, _>>()
                .map_err(|e| Error::MalformedReference(format!("row {k}: {e}")))?;
            if v.len() != 7 {
                return Err(Error::MalformedReference(format!("row {k} has {} fields", v.len())));
            }
            centers.push(v[0]);
            baseline.push([v[1], v[2], v[3]]);
            final_state.push([v[4], v[5], v[6]]);
        }
        if centers.len() != config.n {
            return Err(Error::MalformedReference(format!(
                "{} rows for n = {}",
                centers.len(),
                config.n
            )));
        }
        Ok(ReferenceSolution {
            config: *config,
            centers,
            baseline,
            final_state,
        })
    }
}

/// Cache file of a configuration inside `dir`.
pub fn cache_path(dir: &Path, config: &ReferenceConfig) -> PathBuf {
    dir.join(format!("reference-{}.csv", &config.hash()[..16]))
}

/// Load the reference for `config` from `dir`, computing and storing it if
/// absent or unreadable.
pub fn load_or_run(config: &ReferenceConfig, dir: &Path) -> Result<ReferenceSolution> {
    let path = cache_path(dir, config);
    if path.exists() {
        if let Ok(sol) = ReferenceSolution::read(&path, config) {
            return Ok(sol);
        }
    }
    let sol = run_reference(config)?;
    fs::create_dir_all(dir)?;
    sol.write(&path)?;
    Ok(sol)
}

/// Run a reference configuration.
pub fn run_reference(config: &ReferenceConfig) -> Result<ReferenceSolution> {
    config.validate()?;
    let (centers, initial, final_state) = evolve(config, config.problem)?;
    let unperturbed = config.problem.with_amplitude(0.0);
    let baseline = match config.scheme {
        SchemeMode::Unbalanced if unperturbed == config.problem => final_state.clone(),
        SchemeMode::Unbalanced => evolve(config, unperturbed)?.2,
        SchemeMode::WellBalanced => initial,
    };
    Ok(ReferenceSolution {
        config: *config,
        centers,
        baseline,
        final_state,
    })
}

type Profiles = (Vec<f64>, Vec<[f64; 3]>, Vec<[f64; 3]>);

/// Cell centers, initial and final averages of `problem` under the solver
/// settings of `config`.
fn evolve(config: &ReferenceConfig, problem: ReferenceProblem) -> Result<Profiles> {
    match (config.order, problem) {
        (ReferenceOrder::Third, ReferenceProblem::Atmosphere { amplitude }) => {
            let atm = Atmosphere::new(amplitude);
            let (a, b) = atm.domain();
            let grid = Grid1D::new(config.n, a, b)?;
            let solver = Solver1D::new(
                grid.clone(),
                atm.eos()?,
                Arc::new(atm.gravity()),
                config.scheme,
                BoundaryCondition::Hydrostatic,
            )?;
            let mut u = grid.project(|x| atm.state(x))?;
            solver.fill_ghosts(&mut u)?;
            let initial = grid.interior().map(|s| u[s]).collect();
            solver.advance(&mut u, 0.0, config.t_end, config.cfl)?;
            Ok((
                grid.interior().map(|s| grid.center(s)).collect(),
                initial,
                grid.interior().map(|s| u[s]).collect(),
            ))
        }
        (ReferenceOrder::Second, problem) => {
            let (solver, mut u) = match problem {
                ReferenceProblem::Atmosphere { amplitude } => {
                    let atm = Atmosphere::new(amplitude);
                    let (a, b) = atm.domain();
                    let grid = Grid1D::with_rule(config.n, a, b, QuadratureRule::midpoint())?;
                    let u = grid.project(|x| atm.state(x))?;
                    let s = SecondOrderSolver::new(grid, atm.eos()?, Arc::new(atm.gravity()), config.scheme, Geometry::Planar)?;
                    (s, u)
                }
                ReferenceProblem::Polytrope { amplitude, r_max } => {
                    let poly = Polytrope::new(amplitude);
                    let grid = Grid1D::with_rule(config.n, 0.0, r_max, QuadratureRule::midpoint())?;
                    let u = grid.project(|r| poly.radial_state(r.abs()))?;
                    let s = SecondOrderSolver::new(
                        grid,
                        poly.eos()?,
                        Arc::new(poly.gravity()),
                        config.scheme,
                        Geometry::Cylindrical,
                    )?;
                    (s, u)
                }
            };
            solver.fill_ghosts(&mut u)?;
            let grid = solver.grid.clone();
            let initial = grid.interior().map(|s| u[s]).collect();
            solver.advance(&mut u, 0.0, config.t_end, config.cfl)?;
            Ok((
                grid.interior().map(|s| grid.center(s)).collect(),
                initial,
                grid.interior().map(|s| u[s]).collect(),
            ))
        }
        (ReferenceOrder::Third, _) => Err(Error::Unsupported("third-order cylindrical references".into())),
    }
}

#[inline]
fn minmod(a: f64, b: f64) -> f64 {
    if a * b <= 0.0 {
        0.0
    } else if a.abs() < b.abs() {
        a
    } else {
        b
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Potential {
    center: f64,
    grad: f64,
    lo: f64,
    hi: f64,
}

#[derive(Debug, Clone, Copy, Default)]
struct Faces {
    lo: [f64; 3],
    hi: [f64; 3],
    src_rho: f64,
    dp_eq: f64,
}

/// Second-order finite volume solver on a midpoint-rule grid.
pub struct SecondOrderSolver<E: EquationOfState> {
    grid: Grid1D,
    eos: E,
    mode: SchemeMode,
    geometry: Geometry,
    newton: NewtonControls,
    pot: Vec<Potential>,
}

impl<E: EquationOfState> SecondOrderSolver<E> {
    pub fn new(
        grid: Grid1D,
        eos: E,
        gravity: Arc<dyn GravityField>,
        mode: SchemeMode,
        geometry: Geometry,
    ) -> Result<Self> {
        if grid.rule().len() != 1 {
            return Err(Error::InvalidGrid("the second-order solver uses the midpoint rule".into()));
        }
        if geometry == Geometry::Cylindrical && grid.bounds().0 != 0.0 {
            return Err(Error::InvalidGrid("cylindrical grids start at r = 0".into()));
        }
        let dx = grid.dx();
        // cylindrical potentials are radial: evaluate along the x axis with
        // |r| so that mirrored ghosts see the mirrored potential
        let pot = (0..grid.storage_len())
            .map(|s| {
                let c = grid.center(s);
                let p = |x: f64| gravity.potential(x, 0.0);
                let grad = gravity.gradient(c, 0.0)[0];
                Potential {
                    center: p(c),
                    grad,
                    lo: p(c - 0.5 * dx),
                    hi: p(c + 0.5 * dx),
                }
            })
            .collect();
        Ok(SecondOrderSolver {
            grid,
            eos,
            mode,
            geometry,
            newton: NewtonControls::default(),
            pot,
        })
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    fn equilibrium(&self, u: &[f64; 3], s: usize) -> Result<LocalEquilibrium> {
        let rhoe = internal_energy_average(u)?;
        let c = self.pot[s].center;
        solve_local_equilibrium(&self.eos, u[0], rhoe, c, &[c], &[1.0], &self.newton)
    }

    pub fn fill_ghosts(&self, u: &mut [[f64; 3]]) -> Result<()> {
        let n = self.grid.n();
        let g = GHOST;
        let hydro = |u: &mut [[f64; 3]], edge: usize, ghosts: std::ops::Range<usize>| {
            match self.equilibrium(&u[edge], edge) {
                Ok(leq) => {
                    for s in ghosts {
                        u[s] = match leq.state_at(&self.eos, self.pot[s].center) {
                            Ok((r, re, _)) => [r, 0.0, re],
                            Err(_) => u[edge],
                        };
                    }
                }
                Err(_) => {
                    for s in ghosts {
                        u[s] = u[edge];
                    }
                }
            }
        };
        match self.geometry {
            Geometry::Planar => hydro(u, g, 0..g),
            Geometry::Cylindrical => {
                for k in 0..g {
                    let a = u[g + k];
                    u[g - 1 - k] = [a[0], -a[1], a[2]];
                }
            }
        }
        hydro(u, n + g - 1, n + g..n + 2 * g);
        Ok(())
    }

    fn faces(&self, u: &[[f64; 3]], s: usize) -> Faces {
        if self.mode == SchemeMode::WellBalanced {
            if let Ok(f) = self.balanced_faces(u, s) {
                return f;
            }
        }
        let mut f = Faces::default();
        for c in 0..3 {
            let sl = minmod(u[s][c] - u[s - 1][c], u[s + 1][c] - u[s][c]);
            f.lo[c] = u[s][c] - 0.5 * sl;
            f.hi[c] = u[s][c] + 0.5 * sl;
        }
        f.src_rho = u[s][0];
        f
    }

    fn balanced_faces(&self, u: &[[f64; 3]], s: usize) -> Result<Faces> {
        let leq = self.equilibrium(&u[s], s)?;
        let mut d = [[0.0; 3]; 3];
        for (k, cell) in [s - 1, s, s + 1].into_iter().enumerate() {
            let (r, re, _) = leq.state_at(&self.eos, self.pot[cell].center)?;
            d[k] = [u[cell][0] - r, u[cell][1], u[cell][2] - re];
        }
        let lo = leq.state_at(&self.eos, self.pot[s].lo)?;
        let hi = leq.state_at(&self.eos, self.pot[s].hi)?;
        let mut f = Faces::default();
        for c in 0..3 {
            let sl = minmod(d[1][c] - d[0][c], d[2][c] - d[1][c]);
            f.lo[c] = d[1][c] - 0.5 * sl;
            f.hi[c] = d[1][c] + 0.5 * sl;
        }
        f.lo[0] += lo.0;
        f.lo[2] += lo.1;
        f.hi[0] += hi.0;
        f.hi[2] += hi.1;
        f.src_rho = d[1][0];
        f.dp_eq = hi.2 - lo.2;
        Ok(f)
    }

    pub fn rhs(&self, u: &mut [[f64; 3]]) -> Result<Vec<[f64; 3]>> {
        self.fill_ghosts(u)?;
        let n = self.grid.n();
        let g = GHOST;
        let dx = self.grid.dx();
        let faces: Vec<Faces> = (g - 1..=n + g).map(|s| self.faces(u, s)).collect();
        let flux = (0..=n)
            .map(|f| hllc_1d(&self.eos, &faces[f].hi, &faces[f + 1].lo).map_err(|e| e.at_cell(g + f)))
            .collect::<Result<Vec<_>>>()?;
        let mut out = vec![[0.0; 3]; u.len()];
        for i in 0..n {
            let s = g + i;
            let f = &faces[i + 1];
            let grad = self.pot[s].grad;
            let v = u[s];
            let mut l = [
                -(flux[i + 1][0] - flux[i][0]) / dx,
                -(flux[i + 1][1] - flux[i][1]) / dx + f.dp_eq / dx - f.src_rho * grad,
                -(flux[i + 1][2] - flux[i][2]) / dx - v[1] * grad,
            ];
            if self.geometry == Geometry::Cylindrical {
                let r = self.grid.center(s);
                let w = primitive(&self.eos, &[v[0], v[1], 0.0, v[2]]).map_err(|e| e.at_cell(s))?;
                l[0] -= v[1] / r;
                l[1] -= v[1] * w.vn / r;
                l[2] -= (v[2] + w.p) * w.vn / r;
            }
            out[s] = l;
        }
        Ok(out)
    }

    pub fn compute_dt(&self, u: &[[f64; 3]], cfl: f64) -> Result<f64> {
        let mut max_rate = 0.0f64;
        for s in self.grid.interior() {
            let w = primitive(&self.eos, &[u[s][0], u[s][1], 0.0, u[s][2]]).map_err(|e| e.at_cell(s))?;
            max_rate = max_rate.max((w.vn.abs() + w.c) / self.grid.dx());
        }
        if !(max_rate > 0.0) || !max_rate.is_finite() {
            return Err(Error::NonFinite(format!("maximal wave speed {max_rate:e}")));
        }
        Ok(cfl / max_rate)
    }

    pub fn advance(&self, u: &mut Vec<[f64; 3]>, t: f64, t_target: f64, cfl: f64) -> Result<f64> {
        let controls = TimeControls::new(cfl, t_target)?;
        let mut t = t;
        while t < t_target {
            let dt = controls.clip(t, self.compute_dt(u, cfl)?);
            ssprk3_step(u, dt, |s| self.rhs(s))?;
            t = if dt >= t_target - t { t_target } else { t + dt };
            if let Some(s) = self.grid.interior().find(|&s| !(u[s][0] > 0.0) || !u[s][2].is_finite()) {
                return Err(Error::InvalidState(format!("reference cell {s}: {:?}", u[s])));
            }
        }
        self.fill_ghosts(u)?;
        Ok(t)
    }
}

/// Ideal-gas second-order solver, the common case.
pub type IdealSecondOrderSolver = SecondOrderSolver<IdealGas>;
