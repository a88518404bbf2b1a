//! Artifact writers. Every file written through [`Artifacts`] is listed in
//! the manifest with its SHA-256.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use wbeuler::experiments::{Run1D, Run2D};
use wbeuler::solver::DiagnosticsSnapshot;

use crate::error::CliError;

/// Scientific notation with 17 significant digits.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ArtifactEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: usize,
}

/// Output directory plus the list of files written into it.
pub struct Artifacts {
    root: PathBuf,
    entries: Vec<ArtifactEntry>,
}

impl Artifacts {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root).map_err(|e| CliError::io(root, e))?;
        Ok(Artifacts {
            root: root.to_path_buf(),
            entries: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn entries(&self) -> &[ArtifactEntry] {
        &self.entries
    }

    /// Write `name` (relative to the root) and record it.
    pub fn write(&mut self, name: &str, content: &str) -> Result<PathBuf, CliError> {
        let path = self.root.join(name);
        fs::write(&path, content).map_err(|e| CliError::io(&path, e))?;
        self.entries.retain(|e| e.path != name);
        self.entries.push(ArtifactEntry {
            path: name.to_string(),
            sha256: sha256_hex(content.as_bytes()),
            bytes: content.len(),
        });
        Ok(path)
    }
}

/// One-dimensional snapshot: header line, column line, one row per cell.
pub fn snapshot_1d(run: &Run1D, t: f64, state: &[[f64; 3]]) -> String {
    let g = &run.grid;
    let mut s = format!(
        "# n={} dx={} t={} variables=x,rho,momentum,energy,delta_rho\n",
        g.n(),
        num(g.dx()),
        num(t)
    );
    s.push_str("x,rho,momentum,energy,delta_rho\n");
    for ((k, u), eq) in g.interior().zip(state).zip(&run.equilibrium) {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            num(g.center(k)),
            num(u[0]),
            num(u[1]),
            num(u[2]),
            num(u[0] - eq[0])
        );
    }
    s
}

/// Two-dimensional snapshot, row major with `x` fastest. The radius column
/// allows scatter plots against one-dimensional profiles.
pub fn snapshot_2d(run: &Run2D, t: f64, state: &[[f64; 4]]) -> String {
    let g = &run.grid;
    let mut s = format!(
        "# n={}x{} dx={} dy={} t={} variables=x,y,r,rho,momentum_x,momentum_y,energy,delta_rho\n",
        g.nx(),
        g.ny(),
        num(g.dx()),
        num(g.dy()),
        num(t)
    );
    s.push_str("x,y,r,rho,momentum_x,momentum_y,energy,delta_rho\n");
    for ((k, u), eq) in g.interior_indices().zip(state).zip(&run.equilibrium) {
        let (i, j) = g.ij(k);
        let (x, y) = g.center(i, j);
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            num(x),
            num(y),
            num((x * x + y * y).sqrt()),
            num(u[0]),
            num(u[1]),
            num(u[2]),
            num(u[3]),
            num(u[0] - eq[0])
        );
    }
    s
}

/// Error table with columns `N`, the error and its rate; rates are `-` when
/// unavailable.
pub fn error_table(column: &str, resolutions: &[usize], errors: &[f64], rates: &[Option<f64>]) -> String {
    let mut s = format!("N,{column},rate\n");
    for ((n, e), r) in resolutions.iter().zip(errors).zip(rates) {
        let rate = r.map_or_else(|| "-".to_string(), |v| format!("{v:.4}"));
        let _ = writeln!(s, "{n},{},{rate}", num(*e));
    }
    s
}

#[derive(Debug, Clone, Serialize)]
pub struct DiagnosticsJson {
    pub rhs_evaluations: u64,
    pub steps: u64,
    pub equilibrium_solves: u64,
    pub newton_iterations: u64,
    pub equilibrium_fallbacks: u64,
    pub uniqueness_warnings: u64,
    pub boundary_fallbacks: u64,
    pub positivity_fallbacks: u64,
}

impl From<DiagnosticsSnapshot> for DiagnosticsJson {
    fn from(d: DiagnosticsSnapshot) -> Self {
        DiagnosticsJson {
            rhs_evaluations: d.rhs_evaluations,
            steps: d.steps,
            equilibrium_solves: d.equilibrium_solves,
            newton_iterations: d.newton_iterations,
            equilibrium_fallbacks: d.equilibrium_fallbacks,
            uniqueness_warnings: d.uniqueness_warnings,
            boundary_fallbacks: d.boundary_fallbacks,
            positivity_fallbacks: d.positivity_fallbacks,
        }
    }
}

/// Summary of one run for the manifest.
#[derive(Debug, Clone, Serialize)]
pub struct RunRecord {
    pub scheme: String,
    pub n: usize,
    pub t_final: f64,
    pub steps: u64,
    pub wall_seconds: f64,
    pub error: Option<f64>,
    pub diagnostics: DiagnosticsJson,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_digest() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn numbers_keep_seventeen_digits() {
        let s = num(0.1);
        assert_eq!(s, "1.0000000000000001e-1");
        assert_eq!(s.parse::<f64>().unwrap(), 0.1);
    }

    #[test]
    fn table_marks_missing_rates() {
        let t = error_table("err_eq1_rho", &[32, 48], &[1.0, 0.5], &[None, None]);
        assert_eq!(t.lines().nth(2).unwrap(), "48,5.0000000000000000e-1,-");
    }

    #[test]
    fn artifacts_are_recorded_once() {
        let dir = tempfile::tempdir().unwrap();
        let mut a = Artifacts::create(dir.path()).unwrap();
        a.write("x.csv", "1\n").unwrap();
        a.write("x.csv", "2\n").unwrap();
        assert_eq!(a.entries().len(), 1);
        assert_eq!(a.entries()[0].sha256, sha256_hex(b"2\n"));
    }
}
