//! Subcommand implementations.

use std::time::Instant;

use wbeuler::experiments::{
    atmosphere_reference, atmosphere_run, blast_run, polytrope_reference, polytrope_run, Run1D, Run2D, RunSpec,
};
use wbeuler::metrics::convergence_rates;
use wbeuler::problems::Blast;
use wbeuler::refsolver::{cache_path, load_or_run, ReferenceConfig, ReferenceSolution};
use wbeuler::SchemeMode;

use crate::config::{Experiment, RunConfig};
use crate::error::CliError;
use crate::output::{error_table, snapshot_1d, snapshot_2d, Artifacts, RunRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    /// Per-resolution runs with intermediate snapshots.
    Run,
    /// Error tables across resolutions; final snapshots only.
    Convergence,
    /// Compute or load the reference solution only.
    Reference,
}

impl Command {
    fn as_str(&self) -> &'static str {
        match self {
            Command::Run => "run",
            Command::Convergence => "convergence",
            Command::Reference => "reference",
        }
    }
}

enum Outcome {
    One(Run1D),
    Two(Run2D),
}

fn reference_config(cfg: &RunConfig) -> Option<ReferenceConfig> {
    let r = cfg.reference.as_ref()?;
    match cfg.experiment {
        Experiment::AtmospherePerturbed => Some(atmosphere_reference(cfg.amplitude, r.n, cfg.t_end)),
        Experiment::PolytropePerturbed => Some(polytrope_reference(cfg.amplitude, r.n, cfg.t_end)),
        _ => None,
    }
}

fn load_reference(cfg: &RunConfig) -> Result<Option<(ReferenceConfig, ReferenceSolution)>, CliError> {
    let (Some(rc), Some(settings)) = (reference_config(cfg), cfg.reference.as_ref()) else {
        return Ok(None);
    };
    eprintln!("reference: n={} cache={}", rc.n, settings.cache.display());
    let sol = load_or_run(&rc, &settings.cache)?;
    Ok(Some((rc, sol)))
}

fn error_column(cfg: &RunConfig) -> Option<&'static str> {
    match cfg.experiment {
        Experiment::Atmosphere | Experiment::Polytrope => Some("err_eq1_rho"),
        Experiment::AtmospherePerturbed | Experiment::PolytropePerturbed if cfg.reference.is_some() => {
            Some("err1_delta_rho")
        }
        _ => None,
    }
}

fn run_one(cfg: &RunConfig, mode: SchemeMode, n: usize, snapshots: bool) -> Result<Outcome, CliError> {
    let mut spec = RunSpec::new(n, mode, cfg.t_end);
    spec.cfl = cfg.cfl;
    if snapshots {
        spec.snapshot_times = cfg.snapshot_times();
    }
    Ok(match cfg.experiment {
        Experiment::Atmosphere | Experiment::AtmospherePerturbed => Outcome::One(atmosphere_run(&spec, cfg.amplitude)?),
        Experiment::Polytrope | Experiment::PolytropePerturbed => Outcome::Two(polytrope_run(&spec, cfg.amplitude)?),
        Experiment::Blast => Outcome::Two(blast_run(&spec, &Blast::default())?),
    })
}

fn measure(cfg: &RunConfig, run: &Outcome, reference: Option<&ReferenceSolution>) -> Result<Option<f64>, CliError> {
    let err = match (cfg.experiment, run) {
        (Experiment::Atmosphere, Outcome::One(r)) => Some(r.err_eq1(0)?),
        (Experiment::Polytrope, Outcome::Two(r)) => Some(r.err_eq1(0)?),
        (Experiment::AtmospherePerturbed, Outcome::One(r)) => reference.map(|s| r.err1_delta(s, 0)).transpose()?,
        (Experiment::PolytropePerturbed, Outcome::Two(r)) => {
            reference.map(|s| r.err1_delta_radial(s, 0)).transpose()?
        }
        _ => None,
    };
    Ok(err)
}

fn write_snapshots(art: &mut Artifacts, cfg: &RunConfig, mode: SchemeMode, run: &Outcome) -> Result<(), CliError> {
    let stem = format!("{}_{}_n{}", cfg.experiment, mode.as_str(), match run {
        Outcome::One(r) => r.grid.n(),
        Outcome::Two(r) => r.grid.nx(),
    });
    match run {
        Outcome::One(r) => {
            for (k, (t, u)) in r.snapshots.iter().enumerate() {
                art.write(&format!("{stem}_t{k:03}.csv"), &snapshot_1d(r, *t, u))?;
            }
            art.write(&format!("{stem}_final.csv"), &snapshot_1d(r, r.report.t, &r.state))?;
        }
        Outcome::Two(r) => {
            for (k, (t, u)) in r.snapshots.iter().enumerate() {
                art.write(&format!("{stem}_t{k:03}.csv"), &snapshot_2d(r, *t, u))?;
            }
            art.write(&format!("{stem}_final.csv"), &snapshot_2d(r, r.report.t, &r.state))?;
        }
    }
    Ok(())
}

fn write_manifest(
    art: &mut Artifacts,
    command: Command,
    cfg: &RunConfig,
    started: Instant,
    runs: &[RunRecord],
    reference: Option<&ReferenceConfig>,
) -> Result<(), CliError> {
    let manifest = serde_json::json!({
        "command": command.as_str(),
        "config": cfg.to_json(),
        "wall_seconds": started.elapsed().as_secs_f64(),
        "runs": runs,
        "reference": reference.map(|r| serde_json::json!({
            "hash": r.hash(),
            "canonical": r.canonical(),
        })),
        "artifacts": art.entries(),
    });
    let text = serde_json::to_string_pretty(&manifest)? + "\n";
    let path = art.root().join("manifest.json");
    std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
    Ok(())
}

/// Execute a subcommand. Returns the number of runs performed.
pub fn execute(command: Command, cfg: &RunConfig) -> Result<usize, CliError> {
    let started = Instant::now();
    if command == Command::Reference {
        return reference_only(cfg, started);
    }
    let column = error_column(cfg);
    if command == Command::Convergence {
        if cfg.resolutions.len() < 2 {
            return Err(CliError::config("resolutions", "a convergence study needs at least two".into()));
        }
        if column.is_none() {
            return Err(CliError::config(
                "experiment",
                format!("{} has no error notion for a convergence study", cfg.experiment),
            ));
        }
    }
    let mut art = Artifacts::create(&cfg.output)?;
    let reference = load_reference(cfg)?;
    let mut records = Vec::new();
    for mode in cfg.scheme.modes() {
        let mut errors = Vec::new();
        for &n in &cfg.resolutions {
            let t0 = Instant::now();
            let run = run_one(cfg, mode, n, command == Command::Run)?;
            let err = measure(cfg, &run, reference.as_ref().map(|(_, s)| s))?;
            let (report, diag) = match &run {
                Outcome::One(r) => (r.report, r.diagnostics),
                Outcome::Two(r) => (r.report, r.diagnostics),
            };
            let wall = t0.elapsed().as_secs_f64();
            match err {
                Some(e) => println!("{} {:>13} N={n:>5}: {:.6e} ({} steps, {wall:.1} s)", cfg.experiment, mode.as_str(), e, report.steps),
                None => println!("{} {:>13} N={n:>5}: done ({} steps, {wall:.1} s)", cfg.experiment, mode.as_str(), report.steps),
            }
            write_snapshots(&mut art, cfg, mode, &run)?;
            records.push(RunRecord {
                scheme: mode.as_str().to_string(),
                n,
                t_final: report.t,
                steps: report.steps,
                wall_seconds: wall,
                error: err,
                diagnostics: diag.into(),
            });
            if let Some(e) = err {
                errors.push(e);
            }
        }
        if let Some(col) = column {
            if errors.len() == cfg.resolutions.len() {
                let rates = if cfg.resolutions_double() && errors.len() >= 2 {
                    convergence_rates(&cfg.resolutions, &errors)?
                } else {
                    vec![None; errors.len()]
                };
                let table = error_table(col, &cfg.resolutions, &errors, &rates);
                art.write(&format!("errors_{}.csv", mode.as_str()), &table)?;
            }
        }
    }
    write_manifest(&mut art, command, cfg, started, &records, reference.as_ref().map(|(c, _)| c))?;
    Ok(records.len())
}

fn reference_only(cfg: &RunConfig, started: Instant) -> Result<usize, CliError> {
    let Some(settings) = cfg.reference.as_ref() else {
        return Err(CliError::config(
            "experiment",
            format!("{} has no reference solution (use a perturbed experiment)", cfg.experiment),
        ));
    };
    let mut art = Artifacts::create(&cfg.output)?;
    let (rc, _) = load_reference(cfg)?.expect("perturbed experiments have a reference");
    let path = cache_path(&settings.cache, &rc);
    let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
    art.write(&format!("reference_{}.csv", cfg.experiment), &text)?;
    println!("reference {} n={} hash={}", cfg.experiment, rc.n, rc.hash());
    write_manifest(&mut art, Command::Reference, cfg, started, &[], Some(&rc))?;
    Ok(0)
}
