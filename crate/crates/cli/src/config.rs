//! Run configuration: a TOML file with flag overrides, validated in full
//! before anything runs.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use wbeuler::experiments::{DEFAULT_CFL, REFERENCE_CACHE_ENV};
use wbeuler::SchemeMode;

use crate::error::CliError;

/// Environment variable that relative output directories are resolved
/// against.
pub const OUTPUT_ROOT_ENV: &str = "WBEULER_OUTPUT_ROOT";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Atmosphere,
    AtmospherePerturbed,
    Polytrope,
    PolytropePerturbed,
    Blast,
}

impl Experiment {
    pub fn parse(s: &str) -> Result<Self, CliError> {
        match s {
            "atmosphere" => Ok(Experiment::Atmosphere),
            "atmosphere_perturbed" => Ok(Experiment::AtmospherePerturbed),
            "polytrope" => Ok(Experiment::Polytrope),
            "polytrope_perturbed" => Ok(Experiment::PolytropePerturbed),
            "blast" => Ok(Experiment::Blast),
            other => Err(CliError::config(
                "experiment",
                format!(
                    "unknown experiment '{other}' (expected atmosphere, atmosphere_perturbed, \
                     polytrope, polytrope_perturbed or blast)"
                ),
            )),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Experiment::Atmosphere => "atmosphere",
            Experiment::AtmospherePerturbed => "atmosphere_perturbed",
            Experiment::Polytrope => "polytrope",
            Experiment::PolytropePerturbed => "polytrope_perturbed",
            Experiment::Blast => "blast",
        }
    }

    pub fn is_perturbed(&self) -> bool {
        matches!(self, Experiment::AtmospherePerturbed | Experiment::PolytropePerturbed)
    }

    fn default_t_end(&self) -> f64 {
        match self {
            Experiment::Atmosphere => 10.0,
            Experiment::Polytrope => 30.0,
            Experiment::AtmospherePerturbed | Experiment::PolytropePerturbed => 0.2,
            Experiment::Blast => 0.02,
        }
    }

    fn default_amplitude(&self) -> f64 {
        match self {
            Experiment::AtmospherePerturbed => 1e-7,
            Experiment::PolytropePerturbed => 1e-2,
            _ => 0.0,
        }
    }

    fn default_reference_n(&self) -> usize {
        32768
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Scheme selection; `both` runs the two schemes on the same resolutions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchemeChoice {
    One(SchemeMode),
    Both,
}

impl SchemeChoice {
    pub fn parse(s: &str) -> Result<Self, CliError> {
        if s == "both" {
            return Ok(SchemeChoice::Both);
        }
        s.parse::<SchemeMode>()
            .map(SchemeChoice::One)
            .map_err(|e| CliError::config("scheme", e.to_string()))
    }

    pub fn modes(&self) -> Vec<SchemeMode> {
        match self {
            SchemeChoice::One(m) => vec![*m],
            SchemeChoice::Both => vec![SchemeMode::WellBalanced, SchemeMode::Unbalanced],
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            SchemeChoice::One(m) => m.as_str(),
            SchemeChoice::Both => "both",
        }
    }
}

/// File layout. All keys are optional here; requirements are checked when
/// the file and flags are merged.
#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub experiment: Option<String>,
    pub scheme: Option<String>,
    pub resolutions: Option<Vec<usize>>,
    pub amplitude: Option<f64>,
    pub t_end: Option<f64>,
    pub cfl: Option<f64>,
    pub output: Option<PathBuf>,
    /// Time between intermediate snapshots; absent or zero writes only the
    /// final state.
    pub snapshot_interval: Option<f64>,
    pub reference: Option<FileReference>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileReference {
    pub enabled: Option<bool>,
    pub n: Option<usize>,
    pub cache: Option<PathBuf>,
}

impl FileConfig {
    pub fn from_path(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config("config", format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::config("config", e.to_string().trim_end().to_string()))
    }
}

/// Values given on the command line; they take precedence over the file.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub experiment: Option<String>,
    pub scheme: Option<String>,
    pub resolutions: Option<Vec<usize>>,
    pub amplitude: Option<f64>,
    pub t_end: Option<f64>,
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReferenceSettings {
    pub n: usize,
    pub cache: PathBuf,
}

/// Fully validated configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub scheme: SchemeChoice,
    pub resolutions: Vec<usize>,
    pub amplitude: f64,
    pub t_end: f64,
    pub cfl: f64,
    pub output: PathBuf,
    pub snapshot_interval: Option<f64>,
    pub reference: Option<ReferenceSettings>,
}

impl RunConfig {
    pub fn resolve(file: FileConfig, flags: Overrides) -> Result<Self, CliError> {
        let experiment = flags
            .experiment
            .or(file.experiment)
            .ok_or_else(|| CliError::config("experiment", "missing required key".into()))?;
        let experiment = Experiment::parse(&experiment)?;

        let scheme = match flags.scheme.or(file.scheme) {
            Some(s) => SchemeChoice::parse(&s)?,
            None => SchemeChoice::One(SchemeMode::WellBalanced),
        };

        let resolutions = flags
            .resolutions
            .or(file.resolutions)
            .ok_or_else(|| CliError::config("resolutions", "missing required key".into()))?;
        if resolutions.is_empty() {
            return Err(CliError::config("resolutions", "at least one resolution is needed".into()));
        }
        if let Some(n) = resolutions.iter().find(|&&n| n < 4) {
            return Err(CliError::config("resolutions", format!("resolution {n} is below 4")));
        }

        let amplitude = match flags.amplitude.or(file.amplitude) {
            Some(a) if experiment == Experiment::Blast => {
                return Err(CliError::config(
                    "amplitude",
                    format!("blast uses a fixed pressure increment, amplitude {a} is not accepted"),
                ))
            }
            Some(a) if !experiment.is_perturbed() && a != 0.0 => {
                return Err(CliError::config(
                    "amplitude",
                    format!("{experiment} is an equilibrium run, use {experiment}_perturbed for amplitude {a}"),
                ))
            }
            Some(a) if !a.is_finite() || a < 0.0 => {
                return Err(CliError::config("amplitude", format!("invalid amplitude {a}")))
            }
            Some(a) => a,
            None => experiment.default_amplitude(),
        };

        let t_end = flags.t_end.or(file.t_end).unwrap_or_else(|| experiment.default_t_end());
        if !(t_end > 0.0) || !t_end.is_finite() {
            return Err(CliError::config("t_end", format!("final time must be positive, got {t_end}")));
        }
        let cfl = file.cfl.unwrap_or(DEFAULT_CFL);
        if !(cfl > 0.0 && cfl <= 1.0) {
            return Err(CliError::config("cfl", format!("CFL number must lie in (0, 1], got {cfl}")));
        }
        let snapshot_interval = match file.snapshot_interval {
            None => None,
            Some(d) if d == 0.0 => None,
            Some(d) if d > 0.0 && d.is_finite() => Some(d),
            Some(d) => return Err(CliError::config("snapshot_interval", format!("invalid interval {d}"))),
        };

        let output = resolve_output(flags.output.or(file.output).unwrap_or_else(|| PathBuf::from("output")));

        let file_ref = file.reference.unwrap_or_default();
        let reference = if experiment.is_perturbed() && file_ref.enabled.unwrap_or(true) {
            let n = file_ref.n.unwrap_or_else(|| experiment.default_reference_n());
            if n < 4 {
                return Err(CliError::config("reference.n", format!("reference resolution {n} is below 4")));
            }
            if experiment == Experiment::AtmospherePerturbed {
                if let Some(bad) = resolutions.iter().find(|&&r| n % r != 0) {
                    return Err(CliError::config(
                        "reference.n",
                        format!("reference resolution {n} is not a multiple of {bad}"),
                    ));
                }
            }
            let cache = file_ref
                .cache
                .or_else(|| std::env::var_os(REFERENCE_CACHE_ENV).map(PathBuf::from))
                .unwrap_or_else(|| output.join("references"));
            Some(ReferenceSettings { n, cache })
        } else {
            if file_ref.n.is_some() && !experiment.is_perturbed() {
                return Err(CliError::config(
                    "reference.n",
                    format!("{experiment} is compared against its equilibrium and takes no reference"),
                ));
            }
            None
        };

        Ok(RunConfig {
            experiment,
            scheme,
            resolutions,
            amplitude,
            t_end,
            cfl,
            output,
            snapshot_interval,
            reference,
        })
    }

    /// Intermediate snapshot times strictly inside `(0, t_end)`.
    pub fn snapshot_times(&self) -> Vec<f64> {
        let Some(d) = self.snapshot_interval else {
            return Vec::new();
        };
        (1..)
            .map(|k| k as f64 * d)
            .take_while(|&t| t < self.t_end * (1.0 - 1e-12))
            .collect()
    }

    /// Whether consecutive resolutions double, so that rates are defined.
    pub fn resolutions_double(&self) -> bool {
        self.resolutions.windows(2).all(|w| w[1] == 2 * w[0])
    }

    /// JSON echo for the manifest.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "experiment": self.experiment.as_str(),
            "scheme": self.scheme.as_str(),
            "resolutions": self.resolutions,
            "amplitude": self.amplitude,
            "t_end": self.t_end,
            "cfl": self.cfl,
            "output": self.output,
            "snapshot_interval": self.snapshot_interval,
            "reference": self.reference,
        })
    }
}

fn resolve_output(out: PathBuf) -> PathBuf {
    if out.is_absolute() {
        return out;
    }
    match std::env::var_os(OUTPUT_ROOT_ENV) {
        Some(root) => PathBuf::from(root).join(out),
        None => out,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn resolve(text: &str) -> Result<RunConfig, CliError> {
        RunConfig::resolve(FileConfig::from_toml(text)?, Overrides::default())
    }

    #[test]
    fn minimal_config_gets_defaults() {
        let c = resolve("experiment = \"atmosphere\"\nresolutions = [32]\n").unwrap();
        assert_eq!(c.cfl, 0.85);
        assert_eq!(c.scheme, SchemeChoice::One(SchemeMode::WellBalanced));
        assert_eq!(c.t_end, 10.0);
        assert_eq!(c.amplitude, 0.0);
        assert!(c.reference.is_none());
    }

    #[test]
    fn blast_amplitude_rejected() {
        let e = resolve("experiment = \"blast\"\nresolutions = [32]\namplitude = 10.0\n").unwrap_err();
        assert!(e.to_string().contains("amplitude"));
    }

    #[test]
    fn unknown_key_rejected() {
        let e = resolve("experiment = \"blast\"\nresolutions = [32]\nfoo = 1\n").unwrap_err();
        assert!(e.to_string().contains("foo"), "{e}");
        let e = resolve("experiment = \"blast\"\nresolutions = [32]\n[reference]\nsize = 3\n").unwrap_err();
        assert!(e.to_string().contains("size"), "{e}");
    }

    #[test]
    fn missing_keys_named() {
        let e = resolve("resolutions = [32]\n").unwrap_err();
        assert!(e.to_string().contains("experiment"));
        let e = resolve("experiment = \"polytrope\"\n").unwrap_err();
        assert!(e.to_string().contains("resolutions"));
    }

    #[test]
    fn flags_override_file() {
        let file = FileConfig::from_toml("experiment = \"atmosphere\"\nresolutions = [32]\nt_end = 1.0\n").unwrap();
        let flags = Overrides {
            experiment: Some("atmosphere_perturbed".into()),
            resolutions: Some(vec![64, 128]),
            scheme: Some("both".into()),
            ..Default::default()
        };
        let c = RunConfig::resolve(file, flags).unwrap();
        assert_eq!(c.experiment, Experiment::AtmospherePerturbed);
        assert_eq!(c.resolutions, vec![64, 128]);
        assert_eq!(c.t_end, 1.0);
        assert_eq!(c.amplitude, 1e-7);
        assert_eq!(c.scheme.modes().len(), 2);
        assert_eq!(c.reference.as_ref().unwrap().n, 32768);
    }

    #[test]
    fn reference_must_divide_planar_resolutions() {
        let e = resolve("experiment = \"atmosphere_perturbed\"\nresolutions = [48]\n[reference]\nn = 1024\n").unwrap_err();
        assert!(e.to_string().contains("reference.n"));
    }

    #[test]
    fn snapshot_times_inside_run() {
        let c = resolve("experiment = \"atmosphere\"\nresolutions = [32]\nt_end = 1.0\nsnapshot_interval = 0.25\n").unwrap();
        assert_eq!(c.snapshot_times(), vec![0.25, 0.5, 0.75]);
        assert!(c.resolutions_double());
        let c = resolve("experiment = \"atmosphere\"\nresolutions = [32, 48]\n").unwrap();
        assert!(!c.resolutions_double());
    }

    #[test]
    fn invalid_values_rejected() {
        assert!(resolve("experiment = \"atmosphere\"\nresolutions = [32]\ncfl = 1.5\n").is_err());
        assert!(resolve("experiment = \"atmosphere\"\nresolutions = [32]\nt_end = -1\n").is_err());
        assert!(resolve("experiment = \"atmosphere\"\nresolutions = [32]\nscheme = \"weno\"\n").is_err());
        assert!(resolve("experiment = \"atmosphere\"\nresolutions = [32]\namplitude = 1e-3\n").is_err());
        assert!(resolve("experiment = \"moon\"\nresolutions = [32]\n").is_err());
    }
}
