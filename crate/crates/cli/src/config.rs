//! Run configuration: flat `key = value` text with dotted keys.
//!
//! ```text
//! # comment
//! experiment = qubit-sweep
//! seed = 7
//! qubit.tau = 0.5, 1, 2:8:2      # lists and inclusive ranges start:stop:step
//! ```
//!
//! Any key can be overridden from the environment as `COHTHERMO_` followed by
//! the key in upper case with dots replaced by underscores, e.g.
//! `COHTHERMO_ROTOR_KICKS=2000`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use cohthermo::dynamics::StepControl;

use crate::CliError;

pub const ENV_PREFIX: &str = "COHTHERMO_";

/// Every accepted key with its default (`None`: no default).
pub const KEYS: &[(&str, Option<&str>)] = &[
    ("experiment", None),
    ("seed", None),
    ("workers", Some("0")),
    ("output", Some("out")),
    ("samples", Some("0")),
    ("integrator.steps", None),
    ("integrator.tolerance", Some("1e-9")),
    ("integrator.max_steps", Some("1048576")),
    ("qubit.omega_i", Some("1")),
    ("qubit.omega_f", Some("2")),
    ("qubit.tau", Some("0.5, 1, 2, 4, 8, 16, 32")),
    ("qubit.beta", Some("1")),
    ("qubit.time_samples", Some("1")),
    ("rotor.k", Some("3:15:0.5")),
    ("rotor.period", Some("0.25")),
    ("rotor.temperature", Some("0.5, 0.2, 0.1")),
    ("rotor.kicks", Some("6000")),
    ("rotor.window_start", Some("3000")),
    ("rotor.window_end", Some("6000")),
    ("rotor.cutoff", None),
    ("rotor.max_cutoff", Some("4096")),
    ("rotor.record_every", Some("10")),
    ("rotor.tpm_kicks", Some("20")),
    ("rotor.tpm_cutoff", None),
    ("fluctuation.protocols", Some("200")),
    ("fluctuation.min_dim", Some("2")),
    ("fluctuation.max_dim", Some("16")),
    ("fluctuation.beta_min", Some("0.1")),
    ("fluctuation.beta_max", Some("5")),
    ("identity.dim", Some("4")),
    ("identity.beta", Some("1")),
];

pub fn env_name(key: &str) -> String {
    format!("{ENV_PREFIX}{}", key.to_uppercase().replace('.', "_"))
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

/// Parses the text format into a key/value map. Keys are not checked here.
pub fn parse_entries(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut out = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| config_err(format!("line {}: expected `key = value`", lineno + 1)))?;
        let key = key.trim();
        let value = value.trim();
        let valid_key = !key.is_empty()
            && key
                .chars()
                .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_' || c == '.');
        if !valid_key {
            return Err(config_err(format!("line {}: bad key `{key}`", lineno + 1)));
        }
        if value.is_empty() {
            return Err(config_err(format!("line {}: empty value for `{key}`", lineno + 1)));
        }
        if out.insert(key.to_string(), value.to_string()).is_some() {
            return Err(config_err(format!("line {}: duplicate key `{key}`", lineno + 1)));
        }
    }
    Ok(out)
}

/// Expands `a, b, start:stop:step` into a list. Ranges include `stop` when it
/// lies on the grid.
pub fn parse_grid(key: &str, value: &str) -> Result<Vec<f64>, CliError> {
    let mut out = Vec::new();
    for item in value.split(',') {
        let item = item.trim();
        let parts: Vec<&str> = item.split(':').collect();
        match parts.as_slice() {
            [single] => out.push(parse_f64(key, single)?),
            [start, stop, step] => {
                let (a, b, h) = (
                    parse_f64(key, start)?,
                    parse_f64(key, stop)?,
                    parse_f64(key, step)?,
                );
                if !(h > 0.0 && a <= b) {
                    return Err(config_err(format!(
                        "{key}: range `{item}` needs start <= stop and step > 0"
                    )));
                }
                let count = ((b - a) / h + 1e-9).floor() as usize + 1;
                if count > 1_000_000 {
                    return Err(config_err(format!("{key}: range `{item}` is too long")));
                }
                out.extend((0..count).map(|i| a + i as f64 * h));
            }
            _ => return Err(config_err(format!("{key}: cannot parse `{item}`"))),
        }
    }
    if out.is_empty() {
        return Err(config_err(format!("{key}: empty grid")));
    }
    Ok(out)
}

fn parse_f64(key: &str, s: &str) -> Result<f64, CliError> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| config_err(format!("{key}: `{s}` is not a number")))?;
    if !v.is_finite() {
        return Err(config_err(format!("{key}: `{s}` is not finite")));
    }
    Ok(v)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    QubitSweep,
    RotorSweep,
    FluctuationCheck,
    IdentityDemo,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::QubitSweep => "qubit-sweep",
            Experiment::RotorSweep => "rotor-sweep",
            Experiment::FluctuationCheck => "fluctuation-check",
            Experiment::IdentityDemo => "identity-demo",
        }
    }

    fn parse(s: &str) -> Result<Self, CliError> {
        match s {
            "qubit-sweep" => Ok(Experiment::QubitSweep),
            "rotor-sweep" => Ok(Experiment::RotorSweep),
            "fluctuation-check" => Ok(Experiment::FluctuationCheck),
            "identity-demo" => Ok(Experiment::IdentityDemo),
            other => Err(config_err(format!("unknown experiment `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QubitGrid {
    pub omega_i: Vec<f64>,
    pub omega_f: Vec<f64>,
    pub tau: Vec<f64>,
    pub beta: Vec<f64>,
    /// Report rows at `j tau / time_samples`, `j = 1..=time_samples`.
    pub time_samples: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RotorGrid {
    pub k: Vec<f64>,
    pub period: Vec<f64>,
    /// `1 / beta`.
    pub temperature: Vec<f64>,
    pub kicks: usize,
    pub window_start: usize,
    pub window_end: usize,
    /// Fixed cutoff; automatic selection when absent.
    pub cutoff: Option<usize>,
    pub max_cutoff: usize,
    pub record_every: usize,
    pub tpm_kicks: usize,
    pub tpm_cutoff: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FluctuationEnsemble {
    pub protocols: usize,
    pub min_dim: usize,
    pub max_dim: usize,
    pub beta_min: f64,
    pub beta_max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub seed: Option<u64>,
    /// Zero selects the number of available cores.
    pub workers: usize,
    pub output: PathBuf,
    /// Monte Carlo draws per grid point; zero disables sampling.
    pub samples: usize,
    pub step_control: StepControl,
    pub qubit: QubitGrid,
    pub rotor: RotorGrid,
    pub fluctuation: FluctuationEnsemble,
    pub identity_dim: usize,
    pub identity_beta: f64,
    /// Every key after defaults and overrides, as text.
    pub resolved: BTreeMap<String, String>,
}

struct Lookup<'a>(&'a BTreeMap<String, String>);

impl Lookup<'_> {
    fn raw(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    fn required(&self, key: &str) -> Result<&str, CliError> {
        self.raw(key)
            .ok_or_else(|| config_err(format!("missing required key `{key}`")))
    }

    fn usize(&self, key: &str) -> Result<usize, CliError> {
        let s = self.required(key)?;
        s.parse()
            .map_err(|_| config_err(format!("{key}: `{s}` is not a non-negative integer")))
    }

    fn opt_usize(&self, key: &str) -> Result<Option<usize>, CliError> {
        self.raw(key).map(|_| self.usize(key)).transpose()
    }

    fn f64(&self, key: &str) -> Result<f64, CliError> {
        parse_f64(key, self.required(key)?)
    }

    fn grid(&self, key: &str) -> Result<Vec<f64>, CliError> {
        parse_grid(key, self.required(key)?)
    }

    fn positive_grid(&self, key: &str) -> Result<Vec<f64>, CliError> {
        let g = self.grid(key)?;
        if g.iter().any(|&v| v <= 0.0) {
            return Err(config_err(format!("{key}: values must be positive")));
        }
        Ok(g)
    }
}

impl RunConfig {
    /// Reads `path` and applies environment overrides.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
        Self::from_sources(&text, |name| std::env::var(name).ok())
    }

    pub fn from_sources(
        text: &str,
        env: impl Fn(&str) -> Option<String>,
    ) -> Result<Self, CliError> {
        let mut entries = parse_entries(text)?;
        for key in entries.keys() {
            if !KEYS.iter().any(|(k, _)| k == key) {
                return Err(config_err(format!("unknown key `{key}`")));
            }
        }
        for (key, default) in KEYS {
            if let Some(v) = env(&env_name(key)) {
                let v = v.trim();
                if v.is_empty() {
                    return Err(config_err(format!("{}: empty override", env_name(key))));
                }
                entries.insert(key.to_string(), v.to_string());
            } else if let Some(d) = default {
                entries.entry(key.to_string()).or_insert_with(|| d.to_string());
            }
        }
        Self::from_entries(entries)
    }

    fn from_entries(entries: BTreeMap<String, String>) -> Result<Self, CliError> {
        let l = Lookup(&entries);
        let experiment = Experiment::parse(l.required("experiment")?)?;
        let seed = match l.raw("seed") {
            Some(s) => Some(
                s.parse::<u64>()
                    .map_err(|_| config_err(format!("seed: `{s}` is not a u64")))?,
            ),
            None => None,
        };
        let samples = l.usize("samples")?;
        if samples > 0 && seed.is_none() {
            return Err(config_err("samples > 0 requires a seed"));
        }
        if experiment == Experiment::FluctuationCheck && seed.is_none() {
            return Err(config_err("fluctuation-check draws random protocols and requires a seed"));
        }
        if samples == 1 {
            return Err(config_err("samples must be 0 or at least 2"));
        }

        let tolerance = l.f64("integrator.tolerance")?;
        let max_steps = l.usize("integrator.max_steps")?;
        let step_control = match l.opt_usize("integrator.steps")? {
            Some(0) => return Err(config_err("integrator.steps must be >= 1")),
            Some(n) => StepControl::Fixed(n),
            None => {
                if tolerance.is_nan() || tolerance <= 0.0 || max_steps < 16 {
                    return Err(config_err(
                        "integrator.tolerance must be positive and max_steps >= 16",
                    ));
                }
                StepControl::Adaptive {
                    initial_steps: 16,
                    tolerance,
                    max_steps,
                }
            }
        };

        let qubit = QubitGrid {
            omega_i: l.positive_grid("qubit.omega_i")?,
            omega_f: l.positive_grid("qubit.omega_f")?,
            tau: l.positive_grid("qubit.tau")?,
            beta: l.positive_grid("qubit.beta")?,
            time_samples: l.usize("qubit.time_samples")?,
        };
        if qubit.time_samples == 0 {
            return Err(config_err("qubit.time_samples must be >= 1"));
        }

        let rotor = RotorGrid {
            k: l.grid("rotor.k")?,
            period: l.grid("rotor.period")?,
            temperature: l.positive_grid("rotor.temperature")?,
            kicks: l.usize("rotor.kicks")?,
            window_start: l.usize("rotor.window_start")?,
            window_end: l.usize("rotor.window_end")?,
            cutoff: l.opt_usize("rotor.cutoff")?,
            max_cutoff: l.usize("rotor.max_cutoff")?,
            record_every: l.usize("rotor.record_every")?,
            tpm_kicks: l.usize("rotor.tpm_kicks")?,
            tpm_cutoff: l.opt_usize("rotor.tpm_cutoff")?,
        };
        if experiment == Experiment::RotorSweep {
            if rotor.period.iter().any(|&t| t < 0.0) {
                return Err(config_err("rotor.period must be >= 0"));
            }
            if rotor.kicks == 0 || rotor.record_every == 0 || rotor.tpm_kicks == 0 {
                return Err(config_err(
                    "rotor.kicks, rotor.record_every and rotor.tpm_kicks must be >= 1",
                ));
            }
            if rotor.window_start == 0
                || rotor.window_end > rotor.kicks
                || rotor.window_start + 99 > rotor.window_end
            {
                return Err(config_err(format!(
                    "rotor window [{}, {}] must lie in [1, {}] and span at least 100 kicks",
                    rotor.window_start, rotor.window_end, rotor.kicks
                )));
            }
            if matches!(rotor.cutoff, Some(0)) || matches!(rotor.tpm_cutoff, Some(0)) {
                return Err(config_err("rotor cutoffs must be >= 1"));
            }
        }

        let fluctuation = FluctuationEnsemble {
            protocols: l.usize("fluctuation.protocols")?,
            min_dim: l.usize("fluctuation.min_dim")?,
            max_dim: l.usize("fluctuation.max_dim")?,
            beta_min: l.f64("fluctuation.beta_min")?,
            beta_max: l.f64("fluctuation.beta_max")?,
        };
        if experiment == Experiment::FluctuationCheck {
            let f = &fluctuation;
            if f.protocols == 0
                || f.min_dim < 2
                || f.min_dim > f.max_dim
                || !(f.beta_min > 0.0 && f.beta_min <= f.beta_max)
            {
                return Err(config_err(
                    "fluctuation ensemble needs protocols >= 1, 2 <= min_dim <= max_dim, 0 < beta_min <= beta_max",
                ));
            }
        }

        let identity_dim = l.usize("identity.dim")?;
        let identity_beta = l.f64("identity.beta")?;
        if experiment == Experiment::IdentityDemo && (identity_dim == 0 || identity_beta <= 0.0) {
            return Err(config_err("identity.dim must be >= 1 and identity.beta > 0"));
        }

        Ok(Self {
            experiment,
            seed,
            workers: l.usize("workers")?,
            output: PathBuf::from(l.required("output")?),
            samples,
            step_control,
            qubit,
            rotor,
            fluctuation,
            identity_dim,
            identity_beta,
            resolved: entries,
        })
    }

    /// Keeps `resolved` in step with a command-line override.
    pub fn set_workers(&mut self, workers: usize) {
        self.workers = workers;
        self.resolved.insert("workers".into(), workers.to_string());
    }

    pub fn set_output(&mut self, output: PathBuf) {
        self.resolved
            .insert("output".into(), output.display().to_string());
        self.output = output;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn no_env(_: &str) -> Option<String> {
        None
    }

    #[test]
    fn ranges_are_inclusive() {
        let g = parse_grid("k", "3:15:0.5").unwrap();
        assert_eq!(g.len(), 25);
        assert_eq!(g[0], 3.0);
        assert_eq!(*g.last().unwrap(), 15.0);
        assert_eq!(parse_grid("k", "1, 2:3:1").unwrap(), vec![1.0, 2.0, 3.0]);
        assert!(parse_grid("k", "3:1:1").is_err());
        assert!(parse_grid("k", "1:2").is_err());
        assert!(parse_grid("k", "nan").is_err());
    }

    #[test]
    fn comments_blank_lines_and_duplicates() {
        let e = parse_entries("# top\n\nexperiment = identity-demo  # trailing\n").unwrap();
        assert_eq!(e["experiment"], "identity-demo");
        assert!(parse_entries("a = 1\na = 2").is_err());
        assert!(parse_entries("novalue").is_err());
        assert!(parse_entries("Key = 1").is_err());
    }

    #[test]
    fn defaults_fill_in() {
        let c = RunConfig::from_sources("experiment = rotor-sweep", no_env).unwrap();
        assert_eq!(c.rotor.k.len(), 25);
        assert_eq!(c.rotor.temperature, vec![0.5, 0.2, 0.1]);
        assert_eq!(c.rotor.kicks, 6000);
        assert_eq!(c.qubit.tau, vec![0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0]);
        assert_eq!(c.resolved["rotor.period"], "0.25");
    }

    #[test]
    fn env_overrides_file() {
        let env = |name: &str| (name == "COHTHERMO_ROTOR_KICKS").then(|| "500".to_string());
        let c = RunConfig::from_sources(
            "experiment = rotor-sweep\nrotor.kicks = 100\nrotor.window_start = 100\nrotor.window_end = 400",
            env,
        )
        .unwrap();
        assert_eq!(c.rotor.kicks, 500);
        assert_eq!(env_name("rotor.window_end"), "COHTHERMO_ROTOR_WINDOW_END");
    }

    #[test]
    fn invalid_configs() {
        for text in [
            "",
            "experiment = nope",
            "experiment = qubit-sweep\nbogus = 1",
            "experiment = qubit-sweep\nsamples = 10",
            "experiment = fluctuation-check",
            "experiment = qubit-sweep\nqubit.tau = 0, 1",
            "experiment = rotor-sweep\nrotor.kicks = 50",
            "experiment = qubit-sweep\nintegrator.steps = 0",
        ] {
            assert!(
                matches!(RunConfig::from_sources(text, no_env), Err(CliError::Config(_))),
                "{text:?}"
            );
        }
    }
}
