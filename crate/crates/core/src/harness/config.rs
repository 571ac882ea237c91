//! Experiment configuration and its INI file format.
//!
//! ```ini
//! seed = 7
//!
//! [objective]
//! kind = mlp            ; or quadratic
//! widths = 64,64        ; hidden widths; input/output come from [data]
//! activation = tanh
//!
//! [optim]
//! eta = 0.1
//! rho = 0.1
//! max_steps = 5000
//!
//! [spectral]
//! k = 3
//! period = 10
//!
//! [data]
//! source = synthetic_gaussian_mixture
//! n = 1000
//! classes = 4
//! input_dim = 16
//!
//! [log]
//! path = run.csv
//! ```
//!
//! Keys outside the tables below are rejected.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ini::Ini;

use crate::error::{Error, Result};
use crate::harness::data::{DataSource, DatasetSpec};
use crate::objectives::Activation;
use crate::optim::OptimConfig;
use crate::spectral::{DEFAULT_MAX_ITERS, DEFAULT_TOL};

/// Environment variable naming the directory for logs whose path is not set.
pub const LOG_DIR_ENV: &str = "SAM_EDGE_LOG_DIR";

const ALLOWED: &[(&str, &[&str])] = &[
    ("", &["seed"]),
    (
        "objective",
        &["kind", "widths", "activation", "eigenvalues", "rotate", "init_scale"],
    ),
    (
        "optim",
        &["eta", "rho", "max_steps", "divergence_threshold", "batch_size"],
    ),
    ("spectral", &["k", "tol", "max_iters", "period"]),
    (
        "data",
        &[
            "source",
            "n",
            "center",
            "one_hot",
            "classes",
            "input_dim",
            "separation",
            "noise",
            "images",
            "labels",
        ],
    ),
    ("log", &["path", "clock"]),
];

/// Every accepted `section.key` (the global section is written as `seed`).
pub fn known_keys() -> Vec<String> {
    ALLOWED
        .iter()
        .flat_map(|(sec, keys)| {
            keys.iter().map(move |k| {
                if sec.is_empty() {
                    k.to_string()
                } else {
                    format!("{sec}.{k}")
                }
            })
        })
        .collect()
}

/// Flat `section.key -> value` view of a config file, before validation.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RawConfig {
    entries: BTreeMap<String, String>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let ini = Ini::load_from_str(text).map_err(|e| Error::config("<file>", e.to_string()))?;
        let mut raw = RawConfig::default();
        for (section, props) in ini.iter() {
            let sec = section.unwrap_or("");
            for (key, value) in props.iter() {
                let full = if sec.is_empty() {
                    key.to_string()
                } else {
                    format!("{sec}.{key}")
                };
                if raw.entries.contains_key(&full) {
                    return Err(Error::config(full, "duplicate key"));
                }
                raw.set(&full, value)?;
            }
        }
        Ok(raw)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Sets `section.key`; unknown keys are errors.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let (sec, name) = key.split_once('.').unwrap_or(("", key));
        let Some((_, keys)) = ALLOWED.iter().find(|(s, _)| *s == sec) else {
            return Err(Error::config(key, "unknown section"));
        };
        if !keys.contains(&name) {
            return Err(Error::config(key, "unknown key"));
        }
        self.entries.insert(key.to_string(), value.trim().to_string());
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    fn required(&self, key: &str) -> Result<&str> {
        self.get(key).ok_or_else(|| Error::config(key, "missing required key"))
    }

    fn parse_value<T: FromStr>(&self, key: &str, value: &str) -> Result<T>
    where
        T::Err: Display,
    {
        value
            .parse()
            .map_err(|e: T::Err| Error::config(key, format!("cannot parse `{value}`: {e}")))
    }

    fn req<T: FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: Display,
    {
        let v = self.required(key)?;
        self.parse_value(key, v)
    }

    fn opt<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: Display,
    {
        self.get(key).map(|v| self.parse_value(key, v)).transpose()
    }

    fn list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>>
    where
        T::Err: Display,
    {
        let Some(v) = self.get(key) else {
            return Ok(None);
        };
        v.split(',')
            .map(|s| self.parse_value(key, s.trim()))
            .collect::<Result<Vec<T>>>()
            .map(Some)
    }

    fn check_only(&self, section: &str, allowed: &[&str], kind: &str) -> Result<()> {
        let prefix = format!("{section}.");
        for key in self.entries.keys() {
            if let Some(name) = key.strip_prefix(&prefix) {
                if !allowed.contains(&name) {
                    return Err(Error::config(key.clone(), format!("not valid for {kind}")));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ObjectiveSpec {
    /// `½ wᵀHw` with the given spectrum, optionally in a random orthonormal
    /// basis; the start point is `init_scale · N(0, I)`.
    Quadratic {
        eigenvalues: Vec<f64>,
        rotate: bool,
        init_scale: f64,
    },
    /// MLP with the given hidden widths; input and output widths follow the
    /// dataset. Glorot-normal initialization.
    Mlp {
        hidden: Vec<usize>,
        activation: Activation,
    },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectralConfig {
    pub k: usize,
    pub tol: f64,
    pub max_iters: usize,
    /// Record every `period` steps.
    pub period: usize,
}

impl Default for SpectralConfig {
    fn default() -> Self {
        SpectralConfig {
            k: 3,
            tol: DEFAULT_TOL,
            max_iters: DEFAULT_MAX_ITERS,
            period: 10,
        }
    }
}

/// What the `wall_s` log column measures.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Clock {
    /// Cumulative gradient and Hessian-vector evaluations; deterministic.
    Work,
    /// Elapsed wall-clock seconds.
    Wall,
}

impl FromStr for Clock {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "work" => Ok(Clock::Work),
            "wall" => Ok(Clock::Wall),
            _ => Err(Error::config("log.clock", format!("expected work or wall, got `{s}`"))),
        }
    }
}

impl std::fmt::Display for Clock {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Clock::Work => "work",
            Clock::Wall => "wall",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LogConfig {
    pub path: Option<PathBuf>,
    pub clock: Clock,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub objective: ObjectiveSpec,
    pub optim: OptimConfig<f64>,
    /// Minibatch size; 0 means full batch.
    pub batch_size: usize,
    pub spectral: SpectralConfig,
    pub data: Option<DatasetSpec>,
    pub log: LogConfig,
}

impl ExperimentConfig {
    pub fn from_ini_str(text: &str) -> Result<Self> {
        Self::from_raw(&RawConfig::parse(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_raw(&RawConfig::load(path)?)
    }

    pub fn from_raw(raw: &RawConfig) -> Result<Self> {
        let seed = raw.opt("seed")?.unwrap_or(0);

        let kind = raw.required("objective.kind")?;
        let objective = match kind {
            "quadratic" => {
                raw.check_only("objective", &["kind", "eigenvalues", "rotate", "init_scale"], "quadratic")?;
                let eigenvalues: Vec<f64> = raw
                    .list("objective.eigenvalues")?
                    .ok_or_else(|| Error::config("objective.eigenvalues", "missing required key"))?;
                if eigenvalues.is_empty() || eigenvalues.iter().any(|x| !x.is_finite()) {
                    return Err(Error::config("objective.eigenvalues", "need finite values"));
                }
                ObjectiveSpec::Quadratic {
                    eigenvalues,
                    rotate: raw.opt("objective.rotate")?.unwrap_or(false),
                    init_scale: raw.opt("objective.init_scale")?.unwrap_or(1.0),
                }
            }
            "mlp" => {
                raw.check_only("objective", &["kind", "widths", "activation"], "mlp")?;
                let hidden: Vec<usize> = raw
                    .list("objective.widths")?
                    .ok_or_else(|| Error::config("objective.widths", "missing required key"))?;
                if hidden.contains(&0) {
                    return Err(Error::config("objective.widths", "widths must be positive"));
                }
                let activation = match raw.get("objective.activation") {
                    None => Activation::Tanh,
                    Some(a) => a
                        .parse()
                        .map_err(|_| Error::config("objective.activation", format!("unknown activation `{a}`")))?,
                };
                ObjectiveSpec::Mlp { hidden, activation }
            }
            other => {
                return Err(Error::config(
                    "objective.kind",
                    format!("expected quadratic or mlp, got `{other}`"),
                ))
            }
        };

        let optim = OptimConfig {
            eta: raw.req("optim.eta")?,
            rho: raw.req("optim.rho")?,
            max_steps: raw.req("optim.max_steps")?,
            divergence_threshold: raw.opt("optim.divergence_threshold")?,
        };
        optim.validate().map_err(|e| match e {
            Error::InvalidArgument { name, reason } => Error::config(format!("optim.{name}"), reason),
            other => other,
        })?;
        let batch_size = raw.opt("optim.batch_size")?.unwrap_or(0);

        let defaults = SpectralConfig::default();
        let spectral = SpectralConfig {
            k: raw.opt("spectral.k")?.unwrap_or(defaults.k),
            tol: raw.opt("spectral.tol")?.unwrap_or(defaults.tol),
            max_iters: raw.opt("spectral.max_iters")?.unwrap_or(defaults.max_iters),
            period: raw.opt("spectral.period")?.unwrap_or(defaults.period),
        };
        if spectral.k == 0 {
            return Err(Error::config("spectral.k", "must be >= 1"));
        }
        if !(spectral.tol > 0.0) {
            return Err(Error::config("spectral.tol", "must be > 0"));
        }
        if spectral.max_iters == 0 {
            return Err(Error::config("spectral.max_iters", "must be >= 1"));
        }
        if spectral.period == 0 {
            return Err(Error::config("spectral.period", "must be >= 1"));
        }

        let has_data = raw.entries.keys().any(|k| k.starts_with("data."));
        let data = if has_data { Some(data_spec(raw)?) } else { None };
        match (&objective, &data) {
            (ObjectiveSpec::Mlp { .. }, None) => {
                return Err(Error::config("data", "mlp objective needs a [data] section"))
            }
            (ObjectiveSpec::Quadratic { .. }, Some(_)) => {
                return Err(Error::config("data", "quadratic objective takes no [data] section"))
            }
            (ObjectiveSpec::Quadratic { .. }, _) if batch_size > 0 => {
                return Err(Error::config("optim.batch_size", "minibatches need an mlp objective"))
            }
            _ => {}
        }
        if let Some(spec) = &data {
            if batch_size > spec.n {
                return Err(Error::config("optim.batch_size", "larger than the dataset"));
            }
        }

        let log = LogConfig {
            path: raw.get("log.path").map(PathBuf::from),
            clock: raw.opt("log.clock")?.unwrap_or(Clock::Work),
        };
        Ok(ExperimentConfig {
            seed,
            objective,
            optim,
            batch_size,
            spectral,
            data,
            log,
        })
    }

    /// Serializes to the INI format accepted by [`ExperimentConfig::from_ini_str`].
    pub fn to_ini(&self) -> String {
        let mut ini = Ini::new();
        ini.with_general_section().set("seed", self.seed.to_string());
        match &self.objective {
            ObjectiveSpec::Quadratic {
                eigenvalues,
                rotate,
                init_scale,
            } => {
                ini.with_section(Some("objective"))
                    .set("kind", "quadratic")
                    .set("eigenvalues", join(eigenvalues))
                    .set("rotate", rotate.to_string())
                    .set("init_scale", init_scale.to_string());
            }
            ObjectiveSpec::Mlp { hidden, activation } => {
                ini.with_section(Some("objective"))
                    .set("kind", "mlp")
                    .set("widths", join(hidden))
                    .set("activation", activation.to_string());
            }
        }
        {
            let mut s = ini.with_section(Some("optim"));
            s.set("eta", self.optim.eta.to_string())
                .set("rho", self.optim.rho.to_string())
                .set("max_steps", self.optim.max_steps.to_string())
                .set("batch_size", self.batch_size.to_string());
            if let Some(t) = self.optim.divergence_threshold {
                s.set("divergence_threshold", t.to_string());
            }
        }
        ini.with_section(Some("spectral"))
            .set("k", self.spectral.k.to_string())
            .set("tol", self.spectral.tol.to_string())
            .set("max_iters", self.spectral.max_iters.to_string())
            .set("period", self.spectral.period.to_string());
        if let Some(d) = &self.data {
            let mut s = ini.with_section(Some("data"));
            s.set("source", d.source.name())
                .set("n", d.n.to_string())
                .set("center", d.center.to_string())
                .set("one_hot", d.one_hot.to_string())
                .set("classes", d.classes.to_string())
                .set("input_dim", d.input_dim.to_string());
            match &d.source {
                DataSource::SyntheticGaussianMixture { separation, noise } => {
                    s.set("separation", separation.to_string()).set("noise", noise.to_string());
                }
                DataSource::IdxFiles { images, labels } => {
                    s.set("images", images.display().to_string())
                        .set("labels", labels.display().to_string());
                }
            }
        }
        {
            let mut s = ini.with_section(Some("log"));
            s.set("clock", self.log.clock.to_string());
            if let Some(p) = &self.log.path {
                s.set("path", p.display().to_string());
            }
        }
        let mut out = Vec::new();
        ini.write_to(&mut out).expect("writing to a Vec cannot fail");
        String::from_utf8(out).expect("ini output is utf-8")
    }

    /// Log destination: `[log].path`, else `$SAM_EDGE_LOG_DIR/run.csv`, else
    /// `run.csv` in the working directory.
    pub fn log_path(&self) -> PathBuf {
        if let Some(p) = &self.log.path {
            return p.clone();
        }
        match std::env::var_os(LOG_DIR_ENV) {
            Some(dir) => PathBuf::from(dir).join("run.csv"),
            None => PathBuf::from("run.csv"),
        }
    }
}

fn data_spec(raw: &RawConfig) -> Result<DatasetSpec> {
    let source = match raw.get("data.source").unwrap_or("synthetic_gaussian_mixture") {
        "synthetic_gaussian_mixture" => {
            raw.check_only(
                "data",
                &["source", "n", "center", "one_hot", "classes", "input_dim", "separation", "noise"],
                "synthetic data",
            )?;
            DataSource::SyntheticGaussianMixture {
                separation: raw.opt("data.separation")?.unwrap_or(1.0),
                noise: raw.opt("data.noise")?.unwrap_or(1.0),
            }
        }
        "idx_files" => {
            raw.check_only(
                "data",
                &["source", "n", "center", "one_hot", "classes", "input_dim", "images", "labels"],
                "idx data",
            )?;
            DataSource::IdxFiles {
                images: PathBuf::from(raw.required("data.images")?),
                labels: PathBuf::from(raw.required("data.labels")?),
            }
        }
        other => {
            return Err(Error::config(
                "data.source",
                format!("expected synthetic_gaussian_mixture or idx_files, got `{other}`"),
            ))
        }
    };
    let spec = DatasetSpec {
        source,
        n: raw.req("data.n")?,
        center: raw.opt("data.center")?.unwrap_or(true),
        one_hot: raw.opt("data.one_hot")?.unwrap_or(true),
        classes: raw.req("data.classes")?,
        input_dim: raw.req("data.input_dim")?,
    };
    spec.validate()?;
    Ok(spec)
}

fn join<T: Display>(xs: &[T]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

#[cfg(test)]
mod tests {
    use super::*;

    const QUAD: &str = "seed = 3\n[objective]\nkind = quadratic\neigenvalues = 5, 2, 1\n\
                        [optim]\neta = 0.1\nrho = 0.05\nmax_steps = 100\n";

    #[test]
    fn parses_minimal_quadratic() {
        let cfg = ExperimentConfig::from_ini_str(QUAD).unwrap();
        assert_eq!(cfg.seed, 3);
        assert_eq!(
            cfg.objective,
            ObjectiveSpec::Quadratic {
                eigenvalues: vec![5.0, 2.0, 1.0],
                rotate: false,
                init_scale: 1.0
            }
        );
        assert_eq!(cfg.spectral, SpectralConfig::default());
        assert_eq!(cfg.log.clock, Clock::Work);
    }

    #[test]
    fn missing_eta_is_named() {
        let text = QUAD.replace("eta = 0.1\n", "");
        let err = ExperimentConfig::from_ini_str(&text).unwrap_err();
        assert!(err.to_string().contains("optim.eta"), "{err}");
    }

    #[test]
    fn negative_rho_is_rejected() {
        let err = ExperimentConfig::from_ini_str(&QUAD.replace("rho = 0.05", "rho = -0.1")).unwrap_err();
        assert!(err.to_string().contains("optim.rho"), "{err}");
    }

    #[test]
    fn unknown_keys_and_sections_are_rejected() {
        let err = ExperimentConfig::from_ini_str(&format!("{QUAD}momentum = 0.9\n")).unwrap_err();
        assert!(err.to_string().contains("optim.momentum"));
        let err = ExperimentConfig::from_ini_str(&format!("{QUAD}[extras]\nx = 1\n")).unwrap_err();
        assert!(err.to_string().contains("extras.x"));
        let err = ExperimentConfig::from_ini_str(&QUAD.replace("kind = quadratic", "kind = quadratic\nwidths = 3")).unwrap_err();
        assert!(err.to_string().contains("objective.widths"));
    }

    #[test]
    fn mlp_requires_data() {
        let text = "[objective]\nkind = mlp\nwidths = 8\n[optim]\neta = 0.1\nrho = 0\nmax_steps = 5\n";
        assert!(ExperimentConfig::from_ini_str(text).is_err());
        let with_data = format!("{text}[data]\nn = 20\nclasses = 2\ninput_dim = 3\n");
        let cfg = ExperimentConfig::from_ini_str(&with_data).unwrap();
        assert_eq!(cfg.data.unwrap().n, 20);
    }

    #[test]
    fn ini_roundtrip() {
        let text = "seed = 11\n[objective]\nkind = mlp\nwidths = 16,8\nactivation = relu\n\
                    [optim]\neta = 0.03\nrho = 0.3\nmax_steps = 50\ndivergence_threshold = 1e9\nbatch_size = 10\n\
                    [spectral]\nk = 2\ntol = 1e-5\nperiod = 5\n\
                    [data]\nn = 40\nclasses = 4\ninput_dim = 3\nnoise = 0.5\ncenter = false\n\
                    [log]\npath = out.csv\nclock = wall\n";
        let cfg = ExperimentConfig::from_ini_str(text).unwrap();
        let again = ExperimentConfig::from_ini_str(&cfg.to_ini()).unwrap();
        assert_eq!(cfg, again);
        assert_eq!(again.batch_size, 10);
        assert_eq!(again.log.clock, Clock::Wall);
    }

    #[test]
    fn overrides_go_through_the_same_validation() {
        let mut raw = RawConfig::parse(QUAD).unwrap();
        raw.set("optim.eta", "0.5").unwrap();
        assert_eq!(ExperimentConfig::from_raw(&raw).unwrap().optim.eta, 0.5);
        assert!(raw.set("optim.nope", "1").is_err());
    }
}
