//! Run configuration: a TOML file of optional keys layered over the
//! reference setup.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use mdkinetic::{ParameterSet, PerPopulation};
use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config file {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Invalid(Vec<String>),
    #[error("unknown preset `{0}` (expected fig1 or sec41)")]
    UnknownPreset(String),
}

/// Named initial-mean presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// `m(0) = (9, 1, 0.1, 0.5)`, used for the moment trajectories.
    Fig1,
    /// `m(0) = (9, 1, 0.6, 0.6)`, used for distribution-level runs.
    Sec41,
}

impl Preset {
    pub fn means(self) -> [f64; 4] {
        match self {
            Preset::Fig1 => [9.0, 1.0, 0.1, 0.5],
            Preset::Sec41 => [9.0, 1.0, 0.6, 0.6],
        }
    }
}

impl FromStr for Preset {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "fig1" => Ok(Preset::Fig1),
            "sec41" => Ok(Preset::Sec41),
            _ => Err(ConfigError::UnknownPreset(s.to_owned())),
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Preset::Fig1 => "fig1",
            Preset::Sec41 => "sec41",
        })
    }
}

/// Which driver a configuration is resolved for; selects default horizons
/// and initial means.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Moments,
    Consistency,
    Meanfield,
}

impl Experiment {
    pub fn default_preset(self) -> Preset {
        match self {
            Experiment::Moments => Preset::Fig1,
            Experiment::Consistency | Experiment::Meanfield => Preset::Sec41,
        }
    }

    pub fn default_horizon(self) -> f64 {
        match self {
            Experiment::Moments => 100.0,
            Experiment::Consistency => 10.0,
            Experiment::Meanfield => 75.0,
        }
    }

    pub fn default_interval(self) -> f64 {
        match self {
            Experiment::Moments => 0.1,
            Experiment::Consistency => 0.5,
            Experiment::Meanfield => 0.1,
        }
    }
}

/// File layout; every key is optional.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(rename = "beta_N")]
    beta_n: Option<f64>,
    #[serde(rename = "beta_D")]
    beta_d: Option<f64>,
    #[serde(rename = "beta_M")]
    beta_m: Option<f64>,
    #[serde(rename = "beta_C")]
    beta_c: Option<f64>,
    #[serde(rename = "sigma2_N")]
    sigma2_n: Option<f64>,
    #[serde(rename = "sigma2_D")]
    sigma2_d: Option<f64>,
    #[serde(rename = "sigma2_M")]
    sigma2_m: Option<f64>,
    #[serde(rename = "sigma2_C")]
    sigma2_c: Option<f64>,
    #[serde(rename = "gamma_M")]
    gamma_m: Option<f64>,
    #[serde(rename = "gamma_C")]
    gamma_c: Option<f64>,
    nu_control: Option<f64>,
    epsilon: Option<f64>,
    preset: Option<Preset>,
    initial_means: Option<[f64; 4]>,
    initial_variance: Option<f64>,
    length: Option<f64>,
    n_x: Option<usize>,
    n_particles: Option<usize>,
    seed: Option<u64>,
    workers: Option<usize>,
    dt_max: Option<f64>,
    ode_dt: Option<f64>,
    epsilons: Option<Vec<f64>>,
    p_values: Option<Vec<f64>>,
    horizon: Option<f64>,
    report_interval: Option<f64>,
    output_dir: Option<PathBuf>,
}

/// Fully resolved configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub params: ParameterSet,
    /// Overrides the per-experiment preset when set.
    pub preset: Option<Preset>,
    /// Overrides the preset means when set.
    pub initial_means: Option<[f64; 4]>,
    pub initial_variance: f64,
    pub length: f64,
    pub n_x: usize,
    pub n_particles: usize,
    pub seed: u64,
    /// DSMC worker streams; `None` uses every rayon thread.
    pub workers: Option<usize>,
    /// Upper bound for the DSMC internal step.
    pub dt_max: f64,
    pub ode_dt: f64,
    pub epsilons: Vec<f64>,
    pub p_values: Vec<f64>,
    /// Overrides the per-experiment horizon when set.
    pub horizon: Option<f64>,
    pub report_interval: Option<f64>,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            params: ParameterSet::table1(),
            preset: None,
            initial_means: None,
            initial_variance: 0.1,
            length: 12.0,
            n_x: 801,
            n_particles: 100_000,
            seed: 2024,
            workers: None,
            dt_max: 0.5,
            ode_dt: 1e-2,
            epsilons: vec![1e-3, 1e-2, 1e-1, 5e-1],
            p_values: vec![0.625, 0.75, 0.875],
            horizon: None,
            report_interval: None,
            output_dir: PathBuf::from("out"),
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let raw: RawConfig = toml::from_str(text)?;
        let d = RunConfig::default();
        let mut params = d.params;
        let set = |slot: &mut f64, v: Option<f64>| {
            if let Some(v) = v {
                *slot = v;
            }
        };
        let PerPopulation([bn, bd, bm, bc]) = &mut params.beta;
        set(bn, raw.beta_n);
        set(bd, raw.beta_d);
        set(bm, raw.beta_m);
        set(bc, raw.beta_c);
        let PerPopulation([sn, sd, sm, sc]) = &mut params.sigma2;
        set(sn, raw.sigma2_n);
        set(sd, raw.sigma2_d);
        set(sm, raw.sigma2_m);
        set(sc, raw.sigma2_c);
        set(&mut params.gamma_m, raw.gamma_m);
        set(&mut params.gamma_c, raw.gamma_c);
        set(&mut params.nu_control, raw.nu_control);
        set(&mut params.epsilon, raw.epsilon);
        let cfg = RunConfig {
            params,
            preset: raw.preset,
            initial_means: raw.initial_means,
            initial_variance: raw.initial_variance.unwrap_or(d.initial_variance),
            length: raw.length.unwrap_or(d.length),
            n_x: raw.n_x.unwrap_or(d.n_x),
            n_particles: raw.n_particles.unwrap_or(d.n_particles),
            seed: raw.seed.unwrap_or(d.seed),
            workers: raw.workers.or(d.workers),
            dt_max: raw.dt_max.unwrap_or(d.dt_max),
            ode_dt: raw.ode_dt.unwrap_or(d.ode_dt),
            epsilons: raw.epsilons.unwrap_or(d.epsilons),
            p_values: raw.p_values.unwrap_or(d.p_values),
            horizon: raw.horizon,
            report_interval: raw.report_interval,
            output_dir: raw.output_dir.unwrap_or(d.output_dir),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Every problem found, as messages; empty when the configuration is usable.
    pub fn problems(&self) -> Vec<String> {
        let mut out: Vec<String> = self
            .params
            .validate()
            .violations
            .iter()
            .map(ToString::to_string)
            .collect();
        if self.params.nu_control > 1.0 {
            out.push(format!(
                "nu_control must not exceed 1 (got {}): the recruitment rule would turn negative",
                self.params.nu_control
            ));
        }
        if let Some(m) = self.initial_means {
            if m.iter().any(|&v| !(v > 0.0)) {
                out.push(format!("initial_means must all be positive (got {m:?})"));
            }
        }
        if !(self.initial_variance > 0.0) {
            out.push(format!("initial_variance must be positive (got {})", self.initial_variance));
        }
        if !(self.length > 0.0) {
            out.push(format!("length must be positive (got {})", self.length));
        }
        if self.n_x < 3 {
            out.push(format!("n_x must be at least 3 (got {})", self.n_x));
        }
        if self.n_particles == 0 {
            out.push("n_particles must be positive".into());
        }
        if self.workers == Some(0) {
            out.push("workers must be positive".into());
        }
        for (name, v) in [("dt_max", self.dt_max), ("ode_dt", self.ode_dt)] {
            if !(v > 0.0) {
                out.push(format!("{name} must be positive (got {v})"));
            }
        }
        if self.epsilons.is_empty() {
            out.push("epsilons must not be empty".into());
        }
        for &e in &self.epsilons {
            if !(e > 0.0 && e <= 1.0) {
                out.push(format!("epsilons entries must lie in the range (0,1] (got {e})"));
            }
        }
        if self.p_values.is_empty() {
            out.push("p_values must not be empty".into());
        }
        for &p in &self.p_values {
            if !(p > 0.5 && p < 1.0) {
                out.push(format!("p_values entries must lie in (1/2, 1) (got {p})"));
            }
        }
        if let Some(h) = self.horizon {
            if !(h >= 0.0) {
                out.push(format!("horizon must be nonnegative (got {h})"));
            }
        }
        if let Some(r) = self.report_interval {
            if !(r > 0.0) {
                out.push(format!("report_interval must be positive (got {r})"));
            }
        }
        out
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let problems = self.problems();
        if problems.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Invalid(problems))
        }
    }

    pub fn means_for(&self, exp: Experiment) -> [f64; 4] {
        self.initial_means
            .unwrap_or_else(|| self.preset.unwrap_or(exp.default_preset()).means())
    }

    pub fn horizon_for(&self, exp: Experiment) -> f64 {
        self.horizon.unwrap_or(exp.default_horizon())
    }

    pub fn interval_for(&self, exp: Experiment) -> f64 {
        self.report_interval.unwrap_or(exp.default_interval())
    }

    /// Width of the initial uniform boxes: variance `w^2 / 12`.
    pub fn initial_width(&self) -> f64 {
        (12.0 * self.initial_variance).sqrt()
    }
}

pub fn parse_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_owned(),
        source,
    })?;
    RunConfig::from_toml_str(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_reference_setup() {
        let cfg = RunConfig::from_toml_str("").unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(cfg.means_for(Experiment::Moments), [9.0, 1.0, 0.1, 0.5]);
        assert_eq!(cfg.means_for(Experiment::Meanfield), [9.0, 1.0, 0.6, 0.6]);
        assert!((cfg.initial_width() - 1.2f64.sqrt()).abs() < 1e-15);
        assert_eq!(cfg.horizon_for(Experiment::Meanfield), 75.0);
    }

    #[test]
    fn keys_override_defaults() {
        let cfg = RunConfig::from_toml_str(
            "beta_N = 0.3\nsigma2_C = 0.02\nnu_control = 0.1\npreset = \"sec41\"\nepsilons = [0.01]\n",
        )
        .unwrap();
        assert_eq!(cfg.params.beta.0[0], 0.3);
        assert_eq!(cfg.params.sigma2.0[3], 0.02);
        assert_eq!(cfg.params.nu_control, 0.1);
        assert_eq!(cfg.means_for(Experiment::Moments), [9.0, 1.0, 0.6, 0.6]);
        assert_eq!(cfg.epsilons, vec![0.01]);
    }

    #[test]
    fn unknown_key_is_named() {
        let err = RunConfig::from_toml_str("beta_X = 1.0").unwrap_err().to_string();
        assert!(err.contains("beta_X"), "{err}");
    }

    #[test]
    fn epsilon_out_of_range() {
        let err = RunConfig::from_toml_str("epsilon = 2").unwrap_err();
        let msg = err.to_string();
        assert!(matches!(err, ConfigError::Invalid(_)));
        assert!(msg.contains("(0,1]"), "{msg}");
    }

    #[test]
    fn infinite_variance_rejected() {
        let msg = RunConfig::from_toml_str("sigma2_N = 0.5\nbeta_N = 0.2")
            .unwrap_err()
            .to_string();
        assert!(msg.contains("σ² < 2β"), "{msg}");
    }

    #[test]
    fn malformed_values() {
        assert!(matches!(
            RunConfig::from_toml_str("beta_N = \"fast\""),
            Err(ConfigError::Parse(_))
        ));
        assert!(RunConfig::from_toml_str("p_values = [0.4]").is_err());
        assert!(RunConfig::from_toml_str("preset = \"fig9\"").is_err());
    }

    #[test]
    fn missing_file() {
        let err = parse_config(Path::new("/nonexistent/run.toml")).unwrap_err();
        assert!(matches!(err, ConfigError::Io { .. }));
    }

    #[test]
    fn preset_from_str() {
        assert_eq!("FIG1".parse::<Preset>().unwrap(), Preset::Fig1);
        assert!("x".parse::<Preset>().is_err());
    }
}
