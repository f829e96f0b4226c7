use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::homog::{Convention, PlanarDrift};
use crate::maps::{MapDescriptor, MapKind};

/// The named experiments the runner can dispatch.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    DiagnoseGordin,
    Decompose,
    Wip,
    IteratedWip,
    Sigma,
    Homogenise,
    InequalitySuite,
    Robustness,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 8] = [
        ExperimentKind::DiagnoseGordin,
        ExperimentKind::Decompose,
        ExperimentKind::Wip,
        ExperimentKind::IteratedWip,
        ExperimentKind::Sigma,
        ExperimentKind::Homogenise,
        ExperimentKind::InequalitySuite,
        ExperimentKind::Robustness,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::DiagnoseGordin => "diagnose-gordin",
            ExperimentKind::Decompose => "decompose",
            ExperimentKind::Wip => "wip",
            ExperimentKind::IteratedWip => "iterated-wip",
            ExperimentKind::Sigma => "sigma",
            ExperimentKind::Homogenise => "homogenise",
            ExperimentKind::InequalitySuite => "inequality-suite",
            ExperimentKind::Robustness => "robustness",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapSpec {
    pub kind: MapKind,
    #[serde(default)]
    pub gamma: f64,
    #[serde(default = "half")]
    pub fiber_contraction: f64,
}

fn half() -> f64 {
    0.5
}

impl MapSpec {
    pub fn descriptor(&self) -> Result<MapDescriptor> {
        MapDescriptor::new(self.kind, self.gamma, self.fiber_contraction)
    }
}

/// Observables selectable by name. `centered-base` is `x` minus its
/// invariant mean, which is computed on the Ulam grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObservableSpec {
    CenteredX,
    CenteredBase,
    Cosine,
    Coboundary,
    DoublingPair,
    DegeneratePair,
    CenteredY,
    BakerPair,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BasisChoice {
    /// Piecewise linear on Lebesgue-preserving bases, constant otherwise.
    #[default]
    Auto,
    Constant,
    Linear,
}

/// Where lag correlations come from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CorrelationChoice {
    #[default]
    MonteCarlo,
    Ulam,
}

/// Numeric parameters; every field has a default.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Params {
    /// Orbit length `n` behind `W_n`.
    pub n: usize,
    pub replicas: usize,
    /// Lag cutoff `J`.
    pub lags: usize,
    /// Truncation `k` of the coboundary series; chosen automatically if absent.
    pub truncation: Option<usize>,
    pub epsilon: f64,
    /// Ulam grid size `N`.
    pub grid: usize,
    pub samples_per_cell: usize,
    pub basis: BasisChoice,
    pub n_max: usize,
    /// Path horizon `K` in units of `n`.
    pub horizon: f64,
    pub correlations: CorrelationChoice,
    /// Orbit steps spent on Monte Carlo correlations.
    pub mc_budget: usize,
    pub batches: usize,
    pub sde_replicas: usize,
    pub drift: PlanarDrift,
    pub convention: Convention,
    /// Initial law `U[nu_lo, nu_hi)` for the robustness experiment.
    pub nu_lo: f64,
    pub nu_hi: f64,
    pub degeneracy_tol: f64,
}

impl Default for Params {
    fn default() -> Self {
        Self {
            n: 10_000,
            replicas: 2000,
            lags: 60,
            truncation: None,
            epsilon: 0.01,
            grid: 4096,
            samples_per_cell: 64,
            basis: BasisChoice::Auto,
            n_max: 20,
            horizon: 1.0,
            correlations: CorrelationChoice::MonteCarlo,
            mc_budget: 20_000_000,
            batches: 32,
            sde_replicas: 20_000,
            drift: PlanarDrift::NegSecond,
            convention: Convention::Proposition,
            nu_lo: 0.0,
            nu_hi: 0.5,
            degeneracy_tol: crate::processes::DEFAULT_DEGENERACY_TOL,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub map: MapSpec,
    pub observable: ObservableSpec,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub params: Params,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn config_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}

fn check_range<T: PartialOrd + fmt::Display + Copy>(name: &str, x: T, lo: T, hi: T) -> Result<()> {
    if x < lo || x > hi {
        return config_err(format!("{name} = {x} outside [{lo}, {hi}]"));
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Checks every numeric parameter against its documented range.
    pub fn validate(&self) -> Result<()> {
        self.map.descriptor()?;
        let p = &self.params;
        check_range("n", p.n, 1, 100_000_000)?;
        check_range("replicas", p.replicas, 2, 1_000_000)?;
        check_range("lags", p.lags, 1, 100_000)?;
        if let Some(k) = p.truncation {
            check_range("truncation", k, 1, 10_000)?;
        }
        if !(p.epsilon > 0.0 && p.epsilon <= 0.1) {
            return config_err(format!("epsilon = {} outside (0, 0.1]", p.epsilon));
        }
        check_range("grid", p.grid, 64, 1 << 22)?;
        check_range("samples_per_cell", p.samples_per_cell, 32, 4096)?;
        check_range("n_max", p.n_max, 8, 10_000)?;
        if !(p.horizon > 0.0 && p.horizon <= 100.0) {
            return config_err(format!("horizon = {} outside (0, 100]", p.horizon));
        }
        check_range("batches", p.batches, 2, 1024)?;
        if p.mc_budget < p.batches * (p.lags + 1) * 10 {
            return config_err(format!(
                "mc_budget = {} is too small for {} batches of {} lags",
                p.mc_budget, p.batches, p.lags
            ));
        }
        check_range("sde_replicas", p.sde_replicas, 2, 10_000_000)?;
        if !(0.0 <= p.nu_lo && p.nu_lo < p.nu_hi && p.nu_hi <= 1.0) {
            return config_err(format!(
                "initial law [{}, {}) is not a subinterval of [0, 1]",
                p.nu_lo, p.nu_hi
            ));
        }
        if !(p.degeneracy_tol > 0.0) {
            return config_err("degeneracy_tol must be positive");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
experiment = "sigma"
observable = "centered-x"
[map]
kind = "doubling"
"#;

    #[test]
    fn defaults_fill_in() {
        let cfg = ExperimentConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(cfg.experiment, ExperimentKind::Sigma);
        assert_eq!(cfg.params, Params::default());
        assert_eq!(cfg.output_dir, PathBuf::from("out"));
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(ExperimentConfig::from_toml(&format!("{MINIMAL}colour = 3\n")).is_err());
        let text = format!("{MINIMAL}[params]\nreplica = 10\n");
        assert!(matches!(
            ExperimentConfig::from_toml(&text),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn ranges_enforced() {
        let lsv = |g: f64| {
            format!("experiment = \"wip\"\nobservable = \"centered-base\"\n[map]\nkind = \"lsv\"\ngamma = {g}\n")
        };
        assert!(ExperimentConfig::from_toml(&lsv(0.25)).is_ok());
        assert!(matches!(
            ExperimentConfig::from_toml(&lsv(1.5)),
            Err(Error::Domain(_))
        ));
        for bad in ["epsilon = 0.5", "replicas = 1", "grid = 8", "nu_lo = 0.7"] {
            let text = format!("{MINIMAL}[params]\n{bad}\n");
            assert!(ExperimentConfig::from_toml(&text).is_err(), "{bad}");
        }
    }

    #[test]
    fn names_round_trip() {
        for kind in ExperimentKind::ALL {
            let text = format!(
                "experiment = \"{kind}\"\nobservable = \"cosine\"\n[map]\nkind = \"doubling\"\n"
            );
            assert_eq!(ExperimentConfig::from_toml(&text).unwrap().experiment, kind);
        }
    }
}
