//! Configuration documents for each subcommand. Unknown keys are errors.

use std::path::Path;

use mtm_core::experiments::{Bounds, ExperimentConfig, Scheme, SensorModel};
use mtm_core::oracle::{DiscreteProposal, DiscreteSpace};
use mtm_core::samplers::{Imtm, Sampler, SamplingMode, TriesSchedule};
use mtm_core::weights::{Lambda, WeightSpec};
use mtm_core::{Point, TargetDensity};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Reads and parses a JSON config, reporting parse errors with line and column.
///
/// A run manifest is accepted in place of a config; its embedded config is used.
pub fn load<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let located = |e: serde_json::Error| {
        CliError::Config(format!(
            "{}:{}:{}: {e}",
            path.display(),
            e.line(),
            e.column()
        ))
    };
    if let Ok(serde_json::Value::Object(mut map)) = serde_json::from_str::<serde_json::Value>(&text) {
        if map.contains_key("command") && map.contains_key("version") {
            if let Some(inner) = map.remove("config") {
                return serde_json::from_value(inner)
                    .map_err(|e| CliError::Config(format!("{}: manifest config: {e}", path.display())));
            }
        }
    }
    serde_json::from_str(&text).map_err(located)
}

fn default_mu() -> Vec<f64> {
    vec![-0.753, -0.037]
}

fn default_means() -> Vec<Vec<f64>> {
    vec![vec![-6.0, -6.0], vec![0.0, 0.0]]
}

/// Single chain on the sensor target.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scheme: Scheme,
    pub sigma: f64,
    /// Tries for random-walk schemes, total tries P for I-MTM schemes.
    pub n_tilde: usize,
    /// Replaces the {1, Ñ, 2Ñ − 1} schedule of rw-variable-n.
    #[serde(default)]
    pub schedule: Option<Vec<usize>>,
    pub chain_length: usize,
    pub x0: Vec<f64>,
    pub seed: u64,
    #[serde(default = "default_means")]
    pub proposal_means: Vec<Vec<f64>>,
    #[serde(default = "default_mu")]
    pub mu: Vec<f64>,
    #[serde(default)]
    pub model: SensorModel,
}

impl RunConfig {
    pub fn sampler(&self) -> CliResult<Sampler> {
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(CliError::Config(format!("sigma {} must be positive", self.sigma)));
        }
        if self.chain_length == 0 {
            return Err(CliError::Config("chain_length must be at least 1".into()));
        }
        if self.x0.len() != 2 || !self.x0.iter().all(|v| v.is_finite()) {
            return Err(CliError::Config("x0 must be a finite 2-d point".into()));
        }
        self.model.validate()?;
        match (&self.schedule, self.scheme) {
            (None, s) => Ok(s.sampler(self.sigma, self.n_tilde, &self.proposal_means)?),
            (Some(values), Scheme::RwVariableN) => Ok(Sampler::random_walk(
                mtm_core::ProposalDensity::random_walk_isotropic(2, self.sigma)?,
                TriesSchedule::Variable(values.clone()),
            )?),
            (Some(_), s) => Err(CliError::Config(format!(
                "schedule is only valid for rw-variable-n, not {}",
                s.name()
            ))),
        }
    }
}

/// Batch experiment; the core config with its schema.
pub type ExperimentFile = ExperimentConfig;

/// Weight family of an exact-kernel check.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OracleWeights {
    Importance,
    DeterministicMixture,
    /// Generic weights π(z) q(x) with λ ≡ 1.
    LiuUnit,
    /// Generic weights with λ = 1/(q(x) q(z)), which recover importance weights.
    LiuImportance,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum OracleVariant {
    RwMtm {
        tries: usize,
    },
    VariableN {
        schedule: Vec<usize>,
    },
    Imtm {
        proposals: Vec<Vec<f64>>,
        weights: OracleWeights,
        #[serde(default = "per_proposal")]
        mode: SamplingMode,
        #[serde(default = "one")]
        tries_per_proposal: usize,
    },
}

fn per_proposal() -> SamplingMode {
    SamplingMode::PerProposal
}

fn one() -> usize {
    1
}

/// Adds `amount` to one kernel entry before checking (negative control).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Perturbation {
    pub row: usize,
    pub col: usize,
    pub amount: f64,
}

fn exact_tolerance() -> f64 {
    1e-12
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    pub target: Vec<f64>,
    /// Conditional proposal rows; uniform rows when omitted.
    #[serde(default)]
    pub proposal: Option<Vec<Vec<f64>>>,
    pub variant: OracleVariant,
    #[serde(default)]
    pub perturb: Option<Perturbation>,
    #[serde(default = "exact_tolerance")]
    pub tolerance: f64,
    /// Also estimate the kernel from this many production steps per state.
    #[serde(default)]
    pub mc_samples: Option<usize>,
    #[serde(default)]
    pub seed: u64,
}

impl OracleConfig {
    pub fn space(&self) -> CliResult<DiscreteSpace> {
        let n = self.target.len();
        let rows = self
            .proposal
            .clone()
            .unwrap_or_else(|| vec![vec![1.0 / n as f64; n]; n]);
        Ok(DiscreteSpace::new(self.target.clone(), rows)?)
    }

    pub fn imtm(&self) -> CliResult<Option<Imtm<DiscreteProposal>>> {
        let OracleVariant::Imtm {
            proposals,
            weights,
            mode,
            tries_per_proposal,
        } = &self.variant
        else {
            return Ok(None);
        };
        let ps = proposals
            .iter()
            .map(|p| DiscreteProposal::independent(p.clone()))
            .collect::<mtm_core::Result<Vec<_>>>()?;
        let spec = match weights {
            OracleWeights::Importance => WeightSpec::Importance,
            OracleWeights::DeterministicMixture => WeightSpec::DeterministicMixture,
            OracleWeights::LiuUnit => WeightSpec::Liu(Lambda::new(|_, _, _| 1.0)),
            OracleWeights::LiuImportance => WeightSpec::Liu(Lambda::importance_recovering(ps.clone())),
        };
        Ok(Some(Imtm::new(ps, spec, *mode, *tries_per_proposal)?))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum GridTarget {
    Sensor(SensorModel),
    /// Isotropic Gaussian, for checking the integrator.
    Gaussian { mean: Vec<f64>, sigma: f64 },
}

impl GridTarget {
    pub fn density(&self) -> CliResult<TargetDensity> {
        match self {
            GridTarget::Sensor(model) => {
                model.validate()?;
                Ok(model.target())
            }
            GridTarget::Gaussian { mean, sigma } => {
                if mean.len() != 2 {
                    return Err(CliError::Config("gaussian mean must be 2-d".into()));
                }
                let q = mtm_core::ProposalDensity::independent_isotropic(Point::new(mean.clone()), *sigma)?;
                Ok(TargetDensity::new(2, move |x| {
                    mtm_core::Proposal::log_density(&q, x, None).unwrap_or(f64::NAN)
                }))
            }
        }
    }
}

fn default_grid_target() -> GridTarget {
    GridTarget::Sensor(SensorModel::default())
}

fn default_grid_box() -> Bounds {
    Bounds::square(-10.0, 10.0)
}

fn default_resolution() -> usize {
    400
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default = "default_grid_target")]
    pub target: GridTarget,
    #[serde(rename = "box", default = "default_grid_box")]
    pub bounds: Bounds,
    #[serde(default = "default_resolution")]
    pub resolution: usize,
    #[serde(default)]
    pub reference: Option<Vec<f64>>,
    /// Fail when a coordinate differs from the reference by more than this.
    #[serde(default)]
    pub tolerance: Option<f64>,
}
