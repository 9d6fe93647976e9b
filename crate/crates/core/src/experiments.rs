//! Sensor-network localization benchmark, escape-time and MSE metrics, and
//! the batch experiment runner.

use rand::{Rng, RngCore};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::densities::{log_sum_exp, squared_distance, Point, ProposalDensity, TargetDensity};
use crate::error::{check_dim, Error, Result};
use crate::samplers::{chain_rng, derive_seed, run_chain_with_rng, Imtm, Sampler, SamplingMode, TriesSchedule};
use crate::weights::WeightSpec;

/// Logarithm used in the path-loss mean.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LogBase {
    #[default]
    Natural,
    Base10,
}

impl LogBase {
    fn apply(self, v: f64) -> f64 {
        match self {
            LogBase::Natural => v.ln(),
            LogBase::Base10 => v.log10(),
        }
    }
}

/// Range observations rⱼ = slope·log(‖x − hⱼ‖ / d₀) + noise from fixed anchors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensorModel {
    pub anchors: Vec<[f64; 2]>,
    pub observations: Vec<f64>,
    pub noise_variance: f64,
    pub reference_distance: f64,
    pub log_base: LogBase,
    /// Path-loss slope. The default +10 reproduces the reference posterior
    /// mean [−0.753, −0.037]; the textbook decibel form is −10.
    pub slope: f64,
}

impl Default for SensorModel {
    fn default() -> Self {
        SensorModel {
            anchors: vec![[-5.0, 1.0], [-2.0, 6.0], [0.0, 0.0], [5.0, -6.0], [6.0, 4.0], [-4.0, -4.0]],
            observations: vec![26.0, 26.5, 25.0, 28.0, 28.0, 25.3],
            noise_variance: 5.0,
            reference_distance: 0.3,
            log_base: LogBase::Natural,
            slope: 10.0,
        }
    }
}

impl SensorModel {
    pub fn validate(&self) -> Result<()> {
        if self.anchors.is_empty() {
            return Err(Error::Config("sensor model needs at least one anchor".into()));
        }
        if self.anchors.len() != self.observations.len() {
            return Err(Error::Config(format!(
                "{} anchors but {} observations",
                self.anchors.len(),
                self.observations.len()
            )));
        }
        for (i, a) in self.anchors.iter().enumerate() {
            if !a.iter().all(|v| v.is_finite()) {
                return Err(Error::Config(format!("anchor {i} is not finite")));
            }
            if self.anchors[..i].contains(a) {
                return Err(Error::Config(format!("anchor {i} duplicates an earlier anchor")));
            }
        }
        if !self.observations.iter().all(|v| v.is_finite()) {
            return Err(Error::Config("observations must be finite".into()));
        }
        if !(self.noise_variance > 0.0 && self.noise_variance.is_finite()) {
            return Err(Error::Config("noise_variance must be positive".into()));
        }
        if !(self.reference_distance > 0.0 && self.reference_distance.is_finite()) {
            return Err(Error::Config("reference_distance must be positive".into()));
        }
        if !self.slope.is_finite() {
            return Err(Error::Config("slope must be finite".into()));
        }
        Ok(())
    }

    /// Unnormalized log posterior under a flat prior.
    pub fn target(&self) -> TargetDensity {
        let model = self.clone();
        TargetDensity::new(2, move |x| sensor_log_target(x, &model))
    }
}

/// Σⱼ −(rⱼ − μⱼ(x))² / (2σ²); −∞ on an anchor.
pub fn sensor_log_target(x: &[f64], model: &SensorModel) -> f64 {
    let mut sum = 0.0;
    for (h, r) in model.anchors.iter().zip(&model.observations) {
        let d = squared_distance(x, h).sqrt();
        if d == 0.0 {
            return f64::NEG_INFINITY;
        }
        let mu = model.slope * model.log_base.apply(d / model.reference_distance);
        sum -= (r - mu) * (r - mu);
    }
    sum / (2.0 * model.noise_variance)
}

/// Axis-aligned box.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Bounds {
    pub fn square(lo: f64, hi: f64) -> Self {
        Bounds {
            lower: vec![lo, lo],
            upper: vec![hi, hi],
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn validate(&self) -> Result<()> {
        check_dim(self.lower.len(), self.upper.len())?;
        if self.lower.is_empty() {
            return Err(Error::Config("box must have at least one axis".into()));
        }
        for (l, u) in self.lower.iter().zip(&self.upper) {
            if !(l.is_finite() && u.is_finite() && l < u) {
                return Err(Error::Config(format!("box axis [{l}, {u}] is empty or not finite")));
            }
        }
        Ok(())
    }

    pub fn sample_uniform(&self, rng: &mut dyn RngCore) -> Point {
        Point::new(
            self.lower
                .iter()
                .zip(&self.upper)
                .map(|(l, u)| l + (u - l) * rng.random::<f64>())
                .collect(),
        )
    }
}

/// Posterior mean by a normalized Riemann sum over a 2-d grid with
/// `resolution` equally spaced nodes per axis, endpoints included.
pub fn grid_posterior_mean(target: &TargetDensity, bounds: &Bounds, resolution: usize) -> Result<Point> {
    bounds.validate()?;
    check_dim(2, bounds.dim())?;
    check_dim(2, target.dim())?;
    if resolution < 100 {
        return Err(Error::Config(format!("grid resolution must be at least 100, got {resolution}")));
    }
    let axis = |k: usize| -> Vec<f64> {
        let (l, u) = (bounds.lower[k], bounds.upper[k]);
        (0..resolution)
            .map(|i| l + (u - l) * i as f64 / (resolution - 1) as f64)
            .collect()
    };
    let (xs, ys) = (axis(0), axis(1));
    let mut log_values = Vec::with_capacity(resolution * resolution);
    for x in &xs {
        for y in &ys {
            log_values.push(target.log_density(&[*x, *y])?);
        }
    }
    let log_total = log_sum_exp(&log_values);
    if log_total == f64::NEG_INFINITY {
        return Err(Error::Config("target is zero on every grid node".into()));
    }
    let mut mean = [0.0; 2];
    for (i, x) in xs.iter().enumerate() {
        for (j, y) in ys.iter().enumerate() {
            let w = (log_values[i * resolution + j] - log_total).exp();
            mean[0] += w * x;
            mean[1] += w * y;
        }
    }
    Ok(Point::from(mean))
}

/// First t ∈ [1, T] with ‖x_t − x₀‖ > ‖x_t − μ‖, or T when the chain never
/// crosses. `states` holds x₀…x_T.
pub fn escape_time(states: &[Point], x0: &[f64], mu: &[f64]) -> Result<usize> {
    let t_max = states.len().saturating_sub(1);
    if t_max == 0 {
        return Err(Error::Usage("escape time needs at least one iteration".into()));
    }
    check_dim(x0.len(), mu.len())?;
    Ok(states[1..]
        .iter()
        .position(|x| squared_distance(x, x0) > squared_distance(x, mu))
        .map_or(t_max, |i| i + 1))
}

/// Mean of all states, x₀ included.
pub fn chain_mean(states: &[Point]) -> Result<Point> {
    let first = states
        .first()
        .ok_or_else(|| Error::Usage("chain mean of an empty trace".into()))?;
    let mut mean = vec![0.0; first.dim()];
    for s in states {
        check_dim(mean.len(), s.dim())?;
        for (m, v) in mean.iter_mut().zip(s.iter()) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= states.len() as f64;
    }
    Ok(Point::new(mean))
}

/// ‖chain mean − μ‖².
pub fn squared_error(states: &[Point], mu_true: &[f64]) -> Result<f64> {
    let mean = chain_mean(states)?;
    check_dim(mean.dim(), mu_true.len())?;
    Ok(squared_distance(&mean, mu_true))
}

/// Average squared error of the chain means over runs.
pub fn mse_estimate<S: AsRef<[Point]>>(traces: &[S], mu_true: &[f64]) -> Result<f64> {
    if traces.is_empty() {
        return Err(Error::Usage("MSE needs at least one trace".into()));
    }
    let mut total = 0.0;
    for t in traces {
        total += squared_error(t.as_ref(), mu_true)?;
    }
    Ok(total / traces.len() as f64)
}

/// Sampler family of an experiment cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    RwStandard,
    RwVariableN,
    ImtmStandard,
    ImtmDm,
    ImtmMixture,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::RwStandard => "rw-standard",
            Scheme::RwVariableN => "rw-variable-n",
            Scheme::ImtmStandard => "imtm-standard",
            Scheme::ImtmDm => "imtm-dm",
            Scheme::ImtmMixture => "imtm-mixture",
        }
    }

    fn seed_id(self) -> u64 {
        match self {
            Scheme::RwStandard => 1,
            Scheme::RwVariableN => 2,
            Scheme::ImtmStandard => 3,
            Scheme::ImtmDm => 4,
            Scheme::ImtmMixture => 5,
        }
    }

    pub fn is_random_walk(self) -> bool {
        matches!(self, Scheme::RwStandard | Scheme::RwVariableN)
    }

    /// The kernel for one grid cell. For random-walk schemes `n_tilde` is the
    /// (mean) number of tries; for I-MTM schemes it is the total number of
    /// tries P, a multiple of the number of proposals.
    pub fn sampler(self, sigma: f64, n_tilde: usize, proposal_means: &[Vec<f64>]) -> Result<Sampler> {
        if n_tilde == 0 {
            return Err(Error::Config("n_tilde must be at least 1".into()));
        }
        match self {
            Scheme::RwStandard => Sampler::random_walk(
                ProposalDensity::random_walk_isotropic(2, sigma)?,
                TriesSchedule::Fixed(n_tilde),
            ),
            Scheme::RwVariableN => Sampler::random_walk(
                ProposalDensity::random_walk_isotropic(2, sigma)?,
                TriesSchedule::around(n_tilde),
            ),
            Scheme::ImtmStandard | Scheme::ImtmDm | Scheme::ImtmMixture => {
                let n = proposal_means.len();
                if n == 0 || !n_tilde.is_multiple_of(n) {
                    return Err(Error::Config(format!(
                        "I-MTM n_tilde {n_tilde} must be a positive multiple of the {n} proposals"
                    )));
                }
                let proposals = proposal_means
                    .iter()
                    .map(|m| ProposalDensity::independent_isotropic(Point::new(m.clone()), sigma))
                    .collect::<Result<Vec<_>>>()?;
                let (weights, mode) = match self {
                    Scheme::ImtmStandard => (WeightSpec::Importance, SamplingMode::PerProposal),
                    Scheme::ImtmDm => (WeightSpec::DeterministicMixture, SamplingMode::PerProposal),
                    _ => (WeightSpec::DeterministicMixture, SamplingMode::Mixture),
                };
                Ok(Sampler::Independent(Imtm::new(proposals, weights, mode, n_tilde / n)?))
            }
        }
    }
}

/// Initial state of every run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum StartMode {
    Fixed(Vec<f64>),
    /// Uniform over the experiment box, redrawn per run. Enables MSE.
    UniformBox,
}

fn default_box() -> Bounds {
    Bounds::square(-6.0, 6.0)
}

fn default_means() -> Vec<Vec<f64>> {
    vec![vec![-6.0, -6.0], vec![0.0, 0.0]]
}

fn default_mu() -> Vec<f64> {
    vec![-0.753, -0.037]
}

/// A grid of (scheme, σ, Ñ) cells, each run `runs` times.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schemes: Vec<Scheme>,
    pub sigma_grid: Vec<f64>,
    pub n_grid: Vec<usize>,
    pub runs: usize,
    pub chain_length: usize,
    pub x0: StartMode,
    #[serde(rename = "box", default = "default_box")]
    pub bounds: Bounds,
    pub master_seed: u64,
    #[serde(default = "default_means")]
    pub proposal_means: Vec<Vec<f64>>,
    #[serde(default = "default_mu")]
    pub mu: Vec<f64>,
    #[serde(default)]
    pub model: SensorModel,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.schemes.is_empty() || self.sigma_grid.is_empty() || self.n_grid.is_empty() {
            return Err(Error::Config("schemes, sigma_grid and n_grid must be non-empty".into()));
        }
        if self.runs == 0 {
            return Err(Error::Config("runs must be at least 1".into()));
        }
        if self.chain_length == 0 {
            return Err(Error::Config("chain_length must be at least 1".into()));
        }
        if let Some(s) = self.sigma_grid.iter().find(|s| !(**s > 0.0 && s.is_finite())) {
            return Err(Error::Config(format!("sigma {s} must be positive")));
        }
        self.bounds.validate()?;
        check_dim(2, self.bounds.dim())?;
        check_dim(2, self.mu.len())?;
        if let StartMode::Fixed(x0) = &self.x0 {
            check_dim(2, x0.len())?;
        }
        for m in &self.proposal_means {
            check_dim(2, m.len())?;
        }
        self.model.validate()?;
        for &scheme in &self.schemes {
            for &n in &self.n_grid {
                scheme.sampler(1.0, n, &self.proposal_means)?;
            }
        }
        Ok(())
    }

    /// Seed of a cell. Depends on cell values, not grid positions, so any
    /// cell reproduces in isolation or under a permuted grid.
    pub fn cell_seed(&self, scheme: Scheme, sigma: f64, n_tilde: usize) -> u64 {
        derive_seed(&[self.master_seed, scheme.seed_id(), sigma.to_bits(), n_tilde as u64])
    }
}

/// τ* and, under random starts, the squared error of one run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RunOutcome {
    pub tau: usize,
    pub squared_error: Option<f64>,
}

/// Aggregates of one (scheme, σ, Ñ) cell.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CellSummary {
    pub scheme: Scheme,
    pub sigma: f64,
    pub n_tilde: usize,
    pub runs: usize,
    pub runs_completed: usize,
    pub failures: Vec<String>,
    pub mean_tau: f64,
    pub tau_se: f64,
    pub mse: Option<f64>,
    pub mse_se: Option<f64>,
}

impl CellSummary {
    pub fn is_complete(&self) -> bool {
        self.failures.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentSummary {
    pub cells: Vec<CellSummary>,
}

impl ExperimentSummary {
    pub fn cell(&self, scheme: Scheme, sigma: f64, n_tilde: usize) -> Option<&CellSummary> {
        self.cells
            .iter()
            .find(|c| c.scheme == scheme && c.sigma == sigma && c.n_tilde == n_tilde)
    }
}

/// Mean and standard error of the mean.
fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// One run of a cell on stream `run` of `seed`.
pub fn run_single(
    config: &ExperimentConfig,
    sampler: &Sampler,
    target: &TargetDensity,
    seed: u64,
    run: usize,
) -> Result<RunOutcome> {
    let mut rng = chain_rng(seed, run as u64);
    let x0 = match &config.x0 {
        StartMode::Fixed(x) => Point::new(x.clone()),
        StartMode::UniformBox => config.bounds.sample_uniform(&mut rng),
    };
    let trace = run_chain_with_rng(sampler, target, x0.clone(), config.chain_length, &mut rng)?;
    let tau = escape_time(&trace.states, &x0, &config.mu)?;
    let squared_error = match config.x0 {
        StartMode::UniformBox => Some(squared_error(&trace.states, &config.mu)?),
        StartMode::Fixed(_) => None,
    };
    Ok(RunOutcome { tau, squared_error })
}

/// Runs one cell, in parallel over runs.
pub fn run_cell(config: &ExperimentConfig, scheme: Scheme, sigma: f64, n_tilde: usize) -> Result<CellSummary> {
    let sampler = scheme.sampler(sigma, n_tilde, &config.proposal_means)?;
    let target = config.model.target();
    let seed = config.cell_seed(scheme, sigma, n_tilde);
    let outcomes: Vec<Result<RunOutcome>> = (0..config.runs)
        .into_par_iter()
        .map(|run| run_single(config, &sampler, &target, seed, run))
        .collect();

    let mut taus = Vec::with_capacity(config.runs);
    let mut errors = Vec::new();
    let mut failures = Vec::new();
    for (run, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(o) => {
                taus.push(o.tau as f64);
                errors.extend(o.squared_error);
            }
            Err(e) => failures.push(format!("run {run}: {e}")),
        }
    }
    let (mean_tau, tau_se) = mean_and_se(&taus);
    let (mse, mse_se) = match config.x0 {
        StartMode::UniformBox if !errors.is_empty() => {
            let (m, s) = mean_and_se(&errors);
            (Some(m), Some(s))
        }
        _ => (None, None),
    };
    Ok(CellSummary {
        scheme,
        sigma,
        n_tilde,
        runs: config.runs,
        runs_completed: taus.len(),
        failures,
        mean_tau,
        tau_se,
        mse,
        mse_se,
    })
}

/// Every cell of the grid, ordered by scheme, then σ, then Ñ.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentSummary> {
    config.validate()?;
    let mut cells = Vec::new();
    for &scheme in &config.schemes {
        for &sigma in &config.sigma_grid {
            for &n in &config.n_grid {
                cells.push(run_cell(config, scheme, sigma, n)?);
            }
        }
    }
    Ok(ExperimentSummary { cells })
}
