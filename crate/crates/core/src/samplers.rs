//! Multiple-try Metropolis kernels and the chain runner.
//!
//! # Random stream discipline
//!
//! Every chain owns one [`ChainRng`]. Within an iteration the draws are
//! consumed in this order:
//!
//! 1. the schedule index, for variable-N kernels with more than one entry;
//! 2. the candidates, in slot order (mixture sampling draws the component
//!    index before each candidate);
//! 3. one Gumbel variate per candidate for the selection;
//! 4. the auxiliary points: N − 1 reverse draws for RW-MTM, or the component
//!    of the previous state followed by the refreshed points for stratified
//!    DM weights;
//! 5. one uniform variate for the accept/reject decision.
//!
//! An iteration whose candidates all have zero weight stops after step 2 and
//! counts as a rejection with α = 0.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::densities::{log_sum_exp, mixture_log_density, Point, Proposal, ProposalDensity, TargetDensity};
use crate::error::{check_dim, Error, Result};
use crate::weights::{combine_importance, normalize_and_select, WeightSpec};

/// Random stream owned by one chain.
pub type ChainRng = ChaCha8Rng;

/// The stream for run `stream` under `seed`.
///
/// Streams with equal seed and different stream index are independent
/// ChaCha streams, so runs can execute in any order.
pub fn chain_rng(seed: u64, stream: u64) -> ChainRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds a tuple of identifiers into one seed with SplitMix64 finalizers.
pub fn derive_seed(parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(0x6A09_E667_F3BC_C909, |acc, p| splitmix64(acc ^ splitmix64(*p)))
}

/// Number of tries per iteration.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TriesSchedule {
    Fixed(usize),
    /// One entry drawn uniformly per iteration.
    Variable(Vec<usize>),
}

impl TriesSchedule {
    /// The three-kernel schedule {1, Ñ, 2Ñ − 1}, whose mean is Ñ.
    pub fn around(n_tilde: usize) -> Self {
        TriesSchedule::Variable(vec![1, n_tilde, (2 * n_tilde).saturating_sub(1)])
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            TriesSchedule::Fixed(0) => Err(Error::Config("number of tries must be at least 1".into())),
            TriesSchedule::Fixed(_) => Ok(()),
            TriesSchedule::Variable(values) if values.is_empty() => {
                Err(Error::Config("variable schedule must not be empty".into()))
            }
            TriesSchedule::Variable(values) if values.contains(&0) => {
                Err(Error::Config("schedule entries must be positive".into()))
            }
            TriesSchedule::Variable(_) => Ok(()),
        }
    }

    pub fn mean_tries(&self) -> f64 {
        match self {
            TriesSchedule::Fixed(n) => *n as f64,
            TriesSchedule::Variable(v) => v.iter().sum::<usize>() as f64 / v.len() as f64,
        }
    }
}

/// Where the I-MTM candidates come from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplingMode {
    /// k candidates from each proposal, in proposal order.
    PerProposal,
    /// Every candidate from the equal mixture ψ of the proposals.
    Mixture,
}

/// Diagnostics of one iteration.
#[derive(Clone, Debug, PartialEq)]
pub struct IterationRecord {
    pub n_used: usize,
    pub alpha: f64,
    pub accepted: bool,
    /// The tested candidate; also kept for rejected iterations. `None` when
    /// every candidate had zero weight.
    pub selected_candidate: Option<Point>,
    /// ln Ẑ₁, the forward normalizing-constant estimate.
    pub log_z_hat_num: f64,
    /// ln Ẑ₂, the reverse estimate. NaN when it was not computed.
    pub log_z_hat_den: f64,
}

impl IterationRecord {
    pub fn z_hat_num(&self) -> f64 {
        self.log_z_hat_num.exp()
    }

    pub fn z_hat_den(&self) -> f64 {
        self.log_z_hat_den.exp()
    }

    fn degenerate(n_used: usize) -> Self {
        IterationRecord {
            n_used,
            alpha: 0.0,
            accepted: false,
            selected_candidate: None,
            log_z_hat_num: f64::NEG_INFINITY,
            log_z_hat_den: f64::NAN,
        }
    }
}

/// Outcome of one kernel application.
#[derive(Clone, Debug, PartialEq)]
pub struct Step {
    pub state: Point,
    pub record: IterationRecord,
}

impl Step {
    fn degenerate(x_prev: &Point, n_used: usize) -> Self {
        Step {
            state: x_prev.clone(),
            record: IterationRecord::degenerate(n_used),
        }
    }

    fn decide(
        x_prev: &Point,
        selected: Point,
        log_ratio: f64,
        log_num_sum: f64,
        log_den_sum: f64,
        n_used: usize,
        rng: &mut dyn RngCore,
    ) -> Self {
        let alpha = acceptance_probability(log_ratio);
        let accepted = rng.random::<f64>() < alpha;
        let ln_n = (n_used as f64).ln();
        Step {
            state: if accepted { selected.clone() } else { x_prev.clone() },
            record: IterationRecord {
                n_used,
                alpha,
                accepted,
                selected_candidate: Some(selected),
                log_z_hat_num: log_num_sum - ln_n,
                log_z_hat_den: log_den_sum - ln_n,
            },
        }
    }
}

/// min(1, exp(log_ratio)).
pub fn acceptance_probability(log_ratio: f64) -> f64 {
    debug_assert!(!log_ratio.is_nan());
    if log_ratio >= 0.0 {
        1.0
    } else {
        log_ratio.exp()
    }
}

/// π(v)/q for a point that need not be a draw from q: +∞ when q vanishes
/// and π does not, so that an impossible reverse move forces α = 0.
fn reverse_log_weight(log_pi: f64, log_q: f64) -> f64 {
    if log_q == f64::NEG_INFINITY {
        if log_pi == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            f64::INFINITY
        }
    } else {
        log_pi - log_q
    }
}

/// Importance log-weights w(zₖ|x) = π(zₖ)/q(zₖ|x) of RW-MTM candidates.
pub fn rw_candidate_log_weights<P: Proposal + ?Sized>(
    target: &TargetDensity,
    proposal: &P,
    x_prev: &[f64],
    candidates: &[Point],
) -> Result<Vec<f64>> {
    candidates
        .iter()
        .map(|z| {
            let log_q = proposal.log_density(z, Some(x_prev))?;
            combine_importance(target.log_density(z)?, log_q, z)
        })
        .collect()
}

/// Log-weights w(yₖ|z) of the auxiliary points followed by y_N = x_prev.
pub fn rw_auxiliary_log_weights<P: Proposal + ?Sized>(
    target: &TargetDensity,
    proposal: &P,
    selected: &[f64],
    auxiliary: &[Point],
    x_prev: &[f64],
) -> Result<Vec<f64>> {
    let mut weights = rw_candidate_log_weights(target, proposal, selected, auxiliary)?;
    let log_q = proposal.log_density(x_prev, Some(selected))?;
    weights.push(reverse_log_weight(target.log_density(x_prev)?, log_q));
    Ok(weights)
}

/// ln(Ẑ₁/Ẑ₂) = ln Σ w(zₙ|x) − ln Σ w(yₙ|z).
pub fn rw_mtm_log_ratio(candidate_log_weights: &[f64], auxiliary_log_weights: &[f64]) -> f64 {
    log_sum_exp(candidate_log_weights) - log_sum_exp(auxiliary_log_weights)
}

/// One RW-MTM iteration with `n_tries` candidates drawn from q(·|x_prev).
pub fn rw_mtm_step<P: Proposal + ?Sized>(
    x_prev: &Point,
    target: &TargetDensity,
    proposal: &P,
    n_tries: usize,
    rng: &mut dyn RngCore,
) -> Result<Step> {
    if n_tries == 0 {
        return Err(Error::Usage("RW-MTM needs at least one try".into()));
    }
    let candidates = (0..n_tries)
        .map(|_| proposal.sample(Some(x_prev), rng))
        .collect::<Result<Vec<_>>>()?;
    let candidate_lw = rw_candidate_log_weights(target, proposal, x_prev, &candidates)?;
    let Some(selection) = normalize_and_select(&candidate_lw, rng) else {
        return Ok(Step::degenerate(x_prev, n_tries));
    };
    let z = candidates.into_iter().nth(selection.index).expect("index in range");
    let auxiliary = (1..n_tries)
        .map(|_| proposal.sample(Some(&z), rng))
        .collect::<Result<Vec<_>>>()?;
    let auxiliary_lw = rw_auxiliary_log_weights(target, proposal, &z, &auxiliary, x_prev)?;
    let log_ratio = rw_mtm_log_ratio(&candidate_lw, &auxiliary_lw);
    Ok(Step::decide(
        x_prev,
        z,
        log_ratio,
        log_sum_exp(&candidate_lw),
        log_sum_exp(&auxiliary_lw),
        n_tries,
        rng,
    ))
}

/// One iteration of the uniform mixture of RW-MTM kernels: the number of
/// tries is drawn uniformly from `schedule`. A single-entry schedule draws
/// nothing and matches [`rw_mtm_step`] exactly.
pub fn variable_n_step<P: Proposal + ?Sized>(
    x_prev: &Point,
    target: &TargetDensity,
    proposal: &P,
    schedule: &[usize],
    rng: &mut dyn RngCore,
) -> Result<Step> {
    let n_tries = match schedule {
        [] => return Err(Error::Usage("variable schedule must not be empty".into())),
        [n] => *n,
        _ => schedule[rng.random_range(0..schedule.len())],
    };
    rw_mtm_step(x_prev, target, proposal, n_tries, rng)
}

/// How an I-MTM configuration turns the selected candidate into α.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AcceptanceRule {
    /// min[1, Σwₙ(zₙ) / (Σwₙ(zₙ) − w_j(z_j) + w_j(x))], for importance
    /// weights (and π/ψ weights under mixture sampling).
    SwapSelected,
    /// The generic-weight rule with W_Z and W_X; the reverse weights are
    /// evaluated from the selected candidate.
    GenericWeights,
    /// π/ψ weights on stratified candidates: the previous state is assigned
    /// a component with probability q_m(x)/Σ q, the remaining P − 1
    /// auxiliary points are redrawn one block per component, and
    /// α = min[1, Σ w(zₙ) / (w(x) + Σ w(yₙ))].
    RefreshedAuxiliary,
}

/// Multiple-try Metropolis with independent proposals q₁…q_N.
#[derive(Clone, Debug)]
pub struct Imtm<P = ProposalDensity> {
    proposals: Vec<P>,
    weights: WeightSpec,
    mode: SamplingMode,
    tries_per_proposal: usize,
}

impl<P: Proposal> Imtm<P> {
    pub fn new(
        proposals: Vec<P>,
        weights: WeightSpec,
        mode: SamplingMode,
        tries_per_proposal: usize,
    ) -> Result<Self> {
        let first = proposals
            .first()
            .ok_or_else(|| Error::Config("I-MTM needs at least one proposal".into()))?;
        let dim = first.dim();
        for p in &proposals {
            check_dim(dim, p.dim())?;
            if p.is_conditional() {
                return Err(Error::Config("I-MTM proposals must be independent".into()));
            }
        }
        if tries_per_proposal == 0 {
            return Err(Error::Config("tries per proposal must be at least 1".into()));
        }
        Ok(Imtm {
            proposals,
            weights,
            mode,
            tries_per_proposal,
        })
    }

    pub fn proposals(&self) -> &[P] {
        &self.proposals
    }

    pub fn weights(&self) -> &WeightSpec {
        &self.weights
    }

    pub fn mode(&self) -> SamplingMode {
        self.mode
    }

    pub fn tries_per_proposal(&self) -> usize {
        self.tries_per_proposal
    }

    pub fn dim(&self) -> usize {
        self.proposals[0].dim()
    }

    /// P = kN.
    pub fn total_tries(&self) -> usize {
        self.tries_per_proposal * self.proposals.len()
    }

    pub fn acceptance_rule(&self) -> AcceptanceRule {
        match (&self.weights, self.mode) {
            (WeightSpec::Liu(_), _) => AcceptanceRule::GenericWeights,
            (WeightSpec::DeterministicMixture, SamplingMode::PerProposal) => {
                AcceptanceRule::RefreshedAuxiliary
            }
            _ => AcceptanceRule::SwapSelected,
        }
    }

    /// Proposal index owning `slot` under per-proposal sampling.
    pub fn slot_proposal(&self, slot: usize) -> usize {
        slot / self.tries_per_proposal
    }

    /// ln ψ(v).
    pub fn mixture_log_density(&self, v: &[f64]) -> Result<f64> {
        mixture_log_density(v, &self.proposals)
    }

    /// ln of the density that generates `slot`: q of the slot's proposal, or ψ.
    pub fn slot_log_density(&self, slot: usize, v: &[f64]) -> Result<f64> {
        match self.mode {
            SamplingMode::PerProposal => self.proposals[self.slot_proposal(slot)].log_density(v, None),
            SamplingMode::Mixture => self.mixture_log_density(v),
        }
    }

    /// ln w_slot(v) with `reference` the state the weights are computed from.
    /// Only Liu weights depend on `reference`.
    pub fn log_weight(&self, log_pi: f64, slot: usize, v: &[f64], reference: &[f64]) -> Result<f64> {
        match &self.weights {
            WeightSpec::Importance => Ok(reverse_log_weight(log_pi, self.slot_log_density(slot, v)?)),
            WeightSpec::DeterministicMixture => Ok(reverse_log_weight(log_pi, self.mixture_log_density(v)?)),
            WeightSpec::Liu(lambda) => {
                let log_lambda = lambda.log_value(self.slot_proposal(slot), v, reference)?;
                Ok(log_pi + self.slot_log_density(slot, reference)? + log_lambda)
            }
        }
    }

    /// Weights of the candidates, computed from `x_prev`.
    pub fn candidate_log_weights(
        &self,
        log_pi: &[f64],
        candidates: &[Point],
        x_prev: &[f64],
    ) -> Result<Vec<f64>> {
        candidates
            .iter()
            .zip(log_pi)
            .enumerate()
            .map(|(slot, (z, lp))| {
                let w = self.log_weight(*lp, slot, z, x_prev)?;
                if w == f64::INFINITY {
                    return Err(Error::Invariant(format!(
                        "proposal density is zero at its own draw {z:?}"
                    )));
                }
                Ok(w)
            })
            .collect()
    }

    /// Proposals generating the refreshed auxiliary points when the previous
    /// state is attributed to component `m`: k − 1 from q_m, k from the rest.
    pub fn refresh_layout(&self, m: usize) -> Vec<usize> {
        (0..self.proposals.len())
            .flat_map(|n| {
                let count = self.tries_per_proposal - usize::from(n == m);
                std::iter::repeat_n(n, count)
            })
            .collect()
    }

    /// ln q_m(x) for every component.
    pub fn component_log_densities(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.proposals.iter().map(|q| q.log_density(x, None)).collect()
    }

    fn sample_candidates(&self, rng: &mut dyn RngCore) -> Result<Vec<Point>> {
        match self.mode {
            SamplingMode::PerProposal => self
                .proposals
                .iter()
                .flat_map(|q| std::iter::repeat_n(q, self.tries_per_proposal))
                .map(|q| q.sample(None, rng))
                .collect(),
            SamplingMode::Mixture => (0..self.total_tries())
                .map(|_| {
                    let m = rng.random_range(0..self.proposals.len());
                    self.proposals[m].sample(None, rng)
                })
                .collect(),
        }
    }

    /// Weights of the reverse tuple (candidates with slot `selected` replaced
    /// by `x_prev`), computed from the selected candidate.
    pub fn reverse_log_weights(
        &self,
        log_pi: &[f64],
        candidates: &[Point],
        selected: usize,
        x_prev: &[f64],
        log_pi_prev: f64,
    ) -> Result<Vec<f64>> {
        let z = &candidates[selected];
        (0..candidates.len())
            .map(|slot| {
                if slot == selected {
                    self.log_weight(log_pi_prev, slot, x_prev, z)
                } else {
                    self.log_weight(log_pi[slot], slot, &candidates[slot], z)
                }
            })
            .collect()
    }

    /// ln of the generic-weight acceptance ratio for the selected slot.
    pub fn generic_log_ratio(
        &self,
        log_pi: &[f64],
        candidates: &[Point],
        forward: &[f64],
        selected: usize,
        x_prev: &[f64],
        log_pi_prev: f64,
    ) -> Result<(f64, f64)> {
        if log_pi_prev == f64::NEG_INFINITY {
            return Err(Error::Invariant(
                "generic weights require a previous state with positive target density".into(),
            ));
        }
        let reverse = self.reverse_log_weights(log_pi, candidates, selected, x_prev, log_pi_prev)?;
        let z = &candidates[selected];
        let log_q_selected = self.slot_log_density(selected, z)?;
        let log_q_prev = self.slot_log_density(selected, x_prev)?;
        let log_ratio = generic_log_ratio(
            log_pi[selected],
            log_pi_prev,
            log_q_selected,
            log_q_prev,
            forward,
            &reverse,
            selected,
        );
        Ok((log_ratio, log_sum_exp(&reverse)))
    }
}

/// ln Σw − ln(Σw − w_j(z_j) + w_j(x)), returned with the second term.
///
/// The reverse sum is formed by replacing the selected weight rather than
/// subtracting it, which stays exact when the weights span many orders of
/// magnitude.
pub fn swap_selected_log_ratio(log_weights: &[f64], selected: usize, log_weight_prev: f64) -> (f64, f64) {
    let mut swapped = log_weights.to_vec();
    swapped[selected] = log_weight_prev;
    let den = log_sum_exp(&swapped);
    (log_sum_exp(log_weights) - den, den)
}

/// ln of the generic-weight ratio
/// π(z_j) q_j(x) W_X / (π(x) q_j(z_j) W_Z), where W_Z is the normalized
/// forward weight of slot j and W_X the normalized reverse weight of x.
pub fn generic_log_ratio(
    log_pi_selected: f64,
    log_pi_prev: f64,
    log_q_selected: f64,
    log_q_prev: f64,
    forward: &[f64],
    reverse: &[f64],
    selected: usize,
) -> f64 {
    let log_w_z = forward[selected] - log_sum_exp(forward);
    let log_w_x = reverse[selected] - log_sum_exp(reverse);
    (log_pi_selected + log_q_prev - log_pi_prev - log_q_selected) + (log_w_x - log_w_z)
}

/// ln Σ w(zₙ) − ln(w(x) + Σ w(yₙ)) for stratified DM weights.
pub fn refreshed_log_ratio(candidate_log_weights: &[f64], prev_log_weight: f64, auxiliary_log_weights: &[f64]) -> (f64, f64) {
    let mut reverse = Vec::with_capacity(auxiliary_log_weights.len() + 1);
    reverse.push(prev_log_weight);
    reverse.extend_from_slice(auxiliary_log_weights);
    let den = log_sum_exp(&reverse);
    (log_sum_exp(candidate_log_weights) - den, den)
}

/// One I-MTM iteration.
pub fn imtm_step<P: Proposal>(
    x_prev: &Point,
    target: &TargetDensity,
    imtm: &Imtm<P>,
    rng: &mut dyn RngCore,
) -> Result<Step> {
    let n_used = imtm.total_tries();
    let candidates = imtm.sample_candidates(rng)?;
    let log_pi = candidates
        .iter()
        .map(|z| target.log_density(z))
        .collect::<Result<Vec<_>>>()?;
    let forward = imtm.candidate_log_weights(&log_pi, &candidates, x_prev)?;
    let Some(selection) = normalize_and_select(&forward, rng) else {
        return Ok(Step::degenerate(x_prev, n_used));
    };
    let j = selection.index;
    let log_pi_prev = target.log_density(x_prev)?;

    let (log_ratio, log_den_sum) = match imtm.acceptance_rule() {
        AcceptanceRule::SwapSelected => {
            let prev = imtm.log_weight(log_pi_prev, j, x_prev, x_prev)?;
            swap_selected_log_ratio(&forward, j, prev)
        }
        AcceptanceRule::GenericWeights => {
            imtm.generic_log_ratio(&log_pi, &candidates, &forward, j, x_prev, log_pi_prev)?
        }
        AcceptanceRule::RefreshedAuxiliary => {
            let components = imtm.component_log_densities(x_prev)?;
            let Some(component) = normalize_and_select(&components, rng) else {
                return Err(Error::Invariant(format!(
                    "previous state {:?} lies outside the support of every proposal",
                    x_prev.coords()
                )));
            };
            let auxiliary = imtm
                .refresh_layout(component.index)
                .into_iter()
                .map(|n| imtm.proposals()[n].sample(None, rng))
                .collect::<Result<Vec<_>>>()?;
            let auxiliary_lw = auxiliary
                .iter()
                .map(|y| {
                    let w = imtm.log_weight(target.log_density(y)?, 0, y, y)?;
                    if w == f64::INFINITY {
                        return Err(Error::Invariant(format!(
                            "proposal density is zero at its own draw {y:?}"
                        )));
                    }
                    Ok(w)
                })
                .collect::<Result<Vec<_>>>()?;
            let prev = imtm.log_weight(log_pi_prev, 0, x_prev, x_prev)?;
            refreshed_log_ratio(&forward, prev, &auxiliary_lw)
        }
    };

    let z = candidates.into_iter().nth(j).expect("index in range");
    Ok(Step::decide(
        x_prev,
        z,
        log_ratio,
        log_sum_exp(&forward),
        log_den_sum,
        n_used,
        rng,
    ))
}

/// A fully specified MTM kernel.
#[derive(Clone, Debug)]
pub enum Sampler<P = ProposalDensity> {
    RandomWalk { proposal: P, schedule: TriesSchedule },
    Independent(Imtm<P>),
}

impl<P: Proposal> Sampler<P> {
    pub fn random_walk(proposal: P, schedule: TriesSchedule) -> Result<Self> {
        schedule.validate()?;
        Ok(Sampler::RandomWalk { proposal, schedule })
    }

    pub fn dim(&self) -> usize {
        match self {
            Sampler::RandomWalk { proposal, .. } => proposal.dim(),
            Sampler::Independent(imtm) => imtm.dim(),
        }
    }

    pub fn step(&self, x_prev: &Point, target: &TargetDensity, rng: &mut dyn RngCore) -> Result<Step> {
        match self {
            Sampler::RandomWalk {
                proposal,
                schedule: TriesSchedule::Fixed(n),
            } => rw_mtm_step(x_prev, target, proposal, *n, rng),
            Sampler::RandomWalk {
                proposal,
                schedule: TriesSchedule::Variable(values),
            } => variable_n_step(x_prev, target, proposal, values, rng),
            Sampler::Independent(imtm) => imtm_step(x_prev, target, imtm, rng),
        }
    }

    fn needs_positive_start(&self) -> bool {
        matches!(self, Sampler::Independent(imtm) if matches!(imtm.weights(), WeightSpec::Liu(_)))
    }
}

#[derive(Clone, Debug)]
pub struct SamplerConfig<P = ProposalDensity> {
    pub sampler: Sampler<P>,
    pub chain_length: usize,
    pub seed: u64,
}

/// States x₀…x_T and one record per iteration.
///
/// A rejected iteration repeats the previous state. An accepted one moves to
/// the selected candidate, which on a discrete space may equal the previous
/// state.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainTrace {
    pub states: Vec<Point>,
    pub records: Vec<IterationRecord>,
}

impl ChainTrace {
    /// Number of iterations T.
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.records.is_empty() {
            return 0.0;
        }
        self.records.iter().filter(|r| r.accepted).count() as f64 / self.records.len() as f64
    }
}

/// Runs `config.chain_length` iterations from `x0` on stream 0 of `config.seed`.
pub fn run_chain<P: Proposal>(config: &SamplerConfig<P>, target: &TargetDensity, x0: Point) -> Result<ChainTrace> {
    let mut rng = chain_rng(config.seed, 0);
    run_chain_with_rng(&config.sampler, target, x0, config.chain_length, &mut rng)
}

pub fn run_chain_with_rng<P: Proposal>(
    sampler: &Sampler<P>,
    target: &TargetDensity,
    x0: Point,
    chain_length: usize,
    rng: &mut dyn RngCore,
) -> Result<ChainTrace> {
    check_dim(sampler.dim(), x0.dim())?;
    check_dim(target.dim(), x0.dim())?;
    if !x0.is_finite() {
        return Err(Error::Usage(format!("initial state must be finite, got {:?}", x0.coords())));
    }
    if sampler.needs_positive_start() && target.log_density(&x0)? == f64::NEG_INFINITY {
        return Err(Error::Invariant(
            "generic weights require an initial state with positive target density".into(),
        ));
    }
    let mut states = Vec::with_capacity(chain_length + 1);
    let mut records = Vec::with_capacity(chain_length);
    states.push(x0);
    for t in 1..=chain_length {
        let step = sampler
            .step(&states[t - 1], target, rng)
            .map_err(|e| e.at_iteration(t))?;
        states.push(step.state);
        records.push(step.record);
    }
    Ok(ChainTrace { states, records })
}
