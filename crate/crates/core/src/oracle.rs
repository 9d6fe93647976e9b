//! Exact transition kernels on finite state spaces.
//!
//! A [`DiscreteSpace`] embeds states 0…n−1 as one-dimensional points `[i]`.
//! Its target and proposals implement the same traits as the continuous
//! ones, so the production step functions run unchanged on it. The exact
//! kernels below enumerate every random outcome of an iteration and score it
//! with the same weight and acceptance functions the step functions call.

use std::sync::Arc;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::RngCore;
use serde::Serialize;

use crate::densities::{Point, Proposal, TargetDensity};
use crate::error::{check_dim, Error, Result};
use crate::samplers::{
    acceptance_probability, refreshed_log_ratio, rw_auxiliary_log_weights, rw_candidate_log_weights,
    rw_mtm_log_ratio, swap_selected_log_ratio, AcceptanceRule, ChainRng, Imtm,
};
use crate::weights::{selection_probabilities, WeightSpec};

/// Largest number of enumerated outcomes an exact kernel may visit.
pub const ENUMERATION_LIMIT: u128 = 10_000_000;

const SIMPLEX_TOL: f64 = 1e-12;

fn check_simplex(p: &[f64], what: &str) -> Result<()> {
    if p.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
        return Err(Error::Config(format!("{what} has a negative or non-finite entry")));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > SIMPLEX_TOL {
        return Err(Error::Config(format!("{what} sums to {total}, not 1")));
    }
    Ok(())
}

/// Finite state space with a target pmf and a conditional proposal matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteSpace {
    target_pmf: Vec<f64>,
    proposal: Arc<Vec<Vec<f64>>>,
}

impl DiscreteSpace {
    /// `proposal[i][j]` is the probability of proposing state j from state i.
    pub fn new(target_pmf: Vec<f64>, proposal: Vec<Vec<f64>>) -> Result<Self> {
        let n = target_pmf.len();
        if n == 0 {
            return Err(Error::Config("state space must not be empty".into()));
        }
        check_simplex(&target_pmf, "target pmf")?;
        if proposal.len() != n {
            return Err(Error::Config(format!("proposal matrix has {} rows for {n} states", proposal.len())));
        }
        for (i, row) in proposal.iter().enumerate() {
            check_dim(n, row.len())?;
            check_simplex(row, &format!("proposal row {i}"))?;
        }
        Ok(DiscreteSpace {
            target_pmf,
            proposal: Arc::new(proposal),
        })
    }

    pub fn len(&self) -> usize {
        self.target_pmf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.target_pmf.is_empty()
    }

    pub fn target_pmf(&self) -> &[f64] {
        &self.target_pmf
    }

    pub fn proposal_matrix(&self) -> &[Vec<f64>] {
        &self.proposal
    }

    pub fn point(&self, i: usize) -> Point {
        Point::new(vec![i as f64])
    }

    pub fn index_of(&self, p: &[f64]) -> Option<usize> {
        index_of(p, self.len())
    }

    /// ln π over the embedded states; −∞ off the lattice.
    pub fn target(&self) -> TargetDensity {
        let pmf = self.target_pmf.clone();
        TargetDensity::new(1, move |x| match index_of(x, pmf.len()) {
            Some(i) => pmf[i].ln(),
            None => f64::NEG_INFINITY,
        })
        .with_normalizer(1.0)
    }

    /// The conditional proposal q(j|i) as a [`Proposal`].
    pub fn conditional_proposal(&self) -> DiscreteProposal {
        DiscreteProposal::Conditional(Arc::clone(&self.proposal))
    }
}

fn index_of(p: &[f64], n: usize) -> Option<usize> {
    match p {
        [v] if *v >= 0.0 && v.fract() == 0.0 && (*v as usize) < n => Some(*v as usize),
        _ => None,
    }
}

/// Discrete proposal over an embedded state space.
#[derive(Clone, Debug, PartialEq)]
pub enum DiscreteProposal {
    Conditional(Arc<Vec<Vec<f64>>>),
    Independent(Vec<f64>),
}

impl DiscreteProposal {
    pub fn independent(pmf: Vec<f64>) -> Result<Self> {
        check_simplex(&pmf, "independent proposal pmf")?;
        Ok(DiscreteProposal::Independent(pmf))
    }

    fn row(&self, condition: Option<&[f64]>) -> Result<&[f64]> {
        match self {
            DiscreteProposal::Independent(pmf) => Ok(pmf),
            DiscreteProposal::Conditional(rows) => {
                let c = condition.ok_or_else(|| {
                    Error::Usage("a conditional proposal needs a conditioning state".into())
                })?;
                let i = index_of(c, rows.len())
                    .ok_or_else(|| Error::Usage(format!("conditioning state {c:?} is not in the space")))?;
                Ok(&rows[i])
            }
        }
    }

    /// Probability of proposing state `j` given `condition`.
    pub fn probability(&self, j: usize, condition: Option<usize>) -> f64 {
        match self {
            DiscreteProposal::Independent(pmf) => pmf[j],
            DiscreteProposal::Conditional(rows) => rows[condition.expect("conditioning state")][j],
        }
    }

    fn size(&self) -> usize {
        match self {
            DiscreteProposal::Independent(pmf) => pmf.len(),
            DiscreteProposal::Conditional(rows) => rows.len(),
        }
    }
}

impl Proposal for DiscreteProposal {
    fn dim(&self) -> usize {
        1
    }

    fn is_conditional(&self) -> bool {
        matches!(self, DiscreteProposal::Conditional(_))
    }

    fn sample(&self, condition: Option<&[f64]>, rng: &mut dyn RngCore) -> Result<Point> {
        let row = self.row(condition)?;
        let dist = WeightedIndex::new(row).map_err(|e| Error::Config(format!("proposal row: {e}")))?;
        Ok(Point::new(vec![dist.sample(rng) as f64]))
    }

    fn log_density(&self, z: &[f64], condition: Option<&[f64]>) -> Result<f64> {
        let row = self.row(condition)?;
        Ok(match index_of(z, self.size()) {
            Some(j) => row[j].ln(),
            None => f64::NEG_INFINITY,
        })
    }
}

/// Row-stochastic matrix K[i][j] = Pr(x_t = j | x_{t−1} = i).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TransitionMatrix {
    n: usize,
    entries: Vec<f64>,
}

impl TransitionMatrix {
    pub fn zeros(n: usize) -> Self {
        TransitionMatrix {
            n,
            entries: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut k = Self::zeros(n);
        for i in 0..n {
            k.entries[i * n + i] = 1.0;
        }
        k
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        for row in rows {
            check_dim(n, row.len())?;
        }
        Ok(TransitionMatrix {
            n,
            entries: rows.iter().flatten().copied().collect(),
        })
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.n..(i + 1) * self.n]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.n).map(|i| self.row(i).to_vec()).collect()
    }

    fn add(&mut self, i: usize, j: usize, p: f64) {
        self.entries[i * self.n + j] += p;
    }

    /// Largest |Σⱼ K[i][j] − 1| over rows.
    pub fn row_sum_defect(&self) -> f64 {
        (0..self.n)
            .map(|i| (self.row(i).iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    pub fn max_abs_difference(&self, other: &TransitionMatrix) -> Result<f64> {
        check_dim(self.n, other.n)?;
        Ok(self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    /// (1/M) Σ Kₘ.
    pub fn uniform_mixture(kernels: &[TransitionMatrix]) -> Result<Self> {
        let first = kernels
            .first()
            .ok_or_else(|| Error::Usage("a kernel mixture needs at least one kernel".into()))?;
        let mut out = Self::zeros(first.n);
        for k in kernels {
            check_dim(first.n, k.n)?;
            for (o, v) in out.entries.iter_mut().zip(&k.entries) {
                *o += v / kernels.len() as f64;
            }
        }
        Ok(out)
    }

    /// Adds `amount` to entry (i, j) and renormalizes row i.
    pub fn perturbed(&self, i: usize, j: usize, amount: f64) -> Self {
        let mut out = self.clone();
        out.add(i, j, amount);
        let total: f64 = out.row(i).iter().sum();
        for v in &mut out.entries[i * self.n..(i + 1) * self.n] {
            *v /= total;
        }
        out
    }
}

fn guard(terms: u128) -> Result<()> {
    if terms > ENUMERATION_LIMIT {
        Err(Error::EnumerationTooLarge {
            terms,
            limit: ENUMERATION_LIMIT,
        })
    } else {
        Ok(())
    }
}

/// Visits every tuple in {0…n−1}^len in lexicographic order.
fn for_each_tuple(n: usize, len: usize, mut f: impl FnMut(&[usize]) -> Result<()>) -> Result<()> {
    let mut tuple = vec![0usize; len];
    loop {
        f(&tuple)?;
        let mut pos = len;
        loop {
            if pos == 0 {
                return Ok(());
            }
            pos -= 1;
            tuple[pos] += 1;
            if tuple[pos] < n {
                break;
            }
            tuple[pos] = 0;
        }
    }
}

fn points(space: &DiscreteSpace, tuple: &[usize]) -> Vec<Point> {
    tuple.iter().map(|&i| space.point(i)).collect()
}

fn pow(n: usize, e: usize) -> u128 {
    (n as u128).saturating_pow(e as u32)
}

/// Exact RW-MTM kernel with `n_tries` candidates from the space's
/// conditional proposal, by enumeration of candidates, selection and
/// auxiliary points.
pub fn exact_rw_mtm_kernel(space: &DiscreteSpace, n_tries: usize) -> Result<TransitionMatrix> {
    if n_tries == 0 {
        return Err(Error::Usage("RW-MTM needs at least one try".into()));
    }
    let n = space.len();
    guard(pow(n, 2 * n_tries - 1).saturating_mul(n_tries as u128))?;
    let target = space.target();
    let proposal = space.conditional_proposal();
    let mut kernel = TransitionMatrix::zeros(n);

    for x in 0..n {
        let x_point = space.point(x);
        for_each_tuple(n, n_tries, |cands| {
            let p_cands: f64 = cands.iter().map(|&z| proposal.probability(z, Some(x))).product();
            if p_cands == 0.0 {
                return Ok(());
            }
            let cand_points = points(space, cands);
            let lw = rw_candidate_log_weights(&target, &proposal, &x_point, &cand_points)?;
            let Some(probs) = selection_probabilities(&lw) else {
                kernel.add(x, x, p_cands);
                return Ok(());
            };
            for (j, &z) in cands.iter().enumerate() {
                if probs[j] == 0.0 {
                    continue;
                }
                let z_point = space.point(z);
                let mut accept = 0.0;
                for_each_tuple(n, n_tries - 1, |aux| {
                    let p_aux: f64 = aux.iter().map(|&y| proposal.probability(y, Some(z))).product();
                    if p_aux == 0.0 {
                        return Ok(());
                    }
                    let aux_lw = rw_auxiliary_log_weights(&target, &proposal, &z_point, &points(space, aux), &x_point)?;
                    accept += p_aux * acceptance_probability(rw_mtm_log_ratio(&lw, &aux_lw));
                    Ok(())
                })?;
                let mass = p_cands * probs[j];
                kernel.add(x, z, mass * accept);
                kernel.add(x, x, mass * (1.0 - accept));
            }
            Ok(())
        })?;
    }
    Ok(kernel)
}

/// Exact kernel of the uniform mixture of RW-MTM kernels over `schedule`.
pub fn exact_variable_n_kernel(space: &DiscreteSpace, schedule: &[usize]) -> Result<TransitionMatrix> {
    let kernels = schedule
        .iter()
        .map(|&n| exact_rw_mtm_kernel(space, n))
        .collect::<Result<Vec<_>>>()?;
    TransitionMatrix::uniform_mixture(&kernels)
}

/// Exact I-MTM kernel for any weight family and sampling mode of `imtm`.
pub fn exact_imtm_kernel(space: &DiscreteSpace, imtm: &Imtm<DiscreteProposal>) -> Result<TransitionMatrix> {
    let n = space.len();
    let p = imtm.total_tries();
    let rule = imtm.acceptance_rule();
    if matches!(imtm.weights(), WeightSpec::Liu(_)) && space.target_pmf().iter().any(|v| *v <= 0.0) {
        return Err(Error::Usage("generic weights require a strictly positive target pmf".into()));
    }
    let per_outcome = match rule {
        AcceptanceRule::RefreshedAuxiliary => pow(n, p - 1).saturating_mul(imtm.proposals().len() as u128),
        _ => 1,
    };
    guard(pow(n, p).saturating_mul(p as u128).saturating_mul(per_outcome).saturating_mul(n as u128))?;

    let target = space.target();
    let log_pi: Vec<f64> = space.target_pmf().iter().map(|v| v.ln()).collect();
    let slot_prob = |slot: usize, v: usize| -> Result<f64> {
        Ok(imtm.slot_log_density(slot, &space.point(v))?.exp())
    };
    let mut kernel = TransitionMatrix::zeros(n);

    for x in 0..n {
        let x_point = space.point(x);
        for_each_tuple(n, p, |cands| {
            let mut p_cands = 1.0;
            for (slot, &z) in cands.iter().enumerate() {
                p_cands *= slot_prob(slot, z)?;
            }
            if p_cands == 0.0 {
                return Ok(());
            }
            let cand_points = points(space, cands);
            let cand_log_pi: Vec<f64> = cands.iter().map(|&z| log_pi[z]).collect();
            let lw = imtm.candidate_log_weights(&cand_log_pi, &cand_points, &x_point)?;
            let Some(probs) = selection_probabilities(&lw) else {
                kernel.add(x, x, p_cands);
                return Ok(());
            };
            for (j, &z) in cands.iter().enumerate() {
                if probs[j] == 0.0 {
                    continue;
                }
                let accept = match rule {
                    AcceptanceRule::SwapSelected => {
                        let prev = imtm.log_weight(log_pi[x], j, &x_point, &x_point)?;
                        acceptance_probability(swap_selected_log_ratio(&lw, j, prev).0)
                    }
                    AcceptanceRule::GenericWeights => {
                        let (ratio, _) = imtm.generic_log_ratio(&cand_log_pi, &cand_points, &lw, j, &x_point, log_pi[x])?;
                        acceptance_probability(ratio)
                    }
                    AcceptanceRule::RefreshedAuxiliary => {
                        refreshed_acceptance(space, imtm, &target, x, &lw)?
                    }
                };
                let mass = p_cands * probs[j];
                kernel.add(x, z, mass * accept);
                kernel.add(x, x, mass * (1.0 - accept));
            }
            Ok(())
        })?;
    }
    Ok(kernel)
}

/// Expected acceptance over the component of x and the refreshed points.
fn refreshed_acceptance(
    space: &DiscreteSpace,
    imtm: &Imtm<DiscreteProposal>,
    target: &TargetDensity,
    x: usize,
    lw: &[f64],
) -> Result<f64> {
    let n = space.len();
    let x_point = space.point(x);
    let components = imtm.component_log_densities(&x_point)?;
    let Some(component_probs) = selection_probabilities(&components) else {
        return Err(Error::Invariant(format!("state {x} lies outside every proposal's support")));
    };
    let prev = imtm.log_weight(target.log_density(&x_point)?, 0, &x_point, &x_point)?;
    let mut accept = 0.0;
    for (m, pm) in component_probs.iter().enumerate() {
        if *pm == 0.0 {
            continue;
        }
        let layout = imtm.refresh_layout(m);
        for_each_tuple(n, layout.len(), |aux| {
            let p_aux: f64 = aux
                .iter()
                .zip(&layout)
                .map(|(&y, &q)| imtm.proposals()[q].probability(y, None))
                .product();
            if p_aux == 0.0 {
                return Ok(());
            }
            let aux_lw = aux
                .iter()
                .map(|&y| {
                    let yp = space.point(y);
                    imtm.log_weight(target.log_density(&yp)?, 0, &yp, &yp)
                })
                .collect::<Result<Vec<_>>>()?;
            accept += pm * p_aux * acceptance_probability(refreshed_log_ratio(lw, prev, &aux_lw).0);
            Ok(())
        })?;
    }
    Ok(accept)
}

/// Estimates a kernel row by row from `samples_per_state` independent
/// applications of `step` started at each state.
pub fn mc_kernel_estimate<F>(
    mut step: F,
    space: &DiscreteSpace,
    samples_per_state: usize,
    rng: &mut ChainRng,
) -> Result<TransitionMatrix>
where
    F: FnMut(&Point, &mut ChainRng) -> Result<Point>,
{
    if samples_per_state == 0 {
        return Err(Error::Usage("need at least one sample per state".into()));
    }
    let n = space.len();
    let mut kernel = TransitionMatrix::zeros(n);
    for i in 0..n {
        let start = space.point(i);
        let mut counts = vec![0usize; n];
        for _ in 0..samples_per_state {
            let next = step(&start, rng)?;
            let j = space
                .index_of(&next)
                .ok_or_else(|| Error::Invariant(format!("step left the state space: {:?}", next.coords())))?;
            counts[j] += 1;
        }
        for (j, c) in counts.into_iter().enumerate() {
            kernel.entries[i * n + j] = c as f64 / samples_per_state as f64;
        }
    }
    Ok(kernel)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StationarityReport {
    pub l1_residual: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DetailedBalanceReport {
    pub max_violation: f64,
    pub pass: bool,
}

/// ‖πK − π‖₁, passing when below `tol`.
pub fn check_stationarity(kernel: &TransitionMatrix, pi: &[f64], tol: f64) -> Result<StationarityReport> {
    check_dim(kernel.n, pi.len())?;
    let n = kernel.n;
    let l1_residual = (0..n)
        .map(|j| {
            let flow: f64 = (0..n).map(|i| pi[i] * kernel.get(i, j)).sum();
            (flow - pi[j]).abs()
        })
        .sum();
    Ok(StationarityReport {
        l1_residual,
        pass: l1_residual < tol,
    })
}

/// maxᵢⱼ |πᵢ Kᵢⱼ − πⱼ Kⱼᵢ|, passing when below `tol`.
pub fn check_detailed_balance(kernel: &TransitionMatrix, pi: &[f64], tol: f64) -> Result<DetailedBalanceReport> {
    check_dim(kernel.n, pi.len())?;
    let n = kernel.n;
    let mut max_violation: f64 = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            max_violation = max_violation.max((pi[i] * kernel.get(i, j) - pi[j] * kernel.get(j, i)).abs());
        }
    }
    Ok(DetailedBalanceReport {
        max_violation,
        pass: max_violation < tol,
    })
}
