//! Weight functions for candidate selection, categorical selection and the
//! importance-sampling estimator of the normalizing constant.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, RngCore};
use rand_distr::Gumbel;

use crate::densities::{log_mean_exp, log_sum_exp, mixture_log_density, Point, Proposal, TargetDensity};
use crate::error::{Error, Result};

type LogLambdaFn = dyn Fn(usize, &[f64], &[f64]) -> f64 + Send + Sync;

/// Symmetric function λₖ(z, x) of the Liu weight class, stored as ln λ.
///
/// The first argument is the index k of the proposal that generated the
/// candidate, so that λ may depend on qₖ.
#[derive(Clone)]
pub struct Lambda(Arc<LogLambdaFn>);

impl Lambda {
    /// Wraps a λ given on the linear scale.
    pub fn new<F>(lambda: F) -> Self
    where
        F: Fn(usize, &[f64], &[f64]) -> f64 + Send + Sync + 'static,
    {
        Lambda(Arc::new(move |k, z, x| lambda(k, z, x).ln()))
    }

    /// Wraps a λ given as ln λ. Preferred when λ spans many orders of magnitude.
    pub fn from_log<F>(log_lambda: F) -> Self
    where
        F: Fn(usize, &[f64], &[f64]) -> f64 + Send + Sync + 'static,
    {
        Lambda(Arc::new(log_lambda))
    }

    /// The λ for which the Liu weight equals the importance weight πₖ/qₖ:
    /// λₖ(z, x) = 1 / (qₖ(z) qₖ(x)).
    pub fn importance_recovering<P: Proposal + 'static>(proposals: Vec<P>) -> Self {
        Lambda::from_log(move |k, z, x| {
            let q = &proposals[k];
            let lz = q.log_density(z, None).unwrap_or(f64::NAN);
            let lx = q.log_density(x, None).unwrap_or(f64::NAN);
            -(lz + lx)
        })
    }

    /// ln λₖ(z, x); fails unless λ is positive and finite.
    pub fn log_value(&self, k: usize, z: &[f64], x: &[f64]) -> Result<f64> {
        let v = (self.0)(k, z, x);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Config(format!(
                "lambda must be positive and finite, got ln(lambda) = {v} for proposal {k}"
            )))
        }
    }

    /// |ln λₖ(a, b) − ln λₖ(b, a)|, for spot-checking symmetry.
    pub fn symmetry_defect(&self, k: usize, a: &[f64], b: &[f64]) -> Result<f64> {
        Ok((self.log_value(k, a, b)? - self.log_value(k, b, a)?).abs())
    }
}

impl fmt::Debug for Lambda {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Lambda(..)")
    }
}

/// Which weight function scores the candidates.
#[derive(Clone, Debug, Default)]
pub enum WeightSpec {
    /// w(z) = π(z) / q(z), with q the proposal that generated z.
    #[default]
    Importance,
    /// w(z) = π(z) / ψ(z) with ψ the equal mixture of all proposals.
    DeterministicMixture,
    /// w(z | x) = π(z) qₖ(x) λₖ(z, x).
    Liu(Lambda),
}

impl WeightSpec {
    pub fn name(&self) -> &'static str {
        match self {
            WeightSpec::Importance => "importance",
            WeightSpec::DeterministicMixture => "dm-mixture",
            WeightSpec::Liu(_) => "liu-lambda",
        }
    }
}

/// `ln π(z) − ln q(z|condition)`.
///
/// A proposal with zero density at `z` is an invariant violation: candidates
/// are always draws from the proposal that scores them.
pub fn importance_log_weight<P: Proposal + ?Sized>(
    z: &[f64],
    target: &TargetDensity,
    proposal: &P,
    condition: Option<&[f64]>,
) -> Result<f64> {
    let log_q = proposal.log_density(z, condition)?;
    let log_pi = target.log_density(z)?;
    combine_importance(log_pi, log_q, z)
}

pub(crate) fn combine_importance(log_pi: f64, log_q: f64, z: &[f64]) -> Result<f64> {
    if log_q == f64::NEG_INFINITY {
        return Err(Error::Invariant(format!(
            "proposal density is zero at its own draw {z:?}"
        )));
    }
    Ok(log_pi - log_q)
}

/// `ln π(z) − ln ψ(z)` with ψ the equal mixture of `components`.
pub fn dm_log_weight<P: Proposal>(z: &[f64], target: &TargetDensity, components: &[P]) -> Result<f64> {
    let log_psi = mixture_log_density(z, components)?;
    let log_pi = target.log_density(z)?;
    combine_importance(log_pi, log_psi, z)
}

/// `ln π(z) + ln qₙ(x) + ln λₙ(z, x)` for the proposal `proposal_n` with index `n`.
pub fn liu_log_weight<P: Proposal + ?Sized>(
    z: &[f64],
    x: &[f64],
    target: &TargetDensity,
    proposal_n: &P,
    n: usize,
    lambda: &Lambda,
) -> Result<f64> {
    let log_lambda = lambda.log_value(n, z, x)?;
    Ok(target.log_density(z)? + proposal_n.log_density(x, Some(z))? + log_lambda)
}

/// Normalized selection probabilities and the index drawn from them.
#[derive(Clone, Debug, PartialEq)]
pub struct Selection {
    pub probabilities: Vec<f64>,
    /// Zero-based index of the selected candidate.
    pub index: usize,
}

/// `exp(lwₖ − ln Σ exp(lw))`; `None` when every weight is zero.
pub fn selection_probabilities(log_weights: &[f64]) -> Option<Vec<f64>> {
    let total = log_sum_exp(log_weights);
    if total == f64::NEG_INFINITY || total.is_nan() {
        return None;
    }
    Some(log_weights.iter().map(|lw| (lw - total).exp()).collect())
}

/// Normalizes `log_weights` and draws an index with the Gumbel-max rule.
///
/// Returns `None`, drawing nothing from `rng`, when every weight is zero;
/// samplers treat that as an automatic rejection. Otherwise exactly one
/// Gumbel variate per weight is consumed, in index order, and ties go to the
/// lowest index.
pub fn normalize_and_select(log_weights: &[f64], rng: &mut dyn RngCore) -> Option<Selection> {
    let probabilities = selection_probabilities(log_weights)?;
    let gumbel = Gumbel::new(0.0, 1.0).expect("unit Gumbel is valid");
    let mut best = f64::NEG_INFINITY;
    let mut index = None;
    for (k, lw) in log_weights.iter().enumerate() {
        let key = lw + rng.sample(gumbel);
        if *lw > f64::NEG_INFINITY && (index.is_none() || key > best) {
            best = key;
            index = Some(k);
        }
    }
    Some(Selection {
        probabilities,
        index: index.expect("at least one finite weight"),
    })
}

/// Ẑ = (1/N) Σ π(vₙ) / q(vₙ | condition), computed from log-weights.
pub fn normalizing_constant_estimate<P: Proposal + ?Sized>(
    points: &[Point],
    target: &TargetDensity,
    proposal: &P,
    condition: Option<&[f64]>,
) -> Result<f64> {
    if points.is_empty() {
        return Err(Error::Usage("normalizing-constant estimate needs at least one point".into()));
    }
    let log_weights = points
        .iter()
        .map(|p| importance_log_weight(p, target, proposal, condition))
        .collect::<Result<Vec<_>>>()?;
    Ok(log_mean_exp(&log_weights).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::densities::ProposalDensity;
    use crate::experiments::SensorModel;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn std_normal_2d() -> TargetDensity {
        let g = crate::densities::Gaussian::isotropic(2, 1.0).unwrap();
        TargetDensity::new(2, move |x| g.log_density_offset(x)).with_normalizer(1.0)
    }

    #[test]
    fn importance_weight_of_identical_densities_is_one() {
        let q = ProposalDensity::independent_isotropic([0.0, 0.0], 1.0).unwrap();
        let w = importance_log_weight(&[0.3, -1.2], &std_normal_2d(), &q, None).unwrap();
        assert!(w.abs() < 1e-15);
    }

    #[test]
    fn zero_target_gives_zero_weight() {
        let t = TargetDensity::new(2, |x| if x[0] > 0.0 { 0.0 } else { f64::NEG_INFINITY });
        let q = ProposalDensity::independent_isotropic([0.0, 0.0], 1.0).unwrap();
        assert_eq!(
            importance_log_weight(&[-1.0, 0.0], &t, &q, None).unwrap(),
            f64::NEG_INFINITY
        );
    }

    #[test]
    fn zero_proposal_density_is_an_invariant_violation() {
        let q = ProposalDensity::independent_isotropic([0.0], 1.0).unwrap();
        let t = TargetDensity::new(1, |_| 0.0);
        // 𝒩(1e3; 0, 1) underflows to zero.
        assert!(matches!(
            importance_log_weight(&[1e200], &t, &q, None),
            Err(Error::Invariant(_))
        ));
    }

    #[test]
    fn sensor_importance_weight_matches_high_precision_terms() {
        // mpmath, 50 digits: ln π([-1, 0]) and ln 𝒩([-1, 0]; 0, I)
        let log_pi = -24.249_629_527_283_39;
        let log_q = -2.337_877_066_409_345_5;
        let model = SensorModel::default();
        let q = ProposalDensity::independent_isotropic([0.0, 0.0], 1.0).unwrap();
        let w = importance_log_weight(&[-1.0, 0.0], &model.target(), &q, None).unwrap();
        assert!((w - (log_pi - log_q)).abs() < 1e-12, "{w}");
    }

    #[test]
    fn dm_weight_cases() {
        let a = ProposalDensity::independent_isotropic([-6.0, -6.0], 1.0).unwrap();
        let b = ProposalDensity::independent_isotropic([0.0, 0.0], 1.0).unwrap();
        let t = SensorModel::default().target();
        let z = [-1.0, -2.0];
        let single = dm_log_weight(&z, &t, std::slice::from_ref(&a)).unwrap();
        assert_eq!(single, importance_log_weight(&z, &t, &a, None).unwrap());

        let own = std_normal_2d();
        let g = ProposalDensity::independent_isotropic([0.0, 0.0], 1.0).unwrap();
        assert!(dm_log_weight(&z, &own, &[g.clone(), g]).unwrap().abs() < 1e-15);

        // mpmath, 50 digits: ln π([-1,-2]) − ln ψ([-1,-2])
        let expected = -12.350_093_831_915_688 - (-5.031_024_231_739_311);
        let v = dm_log_weight(&z, &t, &[a, b]).unwrap();
        assert!((v - expected).abs() < 1e-12, "{v}");
    }

    #[test]
    fn liu_weight_with_importance_lambda_is_importance_weight() {
        let q = ProposalDensity::independent_isotropic([-1.0, -2.0], 1.3).unwrap();
        let lambda = Lambda::importance_recovering(vec![q.clone()]);
        let t = SensorModel::default().target();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..1000 {
            let z: Vec<f64> = (0..2).map(|_| rng.random_range(-8.0..8.0)).collect();
            let x: Vec<f64> = (0..2).map(|_| rng.random_range(-8.0..8.0)).collect();
            let liu = liu_log_weight(&z, &x, &t, &q, 0, &lambda).unwrap();
            let imp = importance_log_weight(&z, &t, &q, None).unwrap();
            assert!((liu - imp).abs() <= 1e-12 * imp.abs().max(1.0), "{liu} vs {imp}");
        }
    }

    #[test]
    fn liu_weight_with_unit_lambda() {
        let q = ProposalDensity::independent_isotropic([0.0, 0.0], 1.0).unwrap();
        let t = std_normal_2d();
        let lambda = Lambda::new(|_, _, _| 1.0);
        let (z, x) = ([0.5, 1.0], [-1.0, 2.0]);
        let w = liu_log_weight(&z, &x, &t, &q, 0, &lambda).unwrap();
        let expected = t.log_density(&z).unwrap() + q.log_density(&x, None).unwrap();
        assert_eq!(w, expected);
    }

    #[test]
    fn inverse_sum_lambda_is_symmetric() {
        let q = ProposalDensity::independent_isotropic([0.0, 0.0], 1.0).unwrap();
        let lambda = Lambda::new(move |_, z, x| {
            1.0 / (q.log_density(z, None).unwrap().exp() + q.log_density(x, None).unwrap().exp())
        });
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..1000 {
            let a: Vec<f64> = (0..2).map(|_| rng.random_range(-4.0..4.0)).collect();
            let b: Vec<f64> = (0..2).map(|_| rng.random_range(-4.0..4.0)).collect();
            assert!(lambda.symmetry_defect(0, &a, &b).unwrap() <= 1e-12);
        }
    }

    #[test]
    fn non_positive_lambda_is_rejected() {
        let q = ProposalDensity::independent_isotropic([0.0], 1.0).unwrap();
        let t = TargetDensity::new(1, |_| 0.0);
        for bad in [0.0, -1.0] {
            let lambda = Lambda::new(move |_, _, _| bad);
            assert!(matches!(
                liu_log_weight(&[0.0], &[1.0], &t, &q, 0, &lambda),
                Err(Error::Config(_))
            ));
        }
    }

    #[test]
    fn selection_probability_cases() {
        let p = selection_probabilities(&[0.7; 4]).unwrap();
        assert!(p.iter().all(|v| (v - 0.25).abs() < 1e-15));
        let p = selection_probabilities(&[0.0, 3f64.ln()]).unwrap();
        assert!((p[0] - 0.25).abs() < 1e-15 && (p[1] - 0.75).abs() < 1e-15);
        let p = selection_probabilities(&[-1000.0, 0.0]).unwrap();
        assert!(p[0].abs() < 1e-300 && (p[1] - 1.0).abs() < 1e-300);
        assert!(selection_probabilities(&[f64::NEG_INFINITY; 3]).is_none());
    }

    #[test]
    fn degenerate_weights_consume_no_randomness() {
        let mut a = ChaCha8Rng::seed_from_u64(9);
        let b = a.clone();
        assert!(normalize_and_select(&[f64::NEG_INFINITY, f64::NEG_INFINITY], &mut a).is_none());
        assert_eq!(a, b);
    }

    #[test]
    fn zero_weight_candidates_are_never_selected() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..10_000 {
            let s = normalize_and_select(&[f64::NEG_INFINITY, -700.0, f64::NEG_INFINITY], &mut rng).unwrap();
            assert_eq!(s.index, 1);
        }
    }

    #[test]
    fn gumbel_selection_frequencies_match_probabilities() {
        let lw = [0.0, 1.0, -0.5, 2.0];
        let p = selection_probabilities(&lw).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let n = 200_000;
        let mut counts = [0usize; 4];
        for _ in 0..n {
            counts[normalize_and_select(&lw, &mut rng).unwrap().index] += 1;
        }
        for k in 0..4 {
            let se = (p[k] * (1.0 - p[k]) / n as f64).sqrt();
            assert!((counts[k] as f64 / n as f64 - p[k]).abs() < 4.0 * se);
        }
    }

    #[test]
    fn extreme_gap_selects_dominant_weight() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let s = normalize_and_select(&[-1000.0, 0.0], &mut rng).unwrap();
            assert_eq!(s.index, 1);
        }
    }

    #[test]
    fn z_hat_cases() {
        let t = std_normal_2d();
        let q = ProposalDensity::independent_isotropic([0.0, 0.0], 1.0).unwrap();
        let pts: Vec<Point> = vec![[0.1, 2.0].into(), [-3.0, 0.5].into(), [1.0, 1.0].into()];
        let z = normalizing_constant_estimate(&pts, &t, &q, None).unwrap();
        assert!((z - 1.0).abs() < 1e-14);

        let wide = ProposalDensity::independent_isotropic([0.5, 0.0], 2.0).unwrap();
        let z = normalizing_constant_estimate(&pts[..1], &t, &wide, None).unwrap();
        let w = importance_log_weight(&pts[0], &t, &wide, None).unwrap().exp();
        assert!((z - w).abs() < 1e-15);

        assert!(matches!(
            normalizing_constant_estimate(&[], &t, &q, None),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn z_hat_is_unbiased() {
        let t = std_normal_2d();
        let q = ProposalDensity::independent_isotropic([0.0, 0.0], 2.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let reps = 10_000;
        let estimates: Vec<f64> = (0..reps)
            .map(|_| {
                let pts: Vec<Point> = (0..10).map(|_| q.sample(None, &mut rng).unwrap()).collect();
                normalizing_constant_estimate(&pts, &t, &q, None).unwrap()
            })
            .collect();
        let mean = estimates.iter().sum::<f64>() / reps as f64;
        let var = estimates.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (reps - 1) as f64;
        let se = (var / reps as f64).sqrt();
        assert!((mean - 1.0).abs() < 3.0 * se, "{mean} ± {se}");
    }

    fn random_instance() -> impl Strategy<Value = (Vec<[f64; 2]>, f64)> {
        (prop::collection::vec(prop::array::uniform2(-9.0..9.0f64), 1..12), -500.0..500.0f64)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(300))]

        #[test]
        fn selection_is_scale_invariant_simplex((pts, shift) in random_instance()) {
            let t = SensorModel::default().target();
            let ts = t.shifted(shift);
            let q = ProposalDensity::independent_isotropic([-1.0, -1.0], 2.0).unwrap();
            let lw: Vec<f64> = pts.iter().map(|p| importance_log_weight(p, &t, &q, None).unwrap()).collect();
            let lws: Vec<f64> = pts.iter().map(|p| importance_log_weight(p, &ts, &q, None).unwrap()).collect();
            for (a, b) in lw.iter().zip(&lws) {
                prop_assert!((b - a - shift).abs() <= 1e-12 * a.abs().max(shift.abs()).max(1.0));
            }
            let p = selection_probabilities(&lw).unwrap();
            let ps = selection_probabilities(&lws).unwrap();
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            prop_assert!(p.iter().all(|v| *v >= 0.0));
            for (a, b) in p.iter().zip(&ps) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
        }

        #[test]
        fn dm_weight_sandwich(z in prop::array::uniform2(-9.0..9.0f64)) {
            let comps = vec![
                ProposalDensity::independent_isotropic([-6.0, -6.0], 1.25).unwrap(),
                ProposalDensity::independent_isotropic([0.0, 0.0], 1.25).unwrap(),
                ProposalDensity::independent_isotropic([2.0, -3.0], 0.8).unwrap(),
            ];
            let t = SensorModel::default().target();
            let dm = dm_log_weight(&z, &t, &comps).unwrap();
            let log_pi = t.log_density(&z).unwrap();
            let max_q = comps.iter().map(|c| c.log_density(&z, None).unwrap()).fold(f64::NEG_INFINITY, f64::max);
            let lower = log_pi - max_q;
            let upper = (comps.len() as f64).ln() + log_pi - max_q;
            prop_assert!(dm >= lower - 1e-12 && dm <= upper + 1e-12);
        }
    }
}
