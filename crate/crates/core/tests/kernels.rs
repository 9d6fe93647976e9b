use mtm_core::oracle::*;
use mtm_core::samplers::{chain_rng, imtm_step, rw_mtm_step, variable_n_step, Imtm, SamplingMode};
use mtm_core::weights::{Lambda, WeightSpec};
use mtm_core::{Error, Proposal};
use proptest::prelude::*;

const EXACT: f64 = 1e-12;

fn pi5() -> Vec<f64> {
    vec![0.1, 0.25, 0.05, 0.4, 0.2]
}

fn ring_rows(n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| {
            let mut row = vec![0.0; n];
            for (off, p) in [(0, 0.2), (1, 0.3), (n - 1, 0.3), (2, 0.1), (n - 2, 0.1)] {
                row[(i + off) % n] += p;
            }
            row
        })
        .collect()
}

fn skewed_rows() -> Vec<Vec<f64>> {
    vec![
        vec![0.1, 0.5, 0.2, 0.1, 0.1],
        vec![0.3, 0.1, 0.3, 0.2, 0.1],
        vec![0.05, 0.15, 0.4, 0.3, 0.1],
        vec![0.2, 0.2, 0.2, 0.2, 0.2],
        vec![0.6, 0.1, 0.1, 0.1, 0.1],
    ]
}

fn ring_space() -> DiscreteSpace {
    DiscreteSpace::new(pi5(), ring_rows(5)).unwrap()
}

fn skewed_space() -> DiscreteSpace {
    DiscreteSpace::new(pi5(), skewed_rows()).unwrap()
}

fn two_proposals() -> Vec<DiscreteProposal> {
    vec![
        DiscreteProposal::independent(vec![0.5, 0.2, 0.1, 0.1, 0.1]).unwrap(),
        DiscreteProposal::independent(vec![0.05, 0.1, 0.15, 0.3, 0.4]).unwrap(),
    ]
}

fn assert_reversible(k: &TransitionMatrix, pi: &[f64]) {
    assert!(k.row_sum_defect() < EXACT, "row sums off by {}", k.row_sum_defect());
    let s = check_stationarity(k, pi, EXACT).unwrap();
    let d = check_detailed_balance(k, pi, EXACT).unwrap();
    assert!(s.pass, "stationarity residual {}", s.l1_residual);
    assert!(d.pass, "detailed balance violation {}", d.max_violation);
}

#[test]
fn rw_mtm_kernels_are_reversible() {
    for space in [ring_space(), skewed_space()] {
        for n in 1..=3 {
            assert_reversible(&exact_rw_mtm_kernel(&space, n).unwrap(), space.target_pmf());
        }
    }
}

#[test]
fn variable_n_mixture_is_reversible() {
    let space = skewed_space();
    assert_reversible(&exact_variable_n_kernel(&space, &[1, 2]).unwrap(), space.target_pmf());
    assert_reversible(&exact_variable_n_kernel(&space, &[1, 2, 3]).unwrap(), space.target_pmf());
}

fn imtm(weights: WeightSpec, mode: SamplingMode, k: usize) -> Imtm<DiscreteProposal> {
    Imtm::new(two_proposals(), weights, mode, k).unwrap()
}

#[test]
fn imtm_kernels_are_reversible_for_every_weight_family() {
    let space = ring_space();
    let unit = Lambda::new(|_, _, _| 1.0);
    let sum = Lambda::new(|_, z: &[f64], x: &[f64]| 1.0 / (1.0 + z[0] + x[0]));
    let cases = [
        imtm(WeightSpec::Importance, SamplingMode::PerProposal, 1),
        imtm(WeightSpec::Importance, SamplingMode::PerProposal, 2),
        imtm(WeightSpec::DeterministicMixture, SamplingMode::PerProposal, 1),
        imtm(WeightSpec::DeterministicMixture, SamplingMode::PerProposal, 2),
        imtm(WeightSpec::DeterministicMixture, SamplingMode::Mixture, 1),
        imtm(WeightSpec::Liu(unit), SamplingMode::PerProposal, 1),
        imtm(WeightSpec::Liu(sum), SamplingMode::PerProposal, 1),
    ];
    for c in &cases {
        let k = exact_imtm_kernel(&space, c).unwrap();
        assert_reversible(&k, space.target_pmf());
    }
}

#[test]
fn importance_recovering_lambda_gives_the_importance_kernel() {
    let space = ring_space();
    let a = exact_imtm_kernel(&space, &imtm(WeightSpec::Importance, SamplingMode::PerProposal, 1)).unwrap();
    let lambda = Lambda::importance_recovering(two_proposals());
    let b = exact_imtm_kernel(&space, &imtm(WeightSpec::Liu(lambda), SamplingMode::PerProposal, 1)).unwrap();
    assert!(a.max_abs_difference(&b).unwrap() < EXACT);
}

#[test]
fn perturbed_kernel_is_caught() {
    let space = ring_space();
    let k = exact_rw_mtm_kernel(&space, 2).unwrap().perturbed(0, 4, 1e-3);
    assert!(!check_detailed_balance(&k, space.target_pmf(), EXACT).unwrap().pass);
}

#[test]
fn enumeration_guard_is_a_size_error() {
    let space = ring_space();
    assert!(matches!(exact_rw_mtm_kernel(&space, 7), Err(Error::EnumerationTooLarge { .. })));
    let big = Imtm::new(
        vec![DiscreteProposal::independent(vec![0.2; 5]).unwrap()],
        WeightSpec::Importance,
        SamplingMode::PerProposal,
        12,
    )
    .unwrap();
    assert!(matches!(exact_imtm_kernel(&space, &big), Err(Error::EnumerationTooLarge { .. })));
}

const MC_SAMPLES: usize = 100_000;

fn mc_bound() -> f64 {
    4.0 * (0.25 / MC_SAMPLES as f64).sqrt()
}

#[test]
fn rw_mtm_step_matches_exact_kernel() {
    let space = skewed_space();
    let target = space.target();
    let q = space.conditional_proposal();
    let mut rng = chain_rng(101, 0);
    let est = mc_kernel_estimate(|x, rng| Ok(rw_mtm_step(x, &target, &q, 2, rng)?.state), &space, MC_SAMPLES, &mut rng)
        .unwrap();
    let exact = exact_rw_mtm_kernel(&space, 2).unwrap();
    assert!(est.row_sum_defect() < 1e-12);
    let dev = est.max_abs_difference(&exact).unwrap();
    assert!(dev < mc_bound(), "deviation {dev}");
}

#[test]
fn variable_n_step_matches_averaged_exact_kernels() {
    let space = ring_space();
    let target = space.target();
    let q = space.conditional_proposal();
    let mut rng = chain_rng(102, 0);
    let est = mc_kernel_estimate(
        |x, rng| Ok(variable_n_step(x, &target, &q, &[1, 2], rng)?.state),
        &space,
        MC_SAMPLES,
        &mut rng,
    )
    .unwrap();
    let k1 = exact_rw_mtm_kernel(&space, 1).unwrap();
    let k2 = exact_rw_mtm_kernel(&space, 2).unwrap();
    let exact = TransitionMatrix::uniform_mixture(&[k1, k2]).unwrap();
    let dev = est.max_abs_difference(&exact).unwrap();
    assert!(dev < mc_bound(), "deviation {dev}");
}

#[test]
fn imtm_steps_match_exact_kernels() {
    let space = ring_space();
    let target = space.target();
    let cases = [
        imtm(WeightSpec::Importance, SamplingMode::PerProposal, 1),
        imtm(WeightSpec::DeterministicMixture, SamplingMode::PerProposal, 1),
        imtm(WeightSpec::DeterministicMixture, SamplingMode::Mixture, 1),
        imtm(WeightSpec::Liu(Lambda::new(|_, _, _| 1.0)), SamplingMode::PerProposal, 1),
    ];
    for (i, c) in cases.iter().enumerate() {
        let mut rng = chain_rng(103, i as u64);
        let est = mc_kernel_estimate(|x, rng| Ok(imtm_step(x, &target, c, rng)?.state), &space, MC_SAMPLES, &mut rng)
            .unwrap();
        let exact = exact_imtm_kernel(&space, c).unwrap();
        let dev = est.max_abs_difference(&exact).unwrap();
        assert!(dev < mc_bound(), "case {i}: deviation {dev}");
    }
}

#[test]
fn discrete_proposals_evaluate_their_pmf() {
    let space = skewed_space();
    let q = space.conditional_proposal();
    let v = q.log_density(&space.point(1), Some(&space.point(0))).unwrap();
    assert!((v - 0.5f64.ln()).abs() < 1e-15);
    assert!(q.log_density(&space.point(1), None).is_err());
}

fn simplex(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.05f64..1.0, n).prop_map(move |v| {
        let s: f64 = v.iter().sum();
        let mut p: Vec<f64> = v.iter().map(|x| x / s).collect();
        // Push the rounding residue into the last entry.
        let head: f64 = p[..n - 1].iter().sum();
        p[n - 1] = 1.0 - head;
        p
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn random_spaces_give_reversible_rw_kernels(
        pi in simplex(4),
        rows in prop::collection::vec(simplex(4), 4),
        n in 1usize..=3,
    ) {
        let space = DiscreteSpace::new(pi, rows).unwrap();
        let k = exact_rw_mtm_kernel(&space, n).unwrap();
        let d = check_detailed_balance(&k, space.target_pmf(), EXACT).unwrap();
        prop_assert!(d.pass, "violation {}", d.max_violation);
        // Detailed balance at tol implies stationarity at n·tol.
        prop_assert!(check_stationarity(&k, space.target_pmf(), 4.0 * EXACT).unwrap().pass);
    }

    #[test]
    fn random_spaces_give_reversible_dm_kernels(
        pi in simplex(4),
        q1 in simplex(4),
        q2 in simplex(4),
    ) {
        let space = DiscreteSpace::new(pi, vec![vec![0.25; 4]; 4]).unwrap();
        let imtm = Imtm::new(
            vec![DiscreteProposal::independent(q1).unwrap(), DiscreteProposal::independent(q2).unwrap()],
            WeightSpec::DeterministicMixture,
            SamplingMode::PerProposal,
            1,
        ).unwrap();
        let k = exact_imtm_kernel(&space, &imtm).unwrap();
        prop_assert!(check_detailed_balance(&k, space.target_pmf(), EXACT).unwrap().pass);
    }

    #[test]
    fn mixtures_of_stationary_kernels_are_stationary(pi in simplex(4), rows in prop::collection::vec(simplex(4), 4)) {
        let space = DiscreteSpace::new(pi, rows).unwrap();
        let k = exact_variable_n_kernel(&space, &[1, 2, 3]).unwrap();
        prop_assert!(check_stationarity(&k, space.target_pmf(), EXACT).unwrap().pass);
    }
}
