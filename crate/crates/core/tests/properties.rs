//! Property tests over the seeded random-model corpus.

mod common;

use common::{random_model, random_model_with};
use gimdp_core::model::default_bounding_function;
use gimdp_core::oracle::{brute_force_value, enumerate_policies, policy_value_linear};
use gimdp_core::reduction::{reduce, ActionKind};
use gimdp_core::solver::{
    bellman_apply, evaluate_policy, extract_policy, value_iterate, SolveOptions, SolveStatus,
    DEFAULT_TIE_TOL,
};
use proptest::prelude::*;

fn solve_opts() -> SolveOptions {
    SolveOptions {
        abs_tol: 1e-12,
        ..SolveOptions::default()
    }
}

proptest! {
    #[test]
    fn generated_models_are_valid(seed in any::<u64>()) {
        let model = random_model(seed);
        let report = model.validate();
        prop_assert!(report.is_valid(), "seed {seed}: {report}");
        for x in 0..model.n_states() {
            let peak = model.max_exit_rate(x);
            prop_assert!(peak.is_finite() && peak >= 0.0);
        }
    }

    #[test]
    fn default_bound_satisfies_its_own_check(seed in any::<u64>()) {
        let model = random_model(seed);
        let rebased = model
            .with_bounding(default_bounding_function(&model))
            .unwrap();
        prop_assert!(rebased.validate().is_valid());
    }

    #[test]
    fn reduced_rows_are_stochastic_and_dominated(seed in any::<u64>()) {
        let model = random_model(seed);
        let r = reduce(&model).unwrap();
        for x in 0..r.n_states() {
            for act in 0..r.n_actions() {
                let row_sum: f64 = r.prob_row(x, act).iter().sum();
                prop_assert!((row_sum - 1.0).abs() <= 1e-12, "row sum {row_sum}");
                for y in 0..r.n_states() {
                    let p = r.prob(x, act, y);
                    prop_assert!(p >= 0.0);
                    prop_assert!(r.weight(x, act, y) >= p - 1e-15);
                }
                if r.kind(act) == ActionKind::Gradual {
                    let self_mass = r.prob(x, act, x);
                    prop_assert!(self_mass > 0.0 && self_mass <= 1.0);
                    prop_assert!(r.row_weight_sum(x, act) >= 1.0 - 1e-12);
                }
            }
        }
    }

    #[test]
    fn gradual_rows_match_the_source_model(seed in any::<u64>()) {
        let model = random_model(seed);
        let r = reduce(&model).unwrap();
        for x in 0..model.n_states() {
            let w = model.bound(x);
            for a in 0..model.n_gradual() {
                let factor = w / (w - model.cost_rate(x, a));
                for y in 0..model.n_states() {
                    let expected_p =
                        model.rate(x, a, y) / w + if y == x { 1.0 } else { 0.0 };
                    prop_assert!((r.prob(x, a, y) - expected_p).abs() <= 1e-15);
                    prop_assert!(
                        (r.weight(x, a, y) - factor * expected_p).abs() <= 1e-15
                    );
                }
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn value_iterates_are_monotone_and_bounded(seed in any::<u64>()) {
        let model = random_model(seed);
        let r = reduce(&model).unwrap();
        let mut v = vec![1.0; r.n_states()];
        for _ in 0..300 {
            let next = bellman_apply(&r, &v);
            for x in 0..r.n_states() {
                prop_assert!(next[x] >= 1.0);
                if next[x].is_finite() && v[x].is_finite() {
                    prop_assert!(
                        next[x] >= v[x] - 1e-15 * v[x],
                        "seed {seed} state {x}: {} -> {}",
                        v[x],
                        next[x]
                    );
                }
            }
            v = next;
        }
    }

    #[test]
    fn extracted_policies_achieve_the_value(seed in any::<u64>()) {
        let model = random_model(seed);
        let r = reduce(&model).unwrap();
        let opts = solve_opts();
        let sol = value_iterate(&r, &opts);
        prop_assume!(!matches!(sol.status, SolveStatus::MaxIterations));

        // One-step optimality at converged states.
        let tv = bellman_apply(&r, &sol.values);
        for x in 0..r.n_states() {
            if sol.values[x].is_finite() {
                prop_assert!((tv[x] - sol.values[x]).abs() <= 10.0 * opts.abs_tol);
            }
        }

        // The conserving selector's policy attains the value function.
        let policy = extract_policy(&r, &sol.values, DEFAULT_TIE_TOL);
        let achieved = evaluate_policy(&r, &policy, &opts);
        for x in 0..r.n_states() {
            if sol.values[x].is_finite() {
                prop_assert!(
                    (achieved.values[x] - sol.values[x]).abs() <= 1e-9,
                    "seed {seed} state {x}: policy value {} vs {}",
                    achieved.values[x],
                    sol.values[x]
                );
            }
        }
    }

    #[test]
    fn linear_solve_seconds_the_iterative_evaluation(seed in any::<u64>()) {
        let model = random_model_with(seed, 3, 2, 1);
        let r = reduce(&model).unwrap();
        let opts = solve_opts();
        let enumeration = enumerate_policies(&r, 1_000).unwrap();
        for policy in enumeration.iter() {
            let iterative = evaluate_policy(&r, &policy, &opts);
            if let Some(direct) = policy_value_linear(&r, &policy) {
                for x in 0..r.n_states() {
                    prop_assert!(
                        iterative.values[x].is_finite(),
                        "linear route produced a value where iteration diverged"
                    );
                    prop_assert!(
                        (iterative.values[x] - direct[x]).abs()
                            <= 1e-8 * direct[x].abs().max(1.0),
                        "seed {seed} state {x}: {} vs {}",
                        iterative.values[x],
                        direct[x]
                    );
                }
            }
        }
    }
}

#[test]
fn oracle_matches_value_iteration_on_the_seeded_example() {
    // 3 states, 2 gradual + 2 impulse actions, seed 42.
    let model = random_model_with(42, 3, 2, 2);
    let r = reduce(&model).unwrap();
    let opts = solve_opts();
    let vi = value_iterate(&r, &opts);
    let oracle = brute_force_value(&r, &opts, 1_000_000).unwrap();
    assert_eq!(oracle.n_unconverged, 0);
    for x in 0..r.n_states() {
        assert_eq!(
            vi.values[x].is_infinite(),
            oracle.values[x].is_infinite(),
            "divergence disagreement at state {x}"
        );
        if vi.values[x].is_finite() {
            assert!(
                (vi.values[x] - oracle.values[x]).abs() <= 1e-8,
                "state {x}: {} vs {}",
                vi.values[x],
                oracle.values[x]
            );
        }
    }
}

#[test]
fn oracle_minimum_is_attained_by_some_policy() {
    for seed in 0..20u64 {
        let model = random_model(seed);
        let r = reduce(&model).unwrap();
        let opts = solve_opts();
        let enumeration = match enumerate_policies(&r, 4_000) {
            Ok(e) => e,
            Err(_) => continue,
        };
        let oracle = brute_force_value(&r, &opts, 4_000).unwrap();
        let evals: Vec<Vec<f64>> = enumeration
            .iter()
            .map(|p| evaluate_policy(&r, &p, &opts).values)
            .collect();
        for x in 0..r.n_states() {
            if oracle.values[x].is_finite() {
                let attained = evals
                    .iter()
                    .any(|v| (v[x] - oracle.values[x]).abs() <= 1e-9);
                assert!(attained, "seed {seed} state {x}: minimum not attained");
            } else {
                assert!(evals.iter().all(|v| v[x].is_infinite()));
            }
        }
    }
}
