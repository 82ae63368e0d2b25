//! Seeded random-model corpus shared by the property and acceptance suites.
//!
//! Every generated model is valid by construction and contains a zero-cost
//! absorbing state (state 0) that every gradual action feeds with at least
//! 30% of its exit rate, so most policies have finite value and the solver
//! cross-checks are informative. Rates stay in [0, 5], gradual cost rates in
//! [0, 2], impulse costs in [0, 1]; nonzero costs are bounded away from zero
//! so divergent policies blow past the cap quickly instead of crawling.

// Each test target compiles its own copy; not every target uses every item.
#![allow(dead_code)]

use gimdp_core::model::{CtmdpModel, ModelFile};
use gimdp_core::rng::PathRng;

/// Base seed of the acceptance corpus.
pub const CORPUS_BASE: u64 = 1000;

pub fn corpus_seeds(count: usize) -> impl Iterator<Item = u64> {
    (0..count as u64).map(|i| CORPUS_BASE + i)
}

/// Random model with sizes drawn from the seed: 2-4 states, 1-3 gradual and
/// 1-3 impulse actions.
pub fn random_model(seed: u64) -> CtmdpModel {
    let mut dims = PathRng::from_seed(seed ^ 0x5EED_D1CE);
    let n_states = 2 + (dims.next_u64() % 3) as usize;
    let n_gradual = 1 + (dims.next_u64() % 3) as usize;
    let n_impulse = 1 + (dims.next_u64() % 3) as usize;
    random_model_with(seed, n_states, n_gradual, n_impulse)
}

/// Random model with fixed dimensions.
pub fn random_model_with(seed: u64, n: usize, ng: usize, ni: usize) -> CtmdpModel {
    assert!(n >= 2 && ng >= 1 && ni >= 1);
    let mut rng = PathRng::from_seed(seed);

    let mut q = Vec::with_capacity(n);
    let mut transition = Vec::with_capacity(n);
    let mut c_gradual = Vec::with_capacity(n);
    let mut c_impulse = Vec::with_capacity(n);

    for x in 0..n {
        let mut q_rows = Vec::with_capacity(ng);
        let mut cg_row = Vec::with_capacity(ng);
        for _ in 0..ng {
            if x == 0 {
                // Zero-cost absorbing state.
                q_rows.push(vec![0.0; n]);
                cg_row.push(0.0);
                continue;
            }
            if rng.uniform01() < 0.10 {
                // Occasional hold-forever action.
                q_rows.push(vec![0.0; n]);
            } else {
                let exit = 0.4 + 4.1 * rng.uniform01();
                let share_absorb = 0.3 + 0.6 * rng.uniform01();
                let others: Vec<usize> = (1..n).filter(|&y| y != x).collect();
                let raw: Vec<f64> = others.iter().map(|_| rng.uniform01_open_low()).collect();
                let raw_sum: f64 = raw.iter().sum();
                let mut row = vec![0.0; n];
                row[0] = exit * share_absorb;
                for (k, &y) in others.iter().enumerate() {
                    row[y] = exit * (1.0 - share_absorb) * raw[k] / raw_sum;
                }
                if others.is_empty() {
                    row[0] = exit;
                }
                let off_sum: f64 = row.iter().sum();
                row[x] = -off_sum;
                q_rows.push(row);
            }
            let cost = if rng.uniform01() < 0.25 {
                0.0
            } else {
                0.05 + 1.95 * rng.uniform01()
            };
            cg_row.push(cost);
        }
        q.push(q_rows);
        c_gradual.push(cg_row);

        let mut t_rows = Vec::with_capacity(ni);
        let mut ci_rows = Vec::with_capacity(ni);
        for _ in 0..ni {
            if x == 0 {
                // No-op at the absorbing state; enumeration will skip it.
                let mut row = vec![0.0; n];
                row[0] = 1.0;
                t_rows.push(row);
                ci_rows.push(vec![0.0; n]);
                continue;
            }
            let row = if rng.uniform01() < 0.35 {
                // Hard reset to the absorbing state.
                let mut row = vec![0.0; n];
                row[0] = 1.0;
                row
            } else {
                let raw: Vec<f64> = (0..n).map(|_| rng.uniform01_open_low()).collect();
                let sum: f64 = raw.iter().sum();
                raw.into_iter().map(|v| v / sum).collect()
            };
            t_rows.push(row);
            // Strictly positive lump costs keep divergent impulse cycles
            // fast-growing and rule out free instantaneous loops.
            ci_rows.push((0..n).map(|_| 0.05 + 0.95 * rng.uniform01()).collect());
        }
        transition.push(t_rows);
        c_impulse.push(ci_rows);
    }

    CtmdpModel::from_file(ModelFile {
        n_states: n,
        gradual_actions: (0..ng).map(|a| format!("g{a}")).collect(),
        impulse_actions: (0..ni).map(|b| format!("i{b}")).collect(),
        q,
        transition,
        c_gradual,
        c_impulse,
        w: None,
    })
    .expect("generated models are structurally sound")
}
