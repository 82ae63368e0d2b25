//! Brute-force cross-check of the solver on small instances: enumerate every
//! deterministic stationary policy, evaluate each one, and take the pointwise
//! minimum. An optimal deterministic stationary policy exists, so on models
//! small enough to enumerate this is an independent route to the value
//! function that bypasses the Bellman minimization entirely.
//!
//! Enumeration skips, per state, the no-op impulses excluded by the solver;
//! a policy built on them loops at a single time instant and never improves
//! the minimum. Policies are generated in mixed-radix order with state 0 as
//! the least significant digit and action indices ascending.

use rayon::prelude::*;
use thiserror::Error;

use crate::reduction::ReducedModel;
use crate::solver::{evaluate_policy, PolicyChoice, SolveOptions, SolveStatus, StationaryPolicy};

/// Default bound on the number of policies the oracle will enumerate.
pub const DEFAULT_ENUMERATION_CAP: u64 = 1_000_000;

#[derive(Debug, Error)]
#[error("enumeration refused: {count} deterministic stationary policies exceed the cap of {cap}")]
pub struct EnumerationCapError {
    pub count: u128,
    pub cap: u64,
}

/// Number of deterministic stationary policies, after per-state no-op
/// exclusions (saturating).
pub fn policy_count(model: &ReducedModel) -> u128 {
    allowed_actions(model)
        .iter()
        .fold(1u128, |acc, actions| {
            acc.saturating_mul(actions.len() as u128)
        })
}

fn allowed_actions(model: &ReducedModel) -> Vec<Vec<usize>> {
    (0..model.n_states())
        .map(|x| {
            (0..model.n_actions())
                .filter(|&a| !model.is_noop_impulse(x, a))
                .collect()
        })
        .collect()
}

/// Deterministic enumeration of all stationary policies of a reduced model.
pub struct PolicyEnumeration {
    allowed: Vec<Vec<usize>>,
    n_gradual: usize,
    count: u64,
}

impl PolicyEnumeration {
    pub fn count(&self) -> u64 {
        self.count
    }

    /// Decodes the `k`-th policy (mixed radix, state 0 least significant).
    pub fn decode(&self, mut k: u64) -> StationaryPolicy {
        debug_assert!(k < self.count);
        let choice = self
            .allowed
            .iter()
            .map(|actions| {
                let radix = actions.len() as u64;
                let flat = actions[(k % radix) as usize];
                k /= radix;
                if flat < self.n_gradual {
                    PolicyChoice::Gradual(flat)
                } else {
                    PolicyChoice::Impulse(flat - self.n_gradual)
                }
            })
            .collect();
        StationaryPolicy { choice }
    }

    pub fn iter(&self) -> impl Iterator<Item = StationaryPolicy> + '_ {
        (0..self.count).map(|k| self.decode(k))
    }
}

/// Prepares the policy enumeration, refusing if the policy count exceeds
/// `cap`.
pub fn enumerate_policies(
    model: &ReducedModel,
    cap: u64,
) -> Result<PolicyEnumeration, EnumerationCapError> {
    let count = policy_count(model);
    if count > cap as u128 {
        return Err(EnumerationCapError { count, cap });
    }
    Ok(PolicyEnumeration {
        allowed: allowed_actions(model),
        n_gradual: model.n_gradual(),
        count: count as u64,
    })
}

#[derive(Debug, Clone)]
pub struct BruteForceResult {
    /// Pointwise minimum over all enumerated policies; `+inf` where every
    /// policy diverges.
    pub values: Vec<f64>,
    pub n_policies: u64,
    /// Policies whose evaluation exhausted the iteration budget without
    /// settling; their contribution to the minimum is untrusted.
    pub n_unconverged: u64,
}

/// Evaluates every policy and takes the pointwise minimum. Policy
/// evaluations run in parallel; the minimum is exact, so the aggregation
/// order does not matter.
pub fn brute_force_value(
    model: &ReducedModel,
    opts: &SolveOptions,
    cap: u64,
) -> Result<BruteForceResult, EnumerationCapError> {
    let enumeration = enumerate_policies(model, cap)?;
    let n = model.n_states();
    let identity = || (vec![f64::INFINITY; n], 0u64);
    let (values, n_unconverged) = (0..enumeration.count())
        .into_par_iter()
        .map(|k| {
            let sol = evaluate_policy(model, &enumeration.decode(k), opts);
            let stuck = matches!(sol.status, SolveStatus::MaxIterations) as u64;
            (sol.values, stuck)
        })
        .reduce(identity, |(mut best, stuck_a), (candidate, stuck_b)| {
            for (b, c) in best.iter_mut().zip(candidate) {
                if c < *b {
                    *b = c;
                }
            }
            (best, stuck_a + stuck_b)
        });

    Ok(BruteForceResult {
        values,
        n_policies: enumeration.count(),
        n_unconverged,
    })
}

/// Second opinion on the fixed-point iteration: solves the policy's linear
/// fixed-point equation directly by dense elimination.
///
/// States whose weight row is exactly the identity are pinned at 1 (the
/// minimal fixed point); the remaining block must be strictly contractive,
/// otherwise `None` is returned and the iterative route stands alone.
pub fn policy_value_linear(
    model: &ReducedModel,
    policy: &StationaryPolicy,
) -> Option<Vec<f64>> {
    let n = model.n_states();
    let rows: Vec<&[f64]> = (0..n)
        .map(|x| model.weight_row(x, policy.flat_action(model, x)))
        .collect();

    let pinned: Vec<bool> = (0..n)
        .map(|x| {
            rows[x][x] == 1.0
                && rows[x]
                    .iter()
                    .enumerate()
                    .all(|(y, &v)| y == x || v == 0.0)
        })
        .collect();
    let free: Vec<usize> = (0..n).filter(|&x| !pinned[x]).collect();
    if free.is_empty() {
        return Some(vec![1.0; n]);
    }

    let k = free.len();
    let block = |i: usize, j: usize| rows[free[i]][free[j]];

    // Spectral-radius estimate of the free block by sup-norm power iteration;
    // the block is entrywise nonnegative, so the growth ratio converges to
    // the dominant eigenvalue.
    let mut v = vec![1.0; k];
    let mut growth = 0.0;
    for _ in 0..500 {
        let mut next = vec![0.0; k];
        for i in 0..k {
            let mut acc = 0.0;
            for j in 0..k {
                acc += block(i, j) * v[j];
            }
            next[i] = acc;
        }
        let norm = next.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        if norm == 0.0 {
            growth = 0.0;
            break;
        }
        growth = norm;
        for x in &mut next {
            *x /= norm;
        }
        v = next;
    }
    if growth >= 1.0 - 1e-9 {
        return None;
    }

    // Solve (I - B) z = B_pinned * 1 by Gaussian elimination with partial
    // pivoting.
    let mut a = vec![0.0; k * k];
    let mut rhs = vec![0.0; k];
    for i in 0..k {
        for j in 0..k {
            a[i * k + j] = if i == j { 1.0 - block(i, j) } else { -block(i, j) };
        }
        rhs[i] = (0..n)
            .filter(|y| pinned[*y])
            .map(|y| rows[free[i]][y])
            .sum();
    }
    for col in 0..k {
        let pivot = (col..k).max_by(|&r1, &r2| {
            a[r1 * k + col]
                .abs()
                .partial_cmp(&a[r2 * k + col].abs())
                .unwrap()
        })?;
        if a[pivot * k + col].abs() < 1e-12 {
            return None;
        }
        if pivot != col {
            for j in 0..k {
                a.swap(col * k + j, pivot * k + j);
            }
            rhs.swap(col, pivot);
        }
        for row in col + 1..k {
            let factor = a[row * k + col] / a[col * k + col];
            if factor == 0.0 {
                continue;
            }
            for j in col..k {
                a[row * k + j] -= factor * a[col * k + j];
            }
            rhs[row] -= factor * rhs[col];
        }
    }
    let mut z = vec![0.0; k];
    for i in (0..k).rev() {
        let mut acc = rhs[i];
        for j in i + 1..k {
            acc -= a[i * k + j] * z[j];
        }
        z[i] = acc / a[i * k + i];
    }

    let mut out = vec![1.0; n];
    for (i, &x) in free.iter().enumerate() {
        out[x] = z[i];
    }
    Some(out)
}
