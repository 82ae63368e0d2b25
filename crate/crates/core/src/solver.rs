//! Value iteration on the reduced model, policy extraction, fixed-policy
//! evaluation, and residual verification of the continuous-time optimality
//! inequalities.
//!
//! The Bellman operator is
//!
//! ```text
//! (T V)(x) = min over actions of  sum_y weight(x, action, y) * V(y)
//! ```
//!
//! restricted to actions that are not no-op impulses at `x`. Iterating from
//! `V0 = 1` produces a pointwise nondecreasing sequence converging to the
//! minimal fixed point >= 1, which is the value function of both the reduced
//! and the continuous-time problem. Values may be `+inf`; a state whose
//! iterate exceeds the divergence cap is flagged as `+inf` once and for all,
//! and iteration continues for the remaining states with the convention
//! `0 * inf := 0`.
//!
//! There is no a-priori convergence-rate guarantee (only monotone
//! convergence), so the stopping rule is a sup-norm tolerance over the
//! non-flagged states plus an iteration budget; correctness is cross-checked
//! against the enumeration oracle rather than an iteration-count bound.

use serde::{Deserialize, Serialize};

use crate::model::CtmdpModel;
use crate::reduction::ReducedModel;

/// Default tie tolerance for selector ties in [`extract_policy`].
pub const DEFAULT_TIE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SolveOptions {
    /// Absolute sup-norm stopping tolerance over non-diverged states.
    pub abs_tol: f64,
    /// Iteration budget.
    pub max_iter: usize,
    /// A state whose iterate exceeds this value is flagged as diverged
    /// (`+inf`) for the rest of the run.
    pub divergence_cap: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            abs_tol: 1e-10,
            max_iter: 1_000_000,
            divergence_cap: 1e12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", content = "states", rename_all = "snake_case")]
pub enum SolveStatus {
    /// Sup-norm delta fell below tolerance and every state is finite.
    Converged,
    /// Iteration budget exhausted before the finite states settled.
    MaxIterations,
    /// Finite states settled, but the listed states diverged to `+inf`.
    DivergedStates(Vec<usize>),
}

/// Result of a monotone fixed-point iteration.
#[derive(Debug, Clone, Serialize)]
pub struct ValueSolution {
    /// Value per state; `+inf` marks diverged states.
    pub values: Vec<f64>,
    pub iterations: usize,
    /// Last sup-norm change over non-diverged states.
    pub sup_norm_delta: f64,
    pub status: SolveStatus,
}

impl ValueSolution {
    pub fn diverged_states(&self) -> Vec<usize> {
        self.values
            .iter()
            .enumerate()
            .filter(|(_, v)| v.is_infinite())
            .map(|(x, _)| x)
            .collect()
    }

    pub fn is_finite(&self, x: usize) -> bool {
        self.values[x].is_finite()
    }
}

/// Per-state choice of a deterministic stationary policy: either apply an
/// impulse now, or hold a gradual action until the next natural jump.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "index", rename_all = "lowercase")]
pub enum PolicyChoice {
    Gradual(usize),
    Impulse(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StationaryPolicy {
    pub choice: Vec<PolicyChoice>,
}

impl StationaryPolicy {
    /// Flat action index of the choice at `x` in the reduced model's
    /// gradual-then-impulse ordering.
    pub fn flat_action(&self, model: &ReducedModel, x: usize) -> usize {
        match self.choice[x] {
            PolicyChoice::Gradual(a) => a,
            PolicyChoice::Impulse(b) => model.n_gradual() + b,
        }
    }
}

/// Weighted sum with the `0 * inf := 0` convention, accumulated in ascending
/// target order so results are bit-reproducible.
#[inline]
fn weighted_sum(weights: &[f64], values: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (w, v) in weights.iter().zip(values) {
        if *w > 0.0 {
            acc += w * v;
        }
    }
    acc
}

/// One application of the Bellman operator. No-op impulses are excluded from
/// the minimization; the result is monotone in `values` and everywhere >= 1
/// whenever the input is.
pub fn bellman_apply(model: &ReducedModel, values: &[f64]) -> Vec<f64> {
    debug_assert_eq!(values.len(), model.n_states());
    (0..model.n_states())
        .map(|x| {
            let mut best = f64::INFINITY;
            for action in 0..model.n_actions() {
                if model.is_noop_impulse(x, action) {
                    continue;
                }
                let val = weighted_sum(model.weight_row(x, action), values);
                if val < best {
                    best = val;
                }
            }
            // The operator maps [1, inf] into itself; a row whose stored
            // probabilities sum to one minus an ulp must not leak below 1.
            best.max(1.0)
        })
        .collect()
}

/// Monotone iteration of `step` from the constant function 1, with sticky
/// divergence flags and the shared stopping rule.
fn monotone_iterate(
    n_states: usize,
    opts: &SolveOptions,
    step: impl Fn(&[f64]) -> Vec<f64>,
) -> ValueSolution {
    let mut values = vec![1.0; n_states];
    let mut iterations = 0;
    let mut sup_norm_delta = f64::INFINITY;
    let mut status = SolveStatus::MaxIterations;

    for it in 1..=opts.max_iter {
        let mut next = step(&values);
        let mut newly_flagged = false;
        let mut delta: f64 = 0.0;
        for x in 0..n_states {
            if values[x].is_infinite() {
                next[x] = f64::INFINITY;
            } else if next[x] > opts.divergence_cap {
                next[x] = f64::INFINITY;
                newly_flagged = true;
            } else {
                delta = delta.max((next[x] - values[x]).abs());
            }
        }
        values = next;
        iterations = it;
        sup_norm_delta = delta;
        // Never stop on the iteration that flags a state: its infinity still
        // has to propagate into the states that feed on it.
        if !newly_flagged && delta < opts.abs_tol {
            let diverged: Vec<usize> = values
                .iter()
                .enumerate()
                .filter(|(_, v)| v.is_infinite())
                .map(|(x, _)| x)
                .collect();
            status = if diverged.is_empty() {
                SolveStatus::Converged
            } else {
                SolveStatus::DivergedStates(diverged)
            };
            break;
        }
    }

    ValueSolution {
        values,
        iterations,
        sup_norm_delta,
        status,
    }
}

/// Value iteration `V0 = 1`, `V(n+1) = T V(n)`.
pub fn value_iterate(model: &ReducedModel, opts: &SolveOptions) -> ValueSolution {
    monotone_iterate(model.n_states(), opts, |v| bellman_apply(model, v))
}

/// Evaluates a fixed policy: the smallest fixed point >= 1 of the one-action
/// affine map `V -> M V` with `M(x, y) = weight(x, choice(x), y)`, computed
/// by the same monotone iteration and divergence handling as
/// [`value_iterate`]. No-op exclusions do not apply here: a hand-built
/// policy may reference any action.
pub fn evaluate_policy(
    model: &ReducedModel,
    policy: &StationaryPolicy,
    opts: &SolveOptions,
) -> ValueSolution {
    assert_eq!(policy.choice.len(), model.n_states());
    let rows: Vec<&[f64]> = (0..model.n_states())
        .map(|x| model.weight_row(x, policy.flat_action(model, x)))
        .collect();
    monotone_iterate(model.n_states(), opts, |v| {
        rows.iter()
            .map(|row| weighted_sum(row, v).max(1.0))
            .collect()
    })
}

/// Selects, per state, an action attaining the Bellman minimum at `values`.
///
/// Tie-breaking encodes "apply an impulse immediately wherever that is
/// optimal": if any impulse attains the minimum within `tie_tol`, the
/// lowest-indexed such impulse is chosen; otherwise the lowest-indexed
/// minimizing gradual action. Diverged states get the lowest-indexed gradual
/// action as a documented placeholder so downstream simulation never sees an
/// undefined policy; their entries should not be trusted.
pub fn extract_policy(model: &ReducedModel, values: &[f64], tie_tol: f64) -> StationaryPolicy {
    let ng = model.n_gradual();
    let choice = (0..model.n_states())
        .map(|x| {
            if !values[x].is_finite() {
                return PolicyChoice::Gradual(0);
            }
            let action_value = |action: usize| -> f64 {
                if model.is_noop_impulse(x, action) {
                    f64::INFINITY
                } else {
                    weighted_sum(model.weight_row(x, action), values)
                }
            };
            let mut best = f64::INFINITY;
            for action in 0..model.n_actions() {
                best = best.min(action_value(action));
            }
            for action in ng..model.n_actions() {
                if action_value(action) <= best + tie_tol {
                    return PolicyChoice::Impulse(action - ng);
                }
            }
            for action in 0..ng {
                if action_value(action) <= best + tie_tol {
                    return PolicyChoice::Gradual(action);
                }
            }
            PolicyChoice::Gradual(0)
        })
        .collect();
    StationaryPolicy { choice }
}

/// Residuals of the continuous-time optimality inequalities at one state.
///
/// At a finite-valued state the candidate value must satisfy, up to the
/// report tolerance:
///
/// * gradual side >= 0:
///   `r_g(x) = min_a [ sum_{y != x} V(y) q(y|x,a) - (exit_rate(x,a) - c_g(x,a)) V(x) ]`
/// * impulse side >= 0:
///   `r_i(x) = min_b [ sum_y exp(c_i(x,b,y)) V(y) Q(y|x,b) ] - V(x)`
///
/// and one of the two must vanish (`min(r_g, r_i) <= tol`). The sets of
/// states where the gradual or impulse side is tight classify where it is
/// optimal to hold and where to intervene immediately.
#[derive(Debug, Clone, Serialize)]
pub struct StateResidual {
    pub state: usize,
    /// False for diverged states, which are exempt from the inequalities;
    /// their residual fields are meaningless (NaN).
    pub finite: bool,
    pub gradual_residual: f64,
    pub impulse_residual: f64,
    /// Gradual side tight: `|r_g| <= tol`.
    pub gradual_tight: bool,
    /// Impulse side tight: `|r_i| <= tol`.
    pub impulse_tight: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ResidualReport {
    pub tol: f64,
    pub rows: Vec<StateResidual>,
}

impl ResidualReport {
    /// Most negative residual observed (0 when every inequality holds).
    pub fn worst_violation(&self) -> f64 {
        self.rows
            .iter()
            .filter(|r| r.finite)
            .flat_map(|r| [r.gradual_residual, r.impulse_residual])
            .filter(|v| v.is_finite())
            .fold(0.0_f64, |acc, v| acc.min(v))
    }

    /// Largest `min(r_g, r_i)` over finite states; at an exact fixed point
    /// this is <= 0 because one side is tight at every state.
    pub fn worst_attainment(&self) -> f64 {
        self.rows
            .iter()
            .filter(|r| r.finite)
            .map(|r| r.gradual_residual.min(r.impulse_residual))
            .fold(0.0_f64, f64::max)
    }

    /// Checks that every finite state where the impulse side is not tight is
    /// covered by a tight gradual side.
    pub fn cover_holds(&self) -> bool {
        self.rows
            .iter()
            .filter(|r| r.finite)
            .all(|r| r.impulse_tight || r.gradual_tight)
    }
}

/// Evaluates the optimality-inequality residuals of a candidate value vector
/// against the source model, classifying each finite state by which side is
/// tight. Unlike the Bellman minimization, the impulse-side minimum ranges
/// over *all* impulses, so a no-op impulse legitimately makes the impulse
/// side tight.
pub fn verify_optimality(model: &CtmdpModel, values: &[f64], tol: f64) -> ResidualReport {
    assert_eq!(values.len(), model.n_states());
    let n = model.n_states();
    let rows = (0..n)
        .map(|x| {
            if !values[x].is_finite() {
                return StateResidual {
                    state: x,
                    finite: false,
                    gradual_residual: f64::NAN,
                    impulse_residual: f64::NAN,
                    gradual_tight: false,
                    impulse_tight: false,
                };
            }

            let mut gradual_residual = f64::INFINITY;
            for a in 0..model.n_gradual() {
                let mut flow = 0.0;
                for y in 0..n {
                    if y == x {
                        continue;
                    }
                    let rate = model.rate(x, a, y);
                    if rate > 0.0 {
                        flow += values[y] * rate;
                    }
                }
                let r = flow - (model.exit_rate(x, a) - model.cost_rate(x, a)) * values[x];
                gradual_residual = gradual_residual.min(r);
            }

            let mut impulse_residual = f64::INFINITY;
            for b in 0..model.n_impulse() {
                let mut expect = 0.0;
                for y in 0..n {
                    let p = model.jump_prob(x, b, y);
                    if p > 0.0 {
                        expect += model.impulse_cost(x, b, y).exp() * values[y] * p;
                    }
                }
                impulse_residual = impulse_residual.min(expect - values[x]);
            }

            StateResidual {
                state: x,
                finite: true,
                gradual_residual,
                impulse_residual,
                gradual_tight: gradual_residual.abs() <= tol,
                impulse_tight: impulse_residual.abs() <= tol,
            }
        })
        .collect();

    ResidualReport { tol, rows }
}
