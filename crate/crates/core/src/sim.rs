//! Monte Carlo simulation of the controlled continuous-time process under a
//! deterministic stationary policy, and estimation of the exponential
//! utility `E[exp(total cost)]`.
//!
//! A path alternates interventions and holds. At a state whose policy entry
//! is an impulse, impulses are applied back to back at the same time instant
//! until the policy at the reached state is gradual (an *impulse block*);
//! each application draws the post-impulse state and pays the lump cost. At
//! a gradual state the process holds, accruing cost at the gradual rate,
//! until an exponential sojourn ends in a natural jump; a zero exit rate
//! holds the state forever.
//!
//! Truncation: paths stop at the `horizon` (contributing the cost accrued so
//! far), after `impulse_cap` impulses inside one block (an accumulation of
//! interventions at a single time instant, at which point the construction
//! would kill the process), or after `jump_cap` recorded events. Since costs
//! are nonnegative, truncation can only understate `exp(total cost)`, so the
//! Monte Carlo estimate is a lower bound in expectation; the report carries
//! the truncated fraction as a bias bound rather than correcting for it.
//!
//! Estimates here validate the solver; they are not the solver of record.
//! Exponential utilities are heavy-tailed, so the standard error can
//! understate the true uncertainty on small samples.

use rayon::prelude::*;
use serde::Serialize;

use crate::model::CtmdpModel;
use crate::rng::{path_seed, PathRng};
use crate::solver::{PolicyChoice, StationaryPolicy};

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SimOptions {
    /// Time horizon after which a live path is truncated.
    pub horizon: f64,
    /// Maximum impulses within a single block.
    pub impulse_cap: usize,
    /// Maximum recorded events per path. With finite states and bounded
    /// rates, natural jumps cannot accumulate under a stationary policy, so
    /// this is a pure safety net.
    pub jump_cap: usize,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            horizon: 1e4,
            impulse_cap: 100_000,
            jump_cap: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    NaturalJump,
    ImpulseBlock,
}

/// One recorded event. For a natural jump the cost increment is the gradual
/// cost accrued over the sojourn the jump ends; for an impulse block it is
/// the sum of the lump costs inside the block.
#[derive(Debug, Clone, Serialize)]
pub struct PathEvent {
    pub time: f64,
    pub kind: EventKind,
    pub pre_state: usize,
    /// Impulses applied at this instant with their post-impulse states;
    /// empty for natural jumps.
    pub intervention: Vec<(usize, usize)>,
    pub post_state: usize,
    pub cost_increment: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// The path reached a zero-rate, zero-cost hold: no further cost can
    /// accrue.
    AbsorbedZeroCost,
    HorizonReached,
    ImpulseCapHit,
    JumpCapHit,
}

#[derive(Debug, Clone, Serialize)]
pub struct PathRecord {
    pub events: Vec<PathEvent>,
    /// Gradual cost accrued after the last event, up to termination.
    pub tail_cost: f64,
    pub total_cost: f64,
    pub termination: Termination,
}

/// Samples the natural-jump target: categorical over the off-diagonal rates
/// normalized by the exit rate, by the same ascending prefix-sum inversion
/// as [`PathRng::categorical`], skipping the current state.
fn sample_natural_jump(
    model: &CtmdpModel,
    x: usize,
    action: usize,
    exit_rate: f64,
    rng: &mut PathRng,
) -> usize {
    let u = rng.uniform01();
    let mut cum = 0.0;
    let mut fallback = x;
    for y in 0..model.n_states() {
        if y == x {
            continue;
        }
        let rate = model.rate(x, action, y);
        if rate > 0.0 {
            cum += rate / exit_rate;
            if u < cum {
                return y;
            }
            fallback = y;
        }
    }
    fallback
}

/// Simulates one path from `x0` under the policy, with the random stream
/// determined entirely by `rng_seed` (see [`crate::rng`] for the portable
/// derivation).
pub fn simulate_path(
    model: &CtmdpModel,
    policy: &StationaryPolicy,
    x0: usize,
    rng_seed: u64,
    opts: &SimOptions,
) -> PathRecord {
    assert!(x0 < model.n_states(), "initial state out of range");
    assert_eq!(policy.choice.len(), model.n_states());
    assert!(opts.horizon > 0.0);

    let mut rng = PathRng::from_seed(rng_seed);
    let mut t = 0.0;
    let mut x = x0;
    let mut total_cost = 0.0;
    let mut events: Vec<PathEvent> = Vec::new();

    let finish = |events: Vec<PathEvent>, tail: f64, total: f64, termination: Termination| {
        PathRecord {
            events,
            tail_cost: tail,
            total_cost: total,
            termination,
        }
    };

    loop {
        if matches!(policy.choice[x], PolicyChoice::Impulse(_)) {
            let block_pre = x;
            let mut intervention = Vec::new();
            let mut block_cost = 0.0;
            let mut capped = false;
            while let PolicyChoice::Impulse(b) = policy.choice[x] {
                if intervention.len() >= opts.impulse_cap {
                    capped = true;
                    break;
                }
                let y = rng.categorical(model.jump_row(x, b));
                block_cost += model.impulse_cost(x, b, y);
                intervention.push((b, y));
                x = y;
            }
            total_cost += block_cost;
            events.push(PathEvent {
                time: t,
                kind: EventKind::ImpulseBlock,
                pre_state: block_pre,
                intervention,
                post_state: x,
                cost_increment: block_cost,
            });
            if capped {
                return finish(events, 0.0, total_cost, Termination::ImpulseCapHit);
            }
            if events.len() >= opts.jump_cap {
                return finish(events, 0.0, total_cost, Termination::JumpCapHit);
            }
        }

        let PolicyChoice::Gradual(a) = policy.choice[x] else {
            unreachable!("impulse block ends on a gradual state");
        };
        let exit_rate = model.exit_rate(x, a);
        let cost_rate = model.cost_rate(x, a);
        let remaining = opts.horizon - t;

        if exit_rate == 0.0 {
            // Held forever; only the horizon bounds the accrual.
            let tail = cost_rate * remaining;
            total_cost += tail;
            let termination = if cost_rate == 0.0 {
                Termination::AbsorbedZeroCost
            } else {
                Termination::HorizonReached
            };
            return finish(events, tail, total_cost, termination);
        }

        let sojourn = rng.exponential(exit_rate);
        if sojourn >= remaining {
            let tail = cost_rate * remaining;
            total_cost += tail;
            return finish(events, tail, total_cost, Termination::HorizonReached);
        }

        let hold_cost = cost_rate * sojourn;
        total_cost += hold_cost;
        t += sojourn;
        let y = sample_natural_jump(model, x, a, exit_rate, &mut rng);
        events.push(PathEvent {
            time: t,
            kind: EventKind::NaturalJump,
            pre_state: x,
            intervention: Vec::new(),
            post_state: y,
            cost_increment: hold_cost,
        });
        x = y;
        if events.len() >= opts.jump_cap {
            return finish(events, 0.0, total_cost, Termination::JumpCapHit);
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct TerminationCounts {
    pub absorbed_zero_cost: u64,
    pub horizon_reached: u64,
    pub impulse_cap_hit: u64,
    pub jump_cap_hit: u64,
}

impl TerminationCounts {
    fn record(&mut self, t: Termination) {
        match t {
            Termination::AbsorbedZeroCost => self.absorbed_zero_cost += 1,
            Termination::HorizonReached => self.horizon_reached += 1,
            Termination::ImpulseCapHit => self.impulse_cap_hit += 1,
            Termination::JumpCapHit => self.jump_cap_hit += 1,
        }
    }

    pub fn truncated(&self) -> u64 {
        self.horizon_reached + self.impulse_cap_hit + self.jump_cap_hit
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulationReport {
    /// Sample mean of `exp(total cost)`.
    pub estimate: f64,
    /// Sample standard deviation over sqrt(n_paths).
    pub std_error: f64,
    pub n_paths: u64,
    pub terminations: TerminationCounts,
    /// Fraction of paths cut off by the horizon or a cap. Each such path
    /// understates its cost, so the estimate is biased low by an amount this
    /// fraction bounds in probability; it is reported, not corrected.
    pub truncation_bias_bound: f64,
}

/// Estimates `E[exp(total cost)]` from `x0` by averaging independent paths.
///
/// Per-path seeds derive from `(master_seed, path index)`, and aggregation
/// runs in ascending path order, so the report is bit-identical for a given
/// input regardless of how many worker threads execute the paths.
pub fn estimate_utility(
    model: &CtmdpModel,
    policy: &StationaryPolicy,
    x0: usize,
    n_paths: u64,
    master_seed: u64,
    opts: &SimOptions,
) -> SimulationReport {
    assert!(n_paths >= 2, "need at least two paths for a standard error");

    let outcomes: Vec<(f64, Termination)> = (0..n_paths)
        .into_par_iter()
        .map(|i| {
            let record = simulate_path(model, policy, x0, path_seed(master_seed, i), opts);
            (record.total_cost.exp(), record.termination)
        })
        .collect();

    let mut terminations = TerminationCounts::default();
    let mut sum = 0.0;
    for (value, termination) in &outcomes {
        sum += value;
        terminations.record(*termination);
    }
    let mean = sum / n_paths as f64;
    let mut sq = 0.0;
    for (value, _) in &outcomes {
        let d = value - mean;
        sq += d * d;
    }
    let variance = sq / (n_paths - 1) as f64;
    let std_error = (variance / n_paths as f64).sqrt();

    SimulationReport {
        estimate: mean,
        std_error,
        n_paths,
        terminations,
        truncation_bias_bound: terminations.truncated() as f64 / n_paths as f64,
    }
}
