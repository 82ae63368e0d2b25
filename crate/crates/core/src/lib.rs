//! Solver and simulator for finite gradual-impulse continuous-time Markov
//! decision processes (CTMDPs) under the exponential-utility criterion.
//!
//! The controller of a finite-state CTMDP can act in two ways: hold a
//! *gradual* action `a`, which shapes the transition rates `q(y|x,a)` and
//! accrues cost at rate `c_g(x,a)` until the next natural jump, or apply an
//! *impulse* `b`, which instantaneously moves the state according to
//! `Q(y|x,b)` at lump cost `c_i(x,b,y)`. Several impulses may be applied at
//! the same time instant. The objective is the risk-sensitive (multiplicative)
//! criterion: minimize `E[exp(total cost)]` over policies.
//!
//! The pipeline implemented here:
//!
//! 1. [`model`] — the continuous-time primitives and their validation.
//! 2. [`reduction`] — an equivalent discrete-time MDP whose action set is the
//!    union of gradual and impulse actions, with per-transition multiplicative
//!    cost weights. The value function and optimal deterministic stationary
//!    policies of this reduced model coincide with those of the
//!    continuous-time problem.
//! 3. [`solver`] — monotone value iteration `V0 = 1`, `V(n+1) = T V(n)` on the
//!    reduced model, policy extraction, fixed-policy evaluation, and residual
//!    verification of the continuous-time optimality inequalities.
//! 4. [`oracle`] — brute-force cross-check: enumerate all deterministic
//!    stationary policies, evaluate each, take the pointwise minimum.
//! 5. [`sim`] — Monte Carlo simulation of continuous-time paths under a
//!    stationary policy, estimating `E[exp(total cost)]` with reproducible
//!    per-path random streams.
//!
//! Values live in `[1, +inf]`; `f64::INFINITY` marks states whose value
//! diverges. Throughout, a zero transition weight absorbs an infinite value
//! (`0 * inf := 0`).

pub mod model;
pub mod oracle;
pub mod reduction;
pub mod rng;
pub mod sim;
pub mod solver;

pub use model::{default_bounding_function, rat_example, CtmdpModel, ModelError, ValidationReport};
pub use reduction::{reduce, ActionKind, ReducedModel};
pub use sim::{estimate_utility, simulate_path, PathRecord, SimOptions, SimulationReport};
pub use solver::{
    bellman_apply, evaluate_policy, extract_policy, value_iterate, verify_optimality,
    PolicyChoice, ResidualReport, SolveOptions, SolveStatus, StationaryPolicy, ValueSolution,
};
