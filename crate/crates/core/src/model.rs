//! Continuous-time primitives of the gradual-impulse control problem and
//! their validation.
//!
//! A model over states `0..n_states` consists of:
//!
//! * a signed rate kernel `q(y|x,a)` per gradual action `a` (units 1/time):
//!   off-diagonal entries are nonnegative and every row sums to zero, so
//!   `exit_rate(x,a) = -q(x|x,a)` is the total jump intensity;
//! * a post-impulse distribution `Q(y|x,b)` per impulse action `b`;
//! * a gradual cost rate `c_g(x,a) >= 0` (cost per unit time) and an impulse
//!   lump cost `c_i(x,b,y) >= 0`;
//! * a bounding function `w(x) >= 1` with `c_g(x,a) + exit_rate(x,a) + 1 <=
//!   w(x)` for every gradual action, which acts as the uniformization rate of
//!   the discrete-time reduction.
//!
//! All costs must be finite. A "forbidden" impulse is modelled by omission,
//! not by an infinite cost; note that a large finite cost is *not* an
//! equivalent substitute for an infinite one under the exponential criterion.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Absolute tolerance for the stochasticity/conservativity checks. Inputs
/// are exact user data, not computed quantities, so this is tight.
pub const VALIDATION_TOL: f64 = 1e-12;

/// On-disk document for a model. Dense nested arrays indexed `[x][a][y]`
/// (rates, impulse data) or `[x][a]` (cost rates); `w` may be omitted, in
/// which case the tightest admissible bounding function is filled in.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelFile {
    pub n_states: usize,
    pub gradual_actions: Vec<String>,
    pub impulse_actions: Vec<String>,
    pub q: Vec<Vec<Vec<f64>>>,
    #[serde(rename = "Q")]
    pub transition: Vec<Vec<Vec<f64>>>,
    pub c_gradual: Vec<Vec<f64>>,
    pub c_impulse: Vec<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w: Option<Vec<f64>>,
}

/// Validated-shape, immutable continuous-time model. Cheap to share across
/// threads; all numeric invariants are checked by [`CtmdpModel::validate`],
/// not by construction.
#[derive(Debug, Clone)]
pub struct CtmdpModel {
    n_states: usize,
    gradual_names: Vec<String>,
    impulse_names: Vec<String>,
    /// Signed rate kernel, flattened `[x][a][y]`.
    rate: Vec<f64>,
    /// Post-impulse distribution, flattened `[x][b][y]`.
    jump: Vec<f64>,
    /// Gradual cost rates, flattened `[x][a]`.
    cost_rate: Vec<f64>,
    /// Impulse lump costs, flattened `[x][b][y]`.
    impulse_cost: Vec<f64>,
    /// Bounding function `w`, one entry per state.
    bound: Vec<f64>,
}

#[derive(Debug, Error)]
pub enum ModelError {
    /// Structural problem: array extents disagree with the declared sizes.
    /// Reported distinctly from numeric invariant violations.
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("parameter {name} = {value} out of range: requires {requirement}")]
    Parameter {
        name: &'static str,
        value: f64,
        requirement: &'static str,
    },
    #[error("model violates invariants:\n{0}")]
    Invalid(ValidationReport),
    #[error("failed to parse model document: {0}")]
    Parse(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A single named invariant violation, with its index tuple and magnitude.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Violation {
    /// `q(y|x,a) < 0` for `y != x`.
    NegativeOffDiagonalRate {
        state: usize,
        action: usize,
        target: usize,
        value: f64,
    },
    /// Rate row does not sum to zero within tolerance.
    RateRowSum { state: usize, action: usize, sum: f64 },
    /// Post-impulse probability outside `[0, 1]`.
    TransitionEntryRange {
        state: usize,
        action: usize,
        target: usize,
        value: f64,
    },
    /// Post-impulse row does not sum to one within tolerance.
    TransitionRowSum { state: usize, action: usize, sum: f64 },
    /// Gradual cost rate negative or non-finite.
    InvalidCostRate { state: usize, action: usize, value: f64 },
    /// Impulse cost negative or non-finite.
    InvalidImpulseCost {
        state: usize,
        action: usize,
        target: usize,
        value: f64,
    },
    /// Non-finite rate entry.
    NonFiniteRate {
        state: usize,
        action: usize,
        target: usize,
        value: f64,
    },
    /// Bounding value below one or non-finite.
    InvalidBound { state: usize, value: f64 },
    /// Bounding inequality `c_g(x,a) + exit_rate(x,a) + 1 <= w(x)` fails.
    BoundTooSmall {
        state: usize,
        action: usize,
        required: f64,
        bound: f64,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Violation::NegativeOffDiagonalRate {
                state,
                action,
                target,
                value,
            } => write!(
                f,
                "q({target}|{state},a{action}) = {value} is negative off the diagonal"
            ),
            Violation::RateRowSum { state, action, sum } => write!(
                f,
                "rate row (x={state}, a={action}) sums to {sum}, expected 0"
            ),
            Violation::TransitionEntryRange {
                state,
                action,
                target,
                value,
            } => write!(
                f,
                "Q({target}|{state},b{action}) = {value} outside [0, 1]"
            ),
            Violation::TransitionRowSum { state, action, sum } => write!(
                f,
                "post-impulse row (x={state}, b={action}) sums to {sum}, expected 1"
            ),
            Violation::InvalidCostRate {
                state,
                action,
                value,
            } => write!(
                f,
                "cost rate c_g({state}, a{action}) = {value} must be finite and >= 0"
            ),
            Violation::InvalidImpulseCost {
                state,
                action,
                target,
                value,
            } => write!(
                f,
                "impulse cost c_i({state}, b{action}, {target}) = {value} must be finite and >= 0"
            ),
            Violation::NonFiniteRate {
                state,
                action,
                target,
                value,
            } => write!(f, "rate q({target}|{state},a{action}) = {value} is not finite"),
            Violation::InvalidBound { state, value } => {
                write!(f, "w({state}) = {value} must be finite and >= 1")
            }
            Violation::BoundTooSmall {
                state,
                action,
                required,
                bound,
            } => write!(
                f,
                "w({state}) = {bound} < {required} = c_g + exit rate + 1 at action a{action}"
            ),
        }
    }
}

/// Outcome of [`CtmdpModel::validate`]: all invariant violations found, in a
/// deterministic order. Empty means the model is valid.
#[derive(Debug, Clone, Default, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn len(&self) -> usize {
        self.violations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "ok");
        }
        for v in &self.violations {
            writeln!(f, "- {v}")?;
        }
        Ok(())
    }
}

impl CtmdpModel {
    /// Builds a model from its on-disk document, checking dimensional
    /// consistency and filling in the default bounding function when `w` is
    /// absent. Numeric invariants are *not* checked here; call
    /// [`CtmdpModel::validate`].
    pub fn from_file(file: ModelFile) -> Result<Self, ModelError> {
        let n = file.n_states;
        let ng = file.gradual_actions.len();
        let ni = file.impulse_actions.len();
        if n == 0 {
            return Err(ModelError::Dimension("n_states must be positive".into()));
        }
        if ng == 0 {
            return Err(ModelError::Dimension(
                "at least one gradual action is required".into(),
            ));
        }
        if ni == 0 {
            return Err(ModelError::Dimension(
                "at least one impulse action is required".into(),
            ));
        }

        let rate = flatten3("q", &file.q, n, ng, n)?;
        let jump = flatten3("Q", &file.transition, n, ni, n)?;
        let cost_rate = flatten2("c_gradual", &file.c_gradual, n, ng)?;
        let impulse_cost = flatten3("c_impulse", &file.c_impulse, n, ni, n)?;
        let bound = match file.w {
            Some(w) => {
                if w.len() != n {
                    return Err(ModelError::Dimension(format!(
                        "w has {} entries, expected {}",
                        w.len(),
                        n
                    )));
                }
                w
            }
            None => bounding_from_parts(n, ng, &rate, &cost_rate),
        };

        Ok(CtmdpModel {
            n_states: n,
            gradual_names: file.gradual_actions,
            impulse_names: file.impulse_actions,
            rate,
            jump,
            cost_rate,
            impulse_cost,
            bound,
        })
    }

    /// The on-disk document for this model; `w` is always populated.
    pub fn to_file(&self) -> ModelFile {
        let n = self.n_states;
        let ng = self.n_gradual();
        let ni = self.n_impulse();
        ModelFile {
            n_states: n,
            gradual_actions: self.gradual_names.clone(),
            impulse_actions: self.impulse_names.clone(),
            q: unflatten3(&self.rate, n, ng, n),
            transition: unflatten3(&self.jump, n, ni, n),
            c_gradual: unflatten2(&self.cost_rate, n, ng),
            c_impulse: unflatten3(&self.impulse_cost, n, ni, n),
            w: Some(self.bound.clone()),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        Self::from_file(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("model document serializes")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ModelError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ModelError> {
        let mut text = self.to_json();
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_gradual(&self) -> usize {
        self.gradual_names.len()
    }

    pub fn n_impulse(&self) -> usize {
        self.impulse_names.len()
    }

    pub fn gradual_name(&self, action: usize) -> &str {
        &self.gradual_names[action]
    }

    pub fn impulse_name(&self, action: usize) -> &str {
        &self.impulse_names[action]
    }

    /// Signed rate `q(y|x,a)`.
    #[inline]
    pub fn rate(&self, x: usize, a: usize, y: usize) -> f64 {
        self.rate[(x * self.n_gradual() + a) * self.n_states + y]
    }

    /// Total jump intensity `exit_rate(x,a) = -q(x|x,a)`.
    #[inline]
    pub fn exit_rate(&self, x: usize, a: usize) -> f64 {
        -self.rate(x, a, x)
    }

    /// `max_a exit_rate(x,a)`.
    pub fn max_exit_rate(&self, x: usize) -> f64 {
        (0..self.n_gradual())
            .map(|a| self.exit_rate(x, a))
            .fold(0.0, f64::max)
    }

    /// Post-impulse probability `Q(y|x,b)`.
    #[inline]
    pub fn jump_prob(&self, x: usize, b: usize, y: usize) -> f64 {
        self.jump[(x * self.n_impulse() + b) * self.n_states + y]
    }

    /// Post-impulse distribution row `Q(.|x,b)`.
    #[inline]
    pub fn jump_row(&self, x: usize, b: usize) -> &[f64] {
        let start = (x * self.n_impulse() + b) * self.n_states;
        &self.jump[start..start + self.n_states]
    }

    /// Gradual cost rate `c_g(x,a)`.
    #[inline]
    pub fn cost_rate(&self, x: usize, a: usize) -> f64 {
        self.cost_rate[x * self.n_gradual() + a]
    }

    /// Impulse lump cost `c_i(x,b,y)`.
    #[inline]
    pub fn impulse_cost(&self, x: usize, b: usize, y: usize) -> f64 {
        self.impulse_cost[(x * self.n_impulse() + b) * self.n_states + y]
    }

    /// Bounding value `w(x)`.
    #[inline]
    pub fn bound(&self, x: usize) -> f64 {
        self.bound[x]
    }

    /// Same model with a replacement bounding function. The value function
    /// does not depend on the choice of valid `w`, which makes this useful
    /// for invariance checks.
    pub fn with_bounding(&self, w: Vec<f64>) -> Result<Self, ModelError> {
        if w.len() != self.n_states {
            return Err(ModelError::Dimension(format!(
                "w has {} entries, expected {}",
                w.len(),
                self.n_states
            )));
        }
        let mut out = self.clone();
        out.bound = w;
        Ok(out)
    }

    /// Checks every numeric invariant and reports all violations found.
    pub fn validate(&self) -> ValidationReport {
        let mut violations = Vec::new();
        let n = self.n_states;

        for x in 0..n {
            for a in 0..self.n_gradual() {
                let mut sum = 0.0;
                for y in 0..n {
                    let v = self.rate(x, a, y);
                    if !v.is_finite() {
                        violations.push(Violation::NonFiniteRate {
                            state: x,
                            action: a,
                            target: y,
                            value: v,
                        });
                        continue;
                    }
                    if y != x && v < -VALIDATION_TOL {
                        violations.push(Violation::NegativeOffDiagonalRate {
                            state: x,
                            action: a,
                            target: y,
                            value: v,
                        });
                    }
                    sum += v;
                }
                if sum.is_nan() || sum.abs() > VALIDATION_TOL {
                    violations.push(Violation::RateRowSum {
                        state: x,
                        action: a,
                        sum,
                    });
                }
                let c = self.cost_rate(x, a);
                if !c.is_finite() || c < 0.0 {
                    violations.push(Violation::InvalidCostRate {
                        state: x,
                        action: a,
                        value: c,
                    });
                }
            }

            for b in 0..self.n_impulse() {
                let mut sum = 0.0;
                for y in 0..n {
                    let p = self.jump_prob(x, b, y);
                    if !p.is_finite()
                        || !(-VALIDATION_TOL..=1.0 + VALIDATION_TOL).contains(&p)
                    {
                        violations.push(Violation::TransitionEntryRange {
                            state: x,
                            action: b,
                            target: y,
                            value: p,
                        });
                    }
                    sum += p;
                    let c = self.impulse_cost(x, b, y);
                    if !c.is_finite() || c < 0.0 {
                        violations.push(Violation::InvalidImpulseCost {
                            state: x,
                            action: b,
                            target: y,
                            value: c,
                        });
                    }
                }
                if sum.is_nan() || (sum - 1.0).abs() > VALIDATION_TOL {
                    violations.push(Violation::TransitionRowSum {
                        state: x,
                        action: b,
                        sum,
                    });
                }
            }

            let w = self.bound(x);
            if !w.is_finite() || w < 1.0 - VALIDATION_TOL {
                violations.push(Violation::InvalidBound { state: x, value: w });
            } else {
                for a in 0..self.n_gradual() {
                    let required = self.cost_rate(x, a) + self.exit_rate(x, a) + 1.0;
                    if required.is_finite() && required > w + VALIDATION_TOL {
                        violations.push(Violation::BoundTooSmall {
                            state: x,
                            action: a,
                            required,
                            bound: w,
                        });
                    }
                }
            }
        }

        ValidationReport { violations }
    }
}

/// Tightest admissible bounding function:
/// `w(x) = 1 + max_a (c_g(x,a) + exit_rate(x,a))`. Satisfies the bounding
/// inequality with equality at the maximizing action. Ignores any `w`
/// stored in the model.
pub fn default_bounding_function(model: &CtmdpModel) -> Vec<f64> {
    bounding_from_parts(
        model.n_states,
        model.n_gradual(),
        &model.rate,
        &model.cost_rate,
    )
}

fn bounding_from_parts(n: usize, ng: usize, rate: &[f64], cost_rate: &[f64]) -> Vec<f64> {
    (0..n)
        .map(|x| {
            let worst = (0..ng)
                .map(|a| {
                    let exit = -rate[(x * ng + a) * n + x];
                    cost_rate[x * ng + a] + exit
                })
                .fold(0.0, f64::max);
            1.0 + worst
        })
        .collect()
}

/// Two-state pest-control example: state 0 has a rat in the kitchen, state 1
/// is done (rat dead or gone). Waiting costs `cost_rate` per unit time while
/// the rat leaves on its own at rate `mu`; the impulse `shoot` kills it with
/// probability `hit_prob` at lump cost `shot_cost` per bullet, and the
/// impulse `idle` does nothing. Both impulses are no-ops at state 1.
pub fn rat_example(
    mu: f64,
    cost_rate: f64,
    hit_prob: f64,
    shot_cost: f64,
) -> Result<CtmdpModel, ModelError> {
    if !(mu.is_finite() && mu > 0.0) {
        return Err(ModelError::Parameter {
            name: "mu",
            value: mu,
            requirement: "a finite rate > 0",
        });
    }
    if !(cost_rate.is_finite() && cost_rate >= 0.0) {
        return Err(ModelError::Parameter {
            name: "cost_rate",
            value: cost_rate,
            requirement: "a finite value >= 0",
        });
    }
    if !(hit_prob.is_finite() && hit_prob > 0.0 && hit_prob < 1.0) {
        return Err(ModelError::Parameter {
            name: "hit_prob",
            value: hit_prob,
            requirement: "a probability strictly between 0 and 1",
        });
    }
    if !(shot_cost.is_finite() && shot_cost > 0.0) {
        return Err(ModelError::Parameter {
            name: "shot_cost",
            value: shot_cost,
            requirement: "a finite cost > 0",
        });
    }

    CtmdpModel::from_file(ModelFile {
        n_states: 2,
        gradual_actions: vec!["wait".into()],
        impulse_actions: vec!["shoot".into(), "idle".into()],
        q: vec![vec![vec![-mu, mu]], vec![vec![0.0, 0.0]]],
        transition: vec![
            // shoot: hit with probability p; idle: stay put.
            vec![vec![1.0 - hit_prob, hit_prob], vec![1.0, 0.0]],
            // At the done state a shot hits nothing and costs nothing.
            vec![vec![0.0, 1.0], vec![0.0, 1.0]],
        ],
        c_gradual: vec![vec![cost_rate], vec![0.0]],
        c_impulse: vec![
            vec![vec![shot_cost, shot_cost], vec![0.0, 0.0]],
            vec![vec![0.0, 0.0], vec![0.0, 0.0]],
        ],
        w: None,
    })
}

fn flatten2(name: &str, data: &[Vec<f64>], d0: usize, d1: usize) -> Result<Vec<f64>, ModelError> {
    if data.len() != d0 {
        return Err(ModelError::Dimension(format!(
            "{name} has {} rows, expected {d0}",
            data.len()
        )));
    }
    let mut out = Vec::with_capacity(d0 * d1);
    for (i, row) in data.iter().enumerate() {
        if row.len() != d1 {
            return Err(ModelError::Dimension(format!(
                "{name}[{i}] has {} entries, expected {d1}",
                row.len()
            )));
        }
        out.extend_from_slice(row);
    }
    Ok(out)
}

fn flatten3(
    name: &str,
    data: &[Vec<Vec<f64>>],
    d0: usize,
    d1: usize,
    d2: usize,
) -> Result<Vec<f64>, ModelError> {
    if data.len() != d0 {
        return Err(ModelError::Dimension(format!(
            "{name} has {} rows, expected {d0}",
            data.len()
        )));
    }
    let mut out = Vec::with_capacity(d0 * d1 * d2);
    for (i, mid) in data.iter().enumerate() {
        if mid.len() != d1 {
            return Err(ModelError::Dimension(format!(
                "{name}[{i}] has {} entries, expected {d1}",
                mid.len()
            )));
        }
        for (j, row) in mid.iter().enumerate() {
            if row.len() != d2 {
                return Err(ModelError::Dimension(format!(
                    "{name}[{i}][{j}] has {} entries, expected {d2}",
                    row.len()
                )));
            }
            out.extend_from_slice(row);
        }
    }
    Ok(out)
}

fn unflatten2(data: &[f64], d0: usize, d1: usize) -> Vec<Vec<f64>> {
    (0..d0)
        .map(|i| data[i * d1..(i + 1) * d1].to_vec())
        .collect()
}

fn unflatten3(data: &[f64], d0: usize, d1: usize, d2: usize) -> Vec<Vec<Vec<f64>>> {
    (0..d0)
        .map(|i| {
            (0..d1)
                .map(|j| {
                    let start = (i * d1 + j) * d2;
                    data[start..start + d2].to_vec()
                })
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rat_example_is_valid() {
        let m = rat_example(2.0, 1.0, 0.5, 0.1).unwrap();
        let report = m.validate();
        assert!(report.is_valid(), "unexpected violations: {report}");
        assert_eq!(m.bound(0), 4.0);
        assert_eq!(m.bound(1), 1.0);
        assert_eq!(m.exit_rate(0, 0), 2.0);
        assert_eq!(m.max_exit_rate(0), 2.0);
        assert_eq!(m.max_exit_rate(1), 0.0);
    }

    #[test]
    fn rat_example_zero_holding_cost_is_valid() {
        let m = rat_example(2.0, 0.0, 0.5, 0.1).unwrap();
        assert!(m.validate().is_valid());
        assert_eq!(m.bound(0), 3.0);
    }

    #[test]
    fn bound_violation_is_reported_at_the_right_state() {
        // w(0) = 3 < 1 + cost rate + exit rate = 4.
        let m = rat_example(2.0, 1.0, 0.5, 0.1)
            .unwrap()
            .with_bounding(vec![3.0, 1.0])
            .unwrap();
        let report = m.validate();
        assert_eq!(report.len(), 1);
        match report.violations[0] {
            Violation::BoundTooSmall {
                state,
                action,
                required,
                bound,
            } => {
                assert_eq!(state, 0);
                assert_eq!(action, 0);
                assert_eq!(required, 4.0);
                assert_eq!(bound, 3.0);
            }
            ref other => panic!("wrong violation: {other:?}"),
        }
    }

    #[test]
    fn substochastic_impulse_row_is_reported() {
        let mut file = rat_example(2.0, 1.0, 0.5, 0.1).unwrap().to_file();
        file.transition[0][0] = vec![0.4, 0.5]; // sums to 0.9
        let m = CtmdpModel::from_file(file).unwrap();
        let report = m.validate();
        assert_eq!(report.len(), 1);
        assert!(matches!(
            report.violations[0],
            Violation::TransitionRowSum {
                state: 0,
                action: 0,
                ..
            }
        ));
    }

    #[test]
    fn multiple_violations_are_all_reported() {
        let mut file = rat_example(2.0, 1.0, 0.5, 0.1).unwrap().to_file();
        file.q[0][0] = vec![-2.0, 1.5]; // row sums to -0.5
        file.c_gradual[1][0] = -0.25;
        let m = CtmdpModel::from_file(file).unwrap();
        let report = m.validate();
        assert_eq!(report.len(), 2);
    }

    #[test]
    fn dimension_mismatch_is_structural() {
        let mut file = rat_example(2.0, 1.0, 0.5, 0.1).unwrap().to_file();
        file.q[0][0].pop();
        match CtmdpModel::from_file(file) {
            Err(ModelError::Dimension(msg)) => assert!(msg.contains("q[0][0]")),
            other => panic!("expected a dimension error, got {other:?}"),
        }
    }

    #[test]
    fn default_bounding_matches_hand_values() {
        let m = rat_example(2.0, 1.0, 0.5, 0.1).unwrap();
        assert_eq!(default_bounding_function(&m), vec![4.0, 1.0]);

        // Absorbing state with zero rates and costs has the trivial bound.
        let absorbing = CtmdpModel::from_file(ModelFile {
            n_states: 1,
            gradual_actions: vec!["hold".into()],
            impulse_actions: vec!["noop".into()],
            q: vec![vec![vec![0.0]]],
            transition: vec![vec![vec![1.0]]],
            c_gradual: vec![vec![0.0]],
            c_impulse: vec![vec![vec![0.0]]],
            w: None,
        })
        .unwrap();
        assert_eq!(absorbing.bound(0), 1.0);
    }

    #[test]
    fn default_bounding_takes_the_worst_action() {
        // Two gradual actions with (cost, exit rate) = (0.5, 1.0) and
        // (2.0, 0.1): the bound is 1 + max(1.5, 2.1) = 3.1.
        let m = CtmdpModel::from_file(ModelFile {
            n_states: 2,
            gradual_actions: vec!["a".into(), "b".into()],
            impulse_actions: vec!["noop".into()],
            q: vec![
                vec![vec![-1.0, 1.0], vec![-0.1, 0.1]],
                vec![vec![0.0, 0.0], vec![0.0, 0.0]],
            ],
            transition: vec![vec![vec![1.0, 0.0]], vec![vec![0.0, 1.0]]],
            c_gradual: vec![vec![0.5, 2.0], vec![0.0, 0.0]],
            c_impulse: vec![vec![vec![0.0, 0.0]], vec![vec![0.0, 0.0]]],
            w: None,
        })
        .unwrap();
        assert_eq!(m.bound(0), 3.1);
        assert!(m.validate().is_valid());
    }

    #[test]
    fn rat_parameters_out_of_range_are_rejected() {
        assert!(matches!(
            rat_example(0.0, 1.0, 0.5, 0.1),
            Err(ModelError::Parameter { name: "mu", .. })
        ));
        assert!(matches!(
            rat_example(2.0, -0.5, 0.5, 0.1),
            Err(ModelError::Parameter {
                name: "cost_rate",
                ..
            })
        ));
        assert!(matches!(
            rat_example(2.0, 1.0, 1.5, 0.1),
            Err(ModelError::Parameter {
                name: "hit_prob",
                ..
            })
        ));
        assert!(matches!(
            rat_example(2.0, 1.0, 0.5, 0.0),
            Err(ModelError::Parameter {
                name: "shot_cost",
                ..
            })
        ));
    }

    #[test]
    fn json_round_trip_is_identity_on_values() {
        let m = rat_example(2.0, 1.0, 0.5, 0.1).unwrap();
        let text = m.to_json();
        let back = CtmdpModel::from_json(&text).unwrap();
        assert_eq!(m.rate, back.rate);
        assert_eq!(m.jump, back.jump);
        assert_eq!(m.cost_rate, back.cost_rate);
        assert_eq!(m.impulse_cost, back.impulse_cost);
        assert_eq!(m.bound, back.bound);
        assert_eq!(back.to_json(), text);
    }

    #[test]
    fn missing_w_triggers_the_default_bound() {
        let mut file = rat_example(2.0, 1.0, 0.5, 0.1).unwrap().to_file();
        file.w = None;
        let m = CtmdpModel::from_file(file).unwrap();
        assert_eq!(m.bound(0), 4.0);
        assert_eq!(m.bound(1), 1.0);
        // Serialization always carries the resolved w.
        assert!(m.to_file().w.is_some());
    }

    #[test]
    fn rat_model_is_valid_across_a_parameter_grid() {
        for &mu in &[0.25, 1.0, 2.0, 4.0] {
            for &l in &[0.0, 0.5, 1.0, 2.5] {
                for &p in &[0.05, 0.5, 0.95] {
                    for &c in &[0.01, 0.1, 1.0, 3.0] {
                        let m = rat_example(mu, l, p, c).unwrap();
                        let report = m.validate();
                        assert!(
                            report.is_valid(),
                            "mu={mu} l={l} p={p} c={c}: {report}"
                        );
                    }
                }
            }
        }
    }
}
