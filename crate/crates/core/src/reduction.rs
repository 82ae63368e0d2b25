//! Reduction of the continuous-time problem to an equivalent discrete-time
//! MDP over the union of the gradual and impulse action sets.
//!
//! For a gradual action `a` at state `x`, the reduced transition law embeds
//! the rate kernel at the uniformization rate `w(x)`:
//!
//! ```text
//! P(y|x,a) = q(y|x,a) / w(x) + [y == x]
//! ```
//!
//! with the one-step multiplicative cost factor `w(x) / (w(x) - c_g(x,a))`,
//! so the stored weight is `weight(x,a,y) = factor * P(y|x,a)`. For an
//! impulse `b`, `P(y|x,b) = Q(y|x,b)` and
//! `weight(x,b,y) = exp(c_i(x,b,y)) * Q(y|x,b)`.
//!
//! Weights are stored pre-multiplied because the Bellman operator only ever
//! uses the product, which also sidesteps `0 * inf` bookkeeping for
//! zero-probability transitions paired with infinite values.
//!
//! The action list puts the gradual block first and the impulse block second;
//! this ordering is part of the public contract, so policy indices are stable
//! across runs and serialized artifacts.
//!
//! An impulse whose row at `x` is exactly a zero-cost self-loop
//! (`Q(x|x,b) = 1`, `c_i(x,b,x) = 0`) is marked as a no-op there. Applying
//! such an impulse spends no time and changes nothing, so a policy selecting
//! it would pile up interventions at a single time instant forever. The
//! solver and the enumeration oracle skip no-op impulses when minimizing;
//! they can never be strictly optimal, so the value function is unaffected.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{CtmdpModel, ValidationReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActionKind {
    Gradual,
    Impulse,
}

/// The reduced discrete-time MDP. Immutable after construction.
#[derive(Debug, Clone)]
pub struct ReducedModel {
    n_states: usize,
    n_gradual: usize,
    n_impulse: usize,
    action_names: Vec<String>,
    /// Transition probabilities, flattened `[x][action][y]`.
    prob: Vec<f64>,
    /// Pre-multiplied cost weights, flattened `[x][action][y]`.
    weight: Vec<f64>,
    /// Per `(x, action)`: impulse action that is an exact zero-cost self-loop
    /// at `x`.
    noop: Vec<bool>,
}

#[derive(Debug, Error)]
#[error("model failed validation:\n{0}")]
pub struct InvalidModelError(pub ValidationReport);

/// Builds the reduced model. Fails if the source model violates any
/// invariant; the offending checks are carried in the error.
pub fn reduce(model: &CtmdpModel) -> Result<ReducedModel, InvalidModelError> {
    let report = model.validate();
    if !report.is_valid() {
        return Err(InvalidModelError(report));
    }

    let n = model.n_states();
    let ng = model.n_gradual();
    let ni = model.n_impulse();
    let n_actions = ng + ni;

    let mut prob = vec![0.0; n * n_actions * n];
    let mut weight = vec![0.0; n * n_actions * n];
    let mut noop = vec![false; n * n_actions];
    let mut action_names = Vec::with_capacity(n_actions);
    for a in 0..ng {
        action_names.push(model.gradual_name(a).to_owned());
    }
    for b in 0..ni {
        action_names.push(model.impulse_name(b).to_owned());
    }

    for x in 0..n {
        let w = model.bound(x);
        for a in 0..ng {
            // w(x) - c_g(x,a) >= 1 + exit_rate(x,a) >= 1, so the factor is
            // finite and >= 1, and the self-loop mass stays positive.
            let factor = w / (w - model.cost_rate(x, a));
            let base = (x * n_actions + a) * n;
            for y in 0..n {
                let p = model.rate(x, a, y) / w + if y == x { 1.0 } else { 0.0 };
                prob[base + y] = p;
                weight[base + y] = factor * p;
            }
        }
        for b in 0..ni {
            let act = ng + b;
            let base = (x * n_actions + act) * n;
            for y in 0..n {
                let p = model.jump_prob(x, b, y);
                prob[base + y] = p;
                weight[base + y] = model.impulse_cost(x, b, y).exp() * p;
            }
            noop[x * n_actions + act] =
                model.jump_prob(x, b, x) == 1.0 && model.impulse_cost(x, b, x) == 0.0;
        }
    }

    Ok(ReducedModel {
        n_states: n,
        n_gradual: ng,
        n_impulse: ni,
        action_names,
        prob,
        weight,
        noop,
    })
}

impl ReducedModel {
    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_gradual(&self) -> usize {
        self.n_gradual
    }

    pub fn n_impulse(&self) -> usize {
        self.n_impulse
    }

    pub fn n_actions(&self) -> usize {
        self.n_gradual + self.n_impulse
    }

    pub fn kind(&self, action: usize) -> ActionKind {
        if action < self.n_gradual {
            ActionKind::Gradual
        } else {
            ActionKind::Impulse
        }
    }

    pub fn action_name(&self, action: usize) -> &str {
        &self.action_names[action]
    }

    #[inline]
    pub fn prob(&self, x: usize, action: usize, y: usize) -> f64 {
        self.prob[(x * self.n_actions() + action) * self.n_states + y]
    }

    #[inline]
    pub fn weight(&self, x: usize, action: usize, y: usize) -> f64 {
        self.weight[(x * self.n_actions() + action) * self.n_states + y]
    }

    #[inline]
    pub fn prob_row(&self, x: usize, action: usize) -> &[f64] {
        let start = (x * self.n_actions() + action) * self.n_states;
        &self.prob[start..start + self.n_states]
    }

    #[inline]
    pub fn weight_row(&self, x: usize, action: usize) -> &[f64] {
        let start = (x * self.n_actions() + action) * self.n_states;
        &self.weight[start..start + self.n_states]
    }

    /// True for an impulse action that is an exact zero-cost self-loop at
    /// `x`; such actions are skipped by the Bellman minimization and by
    /// policy enumeration.
    #[inline]
    pub fn is_noop_impulse(&self, x: usize, action: usize) -> bool {
        self.noop[x * self.n_actions() + action]
    }

    /// Diagnostic row sum of the weights: the one-step value of the action
    /// against the constant function 1. Always >= 1 since costs are
    /// nonnegative.
    pub fn row_weight_sum(&self, x: usize, action: usize) -> f64 {
        self.weight_row(x, action).iter().sum()
    }

    /// On-disk document, marked `tilde: true` to distinguish reduced-model
    /// files from source-model files in the same document family.
    pub fn to_file(&self) -> ReducedFile {
        let n = self.n_states;
        let na = self.n_actions();
        ReducedFile {
            tilde: true,
            n_states: n,
            actions: (0..na)
                .map(|a| ActionSpec {
                    name: self.action_names[a].clone(),
                    kind: self.kind(a),
                })
                .collect(),
            p: (0..n)
                .map(|x| (0..na).map(|a| self.prob_row(x, a).to_vec()).collect())
                .collect(),
            weight: (0..n)
                .map(|x| (0..na).map(|a| self.weight_row(x, a).to_vec()).collect())
                .collect(),
        }
    }

    pub fn from_file(file: ReducedFile) -> Result<Self, ReducedFileError> {
        if !file.tilde {
            return Err(ReducedFileError::NotMarked);
        }
        let n = file.n_states;
        if n == 0 {
            return Err(ReducedFileError::Shape("n_states must be positive".into()));
        }
        let na = file.actions.len();
        let ng = file
            .actions
            .iter()
            .take_while(|a| a.kind == ActionKind::Gradual)
            .count();
        if file.actions[ng..].iter().any(|a| a.kind == ActionKind::Gradual) {
            return Err(ReducedFileError::Shape(
                "actions must list the gradual block before the impulse block".into(),
            ));
        }
        if ng == 0 || ng == na {
            return Err(ReducedFileError::Shape(
                "need at least one gradual and one impulse action".into(),
            ));
        }

        let mut prob = Vec::with_capacity(n * na * n);
        let mut weight = Vec::with_capacity(n * na * n);
        for (field, source, out) in [("p", &file.p, &mut prob), ("weight", &file.weight, &mut weight)]
        {
            if source.len() != n {
                return Err(ReducedFileError::Shape(format!(
                    "{field} has {} rows, expected {n}",
                    source.len()
                )));
            }
            for (x, per_action) in source.iter().enumerate() {
                if per_action.len() != na {
                    return Err(ReducedFileError::Shape(format!(
                        "{field}[{x}] has {} entries, expected {na}",
                        per_action.len()
                    )));
                }
                for (a, row) in per_action.iter().enumerate() {
                    if row.len() != n {
                        return Err(ReducedFileError::Shape(format!(
                            "{field}[{x}][{a}] has {} entries, expected {n}",
                            row.len()
                        )));
                    }
                    out.extend_from_slice(row);
                }
            }
        }

        let mut noop = vec![false; n * na];
        for x in 0..n {
            for act in ng..na {
                let base = (x * na + act) * n;
                // exp(0) == 1 exactly, so a zero-cost self-loop is
                // recoverable from the stored products.
                noop[x * na + act] = prob[base + x] == 1.0 && weight[base + x] == 1.0;
            }
        }

        Ok(ReducedModel {
            n_states: n,
            n_gradual: ng,
            n_impulse: na - ng,
            action_names: file.actions.into_iter().map(|a| a.name).collect(),
            prob,
            weight,
            noop,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("reduced document serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, ReducedFileError> {
        Self::from_file(serde_json::from_str(text)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), std::io::Error> {
        let mut text = self.to_json();
        text.push('\n');
        std::fs::write(path, text)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ActionSpec {
    pub name: String,
    pub kind: ActionKind,
}

/// On-disk document for a reduced model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReducedFile {
    /// Marker distinguishing reduced-model documents; must be `true`.
    pub tilde: bool,
    pub n_states: usize,
    pub actions: Vec<ActionSpec>,
    pub p: Vec<Vec<Vec<f64>>>,
    pub weight: Vec<Vec<Vec<f64>>>,
}

#[derive(Debug, Error)]
pub enum ReducedFileError {
    #[error("document is not marked `tilde: true`")]
    NotMarked,
    #[error("malformed reduced model: {0}")]
    Shape(String),
    #[error("failed to parse reduced model document: {0}")]
    Parse(#[from] serde_json::Error),
}
