//! Downstream decisions: utility functions, action optimizers, and
//! horizon-aware decision-aligned selection from Rashomon sets.

mod optimize;
mod select;

pub use optimize::{
    closed_form_action, optimize_action, optimize_action_cem, optimize_action_gradient,
    CemOptions, GradientOptions, OptimizerRoute,
};
pub use select::{
    aggregate_utilities, realized_utility, realized_utility_from, sample_complexity_sweep,
    select_model, SelectionContext, SelectionResult, StrategyOutcome, SweepCurve,
};

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Where decisions live: a continuous box or a finite action list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ActionSpace {
    Box { lower: Vec<f64>, upper: Vec<f64> },
    Discrete { actions: Vec<Vec<f64>> },
}

impl ActionSpace {
    pub fn validate(&self) -> Result<()> {
        match self {
            ActionSpace::Box { lower, upper } => {
                if lower.is_empty() || lower.len() != upper.len() {
                    return Err(Error::Config(format!(
                        "box bounds must be non-empty and equal length, got {} and {}",
                        lower.len(),
                        upper.len()
                    )));
                }
                for (l, u) in lower.iter().zip(upper) {
                    if !(l < u) {
                        return Err(Error::Config(format!(
                            "box requires lower < upper componentwise, got [{l}, {u}]"
                        )));
                    }
                }
            }
            ActionSpace::Discrete { actions } => {
                if actions.is_empty() {
                    return Err(Error::Config("discrete action list is empty".into()));
                }
            }
        }
        Ok(())
    }

    /// Dimension of action vectors.
    pub fn dim(&self) -> usize {
        match self {
            ActionSpace::Box { lower, .. } => lower.len(),
            ActionSpace::Discrete { actions } => actions[0].len(),
        }
    }

    /// Clip a continuous action into the box.
    pub(crate) fn clip(&self, action: &mut [f64]) {
        if let ActionSpace::Box { lower, upper } = self {
            for ((a, l), u) in action.iter_mut().zip(lower).zip(upper) {
                *a = a.clamp(*l, *u);
            }
        }
    }
}

/// Reward for taking an action against a (forecast or realized) state.
///
/// Actions compare against the first `dim(action)` coordinates of the state,
/// so low-dimensional decisions can ride on high-dimensional systems.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum UtilityFn {
    /// -scale * ||a - x||^2: maximized by tracking the state exactly.
    QuadraticTracking { scale: f64 },
    /// Linear penalties with distinct over- and under-commitment prices:
    /// -(over_cost * (a - x)_+ + under_cost * (x - a)_+) summed over
    /// coordinates.
    AsymmetricLinear { over_cost: f64, under_cost: f64 },
    /// State-independent lookup over a discrete action list.
    Table { values: Vec<f64> },
}

impl UtilityFn {
    pub fn validate(&self, space: &ActionSpace) -> Result<()> {
        match self {
            UtilityFn::QuadraticTracking { scale } => {
                if !(scale > &0.0) {
                    return Err(Error::Config(format!("scale must be positive, got {scale}")));
                }
            }
            UtilityFn::AsymmetricLinear {
                over_cost,
                under_cost,
            } => {
                if !(*over_cost > 0.0 && *under_cost > 0.0) {
                    return Err(Error::Config(format!(
                        "asymmetric costs must be positive, got over={over_cost}, under={under_cost}"
                    )));
                }
            }
            UtilityFn::Table { values } => {
                let ActionSpace::Discrete { actions } = space else {
                    return Err(Error::Config(
                        "table utilities need a discrete action space".into(),
                    ));
                };
                if values.len() != actions.len() {
                    return Err(Error::Config(format!(
                        "table has {} values for {} actions",
                        values.len(),
                        actions.len()
                    )));
                }
            }
        }
        Ok(())
    }

    /// Exact utility of an action against a state.
    pub fn evaluate(&self, state: &[f64], action: &Action, space: &ActionSpace) -> Result<f64> {
        match self {
            UtilityFn::Table { values } => match action {
                Action::Discrete(i) => values.get(*i).copied().ok_or_else(|| {
                    Error::Domain(format!("action index {i} outside the table"))
                }),
                Action::Continuous(_) => Err(Error::Domain(
                    "table utilities take discrete actions".into(),
                )),
            },
            _ => {
                let vec = action.resolve(space)?;
                if vec.len() > state.len() {
                    return Err(Error::Shape(format!(
                        "action dim {} exceeds state dim {}",
                        vec.len(),
                        state.len()
                    )));
                }
                Ok(match self {
                    UtilityFn::QuadraticTracking { scale } => {
                        -scale
                            * vec
                                .iter()
                                .zip(state)
                                .map(|(a, x)| (a - x) * (a - x))
                                .sum::<f64>()
                    }
                    UtilityFn::AsymmetricLinear {
                        over_cost,
                        under_cost,
                    } => -vec
                        .iter()
                        .zip(state)
                        .map(|(a, x)| over_cost * (a - x).max(0.0) + under_cost * (x - a).max(0.0))
                        .sum::<f64>(),
                    UtilityFn::Table { .. } => unreachable!(),
                })
            }
        }
    }
}

/// Horizon distribution and discounting for utility aggregation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecisionConfig {
    /// Probability of decision-making at each horizon 1..=K.
    pub p_k: Vec<f64>,
    /// Exponent used in the aggregation weights.
    pub lambda_max: f64,
    /// Sampling interval making lambda * k * dt dimensionless.
    pub dt: f64,
}

impl DecisionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.p_k.is_empty() {
            return Err(Error::Config("p_k must be non-empty".into()));
        }
        if self.p_k.iter().any(|p| *p < 0.0) {
            return Err(Error::Config("p_k entries must be non-negative".into()));
        }
        let sum: f64 = self.p_k.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("p_k must sum to 1 within 1e-9, got {sum}")));
        }
        if !self.lambda_max.is_finite() || !(self.dt > 0.0) {
            return Err(Error::Config(
                "lambda_max must be finite and dt positive".into(),
            ));
        }
        Ok(())
    }

    pub fn k_max(&self) -> usize {
        self.p_k.len()
    }

    /// Unnormalized aggregation weights p_k exp(-lambda k dt).
    pub fn weights(&self) -> Vec<f64> {
        self.p_k
            .iter()
            .enumerate()
            .map(|(i, p)| p * (-self.lambda_max * (i + 1) as f64 * self.dt).exp())
            .collect()
    }

    /// Effective decision horizon: -ln(sum_k p_k e^{-lambda k dt}) / lambda
    /// for positive lambda, the p-weighted mean horizon at lambda = 0.
    pub fn k_eff(&self) -> f64 {
        if self.lambda_max > 0.0 {
            let z: f64 = self
                .p_k
                .iter()
                .enumerate()
                .map(|(i, p)| p * (-self.lambda_max * (i + 1) as f64 * self.dt).exp())
                .sum();
            -z.ln() / self.lambda_max
        } else {
            self.p_k
                .iter()
                .enumerate()
                .map(|(i, p)| p * (i + 1) as f64)
                .sum()
        }
    }

    /// Horizon with the largest decision probability (smallest index on
    /// ties); the single-best baseline targets it.
    pub fn modal_horizon(&self) -> usize {
        let mut best = 0;
        for (i, p) in self.p_k.iter().enumerate() {
            if *p > self.p_k[best] {
                best = i;
            }
        }
        best + 1
    }
}

/// A point in an action space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Action {
    Continuous(Vec<f64>),
    Discrete(usize),
}

impl Action {
    /// The action as a coordinate vector.
    pub fn resolve(&self, space: &ActionSpace) -> Result<Vec<f64>> {
        match (self, space) {
            (Action::Continuous(v), ActionSpace::Box { .. }) => Ok(v.clone()),
            (Action::Discrete(i), ActionSpace::Discrete { actions }) => actions
                .get(*i)
                .cloned()
                .ok_or_else(|| Error::Domain(format!("action index {i} out of range"))),
            _ => Err(Error::Domain(
                "action kind does not match the action space".into(),
            )),
        }
    }
}
