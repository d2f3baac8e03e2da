//! JSON instance and solver configuration.
//!
//! ```json
//! {
//!   "n": 6,
//!   "rewards": [1, 1, 1, 1, 1, 1],
//!   "movement": { "kind": "linear-squared" },
//!   "cost": { "family": "linear", "c": 4 },
//!   "gamma": 0.9,
//!   "solver": { "epsilon": 0.001, "delta": 0.2, "method": "auto" }
//! }
//! ```
//!
//! `movement.kind` is one of `linear-squared`, `perimeter`,
//! `perimeter-squared` or `explicit`; the last requires `movement.matrix`.
//! The `solver` section and each of its fields are optional.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{PatrolError, Result};
use crate::game::{CostFunction, GameInstance, MovementKind};
use crate::shapley::{InnerSolver, DEFAULT_DELTA, DEFAULT_EPSILON};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MovementConfig {
    pub kind: MovementKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Vec<Vec<f64>>>,
}

/// Inner maximizer selection; `auto` picks by cost class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodTag {
    #[default]
    Auto,
    ConcaveGreedy,
    ScaledGreedy,
    LazyGreedy,
}

impl MethodTag {
    pub fn as_str(self) -> &'static str {
        match self {
            MethodTag::Auto => "auto",
            MethodTag::ConcaveGreedy => "concave-greedy",
            MethodTag::ScaledGreedy => "scaled-greedy",
            MethodTag::LazyGreedy => "lazy-greedy",
        }
    }
}

impl FromStr for MethodTag {
    type Err = PatrolError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(MethodTag::Auto),
            "concave-greedy" => Ok(MethodTag::ConcaveGreedy),
            "scaled-greedy" => Ok(MethodTag::ScaledGreedy),
            "lazy-greedy" => Ok(MethodTag::LazyGreedy),
            other => Err(PatrolError::Config {
                path: "solver.method".into(),
                message: format!("unknown method {other:?}"),
            }),
        }
    }
}

impl fmt::Display for MethodTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

fn default_epsilon() -> f64 {
    DEFAULT_EPSILON
}

fn default_delta() -> f64 {
    DEFAULT_DELTA
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default)]
    pub method: MethodTag,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            epsilon: DEFAULT_EPSILON,
            delta: DEFAULT_DELTA,
            method: MethodTag::Auto,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        for (path, value) in [
            ("solver.epsilon", self.epsilon),
            ("solver.delta", self.delta),
        ] {
            if !(value.is_finite() && value > 0.0) {
                return Err(PatrolError::Config {
                    path: path.into(),
                    message: format!("must be positive, got {value}"),
                });
            }
        }
        Ok(())
    }

    pub fn inner(&self, inst: &GameInstance) -> Result<InnerSolver> {
        self.validate()?;
        let inner = match self.method {
            MethodTag::Auto => InnerSolver::for_instance(inst, self.delta)?,
            MethodTag::ConcaveGreedy => InnerSolver::ConcaveGreedy,
            MethodTag::ScaledGreedy => InnerSolver::scaled(inst.n(), self.delta)?,
            MethodTag::LazyGreedy => InnerSolver::lazy(inst.n(), self.delta)?,
        };
        inner.check(inst)?;
        Ok(inner)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceConfig {
    pub n: usize,
    pub rewards: Vec<f64>,
    pub movement: MovementConfig,
    pub cost: CostFunction,
    pub gamma: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverConfig>,
}

impl InstanceConfig {
    pub fn from_instance(inst: &GameInstance, solver: Option<SolverConfig>) -> Self {
        let kind = inst.movement_kind();
        InstanceConfig {
            n: inst.n(),
            rewards: inst.rewards().to_vec(),
            movement: MovementConfig {
                kind,
                matrix: (kind == MovementKind::Explicit).then(|| inst.movement_matrix()),
            },
            cost: *inst.cost(),
            gamma: inst.gamma(),
            solver,
        }
    }

    pub fn build(&self) -> Result<GameInstance> {
        if self.rewards.len() != self.n {
            return Err(PatrolError::Config {
                path: "rewards".into(),
                message: format!(
                    "expected n = {} entries, got {}",
                    self.n,
                    self.rewards.len()
                ),
            });
        }
        if let Some(solver) = &self.solver {
            solver.validate()?;
        }
        match (self.movement.kind, &self.movement.matrix) {
            (MovementKind::Explicit, Some(matrix)) => {
                GameInstance::new(self.rewards.clone(), matrix.clone(), self.cost, self.gamma)
            }
            (MovementKind::Explicit, None) => Err(PatrolError::Config {
                path: "movement.matrix".into(),
                message: "required when kind is \"explicit\"".into(),
            }),
            (kind, None) => {
                GameInstance::with_layout(self.rewards.clone(), kind, self.cost, self.gamma)
            }
            (kind, Some(_)) => Err(PatrolError::Config {
                path: "movement.matrix".into(),
                message: format!("not allowed with kind {kind:?}; use \"explicit\""),
            }),
        }
    }

    pub fn solver(&self) -> SolverConfig {
        self.solver.unwrap_or_default()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Parses and validates a configuration document.
pub fn parse_config_str(text: &str) -> Result<(InstanceConfig, GameInstance)> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let config: InstanceConfig =
        serde_path_to_error::deserialize(de).map_err(|e| PatrolError::Config {
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })?;
    let inst = config.build()?;
    Ok((config, inst))
}

pub fn parse_config(path: impl AsRef<Path>) -> Result<(InstanceConfig, GameInstance)> {
    parse_config_str(&std::fs::read_to_string(path)?)
}
