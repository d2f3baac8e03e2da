//! Smuggler best responses and the separable patroller objective.
//!
//! Against a guard distribution `pi`, the smugglers' best response is
//! myopic: each location independently maximizes
//! `(1 - pi_b) r_b a - pi_b C(a)` over `a` in [0, 1]. The patroller's
//! payoff against that response splits into one concave term per location,
//!
//! ```text
//! g_b(pi_b) = -max_a {(1 - pi_b) r_b a - pi_b C(a)} + pi_b (gamma V(b) - m[s][b])
//! G(pi)     = sum_b g_b(pi_b)
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{PatrolError, Result};
use crate::game::{
    check_distribution, check_unit, reward_patroller, CostClass, CostFunction, GameInstance,
    ValueFunction,
};

/// Shape of the set of maximizing quantities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MaximizerSet {
    OnlyZero,
    OnlyOne,
    BothEndpoints,
    /// Linear cost at the threshold: every quantity is optimal.
    WholeInterval,
    /// Strictly convex cost: a single maximizer, possibly interior.
    Single,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BestResponse {
    /// Canonical maximizer.
    pub quantity: f64,
    pub is_tie: bool,
    pub maximizers: MaximizerSet,
}

/// Guard probability at which a concave-cost smuggler is indifferent
/// between sending nothing and sending everything.
#[inline]
pub fn indifference_threshold(cost: &CostFunction, reward: f64) -> f64 {
    reward / (cost.at_one() + reward)
}

/// The smuggler's expected one-period payoff at a location guarded with
/// probability `pi`.
#[inline]
pub fn smuggler_payoff(cost: &CostFunction, reward: f64, pi: f64, a: f64) -> f64 {
    (1.0 - pi) * reward * a - pi * cost.at(a)
}

/// Myopic best response of the smuggler at one location.
///
/// Takes neither the state, the value function nor a discount factor: the
/// patroller alone controls transitions, so only the current payoff matters.
pub fn smuggler_best_response(cost: &CostFunction, reward: f64, pi: f64) -> Result<BestResponse> {
    check_unit("guard probability", pi)?;
    if !(reward.is_finite() && reward > 0.0) {
        return Err(PatrolError::InvalidInstance {
            field: "reward".into(),
            reason: format!("must be positive, got {reward}"),
        });
    }
    Ok(best_response_unchecked(cost, reward, pi))
}

pub(crate) fn best_response_unchecked(cost: &CostFunction, reward: f64, pi: f64) -> BestResponse {
    match cost.class() {
        CostClass::Concave => {
            let threshold = indifference_threshold(cost, reward);
            if pi < threshold {
                BestResponse {
                    quantity: 1.0,
                    is_tie: false,
                    maximizers: MaximizerSet::OnlyOne,
                }
            } else if pi == threshold {
                BestResponse {
                    quantity: 1.0,
                    is_tie: true,
                    maximizers: if cost.is_linear() {
                        MaximizerSet::WholeInterval
                    } else {
                        MaximizerSet::BothEndpoints
                    },
                }
            } else {
                BestResponse {
                    quantity: 0.0,
                    is_tie: false,
                    maximizers: MaximizerSet::OnlyZero,
                }
            }
        }
        CostClass::StrictlyConvex => BestResponse {
            quantity: convex_maximizer(cost, reward, pi),
            is_tie: false,
            maximizers: MaximizerSet::Single,
        },
    }
}

/// Stationary point of `(1 - pi) r a - pi c a^p`, clamped to [0, 1].
fn convex_maximizer(cost: &CostFunction, reward: f64, pi: f64) -> f64 {
    let CostFunction::Power { c, p } = *cost else {
        unreachable!("strictly convex costs are powers with p > 1");
    };
    if pi <= 0.0 {
        return 1.0;
    }
    let ratio = (1.0 - pi) * reward / (pi * p * c);
    let a = if p == 2.0 {
        ratio
    } else {
        ratio.powf(1.0 / (p - 1.0))
    };
    a.clamp(0.0, 1.0)
}

/// `max_a {(1 - pi) r a - pi C(a)}` for any real `pi`.
///
/// Outside [0, 1] the maximizer is 1 for `pi < 0` and 0 for `pi > 1`.
#[inline]
pub fn inner_max(cost: &CostFunction, reward: f64, pi: f64) -> f64 {
    if pi < 0.0 {
        (1.0 - pi) * reward - pi * cost.at_one()
    } else if pi > 1.0 {
        0.0
    } else {
        let a = best_response_unchecked(cost, reward, pi).quantity;
        smuggler_payoff(cost, reward, pi, a)
    }
}

/// `g_b(pi_b, s, V)`. `pi_b` may be any real.
pub fn g_component(
    inst: &GameInstance,
    b: usize,
    pi_b: f64,
    s: usize,
    values: &ValueFunction,
) -> f64 {
    let offset = inst.gamma() * values[b] - inst.movement(s, b);
    -inner_max(inst.cost(), inst.reward(b), pi_b) + pi_b * offset
}

/// `G(pi, s, V) = sum_b g_b(pi_b, s, V)`.
pub fn big_g(inst: &GameInstance, pi: &[f64], s: usize, values: &ValueFunction) -> Result<f64> {
    if pi.len() != inst.n() {
        return Err(PatrolError::LengthMismatch {
            expected: inst.n(),
            got: pi.len(),
        });
    }
    inst.check_location(s)?;
    check_distribution(pi).map_err(PatrolError::InvalidDistribution)?;
    Ok(StateObjective::new(inst, s, values).total(pi))
}

/// `r_b + C(1) - (gamma V(b) - m[s][b])`, a Lipschitz constant of `g_b` on [0, 1].
pub fn lipschitz_bound(inst: &GameInstance, b: usize, s: usize, values: &ValueFunction) -> f64 {
    inst.reward(b) + inst.cost().at_one() - (inst.gamma() * values[b] - inst.movement(s, b))
}

/// The separable objective of one state with its offsets precomputed.
///
/// Evaluates bit-identically to [`g_component`].
#[derive(Debug, Clone)]
pub struct StateObjective<'a> {
    cost: &'a CostFunction,
    rewards: &'a [f64],
    offsets: Vec<f64>,
}

impl<'a> StateObjective<'a> {
    pub fn new(inst: &'a GameInstance, s: usize, values: &ValueFunction) -> Self {
        let offsets = (0..inst.n())
            .map(|b| inst.gamma() * values[b] - inst.movement(s, b))
            .collect();
        StateObjective {
            cost: inst.cost(),
            rewards: inst.rewards(),
            offsets,
        }
    }

    /// Same objective with the cost function replaced.
    pub fn with_cost(mut self, cost: &'a CostFunction) -> Self {
        self.cost = cost;
        self
    }

    pub fn n(&self) -> usize {
        self.rewards.len()
    }

    pub fn cost(&self) -> &CostFunction {
        self.cost
    }

    pub fn reward(&self, b: usize) -> f64 {
        self.rewards[b]
    }

    #[inline]
    pub fn g(&self, b: usize, pi_b: f64) -> f64 {
        -inner_max(self.cost, self.rewards[b], pi_b) + pi_b * self.offsets[b]
    }

    pub fn total(&self, pi: &[f64]) -> f64 {
        pi.iter().enumerate().map(|(b, &p)| self.g(b, p)).sum()
    }
}

/// Reference evaluation of `G` straight from its min-over-actions
/// definition, minimizing over a grid of `resolution` evenly spaced
/// quantities (endpoints included) per location.
///
/// The objective is separable in the action vector, so the minimum is taken
/// one coordinate at a time. Only meant for cross-checking [`big_g`].
pub fn big_g_direct_oracle(
    inst: &GameInstance,
    pi: &[f64],
    s: usize,
    values: &ValueFunction,
    resolution: usize,
) -> Result<f64> {
    if resolution < 2 {
        return Err(PatrolError::Misuse(format!(
            "grid resolution must be at least 2, got {resolution}"
        )));
    }
    check_distribution(pi).map_err(PatrolError::InvalidDistribution)?;
    let n = inst.n();
    let objective = |a: &[f64]| -> Result<f64> {
        let mut total = 0.0;
        for (b, &p) in pi.iter().enumerate() {
            total += p * (reward_patroller(inst, b, a, s)? + inst.gamma() * values[b]);
        }
        Ok(total)
    };
    let mut action = vec![0.0; n];
    let base = objective(&action)?;
    let step = 1.0 / (resolution - 1) as f64;
    let mut total = base;
    for i in 0..n {
        let mut best = 0.0f64;
        for k in 1..resolution {
            action[i] = if k == resolution - 1 {
                1.0
            } else {
                k as f64 * step
            };
            best = best.min(objective(&action)? - base);
        }
        action[i] = 0.0;
        total += best;
    }
    Ok(total)
}

/// Golden-section search for the smuggler's maximizer. A cross-check for
/// the closed form used with strictly convex costs.
pub fn golden_section_best_response(
    cost: &CostFunction,
    reward: f64,
    pi: f64,
    tolerance: f64,
) -> f64 {
    let f = |a: f64| smuggler_payoff(cost, reward, pi, a);
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > tolerance {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        }
    }
    let mid = 0.5 * (lo + hi);
    // Endpoints are not interior stationary points; compare them explicitly.
    [0.0, mid, 1.0]
        .into_iter()
        .fold((0.0, f64::NEG_INFINITY), |(ba, bf), a| {
            let v = f(a);
            if v > bf {
                (a, v)
            } else {
                (ba, bf)
            }
        })
        .0
}
