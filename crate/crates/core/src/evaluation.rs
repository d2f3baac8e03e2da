//! Strategy evaluation: exact discounted values, worst-case expected reward,
//! myopic baselines and Monte Carlo simulation.

use nalgebra::{DMatrix, DVector};
use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::alloc::{greedy_concave_balanced, greedy_scaled, scale_for_delta};
use crate::error::{PatrolError, Result};
use crate::game::{
    CostClass, GameInstance, PatrollerStrategy, QuantityLottery, SmugglerStrategy, ValueFunction,
};
use crate::response::best_response_unchecked;

/// Largest tolerated residual of the policy evaluation solve.
pub const RESIDUAL_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EvalMethod {
    PolicyValue,
    WorstCase,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub per_state_value: Vec<f64>,
    /// Average over a uniform initial state.
    pub mean_value: f64,
    pub method: EvalMethod,
}

impl EvalResult {
    fn new(per_state_value: Vec<f64>, method: EvalMethod) -> Self {
        let mean_value = per_state_value.iter().sum::<f64>() / per_state_value.len() as f64;
        EvalResult {
            per_state_value,
            mean_value,
            method,
        }
    }
}

fn check_sizes(
    inst: &GameInstance,
    pi: &PatrollerStrategy,
    xi: Option<&SmugglerStrategy>,
) -> Result<()> {
    if pi.n() != inst.n() {
        return Err(PatrolError::LengthMismatch {
            expected: inst.n(),
            got: pi.n(),
        });
    }
    if let Some(xi) = xi {
        if xi.n() != inst.n() {
            return Err(PatrolError::LengthMismatch {
                expected: inst.n(),
                got: xi.n(),
            });
        }
    }
    Ok(())
}

/// Expected patroller reward at `s` for guarding `b` against the lotteries
/// `row`.
pub fn action_reward(inst: &GameInstance, row: &[QuantityLottery], s: usize, b: usize) -> f64 {
    let smuggled: f64 = row
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != b)
        .map(|(i, l)| inst.reward(i) * l.expected_quantity())
        .sum();
    row[b].expected_cost(inst.cost()) - smuggled - inst.movement(s, b)
}

/// One-step expected patroller reward at every state.
pub fn expected_rewards(
    inst: &GameInstance,
    pi: &PatrollerStrategy,
    xi: &SmugglerStrategy,
) -> Vec<f64> {
    (0..inst.n())
        .map(|s| {
            let row = xi.row(s);
            (0..inst.n())
                .map(|b| pi.prob(s, b) * action_reward(inst, row, s, b))
                .sum()
        })
        .collect()
}

/// Solves `(I - gamma P) W = R` with `P` given row by row.
pub(crate) fn solve_discounted(
    inst: &GameInstance,
    transitions: &[Vec<f64>],
    rewards: &[f64],
) -> Result<Vec<f64>> {
    let n = inst.n();
    let gamma = inst.gamma();
    let system = DMatrix::from_fn(n, n, |s, b| {
        let identity = if s == b { 1.0 } else { 0.0 };
        identity - gamma * transitions[s][b]
    });
    let rhs = DVector::from_column_slice(rewards);
    let w = system
        .clone()
        .lu()
        .solve(&rhs)
        .ok_or_else(|| PatrolError::Misuse("policy evaluation system is singular".into()))?;
    let residual = (&system * &w - &rhs).amax();
    let scale = 1.0f64.max(rhs.amax());
    if residual > RESIDUAL_TOLERANCE * scale {
        return Err(PatrolError::Misuse(format!(
            "policy evaluation residual {residual:e} exceeds tolerance"
        )));
    }
    Ok(w.iter().copied().collect())
}

/// Discounted patroller value of the stationary pair `(pi, xi)` from every
/// initial state.
pub fn policy_value(
    inst: &GameInstance,
    pi: &PatrollerStrategy,
    xi: &SmugglerStrategy,
) -> Result<Vec<f64>> {
    check_sizes(inst, pi, Some(xi))?;
    let rewards = expected_rewards(inst, pi, xi);
    solve_discounted(inst, &pi.rows(), &rewards)
}

/// The smugglers' best response to `pi`: at each state, every location
/// plays its myopic best response (quantity 1 at concave ties).
pub fn best_response_strategy(
    inst: &GameInstance,
    pi: &PatrollerStrategy,
) -> Result<SmugglerStrategy> {
    check_sizes(inst, pi, None)?;
    let rows = (0..inst.n())
        .map(|s| {
            (0..inst.n())
                .map(|i| {
                    let q = best_response_unchecked(inst.cost(), inst.reward(i), pi.prob(s, i))
                        .quantity;
                    QuantityLottery::deterministic(q)
                })
                .collect()
        })
        .collect();
    SmugglerStrategy::new(rows)
}

/// Worst-case expected reward of `pi` against best-responding smugglers.
pub fn wcer(inst: &GameInstance, pi: &PatrollerStrategy) -> Result<EvalResult> {
    let xi = best_response_strategy(inst, pi)?;
    Ok(EvalResult::new(
        policy_value(inst, pi, &xi)?,
        EvalMethod::WorstCase,
    ))
}

/// [`policy_value`] packaged with its uniform-start mean.
pub fn evaluate(
    inst: &GameInstance,
    pi: &PatrollerStrategy,
    xi: &SmugglerStrategy,
) -> Result<EvalResult> {
    Ok(EvalResult::new(
        policy_value(inst, pi, xi)?,
        EvalMethod::PolicyValue,
    ))
}

/// Strategy of a patroller that ignores the future (`gamma = 0`).
///
/// Without movement the one-shot game is solved once with zero movement
/// costs and its row reused for every state. With movement each state is
/// solved with its own movement costs. Concave costs use the balanced
/// breakpoint greedy, strictly convex costs the scaled greedy with
/// `K = n / delta`.
pub fn myopic_baseline(
    inst: &GameInstance,
    include_movement: bool,
    delta: f64,
) -> Result<PatrollerStrategy> {
    let myopic = inst.with_gamma(0.0)?;
    let myopic = if include_movement {
        myopic
    } else {
        myopic.without_movement()
    };
    let zero = ValueFunction::zeros(inst.n());
    let solve = |s: usize| -> Result<Vec<f64>> {
        match myopic.cost().class() {
            CostClass::Concave => Ok(greedy_concave_balanced(&myopic, s, &zero)?.pi),
            CostClass::StrictlyConvex => {
                let k = scale_for_delta(inst.n(), delta)?;
                Ok(greedy_scaled(&myopic, s, &zero, k)?.pi)
            }
        }
    };
    let rows = if include_movement {
        (0..inst.n()).map(solve).collect::<Result<Vec<_>>>()?
    } else {
        vec![solve(0)?; inst.n()]
    };
    PatrollerStrategy::new(rows)
}

/// Monte Carlo estimate of the patroller's discounted reward.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub replications: usize,
    pub horizon: usize,
    pub seed: u64,
    /// Bound on the discounted reward lost by truncating at `horizon`.
    pub truncation_bound: f64,
}

/// `gamma^horizon * R_max / (1 - gamma)`.
pub fn truncation_bound(inst: &GameInstance, horizon: usize) -> f64 {
    let gamma = inst.gamma();
    gamma.powi(horizon.min(i32::MAX as usize) as i32) * inst.reward_bound() / (1.0 - gamma)
}

struct Samplers {
    guard: Vec<WeightedIndex<f64>>,
    quantity: Vec<Vec<(WeightedIndex<f64>, Vec<f64>)>>,
}

impl Samplers {
    fn new(pi: &PatrollerStrategy, xi: &SmugglerStrategy) -> Result<Self> {
        let bad =
            |e: rand::distributions::WeightedError| PatrolError::InvalidDistribution(e.to_string());
        let n = pi.n();
        let guard = (0..n)
            .map(|s| WeightedIndex::new(pi.row(s)).map_err(bad))
            .collect::<Result<Vec<_>>>()?;
        let quantity = (0..n)
            .map(|s| {
                xi.row(s)
                    .iter()
                    .map(|l| {
                        let weights = l.atoms().iter().map(|&(_, p)| p);
                        let values = l.atoms().iter().map(|&(q, _)| q).collect();
                        Ok((WeightedIndex::new(weights).map_err(bad)?, values))
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Samplers { guard, quantity })
    }
}

/// Simulates `replications` independent trajectories of length `horizon`.
///
/// Replication `j` draws from ChaCha8 seeded with `seed` on stream `j`. Each
/// trajectory draws the initial state uniformly, then per step the guarded
/// location followed by every location's quantity in ascending order. The
/// result does not depend on the thread count.
pub fn simulate(
    inst: &GameInstance,
    pi: &PatrollerStrategy,
    xi: &SmugglerStrategy,
    horizon: usize,
    replications: usize,
    seed: u64,
) -> Result<SimEstimate> {
    check_sizes(inst, pi, Some(xi))?;
    if horizon == 0 || replications == 0 {
        return Err(PatrolError::Misuse(
            "horizon and replications must be at least 1".into(),
        ));
    }
    let samplers = Samplers::new(pi, xi)?;
    let n = inst.n();
    let gamma = inst.gamma();
    let run = |rep: usize| -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(rep as u64);
        let mut state = rng.gen_range(0..n);
        let mut quantities = vec![0.0; n];
        let mut discount = 1.0;
        let mut total = 0.0;
        for _ in 0..horizon {
            let b = samplers.guard[state].sample(&mut rng);
            for (i, q) in quantities.iter_mut().enumerate() {
                let (dist, values) = &samplers.quantity[state][i];
                *q = values[dist.sample(&mut rng)];
            }
            let smuggled: f64 = (0..n)
                .filter(|&i| i != b)
                .map(|i| inst.reward(i) * quantities[i])
                .sum();
            total +=
                discount * (inst.cost().at(quantities[b]) - smuggled - inst.movement(state, b));
            discount *= gamma;
            state = b;
        }
        total
    };
    let returns: Vec<f64> = (0..replications).into_par_iter().map(run).collect();
    let count = replications as f64;
    let mean = returns.iter().sum::<f64>() / count;
    let std_error = if replications > 1 {
        let var = returns.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (count - 1.0);
        (var / count).sqrt()
    } else {
        0.0
    };
    Ok(SimEstimate {
        mean,
        std_error,
        replications,
        horizon,
        seed,
        truncation_bound: truncation_bound(inst, horizon),
    })
}
