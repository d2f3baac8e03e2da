//! Smuggler equilibrium strategies and equilibrium certification.

use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, PatrolError, Result};
use crate::evaluation::{action_reward, best_response_strategy, policy_value, solve_discounted};
use crate::game::{
    CostClass, GameInstance, PatrollerStrategy, QuantityLottery, SmugglerStrategy, ValueFunction,
};
use crate::response::best_response_unchecked;

/// `max_q min_b f_b(q)` over the box `[0, 1]^n` with
/// `f_b(q) = sum_{i != b} r_i q_i + k_b - C(1) q_b`.
#[derive(Debug, Clone, PartialEq)]
pub struct MaximinProblem {
    rewards: Vec<f64>,
    catch_cost: f64,
    offsets: Vec<f64>,
}

impl MaximinProblem {
    pub fn new(rewards: Vec<f64>, catch_cost: f64, offsets: Vec<f64>) -> Result<Self> {
        if rewards.is_empty() {
            return Err(invalid("rewards", "need at least one location"));
        }
        if offsets.len() != rewards.len() {
            return Err(PatrolError::LengthMismatch {
                expected: rewards.len(),
                got: offsets.len(),
            });
        }
        if rewards.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            return Err(invalid("rewards", "must be positive and finite"));
        }
        if !(catch_cost.is_finite() && catch_cost >= 0.0) {
            return Err(invalid("catch_cost", "must be nonnegative and finite"));
        }
        if offsets.iter().any(|k| !k.is_finite()) {
            return Err(invalid("offsets", "must be finite"));
        }
        Ok(MaximinProblem {
            rewards,
            catch_cost,
            offsets,
        })
    }

    /// The smugglers' stage problem at `s`, with `k_b = m[s][b] - gamma V_pat(b)`
    /// and the cost replaced by its linear interpolant.
    pub fn for_state(inst: &GameInstance, s: usize, values: &ValueFunction) -> Result<Self> {
        inst.check_location(s)?;
        if values.len() != inst.n() {
            return Err(PatrolError::LengthMismatch {
                expected: inst.n(),
                got: values.len(),
            });
        }
        let offsets = (0..inst.n())
            .map(|b| inst.movement(s, b) - inst.gamma() * values[b])
            .collect();
        MaximinProblem::new(inst.rewards().to_vec(), inst.cost().at_one(), offsets)
    }

    pub fn n(&self) -> usize {
        self.rewards.len()
    }

    pub fn payoff(&self, b: usize, q: &[f64]) -> f64 {
        let smuggled: f64 = q
            .iter()
            .zip(&self.rewards)
            .enumerate()
            .filter(|&(i, _)| i != b)
            .map(|(_, (q, r))| q * r)
            .sum();
        smuggled + self.offsets[b] - self.catch_cost * q[b]
    }

    pub fn min_payoff(&self, q: &[f64]) -> f64 {
        (0..self.n())
            .map(|b| self.payoff(b, q))
            .fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaximinSolution {
    pub q: Vec<f64>,
    pub value: f64,
    pub exact_q: Vec<BigRational>,
    pub exact_value: BigRational,
}

fn rational(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite by construction")
}

fn to_f64(x: &BigRational) -> f64 {
    x.to_f64().expect("representable")
}

/// Exact solution of a [`MaximinProblem`]; the lexicographically smallest
/// optimal `q`.
///
/// With `w_b = r_b + C(1)` and `t = mu + sum_i r_i q_i`, the constraints read
/// `w_b q_b <= k_b - mu`. For fixed `mu` the best box point is
/// `q_b(mu) = clamp((k_b - mu) / w_b, 0, 1)`, so the problem reduces to
/// maximizing the concave piecewise-linear `h(mu) = mu + sum_b r_b q_b(mu)`
/// over `mu <= min_b k_b`. Every optimum lies on the curve `q(mu)`, which
/// decreases in `mu`, so the largest maximizing `mu` gives the
/// componentwise (hence lexicographically) smallest optimal `q`.
pub fn maximin_box_linear(problem: &MaximinProblem) -> MaximinSolution {
    let catch = rational(problem.catch_cost);
    let r: Vec<BigRational> = problem.rewards.iter().map(|&x| rational(x)).collect();
    let k: Vec<BigRational> = problem.offsets.iter().map(|&x| rational(x)).collect();
    let w: Vec<BigRational> = r.iter().map(|r| r + &catch).collect();
    let ceiling = k.iter().min().expect("n >= 1").clone();

    let quantities = |mu: &BigRational| -> Vec<BigRational> {
        k.iter()
            .zip(&w)
            .map(|(k, w)| {
                let q = (k - mu) / w;
                if q.is_negative() {
                    BigRational::zero()
                } else if q > BigRational::one() {
                    BigRational::one()
                } else {
                    q
                }
            })
            .collect()
    };
    let h = |mu: &BigRational| -> BigRational {
        quantities(mu)
            .iter()
            .zip(&r)
            .fold(mu.clone(), |acc, (q, r)| acc + q * r)
    };

    let mut candidates: Vec<BigRational> = k
        .iter()
        .zip(&w)
        .map(|(k, w)| k - w)
        .filter(|mu| *mu < ceiling)
        .collect();
    candidates.push(ceiling.clone());
    candidates.sort();
    candidates.dedup();

    let mut best_mu = candidates[0].clone();
    let mut best = h(&best_mu);
    for mu in &candidates[1..] {
        let value = h(mu);
        if value >= best {
            best = value;
            best_mu = mu.clone();
        }
    }
    let exact_q = quantities(&best_mu);
    MaximinSolution {
        q: exact_q.iter().map(to_f64).collect(),
        value: to_f64(&best),
        exact_q,
        exact_value: best,
    }
}

fn check_strategy(inst: &GameInstance, pi: &PatrollerStrategy) -> Result<()> {
    if pi.n() != inst.n() {
        return Err(PatrolError::LengthMismatch {
            expected: inst.n(),
            got: pi.n(),
        });
    }
    Ok(())
}

/// Smuggler equilibrium for strictly convex costs: the unique myopic best
/// response to `pi`, played deterministically.
pub fn smuggler_equilibrium_convex(
    inst: &GameInstance,
    pi: &PatrollerStrategy,
) -> Result<SmugglerStrategy> {
    if inst.cost().class() != CostClass::StrictlyConvex {
        return Err(PatrolError::Misuse(format!(
            "the convex extraction needs a strictly convex cost, got {}",
            inst.cost()
        )));
    }
    check_strategy(inst, pi)?;
    let rows = (0..inst.n())
        .map(|s| {
            (0..inst.n())
                .map(|i| {
                    QuantityLottery::deterministic(
                        best_response_unchecked(inst.cost(), inst.reward(i), pi.prob(s, i))
                            .quantity,
                    )
                })
                .collect()
        })
        .collect();
    SmugglerStrategy::new(rows)
}

/// Per-state maximin solutions of the smugglers' stage games.
pub fn smuggler_maximin(
    inst: &GameInstance,
    values: &ValueFunction,
) -> Result<Vec<MaximinSolution>> {
    (0..inst.n())
        .map(|s| {
            Ok(maximin_box_linear(&MaximinProblem::for_state(
                inst, s, values,
            )?))
        })
        .collect()
}

/// Smuggler equilibrium for concave costs: at each state, the maximin
/// expected quantities against the patroller values `values`, realized as
/// independent Bernoulli lotteries over {0, 1}.
pub fn smuggler_equilibrium_concave(
    inst: &GameInstance,
    pi: &PatrollerStrategy,
    values: &ValueFunction,
) -> Result<SmugglerStrategy> {
    if inst.cost().class() != CostClass::Concave {
        return Err(PatrolError::Misuse(format!(
            "the maximin extraction needs a concave cost, got {}",
            inst.cost()
        )));
    }
    check_strategy(inst, pi)?;
    let rows = smuggler_maximin(inst, values)?
        .into_iter()
        .map(|sol| sol.q.into_iter().map(QuantityLottery::bernoulli).collect())
        .collect();
    SmugglerStrategy::new(rows)
}

/// Dispatches on the cost class.
pub fn smuggler_equilibrium(
    inst: &GameInstance,
    pi: &PatrollerStrategy,
    values: &ValueFunction,
) -> Result<SmugglerStrategy> {
    match inst.cost().class() {
        CostClass::Concave => smuggler_equilibrium_concave(inst, pi, values),
        CostClass::StrictlyConvex => smuggler_equilibrium_convex(inst, pi),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumReport {
    pub xi: SmugglerStrategy,
    /// Per-state value the patroller gains by deviating.
    pub patroller_gain: Vec<f64>,
    /// Per-state value the smugglers gain by deviating.
    pub smuggler_gain: Vec<f64>,
    pub epsilon_certified: f64,
    /// Patroller value of the pair from every initial state.
    pub achieved: Vec<f64>,
    /// Sup-norm distance between `achieved` and the supplied values.
    pub value_residual: f64,
}

/// Optimal values of the patroller's decision problem when the smugglers
/// play `xi`, by policy iteration.
pub fn patroller_best_response_values(
    inst: &GameInstance,
    xi: &SmugglerStrategy,
) -> Result<Vec<f64>> {
    let n = inst.n();
    if xi.n() != n {
        return Err(PatrolError::LengthMismatch {
            expected: n,
            got: xi.n(),
        });
    }
    let rewards: Vec<Vec<f64>> = (0..n)
        .map(|s| {
            (0..n)
                .map(|b| action_reward(inst, xi.row(s), s, b))
                .collect()
        })
        .collect();
    let argmax =
        |scores: &[f64]| (1..n).fold(0, |best, b| if scores[b] > scores[best] { b } else { best });
    let mut policy: Vec<usize> = rewards.iter().map(|row| argmax(row)).collect();
    for _ in 0..(n * n + 100) {
        let transitions: Vec<Vec<f64>> = policy
            .iter()
            .map(|&b| (0..n).map(|j| if j == b { 1.0 } else { 0.0 }).collect())
            .collect();
        let step: Vec<f64> = (0..n).map(|s| rewards[s][policy[s]]).collect();
        let w = solve_discounted(inst, &transitions, &step)?;
        let mut changed = false;
        for s in 0..n {
            let scores: Vec<f64> = (0..n)
                .map(|b| rewards[s][b] + inst.gamma() * w[b])
                .collect();
            let best = argmax(&scores);
            let tol = 1e-12 * (1.0 + scores[policy[s]].abs());
            if scores[best] > scores[policy[s]] + tol {
                policy[s] = best;
                changed = true;
            }
        }
        if !changed {
            return Ok(w);
        }
    }
    Err(PatrolError::Misuse(
        "policy iteration did not stabilize".into(),
    ))
}

/// Measures how far `(pi, xi)` is from an equilibrium: the value each side
/// gains per state by a unilateral best response.
pub fn verify_epsilon_equilibrium(
    inst: &GameInstance,
    pi: &PatrollerStrategy,
    xi: &SmugglerStrategy,
    values: &ValueFunction,
) -> Result<EquilibriumReport> {
    check_strategy(inst, pi)?;
    if values.len() != inst.n() {
        return Err(PatrolError::LengthMismatch {
            expected: inst.n(),
            got: values.len(),
        });
    }
    let achieved = policy_value(inst, pi, xi)?;
    let worst = policy_value(inst, pi, &best_response_strategy(inst, pi)?)?;
    let best = patroller_best_response_values(inst, xi)?;
    let smuggler_gain: Vec<f64> = achieved
        .iter()
        .zip(&worst)
        .map(|(a, w)| (a - w).max(0.0))
        .collect();
    let patroller_gain: Vec<f64> = best
        .iter()
        .zip(&achieved)
        .map(|(b, a)| (b - a).max(0.0))
        .collect();
    let epsilon_certified = smuggler_gain
        .iter()
        .chain(&patroller_gain)
        .cloned()
        .fold(0.0, f64::max);
    let value_residual = achieved
        .iter()
        .zip(&values.0)
        .map(|(a, v)| (a - v).abs())
        .fold(0.0, f64::max);
    Ok(EquilibriumReport {
        xi: xi.clone(),
        patroller_gain,
        smuggler_gain,
        epsilon_certified,
        achieved,
        value_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{CostFunction, MovementKind};
    use crate::shapley::{value_iterate, InnerSolver};
    use num_bigint::BigInt;
    use proptest::prelude::*;

    fn example1(n: usize) -> GameInstance {
        GameInstance::with_layout(
            vec![1.0; n],
            MovementKind::LinearSquared,
            CostFunction::linear(4.0).unwrap(),
            0.9,
        )
        .unwrap()
    }

    fn grid_max(problem: &MaximinProblem, steps: usize) -> (f64, Vec<f64>) {
        let n = problem.n();
        let mut idx = vec![0usize; n];
        let mut best = (f64::NEG_INFINITY, vec![]);
        loop {
            let q: Vec<f64> = idx.iter().map(|&i| i as f64 / steps as f64).collect();
            let v = problem.min_payoff(&q);
            if v > best.0 {
                best = (v, q);
            }
            let mut pos = 0;
            while pos < n && idx[pos] == steps {
                idx[pos] = 0;
                pos += 1;
            }
            if pos == n {
                return best;
            }
            idx[pos] += 1;
        }
    }

    #[test]
    fn single_location_sends_nothing() {
        let p = MaximinProblem::new(vec![1.0], 4.0, vec![2.5]).unwrap();
        let sol = maximin_box_linear(&p);
        assert_eq!(sol.q, vec![0.0]);
        assert_eq!(sol.value, 2.5);
    }

    #[test]
    fn dominance_sends_everything() {
        // Free passage: each f_b only grows with the other locations' quantities.
        let p = MaximinProblem::new(vec![1.0; 3], 0.0, vec![0.0; 3]).unwrap();
        let sol = maximin_box_linear(&p);
        assert_eq!(sol.q, vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn two_locations_match_grid() {
        let p = MaximinProblem::new(vec![1.0, 1.0], 4.0, vec![0.0, 1.0]).unwrap();
        let sol = maximin_box_linear(&p);
        let (value, q) = grid_max(&p, 1000);
        assert!((sol.value - value).abs() <= 2e-3);
        for (a, b) in sol.q.iter().zip(&q) {
            assert!((a - b).abs() <= 2e-3, "{:?} vs {q:?}", sol.q);
        }
        assert!((p.min_payoff(&sol.q) - sol.value).abs() <= 1e-12);
    }

    #[test]
    fn lexicographic_choice_among_optima() {
        // f_1 = 2 q_2 - 2 q_1 + 1, f_2 = 2 q_1 - 2 q_2 + 1: optimal on the diagonal.
        let p = MaximinProblem::new(vec![2.0, 2.0], 2.0, vec![1.0, 1.0]).unwrap();
        let sol = maximin_box_linear(&p);
        assert_eq!(sol.q, vec![0.0, 0.0]);
        assert_eq!(sol.value, 1.0);
    }

    #[test]
    fn convex_extraction_examples() {
        let inst = GameInstance::new(
            vec![1.0; 3],
            vec![vec![0.0; 3]; 3],
            CostFunction::power(4.0, 2.0).unwrap(),
            0.9,
        )
        .unwrap();
        let pi = PatrollerStrategy::new(vec![
            vec![0.5, 0.5, 0.0],
            vec![1.0, 0.0, 0.0],
            vec![0.0, 0.0, 1.0],
        ])
        .unwrap();
        let xi = smuggler_equilibrium_convex(&inst, &pi).unwrap();
        assert_eq!(xi.lottery(0, 0).atoms(), &[(0.125, 1.0)]);
        assert_eq!(xi.lottery(1, 0).atoms(), &[(0.0, 1.0)]);
        assert_eq!(xi.lottery(0, 2).atoms(), &[(1.0, 1.0)]);
        for s in 0..3 {
            assert!(xi.row(s).iter().all(|l| l.atoms().len() == 1));
        }
        assert!(matches!(
            smuggler_equilibrium_convex(&example1(3), &PatrollerStrategy::uniform(3)),
            Err(PatrolError::Misuse(_))
        ));
        assert!(matches!(
            smuggler_equilibrium_concave(&inst, &pi, &ValueFunction::zeros(3)),
            Err(PatrolError::Misuse(_))
        ));
    }

    #[test]
    fn concave_single_location() {
        let inst = GameInstance::new(
            vec![1.0],
            vec![vec![0.0]],
            CostFunction::linear(4.0).unwrap(),
            0.9,
        )
        .unwrap();
        let xi = smuggler_equilibrium_concave(
            &inst,
            &PatrollerStrategy::uniform(1),
            &ValueFunction::zeros(1),
        )
        .unwrap();
        assert_eq!(xi.expected_quantities(0), vec![0.0]);
    }

    #[test]
    fn example1_structure() {
        let inst = example1(6);
        let report = value_iterate(&inst, 1e-3, InnerSolver::ConcaveGreedy).unwrap();
        let five = BigRational::from_integer(BigInt::from(5));
        for row in report.exact_pi.as_ref().unwrap() {
            assert!(row.iter().all(|p| (p * &five).is_integer()));
        }
        let xi = smuggler_equilibrium_concave(&inst, &report.pi, &report.values).unwrap();
        for s in 0..6 {
            let q = xi.expected_quantities(s);
            for b in 0..6 {
                let p = report.pi.prob(s, b);
                if p < 0.2 - 1e-12 {
                    assert_eq!(q[b], 1.0, "state {s} location {b}");
                } else if p > 0.2 + 1e-12 {
                    assert_eq!(q[b], 0.0, "state {s} location {b}");
                }
            }
            assert!(xi
                .row(s)
                .iter()
                .all(|l| l.atoms().iter().all(|&(a, _)| a == 0.0 || a == 1.0)));
        }
        let cert = verify_epsilon_equilibrium(&inst, &report.pi, &xi, &report.values).unwrap();
        assert!(cert.epsilon_certified <= 5.0 * 1e-3, "{cert:?}");
    }

    #[test]
    fn uniform_against_best_response() {
        let inst = example1(6);
        let pi = PatrollerStrategy::uniform(6);
        let xi = best_response_strategy(&inst, &pi).unwrap();
        let cert = verify_epsilon_equilibrium(&inst, &pi, &xi, &ValueFunction::zeros(6)).unwrap();
        assert!(cert.smuggler_gain.iter().all(|&g| g == 0.0));
        assert!(cert.patroller_gain.iter().any(|&g| g > 0.0));
    }

    #[test]
    fn forced_single_location_is_exact() {
        let inst = GameInstance::new(
            vec![1.0],
            vec![vec![0.0]],
            CostFunction::linear(4.0).unwrap(),
            0.9,
        )
        .unwrap();
        let cert = verify_epsilon_equilibrium(
            &inst,
            &PatrollerStrategy::uniform(1),
            &SmugglerStrategy::constant(1, 0.0),
            &ValueFunction::zeros(1),
        )
        .unwrap();
        assert_eq!(cert.epsilon_certified, 0.0);
    }

    #[test]
    fn strictly_concave_cost_matches_linear() {
        let linear = example1(6);
        let curved = linear
            .with_cost(CostFunction::power(4.0, 0.5).unwrap())
            .unwrap();
        let a = value_iterate(&linear, 1e-3, InnerSolver::ConcaveGreedy).unwrap();
        let b = value_iterate(&curved, 1e-3, InnerSolver::ConcaveGreedy).unwrap();
        assert_eq!(a.values, b.values);
        assert_eq!(a.pi, b.pi);
        let xa = smuggler_equilibrium_concave(&linear, &a.pi, &a.values).unwrap();
        let xb = smuggler_equilibrium_concave(&curved, &b.pi, &b.values).unwrap();
        assert_eq!(xa, xb);
    }

    #[test]
    fn extraction_reads_no_smuggler_discount() {
        // Only the instance, the patroller strategy and the patroller values enter.
        let extract: fn(
            &GameInstance,
            &PatrollerStrategy,
            &ValueFunction,
        ) -> Result<SmugglerStrategy> = smuggler_equilibrium_concave;
        let inst = example1(5);
        let report = value_iterate(&inst, 1e-3, InnerSolver::ConcaveGreedy).unwrap();
        let first = extract(&inst, &report.pi, &report.values).unwrap();
        let again = extract(&inst.clone(), &report.pi.clone(), &report.values.clone()).unwrap();
        assert_eq!(first, again);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]

        #[test]
        fn maximin_beats_every_grid_vertex(
            n in 1usize..=3,
            seed in proptest::collection::vec((0.2f64..4.0, -6.0f64..6.0), 3),
            catch in 0.0f64..6.0,
        ) {
            let rewards: Vec<f64> = seed[..n].iter().map(|p| p.0).collect();
            let offsets: Vec<f64> = seed[..n].iter().map(|p| p.1).collect();
            let p = MaximinProblem::new(rewards, catch, offsets).unwrap();
            let sol = maximin_box_linear(&p);
            prop_assert!(sol.q.iter().all(|q| (0.0..=1.0).contains(q)));
            prop_assert!((p.min_payoff(&sol.q) - sol.value).abs() <= 1e-9 * (1.0 + sol.value.abs()));
            let (grid, _) = grid_max(&p, 100);
            prop_assert!(sol.value >= grid - 1e-9 * (1.0 + grid.abs()));
        }
    }
}
