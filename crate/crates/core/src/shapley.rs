//! Shapley value iteration.
//!
//! Each sweep maximizes the separable objective of every state against the
//! previous iterate (Jacobi order), so states are solved independently and in
//! parallel. The patroller strategy is read off the last sweep.

use std::time::{Duration, Instant};

use num_rational::BigRational;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::alloc::{
    greedy_concave, greedy_scaled, greedy_scaled_lazy, scale_for_delta, AllocMethod, AllocResult,
    BreakpointPlan,
};
use crate::error::{PatrolError, Result};
use crate::game::{CostClass, GameInstance, PatrollerStrategy, ValueFunction};

pub const DEFAULT_EPSILON: f64 = 1e-3;
pub const DEFAULT_DELTA: f64 = 0.2;

/// Maximizer used for the per-state allocation problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "kebab-case")]
pub enum InnerSolver {
    ConcaveGreedy,
    ScaledGreedy { k: usize },
    LazyGreedy { k: usize },
}

impl InnerSolver {
    /// Scaled greedy with `K = n / delta`.
    pub fn scaled(n: usize, delta: f64) -> Result<Self> {
        Ok(InnerSolver::ScaledGreedy {
            k: scale_for_delta(n, delta)?,
        })
    }

    pub fn lazy(n: usize, delta: f64) -> Result<Self> {
        Ok(InnerSolver::LazyGreedy {
            k: scale_for_delta(n, delta)?,
        })
    }

    /// Concave greedy for concave costs, scaled greedy otherwise.
    pub fn for_instance(inst: &GameInstance, delta: f64) -> Result<Self> {
        match inst.cost().class() {
            CostClass::Concave => Ok(InnerSolver::ConcaveGreedy),
            CostClass::StrictlyConvex => Self::scaled(inst.n(), delta),
        }
    }

    pub fn method(&self) -> AllocMethod {
        match self {
            InnerSolver::ConcaveGreedy => AllocMethod::ConcaveGreedy,
            InnerSolver::ScaledGreedy { .. } => AllocMethod::ScaledGreedy,
            InnerSolver::LazyGreedy { .. } => AllocMethod::LazyGreedy,
        }
    }

    /// Grid spacing `1/K` of the scaled methods.
    pub fn delta(&self) -> Option<f64> {
        match *self {
            InnerSolver::ConcaveGreedy => None,
            InnerSolver::ScaledGreedy { k } | InnerSolver::LazyGreedy { k } => Some(1.0 / k as f64),
        }
    }

    pub fn check(&self, inst: &GameInstance) -> Result<()> {
        if *self == InnerSolver::ConcaveGreedy && inst.cost().class() != CostClass::Concave {
            return Err(PatrolError::Misuse(format!(
                "concave-greedy cannot be used with the strictly convex cost {}",
                inst.cost()
            )));
        }
        Ok(())
    }

    pub fn solve(
        &self,
        inst: &GameInstance,
        s: usize,
        values: &ValueFunction,
    ) -> Result<AllocResult> {
        match *self {
            InnerSolver::ConcaveGreedy => greedy_concave(inst, s, values),
            InnerSolver::ScaledGreedy { k } => greedy_scaled(inst, s, values, k),
            InnerSolver::LazyGreedy { k } => greedy_scaled_lazy(inst, s, values, k),
        }
    }
}

fn check_values(inst: &GameInstance, prev: &ValueFunction) -> Result<()> {
    if prev.len() != inst.n() {
        return Err(PatrolError::LengthMismatch {
            expected: inst.n(),
            got: prev.len(),
        });
    }
    if let Some(bad) = prev.0.iter().find(|v| !v.is_finite()) {
        return Err(PatrolError::Misuse(format!(
            "value function entry {bad} is not finite"
        )));
    }
    Ok(())
}

/// Per-state maximizers against `prev`, solved in parallel. Results are
/// collected in state order, so they do not depend on scheduling.
fn sweep_rows(
    inst: &GameInstance,
    prev: &ValueFunction,
    inner: InnerSolver,
    plan: Option<&BreakpointPlan>,
    keep_exact: bool,
) -> Result<Vec<AllocResult>> {
    (0..inst.n())
        .into_par_iter()
        .map(|s| match plan {
            Some(plan) => plan.solve(inst, s, prev, keep_exact),
            None => inner.solve(inst, s, prev),
        })
        .collect()
}

fn prepare(inst: &GameInstance, inner: InnerSolver) -> Result<Option<BreakpointPlan>> {
    inner.check(inst)?;
    match inner {
        InnerSolver::ConcaveGreedy => Ok(Some(BreakpointPlan::new(inst)?)),
        _ => Ok(None),
    }
}

/// One Jacobi sweep: `V_next(s) = max_pi G(pi, s, V_prev)` for every state.
///
/// Returns the new values and the maximizer found for each state.
pub fn bellman_sweep(
    inst: &GameInstance,
    prev: &ValueFunction,
    inner: InnerSolver,
) -> Result<(ValueFunction, Vec<AllocResult>)> {
    check_values(inst, prev)?;
    let plan = prepare(inst, inner)?;
    let rows = sweep_rows(inst, prev, inner, plan.as_ref(), true)?;
    let next = ValueFunction(rows.iter().map(|r| r.objective).collect());
    Ok((next, rows))
}

/// Outcome of [`value_iterate`].
#[derive(Debug, Clone)]
pub struct SolveReport {
    pub values: ValueFunction,
    pub pi: PatrollerStrategy,
    pub iterations: usize,
    /// Sup-norm change of the last sweep.
    pub final_gap: f64,
    pub epsilon: f64,
    pub delta: Option<f64>,
    pub method: AllocMethod,
    pub elapsed: Duration,
    /// Sup-norm change of every sweep, in order.
    pub gaps: Vec<f64>,
    /// Exact strategy rows from the concave greedy.
    pub exact_pi: Option<Vec<Vec<BigRational>>>,
}

impl SolveReport {
    /// Expected value under a uniform initial state.
    pub fn mean_value(&self) -> f64 {
        self.values.mean()
    }
}

#[derive(Debug, Clone, Default)]
pub struct SolveOptions {
    /// Starting iterate; zero when absent.
    pub initial: Option<ValueFunction>,
    /// Overrides [`iteration_cap`].
    pub max_iterations: Option<usize>,
}

/// Default sweep limit: ten times the number of contractions needed to
/// shrink the value range `R_max / (1 - gamma)` below `epsilon`.
pub fn iteration_cap(inst: &GameInstance, epsilon: f64) -> usize {
    let gamma = inst.gamma();
    let r_max = inst.reward_bound().max(f64::MIN_POSITIVE);
    if gamma <= 0.0 {
        return 10;
    }
    let needed = ((epsilon * (1.0 - gamma) / r_max).ln() / gamma.ln()).ceil();
    let needed = if needed.is_finite() {
        needed.max(1.0)
    } else {
        1.0
    };
    (10.0 * needed).min(1e9) as usize
}

/// Iterates [`bellman_sweep`] from zero until the sup-norm change is at most
/// `epsilon`.
pub fn value_iterate(inst: &GameInstance, epsilon: f64, inner: InnerSolver) -> Result<SolveReport> {
    value_iterate_with(inst, epsilon, inner, &SolveOptions::default())
}

pub fn value_iterate_with(
    inst: &GameInstance,
    epsilon: f64,
    inner: InnerSolver,
    options: &SolveOptions,
) -> Result<SolveReport> {
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(PatrolError::Misuse(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    let plan = prepare(inst, inner)?;
    let start = Instant::now();
    let cap = options
        .max_iterations
        .unwrap_or_else(|| iteration_cap(inst, epsilon))
        .max(1);
    let mut values = match &options.initial {
        Some(v) => v.clone(),
        None => ValueFunction::zeros(inst.n()),
    };
    check_values(inst, &values)?;
    let mut gaps = Vec::new();
    loop {
        let rows = sweep_rows(inst, &values, inner, plan.as_ref(), false)?;
        let next = ValueFunction(rows.iter().map(|r| r.objective).collect());
        let gap = next.sup_distance(&values);
        gaps.push(gap);
        if gap <= epsilon {
            // Repeat the last sweep keeping exact probabilities; the
            // decisions, and therefore the rows, are identical.
            let rows = match &plan {
                Some(plan) => sweep_rows(inst, &values, inner, Some(plan), true)?,
                None => rows,
            };
            let exact_pi = rows
                .iter()
                .map(|r| r.exact.clone())
                .collect::<Option<Vec<_>>>();
            let pi = PatrollerStrategy::new(rows.into_iter().map(|r| r.pi).collect())?;
            return Ok(SolveReport {
                values: next,
                pi,
                iterations: gaps.len(),
                final_gap: gap,
                epsilon,
                delta: inner.delta(),
                method: inner.method(),
                elapsed: start.elapsed(),
                gaps,
                exact_pi,
            });
        }
        values = next;
        if gaps.len() >= cap {
            return Err(PatrolError::NonConvergence {
                iterations: gaps.len(),
                last_gap: gap,
                gaps,
            });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alloc::simplex_grid_oracle;
    use crate::game::{CostFunction, MovementKind};
    use crate::response::{big_g, smuggler_best_response};
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

    fn single() -> GameInstance {
        GameInstance::new(
            vec![1.0],
            vec![vec![0.0]],
            CostFunction::linear(4.0).unwrap(),
            0.9,
        )
        .unwrap()
    }

    fn two_locations(gamma: f64) -> GameInstance {
        GameInstance::with_layout(
            vec![1.0, 1.0],
            MovementKind::LinearSquared,
            CostFunction::linear(4.0).unwrap(),
            gamma,
        )
        .unwrap()
    }

    #[test]
    fn single_location_sweep_is_trivial() {
        let (v, rows) = bellman_sweep(
            &single(),
            &ValueFunction::zeros(1),
            InnerSolver::ConcaveGreedy,
        )
        .unwrap();
        assert_eq!(v.0, vec![0.0]);
        assert_eq!(rows[0].pi, vec![1.0]);
    }

    #[test]
    fn single_location_converges_immediately() {
        let report = value_iterate(&single(), 1e-3, InnerSolver::ConcaveGreedy).unwrap();
        assert_eq!(report.values.0, vec![0.0]);
        assert!(report.iterations <= 2);
    }

    #[test]
    fn sweep_matches_big_g() {
        let inst = example1(6);
        let zero = ValueFunction::zeros(6);
        let (v, rows) = bellman_sweep(&inst, &zero, InnerSolver::ConcaveGreedy).unwrap();
        for s in 0..6 {
            let g = big_g(&inst, &rows[s].pi, s, &zero).unwrap();
            assert!((v[s] - g).abs() <= 1e-12);
        }
    }

    #[test]
    fn scaled_sweep_matches_grid_oracle() {
        let inst = two_locations(0.5);
        let prev = ValueFunction(vec![-1.5, -0.25]);
        let (v, _) = bellman_sweep(&inst, &prev, InnerSolver::ScaledGreedy { k: 100 }).unwrap();
        for s in 0..2 {
            let oracle = simplex_grid_oracle(&inst, s, &prev, 0.01).unwrap();
            assert!((v[s] - oracle.objective).abs() <= 1e-9);
        }
    }

    #[test]
    fn concave_greedy_rejects_convex_cost() {
        let inst = example1(3)
            .with_cost(CostFunction::power(4.0, 2.0).unwrap())
            .unwrap();
        let err = bellman_sweep(&inst, &ValueFunction::zeros(3), InnerSolver::ConcaveGreedy);
        assert!(matches!(err, Err(PatrolError::Misuse(_))));
    }

    #[test]
    fn example1_value() {
        let report = value_iterate(&example1(6), 1e-3, InnerSolver::ConcaveGreedy).unwrap();
        assert!(
            (report.mean_value() + 33.587).abs() <= 0.05,
            "{}",
            report.mean_value()
        );
        assert!(report.final_gap <= 1e-3);
        assert!(report.exact_pi.is_some());
    }

    /// Value iteration over the simplex grid with step 1e-3 and closed-form
    /// smuggler responses.
    fn fine_grid_values(inst: &GameInstance, epsilon: f64) -> Vec<f64> {
        let steps = 1000;
        let mut v = vec![0.0; 2];
        loop {
            let mut next = vec![0.0; 2];
            for (s, slot) in next.iter_mut().enumerate() {
                let mut best = f64::NEG_INFINITY;
                for k in 0..=steps {
                    let pi = [k as f64 / steps as f64, 1.0 - k as f64 / steps as f64];
                    let mut value = 0.0;
                    for b in 0..2 {
                        value += pi[b] * (inst.gamma() * v[b] - inst.movement(s, b));
                    }
                    for b in 0..2 {
                        let a = smuggler_best_response(inst.cost(), inst.reward(b), pi[b])
                            .unwrap()
                            .quantity;
                        value -= (1.0 - pi[b]) * inst.reward(b) * a - pi[b] * inst.cost().at(a);
                    }
                    best = best.max(value);
                }
                *slot = best;
            }
            let gap = (0..2).map(|s| (next[s] - v[s]).abs()).fold(0.0, f64::max);
            v = next;
            if gap <= epsilon {
                return v;
            }
        }
    }

    #[test]
    fn two_locations_match_fine_grid_iteration() {
        let inst = two_locations(0.5);
        let report = value_iterate(&inst, 1e-6, InnerSolver::ConcaveGreedy).unwrap();
        let oracle = fine_grid_values(&inst, 1e-6);
        for s in 0..2 {
            assert!(
                (report.values[s] - oracle[s]).abs() <= 5e-3,
                "{:?} vs {oracle:?}",
                report.values
            );
        }
    }

    #[test]
    fn non_convergence_carries_trajectory() {
        let options = SolveOptions {
            initial: None,
            max_iterations: Some(3),
        };
        match value_iterate_with(&example1(6), 1e-9, InnerSolver::ConcaveGreedy, &options) {
            Err(PatrolError::NonConvergence {
                iterations, gaps, ..
            }) => {
                assert_eq!(iterations, 3);
                assert_eq!(gaps.len(), 3);
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn iteration_cap_scales_with_tolerance() {
        let inst = example1(6);
        assert!(iteration_cap(&inst, 1e-6) > iteration_cap(&inst, 1e-3));
        assert_eq!(iteration_cap(&inst.with_gamma(0.0).unwrap(), 1e-3), 10);
        assert!(iteration_cap(&inst, 1e-3) >= 10);
    }

    #[test]
    fn parallel_sweep_is_bit_identical_to_sequential() {
        let inst = example1(9)
            .with_cost(CostFunction::power(4.0, 2.0).unwrap())
            .unwrap();
        let prev = ValueFunction((0..9).map(|i| -3.0 - i as f64 * 0.7).collect());
        let inner = InnerSolver::ScaledGreedy { k: 45 };
        let (v, _) = bellman_sweep(&inst, &prev, inner).unwrap();
        for s in 0..9 {
            let row = inner.solve(&inst, s, &prev).unwrap();
            assert_eq!(v[s].to_bits(), row.objective.to_bits());
        }
    }

    #[test]
    fn convex_updates_respect_perturbed_contraction() {
        let n = 6;
        let inst = example1(n)
            .with_cost(CostFunction::power(4.0, 2.0).unwrap())
            .unwrap();
        let delta = 0.2;
        let report = value_iterate(&inst, 1e-6, InnerSolver::scaled(n, delta).unwrap()).unwrap();
        let mut v = ValueFunction::zeros(n);
        let mut slack = 0.0f64;
        for _ in 0..report.iterations {
            let bound: f64 = (0..n)
                .map(|s| {
                    (0..n)
                        .map(|b| crate::response::lipschitz_bound(&inst, b, s, &v))
                        .sum::<f64>()
                })
                .fold(0.0, f64::max);
            slack = slack.max(2.0 * delta * bound);
            v = bellman_sweep(&inst, &v, InnerSolver::scaled(n, delta).unwrap())
                .unwrap()
                .0;
        }
        for w in report.gaps.windows(2).skip(1) {
            assert!(w[1] <= 1.1 * (inst.gamma() * w[0] + slack));
        }
    }

    fn linear_instance() -> impl Strategy<Value = GameInstance> {
        (2usize..=6, 0.0f64..0.95).prop_flat_map(|(n, gamma)| {
            (
                proptest::collection::vec(0.2f64..4.0, n),
                proptest::collection::vec(0.0f64..5.0, n * n),
                1.0f64..6.0,
            )
                .prop_map(move |(rewards, flat, c)| {
                    let matrix: Vec<Vec<f64>> = (0..n)
                        .map(|i| {
                            (0..n)
                                .map(|j| if i == j { 0.0 } else { flat[i * n + j] })
                                .collect()
                        })
                        .collect();
                    GameInstance::new(rewards, matrix, CostFunction::linear(c).unwrap(), gamma)
                        .unwrap()
                })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn exact_sweeps_contract(inst in linear_instance()) {
            let report = value_iterate(&inst, 1e-6, InnerSolver::ConcaveGreedy).unwrap();
            for w in report.gaps.windows(2) {
                prop_assert!(w[1] <= inst.gamma() * w[0] + 1e-12 * (1.0 + w[0]), "{:?}", report.gaps);
            }
        }

        #[test]
        fn terminal_sweep_is_a_fixed_point(inst in linear_instance(), eps in 1e-5f64..1e-2) {
            let report = value_iterate(&inst, eps, InnerSolver::ConcaveGreedy).unwrap();
            let (again, _) = bellman_sweep(&inst, &report.values, InnerSolver::ConcaveGreedy).unwrap();
            prop_assert!(again.sup_distance(&report.values) <= eps);
            for s in 0..inst.n() {
                let sum: f64 = report.pi.row(s).iter().sum();
                prop_assert!((sum - 1.0).abs() <= 1e-9);
            }
        }

        #[test]
        fn divisible_grid_reproduces_concave_trajectory(n in 2usize..=6, gamma in 0.0f64..0.95, mult in 1usize..=6) {
            // r = 1, C(1) = 4: every breakpoint is a multiple of 1/5.
            let inst = example1(n).with_gamma(gamma).unwrap();
            let k = 5 * mult;
            let concave = value_iterate(&inst, 1e-4, InnerSolver::ConcaveGreedy).unwrap();
            let scaled = value_iterate(&inst, 1e-4, InnerSolver::ScaledGreedy { k }).unwrap();
            prop_assert_eq!(concave.iterations, scaled.iterations);
            prop_assert_eq!(&concave.pi, &scaled.pi);
            for (a, b) in concave.gaps.iter().zip(&scaled.gaps) {
                prop_assert!((a - b).abs() <= 1e-9);
            }
        }
    }
}
