//! Maximization of the separable objective `G(pi) = sum_b g_b(pi_b)` over
//! the probability simplex.
//!
//! Every `g_b` is concave, so the problem is a separable concave resource
//! allocation. Three solvers are provided:
//!
//! * [`greedy_scaled`]: the classic greedy on the grid `pi_b in {0, 1/K, ..., 1}`,
//!   optimal for the discretized problem.
//! * [`greedy_scaled_lazy`]: the same greedy driven by a priority queue,
//!   with identical output.
//! * [`greedy_concave`]: for concave costs, jumps straight between the
//!   breakpoints of the piecewise-linear `g_b`; exact for linear costs.
//!
//! [`simplex_grid_oracle`] enumerates the grid by brute force for testing.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::ops::{Add, Sub};

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{PatrolError, Result};
use crate::game::{CostClass, CostFunction, GameInstance, ValueFunction};
use crate::response::StateObjective;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AllocMethod {
    ScaledGreedy,
    LazyGreedy,
    ConcaveGreedy,
    /// Concave greedy that splits residual mass evenly across tied locations.
    BalancedConcave,
    SimplexGrid,
}

impl std::fmt::Display for AllocMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            AllocMethod::ScaledGreedy => "scaled-greedy",
            AllocMethod::LazyGreedy => "lazy-greedy",
            AllocMethod::ConcaveGreedy => "concave-greedy",
            AllocMethod::BalancedConcave => "balanced-concave",
            AllocMethod::SimplexGrid => "simplex-grid",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AllocResult {
    pub pi: Vec<f64>,
    /// `G` evaluated at `pi`.
    pub objective: f64,
    /// Greedy increments (scaled methods), iterations (concave methods) or
    /// grid points visited (oracle).
    pub steps: usize,
    pub method: AllocMethod,
    /// Exact probabilities, kept by the concave methods.
    pub exact: Option<Vec<BigRational>>,
}

/// Grid size `K = n / delta`, rounded up when not integral.
///
/// A quotient within 1e-9 (relative) of an integer counts as integral, so
/// `9 / 0.04` gives 225 rather than 226.
pub fn scale_for_delta(n: usize, delta: f64) -> Result<usize> {
    if !(delta.is_finite() && delta > 0.0) {
        return Err(PatrolError::Misuse(format!(
            "delta must be positive, got {delta}"
        )));
    }
    let quotient = n as f64 / delta;
    let nearest = quotient.round();
    let k = if (quotient - nearest).abs() <= 1e-9 * nearest.max(1.0) {
        nearest
    } else {
        quotient.ceil()
    };
    Ok((k as usize).max(1))
}

fn check_scale(k: usize) -> Result<()> {
    if k == 0 {
        Err(PatrolError::Misuse("grid size K must be at least 1".into()))
    } else {
        Ok(())
    }
}

#[inline]
fn grid_gain(obj: &StateObjective<'_>, b: usize, count: usize, k: usize) -> f64 {
    let k = k as f64;
    // `+ 0.0` folds a negative zero into positive zero so ties compare equal.
    obj.g(b, (count + 1) as f64 / k) - obj.g(b, count as f64 / k) + 0.0
}

fn finish_scaled(
    obj: &StateObjective<'_>,
    counts: &[usize],
    k: usize,
    method: AllocMethod,
) -> AllocResult {
    let pi: Vec<f64> = counts.iter().map(|&c| c as f64 / k as f64).collect();
    AllocResult {
        objective: obj.total(&pi),
        pi,
        steps: k,
        method,
        exact: None,
    }
}

/// Greedy on the grid of multiples of `1/k`: `k` increments, each to the
/// location with the largest marginal gain, ties to the lowest index.
pub fn greedy_scaled(
    inst: &GameInstance,
    s: usize,
    values: &ValueFunction,
    k: usize,
) -> Result<AllocResult> {
    check_scale(k)?;
    inst.check_location(s)?;
    let obj = StateObjective::new(inst, s, values);
    let n = inst.n();
    let mut counts = vec![0usize; n];
    let mut last_gain = f64::INFINITY;
    for _ in 0..k {
        let mut best = 0;
        let mut best_gain = grid_gain(&obj, 0, counts[0], k);
        for b in 1..n {
            let gain = grid_gain(&obj, b, counts[b], k);
            if gain > best_gain {
                best = b;
                best_gain = gain;
            }
        }
        debug_assert!(
            best_gain <= last_gain + 1e-9 * (1.0 + last_gain.abs()),
            "marginal gains must not increase: {best_gain} after {last_gain}"
        );
        last_gain = best_gain;
        counts[best] += 1;
    }
    Ok(finish_scaled(&obj, &counts, k, AllocMethod::ScaledGreedy))
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    gain: f64,
    location: usize,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    // Max-heap order: larger gain first, then lower index.
    fn cmp(&self, other: &Self) -> Ordering {
        self.gain
            .partial_cmp(&other.gain)
            .expect("marginal gains are finite")
            .then_with(|| other.location.cmp(&self.location))
    }
}

/// [`greedy_scaled`] with the per-step scan replaced by a binary heap.
///
/// Only the chosen location's marginal gain changes after an increment, so
/// each step costs `O(log n)`. Output is identical to [`greedy_scaled`].
pub fn greedy_scaled_lazy(
    inst: &GameInstance,
    s: usize,
    values: &ValueFunction,
    k: usize,
) -> Result<AllocResult> {
    check_scale(k)?;
    inst.check_location(s)?;
    let obj = StateObjective::new(inst, s, values);
    let n = inst.n();
    let mut counts = vec![0usize; n];
    let mut heap: BinaryHeap<Candidate> = (0..n)
        .map(|b| Candidate {
            gain: grid_gain(&obj, b, 0, k),
            location: b,
        })
        .collect();
    for _ in 0..k {
        let top = heap.pop().expect("a location always has room left");
        let b = top.location;
        counts[b] += 1;
        if counts[b] < k {
            heap.push(Candidate {
                gain: grid_gain(&obj, b, counts[b], k),
                location: b,
            });
        }
    }
    Ok(finish_scaled(&obj, &counts, k, AllocMethod::LazyGreedy))
}

/// Breakpoint greedy for concave costs.
///
/// Each location's `g_b` is linear below and above the indifference
/// threshold `r_b / (C(1) + r_b)`, so mass moves in whole segments: every
/// iteration extends the location with the steepest next segment, ties to
/// the lowest index, capping the final step so the total is exactly 1.
/// Strictly concave costs are replaced by their linear interpolant, which
/// leaves the equilibria unchanged. Probabilities are tracked as exact
/// rationals.
pub fn greedy_concave(
    inst: &GameInstance,
    s: usize,
    values: &ValueFunction,
) -> Result<AllocResult> {
    BreakpointPlan::new(inst)?.solve(inst, s, values, true)
}

/// Segment lengths of every location, exact and rounded. `T` is either a
/// count of `1/denom` units or an exact rational.
struct Breakpoints<T> {
    one: T,
    thresholds: Vec<T>,
    tails: Vec<T>,
    rounded: Vec<(f64, f64)>,
}

impl<T> Breakpoints<T>
where
    T: Clone + PartialOrd + Add<Output = T> + Sub<Output = T>,
{
    fn new(one: T, thresholds: Vec<T>, rounded: Vec<(f64, f64)>) -> Self {
        let tails = thresholds.iter().map(|t| one.clone() - t.clone()).collect();
        Breakpoints {
            one,
            thresholds,
            tails,
            rounded,
        }
    }

    /// Runs the greedy on one state, returning the masses and iteration count.
    fn walk(&self, obj: &StateObjective<'_>, zero: T) -> (Vec<T>, usize) {
        let n = obj.n();
        let slopes: Vec<[f64; 2]> = (0..n)
            .map(|b| {
                let (t, tail) = self.rounded[b];
                let g_t = obj.g(b, t);
                // `+ 0.0` folds a negative zero so equal slopes tie.
                [
                    (g_t - obj.g(b, 0.0)) / t + 0.0,
                    (obj.g(b, 1.0) - g_t) / tail + 0.0,
                ]
            })
            .collect();
        let mut pi = vec![zero.clone(); n];
        let mut stage = vec![0usize; n];
        let mut total = zero;
        let mut iterations = 0;
        while total < self.one {
            iterations += 1;
            let mut best: Option<usize> = None;
            for b in (0..n).filter(|&b| stage[b] < 2) {
                if best.map_or(true, |c| slopes[b][stage[b]] > slopes[c][stage[c]]) {
                    best = Some(b);
                }
            }
            let b = best.expect("an open segment remains while mass is left");
            let step = if stage[b] == 0 {
                &self.thresholds[b]
            } else {
                &self.tails[b]
            };
            let remaining = self.one.clone() - total.clone();
            let step = if *step <= remaining {
                step.clone()
            } else {
                remaining
            };
            pi[b] = pi[b].clone() + step.clone();
            total = total + step;
            stage[b] += 1;
        }
        (pi, iterations)
    }
}

/// Largest common denominator whose unit counts convert to `f64` exactly.
const MAX_DENOMINATOR: u64 = 1 << 53;

/// Instance data of [`greedy_concave`], computed once and shared by every
/// state and sweep.
pub struct BreakpointPlan {
    linear: CostFunction,
    /// Thresholds as multiples of `1/denom` when a small common denominator
    /// exists.
    units: Option<(Breakpoints<u64>, u64)>,
    exact: Breakpoints<BigRational>,
}

impl BreakpointPlan {
    pub fn new(inst: &GameInstance) -> Result<Self> {
        check_concave(inst)?;
        let linear = inst.cost().linearized();
        let catch = rational(linear.at_one());
        let thresholds: Vec<BigRational> = inst
            .rewards()
            .iter()
            .map(|&r| {
                let r = rational(r);
                &r / (&catch + &r)
            })
            .collect();
        let one = BigRational::one();
        let rounded: Vec<(f64, f64)> = thresholds
            .iter()
            .map(|t| (to_f64(t), to_f64(&(&one - t))))
            .collect();
        let units = common_units(&thresholds)
            .map(|(counts, denom)| (Breakpoints::new(denom, counts, rounded.clone()), denom));
        Ok(BreakpointPlan {
            linear,
            units,
            exact: Breakpoints::new(one, thresholds, rounded),
        })
    }

    /// Solves state `s` of the instance the plan was built from. Exact
    /// probabilities are kept only when `keep_exact` is set.
    pub fn solve(
        &self,
        inst: &GameInstance,
        s: usize,
        values: &ValueFunction,
        keep_exact: bool,
    ) -> Result<AllocResult> {
        inst.check_location(s)?;
        debug_assert_eq!(inst.n(), self.exact.thresholds.len());
        let obj = StateObjective::new(inst, s, values).with_cost(&self.linear);
        let (pi, exact, iterations) = match &self.units {
            Some((plan, denom)) => {
                let (counts, it) = plan.walk(&obj, 0);
                // Both operands are below 2^53, so each quotient is correctly rounded.
                let pi: Vec<f64> = counts.iter().map(|&c| c as f64 / *denom as f64).collect();
                let exact = keep_exact.then(|| {
                    counts
                        .iter()
                        .map(|&c| BigRational::new(BigInt::from(c), BigInt::from(*denom)))
                        .collect()
                });
                (pi, exact, it)
            }
            None => {
                let (masses, it) = self.exact.walk(&obj, BigRational::zero());
                (
                    masses.iter().map(to_f64).collect(),
                    keep_exact.then_some(masses),
                    it,
                )
            }
        };
        debug_assert!(
            iterations <= inst.n() + 1,
            "{iterations} iterations for n = {}",
            inst.n()
        );
        Ok(AllocResult {
            objective: obj.total(&pi),
            pi,
            steps: iterations,
            method: AllocMethod::ConcaveGreedy,
            exact,
        })
    }
}

/// Expresses every value as a count of `1/denom` with a shared
/// `denom <= 2^53`.
fn common_units(values: &[BigRational]) -> Option<(Vec<u64>, u64)> {
    let limit = BigInt::from(MAX_DENOMINATOR);
    let mut denom = BigInt::one();
    for v in values {
        denom = denom.lcm(v.denom());
        if denom > limit {
            return None;
        }
    }
    let counts = values
        .iter()
        .map(|v| (v.numer() * (&denom / v.denom())).to_u64())
        .collect::<Option<Vec<_>>>()?;
    Some((counts, denom.to_u64()?))
}

fn check_concave(inst: &GameInstance) -> Result<()> {
    if inst.cost().class() != CostClass::Concave {
        return Err(PatrolError::Misuse(format!(
            "the breakpoint greedy needs a concave cost, got {}",
            inst.cost()
        )));
    }
    Ok(())
}

/// [`greedy_concave`] that resolves ties symmetrically: all locations tied
/// on the steepest slope advance together, and when their segments do not
/// fit in the remaining mass it is shared as evenly as their segment
/// lengths allow. Selects the centre of the optimal face instead of one of
/// its vertices.
pub fn greedy_concave_balanced(
    inst: &GameInstance,
    s: usize,
    values: &ValueFunction,
) -> Result<AllocResult> {
    check_concave(inst)?;
    inst.check_location(s)?;
    let linear: CostFunction = inst.cost().linearized();
    let obj = StateObjective::new(inst, s, values).with_cost(&linear);
    let n = inst.n();

    let catch = rational(linear.at_one());
    let thresholds: Vec<BigRational> = (0..n)
        .map(|b| {
            let r = rational(inst.reward(b));
            r.clone() / (catch.clone() + r)
        })
        .collect();
    let one = BigRational::one();
    let mut pi = vec![BigRational::zero(); n];
    let mut total = BigRational::zero();
    let mut iterations = 0;

    while total < one {
        iterations += 1;
        let steps: Vec<BigRational> = (0..n)
            .map(|b| {
                if pi[b].is_zero() {
                    thresholds[b].clone()
                } else {
                    &one - &thresholds[b]
                }
            })
            .collect();
        let slopes: Vec<f64> = (0..n)
            .map(|b| {
                let from = to_f64(&pi[b]);
                let to = to_f64(&(&pi[b] + &steps[b]));
                (obj.g(b, to) - obj.g(b, from)) / to_f64(&steps[b]) + 0.0
            })
            .collect();
        let best = (1..n).fold(0, |best, b| if slopes[b] > slopes[best] { b } else { best });
        let remaining = &one - &total;
        let tied: Vec<usize> = (0..n).filter(|&b| slopes[b] == slopes[best]).collect();
        let demand: BigRational = tied.iter().map(|&b| steps[b].clone()).sum();
        if demand <= remaining {
            for &b in &tied {
                pi[b] += &steps[b];
            }
            total += demand;
        } else {
            for (b, share) in water_fill(&tied, &steps, remaining) {
                pi[b] += share;
            }
            total = one.clone();
        }
    }

    let pi_f: Vec<f64> = pi.iter().map(to_f64).collect();
    Ok(AllocResult {
        objective: obj.total(&pi_f),
        pi: pi_f,
        steps: iterations,
        method: AllocMethod::BalancedConcave,
        exact: Some(pi),
    })
}

fn rational(x: f64) -> BigRational {
    BigRational::from_float(x).expect("instance parameters are finite")
}

/// Splits `mass` evenly over `members`, never giving a member more than
/// its cap; the surplus of capped members is shared among the rest.
fn water_fill(
    members: &[usize],
    caps: &[BigRational],
    mut mass: BigRational,
) -> Vec<(usize, BigRational)> {
    let mut open: Vec<usize> = members.to_vec();
    open.sort_by(|&a, &b| caps[a].cmp(&caps[b]).then(a.cmp(&b)));
    let mut out = Vec::with_capacity(open.len());
    let mut idx = 0;
    while idx < open.len() {
        let share = &mass / BigRational::from_integer(BigInt::from(open.len() - idx));
        let b = open[idx];
        if caps[b] <= share {
            mass -= &caps[b];
            out.push((b, caps[b].clone()));
            idx += 1;
        } else {
            out.extend(open[idx..].iter().map(|&b| (b, share.clone())));
            break;
        }
    }
    out
}

fn to_f64(x: &BigRational) -> f64 {
    x.to_f64().expect("probabilities fit in f64")
}

/// Largest simplex grid the oracle will enumerate.
pub const ORACLE_POINT_LIMIT: u128 = 50_000_000;

fn binomial(n: u128, k: u128) -> u128 {
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc.saturating_mul(n - i) / (i + 1))
}

/// Brute-force maximizer of `G` over all distributions whose entries are
/// multiples of `step`, ties to the lexicographically smallest.
pub fn simplex_grid_oracle(
    inst: &GameInstance,
    s: usize,
    values: &ValueFunction,
    step: f64,
) -> Result<AllocResult> {
    inst.check_location(s)?;
    let units = (1.0 / step).round();
    if !(step > 0.0 && units >= 1.0 && (units * step - 1.0).abs() <= 1e-9) {
        return Err(PatrolError::Misuse(format!(
            "step {step} does not divide 1"
        )));
    }
    let units = units as usize;
    let n = inst.n();
    let points = binomial((units + n - 1) as u128, (n - 1) as u128);
    if points > ORACLE_POINT_LIMIT {
        return Err(PatrolError::EnumerationTooLarge {
            points,
            limit: ORACLE_POINT_LIMIT,
        });
    }
    let obj = StateObjective::new(inst, s, values);
    let g_at = |b: usize, c: usize| obj.g(b, c as f64 / units as f64);

    // Odometer over compositions in lexicographic order; the last
    // coordinate absorbs whatever is left.
    let mut counts = vec![0usize; n];
    counts[n - 1] = units;
    let mut best_counts = counts.clone();
    let mut best_value = f64::NEG_INFINITY;
    let mut visited = 0;
    loop {
        visited += 1;
        let value: f64 = (0..n).map(|b| g_at(b, counts[b])).sum();
        if value > best_value {
            best_value = value;
            best_counts.clone_from(&counts);
        }
        // Lexicographic successor: grow the rightmost coordinate that still
        // has mass after it.
        let mut suffix = counts[n - 1];
        let mut grow = None;
        for i in (0..n - 1).rev() {
            if suffix > 0 {
                grow = Some(i);
                break;
            }
            suffix += counts[i];
        }
        let Some(pos) = grow else {
            let pi: Vec<f64> = best_counts
                .iter()
                .map(|&c| c as f64 / units as f64)
                .collect();
            return Ok(AllocResult {
                objective: obj.total(&pi),
                pi,
                steps: visited,
                method: AllocMethod::SimplexGrid,
                exact: None,
            });
        };
        counts[pos] += 1;
        let used: usize = counts[..=pos].iter().sum();
        for c in counts[pos + 1..n - 1].iter_mut() {
            *c = 0;
        }
        counts[n - 1] = units - used;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::MovementKind;
    use crate::response::{big_g, lipschitz_bound};
    use proptest::prelude::*;

    fn two_location() -> GameInstance {
        GameInstance::new(
            vec![1.0, 1.0],
            vec![vec![0.0; 2]; 2],
            CostFunction::linear(4.0).unwrap(),
            0.9,
        )
        .unwrap()
    }

    fn single() -> GameInstance {
        GameInstance::new(
            vec![2.0],
            vec![vec![1.0]],
            CostFunction::power(4.0, 2.0).unwrap(),
            0.5,
        )
        .unwrap()
    }

    #[test]
    fn scale_rounding() {
        assert_eq!(scale_for_delta(6, 0.2).unwrap(), 30);
        assert_eq!(scale_for_delta(9, 0.04).unwrap(), 225);
        assert_eq!(scale_for_delta(15, 0.04).unwrap(), 375);
        assert_eq!(scale_for_delta(12, 0.1).unwrap(), 120);
        assert_eq!(scale_for_delta(2, 0.3).unwrap(), 7);
        assert!(scale_for_delta(2, 0.0).is_err());
    }

    #[test]
    fn scaled_greedy_trace() {
        let inst = two_location();
        let v = ValueFunction::zeros(2);
        for res in [
            greedy_scaled(&inst, 0, &v, 5).unwrap(),
            greedy_scaled_lazy(&inst, 0, &v, 5).unwrap(),
        ] {
            assert_eq!(res.pi, vec![0.8, 0.2]);
            assert_eq!(res.objective, 0.0);
            assert_eq!(res.steps, 5);
        }
        let oracle = simplex_grid_oracle(&inst, 0, &v, 0.2).unwrap();
        assert_eq!(oracle.objective, 0.0);
        assert_eq!(oracle.steps, 6);
    }

    #[test]
    fn single_location() {
        let inst = single();
        let v = ValueFunction::zeros(1);
        for k in [1, 7, 40] {
            assert_eq!(greedy_scaled(&inst, 0, &v, k).unwrap().pi, vec![1.0]);
            assert_eq!(greedy_scaled_lazy(&inst, 0, &v, k).unwrap().pi, vec![1.0]);
        }
        assert_eq!(
            simplex_grid_oracle(&inst, 0, &v, 0.1).unwrap().pi,
            vec![1.0]
        );
        let lin = inst.with_cost(CostFunction::linear(4.0).unwrap()).unwrap();
        assert_eq!(greedy_concave(&lin, 0, &v).unwrap().pi, vec![1.0]);
    }

    #[test]
    fn concave_greedy_trace() {
        let inst = two_location();
        let v = ValueFunction::zeros(2);
        let res = greedy_concave(&inst, 0, &v).unwrap();
        assert_eq!(res.pi, vec![0.8, 0.2]);
        assert_eq!(res.objective, 0.0);
        assert_eq!(res.steps, 3);
        let fine = simplex_grid_oracle(&inst, 0, &v, 1e-3).unwrap();
        assert!(fine.objective <= res.objective);
    }

    #[test]
    fn concave_greedy_rejects_convex_cost() {
        assert!(matches!(
            greedy_concave(&single(), 0, &ValueFunction::zeros(1)),
            Err(PatrolError::Misuse(_))
        ));
    }

    #[test]
    fn balanced_ties_split_evenly() {
        let inst = GameInstance::new(
            vec![1.0; 6],
            vec![vec![0.0; 6]; 6],
            CostFunction::linear(4.0).unwrap(),
            0.0,
        )
        .unwrap();
        let v = ValueFunction::zeros(6);
        let res = greedy_concave_balanced(&inst, 0, &v).unwrap();
        let sixth = BigRational::new(1.into(), 6.into());
        assert!(res.exact.unwrap().iter().all(|p| *p == sixth));
        let plain = greedy_concave(&inst, 0, &v).unwrap();
        assert_eq!(plain.pi, vec![0.2, 0.2, 0.2, 0.2, 0.2, 0.0]);
        assert!((res.objective - plain.objective).abs() < 1e-12);

        let ring = GameInstance::new(
            vec![3.0, 2.0, 1.0, 1.0, 2.0, 3.0],
            vec![vec![0.0; 6]; 6],
            CostFunction::linear(4.0).unwrap(),
            0.0,
        )
        .unwrap();
        let res = greedy_concave_balanced(&ring, 0, &v).unwrap();
        let exact = res.exact.unwrap();
        let r = |a: i64, b: i64| BigRational::new(a.into(), b.into());
        assert_eq!(
            exact,
            vec![r(3, 7), r(1, 14), r(0, 1), r(0, 1), r(1, 14), r(3, 7)]
        );
    }

    #[test]
    fn water_fill_respects_caps() {
        let r = |a: i64, b: i64| BigRational::new(a.into(), b.into());
        let caps = vec![r(1, 10), r(1, 2), r(1, 2)];
        let shares = water_fill(&[0, 1, 2], &caps, r(1, 2));
        let mut by_loc = vec![BigRational::zero(); 3];
        for (b, x) in shares {
            by_loc[b] = x;
        }
        assert_eq!(by_loc, vec![r(1, 10), r(1, 5), r(1, 5)]);
    }

    #[test]
    fn oracle_refuses_huge_grids() {
        let inst = GameInstance::with_layout(
            vec![1.0; 6],
            MovementKind::LinearSquared,
            CostFunction::linear(4.0).unwrap(),
            0.9,
        )
        .unwrap();
        let err = simplex_grid_oracle(&inst, 0, &ValueFunction::zeros(6), 1e-3).unwrap_err();
        assert!(matches!(err, PatrolError::EnumerationTooLarge { .. }));
        assert!(simplex_grid_oracle(&inst, 0, &ValueFunction::zeros(6), 0.3).is_err());
    }

    #[test]
    fn oracle_matches_scaled_greedy_on_linear_costs() {
        let inst = GameInstance::with_layout(
            vec![1.0, 2.0, 0.5],
            MovementKind::Perimeter,
            CostFunction::linear(3.0).unwrap(),
            0.8,
        )
        .unwrap();
        let v = ValueFunction(vec![-4.0, -2.5, -7.0]);
        for s in 0..3 {
            for units in [4usize, 10, 25] {
                let greedy = greedy_scaled(&inst, s, &v, units).unwrap();
                let oracle = simplex_grid_oracle(&inst, s, &v, 1.0 / units as f64).unwrap();
                assert!((greedy.objective - oracle.objective).abs() <= 1e-12);
            }
        }
    }

    fn random_case(max_n: usize) -> impl Strategy<Value = (GameInstance, ValueFunction, usize)> {
        (1..=max_n)
            .prop_flat_map(|n| {
                (
                    proptest::collection::vec(0.2f64..3.0, n),
                    proptest::collection::vec(proptest::collection::vec(0.0f64..9.0, n), n),
                    prop_oneof![
                        (0.5f64..6.0).prop_map(|c| CostFunction::Linear { c }),
                        (0.5f64..6.0, 1.2f64..3.5).prop_map(|(c, p)| CostFunction::Power { c, p }),
                    ],
                    0.0f64..0.95,
                    proptest::collection::vec(-40.0f64..0.0, n),
                    0..n,
                )
            })
            .prop_map(|(r, m, cost, gamma, v, s)| {
                (
                    GameInstance::new(r, m, cost, gamma).unwrap(),
                    ValueFunction(v),
                    s,
                )
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn lazy_greedy_matches_scan((inst, v, s) in random_case(8), k in 1usize..=200) {
            let scan = greedy_scaled(&inst, s, &v, k).unwrap();
            let lazy = greedy_scaled_lazy(&inst, s, &v, k).unwrap();
            prop_assert_eq!(scan.pi, lazy.pi);
            prop_assert_eq!(scan.objective, lazy.objective);
        }

        #[test]
        fn outputs_are_distributions((inst, v, s) in random_case(6), k in 1usize..=60) {
            let mut results = vec![
                greedy_scaled(&inst, s, &v, k).unwrap(),
                greedy_scaled_lazy(&inst, s, &v, k).unwrap(),
            ];
            if inst.cost().class() == CostClass::Concave {
                results.push(greedy_concave(&inst, s, &v).unwrap());
                results.push(greedy_concave_balanced(&inst, s, &v).unwrap());
            }
            for res in results {
                prop_assert!(res.pi.iter().all(|&p| p >= 0.0));
                prop_assert!((res.pi.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
                let g = big_g(&inst, &res.pi, s, &v).unwrap();
                prop_assert!((g - res.objective).abs() <= 1e-9 * (1.0 + g.abs()));
            }
        }

        #[test]
        fn concave_greedy_is_short((inst, v, s) in random_case(8)) {
            let lin = inst.with_cost(CostFunction::linear(inst.cost().at_one()).unwrap()).unwrap();
            let res = greedy_concave(&lin, s, &v).unwrap();
            prop_assert!(res.steps <= lin.n() + 1);
            // Each coordinate moves at most twice: it ends at 0, at its
            // threshold, at 1, or holds the capped residual.
            prop_assert!(res.pi.iter().filter(|&&p| p > 0.0).count() <= res.steps);
        }

        #[test]
        fn scaled_greedy_within_proximity_bound((inst, v, s) in random_case(3), delta in prop_oneof![Just(0.5), Just(0.25), Just(0.2), Just(0.1)]) {
            let k = scale_for_delta(inst.n(), delta).unwrap();
            let greedy = greedy_scaled(&inst, s, &v, k).unwrap();
            let reference = simplex_grid_oracle(&inst, s, &v, 0.01).unwrap();
            let bound: f64 = (0..inst.n()).map(|b| lipschitz_bound(&inst, b, s, &v)).sum::<f64>() * delta;
            prop_assert!((greedy.objective - reference.objective).abs() <= bound + 1e-12);
        }
    }
}
