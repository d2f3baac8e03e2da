//! Game instances, cost families, reward functions and strategy types.
//!
//! Locations are 0-based throughout the library. File formats and the CLI
//! present them 1-based.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, PatrolError, Result};

/// Row sums of strategies may drift from 1 by this much.
pub const SUM_TOLERANCE: f64 = 1e-9;

/// Shape classification of a cost function on [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CostClass {
    Concave,
    StrictlyConvex,
}

/// Penalty paid by a smuggler caught carrying quantity `a`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum CostFunction {
    /// `C(a) = c * a`
    Linear { c: f64 },
    /// `C(a) = c * a^p`, `p != 1`
    Power { c: f64, p: f64 },
}

impl CostFunction {
    pub fn linear(c: f64) -> Result<Self> {
        let cost = CostFunction::Linear { c };
        cost.validate()?;
        Ok(cost)
    }

    pub fn power(c: f64, p: f64) -> Result<Self> {
        let cost = CostFunction::Power { c, p };
        cost.validate()?;
        Ok(cost)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            CostFunction::Linear { c } => {
                if !(c.is_finite() && c > 0.0) {
                    return Err(invalid(
                        "cost.c",
                        format!("must be a positive real, got {c}"),
                    ));
                }
            }
            CostFunction::Power { c, p } => {
                if !(c.is_finite() && c > 0.0) {
                    return Err(invalid(
                        "cost.c",
                        format!("must be a positive real, got {c}"),
                    ));
                }
                if !(p.is_finite() && p > 0.0) {
                    return Err(invalid(
                        "cost.p",
                        format!("must be a positive real, got {p}"),
                    ));
                }
                if p == 1.0 {
                    return Err(invalid(
                        "cost.p",
                        "p = 1 is the linear family; use \"linear\"",
                    ));
                }
            }
        }
        Ok(())
    }

    /// Evaluates `C(a)`, rejecting quantities outside [0, 1].
    pub fn eval(&self, a: f64) -> Result<f64> {
        check_unit("quantity", a)?;
        Ok(self.at(a))
    }

    /// Unchecked evaluation for callers that already validated `a`.
    #[inline]
    pub fn at(&self, a: f64) -> f64 {
        match *self {
            CostFunction::Linear { c } => c * a,
            CostFunction::Power { c, p } => {
                if p == 2.0 {
                    c * a * a
                } else {
                    c * a.powf(p)
                }
            }
        }
    }

    /// `C(1)`
    #[inline]
    pub fn at_one(&self) -> f64 {
        match *self {
            CostFunction::Linear { c } | CostFunction::Power { c, .. } => c,
        }
    }

    /// Largest slope of `C` on [0, 1]. Unbounded for concave powers.
    pub fn max_slope(&self) -> f64 {
        match *self {
            CostFunction::Linear { c } => c,
            CostFunction::Power { c, p } if p > 1.0 => c * p,
            CostFunction::Power { .. } => f64::INFINITY,
        }
    }

    pub fn class(&self) -> CostClass {
        match *self {
            CostFunction::Linear { .. } => CostClass::Concave,
            CostFunction::Power { p, .. } if p < 1.0 => CostClass::Concave,
            CostFunction::Power { .. } => CostClass::StrictlyConvex,
        }
    }

    pub fn is_linear(&self) -> bool {
        matches!(self, CostFunction::Linear { .. })
    }

    /// The linear cost agreeing with `self` at 0 and 1.
    pub fn linearized(&self) -> CostFunction {
        CostFunction::Linear { c: self.at_one() }
    }
}

impl fmt::Display for CostFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            CostFunction::Linear { c } => write!(f, "{c}a"),
            CostFunction::Power { c, p } => write!(f, "{c}a^{p}"),
        }
    }
}

/// Named movement-cost layouts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MovementKind {
    /// `m[i][j] = |i - j|^2`
    LinearSquared,
    /// `m[i][j] = min(|i - j|, n - |i - j|)`
    Perimeter,
    /// `m[i][j] = min(|i - j|, n - |i - j|)^2`
    PerimeterSquared,
    /// Matrix supplied by the caller.
    Explicit,
}

impl MovementKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            MovementKind::LinearSquared => "linear-squared",
            MovementKind::Perimeter => "perimeter",
            MovementKind::PerimeterSquared => "perimeter-squared",
            MovementKind::Explicit => "explicit",
        }
    }
}

impl FromStr for MovementKind {
    type Err = PatrolError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear-squared" => Ok(MovementKind::LinearSquared),
            "perimeter" => Ok(MovementKind::Perimeter),
            "perimeter-squared" => Ok(MovementKind::PerimeterSquared),
            "explicit" => Ok(MovementKind::Explicit),
            other => Err(invalid("movement.kind", format!("unknown kind {other:?}"))),
        }
    }
}

impl fmt::Display for MovementKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Builds the movement-cost matrix of a generated layout.
pub fn make_movement(kind: MovementKind, n: usize) -> Result<Vec<Vec<f64>>> {
    if n == 0 {
        return Err(invalid("n", "must be at least 1"));
    }
    let cost = |i: usize, j: usize| -> Result<f64> {
        let d = i.abs_diff(j);
        let wrap = d.min(n - d);
        Ok(match kind {
            MovementKind::LinearSquared => (d * d) as f64,
            MovementKind::Perimeter => wrap as f64,
            MovementKind::PerimeterSquared => (wrap * wrap) as f64,
            MovementKind::Explicit => {
                return Err(invalid("movement.kind", "explicit movement needs a matrix"))
            }
        })
    };
    (0..n)
        .map(|i| (0..n).map(|j| cost(i, j)).collect())
        .collect()
}

/// A fully parameterized border patrol game.
#[derive(Debug, Clone, PartialEq)]
pub struct GameInstance {
    rewards: Vec<f64>,
    movement: Vec<f64>,
    movement_kind: MovementKind,
    cost: CostFunction,
    gamma: f64,
}

impl GameInstance {
    pub fn new(
        rewards: Vec<f64>,
        movement: Vec<Vec<f64>>,
        cost: CostFunction,
        gamma: f64,
    ) -> Result<Self> {
        Self::with_kind(rewards, movement, MovementKind::Explicit, cost, gamma)
    }

    /// Instance whose movement costs follow a generated layout.
    pub fn with_layout(
        rewards: Vec<f64>,
        kind: MovementKind,
        cost: CostFunction,
        gamma: f64,
    ) -> Result<Self> {
        let movement = make_movement(kind, rewards.len())?;
        Self::with_kind(rewards, movement, kind, cost, gamma)
    }

    fn with_kind(
        rewards: Vec<f64>,
        movement: Vec<Vec<f64>>,
        movement_kind: MovementKind,
        cost: CostFunction,
        gamma: f64,
    ) -> Result<Self> {
        let n = rewards.len();
        if n == 0 {
            return Err(invalid("rewards", "at least one location is required"));
        }
        for (i, &r) in rewards.iter().enumerate() {
            if !(r.is_finite() && r > 0.0) {
                return Err(invalid(
                    format!("rewards[{i}]"),
                    format!("must be positive, got {r}"),
                ));
            }
        }
        if movement.len() != n {
            return Err(invalid(
                "movement.matrix",
                format!("expected {n} rows, got {}", movement.len()),
            ));
        }
        let mut flat = Vec::with_capacity(n * n);
        for (i, row) in movement.iter().enumerate() {
            if row.len() != n {
                return Err(invalid(
                    format!("movement.matrix[{i}]"),
                    format!("expected {n} entries, got {}", row.len()),
                ));
            }
            for (j, &m) in row.iter().enumerate() {
                if !(m.is_finite() && m >= 0.0) {
                    return Err(invalid(
                        format!("movement.matrix[{i}][{j}]"),
                        format!("must be nonnegative, got {m}"),
                    ));
                }
                flat.push(m);
            }
        }
        cost.validate()?;
        if !(0.0..1.0).contains(&gamma) {
            return Err(invalid("gamma", format!("must lie in [0, 1), got {gamma}")));
        }
        Ok(GameInstance {
            rewards,
            movement: flat,
            movement_kind,
            cost,
            gamma,
        })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.rewards.len()
    }

    #[inline]
    pub fn reward(&self, i: usize) -> f64 {
        self.rewards[i]
    }

    pub fn rewards(&self) -> &[f64] {
        &self.rewards
    }

    /// Cost for the patroller to move from `from` to `to`.
    #[inline]
    pub fn movement(&self, from: usize, to: usize) -> f64 {
        self.movement[from * self.n() + to]
    }

    pub fn movement_row(&self, from: usize) -> &[f64] {
        let n = self.n();
        &self.movement[from * n..(from + 1) * n]
    }

    pub fn movement_matrix(&self) -> Vec<Vec<f64>> {
        (0..self.n())
            .map(|s| self.movement_row(s).to_vec())
            .collect()
    }

    pub fn movement_kind(&self) -> MovementKind {
        self.movement_kind
    }

    pub fn cost(&self) -> &CostFunction {
        &self.cost
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn with_gamma(&self, gamma: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&gamma) {
            return Err(invalid("gamma", format!("must lie in [0, 1), got {gamma}")));
        }
        Ok(GameInstance {
            gamma,
            ..self.clone()
        })
    }

    pub fn with_cost(&self, cost: CostFunction) -> Result<Self> {
        cost.validate()?;
        Ok(GameInstance {
            cost,
            ..self.clone()
        })
    }

    /// Same game with every movement cost set to zero.
    pub fn without_movement(&self) -> Self {
        GameInstance {
            movement: vec![0.0; self.movement.len()],
            movement_kind: MovementKind::Explicit,
            ..self.clone()
        }
    }

    /// Bound on the magnitude of any single-period reward.
    pub fn reward_bound(&self) -> f64 {
        let max_move = self.movement.iter().cloned().fold(0.0, f64::max);
        self.rewards.iter().sum::<f64>() + self.cost.at_one() + max_move
    }

    pub(crate) fn check_location(&self, index: usize) -> Result<()> {
        if index < self.n() {
            Ok(())
        } else {
            Err(PatrolError::IndexOutOfRange { index, n: self.n() })
        }
    }

    fn check_action(&self, a: &[f64]) -> Result<()> {
        if a.len() != self.n() {
            return Err(PatrolError::LengthMismatch {
                expected: self.n(),
                got: a.len(),
            });
        }
        a.iter().try_for_each(|&q| check_unit("quantity", q))
    }
}

pub(crate) fn check_unit(what: &'static str, value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(PatrolError::Domain { what, value })
    }
}

/// `C(a)` with domain checking.
pub fn cost_eval(cost: &CostFunction, a: f64) -> Result<f64> {
    cost.eval(a)
}

/// Patroller reward for guarding `b` from state `s` while the smugglers
/// send `a`: `C(a_b) - sum_{i != b} r_i a_i - m[s][b]`.
pub fn reward_patroller(inst: &GameInstance, b: usize, a: &[f64], s: usize) -> Result<f64> {
    inst.check_location(b)?;
    inst.check_location(s)?;
    inst.check_action(a)?;
    let smuggled: f64 = a
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != b)
        .map(|(i, &q)| inst.reward(i) * q)
        .sum();
    Ok(inst.cost().at(a[b]) - smuggled - inst.movement(s, b))
}

/// Smuggler reward in the zero-sum form, which credits the smugglers with
/// the patroller's movement cost.
pub fn reward_smuggler_zero_sum(inst: &GameInstance, b: usize, a: &[f64], s: usize) -> Result<f64> {
    reward_patroller(inst, b, a, s).map(|r| -r)
}

/// Aggregated smuggler reward of the original game (no movement term).
pub fn reward_smuggler_original(inst: &GameInstance, b: usize, a: &[f64]) -> Result<f64> {
    inst.check_location(b)?;
    inst.check_action(a)?;
    let smuggled: f64 = a
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != b)
        .map(|(i, &q)| inst.reward(i) * q)
        .sum();
    Ok(smuggled - inst.cost().at(a[b]))
}

/// Reward of the individual smuggler at location `i` when the patroller
/// guards `b`.
pub fn reward_smuggler_individual(
    inst: &GameInstance,
    i: usize,
    b: usize,
    a: &[f64],
) -> Result<f64> {
    inst.check_location(i)?;
    inst.check_location(b)?;
    inst.check_action(a)?;
    Ok(if b == i {
        -inst.cost().at(a[i])
    } else {
        inst.reward(i) * a[i]
    })
}

/// Stationary patroller strategy: row `s` is the guard distribution used
/// when the patroller currently stands at `s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct PatrollerStrategy {
    n: usize,
    probs: Vec<f64>,
}

impl PatrollerStrategy {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(PatrolError::InvalidDistribution("no states".into()));
        }
        let mut probs = Vec::with_capacity(n * n);
        for (s, row) in rows.into_iter().enumerate() {
            if row.len() != n {
                return Err(PatrolError::LengthMismatch {
                    expected: n,
                    got: row.len(),
                });
            }
            check_distribution(&row)
                .map_err(|e| PatrolError::InvalidDistribution(format!("state {}: {e}", s + 1)))?;
            probs.extend(row);
        }
        Ok(PatrollerStrategy { n, probs })
    }

    pub fn uniform(n: usize) -> Self {
        PatrollerStrategy {
            n,
            probs: vec![1.0 / n as f64; n * n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn row(&self, s: usize) -> &[f64] {
        &self.probs[s * self.n..(s + 1) * self.n]
    }

    #[inline]
    pub fn prob(&self, s: usize, b: usize) -> f64 {
        self.probs[s * self.n + b]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.n).map(|s| self.row(s).to_vec()).collect()
    }
}

impl TryFrom<Vec<Vec<f64>>> for PatrollerStrategy {
    type Error = PatrolError;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        PatrollerStrategy::new(rows)
    }
}

impl From<PatrollerStrategy> for Vec<Vec<f64>> {
    fn from(p: PatrollerStrategy) -> Self {
        p.rows()
    }
}

/// Checks nonnegativity and unit sum within [`SUM_TOLERANCE`].
pub fn check_distribution(p: &[f64]) -> std::result::Result<(), String> {
    if let Some((i, &x)) = p
        .iter()
        .enumerate()
        .find(|&(_, &x)| !(x.is_finite() && (0.0..=1.0).contains(&x)))
    {
        return Err(format!("entry {} = {x} is not a probability", i + 1));
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > SUM_TOLERANCE {
        return Err(format!("entries sum to {sum}"));
    }
    Ok(())
}

/// A finite-support distribution over quantities in [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(f64, f64)>", into = "Vec<(f64, f64)>")]
pub struct QuantityLottery(Vec<(f64, f64)>);

impl QuantityLottery {
    /// Builds a lottery from `(quantity, probability)` pairs.
    pub fn new(atoms: Vec<(f64, f64)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(PatrolError::InvalidDistribution("empty support".into()));
        }
        for &(q, _) in &atoms {
            check_unit("quantity", q)?;
        }
        let probs: Vec<f64> = atoms.iter().map(|&(_, p)| p).collect();
        check_distribution(&probs).map_err(PatrolError::InvalidDistribution)?;
        Ok(QuantityLottery(atoms))
    }

    pub fn deterministic(q: f64) -> Self {
        QuantityLottery(vec![(q, 1.0)])
    }

    /// Sends 1 with probability `p`, otherwise 0. Zero-probability atoms are dropped.
    pub fn bernoulli(p: f64) -> Self {
        if p <= 0.0 {
            QuantityLottery(vec![(0.0, 1.0)])
        } else if p >= 1.0 {
            QuantityLottery(vec![(1.0, 1.0)])
        } else {
            QuantityLottery(vec![(0.0, 1.0 - p), (1.0, p)])
        }
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.0
    }

    pub fn expected_quantity(&self) -> f64 {
        self.0.iter().map(|&(q, p)| q * p).sum()
    }

    pub fn expected_cost(&self, cost: &CostFunction) -> f64 {
        self.0.iter().map(|&(q, p)| cost.at(q) * p).sum()
    }
}

impl TryFrom<Vec<(f64, f64)>> for QuantityLottery {
    type Error = PatrolError;

    fn try_from(atoms: Vec<(f64, f64)>) -> Result<Self> {
        QuantityLottery::new(atoms)
    }
}

impl From<QuantityLottery> for Vec<(f64, f64)> {
    fn from(l: QuantityLottery) -> Self {
        l.0
    }
}

/// Stationary smuggler strategy: independent per-location lotteries for
/// every state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(
    try_from = "Vec<Vec<QuantityLottery>>",
    into = "Vec<Vec<QuantityLottery>>"
)]
pub struct SmugglerStrategy {
    n: usize,
    lotteries: Vec<QuantityLottery>,
}

impl SmugglerStrategy {
    pub fn new(rows: Vec<Vec<QuantityLottery>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(PatrolError::InvalidDistribution("no states".into()));
        }
        let mut lotteries = Vec::with_capacity(n * n);
        for row in rows {
            if row.len() != n {
                return Err(PatrolError::LengthMismatch {
                    expected: n,
                    got: row.len(),
                });
            }
            lotteries.extend(row);
        }
        Ok(SmugglerStrategy { n, lotteries })
    }

    /// Every smuggler sends a fixed quantity, independent of the state.
    pub fn constant(n: usize, q: f64) -> Self {
        SmugglerStrategy {
            n,
            lotteries: vec![QuantityLottery::deterministic(q); n * n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn lottery(&self, s: usize, i: usize) -> &QuantityLottery {
        &self.lotteries[s * self.n + i]
    }

    pub fn row(&self, s: usize) -> &[QuantityLottery] {
        &self.lotteries[s * self.n..(s + 1) * self.n]
    }

    /// Expected quantity sent to each location in state `s`.
    pub fn expected_quantities(&self, s: usize) -> Vec<f64> {
        self.row(s).iter().map(|l| l.expected_quantity()).collect()
    }

    pub fn rows(&self) -> Vec<Vec<QuantityLottery>> {
        (0..self.n).map(|s| self.row(s).to_vec()).collect()
    }
}

impl TryFrom<Vec<Vec<QuantityLottery>>> for SmugglerStrategy {
    type Error = PatrolError;

    fn try_from(rows: Vec<Vec<QuantityLottery>>) -> Result<Self> {
        SmugglerStrategy::new(rows)
    }
}

impl From<SmugglerStrategy> for Vec<Vec<QuantityLottery>> {
    fn from(x: SmugglerStrategy) -> Self {
        x.rows()
    }
}

/// Patroller state values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ValueFunction(pub Vec<f64>);

impl ValueFunction {
    pub fn zeros(n: usize) -> Self {
        ValueFunction(vec![0.0; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn mean(&self) -> f64 {
        self.0.iter().sum::<f64>() / self.0.len() as f64
    }

    /// Values of the smugglers in the zero-sum game.
    pub fn negated(&self) -> ValueFunction {
        ValueFunction(self.0.iter().map(|v| -v).collect())
    }

    pub fn sup_distance(&self, other: &ValueFunction) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Checks finiteness and the crude bound `(sum r + C(1) + max m) / (1 - gamma)`.
    pub fn check_bounds(&self, inst: &GameInstance) -> Result<()> {
        if self.len() != inst.n() {
            return Err(PatrolError::LengthMismatch {
                expected: inst.n(),
                got: self.len(),
            });
        }
        let bound = inst.reward_bound() / (1.0 - inst.gamma());
        for (s, &v) in self.0.iter().enumerate() {
            if !v.is_finite() || v.abs() > bound * (1.0 + 1e-12) {
                return Err(PatrolError::InvalidDistribution(format!(
                    "value of state {} = {v} violates bound {bound}",
                    s + 1
                )));
            }
        }
        Ok(())
    }
}

impl std::ops::Index<usize> for ValueFunction {
    type Output = f64;

    fn index(&self, s: usize) -> &f64 {
        &self.0[s]
    }
}
