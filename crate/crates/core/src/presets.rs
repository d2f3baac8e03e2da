//! The three benchmark instances.

use std::fmt;
use std::str::FromStr;

use crate::error::{invalid, Result};
use crate::game::{CostFunction, GameInstance, MovementKind};

pub const DISCOUNT: f64 = 0.9;

/// Unit rewards, squared line distances, linear cost `4a`.
pub fn example1(n: usize) -> Result<GameInstance> {
    GameInstance::with_layout(
        vec![1.0; n],
        MovementKind::LinearSquared,
        CostFunction::linear(4.0)?,
        DISCOUNT,
    )
}

/// [`example1`] with the quadratic cost `4a^2`.
pub fn example2(n: usize) -> Result<GameInstance> {
    GameInstance::with_layout(
        vec![1.0; n],
        MovementKind::LinearSquared,
        CostFunction::power(4.0, 2.0)?,
        DISCOUNT,
    )
}

/// Six locations on a ring with rewards (3, 2, 1, 1, 2, 3).
pub fn example3() -> Result<GameInstance> {
    GameInstance::with_layout(
        vec![3.0, 2.0, 1.0, 1.0, 2.0, 3.0],
        MovementKind::PerimeterSquared,
        CostFunction::linear(4.0)?,
        DISCOUNT,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Example1,
    Example2,
    Example3,
}

impl Preset {
    pub const ALL: [Preset; 3] = [Preset::Example1, Preset::Example2, Preset::Example3];

    /// Builds the instance; `n` is ignored by the fixed-size Example 3.
    pub fn instance(self, n: usize) -> Result<GameInstance> {
        match self {
            Preset::Example1 => example1(n),
            Preset::Example2 => example2(n),
            Preset::Example3 => example3(),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Preset::Example1 => "example1",
            Preset::Example2 => "example2",
            Preset::Example3 => "example3",
        }
    }
}

impl FromStr for Preset {
    type Err = crate::error::PatrolError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "example1" => Ok(Preset::Example1),
            "example2" => Ok(Preset::Example2),
            "example3" => Ok(Preset::Example3),
            other => Err(invalid("example", format!("unknown preset {other:?}"))),
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}
