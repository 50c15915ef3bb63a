//! The model block `N = [-π/2, π/2]² × S¹` and its flipped pair of vector fields.
//!
//! The field is
//!
//! ```text
//! ẋ = 0
//! ẏ = cos²(x) + sin²(y)·sin²(x)
//! ż = ± λ·sin(x)·cos(y)
//! ```
//!
//! with the sign selecting `X⁺` or `X⁻`. Orbits enter through `y = -π/2`, leave
//! through `y = +π/2` and the two faces `x = ±π/2` are invariant, each carrying
//! one closed orbit at `y = 0`.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Half-width of the square base of the block.
pub const HALF_PI: f64 = FRAC_PI_2;

/// Default shear parameter used by the CLI and the examples.
pub const DEFAULT_LAMBDA: f64 = 10.0;

/// Smallest λ for which the library makes hyperbolicity claims.
pub const MIN_HYPERBOLIC_LAMBDA: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BlockError {
    #[error("point ({x}, {y}) lies outside the block")]
    OutOfBlock { x: f64, y: f64 },
    #[error("shear parameter must be positive and finite, got {0}")]
    InvalidLambda(f64),
}

/// Choice between `X⁺` and `X⁻`. Serialized as `1` / `-1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "i64", into = "i64")]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn from_int(v: i64) -> Option<Sign> {
        match v {
            1 => Some(Sign::Plus),
            -1 => Some(Sign::Minus),
            _ => None,
        }
    }

    pub fn as_int(self) -> i64 {
        match self {
            Sign::Plus => 1,
            Sign::Minus => -1,
        }
    }

    pub fn as_f64(self) -> f64 {
        self.as_int() as f64
    }

    pub fn negate(self) -> Sign {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }

    pub fn times(self, other: Sign) -> Sign {
        if self == other {
            Sign::Plus
        } else {
            Sign::Minus
        }
    }
}

impl From<Sign> for i64 {
    fn from(s: Sign) -> i64 {
        s.as_int()
    }
}

impl TryFrom<i64> for Sign {
    type Error = String;
    fn try_from(v: i64) -> Result<Sign, String> {
        Sign::from_int(v).ok_or_else(|| format!("sign must be 1 or -1, got {v}"))
    }
}

impl std::ops::Neg for Sign {
    type Output = Sign;
    fn neg(self) -> Sign {
        self.negate()
    }
}

impl std::ops::Mul for Sign {
    type Output = Sign;
    fn mul(self, rhs: Sign) -> Sign {
        self.times(rhs)
    }
}

/// One of the two vector fields `X±` with its shear parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockField {
    sign: Sign,
    lambda: f64,
}

impl BlockField {
    pub fn new(sign: Sign, lambda: f64) -> Result<Self, BlockError> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(BlockError::InvalidLambda(lambda));
        }
        Ok(BlockField { sign, lambda })
    }

    pub fn sign(&self) -> Sign {
        self.sign
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Whether λ is large enough for the library's hyperbolicity statements.
    pub fn is_hyperbolic_regime(&self) -> bool {
        self.lambda >= MIN_HYPERBOLIC_LAMBDA
    }

    /// `X⁺ ↔ X⁻`, keeping λ.
    pub fn flip(&self) -> BlockField {
        BlockField { sign: self.sign.negate(), lambda: self.lambda }
    }

    /// Field value at `p`. Fails only if `p` is outside the block.
    pub fn field_value(&self, p: &BlockPoint) -> Result<Velocity, BlockError> {
        BlockPoint::new(p.x, p.y, p.z)?;
        Ok(self.velocity_unchecked(p.x, p.y))
    }

    /// The field formula without range checks; the field does not depend on `z`.
    #[inline]
    pub fn velocity_unchecked(&self, x: f64, y: f64) -> Velocity {
        let (sx, cx) = x.sin_cos();
        let (sy, cy) = y.sin_cos();
        Velocity { dx: 0.0, dy: cx * cx + sy * sy * sx * sx, dz: self.sign.as_f64() * self.lambda * sx * cy }
    }

    /// The two closed orbits with their z-directions read off the field.
    pub fn closed_orbits(&self) -> [ClosedOrbit; 2] {
        let dir = |x: f64| {
            if self.velocity_unchecked(x, 0.0).dz > 0.0 {
                Sign::Plus
            } else {
                Sign::Minus
            }
        };
        [
            ClosedOrbit { which: OrbitEnd::Alpha1, x: -HALF_PI, direction: dir(-HALF_PI) },
            ClosedOrbit { which: OrbitEnd::Alpha2, x: HALF_PI, direction: dir(HALF_PI) },
        ]
    }
}

/// Anything that can be sampled like a block field. Used by the property
/// checklist so that corrupted fields can serve as negative controls.
pub trait BlockVectorField {
    fn velocity(&self, x: f64, y: f64, z: f64) -> Velocity;
}

impl BlockVectorField for BlockField {
    fn velocity(&self, x: f64, y: f64, _z: f64) -> Velocity {
        self.velocity_unchecked(x, y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Velocity {
    pub dx: f64,
    pub dy: f64,
    pub dz: f64,
}

/// A point of the block, `z` kept in `[0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockPoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

/// Slack allowed when testing coordinates against `±π/2`.
const RANGE_SLACK: f64 = 1e-12;

impl BlockPoint {
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self, BlockError> {
        let inside = |c: f64| c.is_finite() && c.abs() <= HALF_PI + RANGE_SLACK;
        if !(inside(x) && inside(y) && z.is_finite()) {
            return Err(BlockError::OutOfBlock { x, y });
        }
        Ok(BlockPoint { x: x.clamp(-HALF_PI, HALF_PI), y: y.clamp(-HALF_PI, HALF_PI), z: wrap_unit(z) })
    }
}

/// Reduce to `[0, 1)`.
pub fn wrap_unit(z: f64) -> f64 {
    let w = z.rem_euclid(1.0);
    // rem_euclid can round up to exactly 1.0 for tiny negative inputs
    if w >= 1.0 {
        0.0
    } else {
        w
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FaceLabel {
    Incoming,
    Outgoing,
    TangentLeft,
    TangentRight,
    Interior,
}

/// Face containing `p`, within `tol`. Edges of the block belong to the
/// tangent faces.
pub fn classify_face(p: &BlockPoint, tol: f64) -> FaceLabel {
    let tol = tol.max(0.0);
    if (p.x + HALF_PI).abs() <= tol {
        FaceLabel::TangentLeft
    } else if (p.x - HALF_PI).abs() <= tol {
        FaceLabel::TangentRight
    } else if (p.y + HALF_PI).abs() <= tol {
        FaceLabel::Incoming
    } else if (p.y - HALF_PI).abs() <= tol {
        FaceLabel::Outgoing
    } else {
        FaceLabel::Interior
    }
}

/// `α₁` sits on `x = -π/2`, `α₂` on `x = +π/2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OrbitEnd {
    Alpha1,
    Alpha2,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClosedOrbit {
    pub which: OrbitEnd,
    pub x: f64,
    pub direction: Sign,
}
