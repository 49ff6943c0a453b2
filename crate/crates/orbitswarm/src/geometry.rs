//! Planar vector algebra, the quarter-turn rotation `E`, canonical angle
//! wrapping, and class-K gain functions shared by every other module.

use std::f64::consts::PI;
use std::ops::{Add, Mul, Neg, Sub};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("angle must be finite, got {0}")]
    NonFiniteAngle(f64),
    #[error("cannot normalize a zero-length vector")]
    ZeroVector,
}

/// Planar vector in world units.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn norm_squared(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.norm_squared().sqrt()
    }

    /// Unit vector in the same direction; `None` for the zero vector.
    pub fn try_normalize(self) -> Option<Vec2> {
        let n = self.norm();
        if n > 0.0 {
            Some(self * (1.0 / n))
        } else {
            None
        }
    }

    /// Unit vector, or the zero vector when the norm is at or below `eps`.
    pub fn unit_or_zero(self, eps: f64) -> Vec2 {
        let n = self.norm();
        if n > eps {
            self * (1.0 / n)
        } else {
            Vec2::ZERO
        }
    }

    /// Direction angle `atan2(y, x)` in radians.
    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }

    pub fn from_angle(theta: f64) -> Vec2 {
        Vec2::new(theta.cos(), theta.sin())
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, k: f64) -> Vec2 {
        Vec2::new(self.x * k, self.y * k)
    }
}

/// Rotation by -pi/2, i.e. the matrix [[0, 1], [-1, 0]].
///
/// Maps (x, y) to (y, -x). Applying it twice negates the vector. With this
/// sign convention the level-set tangent `E n` traces convex level sets
/// clockwise, which is the orbit direction the coordination rule assumes.
pub fn rotate_e(v: Vec2) -> Vec2 {
    Vec2::new(v.y, -v.x)
}

/// Canonical representative of an angle in `(-pi, pi]`.
///
/// Total for finite input. Values already in range are returned bit-exactly,
/// which makes the function idempotent.
pub fn wrap_radians(theta: f64) -> f64 {
    if theta > -PI && theta <= PI {
        theta
    } else {
        PI - (PI - theta).rem_euclid(2.0 * PI)
    }
}

/// Heading angle canonicalized to `(-pi, pi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Angle(f64);

impl Angle {
    /// Wraps `theta` into `(-pi, pi]`. Non-finite input is a domain error.
    pub fn wrap(theta: f64) -> Result<Angle, GeometryError> {
        if !theta.is_finite() {
            return Err(GeometryError::NonFiniteAngle(theta));
        }
        Ok(Angle(wrap_radians(theta)))
    }

    pub fn radians(self) -> f64 {
        self.0
    }

    pub fn unit_vector(self) -> Vec2 {
        Vec2::from_angle(self.0)
    }
}

/// Wraps an angle into the canonical interval `(-pi, pi]`.
pub fn wrap_angle(theta: f64) -> Result<Angle, GeometryError> {
    Angle::wrap(theta)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClassKForm {
    /// `gamma * h^3`. Odd, so it keeps the sign of `h` for negative
    /// arguments, which trajectories can graze numerically.
    Cubic,
    /// `gamma * h`.
    Linear,
}

/// Strictly increasing gain function with `k(0) = 0`, used to modulate how
/// aggressively the safety condition is enforced.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassKFn {
    pub gamma: f64,
    pub form: ClassKForm,
}

impl ClassKFn {
    pub fn cubic(gamma: f64) -> Self {
        ClassKFn {
            gamma,
            form: ClassKForm::Cubic,
        }
    }

    pub fn linear(gamma: f64) -> Self {
        ClassKFn {
            gamma,
            form: ClassKForm::Linear,
        }
    }

    pub fn eval(&self, h: f64) -> f64 {
        match self.form {
            ClassKForm::Cubic => self.gamma * h * h * h,
            ClassKForm::Linear => self.gamma * h,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rotate_e_unit_axes() {
        assert_eq!(rotate_e(Vec2::new(1.0, 0.0)), Vec2::new(0.0, -1.0));
        assert_eq!(rotate_e(Vec2::new(0.0, 1.0)), Vec2::new(1.0, 0.0));
    }

    #[test]
    fn rotate_e_twice_negates() {
        let v = Vec2::new(3.0, 4.0);
        assert_eq!(rotate_e(rotate_e(v)), Vec2::new(-3.0, -4.0));
    }

    #[test]
    fn wrap_angle_basics() {
        assert_eq!(wrap_angle(0.0).unwrap().radians(), 0.0);
        assert!((wrap_angle(3.0 * PI).unwrap().radians() - PI).abs() < 1e-12);
        assert!((wrap_angle(-PI).unwrap().radians() - PI).abs() < 1e-12);
    }

    #[test]
    fn wrap_angle_rejects_non_finite() {
        assert!(wrap_angle(f64::NAN).is_err());
        assert!(wrap_angle(f64::INFINITY).is_err());
    }

    #[test]
    fn class_k_examples() {
        assert_eq!(ClassKFn::cubic(2.0).eval(0.0), 0.0);
        assert_eq!(ClassKFn::cubic(2.0).eval(1.0), 2.0);
        assert_eq!(ClassKFn::linear(0.5).eval(4.0), 2.0);
    }

    #[test]
    fn class_k_sign_follows_argument() {
        let k = ClassKFn::cubic(2.0);
        assert!(k.eval(-0.5) < 0.0);
        assert!(k.eval(0.5) > 0.0);
    }

    #[test]
    fn normalize_zero_is_none() {
        assert!(Vec2::ZERO.try_normalize().is_none());
        assert_eq!(Vec2::ZERO.unit_or_zero(1e-9), Vec2::ZERO);
    }

    proptest! {
        #[test]
        fn rotate_e_preserves_norm(x in -1e3f64..1e3, y in -1e3f64..1e3) {
            let v = Vec2::new(x, y);
            prop_assert!((rotate_e(v).norm() - v.norm()).abs() <= 1e-12 * (1.0 + v.norm()));
        }

        #[test]
        fn rotate_e_is_perpendicular(x in -1e3f64..1e3, y in -1e3f64..1e3) {
            let v = Vec2::new(x, y);
            prop_assert!(v.dot(rotate_e(v)).abs() <= 1e-12 * (1.0 + v.norm_squared()));
        }

        #[test]
        fn normalize_has_unit_norm(x in -1e3f64..1e3, y in -1e3f64..1e3) {
            let v = Vec2::new(x, y);
            prop_assume!(v.norm() > 1e-6);
            let u = v.try_normalize().unwrap();
            prop_assert!((u.norm() - 1.0).abs() <= 1e-12);
        }

        #[test]
        fn wrap_is_idempotent(theta in -50.0f64..50.0) {
            let once = wrap_radians(theta);
            prop_assert_eq!(wrap_radians(once), once);
            prop_assert!(once > -PI && once <= PI);
        }

        #[test]
        fn wrap_differs_by_two_pi_multiple(theta in -50.0f64..50.0) {
            let w = wrap_radians(theta);
            let k = (theta - w) / (2.0 * PI);
            prop_assert!((k - k.round()).abs() < 1e-9);
        }

        #[test]
        fn wrap_of_shifted_angle_matches(theta in -20.0f64..20.0) {
            let a = wrap_radians(theta);
            let b = wrap_radians(theta + 2.0 * PI);
            prop_assert!((a - b).abs() < 1e-12 || (a - b).abs() > 2.0 * PI - 1e-12);
        }

        #[test]
        fn class_k_strictly_increasing(h1 in -10.0f64..10.0, dh in 1e-6f64..5.0) {
            let k = ClassKFn::cubic(2.0);
            prop_assert!(k.eval(h1) < k.eval(h1 + dh));
            let l = ClassKFn::linear(0.5);
            prop_assert!(l.eval(h1) < l.eval(h1 + dh));
        }
    }
}
