//! Implicit-path representation, the guiding vector field, and the heading
//! reference controller that aligns a constant-speed unicycle with the field.
//!
//! A path is the zero-level set of a twice continuously differentiable
//! implicit function `phi`. Level sets of `phi` double as the path error:
//! `e(p) = phi(p)`. The field `tau(p) - k_e * e(p) * n(p)` points along the
//! local level set and bends toward the path, where `n = grad phi` and
//! `tau = E n`.

use thiserror::Error;

use crate::geometry::{rotate_e, wrap_radians, Vec2};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PathError {
    #[error("path axes must be strictly positive, got ({0}, {1})")]
    NonPositiveAxes(f64, f64),
    #[error("level {level} is below the minimum {min} representable for this path")]
    LevelOutOfRange { level: f64, min: f64 },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FieldError {
    #[error("gradient of the path function vanishes at ({0}, {1})")]
    DegenerateGradient(f64, f64),
    #[error("guiding field vanishes at ({0}, {1})")]
    DegenerateField(f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathKind {
    Circle,
    Ellipse,
}

/// Convex planar path given as the zero-level set of an implicit function.
///
/// Circle: `phi(p) = |p - c|^2 - R^2`. Ellipse: `phi(p) = ((x - c_x)/a)^2 +
/// ((y - c_y)/b)^2 - 1`. Both are twice differentiable with a nonvanishing
/// gradient everywhere except the center.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImplicitPath {
    kind: PathKind,
    center: Vec2,
    a: f64,
    b: f64,
}

impl ImplicitPath {
    pub fn circle(center: Vec2, radius: f64) -> Result<Self, PathError> {
        if radius <= 0.0 {
            return Err(PathError::NonPositiveAxes(radius, radius));
        }
        Ok(ImplicitPath {
            kind: PathKind::Circle,
            center,
            a: radius,
            b: radius,
        })
    }

    pub fn ellipse(center: Vec2, a: f64, b: f64) -> Result<Self, PathError> {
        if a <= 0.0 || b <= 0.0 {
            return Err(PathError::NonPositiveAxes(a, b));
        }
        Ok(ImplicitPath {
            kind: PathKind::Ellipse,
            center,
            a,
            b,
        })
    }

    pub fn kind(&self) -> PathKind {
        self.kind
    }

    pub fn center(&self) -> Vec2 {
        self.center
    }

    pub fn semi_axes(&self) -> (f64, f64) {
        (self.a, self.b)
    }

    /// Path error `e(p) = phi(p)`; zero exactly on the path.
    pub fn error(&self, p: Vec2) -> f64 {
        let d = p - self.center;
        match self.kind {
            PathKind::Circle => d.norm_squared() - self.a * self.a,
            PathKind::Ellipse => {
                let ex = d.x / self.a;
                let ey = d.y / self.b;
                ex * ex + ey * ey - 1.0
            }
        }
    }

    /// Gradient `n(p)` of the path function. Vanishes only at the center.
    pub fn normal(&self, p: Vec2) -> Result<Vec2, FieldError> {
        let d = p - self.center;
        if d == Vec2::ZERO {
            return Err(FieldError::DegenerateGradient(p.x, p.y));
        }
        Ok(match self.kind {
            PathKind::Circle => d * 2.0,
            PathKind::Ellipse => Vec2::new(2.0 * d.x / (self.a * self.a), 2.0 * d.y / (self.b * self.b)),
        })
    }

    /// Tangent `tau(p) = E n(p)`; traces level sets clockwise.
    pub fn tangent(&self, p: Vec2) -> Result<Vec2, FieldError> {
        Ok(rotate_e(self.normal(p)?))
    }

    /// Hessian of the path function. Diagonal and constant for both shapes,
    /// returned as `(h_xx, h_yy)`.
    pub fn hessian(&self) -> (f64, f64) {
        match self.kind {
            PathKind::Circle => (2.0, 2.0),
            PathKind::Ellipse => (2.0 / (self.a * self.a), 2.0 / (self.b * self.b)),
        }
    }

    /// Magnitude of `phi` values that counts as "one path unit": the squared
    /// radius for circles and 1 for the normalized ellipse form. Error
    /// tolerances are expressed as fractions of this scale.
    pub fn error_scale(&self) -> f64 {
        match self.kind {
            PathKind::Circle => self.a * self.a,
            PathKind::Ellipse => 1.0,
        }
    }

    /// Point on the level set `phi = level` at parameter angle `alpha`.
    pub fn point_on_level(&self, alpha: f64, level: f64) -> Result<Vec2, PathError> {
        let min = -self.error_scale();
        if level <= min {
            return Err(PathError::LevelOutOfRange { level, min });
        }
        let scale = match self.kind {
            PathKind::Circle => (self.a * self.a + level).sqrt() / self.a,
            PathKind::Ellipse => (1.0 + level).sqrt(),
        };
        Ok(self.center + Vec2::new(self.a * alpha.cos(), self.b * alpha.sin()) * scale)
    }

    /// Polar angle of `p` about the path center. Strictly decreasing along
    /// clockwise orbits.
    pub fn polar_angle(&self, p: Vec2) -> f64 {
        (p - self.center).angle()
    }
}

/// Gains of the guiding vector field and its heading controller.
///
/// `k_e` tunes how aggressively the field bends toward the path; `k_d` tunes
/// how aggressively the heading controller aligns with the field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldGains {
    pub k_e: f64,
    pub k_d: f64,
}

/// Orbit direction of a swarm around its path.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrbitDirection {
    Clockwise,
    CounterClockwise,
}

impl OrbitDirection {
    /// Sign of the tangential term: +1 for clockwise (`tau = E n`), -1 for
    /// the mirrored field.
    pub fn sign(self) -> f64 {
        match self {
            OrbitDirection::Clockwise => 1.0,
            OrbitDirection::CounterClockwise => -1.0,
        }
    }
}

/// Guiding vector field `tau(p) - k_e e(p) n(p)` for clockwise orbits.
pub fn gvf(path: &ImplicitPath, gains: &FieldGains, p: Vec2) -> Result<Vec2, FieldError> {
    gvf_directed(path, gains, OrbitDirection::Clockwise, p)
}

/// Guiding vector field with a chosen orbit direction. The tangential term
/// flips for counter-clockwise swarms; the convergence term does not.
pub fn gvf_directed(
    path: &ImplicitPath,
    gains: &FieldGains,
    direction: OrbitDirection,
    p: Vec2,
) -> Result<Vec2, FieldError> {
    let n = path.normal(p)?;
    let e = path.error(p);
    let field = rotate_e(n) * direction.sign() - n * (gains.k_e * e);
    // tau and n are orthogonal, so the field can only vanish with n itself;
    // guarded anyway for off-nominal inputs.
    if field.norm() < 1e-9 {
        return Err(FieldError::DegenerateField(p.x, p.y));
    }
    Ok(field)
}

/// Feedforward and alignment error of the heading controller.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeadingTerms {
    /// Rotation rate of the field direction along the robot's velocity.
    pub feedforward: f64,
    /// Wrapped angle from the field direction to the robot heading.
    pub alignment_error: f64,
}

/// Computes the two terms of the heading reference `w = feedforward - k_d *
/// alignment_error`.
///
/// The feedforward is the exact rotation rate of the normalized field
/// `m = F/|F|` along the robot's actual velocity: `m . E dm`, with
/// `dm = (I - m m^T) J(p) v / |F|` and `J` the analytic field Jacobian
/// `sign * E H - k_e (n n^T + e H)`.
pub fn heading_terms(
    path: &ImplicitPath,
    gains: &FieldGains,
    direction: OrbitDirection,
    position: Vec2,
    heading: f64,
    speed: f64,
) -> Result<HeadingTerms, FieldError> {
    let field = gvf_directed(path, gains, direction, position)?;
    let field_norm = field.norm();
    let m = field * (1.0 / field_norm);

    let n = path.normal(position)?;
    let e = path.error(position);
    let (hxx, hyy) = path.hessian();
    let s = direction.sign();
    let k_e = gains.k_e;

    // J = s * E H - k_e (n n^T + e H), with H diagonal.
    let j00 = -k_e * (n.x * n.x + e * hxx);
    let j01 = s * hyy - k_e * n.x * n.y;
    let j10 = -s * hxx - k_e * n.x * n.y;
    let j11 = -k_e * (n.y * n.y + e * hyy);

    let velocity = Vec2::from_angle(heading) * speed;
    let w = Vec2::new(
        j00 * velocity.x + j01 * velocity.y,
        j10 * velocity.x + j11 * velocity.y,
    );
    let dm = (w - m * m.dot(w)) * (1.0 / field_norm);
    let feedforward = m.dot(rotate_e(dm));
    let alignment_error = wrap_radians(heading - m.angle());

    Ok(HeadingTerms {
        feedforward,
        alignment_error,
    })
}

/// Heading rate that aligns the robot's velocity with the guiding field.
pub fn heading_ref(
    path: &ImplicitPath,
    gains: &FieldGains,
    direction: OrbitDirection,
    position: Vec2,
    heading: f64,
    speed: f64,
) -> Result<f64, FieldError> {
    let terms = heading_terms(path, gains, direction, position, heading, speed)?;
    Ok(terms.feedforward - gains.k_d * terms.alignment_error)
}
