//! Collision-cone barrier function for robot pairs.
//!
//! For an ordered pair `(i, j)` with relative position `p_ij = p_j - p_i`
//! and relative velocity `v_ij = v_j - v_i`, the barrier value is
//!
//! ```text
//! h = p_ij . v_ij + |p_ij| |v_ij| cos(phi)
//! ```
//!
//! where `cos(phi) = sqrt(|p_ij|^2 - rho^2) / |p_ij|` and `rho` is a
//! distance-dependent virtual radius that widens the cone at range and
//! collapses to the true collision radius `r` up close. `h >= 0` means the
//! relative velocity points outside the cone of headings that lead to a
//! near-pass within `rho`.
//!
//! The time derivative splits into a drift term and one input channel per
//! robot:
//!
//! ```text
//! dh/dt = Lf_h + Lg_h_i * u_i + Lg_h_j * u_j
//! Lf_h   = |v_ij|^2 + |v_ij| (p_ij . v_ij - rho rho') d|p_ij|/dt-factor / sqrt(|p_ij|^2 - rho^2)
//! Lg_h_j = |p_ij| (p_hat + v_hat cos(phi)) . (-E v_j)
//! Lg_h_i = |p_ij| (p_hat + v_hat cos(phi)) . ( E v_i)
//! ```
//!
//! The virtual-radius rate enters the drift only: `rho` depends on state
//! through `|p_ij|` alone.

use thiserror::Error;

use crate::geometry::{rotate_e, ClassKFn, Vec2};

/// Relative speeds at or below this are treated as a non-closing pair: the
/// cone term of `h` is continuous there but the unit vector in the Lie terms
/// is not.
pub const VELOCITY_EPS: f64 = 1e-9;

/// Input-channel gains at or below this magnitude cannot be divided by when
/// solving for a correction.
pub const SINGULARITY_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SafetyError {
    #[error("virtual radius requires a positive distance, got {0}")]
    NonPositiveDistance(f64),
    #[error("correction is singular: psi = {psi}, lg_h_i = {lg_h_i}")]
    Singularity { psi: f64, lg_h_i: f64 },
}

/// Collision radius, virtual-radius exponent, enforcement gain, and the
/// steering-rate bound defining the admissible input set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SafetyConfig {
    /// True collision radius in world units.
    pub r: f64,
    /// Virtual-radius exponent in `[0, 1)`. Higher values keep the cone wide
    /// farther out, starting evasions earlier.
    pub d_exp: f64,
    /// Gain function applied to `h` in the safety condition.
    pub kappa: ClassKFn,
    /// Admissible steering rates are `[-omega_max, omega_max]`.
    pub omega_max: f64,
}

impl SafetyConfig {
    /// Virtual radius `rho(dist) = dist^d * r^(1-d)`.
    ///
    /// Increasing and continuous with `rho(r) = r`; strictly below `dist`
    /// whenever `dist > r`.
    pub fn virtual_radius(&self, dist: f64) -> Result<f64, SafetyError> {
        if dist <= 0.0 {
            return Err(SafetyError::NonPositiveDistance(dist));
        }
        Ok(dist.powf(self.d_exp) * self.r.powf(1.0 - self.d_exp))
    }

    /// Derivative of the virtual radius in the distance: `d * rho / dist`.
    pub fn virtual_radius_slope(&self, dist: f64, rho: f64) -> f64 {
        self.d_exp * rho / dist
    }
}

/// Half-cone cosine `sqrt(dist^2 - rho^2) / dist`, clamped to zero when the
/// cone is undefined (`dist <= rho`).
pub fn cone_cosine(dist: f64, rho: f64) -> f64 {
    if dist <= rho {
        0.0
    } else {
        ((dist - rho) * (dist + rho)).sqrt() / dist
    }
}

/// Barrier value for explicit geometry; `cos_phi` as from [`cone_cosine`].
pub fn cone_value(p_ij: Vec2, v_ij: Vec2, cos_phi: f64) -> f64 {
    p_ij.dot(v_ij) + p_ij.norm() * v_ij.norm() * cos_phi
}

/// Snapshot of one ordered robot pair with the barrier value and its
/// derivative decomposition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairView {
    /// Relative position `p_j - p_i`.
    pub p_ij: Vec2,
    /// Relative velocity `v_j - v_i`.
    pub v_ij: Vec2,
    /// Absolute velocity of robot `i`.
    pub v_i: Vec2,
    /// Absolute velocity of robot `j`.
    pub v_j: Vec2,
    /// `|p_ij|`.
    pub dist: f64,
    /// Virtual radius at this distance.
    pub rho: f64,
    /// Half-cone cosine in `[0, 1)`.
    pub cos_phi: f64,
    /// Barrier value.
    pub h: f64,
    /// Drift component of `dh/dt`, including the virtual-radius rate.
    pub lf_h: f64,
    /// Coefficient of robot `i`'s steering rate in `dh/dt`.
    pub lg_h_i: f64,
    /// Coefficient of robot `j`'s steering rate in `dh/dt`.
    pub lg_h_j: f64,
    /// Distance is at or below the true collision radius.
    pub collided: bool,
    /// Distance is inside the virtual zone but above the collision radius.
    /// Unreachable for the `dist^d r^(1-d)` radius family; kept so the
    /// condition is distinguishable from a true collision if it ever fires.
    pub inside_virtual_zone: bool,
    /// Relative speed below [`VELOCITY_EPS`]; Lie terms use a zero unit
    /// vector for the relative velocity.
    pub degenerate_velocity: bool,
}

/// Builds the pair view from absolute positions and velocities.
///
/// Total: degenerate geometry (overlap, collision, vanishing relative
/// velocity) is reported through flags with the cone clamped wide open
/// (`cos_phi = 0`) rather than by failing, so monitors can record the event
/// while the simulation continues.
pub fn build_pair_view(cfg: &SafetyConfig, p_i: Vec2, v_i: Vec2, p_j: Vec2, v_j: Vec2) -> PairView {
    let p_ij = p_j - p_i;
    let v_ij = v_j - v_i;
    let dist = p_ij.norm();
    let rel_speed = v_ij.norm();
    let degenerate_velocity = rel_speed < VELOCITY_EPS;

    if dist <= f64::EPSILON {
        // Full overlap: no usable cone geometry at all.
        return PairView {
            p_ij,
            v_ij,
            v_i,
            v_j,
            dist,
            rho: cfg.r,
            cos_phi: 0.0,
            h: p_ij.dot(v_ij),
            lf_h: rel_speed * rel_speed,
            lg_h_i: 0.0,
            lg_h_j: 0.0,
            collided: true,
            inside_virtual_zone: false,
            degenerate_velocity,
        };
    }

    let rho = dist.powf(cfg.d_exp) * cfg.r.powf(1.0 - cfg.d_exp);
    let collided = dist <= cfg.r;
    let inside_virtual_zone = !collided && dist < rho;
    let cone_open = collided || inside_virtual_zone;
    let cos_phi = if cone_open { 0.0 } else { cone_cosine(dist, rho) };

    let p_hat = p_ij * (1.0 / dist);
    let v_hat = v_ij.unit_or_zero(VELOCITY_EPS);

    let cone_term = if degenerate_velocity {
        0.0
    } else {
        dist * rel_speed * cos_phi
    };
    let h = p_ij.dot(v_ij) + cone_term;

    // Shared factor of both input channels.
    let shared = p_hat + v_hat * cos_phi;
    let lg_h_i = dist * shared.dot(rotate_e(v_i));
    let lg_h_j = -dist * shared.dot(rotate_e(v_j));

    let lf_h = if cone_open {
        // Cone frozen at its widest: only the closing-speed term remains.
        rel_speed * rel_speed
    } else {
        let root = ((dist - rho) * (dist + rho)).sqrt();
        let rho_slope = cfg.d_exp * rho / dist;
        let rho_rate = rho * rho_slope * p_hat.dot(v_ij);
        rel_speed * rel_speed + rel_speed * (p_ij.dot(v_ij) - rho_rate) / root
    };

    PairView {
        p_ij,
        v_ij,
        v_i,
        v_j,
        dist,
        rho,
        cos_phi,
        h,
        lf_h,
        lg_h_i,
        lg_h_j,
        collided,
        inside_virtual_zone,
        degenerate_velocity,
    }
}

/// Barrier rate `Lf_h + Lg_h_i u_i + Lg_h_j u_j`.
pub fn h_dot(view: &PairView, u_i: f64, u_j: f64) -> f64 {
    view.lf_h + view.lg_h_i * u_i + view.lg_h_j * u_j
}

/// Safety residual `dh/dt(u_ref_i, u_j) + kappa(h)`. Negative values demand
/// a corrective steering supplement.
pub fn psi(view: &PairView, cfg: &SafetyConfig, u_ref_i: f64, u_j: f64) -> f64 {
    h_dot(view, u_ref_i, u_j) + cfg.kappa.eval(view.h)
}

/// Minimal steering supplement restoring `dh/dt + kappa(h) >= 0` through
/// robot `i`'s channel alone: zero when the residual is already
/// non-negative, `-psi / lg_h_i` otherwise.
pub fn u_safe_pair(
    view: &PairView,
    cfg: &SafetyConfig,
    u_ref_i: f64,
    u_j: f64,
) -> Result<f64, SafetyError> {
    let residual = psi(view, cfg, u_ref_i, u_j);
    if residual >= 0.0 {
        Ok(0.0)
    } else if view.lg_h_i.abs() <= SINGULARITY_EPS {
        Err(SafetyError::Singularity {
            psi: residual,
            lg_h_i: view.lg_h_i,
        })
    } else {
        Ok(-residual / view.lg_h_i)
    }
}
