//! Overtaking rule and per-robot control composition.
//!
//! Robot `i` is responsible for avoiding robot `j` exactly when the input
//! channel `Lg_h_i` of the pair barrier is positive and the safety residual
//! is negative. Positive channel gain means a positive (outward, for
//! clockwise orbits) steering supplement restores the safety condition, so
//! every evasion is an outside overtake and no robot is ever asked to turn
//! both ways at once. Each robot applies the largest of its per-pair
//! supplements.
//!
//! Counter-clockwise swarms run the mirror image of the rule internally:
//! membership flips to negative channel gains and the aggregate takes the
//! most negative supplement, which is outward in their orbit direction.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::geometry::{rotate_e, Vec2};
use crate::path::{heading_ref, FieldError, FieldGains, ImplicitPath, OrbitDirection};
use crate::safety::{build_pair_view, psi, PairView, SafetyConfig, SINGULARITY_EPS, VELOCITY_EPS};
use crate::sim::RobotState;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ControlError {
    #[error("robot {robot}: {source}")]
    Field { robot: u32, source: FieldError },
}

/// Stages of one overtake, advancing only forward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OvertakeStage {
    #[default]
    NonOvertaking,
    /// Rule active; the overtaker has not yet begun closing back in front.
    Stage1,
    /// Rule active and the overtaker's heading has crossed the obstacle's.
    Stage2,
}

impl OvertakeStage {
    pub fn as_u8(self) -> u8 {
        match self {
            OvertakeStage::NonOvertaking => 0,
            OvertakeStage::Stage1 => 1,
            OvertakeStage::Stage2 => 2,
        }
    }

    pub fn overtaking(self) -> bool {
        self != OvertakeStage::NonOvertaking
    }
}

/// How an avoiding swarm evaluates membership against obstacle robots.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObstacleVelocityMode {
    /// Use the obstacle's velocity as observed.
    Actual,
    /// Test membership as if the obstacle were stationary. The barrier and
    /// residual still use the observed velocity.
    Zero,
}

/// Relationship between two swarms from the viewpoint of the first.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SwarmPolicy {
    /// Same swarm: full overtaking rule with the neighbor's nominal input.
    Coordinate,
    /// Treat the other swarm's robots as fixed obstacles (their steering is
    /// taken as zero in the constraint).
    Avoid,
    /// Do not react to the other swarm at all.
    Ignore,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SwarmSpec {
    pub id: u32,
    pub direction: OrbitDirection,
    pub avoids: Vec<u32>,
    pub ignores: Vec<u32>,
}

/// Lookup table of swarm orbit directions and cross-swarm policies.
#[derive(Debug, Clone, PartialEq)]
pub struct SwarmTable {
    swarms: BTreeMap<u32, SwarmSpec>,
}

impl SwarmTable {
    pub fn new(specs: Vec<SwarmSpec>) -> Self {
        let swarms = specs.into_iter().map(|s| (s.id, s)).collect();
        SwarmTable { swarms }
    }

    pub fn get(&self, id: u32) -> Option<&SwarmSpec> {
        self.swarms.get(&id)
    }

    pub fn ids(&self) -> impl Iterator<Item = u32> + '_ {
        self.swarms.keys().copied()
    }

    pub fn direction(&self, id: u32) -> OrbitDirection {
        self.swarms
            .get(&id)
            .map(|s| s.direction)
            .unwrap_or(OrbitDirection::Clockwise)
    }

    /// Policy of swarm `mine` toward swarm `other`. Same swarm coordinates;
    /// explicitly listed swarms follow their listing; unlisted cross swarms
    /// are avoided by clockwise swarms and ignored by counter-clockwise
    /// ones (which are never avoiders).
    pub fn policy(&self, mine: u32, other: u32) -> SwarmPolicy {
        if mine == other {
            return SwarmPolicy::Coordinate;
        }
        match self.swarms.get(&mine) {
            Some(spec) => {
                if spec.ignores.contains(&other) {
                    SwarmPolicy::Ignore
                } else if spec.avoids.contains(&other) {
                    SwarmPolicy::Avoid
                } else if spec.direction == OrbitDirection::Clockwise {
                    SwarmPolicy::Avoid
                } else {
                    SwarmPolicy::Ignore
                }
            }
            None => SwarmPolicy::Avoid,
        }
    }
}

/// Sensing and monitoring parameters of the coordination layer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoordinationConfig {
    /// Robots beyond this range are invisible to the controller.
    pub sense_radius: f64,
    /// Activation-time threshold on the level-set gap `|e_j - e_i|` for an
    /// episode to count as properly conditioned.
    pub eps_pre: f64,
    /// Activation-time threshold on the combined velocity/tangent
    /// misalignment for an episode to count as properly conditioned.
    pub delta_pre: f64,
    /// Membership evaluation against avoided (obstacle) swarms.
    pub obstacle_velocity: ObstacleVelocityMode,
}

/// Per-step ledger entry for one ordered pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LedgerEntry {
    pub stage: OvertakeStage,
    pub psi: f64,
    pub lg_h_i: f64,
    /// Outward-facing geometry `p_hat_ij . E v_hat_i > 0` (sign flipped for
    /// counter-clockwise swarms).
    pub assumption1_ok: bool,
}

/// The overtaking rule: active exactly when the pair is in the overtake set
/// and the safety residual is negative.
pub fn is_overtaking(entry: &LedgerEntry) -> bool {
    entry.lg_h_i > SINGULARITY_EPS && entry.psi < 0.0
}

/// Set of robots that `robot` can overtake: those with a positive input
/// channel `Lg_h_i` in the pair barrier (clockwise form). Membership is a
/// function of current state only.
pub fn overtake_set(robot: &RobotState, others: &[RobotState], cfg: &SafetyConfig) -> BTreeSet<u32> {
    let v_i = robot.velocity();
    others
        .iter()
        .filter(|other| other.id != robot.id && other.active)
        .filter_map(|other| {
            let view = build_pair_view(cfg, robot.p, v_i, other.p, other.velocity());
            (view.lg_h_i > SINGULARITY_EPS).then_some(other.id)
        })
        .collect()
}

/// Advances the stage machine one step.
///
/// Edges: activation enters Stage1, a negative heading-cross indicator
/// advances Stage1 to Stage2, deactivation returns to non-overtaking from
/// either stage. Stage2 never falls back to Stage1.
pub fn next_stage(current: OvertakeStage, rule_active: bool, heading_cross: f64) -> OvertakeStage {
    if !rule_active {
        return OvertakeStage::NonOvertaking;
    }
    match current {
        OvertakeStage::NonOvertaking => OvertakeStage::Stage1,
        OvertakeStage::Stage1 => {
            if heading_cross < 0.0 {
                OvertakeStage::Stage2
            } else {
                OvertakeStage::Stage1
            }
        }
        OvertakeStage::Stage2 => OvertakeStage::Stage2,
    }
}

/// Stage transition from a current ledger entry and pair view (clockwise
/// form): the heading-cross indicator is `v_hat_j . E v_hat_i`.
pub fn stage_transition(entry: &LedgerEntry, view: &PairView) -> OvertakeStage {
    let cross = view
        .v_j
        .unit_or_zero(VELOCITY_EPS)
        .dot(rotate_e(view.v_i.unit_or_zero(VELOCITY_EPS)));
    next_stage(entry.stage, is_overtaking(entry), cross)
}

/// Largest of the per-pair supplements, floored at zero; zero when there is
/// nothing to overtake.
pub fn aggregate_safe(corrections: &[(u32, f64)]) -> f64 {
    corrections.iter().fold(0.0, |acc, &(_, u)| acc.max(u))
}

/// Everything the controller needs beyond robot state.
#[derive(Debug, Clone, Copy)]
pub struct ControlContext<'a> {
    pub path: &'a ImplicitPath,
    pub gains: &'a FieldGains,
    pub safety: &'a SafetyConfig,
    pub coord: &'a CoordinationConfig,
    pub swarms: &'a SwarmTable,
}

/// Outcome of evaluating one neighbor within sensing range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairOutcome {
    pub j: u32,
    pub view: PairView,
    /// Steering rate attributed to the neighbor in the constraint.
    pub u_j: f64,
    pub psi: f64,
    /// Channel gain in the robot's outward frame (positive = correctable by
    /// turning outward).
    pub outward_gain: f64,
    pub member: bool,
    pub rule_active: bool,
    /// Supplement contributed by this pair, in the outward frame.
    pub correction: f64,
    /// Rule demanded a correction but the channel gain was too small to
    /// divide by.
    pub singular: bool,
    pub assumption1_ok: bool,
    /// Stage-advance indicator, sign-adjusted for the robot's orbit
    /// direction; negative values advance Stage1 to Stage2.
    pub heading_cross: f64,
}

/// Final steering decision for one robot at one step.
#[derive(Debug, Clone, PartialEq)]
pub struct RobotDecision {
    /// Applied steering rate after clamping.
    pub omega: f64,
    /// Path-following reference.
    pub u_ref: f64,
    /// Aggregated safety supplement (signed; outward for the robot's orbit
    /// direction).
    pub u_safe: f64,
    pub saturated: bool,
    pub pairs: Vec<PairOutcome>,
}

/// Computes one robot's steering rate from a frozen snapshot of all robot
/// states.
///
/// Pure function of the snapshot: neighbors outside the sensing radius (or
/// belonging to ignored swarms) do not influence the result, and the result
/// does not depend on neighbor ordering.
pub fn robot_input(
    robot: &RobotState,
    snapshot: &[RobotState],
    ctx: &ControlContext,
) -> Result<RobotDecision, ControlError> {
    let direction = ctx.swarms.direction(robot.swarm);
    let sign = direction.sign();
    let u_ref = heading_ref(
        ctx.path,
        ctx.gains,
        direction,
        robot.p,
        robot.theta.radians(),
        robot.speed,
    )
    .map_err(|source| ControlError::Field {
        robot: robot.id,
        source,
    })?;

    let v_i = robot.velocity();
    let mut pairs = Vec::new();
    let mut corrections: Vec<(u32, f64)> = Vec::new();

    for other in snapshot {
        if !other.active || other.id == robot.id {
            continue;
        }
        let policy = ctx.swarms.policy(robot.swarm, other.swarm);
        if policy == SwarmPolicy::Ignore {
            continue;
        }
        if (other.p - robot.p).norm() > ctx.coord.sense_radius {
            continue;
        }

        let v_j = other.velocity();
        let view = build_pair_view(ctx.safety, robot.p, v_i, other.p, v_j);

        // The constraint takes the neighbor's steering as a fixed known
        // value: its currently observed heading rate. A nominal-law guess
        // systematically undershoots when the neighbor is itself dodging,
        // and chained overtakes then never recover their barrier deficit.
        let u_j = other.omega;

        let residual = psi(&view, ctx.safety, u_ref, u_j);
        let outward_gain = sign * view.lg_h_i;

        let membership_gain = match (policy, ctx.coord.obstacle_velocity) {
            (SwarmPolicy::Avoid, ObstacleVelocityMode::Zero) => {
                let frozen = build_pair_view(ctx.safety, robot.p, v_i, other.p, Vec2::ZERO);
                sign * frozen.lg_h_i
            }
            _ => outward_gain,
        };
        let member = membership_gain > SINGULARITY_EPS;
        let rule_active = member && residual < 0.0;

        let mut correction = 0.0;
        let mut singular = false;
        if rule_active {
            if outward_gain > SINGULARITY_EPS {
                // -psi / lg_h_i, expressed in the outward frame.
                correction = -residual / outward_gain;
                corrections.push((other.id, correction));
            } else {
                singular = true;
            }
        }

        let p_hat = view.p_ij.unit_or_zero(VELOCITY_EPS);
        let v_i_hat = v_i.unit_or_zero(VELOCITY_EPS);
        let v_j_hat = v_j.unit_or_zero(VELOCITY_EPS);
        let assumption1_ok = sign * p_hat.dot(rotate_e(v_i_hat)) > 0.0;
        let heading_cross = sign * v_j_hat.dot(rotate_e(v_i_hat));

        pairs.push(PairOutcome {
            j: other.id,
            view,
            u_j,
            psi: residual,
            outward_gain,
            member,
            rule_active,
            correction,
            singular,
            assumption1_ok,
            heading_cross,
        });
    }

    let u_safe = sign * aggregate_safe(&corrections);
    let raw = u_ref + u_safe;
    let omega = raw.clamp(-ctx.safety.omega_max, ctx.safety.omega_max);
    let saturated = raw.abs() > ctx.safety.omega_max;

    Ok(RobotDecision {
        omega,
        u_ref,
        u_safe,
        saturated,
        pairs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Angle, ClassKFn};

    fn cfg() -> SafetyConfig {
        SafetyConfig {
            r: 1.0,
            d_exp: 0.5,
            kappa: ClassKFn::cubic(0.5),
            omega_max: 4.0,
        }
    }

    fn robot(id: u32, p: Vec2, theta: f64, speed: f64) -> RobotState {
        RobotState {
            id,
            p,
            theta: Angle::wrap(theta).unwrap(),
            speed,
            omega: 0.0,
            active: true,
            swarm: 0,
        }
    }

    /// Robot on a circle of radius `radius` at polar angle `alpha`, heading
    /// along the clockwise tangent.
    fn orbiting(id: u32, radius: f64, alpha: f64, speed: f64) -> RobotState {
        let p = Vec2::new(radius * alpha.cos(), radius * alpha.sin());
        let heading = Vec2::new(alpha.sin(), -alpha.cos()).angle();
        robot(id, p, heading, speed)
    }

    #[test]
    fn overtake_set_trailing_robot_case() {
        // Faster robot trailing a slower one on the same circular level
        // set, outward-facing geometry: the leader is in the set.
        let i = orbiting(0, 10.0, 0.3, 5.5);
        let j = orbiting(1, 10.0, 0.0, 4.5);
        let set = overtake_set(&i, &[j.clone()], &cfg());
        assert!(set.contains(&1));

        // Confirm the construction also satisfies the outward assumption.
        let view = build_pair_view(&cfg(), i.p, i.velocity(), j.p, j.velocity());
        let p_hat = view.p_ij.try_normalize().unwrap();
        let v_hat = i.velocity().try_normalize().unwrap();
        assert!(p_hat.dot(rotate_e(v_hat)) > 0.0);
    }

    #[test]
    fn overtake_set_boundary_excluded() {
        // Collinear east-bound pair: channel gain exactly zero, excluded by
        // the strict inequality.
        let i = robot(0, Vec2::ZERO, 0.0, 1.0);
        let j = robot(1, Vec2::new(5.0, 0.0), 0.0, 2.0);
        let view = build_pair_view(&cfg(), i.p, i.velocity(), j.p, j.velocity());
        assert!(view.lg_h_i.abs() < 1e-12);
        assert!(overtake_set(&i, &[j], &cfg()).is_empty());
    }

    #[test]
    fn overtake_set_singleton_swarm_empty() {
        let i = orbiting(0, 10.0, 0.3, 5.5);
        assert!(overtake_set(&i, &[i.clone()], &cfg()).is_empty());
        assert!(overtake_set(&i, &[], &cfg()).is_empty());
    }

    #[test]
    fn is_overtaking_requires_both_conditions() {
        let entry = |lg, psi| LedgerEntry {
            stage: OvertakeStage::NonOvertaking,
            psi,
            lg_h_i: lg,
            assumption1_ok: true,
        };
        assert!(is_overtaking(&entry(1.0, -0.1)));
        assert!(!is_overtaking(&entry(1.0, 0.1)));
        assert!(!is_overtaking(&entry(-1.0, -0.1)));
    }

    #[test]
    fn stage_machine_edges() {
        use OvertakeStage::*;
        // Activation.
        assert_eq!(next_stage(NonOvertaking, true, 0.5), Stage1);
        // Heading cross advances to Stage2.
        assert_eq!(next_stage(Stage1, true, -0.3), Stage2);
        // Deactivation from either stage.
        assert_eq!(next_stage(Stage2, false, -0.3), NonOvertaking);
        assert_eq!(next_stage(Stage1, false, 0.3), NonOvertaking);
        // Stage2 never falls back to Stage1.
        assert_eq!(next_stage(Stage2, true, 0.5), Stage2);
        // Stage1 holds while the indicator stays non-negative.
        assert_eq!(next_stage(Stage1, true, 0.0), Stage1);
        // Inactive rule never enters a stage.
        assert_eq!(next_stage(NonOvertaking, false, -0.5), NonOvertaking);
    }

    #[test]
    fn aggregate_safe_examples() {
        assert_eq!(aggregate_safe(&[(1, 0.2), (2, 0.5)]), 0.5);
        assert_eq!(aggregate_safe(&[]), 0.0);
        assert_eq!(aggregate_safe(&[(1, 0.0), (2, 0.0), (3, 0.0)]), 0.0);
    }

    fn test_table() -> SwarmTable {
        SwarmTable::new(vec![SwarmSpec {
            id: 0,
            direction: OrbitDirection::Clockwise,
            avoids: vec![],
            ignores: vec![],
        }])
    }

    fn context<'a>(
        path: &'a ImplicitPath,
        gains: &'a FieldGains,
        safety: &'a SafetyConfig,
        coord: &'a CoordinationConfig,
        swarms: &'a SwarmTable,
    ) -> ControlContext<'a> {
        ControlContext {
            path,
            gains,
            safety,
            coord,
            swarms,
        }
    }

    #[test]
    fn robot_input_without_neighbors_is_clamped_reference() {
        let path = ImplicitPath::circle(Vec2::ZERO, 10.0).unwrap();
        let gains = FieldGains { k_e: 1.0, k_d: 1.0 };
        let safety = cfg();
        let coord = CoordinationConfig {
            sense_radius: 10.0,
            eps_pre: 0.2,
            delta_pre: 0.5,
            obstacle_velocity: ObstacleVelocityMode::Actual,
        };
        let table = test_table();
        let ctx = context(&path, &gains, &safety, &coord, &table);

        let r = orbiting(0, 10.0, 0.0, 5.0);
        let snapshot = vec![r.clone()];
        let decision = robot_input(&r, &snapshot, &ctx).unwrap();
        let expected = heading_ref(&path, &gains, OrbitDirection::Clockwise, r.p, r.theta.radians(), r.speed)
            .unwrap()
            .clamp(-safety.omega_max, safety.omega_max);
        assert_eq!(decision.omega, expected);
        assert_eq!(decision.u_safe, 0.0);
        assert!(decision.pairs.is_empty());
    }

    #[test]
    fn robot_input_clamps_and_flags_saturation() {
        let path = ImplicitPath::circle(Vec2::ZERO, 10.0).unwrap();
        let gains = FieldGains { k_e: 1.0, k_d: 1.0 };
        let safety = SafetyConfig { omega_max: 0.01, ..cfg() };
        let coord = CoordinationConfig {
            sense_radius: 10.0,
            eps_pre: 0.2,
            delta_pre: 0.5,
            obstacle_velocity: ObstacleVelocityMode::Actual,
        };
        let table = test_table();
        let ctx = context(&path, &gains, &safety, &coord, &table);

        // Heading far off the field: the reference demand exceeds the bound.
        let r = robot(0, Vec2::new(10.0, 0.0), 2.0, 5.0);
        let decision = robot_input(&r, &[r.clone()], &ctx).unwrap();
        assert!(decision.saturated);
        assert_eq!(decision.omega.abs(), 0.01);
    }

    #[test]
    fn robot_input_composes_reference_and_supplement() {
        let path = ImplicitPath::circle(Vec2::ZERO, 10.0).unwrap();
        let gains = FieldGains { k_e: 1.0, k_d: 1.0 };
        let safety = cfg();
        let coord = CoordinationConfig {
            sense_radius: 10.0,
            eps_pre: 0.2,
            delta_pre: 0.5,
            obstacle_velocity: ObstacleVelocityMode::Actual,
        };
        let table = test_table();
        let ctx = context(&path, &gains, &safety, &coord, &table);

        // Trailing faster robot close behind a slower one: rule active.
        let i = orbiting(0, 10.0, 0.25, 5.5);
        let j = orbiting(1, 10.0, 0.0, 4.5);
        let snapshot = vec![i.clone(), j.clone()];
        let decision = robot_input(&i, &snapshot, &ctx).unwrap();
        let outcome = &decision.pairs[0];
        if outcome.rule_active {
            assert!(decision.u_safe > 0.0, "outside overtaking turns outward");
        }
        let raw = decision.u_ref + decision.u_safe;
        assert_eq!(decision.omega, raw.clamp(-safety.omega_max, safety.omega_max));
    }

    #[test]
    fn robot_input_is_neighbor_order_invariant_and_local() {
        let path = ImplicitPath::circle(Vec2::ZERO, 10.0).unwrap();
        let gains = FieldGains { k_e: 1.0, k_d: 1.0 };
        let safety = cfg();
        let coord = CoordinationConfig {
            sense_radius: 5.0,
            eps_pre: 0.2,
            delta_pre: 0.5,
            obstacle_velocity: ObstacleVelocityMode::Actual,
        };
        let table = test_table();
        let ctx = context(&path, &gains, &safety, &coord, &table);

        let i = orbiting(0, 10.0, 0.3, 5.5);
        let a = orbiting(1, 10.0, 0.0, 4.5);
        let b = orbiting(2, 10.0, 0.45, 4.8);
        let far = orbiting(3, 10.0, 3.0, 4.0); // outside sensing range

        let one = robot_input(&i, &[i.clone(), a.clone(), b.clone(), far.clone()], &ctx).unwrap();
        let two = robot_input(&i, &[far.clone(), b.clone(), a.clone(), i.clone()], &ctx).unwrap();
        assert_eq!(one.omega, two.omega);
        assert_eq!(one.u_safe, two.u_safe);

        let without_far = robot_input(&i, &[i.clone(), a, b], &ctx).unwrap();
        assert_eq!(one.omega, without_far.omega);
    }

    #[test]
    fn counter_clockwise_swarm_corrects_outward() {
        // Mirrored rule: a ccw swarm's supplement is non-positive (outward
        // in its frame).
        let path = ImplicitPath::circle(Vec2::ZERO, 10.0).unwrap();
        let gains = FieldGains { k_e: 1.0, k_d: 1.0 };
        let safety = cfg();
        let coord = CoordinationConfig {
            sense_radius: 10.0,
            eps_pre: 0.2,
            delta_pre: 0.5,
            obstacle_velocity: ObstacleVelocityMode::Actual,
        };
        let table = SwarmTable::new(vec![SwarmSpec {
            id: 1,
            direction: OrbitDirection::CounterClockwise,
            avoids: vec![],
            ignores: vec![],
        }]);
        let ctx = context(&path, &gains, &safety, &coord, &table);

        // Mirror of the trailing-overtake construction: ccw tangent
        // headings, faster robot behind (smaller polar angle).
        let ccw = |id: u32, alpha: f64, speed: f64| {
            let p = Vec2::new(10.0 * alpha.cos(), 10.0 * alpha.sin());
            let heading = Vec2::new(-alpha.sin(), alpha.cos()).angle();
            RobotState {
                id,
                p,
                theta: Angle::wrap(heading).unwrap(),
                speed,
                omega: 0.0,
                active: true,
                swarm: 1,
            }
        };
        let i = ccw(0, -0.25, 5.5);
        let j = ccw(1, 0.0, 4.5);
        let decision = robot_input(&i, &[i.clone(), j], &ctx).unwrap();
        assert!(decision.u_safe <= 0.0);
        if decision.pairs[0].rule_active {
            assert!(decision.u_safe < 0.0);
        }
    }

    #[test]
    fn swarm_policy_defaults() {
        let table = SwarmTable::new(vec![
            SwarmSpec {
                id: 0,
                direction: OrbitDirection::Clockwise,
                avoids: vec![1],
                ignores: vec![],
            },
            SwarmSpec {
                id: 1,
                direction: OrbitDirection::CounterClockwise,
                avoids: vec![],
                ignores: vec![0],
            },
        ]);
        assert_eq!(table.policy(0, 0), SwarmPolicy::Coordinate);
        assert_eq!(table.policy(0, 1), SwarmPolicy::Avoid);
        assert_eq!(table.policy(1, 0), SwarmPolicy::Ignore);
    }
}
