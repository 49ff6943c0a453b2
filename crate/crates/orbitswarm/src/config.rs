//! Scenario configuration: TOML schema, validation, and rendering.
//!
//! A scenario file has nested sections `path`, `gains`, `safety`, `robots`,
//! `run`, plus optional `coordination`, `swarms`, and `launch`. Unknown keys
//! are rejected with the offending location. Parsing resolves every default,
//! so a validated [`Scenario`] round-trips exactly through
//! [`render_scenario`] and [`parse_scenario`].

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coordination::{
    CoordinationConfig, ObstacleVelocityMode, SwarmSpec, SwarmTable,
};
use crate::geometry::{ClassKFn, Vec2};
use crate::path::{FieldGains, ImplicitPath, OrbitDirection};
use crate::safety::SafetyConfig;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("scenario parse error: {0}")]
    Parse(String),
    #[error("scenario validation failed:\n  {}", .0.join("\n  "))]
    Validation(Vec<String>),
    #[error("override `{key}` is invalid: {reason}")]
    Override { key: String, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathKindConfig {
    Circle,
    Ellipse,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KappaForm {
    Cubic,
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DirectionConfig {
    Clockwise,
    CounterClockwise,
}

impl DirectionConfig {
    pub fn to_orbit(self) -> OrbitDirection {
        match self {
            DirectionConfig::Clockwise => OrbitDirection::Clockwise,
            DirectionConfig::CounterClockwise => OrbitDirection::CounterClockwise,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObstacleVelocityConfig {
    Actual,
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpawnKind {
    /// Placed on a level set of the path at scenario start.
    Ring,
    /// Rides the launch carrier until released.
    Carrier,
}

/// Robot speed: fixed value or a uniform range sampled per robot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SpeedSpec {
    Fixed(f64),
    Range { min: f64, max: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathSection {
    pub kind: PathKindConfig,
    pub center: [f64; 2],
    pub semi_axes: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GainsSection {
    pub k_e: f64,
    pub k_d: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SafetySection {
    pub r: f64,
    pub d: f64,
    pub gamma: f64,
    pub kappa: KappaForm,
    pub omega_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoordinationSection {
    pub sense_radius: f64,
    pub eps_pre: f64,
    pub delta_pre: f64,
    pub obstacle_velocity: ObstacleVelocityConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SwarmSection {
    pub id: u32,
    pub direction: DirectionConfig,
    pub avoids: Vec<u32>,
    pub ignores: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RobotGroup {
    pub count: u32,
    pub speed: SpeedSpec,
    pub spawn: SpawnKind,
    pub swarm: u32,
    pub ring_level: f64,
    pub arc_deg: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSection {
    pub dt: f64,
    pub duration: f64,
    pub record_stride: u32,
    pub halt_on_collision: bool,
    pub fail_on_saturation: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LaunchSection {
    pub origin: [f64; 2],
    pub carrier_speed: f64,
    pub spacing_multiple: f64,
}

/// Fully resolved, validated scenario.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scenario {
    pub path: PathSection,
    pub gains: GainsSection,
    pub safety: SafetySection,
    pub coordination: CoordinationSection,
    pub run: RunSection,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub launch: Option<LaunchSection>,
    pub swarms: Vec<SwarmSection>,
    pub robots: Vec<RobotGroup>,
}

impl Scenario {
    pub fn implicit_path(&self) -> ImplicitPath {
        let center = Vec2::new(self.path.center[0], self.path.center[1]);
        match self.path.kind {
            PathKindConfig::Circle => ImplicitPath::circle(center, self.path.semi_axes[0])
                .expect("validated scenario has positive axes"),
            PathKindConfig::Ellipse => {
                ImplicitPath::ellipse(center, self.path.semi_axes[0], self.path.semi_axes[1])
                    .expect("validated scenario has positive axes")
            }
        }
    }

    pub fn field_gains(&self) -> FieldGains {
        FieldGains {
            k_e: self.gains.k_e,
            k_d: self.gains.k_d,
        }
    }

    pub fn safety_config(&self) -> SafetyConfig {
        let kappa = match self.safety.kappa {
            KappaForm::Cubic => ClassKFn::cubic(self.safety.gamma),
            KappaForm::Linear => ClassKFn::linear(self.safety.gamma),
        };
        SafetyConfig {
            r: self.safety.r,
            d_exp: self.safety.d,
            kappa,
            omega_max: self.safety.omega_max,
        }
    }

    pub fn coordination_config(&self) -> CoordinationConfig {
        CoordinationConfig {
            sense_radius: self.coordination.sense_radius,
            eps_pre: self.coordination.eps_pre,
            delta_pre: self.coordination.delta_pre,
            obstacle_velocity: match self.coordination.obstacle_velocity {
                ObstacleVelocityConfig::Actual => ObstacleVelocityMode::Actual,
                ObstacleVelocityConfig::Zero => ObstacleVelocityMode::Zero,
            },
        }
    }

    pub fn swarm_table(&self) -> SwarmTable {
        SwarmTable::new(
            self.swarms
                .iter()
                .map(|s| SwarmSpec {
                    id: s.id,
                    direction: s.direction.to_orbit(),
                    avoids: s.avoids.clone(),
                    ignores: s.ignores.clone(),
                })
                .collect(),
        )
    }

    pub fn total_robots(&self) -> u32 {
        self.robots.iter().map(|g| g.count).sum()
    }

    pub fn step_count(&self) -> u64 {
        (self.run.duration / self.run.dt).round().max(1.0) as u64
    }

    /// Re-checks every field constraint; empty on success.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let issues = validate_fields(self);
        if issues.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Validation(issues))
        }
    }
}

// ---------------------------------------------------------------------------
// Raw (pre-default) schema

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    path: RawPath,
    gains: RawGains,
    safety: RawSafety,
    #[serde(default)]
    coordination: RawCoordination,
    run: RawRun,
    launch: Option<RawLaunch>,
    #[serde(default)]
    swarms: Vec<RawSwarm>,
    #[serde(default)]
    robots: Vec<RawRobotGroup>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPath {
    kind: PathKindConfig,
    center: Option<[f64; 2]>,
    radius: Option<f64>,
    semi_axes: Option<[f64; 2]>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGains {
    k_e: f64,
    k_d: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSafety {
    r: f64,
    d: f64,
    gamma: f64,
    kappa: Option<KappaForm>,
    omega_max: f64,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCoordination {
    sense_radius: Option<f64>,
    eps_pre: Option<f64>,
    delta_pre: Option<f64>,
    obstacle_velocity: Option<ObstacleVelocityConfig>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRun {
    dt: f64,
    duration: f64,
    record_stride: Option<u32>,
    halt_on_collision: Option<bool>,
    fail_on_saturation: Option<bool>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLaunch {
    origin: [f64; 2],
    carrier_speed: f64,
    spacing_multiple: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSwarm {
    id: u32,
    direction: Option<DirectionConfig>,
    #[serde(default)]
    avoids: Vec<u32>,
    #[serde(default)]
    ignores: Vec<u32>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRobotGroup {
    count: Option<u32>,
    speed: SpeedSpec,
    spawn: Option<SpawnKind>,
    swarm: Option<u32>,
    ring_level: Option<f64>,
    arc_deg: Option<[f64; 2]>,
}

// ---------------------------------------------------------------------------

/// Parses and validates a scenario document.
pub fn parse_scenario(text: &str) -> Result<Scenario, ConfigError> {
    let raw: RawScenario = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
    resolve(raw)
}

/// Renders a scenario back into its schema form. `parse_scenario` of the
/// result reproduces the scenario exactly.
pub fn render_scenario(sc: &Scenario) -> String {
    toml::to_string_pretty(sc).expect("scenario serializes to TOML")
}

fn resolve(raw: RawScenario) -> Result<Scenario, ConfigError> {
    let mut issues = Vec::new();

    let semi_axes = match (raw.path.kind, raw.path.radius, raw.path.semi_axes) {
        (PathKindConfig::Circle, Some(radius), None) => [radius, radius],
        (PathKindConfig::Circle, None, Some(axes)) => {
            if axes[0] != axes[1] {
                issues.push(format!(
                    "path.semi_axes of a circle must be equal, got [{}, {}]",
                    axes[0], axes[1]
                ));
            }
            axes
        }
        (PathKindConfig::Circle, Some(_), Some(_)) => {
            issues.push("path: give either radius or semi_axes for a circle, not both".into());
            [1.0, 1.0]
        }
        (PathKindConfig::Circle, None, None) => {
            issues.push("path: a circle needs radius or semi_axes".into());
            [1.0, 1.0]
        }
        (PathKindConfig::Ellipse, None, Some(axes)) => axes,
        (PathKindConfig::Ellipse, Some(_), _) => {
            issues.push("path.radius applies to circles only; use semi_axes".into());
            raw.path.semi_axes.unwrap_or([1.0, 1.0])
        }
        (PathKindConfig::Ellipse, None, None) => {
            issues.push("path: an ellipse needs semi_axes".into());
            [1.0, 1.0]
        }
    };

    let path = PathSection {
        kind: raw.path.kind,
        center: raw.path.center.unwrap_or([0.0, 0.0]),
        semi_axes,
    };
    let error_scale = match path.kind {
        PathKindConfig::Circle => path.semi_axes[0] * path.semi_axes[0],
        PathKindConfig::Ellipse => 1.0,
    };

    let safety = SafetySection {
        r: raw.safety.r,
        d: raw.safety.d,
        gamma: raw.safety.gamma,
        kappa: raw.safety.kappa.unwrap_or(KappaForm::Cubic),
        omega_max: raw.safety.omega_max,
    };

    let coordination = CoordinationSection {
        sense_radius: raw.coordination.sense_radius.unwrap_or(10.0 * safety.r),
        eps_pre: raw.coordination.eps_pre.unwrap_or(0.2 * error_scale),
        delta_pre: raw.coordination.delta_pre.unwrap_or(0.5),
        obstacle_velocity: raw
            .coordination
            .obstacle_velocity
            .unwrap_or(ObstacleVelocityConfig::Actual),
    };

    let swarms = if raw.swarms.is_empty() {
        vec![SwarmSection {
            id: 0,
            direction: DirectionConfig::Clockwise,
            avoids: vec![],
            ignores: vec![],
        }]
    } else {
        raw.swarms
            .into_iter()
            .map(|s| SwarmSection {
                id: s.id,
                direction: s.direction.unwrap_or(DirectionConfig::Clockwise),
                avoids: s.avoids,
                ignores: s.ignores,
            })
            .collect()
    };

    let robots = raw
        .robots
        .into_iter()
        .map(|g| RobotGroup {
            count: g.count.unwrap_or(1),
            speed: g.speed,
            spawn: g.spawn.unwrap_or(SpawnKind::Ring),
            swarm: g.swarm.unwrap_or(0),
            ring_level: g.ring_level.unwrap_or(0.0),
            arc_deg: g.arc_deg.unwrap_or([0.0, 360.0]),
        })
        .collect();

    let scenario = Scenario {
        path,
        gains: GainsSection {
            k_e: raw.gains.k_e,
            k_d: raw.gains.k_d,
        },
        safety,
        coordination,
        run: RunSection {
            dt: raw.run.dt,
            duration: raw.run.duration,
            record_stride: raw.run.record_stride.unwrap_or(1),
            halt_on_collision: raw.run.halt_on_collision.unwrap_or(false),
            fail_on_saturation: raw.run.fail_on_saturation.unwrap_or(false),
        },
        launch: raw.launch.map(|l| LaunchSection {
            origin: l.origin,
            carrier_speed: l.carrier_speed,
            spacing_multiple: l.spacing_multiple,
        }),
        swarms,
        robots,
    };

    issues.extend(validate_fields(&scenario));
    if issues.is_empty() {
        Ok(scenario)
    } else {
        Err(ConfigError::Validation(issues))
    }
}

fn validate_fields(sc: &Scenario) -> Vec<String> {
    let mut issues = Vec::new();
    let mut check = |ok: bool, msg: &str| {
        if !ok {
            issues.push(msg.to_string());
        }
    };

    let finite2 = |v: [f64; 2]| v[0].is_finite() && v[1].is_finite();

    check(finite2(sc.path.center), "path.center must be finite");
    check(
        finite2(sc.path.semi_axes) && sc.path.semi_axes[0] > 0.0 && sc.path.semi_axes[1] > 0.0,
        "path.semi_axes must be strictly positive",
    );
    if sc.path.kind == PathKindConfig::Circle {
        check(
            sc.path.semi_axes[0] == sc.path.semi_axes[1],
            "path.semi_axes of a circle must be equal",
        );
    }

    check(
        sc.gains.k_e.is_finite() && sc.gains.k_e > 0.0,
        "gains.k_e must be > 0",
    );
    check(
        sc.gains.k_d.is_finite() && sc.gains.k_d > 0.0,
        "gains.k_d must be > 0",
    );

    check(sc.safety.r.is_finite() && sc.safety.r > 0.0, "safety.r must be > 0");
    check(
        sc.safety.d.is_finite() && (0.0..1.0).contains(&sc.safety.d),
        "safety.d must be in [0,1)",
    );
    check(
        sc.safety.gamma.is_finite() && sc.safety.gamma > 0.0,
        "safety.gamma must be > 0",
    );
    check(
        sc.safety.omega_max.is_finite() && sc.safety.omega_max > 0.0,
        "safety.omega_max must be > 0",
    );

    check(
        sc.coordination.sense_radius.is_finite() && sc.coordination.sense_radius > 0.0,
        "coordination.sense_radius must be > 0",
    );
    check(
        sc.coordination.eps_pre.is_finite() && sc.coordination.eps_pre > 0.0,
        "coordination.eps_pre must be > 0",
    );
    check(
        sc.coordination.delta_pre.is_finite() && sc.coordination.delta_pre > 0.0,
        "coordination.delta_pre must be > 0",
    );

    check(sc.run.dt.is_finite() && sc.run.dt > 0.0, "run.dt must be > 0");
    check(
        sc.run.duration.is_finite() && sc.run.duration >= sc.run.dt,
        "run.duration must be at least run.dt",
    );
    check(sc.run.record_stride >= 1, "run.record_stride must be >= 1");

    if let Some(launch) = &sc.launch {
        check(finite2(launch.origin), "launch.origin must be finite");
        check(
            launch.carrier_speed.is_finite() && launch.carrier_speed >= 0.0,
            "launch.carrier_speed must be >= 0",
        );
        check(
            launch.spacing_multiple.is_finite() && launch.spacing_multiple > 1.0,
            "launch.spacing_multiple must be > 1",
        );
    }

    let mut ids: Vec<u32> = sc.swarms.iter().map(|s| s.id).collect();
    ids.sort_unstable();
    let unique = ids.windows(2).all(|w| w[0] != w[1]);
    check(unique, "swarms ids must be unique");
    for swarm in &sc.swarms {
        for other in swarm.avoids.iter().chain(swarm.ignores.iter()) {
            check(
                ids.binary_search(other).is_ok(),
                &format!("swarm {} references undeclared swarm {}", swarm.id, other),
            );
        }
        for a in &swarm.avoids {
            check(
                !swarm.ignores.contains(a),
                &format!("swarm {} lists swarm {} as both avoided and ignored", swarm.id, a),
            );
        }
        if swarm.direction == DirectionConfig::CounterClockwise {
            check(
                swarm.avoids.is_empty(),
                &format!(
                    "swarm {} is counter-clockwise and cannot avoid other swarms",
                    swarm.id
                ),
            );
        }
    }

    let error_scale = match sc.path.kind {
        PathKindConfig::Circle => sc.path.semi_axes[0] * sc.path.semi_axes[0],
        PathKindConfig::Ellipse => 1.0,
    };
    for (idx, group) in sc.robots.iter().enumerate() {
        let tag = format!("robots[{idx}]");
        check(group.count >= 1, &format!("{tag}.count must be >= 1"));
        match group.speed {
            SpeedSpec::Fixed(v) => {
                check(v.is_finite() && v > 0.0, &format!("{tag}.speed must be > 0"))
            }
            SpeedSpec::Range { min, max } => {
                check(
                    min.is_finite() && max.is_finite() && min > 0.0 && min <= max,
                    &format!("{tag}.speed range needs 0 < min <= max"),
                );
            }
        }
        check(
            ids.binary_search(&group.swarm).is_ok(),
            &format!("{tag}.swarm {} is not declared", group.swarm),
        );
        check(
            group.ring_level.is_finite() && group.ring_level > -error_scale,
            &format!("{tag}.ring_level must be above -{error_scale} for this path"),
        );
        check(
            group.arc_deg[0].is_finite() && group.arc_deg[1].is_finite(),
            &format!("{tag}.arc_deg must be finite"),
        );
        if group.spawn == SpawnKind::Carrier {
            check(
                sc.launch.is_some(),
                &format!("{tag} spawns from the carrier but no launch section is present"),
            );
        }
    }

    issues
}

/// Applies `key=value` overrides to a scenario document before parsing.
/// Keys are dotted paths; numeric segments index arrays.
pub fn apply_overrides(text: &str, overrides: &[String]) -> Result<String, ConfigError> {
    if overrides.is_empty() {
        return Ok(text.to_string());
    }
    let mut doc: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;

    for entry in overrides {
        let (key, raw_value) = entry.split_once('=').ok_or_else(|| ConfigError::Override {
            key: entry.clone(),
            reason: "expected key=value".into(),
        })?;
        let key = key.trim();
        let value = parse_override_value(raw_value.trim());
        set_path(&mut doc, key, value).map_err(|reason| ConfigError::Override {
            key: key.to_string(),
            reason,
        })?;
    }

    Ok(toml::Table::to_string(&doc))
}

fn parse_override_value(raw: &str) -> toml::Value {
    let wrapped = format!("v = {raw}");
    match wrapped.parse::<toml::Table>() {
        Ok(mut table) => table.remove("v").unwrap_or_else(|| toml::Value::String(raw.into())),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

fn set_path(doc: &mut toml::Table, key: &str, value: toml::Value) -> Result<(), String> {
    let segments: Vec<&str> = key.split('.').collect();
    if segments.is_empty() || segments.iter().any(|s| s.is_empty()) {
        return Err("empty key segment".into());
    }

    let mut current = doc;
    for (pos, segment) in segments.iter().enumerate() {
        let last = pos == segments.len() - 1;
        if last {
            current.insert(segment.to_string(), value);
            return Ok(());
        }
        let next = current
            .entry(segment.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        current = match next {
            toml::Value::Table(t) => t,
            toml::Value::Array(items) => {
                let index: usize = segments[pos + 1]
                    .parse()
                    .map_err(|_| format!("`{}` is an array; next segment must be an index", segment))?;
                let item = items
                    .get_mut(index)
                    .ok_or_else(|| format!("index {index} out of bounds for `{segment}`"))?;
                // Consume the index segment.
                if pos + 1 == segments.len() - 1 {
                    *item = value;
                    return Ok(());
                }
                match item {
                    toml::Value::Table(t) => {
                        return set_path(t, &segments[pos + 2..].join("."), value)
                    }
                    _ => return Err(format!("`{segment}.{index}` is not a table")),
                }
            }
            _ => return Err(format!("`{segment}` is not a table")),
        };
    }
    unreachable!("loop returns on the last segment");
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[path]
kind = "circle"
radius = 10.0

[gains]
k_e = 1.0
k_d = 1.0

[safety]
r = 0.5
d = 0.5
gamma = 1.0
omega_max = 4.0

[run]
dt = 0.001
duration = 1.0

[[robots]]
speed = 5.0
"#;

    #[test]
    fn minimal_circle_config_fills_defaults() {
        let sc = parse_scenario(MINIMAL).unwrap();
        assert_eq!(sc.path.semi_axes, [10.0, 10.0]);
        assert_eq!(sc.path.center, [0.0, 0.0]);
        assert_eq!(sc.safety.kappa, KappaForm::Cubic);
        assert_eq!(sc.coordination.sense_radius, 5.0); // 10 * r
        assert_eq!(sc.coordination.delta_pre, 0.5);
        assert_eq!(sc.run.record_stride, 1);
        assert!(!sc.run.halt_on_collision);
        assert_eq!(sc.swarms.len(), 1);
        assert_eq!(sc.robots[0].count, 1);
        assert_eq!(sc.robots[0].spawn, SpawnKind::Ring);
        assert_eq!(sc.robots[0].arc_deg, [0.0, 360.0]);
    }

    #[test]
    fn out_of_range_exponent_is_rejected_with_field_name() {
        let text = MINIMAL.replace("d = 0.5", "d = 1.5");
        let err = parse_scenario(&text).unwrap_err();
        match err {
            ConfigError::Validation(issues) => {
                assert!(issues.iter().any(|m| m.contains("safety.d must be in [0,1)")), "{issues:?}");
            }
            other => panic!("expected validation error, got {other}"),
        }
    }

    #[test]
    fn unknown_keys_are_rejected_with_location() {
        let text = format!("{MINIMAL}\n[safety2]\nx = 1\n");
        let err = parse_scenario(&text).unwrap_err();
        assert!(matches!(err, ConfigError::Parse(_)));
        let text = MINIMAL.replace("gamma = 1.0", "gamma = 1.0\ntypo_key = 3");
        let err = parse_scenario(&text).unwrap_err();
        match err {
            ConfigError::Parse(msg) => {
                assert!(msg.contains("typo_key"), "{msg}");
                assert!(msg.contains("line"), "{msg}");
            }
            other => panic!("expected parse error, got {other}"),
        }
    }

    #[test]
    fn round_trip_is_identity() {
        let sc = parse_scenario(MINIMAL).unwrap();
        let rendered = render_scenario(&sc);
        let reparsed = parse_scenario(&rendered).unwrap();
        assert_eq!(sc, reparsed);
    }

    #[test]
    fn overrides_reach_nested_fields() {
        let text = apply_overrides(
            MINIMAL,
            &[
                "safety.omega_max=0.01".to_string(),
                "run.duration=2.5".to_string(),
                "path.kind=circle".to_string(),
            ],
        )
        .unwrap();
        let sc = parse_scenario(&text).unwrap();
        assert_eq!(sc.safety.omega_max, 0.01);
        assert_eq!(sc.run.duration, 2.5);
    }

    #[test]
    fn overrides_index_into_arrays() {
        let text = apply_overrides(MINIMAL, &["robots.0.speed=3.25".to_string()]).unwrap();
        let sc = parse_scenario(&text).unwrap();
        assert_eq!(sc.robots[0].speed, SpeedSpec::Fixed(3.25));
    }

    #[test]
    fn override_of_unknown_key_fails_validation_stage() {
        let text = apply_overrides(MINIMAL, &["safety.bogus=1".to_string()]).unwrap();
        assert!(parse_scenario(&text).is_err());
    }

    #[test]
    fn counter_clockwise_swarms_cannot_avoid() {
        let text = format!(
            "{MINIMAL}\n[[swarms]]\nid = 0\ndirection = \"counter_clockwise\"\navoids = [1]\n\n[[swarms]]\nid = 1\n"
        );
        let err = parse_scenario(&text).unwrap_err();
        match err {
            ConfigError::Validation(issues) => {
                assert!(issues.iter().any(|m| m.contains("counter-clockwise")), "{issues:?}");
            }
            other => panic!("expected validation error, got {other}"),
        }
    }

    #[test]
    fn carrier_spawn_requires_launch_section() {
        let text = MINIMAL.replace("speed = 5.0", "speed = 5.0\nspawn = \"carrier\"");
        let err = parse_scenario(&text).unwrap_err();
        assert!(matches!(err, ConfigError::Validation(_)));
    }

    #[test]
    fn speed_spec_forms_parse() {
        let text = MINIMAL.replace("speed = 5.0", "speed = { min = 3.0, max = 6.0 }");
        let sc = parse_scenario(&text).unwrap();
        assert_eq!(sc.robots[0].speed, SpeedSpec::Range { min: 3.0, max: 6.0 });
    }
}
