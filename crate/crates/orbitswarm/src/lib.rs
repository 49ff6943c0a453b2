//! Deterministic simulation of constant-speed unicycle swarms that orbit a
//! convex path while avoiding each other through outside overtakes.
//!
//! Each robot follows a guiding vector field toward the shared path. A
//! collision-cone barrier function with a distance-adaptive virtual radius
//! watches every nearby pair; whenever its safety residual goes negative
//! for a pair the responsible robot (the one whose steering channel can fix
//! it by turning outward) adds the closed-form minimal correction, and each
//! robot applies the largest correction among its pairs. Runtime monitors
//! record pairwise distances, channel-gain signs during overtakes,
//! saturation and singularity events, and path-following errors.
//!
//! The crate splits into:
//!
//! - [`geometry`]: planar vectors, the quarter-turn rotation, angle
//!   wrapping, class-K gains.
//! - [`path`]: implicit circle/ellipse paths, the guiding vector field, the
//!   heading reference controller.
//! - [`safety`]: the pair barrier function, its derivative decomposition,
//!   the closed-form single-constraint correction.
//! - [`coordination`]: the overtaking rule, stage machine, max-aggregation,
//!   and per-robot input composition.
//! - [`sim`]: fixed-step engine with carrier launches and telemetry
//!   records.
//! - [`monitor`]: streaming monitor suite and run summaries.
//! - [`config`], [`presets`], [`telemetry`], [`cli`]: scenario files, the
//!   shipped presets, CSV output, and the command-line surface.

pub mod cli;
pub mod config;
pub mod coordination;
pub mod geometry;
pub mod monitor;
pub mod path;
pub mod presets;
pub mod safety;
pub mod sim;
pub mod telemetry;

pub use config::{parse_scenario, render_scenario, ConfigError, Scenario};
pub use coordination::{
    aggregate_safe, is_overtaking, overtake_set, robot_input, ControlContext, OvertakeStage,
};
pub use geometry::{rotate_e, wrap_angle, Angle, ClassKFn, Vec2};
pub use monitor::{monitor_report, MonitorAccumulator, RunSummary};
pub use path::{gvf, heading_ref, FieldGains, ImplicitPath, OrbitDirection};
pub use safety::{build_pair_view, h_dot, psi, u_safe_pair, PairView, SafetyConfig};
pub use sim::{run_scenario, run_scenario_with, speed_sample, step_unicycle, RobotState, StepRecord};
