//! Shipped scenario presets, embedded so the binary is self-contained.

use crate::config::{parse_scenario, ConfigError, Scenario};

pub struct Preset {
    pub name: &'static str,
    pub description: &'static str,
    pub text: &'static str,
}

pub const PRESETS: &[Preset] = &[
    Preset {
        name: "fig3_pair",
        description: "two robots on an ellipse; the faster one overtakes on the outside",
        text: include_str!("../presets/fig3_pair.toml"),
    },
    Preset {
        name: "fig4_mothership",
        description: "carrier launches 50 robots that enclose an ellipse with staggered speeds",
        text: include_str!("../presets/fig4_mothership.toml"),
    },
    Preset {
        name: "fig5_counter_rotating",
        description: "two 50-robot swarms orbit in opposite directions; one dodges, one ignores",
        text: include_str!("../presets/fig5_counter_rotating.toml"),
    },
];

pub fn get(name: &str) -> Option<&'static Preset> {
    PRESETS.iter().find(|p| p.name == name)
}

pub fn load(name: &str) -> Result<Scenario, ConfigError> {
    let preset = get(name).ok_or_else(|| {
        ConfigError::Parse(format!(
            "unknown preset `{name}` (available: {})",
            PRESETS.iter().map(|p| p.name).collect::<Vec<_>>().join(", ")
        ))
    })?;
    parse_scenario(preset.text)
}
