//! Shipped experiment configurations.

pub const FIG5: &str = include_str!("../../presets/fig5.toml");
pub const FIG6: &str = include_str!("../../presets/fig6.toml");
pub const FIG7: &str = include_str!("../../presets/fig7.toml");

/// Preset text by experiment name (`fig5`, `fig6`, `fig7`).
pub fn preset(name: &str) -> Option<&'static str> {
    match name {
        "fig5" => Some(FIG5),
        "fig6" => Some(FIG6),
        "fig7" => Some(FIG7),
        _ => None,
    }
}
