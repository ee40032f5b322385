//! Bundled scenarios for the measurements of the two-bin, offset and three-bin mode
//! structures. The phase assignments are reconstructions that reproduce the stated
//! overlaps (0, 1, 1/4, 1/9) with the loop's coin settings.

use crate::error::{Error, Result};
use crate::experiment::Scenario;

/// Orthogonal two-bin modes, parallel two-bin modes, offset two-bin modes and the
/// three-bin modes with their two-bin submodes.
pub const DEMO_NAMES: [&str; 4] = ["fig2a", "fig2b", "fig2cd", "fig2eh"];

pub fn demo_json(name: &str) -> Option<&'static str> {
    Some(match name {
        "fig2a" => include_str!("../scenarios/fig2a.json"),
        "fig2b" => include_str!("../scenarios/fig2b.json"),
        "fig2cd" => include_str!("../scenarios/fig2cd.json"),
        "fig2eh" => include_str!("../scenarios/fig2eh.json"),
        _ => return None,
    })
}

/// Golden `summary.json` of the demo at its bundled seed.
pub fn golden_summary(name: &str) -> Option<&'static str> {
    Some(match name {
        "fig2a" => include_str!("../scenarios/golden/fig2a.summary.json"),
        "fig2b" => include_str!("../scenarios/golden/fig2b.summary.json"),
        "fig2cd" => include_str!("../scenarios/golden/fig2cd.summary.json"),
        "fig2eh" => include_str!("../scenarios/golden/fig2eh.summary.json"),
        _ => return None,
    })
}

pub fn demo_scenario(name: &str) -> Result<Scenario> {
    let text = demo_json(name).ok_or_else(|| {
        Error::invalid(
            "demo",
            format!(
                "unknown demo `{name}`, expected one of {}",
                DEMO_NAMES.join(", ")
            ),
        )
    })?;
    Scenario::from_json(text)
}
