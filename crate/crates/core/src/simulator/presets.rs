use super::Scenario;
use crate::error::SimulationError;

pub const PRESET_NAMES: [&str; 4] = ["table3", "table3-expanded", "section6", "appendixF"];

fn source(name: &str) -> Option<&'static str> {
    Some(match name {
        "table3" => include_str!("../../presets/table3.json"),
        "table3-expanded" => include_str!("../../presets/table3-expanded.json"),
        "section6" => include_str!("../../presets/section6.json"),
        "appendixF" => include_str!("../../presets/appendixF.json"),
        _ => return None,
    })
}

/// Shipped scenario `name` with enrollment multiplied by `scale`.
pub fn preset(name: &str, scale: f64) -> Result<Scenario, SimulationError> {
    let text = source(name).ok_or_else(|| {
        SimulationError::InvalidScenario(format!(
            "unknown preset '{name}' (available: {})",
            PRESET_NAMES.join(", ")
        ))
    })?;
    if !(scale.is_finite() && scale > 0.0) {
        return Err(SimulationError::InvalidScenario(format!("scale {scale} must be positive")));
    }
    Ok(Scenario::from_json(text)?.scaled(scale))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_presets_load() {
        for name in PRESET_NAMES {
            let s = preset(name, 1.0).unwrap();
            assert_eq!(s.name, name);
        }
        assert!(preset("nope", 1.0).is_err());
    }

    #[test]
    fn section6_totals() {
        let s = preset("section6", 1.0).unwrap();
        assert_eq!(s.platform_size(), 40_400);
        let separate: u64 = (1..=10).map(|a| s.separate_size(a)).sum();
        assert_eq!(separate, 69_800);
    }

    #[test]
    fn table3_sizes() {
        let s = preset("table3", 1.0).unwrap();
        assert_eq!(s.platform_size(), 3 * 1750);
        let e = preset("table3-expanded", 1.0).unwrap();
        // expanded platform matches the two separate trials in total size (up to rounding)
        let separate: u64 = (1..=2).map(|a| s.separate_size(a)).sum();
        assert!((e.platform_size() as i64 - separate as i64).abs() <= 3);
    }

    #[test]
    fn scaling_rounds_per_window() {
        let s = preset("section6", 0.1).unwrap();
        assert_eq!(s.enrollment_per_arm, vec![100, 90, 120, 140, 100]);
        assert_eq!(s.platform_size(), 4_040);
    }
}
