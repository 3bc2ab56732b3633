//! Catalogue of inferences known to be computable from mobile sensor data.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

const REGISTRY_JSON: &str = include_str!("../data/inference_registry.json");

/// One inference category and the sensors it has been computed from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InferenceEntry {
    pub name: String,
    /// The attribute the inference recovers.
    pub attribute: String,
    pub sensors: Vec<String>,
}

#[derive(Debug, Deserialize)]
struct RegistryFile {
    sensors: Vec<String>,
    inferences: Vec<InferenceEntry>,
}

fn load() -> &'static RegistryFile {
    static REGISTRY: OnceLock<RegistryFile> = OnceLock::new();
    REGISTRY.get_or_init(|| serde_json::from_str(REGISTRY_JSON).expect("embedded registry is valid JSON"))
}

/// Every catalogued inference.
pub fn inference_registry() -> &'static [InferenceEntry] {
    &load().inferences
}

/// Sensor columns of the catalogue.
pub fn sensors() -> &'static [String] {
    &load().sensors
}

/// Entries whose name matches `name` case-insensitively; empty when unknown.
pub fn lookup(name: &str) -> Vec<&'static InferenceEntry> {
    inference_registry().iter().filter(|e| e.name.eq_ignore_ascii_case(name.trim())).collect()
}

/// Entries computable from `sensor`.
pub fn inferences_using(sensor: &str) -> Vec<&'static InferenceEntry> {
    inference_registry().iter().filter(|e| e.sensors.iter().any(|s| s.eq_ignore_ascii_case(sensor.trim()))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn activity_uses_accelerometer() {
        let hits = lookup("Activity Mode Detection");
        assert_eq!(hits.len(), 1);
        assert!(hits[0].sensors.iter().any(|s| s == "Accelerometer"));
    }

    #[test]
    fn unknown_is_empty() {
        assert!(lookup("Mind Reading").is_empty());
    }

    #[test]
    fn at_least_eleven_categories() {
        assert!(inference_registry().len() >= 11);
    }

    #[test]
    fn sensors_are_known_columns() {
        for e in inference_registry() {
            assert!(!e.sensors.is_empty(), "{}", e.name);
            for s in &e.sensors {
                assert!(sensors().contains(s), "{s}");
            }
        }
    }

    #[test]
    fn reverse_lookup() {
        let mic: Vec<&str> = inferences_using("microphone").iter().map(|e| e.name.as_str()).collect();
        assert!(mic.contains(&"Stress") && mic.contains(&"Emotion"));
    }
}
