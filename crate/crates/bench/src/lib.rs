//! Benchmark inputs shared by the criterion targets.

use tunnelsense_core::scenario::builtin;
use tunnelsense_core::Scenario;

/// A bundled scenario, shortened to `segments` segments.
pub fn bundled(name: &str, segments: usize) -> Scenario {
    let text = builtin(name).expect("bundled scenario exists");
    let text = text
        .lines()
        .map(|l| {
            if l.starts_with("segments =") {
                format!("segments = {segments}")
            } else {
                l.to_string()
            }
        })
        .collect::<Vec<_>>()
        .join("\n");
    Scenario::from_toml(&text).expect("bundled scenario parses")
}
