#![allow(dead_code)]

use toml::{Table, Value};
use tunnelsense_core::scenario::builtin;
use tunnelsense_core::Scenario;

/// A bundled scenario with `section.key` entries overridden.
pub fn variant(name: &str, edits: &[(&str, Value)]) -> Scenario {
    let mut table: Table = builtin(name)
        .expect("bundled scenario")
        .parse()
        .expect("bundled scenario parses");
    for (path, value) in edits {
        let (section, key) = path.split_once('.').expect("section.key");
        table
            .entry(section)
            .or_insert_with(|| Value::Table(Table::new()))
            .as_table_mut()
            .expect("section is a table")
            .insert(key.to_string(), value.clone());
    }
    Scenario::from_toml(&table.to_string()).unwrap_or_else(|e| panic!("{name} variant: {e}"))
}

pub fn rel(got: f64, want: f64) -> f64 {
    ((got - want) / want).abs()
}
