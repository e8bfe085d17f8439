//! End-to-end scenarios: configuration, the simulation pipeline, and the
//! calibration, sweep and exponent studies built on it.

mod config;
mod emit;
mod pipeline;
mod studies;

pub use config::{
    config_hash, locate, validate_config, Analysis, AnalysisConfig, AveragingMode, CalibrateConfig, Diagnostic,
    DriveConfig, EstimateConfig, ForceConfig, JunctionConfig, NoiseConfig, ResonatorConfig, Sampling, SamplingConfig,
    Scenario, ScenarioConfig, SweepConfig,
};
pub use emit::to_document;
pub use pipeline::{
    exponent_from_lines, run_scenario, LineReport, Provenance, Reference, RunSummary, ScenarioReport, ScenarioRun,
};
pub use studies::{
    calibration_point, coefficient_table, infer_d0_over_xr, run_calibration, run_estimate, run_sweep, sweep_table,
    CalibrationReport, CalibrationSummary, EstimateReport, EstimateSummary, GeometrySource, Rung, SweepReport,
    SweepRow,
};

/// Bundled scenario files, by name.
pub const BUILTIN_SCENARIOS: [(&str, &str); 5] = [
    ("fig3_whitenoise", include_str!("../../fixtures/fig3_whitenoise.toml")),
    ("fig4b_150V", include_str!("../../fixtures/fig4b_150V.toml")),
    ("fig4c_300V", include_str!("../../fixtures/fig4c_300V.toml")),
    ("casimir_1um", include_str!("../../fixtures/casimir_1um.toml")),
    ("powerlaw_n2", include_str!("../../fixtures/powerlaw_n2.toml")),
];

pub fn builtin(name: &str) -> Option<&'static str> {
    BUILTIN_SCENARIOS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, text)| *text)
}
