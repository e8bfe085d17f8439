use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::force_models::{ForceLaw, PhysicalConstants, PlateGeometry, DEFAULT_VALIDITY_FLOOR};
use crate::modulation::{DriveState, ExpansionOrder};
use crate::resonator::{Resonator, DEFAULT_EFFECTIVE_MASS, MIN_SAMPLES_PER_CYCLE};
use crate::spectral::Window;
use crate::transducer::{NoiseModel, TunnelingJunction, DEFAULT_DECAY_CONSTANT, DEFAULT_SENSITIVITY_FLOOR};

/// Raw scenario file. Every physical key carries its unit in the name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub seed: u64,
    pub force: ForceConfig,
    pub drive: DriveConfig,
    #[serde(default)]
    pub resonator: ResonatorConfig,
    #[serde(default)]
    pub junction: JunctionConfig,
    #[serde(default)]
    pub noise: NoiseConfig,
    pub sampling: SamplingConfig,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibrate: Option<CalibrateConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub estimate: Option<EstimateConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForceConfig {
    /// `casimir`, `electrostatic`, `power_law`, `gravity` or `none`.
    pub law: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bias_v_volts: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub area_s_m2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strength_k_n_mn: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exponent_n: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mass1_kg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mass2_kg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub casimir_constant_k_c_jm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub validity_floor_m: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriveConfig {
    pub gap_d0_m: f64,
    pub resonator_amplitude_x_r_m: f64,
    pub resonator_freq_nu_r_hz: f64,
    pub plate_amplitude_x_p_m: f64,
    pub plate_freq_nu_p_hz: f64,
    /// Coherent plate-frequency pickup added to the resonator position.
    #[serde(default)]
    pub wp_contamination_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResonatorConfig {
    pub effective_mass_kg: f64,
    pub resonance_freq_hz: f64,
    pub quality_factor: f64,
}

impl Default for ResonatorConfig {
    fn default() -> Self {
        Self {
            effective_mass_kg: DEFAULT_EFFECTIVE_MASS,
            resonance_freq_hz: 19_000.0,
            quality_factor: 100.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JunctionConfig {
    pub setpoint_current_a: f64,
    pub setpoint_gap_m: f64,
    pub decay_constant_per_m: f64,
}

impl Default for JunctionConfig {
    fn default() -> Self {
        Self {
            setpoint_current_a: 1e-9,
            setpoint_gap_m: 5e-9,
            decay_constant_per_m: DEFAULT_DECAY_CONSTANT,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseConfig {
    pub current_white_a_per_rthz: f64,
    /// Density at 1 Hz.
    pub current_pink_a_per_rthz: f64,
    pub current_drift_a_per_s: f64,
    /// Broadband force applied to the resonator.
    pub force_white_n_per_rthz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingConfig {
    pub sample_rate_hz: f64,
    pub segment_s: f64,
    pub segments: usize,
    /// Discarded ring-up; defaults to the resonator ring-up time rounded up
    /// to whole drive periods.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub settle_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisConfig {
    pub window: String,
    /// `vector` or `rms`.
    pub averaging: String,
    /// `first` or `second`.
    pub expansion_order: String,
    /// Noise band above each line, as a fraction of the plate frequency.
    pub noise_band_fraction: f64,
    pub estimate_resonance: bool,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            window: "rectangular".into(),
            averaging: "vector".into(),
            expansion_order: "second".into(),
            noise_band_fraction: 0.45,
            estimate_resonance: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrateConfig {
    pub bias_ladder_volts: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub gap_d0_m: Vec<f64>,
    pub bias_v_volts: Vec<f64>,
    pub noise_force_n: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateConfig {
    /// Bias of the electrostatic run used to infer `d₀/x_r`.
    pub calibration_bias_v_volts: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibration_area_s_m2: Option<f64>,
}

/// One invariant violation, anchored to a config key.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub key: String,
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "line {line}: {}: {}", self.key, self.message),
            None => write!(f, "{}: {}", self.key, self.message),
        }
    }
}

/// How the segment spectra are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum AveragingMode {
    Vector,
    Rms,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sampling {
    pub sample_rate: f64,
    pub segment_samples: usize,
    pub segments: usize,
    pub settle_samples: usize,
}

impl Sampling {
    pub fn total_samples(&self) -> usize {
        self.settle_samples + self.segment_samples * self.segments
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Analysis {
    pub window: Window,
    pub averaging: AveragingMode,
    pub order: ExpansionOrder,
    pub noise_band_fraction: f64,
    pub estimate_resonance: bool,
}

/// A validated scenario, ready to run.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub law: Option<ForceLaw>,
    pub drive: DriveState,
    pub contamination: f64,
    pub resonator: Resonator,
    pub junction: TunnelingJunction,
    pub noise: NoiseModel,
    pub force_noise: f64,
    pub sampling: Sampling,
    pub analysis: Analysis,
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config = parse(text).map_err(|d| Error::Config(d.to_string()))?;
        Self::from_config(config).map_err(|diags| join(&anchor(diags, text)))
    }

    pub fn from_config(config: ScenarioConfig) -> std::result::Result<Self, Vec<Diagnostic>> {
        build(config)
    }

    pub fn seed(&self) -> u64 {
        self.config.seed
    }

    /// The same scenario under another seed.
    pub fn with_seed(&self, seed: u64) -> Self {
        let mut s = self.clone();
        s.config.seed = seed;
        s.noise.seed = seed;
        s
    }

    /// SHA-256 of the canonical serialization of the resolved config.
    pub fn config_hash(&self) -> String {
        config_hash(&self.config)
    }

    pub fn plate_area(&self) -> Option<f64> {
        self.config.force.area_s_m2
    }

    pub fn constants(&self) -> PhysicalConstants {
        constants_of(&self.config.force)
    }
}

pub fn config_hash(config: &ScenarioConfig) -> String {
    let canonical = toml::to_string(config).expect("scenario config serializes");
    hex::encode(Sha256::digest(canonical.as_bytes()))
}

fn join(diags: &[Diagnostic]) -> Error {
    Error::Config(diags.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))
}

fn parse(text: &str) -> std::result::Result<ScenarioConfig, Diagnostic> {
    toml::from_str(text).map_err(|e| Diagnostic {
        key: "config".into(),
        line: e.span().map(|s| line_of_offset(text, s.start)),
        message: e.message().trim().to_string(),
    })
}

/// Every invariant violation in the scenario file `text`, each anchored to
/// the line that sets the offending key. Empty for a valid scenario.
pub fn validate_config(text: &str) -> Vec<Diagnostic> {
    match parse(text) {
        Err(d) => vec![d],
        Ok(config) => match build(config) {
            Ok(_) => Vec::new(),
            Err(diags) => anchor(diags, text),
        },
    }
}

fn line_of_offset(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

fn anchor(diags: Vec<Diagnostic>, text: &str) -> Vec<Diagnostic> {
    diags
        .into_iter()
        .map(|mut d| {
            d.line = d.line.or_else(|| locate(text, &d.key));
            d
        })
        .collect()
}

/// Line (1-based) on which `path` (`section.key` or a top-level `key`) is
/// set, falling back to the section header.
pub fn locate(text: &str, path: &str) -> Option<usize> {
    let (section, key) = match path.split_once('.') {
        Some((s, k)) => (s, k),
        None => ("", path),
    };
    let mut current = String::new();
    let mut header = None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.starts_with('[') {
            current = line.trim_matches(|c| c == '[' || c == ']').trim().to_string();
            if current == section {
                header = Some(i + 1);
            }
            continue;
        }
        if current != section {
            continue;
        }
        if let Some((k, _)) = line.split_once('=') {
            if k.trim() == key {
                return Some(i + 1);
            }
        }
    }
    if section.is_empty() {
        None
    } else {
        header
    }
}

struct Collector(Vec<Diagnostic>);

impl Collector {
    fn push(&mut self, key: &str, message: impl Into<String>) {
        self.0.push(Diagnostic {
            key: key.into(),
            line: None,
            message: message.into(),
        });
    }

    fn positive(&mut self, key: &str, value: f64) -> bool {
        let ok = value.is_finite() && value > 0.0;
        if !ok {
            self.push(key, format!("must be positive and finite, got {value}"));
        }
        ok
    }

    fn non_negative(&mut self, key: &str, value: f64) -> bool {
        let ok = value.is_finite() && value >= 0.0;
        if !ok {
            self.push(key, format!("must be non-negative and finite, got {value}"));
        }
        ok
    }

    fn required(&mut self, key: &str, value: Option<f64>, law: &str) -> f64 {
        match value {
            Some(v) => v,
            None => {
                self.push(key, format!("required by the {law} law"));
                f64::NAN
            }
        }
    }
}

fn constants_of(force: &ForceConfig) -> PhysicalConstants {
    let mut constants = PhysicalConstants::default();
    if let Some(k) = force.casimir_constant_k_c_jm {
        constants.casimir_constant = k;
    }
    constants
}

fn build_law(force: &ForceConfig, c: &mut Collector) -> Option<ForceLaw> {
    let constants = constants_of(force);
    if !(constants.casimir_constant.is_finite() && constants.casimir_constant > 0.0) {
        c.push("force.casimir_constant_k_c_jm", "must be positive and finite");
    }
    let floor = force.validity_floor_m.unwrap_or(DEFAULT_VALIDITY_FLOOR);
    if force.validity_floor_m.is_some() {
        c.non_negative("force.validity_floor_m", floor);
    }
    let geometry = |c: &mut Collector, law: &str| {
        let area = c.required("force.area_s_m2", force.area_s_m2, law);
        if force.area_s_m2.is_some() {
            c.positive("force.area_s_m2", area);
        }
        PlateGeometry {
            area,
            validity_floor: floor,
        }
    };
    let law = match force.law.as_str() {
        "none" => return None,
        "casimir" => ForceLaw::Casimir {
            constants,
            geometry: geometry(c, "casimir"),
        },
        "electrostatic" => {
            let geometry = geometry(c, "electrostatic");
            let bias = c.required("force.bias_v_volts", force.bias_v_volts, "electrostatic");
            if force.bias_v_volts.is_some() && !bias.is_finite() {
                c.push("force.bias_v_volts", "must be finite");
            }
            ForceLaw::Electrostatic {
                bias_voltage: bias,
                geometry,
                constants,
            }
        }
        "power_law" => {
            let strength = c.required("force.strength_k_n_mn", force.strength_k_n_mn, "power_law");
            let exponent = c.required("force.exponent_n", force.exponent_n, "power_law");
            if force.strength_k_n_mn.is_some() {
                c.non_negative("force.strength_k_n_mn", strength);
            }
            if force.exponent_n.is_some() && !(exponent.is_finite() && exponent >= 1.0) {
                c.push("force.exponent_n", format!("must be at least 1, got {exponent}"));
            }
            ForceLaw::PowerLaw { strength, exponent }
        }
        "gravity" => {
            let m1 = c.required("force.mass1_kg", force.mass1_kg, "gravity");
            let m2 = c.required("force.mass2_kg", force.mass2_kg, "gravity");
            if force.mass1_kg.is_some() {
                c.positive("force.mass1_kg", m1);
            }
            if force.mass2_kg.is_some() {
                c.positive("force.mass2_kg", m2);
            }
            ForceLaw::Gravity {
                mass1: m1,
                mass2: m2,
                constants,
            }
        }
        other => {
            c.push(
                "force.law",
                format!("unknown law {other:?}; expected casimir, electrostatic, power_law, gravity or none"),
            );
            return None;
        }
    };
    law.validate().is_ok().then_some(law)
}

fn build_drive(d: &DriveConfig, c: &mut Collector) -> Option<DriveState> {
    let mut ok = c.positive("drive.gap_d0_m", d.gap_d0_m);
    ok &= c.non_negative("drive.resonator_amplitude_x_r_m", d.resonator_amplitude_x_r_m);
    ok &= c.non_negative("drive.plate_amplitude_x_p_m", d.plate_amplitude_x_p_m);
    ok &= c.positive("drive.resonator_freq_nu_r_hz", d.resonator_freq_nu_r_hz);
    ok &= c.positive("drive.plate_freq_nu_p_hz", d.plate_freq_nu_p_hz);
    c.non_negative("drive.wp_contamination_m", d.wp_contamination_m);
    if !ok {
        return None;
    }
    let mut ok = true;
    if d.resonator_amplitude_x_r_m + d.plate_amplitude_x_p_m >= d.gap_d0_m {
        c.push(
            "drive.plate_amplitude_x_p_m",
            format!(
                "gap closure: x_r + x_p = {:e} m reaches the mean gap {:e} m",
                d.resonator_amplitude_x_r_m + d.plate_amplitude_x_p_m,
                d.gap_d0_m
            ),
        );
        ok = false;
    }
    if d.resonator_freq_nu_r_hz == d.plate_freq_nu_p_hz {
        c.push(
            "drive.plate_freq_nu_p_hz",
            "degenerate tones: resonator and plate frequencies coincide",
        );
        ok = false;
    }
    if !ok {
        return None;
    }
    match DriveState::from_hz(
        d.gap_d0_m,
        d.resonator_amplitude_x_r_m,
        d.resonator_freq_nu_r_hz,
        d.plate_amplitude_x_p_m,
        d.plate_freq_nu_p_hz,
    ) {
        Ok(drive) => {
            if drive.common_period().is_none() {
                c.push(
                    "drive.resonator_freq_nu_r_hz",
                    "drive frequencies must be whole multiples of 1 mHz so that a common period exists",
                );
                return None;
            }
            Some(drive)
        }
        Err(e) => {
            c.push("drive.plate_freq_nu_p_hz", e.to_string());
            None
        }
    }
}

/// `value/unit` as a whole number, if it is one to within rounding.
fn whole_multiple(value: f64, unit: f64) -> Option<usize> {
    let k = (value / unit).round();
    ((value / unit - k).abs() < 1e-6 && k >= 0.0).then_some(k as usize)
}

fn build(config: ScenarioConfig) -> std::result::Result<Scenario, Vec<Diagnostic>> {
    let mut c = Collector(Vec::new());

    let law = build_law(&config.force, &mut c);
    let drive = build_drive(&config.drive, &mut c);

    let r = &config.resonator;
    let resonator = Resonator::new(r.effective_mass_kg, r.resonance_freq_hz, r.quality_factor);
    if let Err(e) = &resonator {
        let key = if !(r.effective_mass_kg > 0.0) {
            "resonator.effective_mass_kg"
        } else if !(r.resonance_freq_hz > 0.0) {
            "resonator.resonance_freq_hz"
        } else {
            "resonator.quality_factor"
        };
        c.push(key, e.to_string());
    } else if !r.quality_factor.is_finite() {
        c.push("resonator.quality_factor", "must be finite for a scenario to settle");
    }
    let resonator = resonator.ok();

    let j = &config.junction;
    let mut junction_ok = c.positive("junction.setpoint_current_a", j.setpoint_current_a);
    junction_ok &= c.positive("junction.setpoint_gap_m", j.setpoint_gap_m);
    junction_ok &= c.positive("junction.decay_constant_per_m", j.decay_constant_per_m);
    let excursion = config.drive.resonator_amplitude_x_r_m + config.drive.wp_contamination_m;
    if junction_ok && excursion >= j.setpoint_gap_m {
        c.push(
            "junction.setpoint_gap_m",
            format!(
                "tip contact: resonator excursion {excursion:e} m reaches the tip gap {:e} m",
                j.setpoint_gap_m
            ),
        );
    }
    let junction = TunnelingJunction {
        setpoint_current: j.setpoint_current_a,
        setpoint_gap: j.setpoint_gap_m,
        decay_constant: j.decay_constant_per_m,
        sensitivity_floor: DEFAULT_SENSITIVITY_FLOOR,
    };

    let n = &config.noise;
    c.non_negative("noise.current_white_a_per_rthz", n.current_white_a_per_rthz);
    c.non_negative("noise.current_pink_a_per_rthz", n.current_pink_a_per_rthz);
    c.non_negative("noise.force_white_n_per_rthz", n.force_white_n_per_rthz);
    if !n.current_drift_a_per_s.is_finite() {
        c.push("noise.current_drift_a_per_s", "must be finite");
    }
    let noise = NoiseModel {
        white_level: n.current_white_a_per_rthz,
        pink_level: n.current_pink_a_per_rthz,
        drift_rate: n.current_drift_a_per_s,
        seed: config.seed,
    };

    let a = &config.analysis;
    let window = a.window.parse::<Window>();
    if window.is_err() {
        c.push(
            "analysis.window",
            format!("unknown window {:?}; expected rectangular or hann", a.window),
        );
    }
    let averaging = match a.averaging.as_str() {
        "vector" => Some(AveragingMode::Vector),
        "rms" => Some(AveragingMode::Rms),
        other => {
            c.push(
                "analysis.averaging",
                format!("unknown averaging {other:?}; expected vector or rms"),
            );
            None
        }
    };
    let order = match a.expansion_order.as_str() {
        "first" => Some(ExpansionOrder::First),
        "second" => Some(ExpansionOrder::Second),
        other => {
            c.push(
                "analysis.expansion_order",
                format!("unknown order {other:?}; expected first or second"),
            );
            None
        }
    };
    if !(a.noise_band_fraction > 0.0 && a.noise_band_fraction < 1.0) {
        c.push(
            "analysis.noise_band_fraction",
            format!("must lie in (0, 1), got {}", a.noise_band_fraction),
        );
    }

    let s = &config.sampling;
    let fs = s.sample_rate_hz;
    let mut sampling = None;
    if c.positive("sampling.sample_rate_hz", fs) & c.positive("sampling.segment_s", s.segment_s) {
        if s.segments == 0 {
            c.push("sampling.segments", "at least one segment is required");
        }
        if let Some(res) = &resonator {
            let min = MIN_SAMPLES_PER_CYCLE * res.resonance_frequency;
            if fs < min {
                c.push(
                    "sampling.sample_rate_hz",
                    format!(
                        "{fs} Hz is too coarse for the {} Hz resonator; use at least {min} Hz",
                        res.resonance_frequency
                    ),
                );
            }
        }
        let segment_samples = whole_multiple(s.segment_s * fs, 1.0);
        if segment_samples.is_none() {
            c.push(
                "sampling.segment_s",
                format!("{} s is not a whole number of samples at {fs} Hz", s.segment_s),
            );
        }
        if let Some(drive) = &drive {
            let highest = drive.nu_r() + drive.nu_p();
            if fs <= 4.0 * highest {
                c.push(
                    "sampling.sample_rate_hz",
                    format!(
                        "{fs} Hz leaves no headroom above the highest sideband {highest} Hz; use more than {} Hz",
                        4.0 * highest
                    ),
                );
            }
            let period = drive.common_period().unwrap();
            if whole_multiple(s.segment_s, period).is_none() {
                c.push(
                    "sampling.segment_s",
                    format!(
                        "{} s is not a whole number of common drive periods ({period} s)",
                        s.segment_s
                    ),
                );
            } else if a.noise_band_fraction * drive.nu_p() < 4.0 / s.segment_s {
                c.push(
                    "sampling.segment_s",
                    format!(
                        "{} s segments are too short to resolve a noise band between lines",
                        s.segment_s
                    ),
                );
            }
            let settle = match (s.settle_s, &resonator) {
                (Some(t), _) => {
                    if !(t >= 0.0) || whole_multiple(t, period).is_none() {
                        c.push(
                            "sampling.settle_s",
                            format!("{t} s is not a whole number of common drive periods ({period} s)"),
                        );
                    }
                    t
                }
                (None, Some(res)) => (res.ring_up_time() / period).ceil() * period,
                (None, None) => 0.0,
            };
            if let Some(segment_samples) = segment_samples {
                sampling = Some(Sampling {
                    sample_rate: fs,
                    segment_samples,
                    segments: s.segments,
                    settle_samples: (settle * fs).round() as usize,
                });
            }
        }
    }

    if let Some(cal) = &config.calibrate {
        if cal.bias_ladder_volts.is_empty() {
            c.push("calibrate.bias_ladder_volts", "the ladder needs at least one voltage");
        }
        if cal.bias_ladder_volts.iter().any(|v| !(v.is_finite() && *v != 0.0)) {
            c.push("calibrate.bias_ladder_volts", "voltages must be finite and non-zero");
        }
    }
    if let Some(sweep) = &config.sweep {
        for (key, values) in [
            ("sweep.gap_d0_m", &sweep.gap_d0_m),
            ("sweep.bias_v_volts", &sweep.bias_v_volts),
            ("sweep.noise_force_n", &sweep.noise_force_n),
        ] {
            if values.is_empty() || values.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                c.push(key, "must be a non-empty list of positive values");
            }
        }
    }
    if let Some(est) = &config.estimate {
        if !(est.calibration_bias_v_volts.is_finite() && est.calibration_bias_v_volts != 0.0) {
            c.push("estimate.calibration_bias_v_volts", "must be finite and non-zero");
        }
        match est.calibration_area_s_m2.or(config.force.area_s_m2) {
            Some(area) => {
                c.positive("estimate.calibration_area_s_m2", area);
            }
            None => c.push(
                "estimate.calibration_area_s_m2",
                "required when the force law has no plate area",
            ),
        }
    }

    if !c.0.is_empty() {
        return Err(c.0);
    }
    Ok(Scenario {
        law,
        drive: drive.unwrap(),
        contamination: config.drive.wp_contamination_m,
        resonator: resonator.unwrap(),
        junction,
        noise,
        force_noise: config.noise.force_white_n_per_rthz,
        sampling: sampling.unwrap(),
        analysis: Analysis {
            window: window.unwrap(),
            averaging: averaging.unwrap(),
            order: order.unwrap(),
            noise_band_fraction: a.noise_band_fraction,
            estimate_resonance: a.estimate_resonance,
        },
        config,
    })
}
