use num_complex::Complex64;
use serde::Serialize;

use crate::error::{config, Result};
use crate::force_models::{casimir_sideband, electrostatic_sideband, equivalent_voltage, ForceLaw};
use crate::inference::{estimate_exponent, ExponentEstimate};
use crate::modulation::{
    exact_force_series, fourier_oracle, perturbative_components, sampled_cos, suppression_factor, Line,
};
use crate::resonator::{simulate_displacement, transfer_function};
use crate::spectral::{
    estimate_resonance, line_snr, noise_floor, rms_average, segment_spectra, vector_average, NoiseBand,
    ResonanceEstimate, SpectrumEstimate,
};
use crate::transducer::{readout_series, white_noise};

use super::config::{AveragingMode, Scenario};

const FORCE_STREAM: u64 = 3;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub config_sha256: String,
    pub seed: u64,
    pub version: String,
}

impl Provenance {
    pub fn of(scenario: &Scenario) -> Self {
        Self {
            config_sha256: scenario.config_hash(),
            seed: scenario.seed(),
            version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub law: String,
    pub exponent_n: f64,
    pub gap_d0_m: f64,
    pub relative_resonator_amplitude_a: f64,
    pub relative_plate_amplitude_b: f64,
    pub sample_rate_hz: f64,
    pub resolution_hz: f64,
    pub segment_samples: usize,
    pub segments: usize,
    pub settle_samples: usize,
    pub window: String,
    pub averaging: AveragingMode,
    /// Mean measured force over the two sidebands, N.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sideband_force_n: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sideband_snr: Option<f64>,
    /// Largest force-induced resonator excursion relative to `d₀`; bounds
    /// the error of evaluating the force on the unperturbed gap.
    pub max_displacement_over_gap: f64,
    pub within_validity: bool,
}

/// Closed-form values for the configured geometry.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Reference {
    pub static_force_n: f64,
    pub suppression_factor: f64,
    pub equivalent_voltage_v: f64,
    /// Leading-order electrostatic sideband at the configured bias.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub leading_order_sideband_n: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub casimir_sideband_n: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LineReport {
    pub line: String,
    pub frequency_hz: f64,
    /// Signed perturbative amplitude, N.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub predicted_force_n: Option<f64>,
    /// Signed single-bin projection of the noise-free force, N.
    pub oracle_force_n: f64,
    /// Magnitude recovered from the readout through `1/H(ω)`, N.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub measured_force_n: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub measured_phase_rad: Option<f64>,
    /// `(|measured| − |predicted|)/|predicted|`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub relative_deviation: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub snr: Option<f64>,
    /// Median readout floor next to the line, referred to force, N.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise_floor_force_n: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioReport {
    pub provenance: Provenance,
    pub summary: RunSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference: Option<Reference>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exponent: Option<ExponentEstimate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub resonance: Option<ResonanceEstimate>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub lines: Vec<LineReport>,
}

impl ScenarioReport {
    pub fn to_toml(&self) -> String {
        super::emit::to_document(self)
    }

    pub fn line(&self, line: Line) -> Option<&LineReport> {
        self.lines.iter().find(|l| l.line == line.label())
    }

    /// Measured `ω_p` force over the mean measured sideband force.
    pub fn wp_to_sideband_ratio(&self) -> Option<f64> {
        let wp = self.line(Line::Wp)?.measured_force_n?;
        Some(wp / self.summary.sideband_force_n?)
    }

    /// Fixed-column text table of the lines.
    pub fn line_table(&self) -> String {
        let fmt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:.6e}"));
        let mut out = String::from("line\tfrequency_hz\tpredicted_n\toracle_n\tmeasured_n\trelative_deviation\tsnr\n");
        for l in &self.lines {
            out.push_str(&format!(
                "{}\t{:.3}\t{}\t{:.6e}\t{}\t{}\t{}\n",
                l.line,
                l.frequency_hz,
                fmt(l.predicted_force_n),
                l.oracle_force_n,
                fmt(l.measured_force_n),
                fmt(l.relative_deviation),
                fmt(l.snr),
            ));
        }
        out
    }
}

/// Output of one end-to-end run.
#[derive(Debug, Clone)]
pub struct ScenarioRun {
    pub report: ScenarioReport,
    /// Displacement spectrum as configured (vector or RMS average).
    pub spectrum: SpectrumEstimate,
    /// RMS average of the same segments.
    pub rms_spectrum: SpectrumEstimate,
}

/// Force → resonator → tunneling readout → spectra → line analysis.
///
/// The junction sees the resonator position about its mean (the setpoint
/// tracks the static deflection); the readout is linearized by inverting
/// the exponential and the mean restored.
pub fn run_scenario(s: &Scenario) -> Result<ScenarioRun> {
    let fs = s.sampling.sample_rate;
    let total = s.sampling.total_samples();
    let settle = s.sampling.settle_samples;
    let duration = total as f64 / fs;
    let drive = &s.drive;

    let mut force = match &s.law {
        Some(law) => exact_force_series(law, drive, fs, duration)?,
        None => vec![0.0; total],
    };
    if force.len() != total {
        return Err(config(format!(
            "record of {duration} s does not hold a whole number of samples"
        )));
    }
    if s.force_noise > 0.0 {
        let sigma = s.force_noise * (fs / 2.0).sqrt();
        for (f, n) in force.iter_mut().zip(white_noise(sigma, total, s.seed(), FORCE_STREAM)) {
            *f += n;
        }
    }
    let response = simulate_displacement(&s.resonator, &force, fs)?;
    drop(force);

    let (cr, cp) = (drive.nu_r() / fs, drive.nu_p() / fs);
    let position: Vec<f64> = (settle..total)
        .map(|i| drive.x_r * sampled_cos(cr, i) + response[i] + s.contamination * sampled_cos(cp, i))
        .collect();
    let max_response = response[settle..].iter().fold(0.0f64, |m, x| m.max(x.abs()));
    drop(response);

    let mean = position.iter().sum::<f64>() / position.len() as f64;
    let centred: Vec<f64> = position.iter().map(|x| x - mean).collect();
    drop(position);
    let current = readout_series(&s.junction, &s.noise, &centred, fs)?;
    drop(centred);
    let recovered: Vec<f64> = current
        .iter()
        .map(|&i| s.junction.displacement_from_current(i, f64::MIN_POSITIVE) + mean)
        .collect();
    drop(current);

    let segments = segment_spectra(&recovered, fs, s.sampling.segment_samples, s.analysis.window)?;
    let rms_spectrum = rms_average(&segments)?;
    let spectrum = match s.analysis.averaging {
        AveragingMode::Vector => vector_average(&segments)?,
        AveragingMode::Rms => rms_spectrum.clone(),
    };
    drop(segments);

    let resonance = if s.analysis.estimate_resonance {
        Some(estimate_resonance(&rms_spectrum)?)
    } else {
        None
    };

    let (lines, reference, exponent) = match &s.law {
        Some(law) => analyse_lines(s, law, &spectrum)?,
        None => (Vec::new(), None, None),
    };
    let sideband_force = mean_of(
        Line::SIDEBANDS
            .iter()
            .map(|&l| find(&lines, l).and_then(|r| r.measured_force_n)),
    );
    let sideband_snr = mean_of(Line::SIDEBANDS.iter().map(|&l| find(&lines, l).and_then(|r| r.snr)));
    let min_gap = drive.d0 - drive.x_r - drive.x_p;

    let report = ScenarioReport {
        provenance: Provenance::of(s),
        summary: RunSummary {
            law: s.config.force.law.clone(),
            exponent_n: s.law.as_ref().map_or(0.0, ForceLaw::exponent),
            gap_d0_m: drive.d0,
            relative_resonator_amplitude_a: drive.a(),
            relative_plate_amplitude_b: drive.b(),
            sample_rate_hz: fs,
            resolution_hz: spectrum.resolution,
            segment_samples: s.sampling.segment_samples,
            segments: s.sampling.segments,
            settle_samples: settle,
            window: s.analysis.window.label().to_string(),
            averaging: s.analysis.averaging,
            sideband_force_n: sideband_force,
            sideband_snr,
            max_displacement_over_gap: max_response / drive.d0,
            within_validity: s
                .law
                .as_ref()
                .and_then(ForceLaw::validity_floor)
                .is_none_or(|floor| min_gap >= floor),
        },
        reference,
        exponent,
        resonance,
        lines,
    };
    Ok(ScenarioRun {
        report,
        spectrum,
        rms_spectrum,
    })
}

fn find(lines: &[LineReport], line: Line) -> Option<&LineReport> {
    lines.iter().find(|l| l.line == line.label())
}

fn mean_of(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let values: Option<Vec<f64>> = values.collect();
    let values = values?;
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

type LineAnalysis = (Vec<LineReport>, Option<Reference>, Option<ExponentEstimate>);

fn analyse_lines(s: &Scenario, law: &ForceLaw, spectrum: &SpectrumEstimate) -> Result<LineAnalysis> {
    let drive = &s.drive;
    let fs = s.sampling.sample_rate;
    let n = law.exponent();
    let static_force = law.signed_force_unchecked(drive.d0);
    let predicted = perturbative_components(n, static_force, drive, s.analysis.order);
    let period = drive.common_period().expect("validated drive has a common period");
    let one_period = exact_force_series(law, drive, fs, period)?;
    let known: Vec<f64> = Line::ALL.iter().map(|l| l.frequency_hz(drive)).collect();
    let df = spectrum.resolution;
    let band_width = s.analysis.noise_band_fraction * drive.nu_p().min(drive.nu_r());

    let mut lines = Vec::with_capacity(Line::ALL.len());
    for line in Line::ALL {
        let f = line.frequency_hz(drive);
        let h = transfer_function(&s.resonator, line.angular_frequency(drive));
        let oracle = fourier_oracle(&one_period, fs, f)?.re;
        let z = spectrum.amplitude_at(f)?;
        let masked = s.analysis.averaging == AveragingMode::Rms && line == Line::Wr && drive.x_r > 0.0;
        let measured = match (s.analysis.averaging, line) {
            (AveragingMode::Vector, Line::Wr) => (z - drive.x_r) / h,
            (AveragingMode::Vector, _) => z / h,
            (AveragingMode::Rms, _) => Complex64::new(z.norm() / h.norm(), 0.0),
        };
        let measured_force = (!masked).then(|| measured.norm());
        let phase = (s.analysis.averaging == AveragingMode::Vector && line != Line::Dc).then(|| measured.arg());
        let prediction = predicted.signed(line);
        let deviation = match (prediction, measured_force) {
            (Some(p), Some(m)) if p != 0.0 => Some((m - p.abs()) / p.abs()),
            _ => None,
        };
        let (snr, floor) = if line == Line::Dc {
            (None, None)
        } else {
            let band = NoiseBand::new(f + 2.0 * df, f + band_width);
            if band.high >= fs / 2.0 {
                return Err(config(format!("noise band above the {line} line reaches Nyquist")));
            }
            let floor = noise_floor(spectrum, band)?;
            (Some(line_snr(spectrum, f, band, &known)?), Some(floor / h.norm()))
        };
        lines.push(LineReport {
            line: line.label().to_string(),
            frequency_hz: f,
            predicted_force_n: prediction,
            oracle_force_n: oracle,
            measured_force_n: measured_force,
            measured_phase_rad: phase,
            relative_deviation: deviation,
            snr,
            noise_floor_force_n: floor,
        });
    }

    let area = s.plate_area();
    let constants = s.constants();
    let reference = Reference {
        static_force_n: static_force,
        suppression_factor: suppression_factor(drive),
        equivalent_voltage_v: equivalent_voltage(drive.d0, &constants)?,
        leading_order_sideband_n: match law {
            ForceLaw::Electrostatic { bias_voltage, .. } => Some(electrostatic_sideband(
                *bias_voltage,
                drive.d0,
                drive.x_r,
                drive.x_p,
                area.unwrap_or_default(),
                &constants,
            )?),
            _ => None,
        },
        casimir_sideband_n: match law {
            ForceLaw::Casimir { .. } => Some(casimir_sideband(
                drive.d0,
                drive.x_r,
                drive.x_p,
                area.unwrap_or_default(),
                &constants,
            )?),
            _ => None,
        },
    };

    let exponent = exponent_from_lines(&lines, drive.d0 / drive.x_r)?;
    Ok((lines, Some(reference), exponent))
}

/// Exponent estimate from the measured `ω_p` and sideband lines of a
/// report, given `d₀/x_r`. `None` when any of the lines is missing or zero.
pub fn exponent_from_lines(lines: &[LineReport], d0_over_xr: f64) -> Result<Option<ExponentEstimate>> {
    if !(d0_over_xr.is_finite() && d0_over_xr > 0.0) {
        return Ok(None);
    }
    let wp = find(lines, Line::Wp);
    let Some(sideband) = mean_of(
        Line::SIDEBANDS
            .iter()
            .map(|&l| find(lines, l).and_then(|r| r.measured_force_n)),
    ) else {
        return Ok(None);
    };
    let Some(wp_force) = wp.and_then(|r| r.measured_force_n) else {
        return Ok(None);
    };
    if !(sideband > 0.0 && wp_force > 0.0) {
        return Ok(None);
    }
    let estimate = estimate_exponent(wp_force / sideband, d0_over_xr)?;
    let snr_wp = wp.and_then(|r| r.snr);
    let snr_sb = mean_of(Line::SIDEBANDS.iter().map(|&l| find(lines, l).and_then(|r| r.snr)));
    Ok(Some(match (snr_wp, snr_sb) {
        (Some(p), Some(sb)) => estimate.with_line_snrs(p, sb),
        _ => estimate,
    }))
}
