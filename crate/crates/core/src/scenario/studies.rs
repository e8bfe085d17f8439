use rayon::prelude::*;
use serde::Serialize;

use crate::error::{config, domain, Result};
use crate::force_models::{casimir_sideband, electrostatic_sideband, equivalent_voltage, ForceLaw};
use crate::inference::{
    calibrate, detectability_range, CalibrationGeometry, CalibrationPoint, ExponentEstimate, SnrOneVoltage,
    REPORTED_SNR_ONE_VOLTAGE,
};
use crate::modulation::{casimir_table_coefficient, line_coefficient, ExpansionOrder, Line};

use super::config::Scenario;
use super::pipeline::{exponent_from_lines, run_scenario, Provenance, ScenarioReport};

/// One rung of a bias ladder, forces referred through `1/H(ω)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Rung {
    pub bias_v_volts: f64,
    pub sideband_force_n: f64,
    pub noise_floor_force_n: f64,
    pub snr: f64,
    pub wp_force_n: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationSummary {
    pub xr_over_d0: f64,
    pub noise_equivalent_force_n: f64,
    /// Absent when the ladder was noise-free.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub snr_one_voltage_v: Option<f64>,
    pub noise_free: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fitted_bias_exponent: Option<f64>,
    pub points_used: usize,
    /// Reference hardware value for comparison; not derived here.
    pub reported_snr_one_voltage_v: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationReport {
    pub provenance: Provenance,
    pub result: CalibrationSummary,
    pub rungs: Vec<Rung>,
}

impl CalibrationReport {
    pub fn to_toml(&self) -> String {
        super::emit::to_document(self)
    }

    pub fn table(&self) -> String {
        let mut out = String::from("bias_v\tsideband_force_n\tnoise_floor_force_n\tsnr\twp_force_n\n");
        for r in &self.rungs {
            out.push_str(&format!(
                "{:.3}\t{:.6e}\t{:.6e}\t{:.3}\t{:.6e}\n",
                r.bias_v_volts, r.sideband_force_n, r.noise_floor_force_n, r.snr, r.wp_force_n
            ));
        }
        let r = &self.result;
        out.push_str(&format!("# xr_over_d0\t{:.6e}\n", r.xr_over_d0));
        out.push_str(&format!(
            "# noise_equivalent_force_n\t{:.6e}\n",
            r.noise_equivalent_force_n
        ));
        match r.snr_one_voltage_v {
            Some(v) => out.push_str(&format!("# snr_one_voltage_v\t{v:.3}\n")),
            None => out.push_str("# snr_one_voltage_v\tnoise-free\n"),
        }
        out
    }
}

fn with_bias(s: &Scenario, bias: f64) -> Result<Scenario> {
    let mut config = s.config.clone();
    config.force.bias_v_volts = Some(bias);
    Scenario::from_config(config).map_err(|d| domain(d.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")))
}

/// Calibration point of one electrostatic run, taken from whichever
/// sideband stands further above its floor.
pub fn calibration_point(report: &ScenarioReport, bias: f64) -> Result<CalibrationPoint> {
    let best = Line::SIDEBANDS
        .iter()
        .filter_map(|&l| report.line(l))
        .filter(|r| r.measured_force_n.is_some() && r.noise_floor_force_n.is_some())
        .max_by(|a, b| a.snr.unwrap_or(0.0).total_cmp(&b.snr.unwrap_or(0.0)))
        .ok_or_else(|| domain("run produced no sideband measurement"))?;
    Ok(CalibrationPoint {
        bias_voltage: bias,
        sideband_force: best.measured_force_n.unwrap_or_default(),
        noise_floor: best.noise_floor_force_n.unwrap_or_default(),
        wp_force: report.line(Line::Wp).and_then(|r| r.measured_force_n),
    })
}

/// Runs the electrostatic scenario at every voltage of the configured
/// ladder and calibrates against the results. Rung `i` uses seed `seed + i`.
pub fn run_calibration(s: &Scenario) -> Result<CalibrationReport> {
    if !matches!(s.law, Some(ForceLaw::Electrostatic { .. })) {
        return Err(config("calibrate needs force.law = \"electrostatic\""));
    }
    let ladder = s
        .config
        .calibrate
        .as_ref()
        .map(|c| c.bias_ladder_volts.clone())
        .ok_or_else(|| config("calibrate needs a [calibrate] section with bias_ladder_volts"))?;
    let points: Vec<CalibrationPoint> = ladder
        .par_iter()
        .enumerate()
        .map(|(i, &v)| {
            let rung = with_bias(s, v)?.with_seed(s.seed().wrapping_add(i as u64));
            calibration_point(&run_scenario(&rung)?.report, v)
        })
        .collect::<Result<_>>()?;
    let geometry = CalibrationGeometry {
        d0: s.drive.d0,
        x_r: s.drive.x_r,
        x_p: s.drive.x_p,
        area: s.plate_area().unwrap_or_default(),
        constants: s.constants(),
    };
    let result = calibrate(&points, &geometry)?;
    Ok(CalibrationReport {
        provenance: Provenance::of(s),
        result: CalibrationSummary {
            xr_over_d0: result.xr_over_d0,
            noise_equivalent_force_n: result.noise_equivalent_force,
            snr_one_voltage_v: result.snr_one_voltage.volts(),
            noise_free: result.snr_one_voltage == SnrOneVoltage::NoiseFree,
            fitted_bias_exponent: result.fitted_exponent,
            points_used: result.points_used,
            reported_snr_one_voltage_v: REPORTED_SNR_ONE_VOLTAGE,
        },
        rungs: points
            .iter()
            .map(|p| Rung {
                bias_v_volts: p.bias_voltage,
                sideband_force_n: p.sideband_force,
                noise_floor_force_n: p.noise_floor,
                snr: p.snr(),
                wp_force_n: p.wp_force.unwrap_or(0.0),
            })
            .collect(),
    })
}

/// One grid point of a detectability sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub gap_d0_m: f64,
    pub bias_v_volts: f64,
    pub noise_force_n: f64,
    pub leading_order_sideband_n: f64,
    pub casimir_sideband_n: f64,
    pub electrostatic_snr: f64,
    pub casimir_snr: f64,
    pub casimir_detectable: bool,
    pub max_casimir_gap_m: f64,
    pub equivalent_voltage_v: f64,
}

/// Evaluates every `(d₀, V, F_noise)` point of the configured grid with the
/// scenario's relative modulations `a`, `b` held fixed.
pub fn run_sweep(s: &Scenario) -> Result<Vec<SweepRow>> {
    let sweep = s
        .config
        .sweep
        .as_ref()
        .ok_or_else(|| config("sweep needs a [sweep] section"))?;
    let area = s.plate_area().ok_or_else(|| config("sweep needs force.area_s_m2"))?;
    let constants = s.constants();
    let (a, b) = (s.drive.a(), s.drive.b());
    let grid: Vec<(f64, f64, f64)> = sweep
        .gap_d0_m
        .iter()
        .flat_map(|&d| {
            sweep
                .bias_v_volts
                .iter()
                .flat_map(move |&v| sweep.noise_force_n.iter().map(move |&f| (d, v, f)))
        })
        .collect();
    grid.par_iter()
        .map(|&(d0, v, noise)| {
            let (x_r, x_p) = (a * d0, b * d0);
            let leading = electrostatic_sideband(v, d0, x_r, x_p, area, &constants)?;
            let cas = casimir_sideband(d0, x_r, x_p, area, &constants)?;
            Ok(SweepRow {
                gap_d0_m: d0,
                bias_v_volts: v,
                noise_force_n: noise,
                leading_order_sideband_n: leading,
                casimir_sideband_n: cas,
                electrostatic_snr: leading / noise,
                casimir_snr: cas / noise,
                casimir_detectable: cas >= noise,
                max_casimir_gap_m: detectability_range(noise, area, a, b, &constants)?,
                equivalent_voltage_v: equivalent_voltage(d0, &constants)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub provenance: Provenance,
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    pub fn to_toml(&self) -> String {
        super::emit::to_document(self)
    }

    pub fn table(&self) -> String {
        sweep_table(&self.rows)
    }
}

pub fn sweep_table(rows: &[SweepRow]) -> String {
    let mut out = String::from(
        "gap_d0_m\tbias_v\tnoise_force_n\tleading_order_sideband_n\tcasimir_sideband_n\telectrostatic_snr\tcasimir_snr\tcasimir_detectable\tmax_casimir_gap_m\tequivalent_voltage_v\n",
    );
    for r in rows {
        out.push_str(&format!(
            "{:.6e}\t{:.3}\t{:.6e}\t{:.6e}\t{:.6e}\t{:.6e}\t{:.6e}\t{}\t{:.6e}\t{:.6e}\n",
            r.gap_d0_m,
            r.bias_v_volts,
            r.noise_force_n,
            r.leading_order_sideband_n,
            r.casimir_sideband_n,
            r.electrostatic_snr,
            r.casimir_snr,
            r.casimir_detectable,
            r.max_casimir_gap_m,
            r.equivalent_voltage_v,
        ));
    }
    out
}

/// Where the `d₀/x_r` used by an exponent estimate came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum GeometrySource {
    Config,
    Calibration,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateSummary {
    pub true_exponent_n: f64,
    pub n_hat: f64,
    pub ratio: f64,
    pub half_width: f64,
    pub d0_over_xr: f64,
    pub d0_over_xr_source: GeometrySource,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateReport {
    pub provenance: Provenance,
    pub estimate: EstimateSummary,
}

impl EstimateReport {
    pub fn to_toml(&self) -> String {
        super::emit::to_document(self)
    }

    pub fn table(&self) -> String {
        let e = &self.estimate;
        format!(
            "n_hat\thalf_width\tratio\td0_over_xr\tsource\ttrue_n\n{:.6}\t{:.6}\t{:.6e}\t{:.6e}\t{}\t{}\n",
            e.n_hat,
            e.half_width,
            e.ratio,
            e.d0_over_xr,
            match e.d0_over_xr_source {
                GeometrySource::Config => "config",
                GeometrySource::Calibration => "calibration",
            },
            e.true_exponent_n
        )
    }
}

/// `d₀/x_r` inferred from an electrostatic run through the `ω_p`-to-sideband
/// ratio of a `d⁻²` law: `x_r/d₀ = 2/(3·ratio)`.
pub fn infer_d0_over_xr(electrostatic: &ScenarioReport) -> Result<f64> {
    let ratio = electrostatic
        .wp_to_sideband_ratio()
        .ok_or_else(|| domain("calibration run produced no ω_p or sideband line"))?;
    Ok(1.5 * ratio)
}

/// Runs the scenario and estimates the force exponent. With an
/// `[estimate]` section, `d₀/x_r` comes from a parallel electrostatic run
/// on the same drive rather than from the config.
pub fn run_estimate(s: &Scenario) -> Result<EstimateReport> {
    let law = s.law.as_ref().ok_or_else(|| config("estimate-n needs a force law"))?;
    let (main, d0_over_xr, source) = match &s.config.estimate {
        None => (run_scenario(s)?, s.drive.d0 / s.drive.x_r, GeometrySource::Config),
        Some(est) => {
            let mut cal = s.config.clone();
            cal.force.law = "electrostatic".into();
            cal.force.bias_v_volts = Some(est.calibration_bias_v_volts);
            cal.force.area_s_m2 = est.calibration_area_s_m2.or(cal.force.area_s_m2);
            cal.estimate = None;
            let cal = Scenario::from_config(cal).map_err(|d| config(d[0].to_string()))?;
            let (main, cal_run) = rayon::join(|| run_scenario(s), || run_scenario(&cal));
            (main?, infer_d0_over_xr(&cal_run?.report)?, GeometrySource::Calibration)
        }
    };
    let estimate: ExponentEstimate = exponent_from_lines(&main.report.lines, d0_over_xr)?
        .ok_or_else(|| domain("run produced no ω_p or sideband line"))?;
    Ok(EstimateReport {
        provenance: Provenance::of(s),
        estimate: EstimateSummary {
            true_exponent_n: law.exponent(),
            n_hat: estimate.n_hat,
            ratio: estimate.ratio,
            half_width: estimate.half_width,
            d0_over_xr,
            d0_over_xr_source: source,
        },
    })
}

/// Signed coefficient table of the six dynamic lines. `literal` reads the
/// written-out `1/d⁴` table and requires `n = 4`.
pub fn coefficient_table(n: f64, a: f64, b: f64, order: ExpansionOrder, literal: bool) -> Result<String> {
    if !(n > 0.0 && a >= 0.0 && b >= 0.0) {
        return Err(domain("tables need n > 0 and non-negative a, b"));
    }
    if literal && n != 4.0 {
        return Err(domain("the literal table exists only for n = 4"));
    }
    let mut out = String::from("line\tcoefficient\n");
    for line in Line::DYNAMIC {
        let c = if literal {
            Some(casimir_table_coefficient(line, a, b))
        } else {
            line_coefficient(line, n, a, b, order).map(f64::abs)
        };
        if let Some(c) = c {
            out.push_str(&format!("{}\t{:.12e}\n", line.label(), c));
        }
    }
    Ok(out)
}
