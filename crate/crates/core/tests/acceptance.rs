//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Run with `cargo test -p tunnelsense-core --test acceptance`.

mod common;

use std::f64::consts::TAU;
use std::time::Instant;

use num_complex::Complex64;
use rayon::prelude::*;
use toml::Value;

use common::{rel, variant};
use tunnelsense_core::force_models::{casimir_sideband, electrostatic_sideband, equivalent_voltage};
use tunnelsense_core::inference::{calibrate, detectability_range, CalibrationGeometry, CalibrationPoint};
use tunnelsense_core::modulation::{
    casimir_table_coefficient, exact_force_series, fourier_oracle, line_coefficient, perturbative_components,
};
use tunnelsense_core::resonator::{simulate_displacement, transfer_function};
use tunnelsense_core::scenario::run_scenario;
use tunnelsense_core::spectral::{noise_floor, segment_spectra, vector_average, NoiseBand};
use tunnelsense_core::transducer::white_noise;
use tunnelsense_core::{DriveState, ExpansionOrder, ForceLaw, Line, PhysicalConstants, Resonator, Scenario, Window};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn equivalent_voltage_at_one_micron() -> Outcome {
    let v = equivalent_voltage(1e-6, &PhysicalConstants::default()).map_err(|e| e.to_string())?;
    check(
        rel(v, 5.42e-2) <= 0.005 && rel(v, 5e-2) <= 0.10,
        format!("V_eq(1 um) = {:.4} mV", v * 1e3),
    )
}

fn sideband_at_300v() -> Outcome {
    let f = electrostatic_sideband(300.0, 1e-4, 1e-9, 2e-7, 2.83e-5, &PhysicalConstants::default())
        .map_err(|e| e.to_string())?;
    check(
        rel(f, 2.25e-11) <= 0.005 && rel(f, 2e-11) <= 0.15,
        format!("sideband(300 V) = {f:.4e} N"),
    )
}

fn lower_sideband(s: &Scenario) -> Result<f64, String> {
    let run = run_scenario(s).map_err(|e| e.to_string())?;
    run.report
        .line(Line::WrMinusWp)
        .and_then(|l| l.measured_force_n)
        .ok_or_else(|| "lower sideband not measured".into())
}

fn quadratic_bias_scaling() -> Outcome {
    let coherent = |name: &str| {
        variant(
            name,
            &[
                ("analysis.averaging", Value::from("vector")),
                ("sampling.segments", Value::from(400)),
            ],
        )
    };
    let (high, low) = (coherent("fig4c_300V"), coherent("fig4b_150V"));
    let (high, low) = rayon::join(|| lower_sideband(&high), || lower_sideband(&low));
    let ratio = high? / low?;
    check(rel(ratio, 4.0) <= 0.05, format!("F(300 V)/F(150 V) = {ratio:.3}"))
}

fn table_verification() -> Outcome {
    let fs = 400_000.0;
    let mut worst = 0.0f64;
    for n in [1.0, 2.0, 3.0, 4.0, 6.0] {
        for a in [1e-3, 1e-2] {
            for b in [1e-3, 1e-2] {
                let d0 = 1e-6;
                let drive = DriveState::from_hz(d0, a * d0, 19_550.0, b * d0, 1_000.0).map_err(|e| e.to_string())?;
                let law = ForceLaw::power_law(1e-20, n).map_err(|e| e.to_string())?;
                let period = drive.common_period().ok_or("no common period")?;
                let series = exact_force_series(&law, &drive, fs, period).map_err(|e| e.to_string())?;
                let static_force = law.strength() / d0.powf(n);
                let table = perturbative_components(n, static_force, &drive, ExpansionOrder::Second);
                for line in Line::DYNAMIC {
                    let predicted = table.magnitude(line).ok_or("line missing from table")?;
                    let oracle = fourier_oracle(&series, fs, line.frequency_hz(&drive))
                        .map_err(|e| e.to_string())?
                        .norm();
                    let err = rel(predicted, oracle);
                    worst = worst.max(err / (3.0 * a.max(b)));
                    if err > 3.0 * a.max(b) {
                        return Err(format!("n={n} a={a} b={b} {}: {err:.2e}", line.label()));
                    }
                }
            }
        }
    }
    let (a, b) = (1e-5, 2e-3);
    let table_i = [
        (Line::Wp, 4.0 * b),
        (Line::TwoWp, 5.0 * b * b),
        (Line::WrMinusWp, 10.0 * a * b),
        (Line::Wr, 4.0 * a),
        (Line::WrPlusWp, 10.0 * a * b),
        (Line::TwoWr, 5.0 * a * a),
    ];
    for (line, want) in table_i {
        let generic = line_coefficient(line, 4.0, a, b, ExpansionOrder::Second).ok_or("line missing")?;
        let literal = casimir_table_coefficient(line, a, b);
        if generic.abs() != want || literal.abs() != want {
            return Err(format!("n=4 {}: {generic:e} / {literal:e} vs {want:e}", line.label()));
        }
    }
    Ok(format!("worst error {worst:.2} of bound; n=4 coefficients exact"))
}

fn resonance_metrology() -> Outcome {
    let run = run_scenario(&variant("fig3_whitenoise", &[])).map_err(|e| e.to_string())?;
    let r = run.report.resonance.ok_or("no resonance estimate")?;
    check(
        rel(r.frequency, 19_000.0) <= 0.005 && rel(r.quality_factor, 100.0) <= 0.10,
        format!("nu = {:.1} Hz, Q = {:.1}", r.frequency, r.quality_factor),
    )
}

fn resonance_gain() -> Outcome {
    let res = Resonator::new(4.4e-5, 19_000.0, 100.0).map_err(|e| e.to_string())?;
    let w0 = res.omega0();
    let analytic = transfer_function(&res, w0).norm() / transfer_function(&res, 0.0).norm();
    if (analytic - 100.0).abs() > 1e-9 * 100.0 {
        return Err(format!("analytic gain {analytic}"));
    }

    let fs = 400_000.0;
    let settle = (res.ring_up_time() * fs).ceil() as usize * 2;
    let window = 40_000;
    let response = |f: f64| -> Result<f64, String> {
        let force: Vec<f64> = (0..settle + window).map(|i| (TAU * f * i as f64 / fs).cos()).collect();
        let x = simulate_displacement(&res, &force, fs).map_err(|e| e.to_string())?;
        Ok(fourier_oracle(&x[settle..], fs, f).map_err(|e| e.to_string())?.norm())
    };
    let simulated = response(19_000.0)? / response(190.0)?;
    let quasi_static = transfer_function(&res, TAU * 190.0).norm() / transfer_function(&res, 0.0).norm();
    let gain = simulated * quasi_static;
    check(
        rel(gain, 100.0) <= 0.02,
        format!("analytic {analytic:.9}, time-domain {gain:.3}"),
    )
}

fn exponent_discrimination() -> Outcome {
    let silent = |name: &str| variant(name, &[("noise.current_white_a_per_rthz", Value::from(0.0))]);
    let mut detail = Vec::new();
    for (name, n) in [("casimir_1um", 4.0), ("powerlaw_n2", 2.0)] {
        let run = run_scenario(&silent(name)).map_err(|e| e.to_string())?;
        let n_hat = run.report.exponent.ok_or("no exponent")?.n_hat;
        if (n_hat - n).abs() > 0.05 {
            return Err(format!("noiseless {name}: n_hat = {n_hat:.4}"));
        }
        detail.push(format!("noiseless {n_hat:.3}"));
    }

    let seeds = 20u64;
    let study = |name: &str, first_seed: u64| -> Result<(f64, f64, f64), String> {
        let base = variant(name, &[]);
        let runs: Vec<Result<(f64, f64), String>> = (0..seeds)
            .into_par_iter()
            .map(|k| {
                let report = run_scenario(&base.with_seed(first_seed + k))
                    .map_err(|e| e.to_string())?
                    .report;
                let snr = report.summary.sideband_snr.ok_or("no sideband SNR")?;
                let n_hat = report.exponent.ok_or("no exponent")?.n_hat;
                Ok((n_hat, snr))
            })
            .collect();
        let runs = runs.into_iter().collect::<Result<Vec<_>, _>>()?;
        let lo = runs.iter().map(|r| r.0).fold(f64::INFINITY, f64::min);
        let hi = runs.iter().map(|r| r.0).fold(f64::NEG_INFINITY, f64::max);
        let snr = runs.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
        Ok((lo, hi, snr))
    };
    let (n4, n2) = rayon::join(|| study("casimir_1um", 1_000), || study("powerlaw_n2", 2_000));
    let ((lo4, hi4, snr4), (lo2, hi2, snr2)) = (n4?, n2?);
    detail.push(format!("n=4 in [{lo4:.2}, {hi4:.2}], n=2 in [{lo2:.2}, {hi2:.2}]"));
    check(
        snr4 >= 10.0 && snr2 >= 10.0 && hi2 < lo4,
        format!("{}; min SNR {snr4:.1} / {snr2:.1}", detail.join(", ")),
    )
}

fn vector_averaging() -> Outcome {
    let (fs, len, segments) = (100_000.0, 10_000, 100);
    let (tone_hz, amplitude, sigma) = (1_230.0, 1e-6, 1e-6);
    let mut series = white_noise(sigma, len * segments, 11, 0);
    for (i, x) in series.iter_mut().enumerate() {
        *x += amplitude * (TAU * tone_hz * i as f64 / fs).cos();
    }
    let spectra = segment_spectra(&series, fs, len, Window::Rectangular).map_err(|e| e.to_string())?;
    let band = NoiseBand::new(2_000.0, 20_000.0);
    let single = spectra
        .iter()
        .map(|s| noise_floor(s, band))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    let single = single.iter().sum::<f64>() / single.len() as f64;
    let averaged = vector_average(&spectra).map_err(|e| e.to_string())?;
    let floor = noise_floor(&averaged, band).map_err(|e| e.to_string())?;
    let tone: Complex64 = averaged.amplitude_at(tone_hz).map_err(|e| e.to_string())?;
    let reduction = single / floor;
    check(
        rel(reduction, 10.0) <= 0.20 && rel(tone.norm(), amplitude) <= 0.01,
        format!(
            "floor reduced {reduction:.2}x, tone {:.4}% off",
            100.0 * rel(tone.norm(), amplitude)
        ),
    )
}

fn calibration_round_trip() -> Outcome {
    let geometry = CalibrationGeometry {
        d0: 1e-4,
        x_r: 1e-9,
        x_p: 2e-7,
        area: 2.83e-5,
        constants: PhysicalConstants::default(),
    };
    let sideband = |v: f64| {
        electrostatic_sideband(
            v,
            geometry.d0,
            geometry.x_r,
            geometry.x_p,
            geometry.area,
            &geometry.constants,
        )
        .unwrap()
    };
    let target_voltage = 70.0;
    let floor = sideband(target_voltage);
    let jitter = white_noise(0.02, 5, 5, 0);
    let points: Vec<CalibrationPoint> = [150.0, 225.0, 300.0, 375.0, 450.0]
        .iter()
        .zip(&jitter)
        .map(|(&v, j)| CalibrationPoint {
            bias_voltage: v,
            sideband_force: sideband(v) * (1.0 + j),
            noise_floor: floor * (1.0 - j),
            wp_force: None,
        })
        .collect();
    let result = calibrate(&points, &geometry).map_err(|e| e.to_string())?;
    let v1 = result.snr_one_voltage.volts().ok_or("no finite SNR=1 voltage")?;
    let regenerated = sideband(v1);
    if rel(regenerated, floor) > 0.05 {
        return Err(format!(
            "V(SNR=1) = {v1:.2} V regenerates {regenerated:.3e} vs {floor:.3e} N"
        ));
    }

    let c = PhysicalConstants::default();
    let (area, a, b) = (2.83e-5, 1e-3, 1e-3);
    let bisect = |noise: f64| {
        let excess = |d: f64| casimir_sideband(d, a * d, b * d, area, &c).unwrap() - noise;
        let (mut lo, mut hi) = (1e-12f64, 1.0f64);
        for _ in 0..200 {
            let mid = (lo * hi).sqrt();
            if excess(mid) >= 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        (lo * hi).sqrt()
    };
    let mut ranges = Vec::new();
    for noise in [1e-12, 1e-14, 1e-16] {
        let closed = detectability_range(noise, area, a, b, &c).map_err(|e| e.to_string())?;
        if rel(closed, bisect(noise)) > 1e-3 {
            return Err(format!("closed form {closed:e} vs bisection {:e}", bisect(noise)));
        }
        ranges.push(closed);
    }
    let scaling = ranges[1] / ranges[0];
    check(
        rel(scaling, 100f64.powf(0.25)) <= 1e-9 && rel(ranges[2] / ranges[1], scaling) <= 1e-9,
        format!("V(SNR=1) = {v1:.2} V (injected {target_voltage} V), range x{scaling:.4} per 100x floor"),
    )
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("equivalent voltage at 1 um", equivalent_voltage_at_one_micron),
        ("300 V sideband force", sideband_at_300v),
        ("quadratic bias scaling", quadratic_bias_scaling),
        ("line tables against oracle", table_verification),
        ("resonance metrology", resonance_metrology),
        ("resonance gain", resonance_gain),
        ("exponent discrimination", exponent_discrimination),
        ("vector averaging", vector_averaging),
        ("calibration round trip and detectability", calibration_round_trip),
    ];
    let mut failures = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {}: {name}: {detail} ({secs:.1} s)", i + 1),
            Err(detail) => {
                failures += 1;
                println!("FAIL {}: {name}: {detail} ({secs:.1} s)", i + 1);
            }
        }
    }
    if failures > 0 {
        std::process::exit(1);
    }
}
