mod common;

use toml::Value;

use common::{rel, variant};
use tunnelsense_core::resonator::simulate_displacement;
use tunnelsense_core::scenario::{run_scenario, BUILTIN_SCENARIOS};
use tunnelsense_core::spectral::{estimate_resonance, rms_average, segment_spectra};
use tunnelsense_core::transducer::{white_noise, PinkNoise};
use tunnelsense_core::{Line, Resonator, Scenario, Window};

#[test]
fn bundled_scenarios_parse() {
    for (name, text) in BUILTIN_SCENARIOS {
        Scenario::from_toml(text).unwrap_or_else(|e| panic!("{name}: {e}"));
    }
}

#[test]
fn noiseless_lines_match_the_oracle() {
    let s = variant("fig4c_300V", &[("noise.current_white_a_per_rthz", Value::from(0.0))]);
    let report = run_scenario(&s).unwrap().report;
    for line in [Line::Wp, Line::TwoWp, Line::WrMinusWp, Line::WrPlusWp] {
        let r = report.line(line).unwrap();
        let measured = r.measured_force_n.unwrap();
        assert!(
            rel(measured, r.oracle_force_n.abs()) < 1e-3,
            "{}: {measured:e} vs {:e}",
            r.line,
            r.oracle_force_n
        );
    }
    let reference = report.reference.unwrap();
    let sideband = report.summary.sideband_force_n.unwrap();
    assert!(rel(sideband, 3.0 * reference.leading_order_sideband_n.unwrap()) < 1e-3);
    assert!((report.exponent.unwrap().n_hat - 2.0).abs() < 0.01);
}

#[test]
fn runs_are_reproducible_per_seed() {
    let s = variant("casimir_1um", &[("sampling.segments", Value::from(4))]);
    let a = run_scenario(&s).unwrap().report.to_toml();
    let b = run_scenario(&s).unwrap().report.to_toml();
    assert_eq!(a, b);
    let c = run_scenario(&s.with_seed(99)).unwrap().report.to_toml();
    assert_ne!(a, c);
}

#[test]
fn doubling_the_bias_raises_the_coherent_sideband_snr_fourfold() {
    let coherent = |name: &str| {
        variant(
            name,
            &[
                ("analysis.averaging", Value::from("vector")),
                ("sampling.segments", Value::from(100)),
            ],
        )
    };
    let snr = |name: &str| {
        let report = run_scenario(&coherent(name)).unwrap().report;
        report.line(Line::WrMinusWp).unwrap().snr.unwrap()
    };
    let ratio = snr("fig4c_300V") / snr("fig4b_150V");
    assert!(rel(ratio, 4.0) < 0.2, "{ratio}");
}

#[test]
fn quality_factor_is_recovered_at_low_and_high_q() {
    let fs = 400_000.0;
    let len = 40_000;
    for (q, tolerance) in [(10.0, 0.15), (100.0, 0.10)] {
        let res = Resonator::new(4.4e-5, 19_000.0, q).unwrap();
        let settle = (res.ring_up_time() * fs).ceil() as usize;
        let force = white_noise(1.0, settle + 60 * len, 3, 0);
        let x = simulate_displacement(&res, &force, fs).unwrap();
        let spectra = segment_spectra(&x[settle..], fs, len, Window::Rectangular).unwrap();
        let est = estimate_resonance(&rms_average(&spectra).unwrap()).unwrap();
        assert!(rel(est.frequency, 19_000.0) < 0.005, "Q={q}: {}", est.frequency);
        assert!(rel(est.quality_factor, q) < tolerance, "Q={q}: {}", est.quality_factor);
    }
}

#[test]
fn pink_noise_falls_as_one_over_f() {
    let fs = 10_000.0;
    let len = 10_000;
    let mut pink = PinkNoise::new(1.0, fs, 5);
    let series: Vec<f64> = (0..50 * len).map(|_| pink.next_sample()).collect();
    let spec = rms_average(&segment_spectra(&series, fs, len, Window::Rectangular).unwrap()).unwrap();
    let power = spec.bin_powers();
    let points: Vec<(f64, f64)> = (10..3000).map(|k| (spec.frequency(k).ln(), power[k].ln())).collect();
    let mx = points.iter().map(|p| p.0).sum::<f64>() / points.len() as f64;
    let my = points.iter().map(|p| p.1).sum::<f64>() / points.len() as f64;
    let slope = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
        / points.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    assert!((slope + 1.0).abs() < 0.1, "{slope}");
}
