//! Lumped mechanical resonator: force-to-displacement transfer function and
//! a fixed-step time-domain realisation of the same dynamics.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{config, domain, Result};
use crate::modulation::{ComponentSpectrum, DriveState};

/// Steel disk 6 mm across and 0.2 mm thick treated as a rigid lumped mass, kg.
pub const DEFAULT_EFFECTIVE_MASS: f64 = 4.4e-5;

/// Lowest sample rate accepted by [`simulate_displacement`], in units of ν_r.
pub const MIN_SAMPLES_PER_CYCLE: f64 = 20.0;

/// Largest ω₀·h used inside the integrator; sample intervals are split
/// into substeps until this holds.
const MAX_PHASE_STEP: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Resonator {
    /// kg
    pub effective_mass: f64,
    /// Hz
    pub resonance_frequency: f64,
    /// Dimensionless; `f64::INFINITY` removes damping.
    pub quality_factor: f64,
}

impl Resonator {
    pub fn new(effective_mass: f64, resonance_frequency: f64, quality_factor: f64) -> Result<Self> {
        let res = Self {
            effective_mass,
            resonance_frequency,
            quality_factor,
        };
        res.validate()?;
        Ok(res)
    }

    /// The calibration prototype: 19 kHz flexural mode with Q = 100.
    pub fn prototype() -> Self {
        Self {
            effective_mass: DEFAULT_EFFECTIVE_MASS,
            resonance_frequency: 19_000.0,
            quality_factor: 100.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.effective_mass.is_finite() && self.effective_mass > 0.0) {
            return Err(domain(format!(
                "effective mass must be positive, got {}",
                self.effective_mass
            )));
        }
        if !(self.resonance_frequency.is_finite() && self.resonance_frequency > 0.0) {
            return Err(domain(format!(
                "resonance frequency must be positive, got {}",
                self.resonance_frequency
            )));
        }
        if !(self.quality_factor > 0.0) {
            return Err(domain(format!(
                "quality factor must be positive, got {}",
                self.quality_factor
            )));
        }
        Ok(())
    }

    pub fn omega0(&self) -> f64 {
        TAU * self.resonance_frequency
    }

    /// `k = m·ω₀²`, N/m.
    pub fn stiffness(&self) -> f64 {
        let w0 = self.omega0();
        self.effective_mass * w0 * w0
    }

    /// Viscous damping coefficient `m·ω₀/Q`, kg/s.
    pub fn damping(&self) -> f64 {
        self.effective_mass * self.omega0() / self.quality_factor
    }

    /// Time for the transient to decay by e⁻¹⁵ or more: `5·Q/ν_r`.
    pub fn ring_up_time(&self) -> f64 {
        5.0 * self.quality_factor / self.resonance_frequency
    }

    /// Energy decay time constant of the free response, s.
    pub fn decay_time(&self) -> f64 {
        self.quality_factor / (PI * self.resonance_frequency)
    }
}

/// `H(ω) = 1/(m·(ω₀² − ω² + i·ω₀·ω/Q))`, m/N. Negative `omega` gives the
/// conjugate.
pub fn transfer_function(res: &Resonator, omega: f64) -> Complex64 {
    let w0 = res.omega0();
    let denominator = Complex64::new(w0 * w0 - omega * omega, w0 * omega / res.quality_factor);
    1.0 / (denominator * res.effective_mass)
}

/// Displacement lines produced by the force lines in `force_spectrum`.
pub fn displacement_components(
    res: &Resonator,
    force_spectrum: &ComponentSpectrum,
    drive: &DriveState,
) -> ComponentSpectrum {
    let mut out = ComponentSpectrum::new(force_spectrum.order);
    for (line, force) in force_spectrum.iter() {
        out.insert(line, force * transfer_function(res, line.angular_frequency(drive)));
    }
    out
}

/// Four-point Lagrange interpolation of `samples` at fractional index `i + frac`.
fn interpolate(samples: &[f64], i: usize, frac: f64) -> f64 {
    if frac == 0.0 {
        return samples[i];
    }
    let last = samples.len() - 1;
    let at = |k: isize| samples[k.clamp(0, last as isize) as usize];
    let i = i as isize;
    let (p0, p1, p2, p3) = (at(i - 1), at(i), at(i + 1), at(i + 2));
    let t = frac;
    let w0 = -t * (t - 1.0) * (t - 2.0) / 6.0;
    let w1 = (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0;
    let w2 = -(t + 1.0) * t * (t - 2.0) / 2.0;
    let w3 = (t + 1.0) * t * (t - 1.0) / 6.0;
    w0 * p0 + w1 * p1 + w2 * p2 + w3 * p3
}

/// Integrates `m·ẍ + (m·ω₀/Q)·ẋ + k·x = F(t)` from rest with classical
/// Runge–Kutta, returning `x` at each force sample.
///
/// The force is interpolated between samples with a cubic; each sample
/// interval is split into as many substeps as needed to keep `ω₀·h ≤ 0.1`.
pub fn simulate_displacement(res: &Resonator, force: &[f64], fs: f64) -> Result<Vec<f64>> {
    res.validate()?;
    let min_fs = MIN_SAMPLES_PER_CYCLE * res.resonance_frequency;
    if !(fs >= min_fs) {
        return Err(config(format!(
            "sample rate {fs} Hz is too coarse for a {} Hz resonator; use at least {min_fs} Hz",
            res.resonance_frequency
        )));
    }
    if force.is_empty() {
        return Ok(Vec::new());
    }
    let w0 = res.omega0();
    let substeps = (w0 / (MAX_PHASE_STEP * fs)).ceil().max(1.0) as usize;
    let h = 1.0 / (fs * substeps as f64);
    let inv_mass = 1.0 / res.effective_mass;
    let gamma = w0 / res.quality_factor;
    let w0_sq = w0 * w0;
    let accel = |x: f64, v: f64, f: f64| f * inv_mass - gamma * v - w0_sq * x;

    let mut out = Vec::with_capacity(force.len());
    let (mut x, mut v) = (0.0f64, 0.0f64);
    out.push(x);
    let sub = substeps as f64;
    for i in 0..force.len() - 1 {
        for s in 0..substeps {
            let t0 = s as f64 / sub;
            let f_start = interpolate(force, i, t0);
            let f_mid = interpolate(force, i, t0 + 0.5 / sub);
            let f_end = if s + 1 == substeps {
                force[i + 1]
            } else {
                interpolate(force, i, (s + 1) as f64 / sub)
            };
            let k1x = v;
            let k1v = accel(x, v, f_start);
            let k2x = v + 0.5 * h * k1v;
            let k2v = accel(x + 0.5 * h * k1x, k2x, f_mid);
            let k3x = v + 0.5 * h * k2v;
            let k3v = accel(x + 0.5 * h * k2x, k3x, f_mid);
            let k4x = v + h * k3v;
            let k4v = accel(x + h * k3x, k4x, f_end);
            x += h / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
            v += h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
        }
        out.push(x);
    }
    if !x.is_finite() {
        return Err(config(format!(
            "integration diverged; raise the sample rate above {fs} Hz"
        )));
    }
    Ok(out)
}
