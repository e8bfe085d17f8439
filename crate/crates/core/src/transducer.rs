//! Tunneling-current readout of the resonator position.
//!
//! The tip faces the resonator across a gap `s = s₀ − x`, so motion of the
//! resonator toward the tip (positive `x`) raises the current
//! `I = I₀·exp(−2κ(s − s₀))`. Additive current noise has a white part, a
//! 1/f part and an optional linear drift.

use std::f64::consts::{LN_10, PI};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Vacuum tunneling decay constant, about one inverse ångström, 1/m.
pub const DEFAULT_DECAY_CONSTANT: f64 = 1e10;

/// Displacement sensitivity of the readout chain, used as a reporting threshold, m.
pub const DEFAULT_SENSITIVITY_FLOOR: f64 = 1e-11;

/// Lowest corner frequency of the 1/f filter bank, Hz.
pub const PINK_LOWEST_CORNER: f64 = 0.01;

/// Filter-bank sections per decade of the 1/f generator.
pub const PINK_SECTIONS_PER_DECADE: f64 = 3.0;

const WHITE_STREAM: u64 = 1;
const PINK_STREAM: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TunnelingJunction {
    /// A
    pub setpoint_current: f64,
    /// m
    pub setpoint_gap: f64,
    /// κ, 1/m
    pub decay_constant: f64,
    /// m
    pub sensitivity_floor: f64,
}

impl TunnelingJunction {
    pub fn new(setpoint_current: f64, setpoint_gap: f64) -> Result<Self> {
        let j = Self {
            setpoint_current,
            setpoint_gap,
            decay_constant: DEFAULT_DECAY_CONSTANT,
            sensitivity_floor: DEFAULT_SENSITIVITY_FLOOR,
        };
        j.validate()?;
        Ok(j)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.setpoint_current.is_finite() && self.setpoint_current > 0.0) {
            return Err(domain("setpoint current must be positive"));
        }
        if !(self.setpoint_gap.is_finite() && self.setpoint_gap > 0.0) {
            return Err(domain("setpoint gap must be positive"));
        }
        if !(self.decay_constant.is_finite() && self.decay_constant > 0.0) {
            return Err(domain("decay constant must be positive"));
        }
        if !(self.sensitivity_floor >= 0.0) {
            return Err(domain("sensitivity floor must be non-negative"));
        }
        Ok(())
    }

    /// `dI/dx` at the setpoint, `2κ·I₀`, A/m.
    pub fn small_signal_gain(&self) -> f64 {
        2.0 * self.decay_constant * self.setpoint_current
    }

    /// Resonator displacement that produces `current`, inverting the
    /// exponential law. Non-positive currents are clamped to `floor`.
    pub fn displacement_from_current(&self, current: f64, floor: f64) -> f64 {
        (current.max(floor) / self.setpoint_current).ln() / (2.0 * self.decay_constant)
    }
}

/// `I₀·exp(−2κ(s − s₀))`.
pub fn current_from_gap(j: &TunnelingJunction, s: f64) -> Result<f64> {
    if !(s > 0.0) {
        return Err(domain(format!("tip gap closed: s = {s} m")));
    }
    Ok(j.setpoint_current * (-2.0 * j.decay_constant * (s - j.setpoint_gap)).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    /// One-sided white current density, A/√Hz.
    pub white_level: f64,
    /// 1/f amplitude density at 1 Hz, A/√Hz; the one-sided PSD is `level²/f`.
    pub pink_level: f64,
    /// A/s
    pub drift_rate: f64,
    pub seed: u64,
}

impl NoiseModel {
    pub fn silent(seed: u64) -> Self {
        Self {
            white_level: 0.0,
            pink_level: 0.0,
            drift_rate: 0.0,
            seed,
        }
    }

    pub fn white(white_level: f64, seed: u64) -> Self {
        Self {
            white_level,
            ..Self::silent(seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.white_level >= 0.0
            && self.pink_level >= 0.0
            && self.white_level.is_finite()
            && self.pink_level.is_finite())
        {
            return Err(domain("noise levels must be non-negative"));
        }
        if !self.drift_rate.is_finite() {
            return Err(domain("drift rate must be finite"));
        }
        Ok(())
    }

    /// Per-sample standard deviation of the white part at rate `fs`.
    pub fn white_sigma(&self, fs: f64) -> f64 {
        self.white_level * (fs / 2.0).sqrt()
    }

    /// Adds this model's noise and drift to `series` in place.
    pub fn apply(&self, series: &mut [f64], fs: f64) {
        if self.white_level > 0.0 {
            let sigma = self.white_sigma(fs);
            let mut rng = stream_rng(self.seed, WHITE_STREAM);
            for x in series.iter_mut() {
                let g: f64 = StandardNormal.sample(&mut rng);
                *x += sigma * g;
            }
        }
        if self.pink_level > 0.0 {
            let mut pink = PinkNoise::new(self.pink_level, fs, self.seed);
            for x in series.iter_mut() {
                *x += pink.next_sample();
            }
        }
        if self.drift_rate != 0.0 {
            for (i, x) in series.iter_mut().enumerate() {
                *x += self.drift_rate * i as f64 / fs;
            }
        }
    }
}

pub(crate) fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Gaussian white noise with the given per-sample deviation.
pub fn white_noise(sigma: f64, len: usize, seed: u64, stream: u64) -> Vec<f64> {
    let mut rng = stream_rng(seed, stream);
    (0..len)
        .map(|_| {
            let g: f64 = StandardNormal.sample(&mut rng);
            sigma * g
        })
        .collect()
}

#[derive(Debug, Clone, Copy)]
struct PinkSection {
    pole: f64,
    gain: f64,
    state: f64,
}

/// 1/f noise from a bank of first-order lowpass sections, each fed by its
/// own white source, with corners spaced three per decade from
/// [`PINK_LOWEST_CORNER`] up to Nyquist.
///
/// A section with corner `f_k` is weighted so its low-frequency density is
/// `2·level²/(π·ρ·f_k)`, with `ρ` sections per unit of `ln f`; the sum then
/// approaches `level²/f` between the extreme corners. States start from
/// their stationary distribution.
#[derive(Debug, Clone)]
pub struct PinkNoise {
    sections: Vec<PinkSection>,
    rng: ChaCha8Rng,
    fs: f64,
}

impl PinkNoise {
    pub fn new(level: f64, fs: f64, seed: u64) -> Self {
        let rho = PINK_SECTIONS_PER_DECADE / LN_10;
        let mut rng = stream_rng(seed, PINK_STREAM);
        let mut sections = Vec::new();
        let mut k = 0;
        loop {
            let corner = PINK_LOWEST_CORNER * 10f64.powf(k as f64 / PINK_SECTIONS_PER_DECADE);
            if corner > fs / 2.0 {
                break;
            }
            let pole = (-2.0 * PI * corner / fs).exp();
            let gain = level * (1.0 - pole) * (fs / (PI * rho * corner)).sqrt();
            let g: f64 = StandardNormal.sample(&mut rng);
            let state = g * gain / (1.0 - pole * pole).sqrt();
            sections.push(PinkSection { pole, gain, state });
            k += 1;
        }
        Self { sections, rng, fs }
    }

    pub fn next_sample(&mut self) -> f64 {
        let mut sum = 0.0;
        for s in &mut self.sections {
            let g: f64 = StandardNormal.sample(&mut self.rng);
            s.state = s.pole * s.state + s.gain * g;
            sum += s.state;
        }
        sum
    }

    /// One-sided power spectral density of the generator at `f`, A²/Hz.
    pub fn theoretical_psd(&self, f: f64) -> f64 {
        let w = 2.0 * PI * f / self.fs;
        self.sections
            .iter()
            .map(|s| 2.0 * s.gain * s.gain / self.fs / (1.0 - 2.0 * s.pole * w.cos() + s.pole * s.pole))
            .sum()
    }
}

/// Tunneling current for a resonator displacement record, with noise.
pub fn readout_series(j: &TunnelingJunction, noise: &NoiseModel, displacement: &[f64], fs: f64) -> Result<Vec<f64>> {
    j.validate()?;
    noise.validate()?;
    let mut current = displacement
        .iter()
        .map(|&x| current_from_gap(j, j.setpoint_gap - x))
        .collect::<Result<Vec<_>>>()?;
    noise.apply(&mut current, fs);
    Ok(current)
}
