//! Two-tone gap modulation and the Fourier content of the resulting force.
//!
//! With `a = x_r/d₀` and `b = x_p/d₀`, a force `K/dⁿ` evaluated on the gap
//! `d₀(1 + a·cos ω_r t + b·cos ω_p t)` expands as
//! `F₀·(1 - n·u + n(n+1)/2·u² - …)` with `u = a·cos ω_r t + b·cos ω_p t`.
//! [`perturbative_components`] returns the line amplitudes of that series
//! through second order; [`fourier_oracle`] projects an exactly evaluated
//! time series ([`exact_force_series`]) onto single frequencies and serves
//! as the independent check.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{config, domain, Error, Result};
use crate::force_models::{ForceLaw, WEAK_MODULATION_LIMIT};

/// Two-tone drive of the plate gap. Frequencies are angular, rad/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveState {
    pub d0: f64,
    pub x_r: f64,
    pub omega_r: f64,
    pub x_p: f64,
    pub omega_p: f64,
}

impl DriveState {
    pub fn from_hz(d0: f64, x_r: f64, nu_r: f64, x_p: f64, nu_p: f64) -> Result<Self> {
        let drive = Self {
            d0,
            x_r,
            omega_r: TAU * nu_r,
            x_p,
            omega_p: TAU * nu_p,
        };
        drive.validate()?;
        Ok(drive)
    }

    pub fn nu_r(&self) -> f64 {
        self.omega_r / TAU
    }

    pub fn nu_p(&self) -> f64 {
        self.omega_p / TAU
    }

    /// `x_r/d₀`.
    pub fn a(&self) -> f64 {
        self.x_r / self.d0
    }

    /// `x_p/d₀`.
    pub fn b(&self) -> f64 {
        self.x_p / self.d0
    }

    /// The same drive with the resonator and plate tones exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            d0: self.d0,
            x_r: self.x_p,
            omega_r: self.omega_p,
            x_p: self.x_r,
            omega_p: self.omega_r,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.d0.is_finite() && self.d0 > 0.0) {
            return Err(domain(format!("mean gap must be positive, got {}", self.d0)));
        }
        if !(self.x_r >= 0.0 && self.x_p >= 0.0) {
            return Err(domain("modulation amplitudes must be non-negative"));
        }
        if self.x_r + self.x_p >= self.d0 {
            return Err(domain(format!(
                "gap closure: x_r + x_p = {:e} m reaches the mean gap {:e} m",
                self.x_r + self.x_p,
                self.d0
            )));
        }
        if !(self.omega_r > 0.0 && self.omega_p > 0.0 && self.omega_r.is_finite() && self.omega_p.is_finite()) {
            return Err(domain("drive frequencies must be positive"));
        }
        if self.omega_r == self.omega_p {
            return Err(domain("degenerate tones: resonator and plate frequencies coincide"));
        }
        let tol = 1e-9 * self.omega_r.max(self.omega_p);
        for (i, first) in Line::ALL.iter().enumerate() {
            for second in &Line::ALL[i + 1..] {
                let (f1, f2) = (first.angular_frequency(self), second.angular_frequency(self));
                if (f1 - f2).abs() <= tol {
                    return Err(domain(format!(
                        "colliding lines: {first} and {second} fall on the same frequency {:.6} Hz",
                        f1 / TAU
                    )));
                }
            }
        }
        Ok(())
    }

    /// Period over which both tones complete an integer number of cycles,
    /// when both frequencies are whole multiples of 1 mHz.
    pub fn common_period(&self) -> Option<f64> {
        common_period(self.nu_r(), self.nu_p())
    }
}

fn to_millihertz(f: f64) -> Option<u64> {
    let m = (f * 1000.0).round();
    if m <= 0.0 || m > 1e15 || (m / 1000.0 - f).abs() > 1e-9 * f.abs().max(1e-3) {
        return None;
    }
    Some(m as u64)
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Shortest span holding an integer number of periods of both frequencies (Hz).
pub fn common_period(f1: f64, f2: f64) -> Option<f64> {
    let (m1, m2) = (to_millihertz(f1)?, to_millihertz(f2)?);
    Some(1000.0 / gcd(m1, m2) as f64)
}

/// `d₀ + x_r·cos(ω_r t) + x_p·cos(ω_p t)`.
pub fn gap_waveform(drive: &DriveState, t: f64) -> f64 {
    drive.d0 + drive.x_r * (drive.omega_r * t).cos() + drive.x_p * (drive.omega_p * t).cos()
}

/// `cos(2π f i / fs)` with the cycle count reduced before scaling, so long
/// records keep their phase accuracy.
#[inline]
pub(crate) fn sampled_cos(cycles_per_sample: f64, i: usize) -> f64 {
    (TAU * (cycles_per_sample * i as f64).fract()).cos()
}

#[inline]
pub(crate) fn sampled_phasor(cycles_per_sample: f64, i: usize) -> Complex64 {
    let phase = TAU * (cycles_per_sample * i as f64).fract();
    Complex64::new(phase.cos(), -phase.sin())
}

/// Force of `law` sampled at `fs` along the driven gap for `duration` seconds.
pub fn exact_force_series(law: &ForceLaw, drive: &DriveState, fs: f64, duration: f64) -> Result<Vec<f64>> {
    law.validate()?;
    drive.validate()?;
    let highest = drive.nu_r().max(drive.nu_p()) + drive.nu_r().min(drive.nu_p());
    if !(fs > 4.0 * highest) {
        return Err(config(format!(
            "sample rate {fs} Hz leaves no headroom above the highest sideband {highest} Hz; use at least {} Hz",
            4.0 * highest
        )));
    }
    if !(duration > 0.0 && duration.is_finite()) {
        return Err(domain("series duration must be positive"));
    }
    let n = (duration * fs).round() as usize;
    let (cr, cp) = (drive.nu_r() / fs, drive.nu_p() / fs);
    Ok((0..n)
        .map(|i| {
            let gap = drive.d0 + drive.x_r * sampled_cos(cr, i) + drive.x_p * sampled_cos(cp, i);
            law.signed_force_unchecked(gap)
        })
        .collect())
}

/// Single-bin Fourier projection of a real series at `f` Hz.
///
/// Returns the phasor `z` such that the series contains `|z|·cos(2πft + arg z)`;
/// at `f = 0` it returns the mean. The series must span an integer number of
/// periods of `f` for the projection to be leakage-free.
pub fn fourier_oracle(series: &[f64], fs: f64, f: f64) -> Result<Complex64> {
    if series.is_empty() {
        return Err(domain("cannot project an empty series"));
    }
    if !(f >= 0.0) {
        return Err(domain(format!("projection frequency must be non-negative, got {f}")));
    }
    if f >= fs / 2.0 {
        return Err(Error::Aliasing {
            frequency_hz: f,
            nyquist_hz: fs / 2.0,
        });
    }
    let cycles = f / fs;
    let sum: Complex64 = series
        .iter()
        .enumerate()
        .map(|(i, &x)| sampled_phasor(cycles, i) * x)
        .sum();
    let scale = if f == 0.0 { 1.0 } else { 2.0 };
    Ok(sum * (scale / series.len() as f64))
}

/// Spectral lines produced by the two-tone gap modulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Line {
    Dc,
    Wp,
    TwoWp,
    WrMinusWp,
    Wr,
    WrPlusWp,
    TwoWr,
}

impl Line {
    pub const ALL: [Line; 7] = [
        Line::Dc,
        Line::Wp,
        Line::TwoWp,
        Line::WrMinusWp,
        Line::Wr,
        Line::WrPlusWp,
        Line::TwoWr,
    ];

    /// Lines other than DC, in table order.
    pub const DYNAMIC: [Line; 6] = [
        Line::Wp,
        Line::TwoWp,
        Line::WrMinusWp,
        Line::Wr,
        Line::WrPlusWp,
        Line::TwoWr,
    ];

    pub const SIDEBANDS: [Line; 2] = [Line::WrMinusWp, Line::WrPlusWp];

    pub fn label(self) -> &'static str {
        match self {
            Line::Dc => "dc",
            Line::Wp => "wp",
            Line::TwoWp => "2wp",
            Line::WrMinusWp => "wr-wp",
            Line::Wr => "wr",
            Line::WrPlusWp => "wr+wp",
            Line::TwoWr => "2wr",
        }
    }

    /// Non-negative angular frequency of the line for this drive, rad/s.
    pub fn angular_frequency(self, drive: &DriveState) -> f64 {
        match self {
            Line::Dc => 0.0,
            Line::Wp => drive.omega_p,
            Line::TwoWp => 2.0 * drive.omega_p,
            Line::WrMinusWp => (drive.omega_r - drive.omega_p).abs(),
            Line::Wr => drive.omega_r,
            Line::WrPlusWp => drive.omega_r + drive.omega_p,
            Line::TwoWr => 2.0 * drive.omega_r,
        }
    }

    pub fn frequency_hz(self, drive: &DriveState) -> f64 {
        self.angular_frequency(drive) / TAU
    }

    /// The line this one maps to when the two tones are exchanged.
    pub fn swapped(self) -> Line {
        match self {
            Line::Wp => Line::Wr,
            Line::Wr => Line::Wp,
            Line::TwoWp => Line::TwoWr,
            Line::TwoWr => Line::TwoWp,
            other => other,
        }
    }

    pub fn order(self) -> u8 {
        match self {
            Line::Dc => 0,
            Line::Wp | Line::Wr => 1,
            _ => 2,
        }
    }
}

impl fmt::Display for Line {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Line {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Line::ALL
            .into_iter()
            .find(|l| l.label().eq_ignore_ascii_case(s))
            .ok_or_else(|| domain(format!("unknown line label {s:?}")))
    }
}

/// Expansion order of the perturbative tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExpansionOrder {
    First = 1,
    Second = 2,
}

/// Signed coefficient of `line` relative to the static force, for a `1/dⁿ`
/// law under relative modulations `a` (resonator) and `b` (plate).
///
/// `order` selects which terms contribute; the DC rectification term only
/// enters at second order.
pub fn line_coefficient(line: Line, n: f64, a: f64, b: f64, order: ExpansionOrder) -> Option<f64> {
    let second = n * (n + 1.0);
    match (line, order) {
        (Line::Dc, ExpansionOrder::First) => Some(1.0),
        (Line::Dc, ExpansionOrder::Second) => Some(1.0 + second / 4.0 * (a * a + b * b)),
        (Line::Wp, _) => Some(-n * b),
        (Line::Wr, _) => Some(-n * a),
        (_, ExpansionOrder::First) => None,
        (Line::TwoWp, _) => Some(second / 4.0 * b * b),
        (Line::TwoWr, _) => Some(second / 4.0 * a * a),
        (Line::WrMinusWp | Line::WrPlusWp, _) => Some(second / 2.0 * a * b),
    }
}

/// Magnitudes of the dynamical term for the `1/d⁴` Casimir force, written
/// out literally: `4b, 5b², 10ab, 4a, 10ab, 5a²`.
pub fn casimir_table_coefficient(line: Line, a: f64, b: f64) -> f64 {
    match line {
        Line::Dc => 1.0,
        Line::Wp => 4.0 * b,
        Line::TwoWp => 5.0 * b * b,
        Line::WrMinusWp | Line::WrPlusWp => 10.0 * b * a,
        Line::Wr => 4.0 * a,
        Line::TwoWr => 5.0 * a * a,
    }
}

/// Line amplitudes keyed by [`Line`]. Values are phasors: the series holds
/// `|z|·cos(ωt + arg z)` at each line. Force spectra from the expansion are
/// real, so their phasors are signed numbers.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentSpectrum {
    entries: BTreeMap<Line, Complex64>,
    pub order: ExpansionOrder,
}

impl ComponentSpectrum {
    pub fn new(order: ExpansionOrder) -> Self {
        Self {
            entries: BTreeMap::new(),
            order,
        }
    }

    pub fn insert(&mut self, line: Line, amplitude: Complex64) {
        self.entries.insert(line, amplitude);
    }

    pub fn get(&self, line: Line) -> Option<Complex64> {
        self.entries.get(&line).copied()
    }

    /// Signed amplitude (real part of the phasor).
    pub fn signed(&self, line: Line) -> Option<f64> {
        self.get(line).map(|z| z.re)
    }

    /// Unsigned amplitude, as tabulated.
    pub fn magnitude(&self, line: Line) -> Option<f64> {
        self.get(line).map(|z| z.norm())
    }

    pub fn iter(&self) -> impl Iterator<Item = (Line, Complex64)> + '_ {
        self.entries.iter().map(|(l, z)| (*l, *z))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Two-column text table: line label and amplitude. Real phasors are
    /// written signed; complex ones as magnitudes.
    pub fn to_table(&self) -> String {
        let mut out = String::from("line\tamplitude\n");
        for (line, z) in self.iter() {
            let value = if z.im == 0.0 { z.re } else { z.norm() };
            out.push_str(&format!("{line}\t{value:.9e}\n"));
        }
        out
    }
}

/// Line amplitudes of a modulated `F₀/dⁿ` force through the given order.
///
/// `static_force` is the force at the mean gap (pass it signed to get signed
/// lines). First-order lines carry the opposite sign to DC; second-order
/// lines the same sign.
pub fn perturbative_components(
    n: f64,
    static_force: f64,
    drive: &DriveState,
    order: ExpansionOrder,
) -> ComponentSpectrum {
    let (a, b) = (drive.a(), drive.b());
    if a.max(b) > WEAK_MODULATION_LIMIT {
        log::warn!("modulation depth {:.3} outside the weak-modulation regime", a.max(b));
    }
    let mut spectrum = ComponentSpectrum::new(order);
    for line in Line::ALL {
        if let Some(c) = line_coefficient(line, n, a, b, order) {
            spectrum.insert(line, Complex64::new(c * static_force, 0.0));
        }
    }
    spectrum
}

/// Sideband-to-static ratio for the Casimir force, `10·(x_r/d₀)·(x_p/d₀)`.
pub fn suppression_factor(drive: &DriveState) -> f64 {
    10.0 * drive.a() * drive.b()
}
