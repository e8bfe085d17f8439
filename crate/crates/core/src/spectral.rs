//! Spectrum estimation of readout records.
//!
//! Spectra are amplitude-normalised: a cosine of amplitude `A` sitting on a
//! bin centre reads `A` in that bin (after correcting for the window's
//! coherent gain). Records are cut into consecutive, non-overlapping
//! segments; when the segment length is a multiple of the common drive
//! period every segment starts at the same drive phase, so segment spectra
//! can be averaged as complex numbers.

use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{config, domain, Error, Result};

/// Reported in place of an infinite signal-to-noise ratio.
pub const SNR_CAP: f64 = 1e12;

/// Ratio of peak to median magnitude required by [`estimate_resonance`].
pub const PEAK_DETECTION_RATIO: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    Rectangular,
    Hann,
}

impl Window {
    /// Periodic window coefficients of length `n`.
    pub fn coefficients(self, n: usize) -> Vec<f64> {
        match self {
            Window::Rectangular => vec![1.0; n],
            Window::Hann => (0..n)
                .map(|i| 0.5 * (1.0 - (TAU * i as f64 / n as f64).cos()))
                .collect(),
        }
    }

    pub fn coherent_gain(self) -> f64 {
        match self {
            Window::Rectangular => 1.0,
            Window::Hann => 0.5,
        }
    }

    /// Equivalent noise bandwidth in bins.
    pub fn noise_bandwidth(self) -> f64 {
        match self {
            Window::Rectangular => 1.0,
            Window::Hann => 1.5,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Window::Rectangular => "rectangular",
            Window::Hann => "hann",
        }
    }
}

impl fmt::Display for Window {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Window {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rectangular" | "rect" => Ok(Window::Rectangular),
            "hann" | "hanning" => Ok(Window::Hann),
            other => Err(domain(format!("unknown window {other:?}"))),
        }
    }
}

/// How a spectrum was combined across segments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Averaging {
    Single,
    /// Root-mean-square of magnitudes; phase discarded.
    Rms,
    /// Complex mean; incoherent content averages down as 1/√M.
    Vector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumEstimate {
    /// Bin spacing, Hz.
    pub resolution: f64,
    pub sample_rate: f64,
    /// One complex amplitude per bin, DC through Nyquist.
    pub amplitudes: Vec<Complex64>,
    pub segment_count: usize,
    pub window: Window,
    pub averaging: Averaging,
    /// Squared magnitude per bin: `|amplitude|²`, except for RMS spectra
    /// where it is the segment mean of `|amplitude|²`.
    mean_square: Vec<f64>,
}

impl SpectrumEstimate {
    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }

    pub fn frequency(&self, bin: usize) -> f64 {
        bin as f64 * self.resolution
    }

    pub fn frequencies(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(|k| self.frequency(k))
    }

    pub fn magnitude(&self, bin: usize) -> f64 {
        self.amplitudes[bin].norm()
    }

    /// Bin holding frequency `f`, which must lie on the grid.
    pub fn bin_of(&self, f: f64) -> Result<usize> {
        let k = (f / self.resolution).round();
        if !(k >= 0.0 && (k as usize) < self.len()) {
            return Err(domain(format!("{f} Hz lies outside the spectrum")));
        }
        if (k * self.resolution - f).abs() > 1e-6 * self.resolution {
            return Err(domain(format!(
                "{f} Hz is not on the {} Hz analysis grid",
                self.resolution
            )));
        }
        Ok(k as usize)
    }

    pub fn amplitude_at(&self, f: f64) -> Result<Complex64> {
        Ok(self.amplitudes[self.bin_of(f)?])
    }

    fn is_nyquist(&self, bin: usize) -> bool {
        let n = (self.sample_rate / self.resolution).round() as usize;
        n.is_multiple_of(2) && bin == n / 2
    }

    /// Mean-square signal carried by each bin. For a rectangular window on a
    /// record with integer periods these sum to the mean square of the record.
    pub fn bin_powers(&self) -> Vec<f64> {
        self.mean_square
            .iter()
            .enumerate()
            .map(|(k, &p)| {
                let factor = if k == 0 || self.is_nyquist(k) { 1.0 } else { 0.5 };
                factor * p
            })
            .collect()
    }

    /// One-sided power spectral density per bin, units²/Hz.
    pub fn psd(&self) -> Vec<f64> {
        let w = self.window;
        let enbw = w.noise_bandwidth() * self.resolution;
        self.bin_powers().into_iter().map(|p| p / enbw).collect()
    }

    /// Three-column text table with one header line.
    pub fn to_table(&self) -> String {
        let mut out = String::from("frequency_hz\tamplitude\tphase_rad\n");
        for (k, z) in self.amplitudes.iter().enumerate() {
            out.push_str(&format!("{:.6}\t{:.9e}\t{:.9}\n", self.frequency(k), z.norm(), z.arg()));
        }
        out
    }

    fn same_grid(&self, other: &Self) -> bool {
        self.len() == other.len()
            && self.resolution == other.resolution
            && self.sample_rate == other.sample_rate
            && self.window == other.window
    }
}

/// Complex spectrum of each consecutive `segment_length` block of `series`.
/// A trailing partial block is dropped.
pub fn segment_spectra(
    series: &[f64],
    fs: f64,
    segment_length: usize,
    window: Window,
) -> Result<Vec<SpectrumEstimate>> {
    if series.is_empty() {
        return Err(domain("cannot estimate the spectrum of an empty series"));
    }
    if segment_length < 2 || segment_length > series.len() {
        return Err(domain(format!(
            "segment length {segment_length} must lie in 2..={}",
            series.len()
        )));
    }
    if !(fs > 0.0) {
        return Err(domain("sample rate must be positive"));
    }
    let fft = FftPlanner::<f64>::new().plan_fft_forward(segment_length);
    let coefficients = window.coefficients(segment_length);
    let bins = segment_length / 2 + 1;
    let norm = 1.0 / (segment_length as f64 * window.coherent_gain());
    let mut buffer = vec![Complex64::default(); segment_length];
    let mut out = Vec::with_capacity(series.len() / segment_length);
    for chunk in series.chunks_exact(segment_length) {
        for ((b, &x), &w) in buffer.iter_mut().zip(chunk).zip(&coefficients) {
            *b = Complex64::new(x * w, 0.0);
        }
        fft.process(&mut buffer);
        let amplitudes: Vec<Complex64> = buffer[..bins]
            .iter()
            .enumerate()
            .map(|(k, z)| {
                let edge = k == 0 || (segment_length.is_multiple_of(2) && k == segment_length / 2);
                z * if edge { norm } else { 2.0 * norm }
            })
            .collect();
        let mean_square = amplitudes.iter().map(|z| z.norm_sqr()).collect();
        out.push(SpectrumEstimate {
            resolution: fs / segment_length as f64,
            sample_rate: fs,
            amplitudes,
            segment_count: 1,
            window,
            averaging: Averaging::Single,
            mean_square,
        });
    }
    Ok(out)
}

fn check_segments(segments: &[SpectrumEstimate]) -> Result<&SpectrumEstimate> {
    let first = segments.first().ok_or_else(|| domain("no segments to average"))?;
    if let Some(bad) = segments.iter().position(|s| !first.same_grid(s)) {
        return Err(domain(format!(
            "segment {bad} does not share the frequency grid of segment 0"
        )));
    }
    Ok(first)
}

/// Complex mean across phase-aligned segments.
pub fn vector_average(segments: &[SpectrumEstimate]) -> Result<SpectrumEstimate> {
    let first = check_segments(segments)?;
    let total: usize = segments.iter().map(|s| s.segment_count).sum();
    let mut amplitudes = vec![Complex64::default(); first.len()];
    for s in segments {
        let w = s.segment_count as f64;
        for (acc, z) in amplitudes.iter_mut().zip(&s.amplitudes) {
            *acc += z * w;
        }
    }
    let inv = 1.0 / total as f64;
    amplitudes.iter_mut().for_each(|z| *z *= inv);
    let mean_square = amplitudes.iter().map(|z| z.norm_sqr()).collect();
    Ok(SpectrumEstimate {
        amplitudes,
        segment_count: total,
        averaging: Averaging::Vector,
        mean_square,
        ..first.clone()
    })
}

/// Root-mean-square magnitude across segments; phases are dropped.
pub fn rms_average(segments: &[SpectrumEstimate]) -> Result<SpectrumEstimate> {
    let first = check_segments(segments)?;
    let total: usize = segments.iter().map(|s| s.segment_count).sum();
    let mut mean_square = vec![0.0; first.len()];
    for s in segments {
        let w = s.segment_count as f64;
        for (acc, p) in mean_square.iter_mut().zip(&s.mean_square) {
            *acc += p * w;
        }
    }
    mean_square.iter_mut().for_each(|p| *p /= total as f64);
    Ok(SpectrumEstimate {
        amplitudes: mean_square.iter().map(|p| Complex64::new(p.sqrt(), 0.0)).collect(),
        segment_count: total,
        averaging: if total == 1 { Averaging::Single } else { Averaging::Rms },
        mean_square,
        ..first.clone()
    })
}

/// Magnitude spectrum averaged over `segment_length` blocks (RMS when more
/// than one block fits).
pub fn periodogram(series: &[f64], fs: f64, segment_length: usize, window: Window) -> Result<SpectrumEstimate> {
    let segments = segment_spectra(series, fs, segment_length, window)?;
    if segments.len() == 1 {
        return Ok(segments.into_iter().next().unwrap());
    }
    rms_average(&segments)
}

/// Closed frequency interval used to estimate the noise floor, Hz.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseBand {
    pub low: f64,
    pub high: f64,
}

impl NoiseBand {
    pub fn new(low: f64, high: f64) -> Self {
        Self { low, high }
    }

    pub fn contains(&self, f: f64) -> bool {
        f >= self.low && f <= self.high
    }
}

/// Median magnitude of the bins inside `band`.
pub fn noise_floor(spec: &SpectrumEstimate, band: NoiseBand) -> Result<f64> {
    let mut mags: Vec<f64> = spec
        .frequencies()
        .enumerate()
        .filter(|(_, f)| band.contains(*f))
        .map(|(k, _)| spec.magnitude(k))
        .collect();
    if mags.is_empty() {
        return Err(config(format!(
            "noise band {}..{} Hz holds no bins",
            band.low, band.high
        )));
    }
    mags.sort_by(f64::total_cmp);
    let mid = mags.len() / 2;
    Ok(if mags.len() % 2 == 1 {
        mags[mid]
    } else {
        0.5 * (mags[mid - 1] + mags[mid])
    })
}

/// Magnitude at `f` over the median magnitude in `band`. `known_lines`
/// lists every frequency carrying signal; none may fall in the band.
pub fn line_snr(spec: &SpectrumEstimate, f: f64, band: NoiseBand, known_lines: &[f64]) -> Result<f64> {
    let bin = spec.bin_of(f)?;
    if let Some(line) = known_lines
        .iter()
        .chain(std::iter::once(&f))
        .find(|&&l| band.contains(l))
    {
        return Err(config(format!(
            "noise band {}..{} Hz contains the known line at {line} Hz",
            band.low, band.high
        )));
    }
    let floor = noise_floor(spec, band)?;
    let ratio = spec.magnitude(bin) / floor;
    Ok(if ratio.is_finite() { ratio.min(SNR_CAP) } else { SNR_CAP })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResonanceEstimate {
    /// Hz
    pub frequency: f64,
    pub quality_factor: f64,
    /// Half-power bandwidth, Hz.
    pub bandwidth: f64,
}

/// Peak frequency and quality factor of a broadband-excited spectrum.
///
/// The peak is located by parabolic interpolation of bin power and the
/// bandwidth by the half-power crossings. That estimate is then refined by
/// a weighted least-squares fit of the driven-oscillator power shape
/// `1/((ν₀² − ν²)² + (ν₀ν/Q)²)` over three bandwidths either side of the
/// peak, which uses every bin instead of the few next to the crossings. The
/// crossing estimate is returned if the fit is degenerate.
pub fn estimate_resonance(spec: &SpectrumEstimate) -> Result<ResonanceEstimate> {
    let power = spec.bin_powers();
    if power.len() < 4 {
        return Err(Error::Detection("spectrum too short".into()));
    }
    let (peak, &peak_power) = power[1..power.len() - 1]
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, p)| (i + 1, p))
        .unwrap();
    let mut mags: Vec<f64> = power[1..].iter().map(|p| p.sqrt()).collect();
    mags.sort_by(f64::total_cmp);
    let median = mags[mags.len() / 2];
    if !(peak_power.sqrt() > PEAK_DETECTION_RATIO * median) {
        return Err(Error::Detection(format!(
            "no peak above {PEAK_DETECTION_RATIO}x the median floor"
        )));
    }

    let (left, right) = (power[peak - 1], power[peak + 1]);
    let curvature = left - 2.0 * peak_power + right;
    let offset = if curvature < 0.0 {
        (0.5 * (left - right) / curvature).clamp(-0.5, 0.5)
    } else {
        0.0
    };
    let top = peak_power - 0.25 * (left - right) * offset;
    let half = 0.5 * top;

    let crossing = |from: usize, step: isize| -> Result<f64> {
        let mut k = from as isize;
        loop {
            let next = k + step;
            if next < 0 || next as usize >= power.len() {
                return Err(Error::Detection("half-power point outside the spectrum".into()));
            }
            let (pk, pn) = (power[k as usize], power[next as usize]);
            if pn < half {
                let t = (pk - half) / (pk - pn);
                return Ok((k as f64 + t * step as f64) * spec.resolution);
            }
            k = next;
        }
    };
    let f_low = crossing(peak, -1)?;
    let f_high = crossing(peak, 1)?;
    let frequency = (peak as f64 + offset) * spec.resolution;
    let bandwidth = f_high - f_low;
    let coarse = ResonanceEstimate {
        frequency,
        quality_factor: frequency / bandwidth,
        bandwidth,
    };
    Ok(fit_resonance(spec, &power, peak, bandwidth).unwrap_or(coarse))
}

fn fit_resonance(spec: &SpectrumEstimate, power: &[f64], peak: usize, bandwidth: f64) -> Option<ResonanceEstimate> {
    let span = (3.0 * bandwidth / spec.resolution).ceil().max(2.0) as usize;
    let lo = peak.saturating_sub(span).max(1);
    let hi = (peak + span).min(power.len() - 1);
    let g_peak = spec.frequency(peak).powi(2);
    // 1/P is quadratic in g = ν²; fit it in v = g/g_peak − 1 with weights P²
    // so every bin enters with the same relative scatter.
    let scale = 1.0 / power[peak];
    let mut normal = [[0.0f64; 3]; 3];
    let mut rhs = [0.0f64; 3];
    for (k, &p) in power.iter().enumerate().take(hi + 1).skip(lo) {
        if !(p > 0.0) {
            continue;
        }
        let v = spec.frequency(k).powi(2) / g_peak - 1.0;
        let y = scale / p;
        let w = 1.0 / (y * y);
        let basis = [1.0, v, v * v];
        for i in 0..3 {
            for j in 0..3 {
                normal[i][j] += w * basis[i] * basis[j];
            }
            rhs[i] += w * basis[i] * y;
        }
    }
    let [c0, c1, c2] = solve3(normal, rhs)?;
    let a2 = c2 / (g_peak * g_peak);
    let a1 = (c1 - 2.0 * c2) / g_peak;
    let a0 = c0 - c1 + c2;
    let g0 = (a0 / a2).sqrt();
    let inv_q2 = (a1 / a2 + 2.0 * g0) / g0;
    let frequency = g0.sqrt();
    let quality_factor = inv_q2.sqrt().recip();
    (frequency.is_finite() && quality_factor.is_finite() && quality_factor > 0.0).then(|| ResonanceEstimate {
        frequency,
        quality_factor,
        bandwidth: frequency / quality_factor,
    })
}

fn solve3(mut m: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let pivot = (col..3).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[pivot][col].abs() < 1e-300 {
            return None;
        }
        m.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..3 {
            let factor = m[row][col] / m[col][col];
            let pivot_row = m[col];
            for (dst, src) in m[row][col..].iter_mut().zip(&pivot_row[col..]) {
                *dst -= factor * src;
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let tail: f64 = (row + 1..3).map(|k| m[row][k] * x[k]).sum();
        x[row] = (b[row] - tail) / m[row][row];
    }
    Some(x)
}
