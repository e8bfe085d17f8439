//! Static force laws between the plates, and the closed-form sideband and
//! equivalent-voltage formulas derived from them.
//!
//! Forces are signed: every law is attractive and carries
//! [`ATTRACTION_SIGN`]. Magnitudes follow `|F| = K / d^n` with the strength
//! `K` and exponent `n` exposed by [`ForceLaw::strength`] and
//! [`ForceLaw::exponent`].

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Sign applied to every force magnitude: the plates attract.
pub const ATTRACTION_SIGN: f64 = -1.0;

/// Gap below which the ideal-conductor plate laws are flagged as outside
/// their validity range (conductor penetration length, about 100 nm).
pub const DEFAULT_VALIDITY_FLOOR: f64 = 1e-7;

/// Relative modulation depth above which the perturbative sideband formulas
/// are reported as unreliable.
pub const WEAK_MODULATION_LIMIT: f64 = 0.1;

/// Planck constant, J·s.
pub const PLANCK_CONSTANT: f64 = 6.626_070_15e-34;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalConstants {
    /// Casimir constant `K_C`, N·m².
    pub casimir_constant: f64,
    /// Vacuum permittivity, F/m.
    pub vacuum_permittivity: f64,
    /// Newtonian gravitational constant, m³·kg⁻¹·s⁻².
    pub gravitational_constant: f64,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self {
            casimir_constant: 1.3e-27,
            vacuum_permittivity: 8.854e-12,
            gravitational_constant: 6.674e-11,
        }
    }
}

impl PhysicalConstants {
    /// `π·h·c/480`, the parallel-plate Casimir constant recomputed from `h` and `c`.
    pub fn casimir_constant_from_hc() -> f64 {
        std::f64::consts::PI * PLANCK_CONSTANT * SPEED_OF_LIGHT / 480.0
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("casimir_constant", self.casimir_constant),
            ("vacuum_permittivity", self.vacuum_permittivity),
            ("gravitational_constant", self.gravitational_constant),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(domain(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// Plate area together with the gap below which plate laws are flagged.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlateGeometry {
    /// Facing area `S`, m².
    pub area: f64,
    /// Gaps below this are evaluated but flagged, m.
    pub validity_floor: f64,
}

impl PlateGeometry {
    pub fn new(area: f64) -> Result<Self> {
        let geometry = Self {
            area,
            validity_floor: DEFAULT_VALIDITY_FLOOR,
        };
        geometry.validate()?;
        Ok(geometry)
    }

    pub fn with_validity_floor(mut self, floor: f64) -> Self {
        self.validity_floor = floor;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.area.is_finite() && self.area > 0.0) {
            return Err(domain(format!("plate area must be positive, got {}", self.area)));
        }
        if !(self.validity_floor.is_finite() && self.validity_floor >= 0.0) {
            return Err(domain(format!(
                "validity floor must be non-negative, got {}",
                self.validity_floor
            )));
        }
        Ok(())
    }

    pub fn is_valid_gap(&self, d: f64) -> bool {
        d >= self.validity_floor
    }
}

/// A model value together with whether the gap was inside the model's
/// validity range. Out-of-range evaluations are flagged, not rejected.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub value: f64,
    pub within_validity: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ForceLaw {
    /// Ideal parallel-plate Casimir attraction, `K_C·S/d⁴`.
    Casimir {
        constants: PhysicalConstants,
        geometry: PlateGeometry,
    },
    /// Biased parallel-plate capacitor, `ε₀·S·V²/(2d²)`.
    Electrostatic {
        bias_voltage: f64,
        geometry: PlateGeometry,
        constants: PhysicalConstants,
    },
    /// Generic `K/dⁿ` attraction.
    PowerLaw { strength: f64, exponent: f64 },
    /// Point masses at centre-of-mass separation `d`, `G·m₁·m₂/d²`.
    Gravity {
        mass1: f64,
        mass2: f64,
        constants: PhysicalConstants,
    },
}

impl ForceLaw {
    pub fn casimir(area: f64) -> Result<Self> {
        Ok(Self::Casimir {
            constants: PhysicalConstants::default(),
            geometry: PlateGeometry::new(area)?,
        })
    }

    pub fn electrostatic(bias_voltage: f64, area: f64) -> Result<Self> {
        let law = Self::Electrostatic {
            bias_voltage,
            geometry: PlateGeometry::new(area)?,
            constants: PhysicalConstants::default(),
        };
        law.validate()?;
        Ok(law)
    }

    pub fn power_law(strength: f64, exponent: f64) -> Result<Self> {
        let law = Self::PowerLaw { strength, exponent };
        law.validate()?;
        Ok(law)
    }

    pub fn gravity(mass1: f64, mass2: f64) -> Result<Self> {
        let law = Self::Gravity {
            mass1,
            mass2,
            constants: PhysicalConstants::default(),
        };
        law.validate()?;
        Ok(law)
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Casimir { .. } => "casimir",
            Self::Electrostatic { .. } => "electrostatic",
            Self::PowerLaw { .. } => "power_law",
            Self::Gravity { .. } => "gravity",
        }
    }

    /// Distance exponent `n` in `|F| = K/dⁿ`.
    pub fn exponent(&self) -> f64 {
        match self {
            Self::Casimir { .. } => 4.0,
            Self::Electrostatic { .. } | Self::Gravity { .. } => 2.0,
            Self::PowerLaw { exponent, .. } => *exponent,
        }
    }

    /// Strength `K` in `|F| = K/dⁿ`, in N·mⁿ.
    pub fn strength(&self) -> f64 {
        match self {
            Self::Casimir { constants, geometry } => constants.casimir_constant * geometry.area,
            Self::Electrostatic {
                bias_voltage,
                geometry,
                constants,
            } => 0.5 * constants.vacuum_permittivity * geometry.area * bias_voltage * bias_voltage,
            Self::PowerLaw { strength, .. } => *strength,
            Self::Gravity {
                mass1,
                mass2,
                constants,
            } => constants.gravitational_constant * mass1 * mass2,
        }
    }

    /// Only the plate laws carry a penetration-length floor.
    pub fn validity_floor(&self) -> Option<f64> {
        match self {
            Self::Casimir { geometry, .. } | Self::Electrostatic { geometry, .. } => Some(geometry.validity_floor),
            Self::PowerLaw { .. } | Self::Gravity { .. } => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Casimir { constants, geometry } => {
                constants.validate()?;
                geometry.validate()
            }
            Self::Electrostatic {
                bias_voltage,
                geometry,
                constants,
            } => {
                constants.validate()?;
                geometry.validate()?;
                if !bias_voltage.is_finite() {
                    return Err(domain("bias voltage must be finite"));
                }
                Ok(())
            }
            Self::PowerLaw { strength, exponent } => {
                if !(strength.is_finite() && *strength >= 0.0) {
                    return Err(domain(format!(
                        "power-law strength must be non-negative, got {strength}"
                    )));
                }
                if !(exponent.is_finite() && *exponent >= 1.0) {
                    return Err(domain(format!("power-law exponent must be at least 1, got {exponent}")));
                }
                Ok(())
            }
            Self::Gravity {
                mass1,
                mass2,
                constants,
            } => {
                constants.validate()?;
                if !(*mass1 > 0.0 && *mass2 > 0.0) {
                    return Err(domain("gravitating masses must be positive"));
                }
                Ok(())
            }
        }
    }

    /// Signed force at gap `d` without the domain check; callers guarantee `d > 0`.
    pub(crate) fn signed_force_unchecked(&self, d: f64) -> f64 {
        let n = self.exponent();
        let magnitude = if n == 4.0 {
            let d2 = d * d;
            self.strength() / (d2 * d2)
        } else if n == 2.0 {
            self.strength() / (d * d)
        } else {
            self.strength() / d.powf(n)
        };
        ATTRACTION_SIGN * magnitude
    }
}

fn check_gap(d: f64) -> Result<()> {
    if d.is_finite() && d > 0.0 {
        Ok(())
    } else {
        Err(domain(format!("gap must be positive, got {d} m")))
    }
}

/// Casimir pressure `K_C/d⁴` in N/m², flagged below [`DEFAULT_VALIDITY_FLOOR`].
pub fn casimir_pressure(d: f64, constants: &PhysicalConstants) -> Result<Evaluation> {
    check_gap(d)?;
    let d2 = d * d;
    Ok(Evaluation {
        value: constants.casimir_constant / (d2 * d2),
        within_validity: d >= DEFAULT_VALIDITY_FLOOR,
    })
}

/// Signed force exerted by `law` across a gap `d`.
pub fn force_at_gap(law: &ForceLaw, d: f64) -> Result<Evaluation> {
    check_gap(d)?;
    Ok(Evaluation {
        value: law.signed_force_unchecked(d),
        within_validity: law.validity_floor().is_none_or(|floor| d >= floor),
    })
}

fn check_modulation(d0: f64, x_r: f64, x_p: f64) -> Result<()> {
    check_gap(d0)?;
    if !(x_r >= 0.0 && x_p >= 0.0 && x_r.is_finite() && x_p.is_finite()) {
        return Err(domain(format!(
            "modulation amplitudes must be non-negative, got x_r={x_r}, x_p={x_p}"
        )));
    }
    let depth = (x_r / d0).max(x_p / d0);
    if depth > WEAK_MODULATION_LIMIT {
        log::warn!(
            "modulation depth {depth:.3} exceeds {WEAK_MODULATION_LIMIT}; leading-order sideband formula is unreliable"
        );
    }
    Ok(())
}

/// Magnitude of the electrostatic force line at each of `ω_r ± ω_p` for a
/// plate biased at `bias_voltage`: `(ε₀S/2)(V/d₀)²(x_r/d₀)(x_p/d₀)`.
///
/// This is the leading-order coefficient obtained by squaring the
/// first-order gap expansion. The exact `d⁻²` law carries three times this
/// value (see [`crate::modulation::perturbative_components`] at `n = 2`).
pub fn electrostatic_sideband(
    bias_voltage: f64,
    d0: f64,
    x_r: f64,
    x_p: f64,
    area: f64,
    constants: &PhysicalConstants,
) -> Result<f64> {
    check_modulation(d0, x_r, x_p)?;
    let field = bias_voltage / d0;
    Ok(0.5 * constants.vacuum_permittivity * area * field * field * (x_r / d0) * (x_p / d0))
}

/// Magnitude of the Casimir force line at each of `ω_r ± ω_p`:
/// `10·K_C·(S/d₀⁴)·(x_p/d₀)·(x_r/d₀)`.
pub fn casimir_sideband(d0: f64, x_r: f64, x_p: f64, area: f64, constants: &PhysicalConstants) -> Result<f64> {
    check_modulation(d0, x_r, x_p)?;
    let d2 = d0 * d0;
    Ok(10.0 * constants.casimir_constant * area / (d2 * d2) * (x_p / d0) * (x_r / d0))
}

/// Bias voltage whose electrostatic sideband equals the Casimir sideband at
/// the same mean gap: `√(20·K_C/ε₀)/d₀`. The modulation amplitudes cancel.
pub fn equivalent_voltage(d0: f64, constants: &PhysicalConstants) -> Result<f64> {
    check_gap(d0)?;
    Ok((20.0 * constants.casimir_constant / constants.vacuum_permittivity).sqrt() / d0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    const PLATE_AREA: f64 = 2.83e-5;

    #[test]
    fn casimir_constant_matches_h_c() {
        let k = PhysicalConstants::casimir_constant_from_hc();
        assert!(rel(PhysicalConstants::default().casimir_constant, k) < 0.01, "{k}");
    }

    #[test]
    fn casimir_pressure_values() {
        let c = PhysicalConstants::default();
        assert!(rel(casimir_pressure(1e-6, &c).unwrap().value, 1.3e-3) < 1e-12);
        assert!(rel(casimir_pressure(1e-4, &c).unwrap().value, 1.3e-11) < 1e-12);
        let d = 3.3e-7;
        let ratio = casimir_pressure(2.0 * d, &c).unwrap().value / casimir_pressure(d, &c).unwrap().value;
        assert!((ratio - 1.0 / 16.0).abs() < 1e-15);
    }

    #[test]
    fn casimir_pressure_flags_below_floor() {
        let c = PhysicalConstants::default();
        assert!(casimir_pressure(1e-6, &c).unwrap().within_validity);
        assert!(!casimir_pressure(5e-8, &c).unwrap().within_validity);
        assert!(casimir_pressure(0.0, &c).is_err());
        assert!(casimir_pressure(-1e-6, &c).is_err());
    }

    #[test]
    fn force_at_gap_examples() {
        let casimir = ForceLaw::casimir(PLATE_AREA).unwrap();
        let f = force_at_gap(&casimir, 1e-4).unwrap();
        assert!(rel(f.value, -1.3e-27 * PLATE_AREA / 1e-16) < 1e-12);
        assert!((f.value.abs() - 3.68e-16).abs() < 0.01e-16);

        let off = ForceLaw::electrostatic(0.0, PLATE_AREA).unwrap();
        assert_eq!(force_at_gap(&off, 1e-5).unwrap().value, 0.0);

        // Steel cylinder 6 mm diameter, 0.2 mm thick.
        let mass = 7850.0 * std::f64::consts::PI * 0.003f64.powi(2) * 0.2e-3;
        assert!(rel(mass, 4.4e-5) < 0.02);
        let gravity = ForceLaw::gravity(4.4e-5, 4.4e-5).unwrap();
        let g = force_at_gap(&gravity, 1e-6).unwrap().value.abs();
        assert!(rel(g, 1.29e-7) < 0.01, "{g}");
        // Same order of magnitude as the 6e-7 N estimate for this pair.
        assert!((g / 6e-7).log10().abs() < 1.0);
    }

    #[test]
    fn force_at_gap_rejects_closed_gap() {
        let law = ForceLaw::power_law(1.0, 3.0).unwrap();
        assert!(matches!(force_at_gap(&law, 0.0), Err(crate::Error::Domain(_))));
        assert!(force_at_gap(&law, -1.0).is_err());
        assert!(force_at_gap(&law, f64::NAN).is_err());
    }

    #[test]
    fn force_at_gap_flags_only_plate_laws() {
        let casimir = ForceLaw::casimir(PLATE_AREA).unwrap();
        assert!(!force_at_gap(&casimir, 5e-8).unwrap().within_validity);
        let power = ForceLaw::power_law(1.0, 4.0).unwrap();
        assert!(force_at_gap(&power, 5e-8).unwrap().within_validity);
    }

    #[test]
    fn invalid_laws_rejected() {
        assert!(ForceLaw::power_law(1.0, 0.5).is_err());
        assert!(ForceLaw::power_law(-1.0, 2.0).is_err());
        assert!(ForceLaw::gravity(0.0, 1.0).is_err());
        assert!(ForceLaw::casimir(0.0).is_err());
    }

    #[test]
    fn electrostatic_sideband_at_300v() {
        let c = PhysicalConstants::default();
        let f300 = electrostatic_sideband(300.0, 1e-4, 1e-9, 2e-7, PLATE_AREA, &c).unwrap();
        assert!(rel(f300, 2.25e-11) < 0.005, "{f300}");
        assert!(rel(f300, 2e-11) < 0.15);
        let f150 = electrostatic_sideband(150.0, 1e-4, 1e-9, 2e-7, PLATE_AREA, &c).unwrap();
        assert_eq!(f150 * 4.0, f300);
        assert_eq!(
            electrostatic_sideband(300.0, 1e-4, 1e-9, 0.0, PLATE_AREA, &c).unwrap(),
            0.0
        );
        assert!(electrostatic_sideband(300.0, 0.0, 1e-9, 2e-7, PLATE_AREA, &c).is_err());
    }

    #[test]
    fn casimir_sideband_examples() {
        let c = PhysicalConstants::default();
        let far = casimir_sideband(1e-4, 1e-9, 2e-7, PLATE_AREA, &c).unwrap();
        assert!(rel(far, 7.358e-23) < 1e-3, "{far}");
        let near = casimir_sideband(1e-6, 1e-9, 2e-8, PLATE_AREA, &c).unwrap();
        assert!(rel(near, 7.358e-12) < 1e-3, "{near}");
        assert_eq!(casimir_sideband(1e-6, 0.0, 2e-8, PLATE_AREA, &c).unwrap(), 0.0);
        assert!(casimir_sideband(-1.0, 1e-9, 2e-8, PLATE_AREA, &c).is_err());
    }

    #[test]
    fn equivalent_voltage_examples() {
        let c = PhysicalConstants::default();
        let v1 = equivalent_voltage(1e-6, &c).unwrap();
        assert!(rel(v1, 54.2e-3) < 0.005, "{v1}");
        assert!(rel(v1, 50e-3) < 0.1);
        assert!(rel(equivalent_voltage(1e-4, &c).unwrap(), 0.542e-3) < 0.005);
        let d = 7.7e-6;
        let scaled = equivalent_voltage(d / 10.0, &c).unwrap() / equivalent_voltage(d, &c).unwrap();
        assert!((scaled - 10.0).abs() < 1e-12);
        assert!(equivalent_voltage(0.0, &c).is_err());
    }

    proptest! {
        #[test]
        fn equivalent_voltage_balances_sidebands(
            d0 in 1e-7f64..1e-3,
            a in 1e-6f64..0.05,
            b in 1e-6f64..0.05,
            area in 1e-8f64..1e-3,
        ) {
            let c = PhysicalConstants::default();
            let veq = equivalent_voltage(d0, &c).unwrap();
            let e = electrostatic_sideband(veq, d0, a * d0, b * d0, area, &c).unwrap();
            let k = casimir_sideband(d0, a * d0, b * d0, area, &c).unwrap();
            prop_assert!(rel(e, k) < 1e-12);
        }

        #[test]
        fn casimir_equals_quartic_power_law(d in 1e-8f64..1e-2, area in 1e-8f64..1e-3) {
            let casimir = ForceLaw::casimir(area).unwrap();
            let quartic = ForceLaw::power_law(PhysicalConstants::default().casimir_constant * area, 4.0).unwrap();
            prop_assert_eq!(
                force_at_gap(&casimir, d).unwrap().value,
                force_at_gap(&quartic, d).unwrap().value
            );
        }

        #[test]
        fn electrostatic_sideband_scaling(
            v in 1.0f64..1000.0,
            xr in 1e-10f64..1e-7,
            xp in 1e-10f64..1e-7,
        ) {
            let c = PhysicalConstants::default();
            let base = electrostatic_sideband(v, 1e-4, xr, xp, PLATE_AREA, &c).unwrap();
            prop_assert!(rel(electrostatic_sideband(2.0 * v, 1e-4, xr, xp, PLATE_AREA, &c).unwrap(), 4.0 * base) < 1e-12);
            prop_assert!(rel(electrostatic_sideband(v, 1e-4, 3.0 * xr, xp, PLATE_AREA, &c).unwrap(), 3.0 * base) < 1e-12);
            prop_assert!(rel(electrostatic_sideband(v, 1e-4, xr, 5.0 * xp, PLATE_AREA, &c).unwrap(), 5.0 * base) < 1e-12);
        }

        #[test]
        fn all_laws_attractive_and_decreasing(d in 1e-7f64..1e-3, step in 1.001f64..3.0) {
            let laws = [
                ForceLaw::casimir(PLATE_AREA).unwrap(),
                ForceLaw::electrostatic(10.0, PLATE_AREA).unwrap(),
                ForceLaw::power_law(1e-20, 3.0).unwrap(),
                ForceLaw::gravity(1e-3, 2e-3).unwrap(),
            ];
            for law in &laws {
                let near = force_at_gap(law, d).unwrap().value;
                let far = force_at_gap(law, d * step).unwrap().value;
                prop_assert!(near < 0.0 && far < 0.0);
                prop_assert!(near.abs() > far.abs());
            }
        }
    }
}
