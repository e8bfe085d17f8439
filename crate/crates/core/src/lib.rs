//! Heterodyne detection of small distance-dependent forces between two
//! modulated surfaces, read out through a tunneling transducer.
//!
//! The crate follows the signal chain: [`force_models`] gives the force at a
//! gap, [`modulation`] drives the gap with two tones and tabulates the
//! resulting lines, [`resonator`] turns force into displacement,
//! [`transducer`] turns displacement into a noisy tunneling current,
//! [`spectral`] estimates spectra and line SNRs, and [`inference`] recovers
//! exponents and calibration constants. [`scenario`] runs the whole chain
//! from a TOML description.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod force_models;
pub mod inference;
pub mod modulation;
pub mod resonator;
pub mod scenario;
pub mod spectral;
pub mod transducer;

pub use error::{Error, Result};
pub use force_models::{ForceLaw, PhysicalConstants, PlateGeometry};
pub use inference::{CalibrationResult, ExponentEstimate};
pub use modulation::{ComponentSpectrum, DriveState, ExpansionOrder, Line};
pub use resonator::Resonator;
pub use scenario::{Scenario, ScenarioReport};
pub use spectral::{SpectrumEstimate, Window};
pub use transducer::{NoiseModel, TunnelingJunction};
