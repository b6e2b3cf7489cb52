//! Linearized optomechanics toolkit.
//!
//! The crate is organised around a matrix-pencil description of an optical
//! system coupled to mechanical coordinates ([`system_model`]), a classifier
//! that reduces any such pencil to its canonical eigenbasis form and labels
//! each coupling as dispersive, dissipative or coherent ([`classifier`]), an
//! exact transfer-matrix treatment of a two-port ring cavity with a movable
//! membrane ([`ring_cavity`]), and the sideband-cooling analysis built on top
//! of it ([`cooling`]).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod classifier;
pub mod constants;
pub mod cooling;
pub mod diagnostics;
pub mod linalg;
pub mod quadrature;
pub mod ring_cavity;
pub mod system_model;

pub use classifier::{classify, canonicalize, ClassificationReport, CoordinateReport, EigenStructure};
pub use constants::PhysicalConstants;
pub use cooling::CoolingScenario;
pub use diagnostics::Warning;
pub use ring_cavity::{ResonancePair, RingCavityParams};
pub use system_model::{LinearSystemModel, MechanicalOscillator, Preset, PresetId};

pub use num_complex::Complex64;

/// Dense complex matrix used for every pencil coefficient.
pub type CMatrix = nalgebra::DMatrix<Complex64>;
