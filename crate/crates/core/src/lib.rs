//! Numerical toolkit for a single trapped ion whose spin and motion are
//! coupled by a phase-stable traveling-wave drive.
//!
//! The crate is organised bottom-up:
//!
//! * [`hilbert`] – truncated spin ⊗ Fock space, operators, states and SI units.
//! * [`dynamics`] – free motion, drive flashes, MW rotations and stroboscopic trains.
//! * [`sequence`] – full Ramsey sequences, scans, shot sampling and drift referencing.
//! * [`calib`] – fringe and wave-pattern fits, train tuning and position/momentum decoding.
//! * [`stability`] – classical phase-noise traces and windowed stability statistics.

pub mod calib;
pub mod dynamics;
pub mod hilbert;
pub mod linalg;
pub mod sequence;
pub mod stability;

mod error;

pub use error::{Error, Result};

pub use num_complex::Complex64;

/// Dense complex matrix used for every operator in the crate.
pub type CMatrix = nalgebra::DMatrix<Complex64>;
/// Dense complex vector used for state amplitudes.
pub type CVector = nalgebra::DVector<Complex64>;
