//! Photon-level simulator and security toolkit for a decoy-state BB84 key
//! distribution network in star topology.
//!
//! The crate is organised around the lifecycle of a key:
//!
//! * [`model`] — link parameters, presets, and the closed-form gain/QBER
//!   formulas everything else is checked against.
//! * [`sim`] — seeded Monte Carlo exchange at the single-pulse level with a
//!   ground-truth photon-number ledger, including a photon-number-splitting
//!   eavesdropper.
//! * [`protocol`] — sifting, error-correction accounting, Toeplitz privacy
//!   amplification and one-time-pad key usage.
//! * [`security`] — decoy-state bounds on the single-photon gain and error
//!   rate, the secure key rate, intensity optimization and noise calibration.
//! * [`session`] — one full exchange through the whole pipeline.
//! * [`network`] — active-switch star scheduling, the passive-coupler
//!   comparator and the consumable key store.
//! * [`config`] / [`report`] — run configuration files and report output
//!   used by the `qkd` binary.

pub mod bits;
pub mod config;
pub mod error;
pub mod model;
pub mod network;
pub mod protocol;
pub mod report;
pub mod security;
pub mod session;
pub mod sim;

pub use error::{Error, Result};
