//! Physical link parameters and the closed-form channel statistics used
//! everywhere else.
//!
//! The channel is characterised by a single transmission efficiency
//!
//! ```text
//! eta = detector_efficiency * 10^(-(attenuation_db_per_km * length_km + extra_loss_db)/10)
//! ```
//!
//! and the expected per-class statistics of a weak-coherent-pulse source:
//!
//! ```text
//! Q(m)   = Y0 + 1 - exp(-eta * m)                       (gain)
//! E(m)Q  = e0 * Y0 + e_det * (1 - exp(-eta * m))        (error-weighted gain)
//! ```
//!
//! where `m` is the mean photon number of the intensity class, `Y0` the
//! background yield of the two gated detectors, `e0 = 0.5` the error rate of
//! background-only clicks and `e_det` the misalignment error.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Error rate of a background-only detection event (a dark count lands on
/// either detector with equal probability).
pub const VACUUM_ERROR_RATE: f64 = 0.5;

/// Per-detector dark-count probability per gate, fitted against the measured
/// per-link QBER/rate benchmarks (see `security::calibrate_to_targets`).
pub const CALIBRATED_DARK_COUNT_PROB: f64 = 2.7849e-4;

/// Misalignment (intrinsic wrong-detector) probability from the same fit.
pub const CALIBRATED_MISALIGNMENT: f64 = 0.015655;

// ---------------------------------------------------------------------------
// Link parameters
// ---------------------------------------------------------------------------

/// Physical description of one fiber link between the server and a client.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkParams {
    pub name: String,
    pub length_km: f64,
    pub attenuation_db_per_km: f64,
    pub extra_loss_db: f64,
    /// Detector quantum efficiency, applied at detection time.
    pub detector_efficiency: f64,
    /// Dark-count probability per detector per gate.
    pub dark_count_prob: f64,
    /// Probability that a photon click lands on the wrong detector.
    pub misalignment_error: f64,
    pub pulse_rate_hz: f64,
    pub gate_ns: f64,
}

impl LinkParams {
    /// Standard telecom-fiber system defaults: 0.2 dB/km fiber, 1.7 dB of
    /// coupling/connector losses, 15% detector efficiency, 4 MHz source,
    /// 2.5 ns gates. Noise parameters default to the calibrated values.
    pub fn telecom(name: impl Into<String>, length_km: f64) -> Self {
        LinkParams {
            name: name.into(),
            length_km,
            attenuation_db_per_km: 0.2,
            extra_loss_db: 1.7,
            detector_efficiency: 0.15,
            dark_count_prob: CALIBRATED_DARK_COUNT_PROB,
            misalignment_error: CALIBRATED_MISALIGNMENT,
            pulse_rate_hz: 4.0e6,
            gate_ns: 2.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, what: &str| -> Result<()> {
            if ok {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!(
                    "{what} (link '{}')",
                    self.name
                )))
            }
        };
        check(self.length_km >= 0.0, "length_km must be >= 0")?;
        check(
            self.attenuation_db_per_km >= 0.0,
            "attenuation_db_per_km must be >= 0",
        )?;
        check(self.extra_loss_db >= 0.0, "extra_loss_db must be >= 0")?;
        check(
            (0.0..=1.0).contains(&self.detector_efficiency),
            "detector_efficiency must be in [0,1]",
        )?;
        check(
            (0.0..1.0).contains(&self.dark_count_prob),
            "dark_count_prob must be in [0,1)",
        )?;
        check(
            (0.0..=0.5).contains(&self.misalignment_error),
            "misalignment_error must be in [0,0.5]",
        )?;
        check(self.pulse_rate_hz > 0.0, "pulse_rate_hz must be > 0")?;
        check(self.gate_ns > 0.0, "gate_ns must be > 0")?;
        Ok(())
    }

    /// Total dB loss between source and detector (fiber plus fixed losses).
    pub fn fiber_loss_db(&self) -> f64 {
        self.attenuation_db_per_km * self.length_km + self.extra_loss_db
    }

    /// Per-photon survival probability of the passive optical path,
    /// excluding detector efficiency.
    pub fn fiber_transmittance(&self) -> f64 {
        10f64.powf(-self.fiber_loss_db() / 10.0)
    }

    /// Overall transmission efficiency eta, detector efficiency included.
    pub fn channel_transmittance(&self) -> f64 {
        self.detector_efficiency * self.fiber_transmittance()
    }

    /// Background yield Y0 of the receiver: probability that at least one of
    /// the two gated detectors dark-clicks.
    pub fn background_yield(&self) -> f64 {
        let d = self.dark_count_prob;
        1.0 - (1.0 - d) * (1.0 - d)
    }
}

/// Named per-link parameter presets for the reference star network.
pub mod presets {
    use super::*;
    use crate::error::{Error, Result};

    pub fn benjamin() -> LinkParams {
        LinkParams::telecom("benjamin", 15.0)
    }

    pub fn copernico() -> LinkParams {
        LinkParams::telecom("copernico", 21.0)
    }

    pub fn keplero() -> LinkParams {
        LinkParams::telecom("keplero", 25.0)
    }

    pub fn all() -> [LinkParams; 3] {
        [benjamin(), copernico(), keplero()]
    }

    pub fn by_name(name: &str) -> Result<LinkParams> {
        match name.to_ascii_lowercase().as_str() {
            "benjamin" => Ok(benjamin()),
            "copernico" => Ok(copernico()),
            "keplero" => Ok(keplero()),
            other => Err(Error::UnknownPreset(other.to_string())),
        }
    }

    /// Default signal intensity per preset link: the grid optimum of the
    /// secure-rate pipeline at nu = 0.1 with calibrated noise.
    pub fn default_intensities(link: &LinkParams) -> IntensitySettings {
        let mu = match link.name.as_str() {
            "benjamin" => 0.62,
            "copernico" => 0.62,
            "keplero" => 0.61,
            _ => 0.60,
        };
        IntensitySettings::new(mu, 0.1).expect("preset intensities are valid")
    }
}

// ---------------------------------------------------------------------------
// Intensity settings
// ---------------------------------------------------------------------------

/// Mean photon numbers of the three transmitted intensity classes and the
/// proportions in which they are interleaved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntensitySettings {
    /// Signal mean photon number (mu > nu).
    pub mu: f64,
    /// Decoy mean photon number.
    pub nu: f64,
    /// Relative transmission weights (signal, decoy, vacuum).
    pub proportions: [f64; 3],
}

impl IntensitySettings {
    /// Settings with the standard 14:1:1 signal/decoy/vacuum proportions.
    pub fn new(mu: f64, nu: f64) -> Result<Self> {
        Self::with_proportions(mu, nu, [14.0, 1.0, 1.0])
    }

    pub fn with_proportions(mu: f64, nu: f64, proportions: [f64; 3]) -> Result<Self> {
        let s = IntensitySettings {
            mu,
            nu,
            proportions,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0) {
            return Err(Error::InvalidParameter("mu must be > 0".into()));
        }
        if !(self.nu >= 0.0) {
            return Err(Error::InvalidParameter("nu must be >= 0".into()));
        }
        if self.mu <= self.nu {
            return Err(Error::InvalidParameter(format!(
                "mu must exceed nu (mu={}, nu={})",
                self.mu, self.nu
            )));
        }
        if self.proportions.iter().any(|&p| p < 0.0) {
            return Err(Error::InvalidParameter(
                "proportions must be nonnegative".into(),
            ));
        }
        if self.proportions.iter().sum::<f64>() <= 0.0 {
            return Err(Error::InvalidParameter(
                "proportions must have a positive sum".into(),
            ));
        }
        Ok(())
    }

    /// Fraction of pulses sent in the signal class.
    pub fn signal_share(&self) -> f64 {
        self.proportions[0] / self.proportions.iter().sum::<f64>()
    }

    /// Class probabilities (signal, decoy, vacuum), normalised.
    pub fn class_probabilities(&self) -> [f64; 3] {
        let sum: f64 = self.proportions.iter().sum();
        [
            self.proportions[0] / sum,
            self.proportions[1] / sum,
            self.proportions[2] / sum,
        ]
    }
}

// ---------------------------------------------------------------------------
// Closed-form channel statistics
// ---------------------------------------------------------------------------

/// Expected gain of an intensity class with mean photon number `intensity`:
/// `Q = Y0 + 1 - exp(-eta * intensity)`, clamped to 1.
pub fn expected_gain(eta: f64, intensity: f64, y0: f64) -> f64 {
    debug_assert!((0.0..=1.0).contains(&eta));
    debug_assert!(intensity >= 0.0);
    (y0 + 1.0 - (-eta * intensity).exp()).min(1.0)
}

/// Expected QBER of an intensity class. Errors come from background clicks
/// (rate `e0`) and misaligned photon clicks (rate `e_det`).
pub fn expected_qber(eta: f64, intensity: f64, y0: f64, e_det: f64, e0: f64) -> Result<f64> {
    let q = expected_gain(eta, intensity, y0);
    if q <= 0.0 {
        return Err(Error::ZeroGain);
    }
    Ok((e0 * y0 + e_det * (1.0 - (-eta * intensity).exp())) / q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn preset_transmittances() {
        // eta = 0.15 * 10^(-(0.2*L + 1.7)/10)
        let eta15 = presets::benjamin().channel_transmittance();
        let eta21 = presets::copernico().channel_transmittance();
        let eta25 = presets::keplero().channel_transmittance();
        assert!((eta15 - 0.05082662342088038).abs() < 1e-15);
        assert!((eta21 - 0.03855593674153295).abs() < 1e-15);
        assert!((eta25 - 0.032069431342533476).abs() < 1e-15);
    }

    #[test]
    fn lossless_identity_link() {
        let mut link = LinkParams::telecom("ideal", 0.0);
        link.extra_loss_db = 0.0;
        link.detector_efficiency = 1.0;
        assert_eq!(link.channel_transmittance(), 1.0);
    }

    #[test]
    fn telecom_defaults() {
        let link = LinkParams::telecom("x", 10.0);
        assert_eq!(link.attenuation_db_per_km, 0.2);
        assert_eq!(link.extra_loss_db, 1.7);
        assert_eq!(link.detector_efficiency, 0.15);
        assert_eq!(link.pulse_rate_hz, 4.0e6);
        assert_eq!(link.gate_ns, 2.5);
        link.validate().unwrap();
    }

    #[test]
    fn transmittance_factorises() {
        // fiber transmittance times detector efficiency equals eta
        for link in presets::all() {
            let eta = link.channel_transmittance();
            assert!((link.fiber_transmittance() * link.detector_efficiency - eta).abs() < 1e-15);
        }
    }

    #[test]
    fn gain_examples() {
        assert_eq!(expected_gain(0.7, 0.0, 0.0), 0.0);
        assert!((expected_gain(0.0321, 0.48, 1e-5) - 0.015299904087).abs() < 1e-10);
        assert!((expected_gain(0.1, 0.1, 0.0) - 0.009950166251).abs() < 1e-10);
    }

    #[test]
    fn gain_clamps_to_one() {
        assert_eq!(expected_gain(1.0, 1e6, 0.5), 1.0);
    }

    #[test]
    fn qber_examples() {
        // error-free channel
        assert_eq!(expected_qber(0.1, 0.5, 0.0, 0.0, 0.5).unwrap(), 0.0);
        // pure misalignment limit
        let e = expected_qber(0.2, 0.6, 0.0, 0.03, 0.5).unwrap();
        assert!((e - 0.03).abs() < 1e-12);
        // mixed case
        let e = expected_qber(0.0321, 0.48, 1e-5, 0.031, 0.5).unwrap();
        assert!((e - 0.031306537869).abs() < 1e-10);
    }

    #[test]
    fn qber_zero_gain_is_an_error() {
        assert!(matches!(
            expected_qber(0.1, 0.0, 0.0, 0.03, 0.5),
            Err(Error::ZeroGain)
        ));
    }

    #[test]
    fn intensity_settings_invariants() {
        let s = IntensitySettings::new(0.5, 0.1).unwrap();
        assert_eq!(s.proportions, [14.0, 1.0, 1.0]);
        assert!((s.signal_share() - 14.0 / 16.0).abs() < 1e-15);
        assert!(IntensitySettings::new(0.1, 0.1).is_err());
        assert!(IntensitySettings::new(0.1, 0.5).is_err());
        assert!(IntensitySettings::with_proportions(0.5, 0.1, [0.0, 0.0, 0.0]).is_err());
        assert!(IntensitySettings::with_proportions(0.5, 0.1, [-1.0, 1.0, 1.0]).is_err());
    }

    #[test]
    fn background_yield_two_detectors() {
        let mut link = presets::keplero();
        link.dark_count_prob = 1e-3;
        let y0 = link.background_yield();
        assert!((y0 - (2e-3 - 1e-6)).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn transmittance_decreases_with_length(l1 in 0.0..60.0f64, dl in 0.01..40.0f64) {
            let a = LinkParams::telecom("a", l1).channel_transmittance();
            let b = LinkParams::telecom("b", l1 + dl).channel_transmittance();
            prop_assert!(b < a);
        }

        #[test]
        fn transmittance_decreases_with_extra_loss(extra in 0.0..20.0f64, de in 0.01..10.0f64) {
            let mut link = LinkParams::telecom("a", 10.0);
            link.extra_loss_db = extra;
            let a = link.channel_transmittance();
            link.extra_loss_db = extra + de;
            prop_assert!(link.channel_transmittance() < a);
        }

        #[test]
        fn gain_monotone_in_intensity_and_eta(
            eta in 1e-4..1.0f64,
            m in 0.0..5.0f64,
            dm in 1e-6..1.0f64,
            y0 in 0.0..0.01f64,
        ) {
            let q = expected_gain(eta, m, y0);
            prop_assert!((0.0..=1.0).contains(&q));
            if q < 1.0 {
                prop_assert!(expected_gain(eta, m + dm, y0) > q);
            }
        }

        #[test]
        fn qber_bounded_by_half(eta in 1e-3..1.0f64, m in 1e-3..2.0f64, y0 in 1e-9..0.01f64, edet in 0.0..0.5f64) {
            let e = expected_qber(eta, m, y0, edet, VACUUM_ERROR_RATE).unwrap();
            prop_assert!(e >= 0.0 && e <= 0.5 + 1e-12);
        }
    }

    #[test]
    fn gain_limits() {
        let y0 = 1e-4;
        // mu -> 0 recovers the background yield
        assert!((expected_gain(0.05, 1e-12, y0) - y0).abs() < 1e-12);
        // mu -> infinity saturates at the clamp
        assert_eq!(expected_gain(0.05, 1e9, y0), 1.0);
    }
}
