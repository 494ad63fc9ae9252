//! Pulse-level Monte Carlo simulation of the quantum exchange: weak
//! coherent pulse generation, channel transit (optionally through an
//! eavesdropper), and gated two-detector measurement.
//!
//! Every pulse carries its ground-truth photon number through the whole
//! pipeline, so the decoy-state bounds can later be checked against the true
//! per-photon-number yields and error rates.
//!
//! Loss is factorised: fiber and coupling losses act per photon in transit,
//! detector efficiency acts at detection. The product equals the closed-form
//! channel transmittance eta of `model`, which keeps the photon-number
//! splitting attack expressible (forwarded photons can bypass the fiber
//! while detection stays realistic).

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{IntensitySettings, LinkParams};

// ---------------------------------------------------------------------------
// Record types
// ---------------------------------------------------------------------------

/// Intensity class of a transmitted pulse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum IntensityClass {
    Signal,
    Decoy,
    Vacuum,
}

impl IntensityClass {
    pub const ALL: [IntensityClass; 3] = [
        IntensityClass::Signal,
        IntensityClass::Decoy,
        IntensityClass::Vacuum,
    ];

    pub fn index(self) -> usize {
        match self {
            IntensityClass::Signal => 0,
            IntensityClass::Decoy => 1,
            IntensityClass::Vacuum => 2,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            IntensityClass::Signal => "signal",
            IntensityClass::Decoy => "decoy",
            IntensityClass::Vacuum => "vacuum",
        }
    }
}

/// Preparation/measurement basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Basis {
    B0,
    B1,
}

/// What produced a click (diagnostic).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ClickSource {
    Photon,
    DarkCount,
    DoubleClick,
}

/// Ground truth for one transmitted pulse.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PulseRecord {
    pub index: u64,
    pub intensity_class: IntensityClass,
    /// True photon number, Poisson-sampled for signal/decoy classes.
    pub photon_number: u32,
    pub basis: Basis,
    pub bit: u8,
}

/// Receiver-side result for one pulse.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DetectionOutcome {
    pub index: u64,
    pub clicked: bool,
    /// Present iff `clicked`.
    pub measured_bit: Option<u8>,
    pub receiver_basis: Basis,
    pub click_source: Option<ClickSource>,
}

// ---------------------------------------------------------------------------
// Eavesdropper model
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum EveKind {
    #[default]
    None,
    Pns,
}

/// Photon-number-splitting eavesdropper. Multi-photon pulses lose one photon
/// to Eve and the remainder is forwarded (losslessly if `forward_lossless`);
/// single-photon pulses are blocked with probability `block_single_prob`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EveModel {
    pub kind: EveKind,
    pub block_single_prob: f64,
    pub forward_lossless: bool,
}

impl Default for EveModel {
    fn default() -> Self {
        EveModel::none()
    }
}

impl EveModel {
    pub fn none() -> Self {
        EveModel {
            kind: EveKind::None,
            block_single_prob: 0.0,
            forward_lossless: false,
        }
    }

    pub fn pns(block_single_prob: f64, forward_lossless: bool) -> Result<Self> {
        if !(0.0..=1.0).contains(&block_single_prob) {
            return Err(Error::InvalidParameter(format!(
                "block_single_prob must be in [0,1], got {block_single_prob}"
            )));
        }
        Ok(EveModel {
            kind: EveKind::Pns,
            block_single_prob,
            forward_lossless,
        })
    }

    /// PNS attack tuned so the signal-class gain matches the honest channel:
    /// multi-photon remainders are forwarded losslessly and the single-photon
    /// blocking probability is solved from the gain balance. Fails when the
    /// lossless multi-photon surplus exceeds what single-photon blocking can
    /// remove (short links or large mu).
    pub fn pns_gain_preserving(link: &LinkParams, mu: f64) -> Result<Self> {
        let eff = link.detector_efficiency;
        let eta = link.channel_transmittance();
        let keep = 1.0 - eff;
        // P(no photon click) summed over n>=2 with lossless forwarding
        let t_multi = if keep <= 0.0 {
            0.0
        } else {
            (-mu).exp() * ((mu * keep).exp() - 1.0 - mu * keep) / keep
        };
        let s0 = (-mu).exp() + mu * (-mu).exp() * (1.0 - eta) + t_multi;
        let b = ((-eta * mu).exp() - s0) / (mu * (-mu).exp() * eta);
        if !(0.0..=1.0).contains(&b) {
            return Err(Error::PnsInfeasible { b, mu });
        }
        Ok(EveModel {
            kind: EveKind::Pns,
            block_single_prob: b,
            forward_lossless: true,
        })
    }
}

// ---------------------------------------------------------------------------
// Elementary operations
// ---------------------------------------------------------------------------

/// Per-exchange pulse sampler; holds the class distribution and the Poisson
/// samplers so they are built once.
pub struct PulseSource {
    cum_signal: f64,
    cum_decoy: f64,
    poisson_mu: Poisson<f64>,
    poisson_nu: Option<Poisson<f64>>,
}

impl PulseSource {
    pub fn new(settings: &IntensitySettings) -> Result<Self> {
        settings.validate()?;
        let p = settings.class_probabilities();
        let poisson_mu = Poisson::new(settings.mu)
            .map_err(|e| Error::InvalidParameter(format!("bad signal intensity: {e}")))?;
        let poisson_nu = if settings.nu > 0.0 {
            Some(
                Poisson::new(settings.nu)
                    .map_err(|e| Error::InvalidParameter(format!("bad decoy intensity: {e}")))?,
            )
        } else {
            None
        };
        Ok(PulseSource {
            cum_signal: p[0],
            cum_decoy: p[0] + p[1],
            poisson_mu,
            poisson_nu,
        })
    }

    pub fn sample(&self, index: u64, basis_bias: f64, rng: &mut impl Rng) -> PulseRecord {
        let u: f64 = rng.random();
        let (class, photons) = if u < self.cum_signal {
            (IntensityClass::Signal, self.poisson_mu.sample(rng))
        } else if u < self.cum_decoy {
            let n = match &self.poisson_nu {
                Some(p) => p.sample(rng),
                None => 0.0,
            };
            (IntensityClass::Decoy, n)
        } else {
            (IntensityClass::Vacuum, 0.0)
        };
        PulseRecord {
            index,
            intensity_class: class,
            photon_number: photons.min(255.0) as u32,
            basis: if rng.random_bool(basis_bias) {
                Basis::B0
            } else {
                Basis::B1
            },
            bit: rng.random::<bool>() as u8,
        }
    }
}

/// Sample one pulse with the configured class proportions; photon number is
/// Poisson in the class mean, basis and bit are random (`basis_bias` is the
/// probability of basis B0).
pub fn generate_pulse(
    settings: &IntensitySettings,
    basis_bias: f64,
    index: u64,
    rng: &mut impl Rng,
) -> Result<PulseRecord> {
    Ok(PulseSource::new(settings)?.sample(index, basis_bias, rng))
}

fn thin(n: u32, p: f64, rng: &mut impl Rng) -> u32 {
    let mut survivors = 0;
    for _ in 0..n {
        if rng.random::<f64>() < p {
            survivors += 1;
        }
    }
    survivors
}

/// Propagate a pulse through the channel; returns the surviving photon count
/// at the receiver input (detector efficiency not yet applied).
pub fn transmit(pulse: &PulseRecord, link: &LinkParams, eve: &EveModel, rng: &mut impl Rng) -> u32 {
    let n = pulse.photon_number;
    if n == 0 {
        return 0;
    }
    let t_fiber = link.fiber_transmittance();
    match eve.kind {
        EveKind::None => thin(n, t_fiber, rng),
        EveKind::Pns => {
            if n >= 2 {
                // Eve keeps one photon and forwards the rest.
                if eve.forward_lossless {
                    n - 1
                } else {
                    thin(n - 1, t_fiber, rng)
                }
            } else if rng.random::<f64>() < eve.block_single_prob {
                0
            } else {
                thin(1, t_fiber, rng)
            }
        }
    }
}

/// Gated two-detector measurement. Surviving photons register with the
/// detector efficiency on the detector matching the encoded bit (uniform on
/// basis mismatch); a matched-basis click flips to the wrong detector with
/// the misalignment probability; each detector independently dark-clicks.
/// A double click squashes to a uniform random bit.
pub fn detect(
    survivors: u32,
    pulse: &PulseRecord,
    receiver_basis: Basis,
    link: &LinkParams,
    rng: &mut impl Rng,
) -> DetectionOutcome {
    let eff = link.detector_efficiency;
    let mut photon_click = false;
    for _ in 0..survivors {
        if rng.random::<f64>() < eff {
            photon_click = true;
            break;
        }
    }

    let photon_detector: Option<u8> = if photon_click {
        if pulse.basis == receiver_basis {
            let mut det = pulse.bit;
            if rng.random::<f64>() < link.misalignment_error {
                det ^= 1;
            }
            Some(det)
        } else {
            Some(rng.random::<bool>() as u8)
        }
    } else {
        None
    };

    // Joint draw for the two independent dark counts.
    let d = link.dark_count_prob;
    let u: f64 = rng.random();
    let both = d * d;
    let single = d * (1.0 - d);
    let (dark0, dark1) = if u < both {
        (true, true)
    } else if u < both + single {
        (true, false)
    } else if u < both + 2.0 * single {
        (false, true)
    } else {
        (false, false)
    };

    let click0 = dark0 || photon_detector == Some(0);
    let click1 = dark1 || photon_detector == Some(1);

    let (clicked, measured_bit, click_source) = match (click0, click1) {
        (false, false) => (false, None, None),
        (true, true) => (
            true,
            Some(rng.random::<bool>() as u8),
            Some(ClickSource::DoubleClick),
        ),
        (true, false) => (
            true,
            Some(0),
            Some(if photon_detector == Some(0) {
                ClickSource::Photon
            } else {
                ClickSource::DarkCount
            }),
        ),
        (false, true) => (
            true,
            Some(1),
            Some(if photon_detector == Some(1) {
                ClickSource::Photon
            } else {
                ClickSource::DarkCount
            }),
        ),
    };

    DetectionOutcome {
        index: pulse.index,
        clicked,
        measured_bit,
        receiver_basis,
        click_source,
    }
}

// ---------------------------------------------------------------------------
// Transcript
// ---------------------------------------------------------------------------

const F_BASIS: u8 = 1 << 0;
const F_BIT: u8 = 1 << 1;
const F_RBASIS: u8 = 1 << 2;
const F_CLICKED: u8 = 1 << 3;
const F_MBIT: u8 = 1 << 4;
const SRC_SHIFT: u8 = 5;

#[derive(Clone, Copy)]
struct PulseRow {
    class: u8,
    photon: u8,
    flags: u8,
}

/// Paired sender/receiver record streams of one exchange, stored compactly
/// (3 bytes per pulse) with the ground-truth photon numbers.
pub struct Transcript {
    pub link_name: String,
    pub seed: u64,
    rows: Vec<PulseRow>,
}

impl Transcript {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn pulse(&self, i: usize) -> PulseRecord {
        let r = &self.rows[i];
        PulseRecord {
            index: i as u64,
            intensity_class: IntensityClass::ALL[r.class as usize],
            photon_number: r.photon as u32,
            basis: if r.flags & F_BASIS != 0 {
                Basis::B0
            } else {
                Basis::B1
            },
            bit: (r.flags & F_BIT != 0) as u8,
        }
    }

    pub fn outcome(&self, i: usize) -> DetectionOutcome {
        let r = &self.rows[i];
        let clicked = r.flags & F_CLICKED != 0;
        DetectionOutcome {
            index: i as u64,
            clicked,
            measured_bit: clicked.then_some((r.flags & F_MBIT != 0) as u8),
            receiver_basis: if r.flags & F_RBASIS != 0 {
                Basis::B0
            } else {
                Basis::B1
            },
            click_source: match r.flags >> SRC_SHIFT & 0b11 {
                1 => Some(ClickSource::Photon),
                2 => Some(ClickSource::DarkCount),
                3 => Some(ClickSource::DoubleClick),
                _ => None,
            },
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (PulseRecord, DetectionOutcome)> + '_ {
        (0..self.len()).map(move |i| (self.pulse(i), self.outcome(i)))
    }

    /// Tally the ground-truth ledger.
    pub fn ground_truth(&self) -> GroundTruth {
        let mut gt = GroundTruth::default();
        for i in 0..self.len() {
            let r = &self.rows[i];
            let class = r.class as usize;
            let n = (r.photon as usize).min(MAX_TRACKED_PHOTONS);
            gt.sent[class][n] += 1;
            if r.flags & F_CLICKED != 0 {
                gt.clicked[class][n] += 1;
                let sifted = (r.flags & F_BASIS != 0) == (r.flags & F_RBASIS != 0);
                if sifted {
                    gt.sifted[class][n] += 1;
                    let bit = r.flags & F_BIT != 0;
                    let mbit = r.flags & F_MBIT != 0;
                    if bit != mbit {
                        gt.errors[class][n] += 1;
                    }
                }
            }
        }
        gt
    }

    /// Columnar export, one row per pulse.
    pub fn export_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(
            w,
            "index,class,photon_number,basis,bit,clicked,receiver_basis,measured_bit"
        )?;
        for i in 0..self.len() {
            let p = self.pulse(i);
            let o = self.outcome(i);
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                i,
                p.intensity_class.label(),
                p.photon_number,
                (p.basis == Basis::B1) as u8,
                p.bit,
                o.clicked as u8,
                (o.receiver_basis == Basis::B1) as u8,
                o.measured_bit.map_or(String::new(), |b| b.to_string()),
            )?;
        }
        Ok(())
    }
}

/// Photon numbers above this are tallied into the last ledger bucket.
pub const MAX_TRACKED_PHOTONS: usize = 8;

/// Per-class, per-photon-number tallies accumulated from ground truth.
#[derive(Debug, Clone, Default)]
pub struct GroundTruth {
    pub sent: [[u64; MAX_TRACKED_PHOTONS + 1]; 3],
    pub clicked: [[u64; MAX_TRACKED_PHOTONS + 1]; 3],
    pub sifted: [[u64; MAX_TRACKED_PHOTONS + 1]; 3],
    pub errors: [[u64; MAX_TRACKED_PHOTONS + 1]; 3],
}

impl GroundTruth {
    pub fn sent_total(&self, class: IntensityClass) -> u64 {
        self.sent[class.index()].iter().sum()
    }

    /// True single-photon gain of the signal class:
    /// P(pulse had exactly one photon and clicked).
    pub fn q1_true(&self) -> f64 {
        let sent = self.sent_total(IntensityClass::Signal);
        if sent == 0 {
            return 0.0;
        }
        self.clicked[0][1] as f64 / sent as f64
    }

    /// True single-photon error rate among sifted signal clicks.
    pub fn e1_true(&self) -> Option<f64> {
        let sifted = self.sifted[0][1];
        (sifted > 0).then(|| self.errors[0][1] as f64 / sifted as f64)
    }

    /// Observed yield (click probability) for pulses of a given true photon
    /// number within a class.
    pub fn yield_given_n(&self, class: IntensityClass, n: usize) -> Option<f64> {
        let c = class.index();
        (self.sent[c][n] > 0).then(|| self.clicked[c][n] as f64 / self.sent[c][n] as f64)
    }
}

/// Run a seeded exchange of `n_pulses` pulses. Identical seeds produce
/// bit-identical transcripts.
pub fn run_exchange(
    n_pulses: u64,
    link: &LinkParams,
    settings: &IntensitySettings,
    eve: &EveModel,
    seed: u64,
) -> Result<Transcript> {
    if n_pulses == 0 {
        return Err(Error::InvalidParameter("n_pulses must be >= 1".into()));
    }
    link.validate()?;
    let source = PulseSource::new(settings)?;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(n_pulses as usize);

    for index in 0..n_pulses {
        let pulse = source.sample(index, 0.5, &mut rng);
        let survivors = transmit(&pulse, link, eve, &mut rng);
        let receiver_basis = if rng.random::<bool>() {
            Basis::B0
        } else {
            Basis::B1
        };
        let outcome = detect(survivors, &pulse, receiver_basis, link, &mut rng);

        let mut flags = 0u8;
        if pulse.basis == Basis::B0 {
            flags |= F_BASIS;
        }
        if pulse.bit == 1 {
            flags |= F_BIT;
        }
        if receiver_basis == Basis::B0 {
            flags |= F_RBASIS;
        }
        if outcome.clicked {
            flags |= F_CLICKED;
        }
        if outcome.measured_bit == Some(1) {
            flags |= F_MBIT;
        }
        flags |= match outcome.click_source {
            None => 0,
            Some(ClickSource::Photon) => 1,
            Some(ClickSource::DarkCount) => 2,
            Some(ClickSource::DoubleClick) => 3,
        } << SRC_SHIFT;

        rows.push(PulseRow {
            class: pulse.intensity_class.index() as u8,
            photon: pulse.photon_number.min(255) as u8,
            flags,
        });
    }

    Ok(Transcript {
        link_name: link.name.clone(),
        seed,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{expected_gain, presets};

    fn rng(seed: u64) -> ChaCha12Rng {
        ChaCha12Rng::seed_from_u64(seed)
    }

    #[test]
    fn degenerate_proportions_force_signal() {
        let settings = IntensitySettings::with_proportions(0.5, 0.1, [1.0, 0.0, 0.0]).unwrap();
        let mut r = rng(7);
        for i in 0..1000 {
            let p = generate_pulse(&settings, 0.5, i, &mut r).unwrap();
            assert_eq!(p.intensity_class, IntensityClass::Signal);
        }
    }

    #[test]
    fn vacuum_class_emits_no_photons() {
        let settings = IntensitySettings::with_proportions(0.5, 0.1, [0.0, 0.0, 1.0]).unwrap();
        let mut r = rng(11);
        for i in 0..200 {
            let p = generate_pulse(&settings, 0.5, i, &mut r).unwrap();
            assert_eq!(p.intensity_class, IntensityClass::Vacuum);
            assert_eq!(p.photon_number, 0);
        }
    }

    #[test]
    fn class_proportions_match_14_1_1() {
        let settings = IntensitySettings::new(0.5, 0.1).unwrap();
        let source = PulseSource::new(&settings).unwrap();
        let mut r = rng(1);
        let n = 160_000u64;
        let mut counts = [0u64; 3];
        for i in 0..n {
            counts[source.sample(i, 0.5, &mut r).intensity_class.index()] += 1;
        }
        // 3-sigma binomial window around 14/16 of N
        let p = 14.0 / 16.0;
        let sigma = (n as f64 * p * (1.0 - p)).sqrt();
        let expected = n as f64 * p;
        assert!(
            (counts[0] as f64 - expected).abs() < 3.0 * sigma,
            "signal count {} outside 3 sigma of {expected}",
            counts[0]
        );
    }

    #[test]
    fn multiphoton_fraction_matches_poisson_tail() {
        // P(n >= 2 | mu = 0.5) = 1 - e^-0.5 * 1.5
        let settings = IntensitySettings::with_proportions(0.5, 0.1, [1.0, 0.0, 0.0]).unwrap();
        let source = PulseSource::new(&settings).unwrap();
        let mut r = rng(2);
        let n = 200_000u64;
        let multi = (0..n)
            .filter(|&i| source.sample(i, 0.5, &mut r).photon_number >= 2)
            .count();
        let p = 1.0 - (-0.5f64).exp() * 1.5;
        assert!((p - 0.090204).abs() < 1e-6);
        let sigma = (n as f64 * p * (1.0 - p)).sqrt();
        assert!((multi as f64 - n as f64 * p).abs() < 3.0 * sigma);
    }

    #[test]
    fn transmit_vacuum_yields_nothing() {
        let link = presets::keplero();
        let pulse = PulseRecord {
            index: 0,
            intensity_class: IntensityClass::Vacuum,
            photon_number: 0,
            basis: Basis::B0,
            bit: 0,
        };
        let mut r = rng(3);
        assert_eq!(transmit(&pulse, &link, &EveModel::none(), &mut r), 0);
    }

    #[test]
    fn transmit_thins_binomially() {
        let link = presets::benjamin();
        let t = link.fiber_transmittance();
        let pulse = PulseRecord {
            index: 0,
            intensity_class: IntensityClass::Signal,
            photon_number: 3,
            basis: Basis::B0,
            bit: 0,
        };
        let mut r = rng(4);
        let trials = 40_000;
        let mut total = 0u64;
        for _ in 0..trials {
            let s = transmit(&pulse, &link, &EveModel::none(), &mut r);
            assert!(s <= 3);
            total += s as u64;
        }
        let mean = total as f64 / trials as f64;
        let sigma = (3.0 * t * (1.0 - t) / trials as f64).sqrt();
        assert!((mean - 3.0 * t).abs() < 3.0 * sigma);
    }

    #[test]
    fn pns_forced_behaviour() {
        let link = presets::keplero();
        let eve = EveModel::pns(1.0, true).unwrap();
        let mut r = rng(5);
        let single = PulseRecord {
            index: 0,
            intensity_class: IntensityClass::Signal,
            photon_number: 1,
            basis: Basis::B0,
            bit: 0,
        };
        let double = PulseRecord {
            photon_number: 2,
            ..single
        };
        for _ in 0..200 {
            assert_eq!(transmit(&single, &link, &eve, &mut r), 0);
            assert_eq!(transmit(&double, &link, &eve, &mut r), 1);
        }
    }

    #[test]
    fn pns_lossy_conserves_photons() {
        let link = presets::keplero();
        let eve = EveModel::pns(0.3, false).unwrap();
        let mut r = rng(6);
        for n in 0..6u32 {
            let pulse = PulseRecord {
                index: 0,
                intensity_class: IntensityClass::Signal,
                photon_number: n,
                basis: Basis::B0,
                bit: 0,
            };
            for _ in 0..100 {
                assert!(transmit(&pulse, &link, &eve, &mut r) <= n);
            }
        }
    }

    #[test]
    fn pns_gain_preserving_blocking() {
        let link = presets::keplero();
        let eve = EveModel::pns_gain_preserving(&link, 0.5).unwrap();
        assert!((eve.block_single_prob - 0.9656).abs() < 1e-3);
        assert!(eve.forward_lossless);
        // at larger mu the lossless multi-photon surplus cannot be cancelled
        assert!(matches!(
            EveModel::pns_gain_preserving(&link, 0.62),
            Err(Error::PnsInfeasible { .. })
        ));
    }

    #[test]
    fn detect_silent_without_photons_or_darks() {
        let mut link = presets::keplero();
        link.dark_count_prob = 0.0;
        let pulse = PulseRecord {
            index: 0,
            intensity_class: IntensityClass::Vacuum,
            photon_number: 0,
            basis: Basis::B0,
            bit: 0,
        };
        let mut r = rng(8);
        let o = detect(0, &pulse, Basis::B0, &link, &mut r);
        assert!(!o.clicked);
        assert_eq!(o.measured_bit, None);
        assert_eq!(o.click_source, None);
    }

    #[test]
    fn dark_only_clicks_are_symmetric() {
        // click probability -> Y0, conditional error rate -> 0.5
        let mut link = presets::keplero();
        link.dark_count_prob = 0.05;
        let y0 = link.background_yield();
        let pulse = PulseRecord {
            index: 0,
            intensity_class: IntensityClass::Vacuum,
            photon_number: 0,
            basis: Basis::B0,
            bit: 0,
        };
        let mut r = rng(9);
        let trials = 100_000;
        let (mut clicks, mut errors) = (0u64, 0u64);
        for _ in 0..trials {
            let o = detect(0, &pulse, Basis::B0, &link, &mut r);
            if o.clicked {
                clicks += 1;
                if o.measured_bit != Some(pulse.bit) {
                    errors += 1;
                }
            }
        }
        let sigma_q = (y0 * (1.0 - y0) / trials as f64).sqrt();
        assert!((clicks as f64 / trials as f64 - y0).abs() < 3.0 * sigma_q);
        let e = errors as f64 / clicks as f64;
        let sigma_e = (0.25 / clicks as f64).sqrt();
        assert!((e - 0.5).abs() < 3.0 * sigma_e, "vacuum error rate {e}");
    }

    #[test]
    fn misalignment_flips_at_configured_rate() {
        let mut link = presets::keplero();
        link.dark_count_prob = 0.0;
        link.detector_efficiency = 1.0;
        link.misalignment_error = 0.03;
        let pulse = PulseRecord {
            index: 0,
            intensity_class: IntensityClass::Signal,
            photon_number: 1,
            basis: Basis::B0,
            bit: 1,
        };
        let mut r = rng(10);
        let trials = 100_000;
        let wrong = (0..trials)
            .filter(|_| {
                detect(1, &pulse, Basis::B0, &link, &mut r).measured_bit != Some(pulse.bit)
            })
            .count();
        let sigma = (trials as f64 * 0.03 * 0.97).sqrt();
        assert!((wrong as f64 - trials as f64 * 0.03).abs() < 3.0 * sigma);
    }

    #[test]
    fn exchange_is_deterministic() {
        let link = presets::keplero();
        let settings = IntensitySettings::new(0.5, 0.1).unwrap();
        let a = run_exchange(10, &link, &settings, &EveModel::none(), 42).unwrap();
        let b = run_exchange(10, &link, &settings, &EveModel::none(), 42).unwrap();
        assert_eq!(a.len(), 10);
        for i in 0..10 {
            assert_eq!(a.pulse(i), b.pulse(i));
            assert_eq!(a.outcome(i), b.outcome(i));
        }
        let c = run_exchange(10, &link, &settings, &EveModel::none(), 43).unwrap();
        assert!((0..10).any(|i| a.pulse(i) != c.pulse(i) || a.outcome(i) != c.outcome(i)));
    }

    #[test]
    fn measured_bit_present_iff_clicked() {
        let link = presets::keplero();
        let settings = presets::default_intensities(&link);
        let t = run_exchange(20_000, &link, &settings, &EveModel::none(), 13).unwrap();
        for (_, o) in t.iter() {
            assert_eq!(o.clicked, o.measured_bit.is_some());
            assert_eq!(o.clicked, o.click_source.is_some());
        }
    }

    #[test]
    fn measured_gain_matches_model() {
        let link = presets::keplero();
        let settings = presets::default_intensities(&link);
        let n = 500_000u64;
        let t = run_exchange(n, &link, &settings, &EveModel::none(), 21).unwrap();
        let gt = t.ground_truth();
        let eta = link.channel_transmittance();
        let y0 = link.background_yield();

        let sent = gt.sent_total(IntensityClass::Signal);
        let clicked: u64 = gt.clicked[0].iter().sum();
        let q_measured = clicked as f64 / sent as f64;
        let q_model = expected_gain(eta, settings.mu, y0);
        let sigma = (q_model * (1.0 - q_model) / sent as f64).sqrt();
        assert!(
            (q_measured - q_model).abs() < 3.0 * sigma,
            "signal gain {q_measured} vs model {q_model} (3 sigma {:.2e})",
            3.0 * sigma
        );

        // true single-photon yield approaches eta (plus background)
        let y1 = gt.yield_given_n(IntensityClass::Signal, 1).unwrap();
        let y1_model = y0 + eta - y0 * eta; // 1 - (1-Y0)(1-eta)
        let n1 = gt.sent[0][1];
        let sigma1 = (y1_model * (1.0 - y1_model) / n1 as f64).sqrt();
        assert!((y1 - y1_model).abs() < 3.0 * sigma1);
    }

    #[test]
    fn csv_export_shape() {
        let link = presets::keplero();
        let settings = IntensitySettings::new(0.5, 0.1).unwrap();
        let t = run_exchange(5, &link, &settings, &EveModel::none(), 3).unwrap();
        let mut buf = Vec::new();
        t.export_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 6);
        assert_eq!(
            lines[0],
            "index,class,photon_number,basis,bit,clicked,receiver_basis,measured_bit"
        );
        assert!(lines[1].starts_with("0,"));
    }
}
