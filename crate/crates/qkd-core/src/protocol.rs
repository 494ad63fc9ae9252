//! Classical post-processing: basis sifting and per-class tallies, oracle
//! error correction with information-theoretic leakage accounting, privacy
//! amplification by seeded Toeplitz hashing, and one-time-pad usage of the
//! final key.

use rand::RngCore;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::error::{Error, Result};
use crate::security::{h2, SecurityEstimate};
use crate::sim::{DetectionOutcome, IntensityClass, PulseRecord, Transcript};

// ---------------------------------------------------------------------------
// Sifting and tallies
// ---------------------------------------------------------------------------

/// Raw tallies for one intensity class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassStats {
    pub sent: u64,
    pub clicks: u64,
    pub sifted: u64,
    /// Bit errors among sifted clicks.
    pub errors: u64,
}

/// Per-class gain/QBER tallies over a whole exchange.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GainQberStats {
    classes: [ClassStats; 3],
}

impl GainQberStats {
    pub fn class(&self, c: IntensityClass) -> &ClassStats {
        &self.classes[c.index()]
    }

    /// Gain Q: clicks per sent pulse (any basis).
    pub fn gain(&self, c: IntensityClass) -> f64 {
        let s = self.class(c);
        if s.sent == 0 {
            0.0
        } else {
            s.clicks as f64 / s.sent as f64
        }
    }

    /// QBER E: error fraction among sifted clicks.
    pub fn qber(&self, c: IntensityClass) -> Result<f64> {
        let s = self.class(c);
        if s.sifted == 0 {
            return Err(Error::ZeroGain);
        }
        Ok(s.errors as f64 / s.sifted as f64)
    }

    /// Measured background yield: the vacuum-class gain.
    pub fn y0_measured(&self) -> f64 {
        self.gain(IntensityClass::Vacuum)
    }
}

/// Sifted key material: basis-matched clicked pulses only, with the sender
/// bit, the receiver bit, and the intensity class of every kept position.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SiftedKeyPair {
    pub server_bits: BitString,
    pub client_bits: BitString,
    pub class_tags: Vec<IntensityClass>,
}

impl SiftedKeyPair {
    pub fn len(&self) -> usize {
        self.server_bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Positions where server and client disagree.
    pub fn mismatches(&self) -> usize {
        self.server_bits.hamming_distance(&self.client_bits)
    }

    /// Restrict to one intensity class (the signal subset forms the raw key).
    pub fn filter_class(&self, class: IntensityClass) -> SiftedKeyPair {
        let mut out = SiftedKeyPair::default();
        for (i, &tag) in self.class_tags.iter().enumerate() {
            if tag == class {
                out.server_bits.push(self.server_bits.get(i));
                out.client_bits.push(self.client_bits.get(i));
                out.class_tags.push(tag);
            }
        }
        out
    }
}

fn sift_feed(pair: &mut SiftedKeyPair, stats: &mut GainQberStats, p: &PulseRecord, o: &DetectionOutcome) {
    let s = &mut stats.classes[p.intensity_class.index()];
    s.sent += 1;
    if !o.clicked {
        return;
    }
    s.clicks += 1;
    if p.basis != o.receiver_basis {
        return;
    }
    let measured = o.measured_bit.expect("clicked outcome carries a bit");
    s.sifted += 1;
    if measured != p.bit {
        s.errors += 1;
    }
    pair.server_bits.push(p.bit == 1);
    pair.client_bits.push(measured == 1);
    pair.class_tags.push(p.intensity_class);
}

/// Sift a transcript: keep basis-matched clicked pulses, tallying gain and
/// QBER per intensity class over all sent pulses.
pub fn sift(transcript: &Transcript) -> (SiftedKeyPair, GainQberStats) {
    let mut pair = SiftedKeyPair::default();
    let mut stats = GainQberStats::default();
    for (p, o) in transcript.iter() {
        sift_feed(&mut pair, &mut stats, &p, &o);
    }
    (pair, stats)
}

/// Sift explicitly paired streams; errors if they are not aligned.
pub fn sift_streams(
    pulses: &[PulseRecord],
    outcomes: &[DetectionOutcome],
) -> Result<(SiftedKeyPair, GainQberStats)> {
    if pulses.len() != outcomes.len() {
        return Err(Error::MisalignedTranscript {
            pulses: pulses.len(),
            outcomes: outcomes.len(),
        });
    }
    let mut pair = SiftedKeyPair::default();
    let mut stats = GainQberStats::default();
    for (p, o) in pulses.iter().zip(outcomes) {
        sift_feed(&mut pair, &mut stats, p, o);
    }
    Ok((pair, stats))
}

// ---------------------------------------------------------------------------
// Error correction
// ---------------------------------------------------------------------------

/// Ground-truth-assisted reconciliation: the client key is set equal to the
/// server key, and the information-theoretic cost `ceil(f * H2(E) * len)` of
/// a bidirectional protocol with inefficiency `f` is charged against the key
/// budget. Returns the corrected key and the leaked bit count.
pub fn error_correct(pair: &SiftedKeyPair, f: f64) -> Result<(BitString, usize)> {
    if pair.is_empty() {
        return Err(Error::InvalidParameter(
            "cannot reconcile an empty sifted key".into(),
        ));
    }
    let qber = pair.mismatches() as f64 / pair.len() as f64;
    if qber >= 0.5 {
        return Err(Error::ReconciliationImpossible { qber });
    }
    let leaked = (f * h2(qber) * pair.len() as f64).ceil() as usize;
    Ok((pair.server_bits.clone(), leaked))
}

// ---------------------------------------------------------------------------
// Privacy amplification
// ---------------------------------------------------------------------------

/// Hash `input` to `m` bits with a seeded random binary Toeplitz matrix
/// T[i][j] = s[m - 1 + j - i], where `s` is a ChaCha-generated bit string of
/// length m + n - 1.
pub fn toeplitz_hash(input: &BitString, m: usize, seed: u64) -> BitString {
    let n = input.len();
    if m == 0 || n == 0 {
        return BitString::new();
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let diag_bits = m + n - 1;
    // one trailing zero word so off-the-end window reads are in bounds
    let mut s = vec![0u64; diag_bits.div_ceil(64) + 1];
    for w in s.iter_mut().take(diag_bits.div_ceil(64)) {
        *w = rng.next_u64();
    }

    let key = input.words();
    let mut out = BitString::with_capacity(m);
    for i in 0..m {
        // row i of T is the n-bit window of s starting at offset m - 1 - i
        let offset = m - 1 - i;
        let q = offset / 64;
        let r = offset % 64;
        let mut acc = 0u64;
        for (k, &kw) in key.iter().enumerate() {
            let w = if r == 0 {
                s[q + k]
            } else {
                (s[q + k] >> r) | (s[q + k + 1] << (64 - r))
            };
            acc ^= w & kw;
        }
        out.push(acc.count_ones() % 2 == 1);
    }
    out
}

/// Compress the corrected key to its secure length. The final length is
/// `floor(n * secure_fraction_per_sifted_bit)`, additionally capped so that
/// `leaked + final <= n`. A non-positive rate yields an empty key.
pub fn privacy_amplify(
    corrected: &BitString,
    leaked_bits: usize,
    estimate: &SecurityEstimate,
    seed: u64,
) -> BitString {
    let n = corrected.len();
    if n == 0 || estimate.rate_per_pulse <= 0.0 {
        return BitString::new();
    }
    let m = (n as f64 * estimate.secure_fraction_per_sifted_bit).floor() as usize;
    let m = m.min(n.saturating_sub(leaked_bits));
    if m == 0 {
        return BitString::new();
    }
    toeplitz_hash(corrected, m, seed)
}

// ---------------------------------------------------------------------------
// One-time pad
// ---------------------------------------------------------------------------

/// Key material with strictly forward consumption; bits are never re-issued.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OneTimeKey {
    bits: BitString,
    cursor: usize,
}

impl OneTimeKey {
    pub fn from_bits(bits: BitString) -> Self {
        OneTimeKey { bits, cursor: 0 }
    }

    pub fn remaining_bits(&self) -> usize {
        self.bits.len() - self.cursor
    }

    /// Consume exactly `n` bits, advancing the cursor.
    pub fn take(&mut self, n: usize) -> Result<BitString> {
        if n > self.remaining_bits() {
            return Err(Error::InsufficientKey {
                requested: n,
                available: self.remaining_bits(),
            });
        }
        let out = self.bits.slice(self.cursor, n);
        self.cursor += n;
        Ok(out)
    }
}

fn xor_with_key(data: &[u8], key: &mut OneTimeKey) -> Result<Vec<u8>> {
    let key_bytes = key.take(8 * data.len())?.to_bytes();
    Ok(data
        .iter()
        .zip(key_bytes.iter())
        .map(|(d, k)| d ^ k)
        .collect())
}

/// One-time-pad encryption; consumes 8 bits of key per plaintext byte.
pub fn otp_encrypt(plaintext: &[u8], key: &mut OneTimeKey) -> Result<Vec<u8>> {
    xor_with_key(plaintext, key)
}

/// One-time-pad decryption (the inverse XOR, consuming the receiver's copy
/// of the key).
pub fn otp_decrypt(ciphertext: &[u8], key: &mut OneTimeKey) -> Result<Vec<u8>> {
    xor_with_key(ciphertext, key)
}
