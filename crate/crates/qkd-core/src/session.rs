//! One full key-exchange session: Monte Carlo exchange, sifting, error
//! correction, security estimation and privacy amplification, with the
//! ground-truth single-photon statistics carried along for bound checks.

use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::error::Result;
use crate::model::{IntensitySettings, LinkParams, VACUUM_ERROR_RATE};
use crate::protocol::{error_correct, privacy_amplify, sift, GainQberStats};
use crate::security::{
    analytic_e1_true, analytic_q1_true, estimate_security, ChannelObservables, EstimatorVariant,
    SecurityEstimate,
};
use crate::sim::{run_exchange, EveModel, IntensityClass, Transcript};

/// Ground-truth single-photon statistics of a session, with the counts the
/// binomial error bars derive from.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TruthSummary {
    /// True single-photon gain of the signal class.
    pub q1_true: f64,
    /// True single-photon error rate among sifted signal clicks (absent if
    /// no single-photon pulse survived sifting).
    pub e1_true: Option<f64>,
    pub signal_sent: u64,
    pub single_photon_sifted: u64,
}

/// Everything a completed session produced.
pub struct SessionOutcome {
    pub stats: GainQberStats,
    pub observables: ChannelObservables,
    pub estimate: SecurityEstimate,
    pub truth: TruthSummary,
    pub sifted_signal_len: usize,
    pub leaked_bits: usize,
    pub final_key: BitString,
}

/// Derive the privacy-amplification seed from the session seed so one seed
/// reproduces the whole session.
fn pa_seed(seed: u64) -> u64 {
    seed ^ 0x9e37_79b9_7f4a_7c15
}

/// Run a complete Monte Carlo session. The transcript is dropped after
/// post-processing; use [`run_session_with_transcript`] to keep it.
pub fn run_session(
    link: &LinkParams,
    settings: &IntensitySettings,
    eve: &EveModel,
    n_pulses: u64,
    seed: u64,
    variant: EstimatorVariant,
    ec_efficiency: f64,
) -> Result<SessionOutcome> {
    let (outcome, _) =
        run_session_with_transcript(link, settings, eve, n_pulses, seed, variant, ec_efficiency)?;
    Ok(outcome)
}

pub fn run_session_with_transcript(
    link: &LinkParams,
    settings: &IntensitySettings,
    eve: &EveModel,
    n_pulses: u64,
    seed: u64,
    variant: EstimatorVariant,
    ec_efficiency: f64,
) -> Result<(SessionOutcome, Transcript)> {
    let transcript = run_exchange(n_pulses, link, settings, eve, seed)?;
    let gt = transcript.ground_truth();
    let (pair, stats) = sift(&transcript);

    let observables = ChannelObservables::from_stats(&stats)?;
    let estimate = estimate_security(&observables, settings, link, variant, ec_efficiency)?;

    let signal_pair = pair.filter_class(IntensityClass::Signal);
    let sifted_signal_len = signal_pair.len();
    let (final_key, leaked_bits) = if signal_pair.is_empty() || estimate.rate_per_pulse <= 0.0 {
        (BitString::new(), 0)
    } else {
        let (corrected, leaked) = error_correct(&signal_pair, ec_efficiency)?;
        let key = privacy_amplify(&corrected, leaked, &estimate, pa_seed(seed));
        (key, leaked)
    };

    let truth = TruthSummary {
        q1_true: gt.q1_true(),
        e1_true: gt.e1_true(),
        signal_sent: gt.sent_total(IntensityClass::Signal),
        single_photon_sifted: gt.sifted[0][1],
    };

    Ok((
        SessionOutcome {
            stats,
            observables,
            estimate,
            truth,
            sifted_signal_len,
            leaked_bits,
            final_key,
        },
        transcript,
    ))
}

/// Infinite-statistics result: closed-form observables through the same
/// bound-and-rate pipeline, with the analytic single-photon truth.
pub struct AnalyticOutcome {
    pub observables: ChannelObservables,
    pub estimate: SecurityEstimate,
    pub q1_true: f64,
    pub e1_true: f64,
}

pub fn analytic_session(
    link: &LinkParams,
    settings: &IntensitySettings,
    variant: EstimatorVariant,
    ec_efficiency: f64,
) -> Result<AnalyticOutcome> {
    let observables = ChannelObservables::analytic(link, settings)?;
    let estimate = estimate_security(&observables, settings, link, variant, ec_efficiency)?;
    let eta = link.channel_transmittance();
    let y0 = link.background_yield();
    Ok(AnalyticOutcome {
        observables,
        estimate,
        q1_true: analytic_q1_true(eta, settings.mu, y0),
        e1_true: analytic_e1_true(eta, y0, link.misalignment_error, VACUUM_ERROR_RATE),
    })
}
