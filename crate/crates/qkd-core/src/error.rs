//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("gain is zero; QBER is undefined")]
    ZeroGain,

    #[error("value {value} outside domain [{lo}, {hi}]")]
    Domain { value: f64, lo: f64, hi: f64 },

    #[error("degenerate decoy intensities (need 0 < nu < mu, got mu={mu}, nu={nu})")]
    DegenerateDecoy { mu: f64, nu: f64 },

    #[error("single-photon gain bound is zero; error bound undefined")]
    ZeroBound,

    #[error("transcript streams misaligned: {pulses} pulses vs {outcomes} outcomes")]
    MisalignedTranscript { pulses: usize, outcomes: usize },

    #[error("measured QBER {qber} >= 0.5; reconciliation impossible")]
    ReconciliationImpossible { qber: f64 },

    #[error("insufficient key material: requested {requested} bits, {available} available")]
    InsufficientKey { requested: usize, available: usize },

    #[error("empty optimization grid: no feasible (mu, nu) points")]
    EmptyGrid,

    #[error("not enough sweep points: need at least {needed}, got {got} with positive rate")]
    InsufficientPoints { needed: usize, got: usize },

    #[error("no clients configured")]
    NoClients,

    #[error("invalid coupler split: {0}")]
    InvalidSplit(String),

    #[error("alignment time {alignment_s} s >= slot duration {slot_s} s; no productive time")]
    AlignmentExceedsSlot { alignment_s: f64, slot_s: f64 },

    #[error("gain-preserving PNS blocking probability {b:.4} outside [0,1] for mu={mu}")]
    PnsInfeasible { b: f64, mu: f64 },

    #[error("unknown preset '{0}'")]
    UnknownPreset(String),

    #[error("output file {0} exists (pass --force to overwrite)")]
    OutputExists(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// CLI process exit code for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_)
            | Error::InvalidParameter(_)
            | Error::UnknownPreset(_)
            | Error::OutputExists(_) => 2,
            Error::InsufficientKey { .. } => 4,
            _ => 3,
        }
    }
}
