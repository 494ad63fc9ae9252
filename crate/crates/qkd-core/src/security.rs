//! Decoy-state security analysis: binary entropy, the single-photon
//! gain/error bounds, the secure key rate, intensity optimization and
//! calibration of the unpublished noise parameters.
//!
//! With measured (or model-generated) per-class gains and error rates the
//! single-photon contribution is bounded by
//!
//! ```text
//! Q1 >= Q1L = mu^2 e^-mu / (mu nu - nu^2)
//!             * [ Qv e^nu - Qm e^mu nu^2/mu^2 - (mu^2 - nu^2)/mu^2 * Y0 ]
//! ```
//!
//! and the single-photon error rate from the decoy-class statistics. Two
//! estimator variants of the latter are carried side by side:
//!
//! * `Standard`:  `e1U = (Ev Qv e^nu - e0 Y0) / (Y1L nu)` with
//!   `Y1L = Q1L e^mu / mu` — the decoy-class statistics normalised by the
//!   single-photon yield at the decoy intensity.
//! * `AsPrinted`: `e1U = (Ev Qv - e0 Y0 e^-nu) / Q1L` — reproduced verbatim
//!   from the reference formula, which divides decoy-class statistics by the
//!   signal-class single-photon gain. Kept for diagnostics; it is not a
//!   sound upper bound (see the estimator-variant report fields).
//!
//! The secure key rate per signal pulse is
//!
//! ```text
//! R = q { -Qm f(Em) H2(Em) + Q1L [1 - H2(e1U)] }
//! ```
//!
//! The error-correction term is charged (negative); an as-printed variant
//! with the opposite sign is exposed for documentation only since a rate
//! that grows with the QBER is unphysical.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    expected_gain, expected_qber, IntensitySettings, LinkParams, VACUUM_ERROR_RATE,
};
use crate::protocol::GainQberStats;
use crate::sim::IntensityClass;

/// Protocol efficiency factor q: basis sifting keeps half the events.
pub const PROTOCOL_EFFICIENCY: f64 = 0.5;

/// Default bidirectional error-correction inefficiency f(E).
pub const DEFAULT_EC_EFFICIENCY: f64 = 1.22;

// ---------------------------------------------------------------------------
// Binary entropy
// ---------------------------------------------------------------------------

/// Binary entropy H2(x) in bits, with H2(0) = H2(1) = 0 by continuity.
pub fn binary_entropy(x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Domain {
            value: x,
            lo: 0.0,
            hi: 1.0,
        });
    }
    Ok(h2(x))
}

/// Unchecked binary entropy for internal hot paths.
pub(crate) fn h2(x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        return 0.0;
    }
    -x * x.log2() - (1.0 - x) * (1.0 - x).log2()
}

// ---------------------------------------------------------------------------
// Decoy bounds
// ---------------------------------------------------------------------------

/// Which single-photon error estimator a report is based on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum EstimatorVariant {
    #[default]
    Standard,
    AsPrinted,
}

impl std::str::FromStr for EstimatorVariant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "standard" => Ok(EstimatorVariant::Standard),
            "as-printed" | "asprinted" | "as_printed" => Ok(EstimatorVariant::AsPrinted),
            other => Err(Error::InvalidParameter(format!(
                "unknown estimator variant '{other}' (expected 'standard' or 'as-printed')"
            ))),
        }
    }
}

impl std::fmt::Display for EstimatorVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EstimatorVariant::Standard => write!(f, "standard"),
            EstimatorVariant::AsPrinted => write!(f, "as-printed"),
        }
    }
}

/// A clamped bound together with its raw (unclamped) value, so pathological
/// inputs remain visible in diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bound {
    pub value: f64,
    pub raw: f64,
}

impl Bound {
    fn clamped(raw: f64) -> Bound {
        Bound {
            value: raw.clamp(0.0, 1.0),
            raw,
        }
    }
}

/// Lower bound on the single-photon gain Q1 of the signal class.
pub fn q1_lower_bound(q_mu: f64, q_nu: f64, mu: f64, nu: f64, y0: f64) -> Result<Bound> {
    if !(nu > 0.0) || nu >= mu {
        return Err(Error::DegenerateDecoy { mu, nu });
    }
    let prefactor = mu * mu * (-mu).exp() / (mu * nu - nu * nu);
    let bracket = q_nu * nu.exp()
        - q_mu * mu.exp() * nu * nu / (mu * mu)
        - (mu * mu - nu * nu) / (mu * mu) * y0;
    Ok(Bound::clamped(prefactor * bracket))
}

/// Upper bound on the single-photon error rate e1, from decoy-class
/// statistics and a previously computed `q1_lower` (clamped value).
pub fn e1_upper_bound(
    e_nu: f64,
    q_nu: f64,
    y0: f64,
    mu: f64,
    nu: f64,
    q1_lower: f64,
    epsilon0: f64,
    variant: EstimatorVariant,
) -> Result<Bound> {
    if q1_lower <= 0.0 {
        return Err(Error::ZeroBound);
    }
    let raw = match variant {
        EstimatorVariant::AsPrinted => (e_nu * q_nu - epsilon0 * y0 * (-nu).exp()) / q1_lower,
        EstimatorVariant::Standard => {
            let y1_lower = q1_lower * mu.exp() / mu;
            (e_nu * q_nu * nu.exp() - epsilon0 * y0) / (y1_lower * nu)
        }
    };
    Ok(Bound::clamped(raw))
}

// ---------------------------------------------------------------------------
// Key rate
// ---------------------------------------------------------------------------

/// Secure key rate per signal pulse. Negative values are returned as-is;
/// the caller treats them as "no key".
pub fn key_rate(q_mu: f64, e_mu: f64, q1_lower: f64, e1_upper: f64, q: f64, f: f64) -> f64 {
    q * (-q_mu * f * h2(e_mu) + q1_lower * (1.0 - h2(e1_upper.clamp(0.0, 1.0))))
}

/// The same expression with the error-correction term entering positively,
/// exposed for documentation of the sign discrepancy only. Do not use for
/// key generation: this rate increases with the QBER.
pub fn key_rate_as_printed(
    q_mu: f64,
    e_mu: f64,
    q1_lower: f64,
    e1_upper: f64,
    q: f64,
    f: f64,
) -> f64 {
    q * (q_mu * f * h2(e_mu) + q1_lower * (1.0 - h2(e1_upper.clamp(0.0, 1.0))))
}

// ---------------------------------------------------------------------------
// Channel observables and the full estimate
// ---------------------------------------------------------------------------

/// The measured (or model-generated) quantities the security analysis
/// consumes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelObservables {
    pub q_mu: f64,
    pub e_mu: f64,
    pub q_nu: f64,
    pub e_nu: f64,
    pub y0: f64,
    pub epsilon0: f64,
}

impl ChannelObservables {
    /// Closed-form (infinite statistics) observables for a link and settings.
    pub fn analytic(link: &LinkParams, settings: &IntensitySettings) -> Result<Self> {
        let eta = link.channel_transmittance();
        let y0 = link.background_yield();
        let e_det = link.misalignment_error;
        Ok(ChannelObservables {
            q_mu: expected_gain(eta, settings.mu, y0),
            e_mu: expected_qber(eta, settings.mu, y0, e_det, VACUUM_ERROR_RATE)?,
            q_nu: expected_gain(eta, settings.nu, y0),
            e_nu: expected_qber(eta, settings.nu, y0, e_det, VACUUM_ERROR_RATE)?,
            y0,
            epsilon0: VACUUM_ERROR_RATE,
        })
    }

    /// Observables from measured per-class tallies. The vacuum error rate
    /// falls back to 0.5 when the vacuum class produced no sifted clicks.
    pub fn from_stats(stats: &GainQberStats) -> Result<Self> {
        let q_mu = stats.gain(IntensityClass::Signal);
        let q_nu = stats.gain(IntensityClass::Decoy);
        let e_mu = stats.qber(IntensityClass::Signal)?;
        let e_nu = stats.qber(IntensityClass::Decoy)?;
        let y0 = stats.gain(IntensityClass::Vacuum);
        let epsilon0 = stats
            .qber(IntensityClass::Vacuum)
            .unwrap_or(VACUUM_ERROR_RATE);
        Ok(ChannelObservables {
            q_mu,
            e_mu,
            q_nu,
            e_nu,
            y0,
            epsilon0,
        })
    }
}

/// Complete security estimate for one session.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SecurityEstimate {
    /// Q1 lower bound (clamped to [0,1]) and its raw value.
    pub q1_lower: f64,
    pub q1_lower_raw: f64,
    /// e1 upper bound for the selected variant (clamped) and its raw value.
    pub e1_upper: f64,
    pub e1_upper_raw: f64,
    /// Both estimator variants, always computed (clamped).
    pub e1_upper_standard: f64,
    pub e1_upper_as_printed: f64,
    /// Secure rate per signal pulse; may be <= 0.
    pub rate_per_pulse: f64,
    /// Secure rate in bits/s: per-pulse rate times source rate times the
    /// signal share of the transmission proportions.
    pub rate_bps: f64,
    /// Secure fraction per *sifted signal bit*, used to size the final key.
    pub secure_fraction_per_sifted_bit: f64,
    pub variant: EstimatorVariant,
}

/// Run the full bound-and-rate pipeline on a set of observables.
pub fn estimate_security(
    obs: &ChannelObservables,
    settings: &IntensitySettings,
    link: &LinkParams,
    variant: EstimatorVariant,
    ec_efficiency: f64,
) -> Result<SecurityEstimate> {
    let q1 = q1_lower_bound(obs.q_mu, obs.q_nu, settings.mu, settings.nu, obs.y0)?;

    // With a vanishing Q1 bound the error bound is undefined; report the
    // uninformative maximum so the rate collapses instead of erroring out.
    let (e1_std, e1_printed) = if q1.value > 0.0 {
        (
            e1_upper_bound(
                obs.e_nu,
                obs.q_nu,
                obs.y0,
                settings.mu,
                settings.nu,
                q1.value,
                obs.epsilon0,
                EstimatorVariant::Standard,
            )?,
            e1_upper_bound(
                obs.e_nu,
                obs.q_nu,
                obs.y0,
                settings.mu,
                settings.nu,
                q1.value,
                obs.epsilon0,
                EstimatorVariant::AsPrinted,
            )?,
        )
    } else {
        (Bound { value: 1.0, raw: 1.0 }, Bound { value: 1.0, raw: 1.0 })
    };

    let selected = match variant {
        EstimatorVariant::Standard => e1_std,
        EstimatorVariant::AsPrinted => e1_printed,
    };

    let rate_per_pulse = key_rate(
        obs.q_mu,
        obs.e_mu,
        q1.value,
        selected.value,
        PROTOCOL_EFFICIENCY,
        ec_efficiency,
    );
    let rate_bps = rate_per_pulse * link.pulse_rate_hz * settings.signal_share();
    let secure_fraction_per_sifted_bit = if obs.q_mu > 0.0 {
        rate_per_pulse / (PROTOCOL_EFFICIENCY * obs.q_mu)
    } else {
        0.0
    };

    Ok(SecurityEstimate {
        q1_lower: q1.value,
        q1_lower_raw: q1.raw,
        e1_upper: selected.value,
        e1_upper_raw: selected.raw,
        e1_upper_standard: e1_std.value,
        e1_upper_as_printed: e1_printed.value,
        rate_per_pulse,
        rate_bps,
        secure_fraction_per_sifted_bit,
        variant,
    })
}

// ---------------------------------------------------------------------------
// Analytic single-photon truth (infinite statistics)
// ---------------------------------------------------------------------------

/// Single-photon yield Y1 = Y0 + eta of the additive background model.
pub fn analytic_single_photon_yield(eta: f64, y0: f64) -> f64 {
    y0 + eta
}

/// True single-photon gain Q1 = Y1 * mu * e^-mu of the signal class.
pub fn analytic_q1_true(eta: f64, mu: f64, y0: f64) -> f64 {
    analytic_single_photon_yield(eta, y0) * mu * (-mu).exp()
}

/// True single-photon error rate e1 = (e0 Y0 + e_det eta) / Y1.
pub fn analytic_e1_true(eta: f64, y0: f64, e_det: f64, e0: f64) -> f64 {
    (e0 * y0 + e_det * eta) / analytic_single_photon_yield(eta, y0)
}

// ---------------------------------------------------------------------------
// Intensity optimization
// ---------------------------------------------------------------------------

/// Secure rate per signal pulse from the closed-form model, Standard variant.
fn analytic_rate(eta: f64, mu: f64, nu: f64, y0: f64, e_det: f64, f: f64) -> f64 {
    let q_mu = expected_gain(eta, mu, y0);
    let q_nu = expected_gain(eta, nu, y0);
    let x_mu = 1.0 - (-eta * mu).exp();
    let x_nu = 1.0 - (-eta * nu).exp();
    if q_mu <= 0.0 || q_nu <= 0.0 {
        return f64::NEG_INFINITY;
    }
    let e_mu = (VACUUM_ERROR_RATE * y0 + e_det * x_mu) / q_mu;
    let e_nu = (VACUUM_ERROR_RATE * y0 + e_det * x_nu) / q_nu;
    let q1 = match q1_lower_bound(q_mu, q_nu, mu, nu, y0) {
        Ok(b) => b.value,
        Err(_) => return f64::NEG_INFINITY,
    };
    let e1 = if q1 > 0.0 {
        e1_upper_bound(
            e_nu,
            q_nu,
            y0,
            mu,
            nu,
            q1,
            VACUUM_ERROR_RATE,
            EstimatorVariant::Standard,
        )
        .map(|b| b.value)
        .unwrap_or(1.0)
    } else {
        1.0
    };
    key_rate(q_mu, e_mu, q1, e1, PROTOCOL_EFFICIENCY, f)
}

/// Default signal-intensity grid: 0.05 to 1.00 in steps of 0.01.
pub fn default_mu_grid() -> Vec<f64> {
    (5..=100).map(|i| i as f64 * 0.01).collect()
}

/// Default decoy-intensity grid: 0.01 to 0.30 in steps of 0.01.
pub fn default_nu_grid() -> Vec<f64> {
    (1..=30).map(|i| i as f64 * 0.01).collect()
}

/// Exhaustive grid search for the (mu, nu) pair maximising the model secure
/// rate on `link`. Ties break toward the smaller mu (then smaller nu).
/// Returns `(mu_star, nu_star, rate_star)`.
pub fn optimize_intensities(
    link: &LinkParams,
    mu_grid: &[f64],
    nu_grid: &[f64],
    ec_efficiency: f64,
) -> Result<(f64, f64, f64)> {
    let eta = link.channel_transmittance();
    let y0 = link.background_yield();
    let e_det = link.misalignment_error;
    let mut best: Option<(f64, f64, f64)> = None;
    for &mu in mu_grid {
        for &nu in nu_grid {
            if nu >= mu || nu <= 0.0 {
                continue;
            }
            let r = analytic_rate(eta, mu, nu, y0, e_det, ec_efficiency);
            if !r.is_finite() {
                continue;
            }
            match best {
                Some((_, _, r_best)) if r <= r_best => {}
                _ => best = Some((mu, nu, r)),
            }
        }
    }
    best.ok_or(Error::EmptyGrid)
}

/// Grid search over mu only, at a fixed decoy intensity.
pub fn optimize_mu_at_fixed_nu(
    link: &LinkParams,
    mu_grid: &[f64],
    nu: f64,
    ec_efficiency: f64,
) -> Result<(f64, f64)> {
    let eta = link.channel_transmittance();
    let y0 = link.background_yield();
    let e_det = link.misalignment_error;
    let mut best: Option<(f64, f64)> = None;
    for &mu in mu_grid {
        if mu <= nu {
            continue;
        }
        let r = analytic_rate(eta, mu, nu, y0, e_det, ec_efficiency);
        if !r.is_finite() {
            continue;
        }
        match best {
            Some((_, r_best)) if r <= r_best => {}
            _ => best = Some((mu, r)),
        }
    }
    best.ok_or(Error::EmptyGrid)
}

// ---------------------------------------------------------------------------
// Calibration against measured benchmarks
// ---------------------------------------------------------------------------

/// One measured (QBER, secure rate) benchmark for a link.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CalibrationTarget {
    pub link: LinkParams,
    pub qber: f64,
    pub rate_bps: f64,
}

/// The three reference benchmarks of the deployed star network.
pub fn reference_benchmarks() -> Vec<CalibrationTarget> {
    use crate::model::presets;
    vec![
        CalibrationTarget {
            link: presets::benjamin(),
            qber: 0.027,
            rate_bps: 11_500.0,
        },
        CalibrationTarget {
            link: presets::copernico(),
            qber: 0.024,
            rate_bps: 8_000.0,
        },
        CalibrationTarget {
            link: presets::keplero(),
            qber: 0.032,
            rate_bps: 5_800.0,
        },
    ]
}

#[derive(Debug, Clone)]
pub struct CalibrationOptions {
    /// Decoy intensity used while fitting.
    pub nu: f64,
    /// Signal-intensity grid searched per candidate.
    pub mu_grid: Vec<f64>,
    /// QBER deviation (absolute) that normalises to 1 in the objective.
    pub qber_tolerance: f64,
    /// Rate deviation (|log2 ratio|) that normalises to 1 in the objective.
    pub rate_log2_tolerance: f64,
    pub grid_points: usize,
    pub grid_rounds: usize,
    pub polish_iterations: usize,
    pub ec_efficiency: f64,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        CalibrationOptions {
            nu: 0.1,
            mu_grid: default_mu_grid(),
            qber_tolerance: 0.003,
            rate_log2_tolerance: 1.0,
            grid_points: 21,
            grid_rounds: 4,
            polish_iterations: 200,
            ec_efficiency: DEFAULT_EC_EFFICIENCY,
        }
    }
}

/// Per-link residuals of a calibration fit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LinkFit {
    pub name: String,
    pub qber_model: f64,
    pub qber_target: f64,
    pub rate_model_bps: f64,
    pub rate_target_bps: f64,
    pub mu_star: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub dark_count_prob: f64,
    pub misalignment_error: f64,
    /// Worst normalised deviation at the optimum (< 1 means every target is
    /// inside its tolerance window).
    pub objective: f64,
    pub fits: Vec<LinkFit>,
    /// Fewer than two links cannot pin both noise parameters.
    pub underdetermined: bool,
    pub converged: bool,
}

fn calibration_objective(
    d: f64,
    e_det: f64,
    targets: &[CalibrationTarget],
    opts: &CalibrationOptions,
) -> f64 {
    let mut worst: f64 = 0.0;
    for t in targets {
        let mut link = t.link.clone();
        link.dark_count_prob = d;
        link.misalignment_error = e_det;
        let (mu, r) = match optimize_mu_at_fixed_nu(&link, &opts.mu_grid, opts.nu, opts.ec_efficiency)
        {
            Ok(v) => v,
            Err(_) => return f64::INFINITY,
        };
        let eta = link.channel_transmittance();
        let y0 = link.background_yield();
        let e_model = match expected_qber(eta, mu, y0, e_det, VACUUM_ERROR_RATE) {
            Ok(e) => e,
            Err(_) => return f64::INFINITY,
        };
        let share = 14.0 / 16.0;
        let rate_model = r.max(1e-12) * link.pulse_rate_hz * share;
        worst = worst.max((e_model - t.qber).abs() / opts.qber_tolerance);
        worst = worst.max((rate_model / t.rate_bps).log2().abs() / opts.rate_log2_tolerance);
    }
    worst
}

/// Fit (dark_count_prob, misalignment_error) to measured per-link QBER and
/// rate benchmarks. The objective is the worst target deviation, each
/// normalised by its tolerance window; grid refinement is followed by a
/// compass-search polish. Non-convergence is reported via the `converged`
/// flag with the best point found so far.
pub fn calibrate_to_targets(
    targets: &[CalibrationTarget],
    opts: &CalibrationOptions,
) -> Result<CalibrationResult> {
    if targets.is_empty() {
        return Err(Error::InvalidParameter(
            "calibration requires at least one target".into(),
        ));
    }
    let underdetermined = targets.len() < 2;

    let (mut lo_d, mut hi_d) = (-6.5f64, -2.5f64); // log10(dark_count_prob)
    let (mut lo_e, mut hi_e) = (0.0005f64, 0.08f64);
    let pts = opts.grid_points.max(3);
    let mut best = (f64::INFINITY, -4.0f64, 0.02f64); // (obj, log10 d, e_det)

    for _ in 0..opts.grid_rounds {
        for i in 0..pts {
            let ld = lo_d + (hi_d - lo_d) * i as f64 / (pts - 1) as f64;
            for j in 0..pts {
                let ed = lo_e + (hi_e - lo_e) * j as f64 / (pts - 1) as f64;
                let v = calibration_objective(10f64.powf(ld), ed, targets, opts);
                if v < best.0 {
                    best = (v, ld, ed);
                }
            }
        }
        let step_d = (hi_d - lo_d) / (pts - 1) as f64 * 3.0;
        let step_e = (hi_e - lo_e) / (pts - 1) as f64 * 3.0;
        lo_d = best.1 - step_d;
        hi_d = best.1 + step_d;
        lo_e = (best.2 - step_e).max(1e-5);
        hi_e = best.2 + step_e;
    }

    // Compass-search polish.
    let (mut v, mut ld, mut ed) = best;
    let mut step_d = (hi_d - lo_d) / 4.0;
    let mut step_e = (hi_e - lo_e) / 4.0;
    let mut converged = false;
    for _ in 0..opts.polish_iterations {
        let mut improved = false;
        for (dd, de) in [
            (step_d, 0.0),
            (-step_d, 0.0),
            (0.0, step_e),
            (0.0, -step_e),
        ] {
            let cand_e = (ed + de).max(1e-5);
            let cand = calibration_objective(10f64.powf(ld + dd), cand_e, targets, opts);
            if cand < v - 1e-15 {
                v = cand;
                ld += dd;
                ed = cand_e;
                improved = true;
            }
        }
        if !improved {
            step_d *= 0.5;
            step_e *= 0.5;
            if step_d < 1e-7 && step_e < 1e-9 {
                converged = true;
                break;
            }
        }
    }

    let d = 10f64.powf(ld);
    let mut fits = Vec::new();
    for t in targets {
        let mut link = t.link.clone();
        link.dark_count_prob = d;
        link.misalignment_error = ed;
        let (mu, r) = optimize_mu_at_fixed_nu(&link, &opts.mu_grid, opts.nu, opts.ec_efficiency)?;
        let eta = link.channel_transmittance();
        let qber_model = expected_qber(eta, mu, link.background_yield(), ed, VACUUM_ERROR_RATE)?;
        fits.push(LinkFit {
            name: link.name.clone(),
            qber_model,
            qber_target: t.qber,
            rate_model_bps: r * link.pulse_rate_hz * (14.0 / 16.0),
            rate_target_bps: t.rate_bps,
            mu_star: mu,
        });
    }

    Ok(CalibrationResult {
        dark_count_prob: d,
        misalignment_error: ed,
        objective: v,
        fits,
        underdetermined,
        converged,
    })
}

// ---------------------------------------------------------------------------
// Rate-vs-loss scaling
// ---------------------------------------------------------------------------

/// Log-log least-squares slope of rate against channel transmittance.
/// Points with non-positive rate are dropped; at least 4 must remain.
pub fn scaling_exponent(points: &[(f64, f64)]) -> Result<f64> {
    let usable: Vec<(f64, f64)> = points
        .iter()
        .filter(|(eta, r)| *eta > 0.0 && *r > 0.0)
        .map(|&(eta, r)| (eta.ln(), r.ln()))
        .collect();
    if usable.len() < 4 {
        return Err(Error::InsufficientPoints {
            needed: 4,
            got: usable.len(),
        });
    }
    let n = usable.len() as f64;
    let sx: f64 = usable.iter().map(|(x, _)| x).sum();
    let sy: f64 = usable.iter().map(|(_, y)| y).sum();
    let sxx: f64 = usable.iter().map(|(x, _)| x * x).sum();
    let sxy: f64 = usable.iter().map(|(x, y)| x * y).sum();
    Ok((n * sxy - sx * sy) / (n * sxx - sx * sx))
}

/// Pessimistic non-decoy comparator: every multiphoton pulse is assumed
/// compromised, so only the gain in excess of the multiphoton fraction
/// earns key, with the measured errors re-attributed to that portion.
pub fn nondecoy_worst_case_rate(eta: f64, mu: f64, y0: f64, e_det: f64, f: f64) -> f64 {
    let q_mu = expected_gain(eta, mu, y0);
    if q_mu <= 0.0 {
        return f64::NEG_INFINITY;
    }
    let e_mu = (VACUUM_ERROR_RATE * y0 + e_det * (1.0 - (-eta * mu).exp())) / q_mu;
    let p_multi = 1.0 - (-mu).exp() * (1.0 + mu);
    let omega = q_mu - p_multi;
    if omega <= 0.0 {
        return f64::NEG_INFINITY;
    }
    let e1 = (e_mu * q_mu / omega).min(0.5);
    PROTOCOL_EFFICIENCY * (-q_mu * f * h2(e_mu) + omega * (1.0 - h2(e1)))
}

/// Log-spaced mu grid for the non-decoy comparator (the optimum scales with
/// eta, so the grid must reach well below the decoy grid).
pub fn nondecoy_mu_grid() -> Vec<f64> {
    (0..400)
        .map(|i| 10f64.powf(-3.0 + 3.0 * i as f64 / 399.0))
        .collect()
}

/// Maximise the non-decoy worst-case rate over a mu grid.
pub fn optimize_nondecoy_mu(eta: f64, y0: f64, e_det: f64, f: f64, mu_grid: &[f64]) -> (f64, f64) {
    let mut best = (f64::NAN, f64::NEG_INFINITY);
    for &mu in mu_grid {
        let r = nondecoy_worst_case_rate(eta, mu, y0, e_det, f);
        if r > best.1 {
            best = (mu, r);
        }
    }
    best
}
