//! The six-state key rate and the full pipeline from signal states to rates.

pub mod config;
pub mod scan;

use serde::Serialize;

use crate::channel::{build_gamma, detection_stats, ChannelParams, DetectionStats};
use crate::error::{Error, Result};
use crate::evegram::{key_basis_stats, solve_eve};
use crate::sdp::{SdpStatus, SolverOptions};
use crate::states::{tetrahedron_check, SignalEnsemble};
use crate::twist::{naive_phase_errors, optimize_phase_errors, PhaseErrors, TwistProblem};

pub use config::{DistanceRange, OutputFormat, PriorsConfig, ScanConfig, StatesOverride, Values};
pub use scan::{format_float, scan, write_csv, write_json, ScanRow, CSV_HEADER};

/// Slack allowed on the arguments of [`binary_entropy`].
pub const ENTROPY_TOL: f64 = 1e-12;
/// Slack allowed on the phase-error preconditions of [`six_state_rate`].
pub const PHASE_TOL: f64 = 1e-9;
/// Below this, `e_Z` is treated as zero.
const EZ_ZERO: f64 = 1e-12;

/// `h₂(x) = −x log₂ x − (1−x) log₂(1−x)`.
pub fn binary_entropy(x: f64) -> Result<f64> {
    if !(x >= -ENTROPY_TOL && x <= 1.0 + ENTROPY_TOL) {
        return Err(Error::DomainError(x));
    }
    let x = x.clamp(0.0, 1.0);
    let term = |p: f64| if p > 0.0 { -p * p.log2() } else { 0.0 };
    Ok(term(x) + term(1.0 - x))
}

/// Six-state rate before clamping; negative values mean the protocol aborts.
pub fn six_state_rate_raw(p_det00: f64, e_z: f64, e_minus: f64, e_plus: f64, f: f64) -> Result<f64> {
    let bad = |msg: String| Err(Error::InvalidPhaseErrors(msg));
    if ![p_det00, e_z, e_minus, e_plus, f].iter().all(|v| v.is_finite()) {
        return bad(format!("non-finite input ({p_det00}, {e_z}, {e_minus}, {e_plus}, {f})"));
    }
    if p_det00 < 0.0 {
        return bad(format!("p_det00 = {p_det00} is negative"));
    }
    if !(-PHASE_TOL..=1.0 + PHASE_TOL).contains(&e_z) {
        return bad(format!("e_Z = {e_z} outside [0, 1]"));
    }
    if e_minus < -PHASE_TOL || e_minus > e_z + PHASE_TOL {
        return bad(format!("e_minus = {e_minus} outside [0, e_Z = {e_z}]"));
    }
    if e_plus < e_z - PHASE_TOL || e_plus > 1.0 + PHASE_TOL {
        return bad(format!("e_plus = {e_plus} outside [e_Z = {e_z}, 1]"));
    }
    let e_z = e_z.clamp(0.0, 1.0);
    let e_minus = e_minus.clamp(0.0, e_z);
    let e_plus = e_plus.clamp(e_z, 1.0);

    let h = |x: f64| binary_entropy(x.clamp(0.0, 1.0));
    let (second, third) = if e_z < EZ_ZERO {
        (0.0, h(1.0 - e_plus / 2.0)?)
    } else if 1.0 - e_z < EZ_ZERO {
        (e_z * h((1.0 + e_minus / e_z) / 2.0)?, 0.0)
    } else {
        (
            e_z * h((1.0 + e_minus / e_z) / 2.0)?,
            (1.0 - e_z) * h((1.0 - (e_plus + e_z) / 2.0) / (1.0 - e_z))?,
        )
    };
    Ok(p_det00 * (1.0 - f * h(e_z)? - second - third))
}

/// Six-state key rate, clamped at zero.
pub fn six_state_rate(p_det00: f64, e_z: f64, e_minus: f64, e_plus: f64, f: f64) -> Result<f64> {
    Ok(six_state_rate_raw(p_det00, e_z, e_minus, e_plus, f)?.max(0.0))
}

/// Relative improvement of the twisted rate over the naive one, in percent.
///
/// Zero when both rates vanish and infinite when only the naive rate does.
pub fn pct_gain(rate_twisted: f64, rate_naive: f64) -> f64 {
    if rate_naive > 0.0 {
        100.0 * (rate_twisted - rate_naive) / rate_naive
    } else if rate_twisted > 0.0 {
        f64::INFINITY
    } else {
        0.0
    }
}

/// Everything computed along the way that is not itself a rate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostics {
    pub gamma_condition: f64,
    /// Condition numbers of the Stokes matrices of Alice's and Bob's ensembles.
    pub alice_condition: f64,
    pub bob_condition: f64,
    pub clipped_mass: f64,
    /// Set when the reconstruction clipped a noticeable negative eigenvalue mass.
    pub eve_warning: bool,
    pub eve_residual: f64,
    /// Formula values before clamping at zero.
    pub raw_rate_twisted: f64,
    pub raw_rate_naive: f64,
    /// Solver outputs, before combination with the naive point.
    pub sdp_e_minus: f64,
    pub sdp_e_plus: f64,
    pub status_minus: SdpStatus,
    pub status_plus: SdpStatus,
    pub iterations_minus: usize,
    pub iterations_plus: usize,
    pub gap_minus: f64,
    pub gap_plus: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KeyRateResult {
    pub p_det00: f64,
    #[serde(rename = "e_Z")]
    pub e_z: f64,
    /// Optimized phase-error combinations used for `rate_twisted`.
    pub e_minus: f64,
    pub e_plus: f64,
    /// Phase-error combinations of the spectral purification.
    pub naive_e_minus: f64,
    pub naive_e_plus: f64,
    pub rate_twisted: f64,
    pub rate_naive: f64,
    pub pct_gain: f64,
    pub diagnostics: Diagnostics,
}

/// Pipeline options beyond the physical parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KeyRateOptions {
    /// Error-correction efficiency, the coefficient of `h₂(e_Z)`.
    pub f: f64,
    pub solver: SolverOptions,
}

impl Default for KeyRateOptions {
    fn default() -> Self {
        Self { f: 1.0, solver: SolverOptions::default() }
    }
}

impl KeyRateOptions {
    pub fn with_f(f: f64) -> Self {
        Self { f, ..Self::default() }
    }
}

/// Key rates for simulated honest-channel statistics.
pub fn keyrate_point(alice: &SignalEnsemble, bob: &SignalEnsemble, channel: &ChannelParams, options: &KeyRateOptions) -> Result<KeyRateResult> {
    channel.validate()?;
    check_ensembles(alice, bob)?;
    let stats = detection_stats(alice, bob, channel);
    keyrate_from_stats(alice, bob, &stats, options)
}

/// Key rates for given (simulated or measured) detection statistics.
pub fn keyrate_from_stats(alice: &SignalEnsemble, bob: &SignalEnsemble, stats: &DetectionStats, options: &KeyRateOptions) -> Result<KeyRateResult> {
    if !(options.f.is_finite() && options.f >= 0.0) {
        return Err(Error::InvalidParams(format!("error-correction efficiency {} must be nonnegative", options.f)));
    }
    let (ta, tb) = check_ensembles(alice, bob)?;
    let gamma = build_gamma(alice, bob);
    let eve = solve_eve(&gamma, stats)?;
    let (p_det00, e_z) = key_basis_stats(stats)?;
    let (clipped_mass, eve_warning, eve_residual) = (eve.clipped_mass(), eve.warning(), eve.residual());
    let problem = TwistProblem::from_ensembles(alice, bob, eve, p_det00, e_z)?;

    let naive = naive_phase_errors(&problem)?;
    let outcome = optimize_phase_errors(&problem, &options.solver)?;
    // the spectral purification is itself a feasible twist, so the optimum
    // can never be worse than it
    let twisted = PhaseErrors::new(
        outcome.errors.e_minus.max(naive.e_minus),
        outcome.errors.e_plus.min(naive.e_plus),
    );

    let raw_rate_twisted = six_state_rate_raw(p_det00, e_z, twisted.e_minus, twisted.e_plus, options.f)?;
    let raw_rate_naive = six_state_rate_raw(p_det00, e_z, naive.e_minus, naive.e_plus, options.f)?;
    let (rate_twisted, rate_naive) = (raw_rate_twisted.max(0.0), raw_rate_naive.max(0.0));
    Ok(KeyRateResult {
        p_det00,
        e_z,
        e_minus: twisted.e_minus,
        e_plus: twisted.e_plus,
        naive_e_minus: naive.e_minus,
        naive_e_plus: naive.e_plus,
        rate_twisted,
        rate_naive,
        pct_gain: pct_gain(rate_twisted, rate_naive),
        diagnostics: Diagnostics {
            gamma_condition: gamma.condition(),
            alice_condition: ta,
            bob_condition: tb,
            clipped_mass,
            eve_warning,
            eve_residual,
            raw_rate_twisted,
            raw_rate_naive,
            sdp_e_minus: outcome.minus.value,
            sdp_e_plus: outcome.plus.value,
            status_minus: outcome.minus.status,
            status_plus: outcome.plus.status,
            iterations_minus: outcome.minus.iterations,
            iterations_plus: outcome.plus.iterations,
            gap_minus: outcome.minus.duality_gap,
            gap_plus: outcome.plus.duality_gap,
        },
    })
}

/// Both ensembles must satisfy the tetrahedron condition; returns their
/// Stokes condition numbers.
fn check_ensembles(alice: &SignalEnsemble, bob: &SignalEnsemble) -> Result<(f64, f64)> {
    let (ta, tb) = (tetrahedron_check(alice), tetrahedron_check(bob));
    if !ta.pass || !tb.pass {
        return Err(Error::SingularGamma(ta.condition * tb.condition));
    }
    Ok((ta.condition, tb.condition))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::{model_states, ModelParams, QubitState, UNIFORM_PRIORS};
    use proptest::prelude::*;

    fn model(delta: f64, depol: f64) -> SignalEnsemble {
        model_states(ModelParams::new(delta, depol).unwrap(), UNIFORM_PRIORS).unwrap()
    }

    fn fiber_channel(l: f64) -> ChannelParams {
        ChannelParams::new(0.5, 1e-5, l).unwrap()
    }

    /// Plain-loop entropy for comparison, using natural logs.
    fn h2_ln(x: f64) -> f64 {
        if x <= 0.0 || x >= 1.0 {
            return 0.0;
        }
        -(x * x.ln() + (1.0 - x) * (1.0 - x).ln()) / std::f64::consts::LN_2
    }

    #[test]
    fn entropy_values() {
        assert_eq!(binary_entropy(0.0).unwrap(), 0.0);
        assert_eq!(binary_entropy(1.0).unwrap(), 0.0);
        assert!((binary_entropy(0.5).unwrap() - 1.0).abs() < 1e-15);
        assert!((binary_entropy(0.11).unwrap() - 0.4999159581645).abs() < 1e-12);
        assert_eq!(binary_entropy(-1e-13).unwrap(), 0.0);
        assert!(matches!(binary_entropy(-1e-9), Err(Error::DomainError(_))));
        assert!(matches!(binary_entropy(1.1), Err(Error::DomainError(_))));
        assert!(binary_entropy(f64::NAN).is_err());
    }

    #[test]
    fn six_state_examples() {
        assert!((six_state_rate(1.0, 0.0, 0.0, 0.0, 1.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((six_state_rate(1.0, 0.11, 0.0, 0.22, 1.0).unwrap() - 0.0923431115).abs() < 1e-9);
        assert_eq!(six_state_rate(1.0, 0.5, 0.2, 0.7, 1.0).unwrap(), 0.0);
        assert!(six_state_rate_raw(1.0, 0.5, 0.2, 0.7, 1.0).unwrap() < 0.0);
        // e_Z → 0 limit of the third term
        let limit = six_state_rate(1.0, 0.0, 0.0, 0.1, 1.0).unwrap();
        let near = six_state_rate(1.0, 1e-9, 0.0, 0.1, 1.0).unwrap();
        assert!((limit - near).abs() < 1e-6);
        assert!((limit - (1.0 - h2_ln(0.95))).abs() < 1e-12);
    }

    #[test]
    fn six_state_preconditions() {
        for (ez, em, ep) in [(0.1, 0.2, 0.5), (0.1, -0.01, 0.5), (0.1, 0.05, 0.05), (0.1, 0.05, 1.1), (1.5, 0.0, 1.0)] {
            assert!(matches!(six_state_rate(1.0, ez, em, ep, 1.0), Err(Error::InvalidPhaseErrors(_))), "{ez} {em} {ep}");
        }
        assert!(six_state_rate(1.0, 0.1, 0.1 + 1e-10, 0.1 - 1e-10, 1.0).is_ok());
        assert!(six_state_rate(1.0, f64::NAN, 0.0, 0.5, 1.0).is_err());
        // e_Z = 1 keeps only the second term
        assert_eq!(six_state_rate_raw(1.0, 1.0, 1.0, 1.0, 1.0).unwrap(), 1.0);
    }

    #[test]
    fn pct_gain_conventions() {
        assert_eq!(pct_gain(0.0, 0.0), 0.0);
        assert_eq!(pct_gain(1e-3, 0.0), f64::INFINITY);
        assert!((pct_gain(1.1, 1.0) - 10.0).abs() < 1e-12);
    }

    #[test]
    fn ideal_pipeline() {
        let e = model(0.0, 0.0);
        let r = keyrate_point(&e, &e, &ChannelParams::lossless(), &KeyRateOptions::default()).unwrap();
        assert!((r.p_det00 - 0.0625).abs() < 1e-12);
        assert_eq!(r.e_z, 0.0);
        assert!((r.rate_twisted - 0.0625).abs() < 1e-6);
        assert!((r.rate_naive - 0.0625).abs() < 1e-6);
        assert!(r.pct_gain.abs() < 1e-6);
    }

    #[test]
    fn mixed_states_gain_at_distance() {
        let e = model(0.1, 0.05);
        let r = keyrate_point(&e, &e, &fiber_channel(80.0), &KeyRateOptions::default()).unwrap();
        assert!(r.rate_twisted > r.rate_naive, "{r:?}");
        assert!(r.rate_twisted <= r.p_det00);
        assert_eq!(r.diagnostics.status_minus, SdpStatus::Optimal);
        assert!(r.e_minus >= r.naive_e_minus && r.e_plus <= r.naive_e_plus);
    }

    #[test]
    fn efficiency_scales_bit_error_term() {
        let e = model(0.05, 0.02);
        let one = keyrate_point(&e, &e, &fiber_channel(20.0), &KeyRateOptions::default()).unwrap();
        let worse = keyrate_point(&e, &e, &fiber_channel(20.0), &KeyRateOptions::with_f(1.2)).unwrap();
        let expected = one.diagnostics.raw_rate_twisted - 0.2 * one.p_det00 * binary_entropy(one.e_z).unwrap();
        assert!((worse.diagnostics.raw_rate_twisted - expected).abs() < 1e-12);
        assert!(keyrate_point(&e, &e, &fiber_channel(20.0), &KeyRateOptions::with_f(-1.0)).is_err());
    }

    #[test]
    fn coplanar_states_are_rejected() {
        let mut states = model(0.0, 0.0).states().clone();
        states[3] = QubitState::new(states[2].rho().clone(), 0.25).unwrap();
        let bad = SignalEnsemble::new(states).unwrap();
        let good = model(0.0, 0.0);
        let err = keyrate_point(&bad, &good, &ChannelParams::lossless(), &KeyRateOptions::default()).unwrap_err();
        assert!(matches!(err, Error::SingularGamma(_)), "{err}");
    }

    #[test]
    fn deterministic() {
        let e = model(0.08, 0.03);
        let a = keyrate_point(&e, &e, &fiber_channel(60.0), &KeyRateOptions::default()).unwrap();
        let b = keyrate_point(&e, &e, &fiber_channel(60.0), &KeyRateOptions::default()).unwrap();
        assert_eq!(a, b);
    }

    proptest! {
        #[test]
        fn rate_bounded_by_p_det00(p in 0.0f64..1.0, ez in 0.0f64..0.5, a in 0.0f64..1.0, b in 0.0f64..1.0) {
            let em = a * ez;
            let ep = ez + b * (1.0 - ez);
            let r = six_state_rate(p, ez, em, ep, 1.0).unwrap();
            prop_assert!(r >= 0.0 && r <= p + 1e-15);
        }

        #[test]
        fn entropy_matches_natural_log_form(x in 0.0f64..=1.0) {
            prop_assert!((binary_entropy(x).unwrap() - h2_ln(x)).abs() < 1e-12);
        }

        #[test]
        fn rate_monotone_in_phase_errors(ez in 0.01f64..0.3, a in 0.0f64..1.0, b in 0.0f64..1.0, da in 0.0f64..0.5) {
            // more e₋ (towards e_Z) or less e₊ (towards e_Z) never hurts
            let em = a * ez;
            let em2 = (a + da).min(1.0) * ez;
            let ep = ez + b * (1.0 - ez);
            let r1 = six_state_rate_raw(1.0, ez, em, ep, 1.0).unwrap();
            let r2 = six_state_rate_raw(1.0, ez, em2, ep, 1.0).unwrap();
            prop_assert!(r2 >= r1 - 1e-12);
            let ep2 = ez + (b * (1.0 - da)) * (1.0 - ez);
            let r3 = six_state_rate_raw(1.0, ez, em, ep2, 1.0).unwrap();
            prop_assert!(r3 >= r1 - 1e-12);
        }
    }
}
