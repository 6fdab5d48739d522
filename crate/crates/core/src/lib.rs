//! Key rates for measurement-device-independent QKD with imperfect,
//! mixed signal states, using optimized twisting operations.

pub mod channel;
pub mod error;
pub mod evegram;
pub mod keyrate;
pub mod qmath;
pub mod sdp;
pub mod states;
pub mod twist;

pub use channel::{build_gamma, detection_stats, ChannelParams, DetectionStats, GammaMatrix};
pub use error::{Error, Result};
pub use evegram::{key_basis_stats, solve_eve, EveGram};
pub use keyrate::{
    binary_entropy, keyrate_from_stats, keyrate_point, pct_gain, scan, six_state_rate, Diagnostics, KeyRateOptions,
    KeyRateResult, ScanConfig, ScanRow,
};
pub use sdp::{solve_sdp, SdpProblem, SdpSolution, SdpStatus, Sense, SolverOptions};
pub use states::{model_states, ModelParams, QubitState, SignalEnsemble};
pub use twist::{naive_phase_errors, optimize_phase_errors, PhaseErrors, TwistProblem};
