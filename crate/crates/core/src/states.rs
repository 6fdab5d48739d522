//! Alice's and Bob's qubit signal ensembles.
//!
//! Conventions: `H` is computational state 0 and the +Z Bloch pole, `V` is
//! state 1. An ensemble holds four states in the canonical `(i, x)` order
//! `(0,0), (0,1), (1,0), (1,1)`; `i = 0` are the key-generation states.

use std::f64::consts::PI;
use std::path::Path;

use nalgebra::Matrix4;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qmath::{
    self, c, ensure_hermitian, kron, min_eigenvalue, pauli, projector, CMatrix, CVector, C64,
    HERMITIAN_TOL, ONE, ZERO,
};

/// Tolerance on trace, PSD-ness and prior sums.
pub const STATE_TOL: f64 = 1e-10;

/// Absolute determinant of the Stokes matrix above which four states form a tetrahedron.
pub const TETRAHEDRON_DET_TOL: f64 = 1e-9;

/// A qubit density matrix together with the probability of sending it.
#[derive(Debug, Clone, PartialEq)]
pub struct QubitState {
    rho: CMatrix,
    prob: f64,
}

impl QubitState {
    pub fn new(rho: CMatrix, prob: f64) -> Result<Self> {
        if rho.shape() != (2, 2) {
            return Err(Error::InvalidState(format!(
                "density matrix must be 2x2, got {:?}",
                rho.shape()
            )));
        }
        if rho.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidState("non-finite density matrix entry".into()));
        }
        ensure_hermitian(&rho, HERMITIAN_TOL)?;
        let trace = rho.trace();
        if (trace - ONE).norm() > STATE_TOL {
            return Err(Error::InvalidState(format!("trace {trace} is not 1")));
        }
        let lowest = min_eigenvalue(&rho);
        if lowest < -STATE_TOL {
            return Err(Error::InvalidState(format!(
                "density matrix has negative eigenvalue {lowest:.3e}"
            )));
        }
        if !(0.0..=1.0).contains(&prob) {
            return Err(Error::InvalidState(format!("send probability {prob} outside [0, 1]")));
        }
        Ok(Self { rho, prob })
    }

    /// The pure state `|ψ⟩⟨ψ|` for normalized amplitudes on `H`, `V`.
    pub fn pure(amplitudes: [C64; 2], prob: f64) -> Result<Self> {
        let v = CVector::from_vec(amplitudes.to_vec());
        let norm = v.norm();
        if norm == 0.0 {
            return Err(Error::InvalidState("zero state vector".into()));
        }
        Self::new(projector(&v.unscale(norm)), prob)
    }

    pub fn maximally_mixed(prob: f64) -> Self {
        Self {
            rho: CMatrix::identity(2, 2).scale(0.5),
            prob,
        }
    }

    pub fn rho(&self) -> &CMatrix {
        &self.rho
    }

    pub fn prob(&self) -> f64 {
        self.prob
    }

    pub fn with_prob(&self, prob: f64) -> Result<Self> {
        Self::new(self.rho.clone(), prob)
    }

    /// `prob · rho`.
    pub fn weighted(&self) -> CMatrix {
        self.rho.scale(self.prob)
    }

    /// Bloch vector `(⟨X⟩, ⟨Y⟩, ⟨Z⟩)` of the unweighted state.
    pub fn bloch(&self) -> [f64; 3] {
        let s = stokes(&self.clone_with_unit_prob());
        [s[1], s[2], s[3]]
    }

    fn clone_with_unit_prob(&self) -> Self {
        Self {
            rho: self.rho.clone(),
            prob: 1.0,
        }
    }
}

/// Four signal states in canonical `(i, x)` order.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalEnsemble {
    states: [QubitState; 4],
}

impl SignalEnsemble {
    /// Builds an ensemble; the send probabilities must sum to one.
    pub fn new(states: [QubitState; 4]) -> Result<Self> {
        let total: f64 = states.iter().map(QubitState::prob).sum();
        if (total - 1.0).abs() > STATE_TOL {
            return Err(Error::InvalidState(format!(
                "send probabilities sum to {total}, not 1"
            )));
        }
        Ok(Self { states })
    }

    pub fn from_parts(rhos: [CMatrix; 4], priors: [f64; 4]) -> Result<Self> {
        let [a, b, c, d] = rhos;
        Self::new([
            QubitState::new(a, priors[0])?,
            QubitState::new(b, priors[1])?,
            QubitState::new(c, priors[2])?,
            QubitState::new(d, priors[3])?,
        ])
    }

    pub fn states(&self) -> &[QubitState; 4] {
        &self.states
    }

    /// The state for basis choice `i` and bit/label `x`.
    pub fn get(&self, i: usize, x: usize) -> &QubitState {
        &self.states[2 * i + x]
    }

    /// The two key-generation states, `x = 0, 1` with `i = 0`.
    pub fn key_states(&self) -> [&QubitState; 2] {
        [&self.states[0], &self.states[1]]
    }

    pub fn priors(&self) -> [f64; 4] {
        [0, 1, 2, 3].map(|k| self.states[k].prob)
    }

    pub fn to_document(&self) -> EnsembleDocument {
        EnsembleDocument {
            states: self.states.clone().map(|s| {
                [
                    [s.rho[(0, 0)].re, s.rho[(0, 0)].im],
                    [s.rho[(0, 1)].re, s.rho[(0, 1)].im],
                    [s.rho[(1, 0)].re, s.rho[(1, 0)].im],
                    [s.rho[(1, 1)].re, s.rho[(1, 1)].im],
                ]
            }),
            priors: self.priors(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_document())?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str::<EnsembleDocument>(text)?.into_ensemble()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// JSON form of an ensemble.
///
/// ```json
/// { "states": [[[re, im], [re, im], [re, im], [re, im]], ...],
///   "priors": [0.25, 0.25, 0.25, 0.25] }
/// ```
///
/// Each state lists its 2×2 density matrix entries in row-major order
/// (`ρ_HH, ρ_HV, ρ_VH, ρ_VV`) as `[re, im]` pairs; states follow the
/// canonical `(i, x)` order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleDocument {
    pub states: [[[f64; 2]; 4]; 4],
    pub priors: [f64; 4],
}

impl EnsembleDocument {
    pub fn into_ensemble(self) -> Result<SignalEnsemble> {
        let rhos = self.states.map(|entries| {
            CMatrix::from_row_slice(2, 2, &entries.map(|[re, im]| c(re, im)))
        });
        SignalEnsemble::from_parts(rhos, self.priors)
    }
}

/// Parameters of the modulation-error / depolarization signal model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Coherent modulation offset δ in radians.
    pub delta: f64,
    /// Depolarizing probability p, in `[0, 1)`.
    pub depol: f64,
}

impl ModelParams {
    pub fn new(delta: f64, depol: f64) -> Result<Self> {
        let params = Self { delta, depol };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.delta.is_finite() {
            return Err(Error::InvalidParams(format!("delta {} is not finite", self.delta)));
        }
        if !(0.0..1.0).contains(&self.depol) {
            return Err(Error::InvalidParams(format!(
                "depolarizing probability {} outside [0, 1)",
                self.depol
            )));
        }
        Ok(())
    }
}

/// Target pure states with the modulation offset applied, canonical order.
pub fn modulated_vectors(delta: f64) -> [[C64; 2]; 4] {
    let (s, co) = (delta / 2.0).sin_cos();
    let diag = (PI + delta) / 4.0;
    let circ = (-PI + delta) / 4.0;
    [
        [ONE, ZERO],
        [c(-s, 0.0), c(co, 0.0)],
        [c(diag.cos(), 0.0), c(diag.sin(), 0.0)],
        [c(circ.cos(), 0.0), c(0.0, circ.sin())],
    ]
}

/// The four model states `(1−p)|ξ^δ⟩⟨ξ^δ| + p·𝟙/2` with the given priors.
///
/// The depolarized part uses `𝟙/2` so each state has unit trace.
pub fn model_states(params: ModelParams, priors: [f64; 4]) -> Result<SignalEnsemble> {
    params.validate()?;
    validate_priors(&priors)?;
    let mixed = CMatrix::identity(2, 2).scale(0.5 * params.depol);
    let rhos = modulated_vectors(params.delta).map(|amps| {
        let v = CVector::from_vec(amps.to_vec());
        projector(&v).scale(1.0 - params.depol) + &mixed
    });
    SignalEnsemble::from_parts(rhos, priors)
}

pub fn validate_priors(priors: &[f64; 4]) -> Result<()> {
    if priors.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(Error::InvalidParams(format!("priors {priors:?} must be nonnegative")));
    }
    let total: f64 = priors.iter().sum();
    if (total - 1.0).abs() > STATE_TOL {
        return Err(Error::InvalidParams(format!("priors sum to {total}, not 1")));
    }
    Ok(())
}

pub const UNIFORM_PRIORS: [f64; 4] = [0.25; 4];

/// Stokes vector `P_r = prob · Tr(σ_r ρ)`, with `σ_0 = 𝟙`.
pub fn stokes(state: &QubitState) -> [f64; 4] {
    [0, 1, 2, 3].map(|r| state.prob * (pauli(r) * &state.rho).trace().re)
}

/// Result of [`tetrahedron_check`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TetrahedronReport {
    /// Determinant of the 4×4 matrix whose rows are the Stokes vectors.
    pub determinant: f64,
    /// Condition number of the same matrix (infinite when singular). The γ̂
    /// matrix built from two ensembles has condition number equal to the
    /// product of theirs.
    pub condition: f64,
    pub pass: bool,
}

/// Checks that the four Stokes vectors are linearly independent, which is the
/// same as the Bloch vectors not being coplanar.
pub fn tetrahedron_check(ensemble: &SignalEnsemble) -> TetrahedronReport {
    let rows: Vec<[f64; 4]> = ensemble.states.iter().map(stokes).collect();
    let m = Matrix4::from_fn(|i, j| rows[i][j]);
    let determinant = m.determinant();
    let sv = m.singular_values();
    let (max, min) = (sv.max(), sv.min());
    let condition = if min > 0.0 { max / min } else { f64::INFINITY };
    TetrahedronReport {
        determinant,
        condition,
        pass: determinant.abs() > TETRAHEDRON_DET_TOL,
    }
}

/// How the single-photon projection is normalized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PhotonNormalization {
    /// Divide by the Poisson single-photon weight `e^{−μ}μ`.
    #[default]
    Poisson,
    /// Divide by the trace of the projected block.
    Trace,
}

/// Index of the two-mode Fock state `|n_H, n_V⟩` with per-mode cutoff `dim`.
#[inline]
pub fn fock_index(n_h: usize, n_v: usize, dim: usize) -> usize {
    n_h * dim + n_v
}

/// Projects a two-mode (H, V) optical state onto its single-photon subspace
/// `span{|1,0⟩, |0,1⟩}` and returns the polarization qubit.
///
/// `two_mode` is indexed by [`fock_index`] with `dim` Fock levels per mode
/// (`dim ≥ 2`). `|1,0⟩` maps to `|H⟩` and `|0,1⟩` to `|V⟩`.
pub fn single_photon_project(
    two_mode: &CMatrix,
    dim: usize,
    mu: f64,
    normalization: PhotonNormalization,
) -> Result<QubitState> {
    if dim < 2 || two_mode.shape() != (dim * dim, dim * dim) {
        return Err(Error::Dimension(format!(
            "two-mode state must be {0}x{0} for {dim} Fock levels per mode, got {1:?}",
            dim * dim,
            two_mode.shape()
        )));
    }
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(Error::InvalidParams(format!("mean photon number {mu} must be positive")));
    }
    ensure_hermitian(two_mode, HERMITIAN_TOL)?;
    let idx = [fock_index(1, 0, dim), fock_index(0, 1, dim)];
    let block = CMatrix::from_fn(2, 2, |a, b| two_mode[(idx[a], idx[b])]);
    let weight = block.trace().re;
    if weight < 1e-12 {
        return Err(Error::EmptySubspace(weight));
    }
    let divisor = match normalization {
        PhotonNormalization::Poisson => (-mu).exp() * mu,
        PhotonNormalization::Trace => weight,
    };
    QubitState::new(qmath::hermitian_part(&block.unscale(divisor)), 1.0)
}

/// Phase-randomized coherent pulse of mean photon number `mu` in polarization
/// `a|H⟩ + b|V⟩`, truncated to `dim` Fock levels per mode: a Poisson mixture of
/// `n`-photon states for `n < dim`.
pub fn phase_randomized_coherent(mu: f64, polarization: [C64; 2], dim: usize) -> CMatrix {
    let norm = (polarization[0].norm_sqr() + polarization[1].norm_sqr()).sqrt();
    let (a, b) = (polarization[0] / norm, polarization[1] / norm);
    let mut out = CMatrix::zeros(dim * dim, dim * dim);
    let mut poisson = (-mu).exp();
    for n in 0..dim {
        if n > 0 {
            poisson *= mu / n as f64;
        }
        let mut psi = CVector::zeros(dim * dim);
        for k in 0..=n {
            let amp = binomial(n, k).sqrt() * a.powu(k as u32) * b.powu((n - k) as u32);
            psi[fock_index(k, n - k, dim)] = amp;
        }
        out += projector(&psi).scale(poisson);
    }
    out
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, j| acc * (n - j) as f64 / (j + 1) as f64)
}

/// `vec(p·ρ)` for every state in an ensemble, in canonical order.
pub fn weighted_vectors(ensemble: &SignalEnsemble) -> [CVector; 4] {
    [0, 1, 2, 3].map(|k| qmath::vec_rowmajor(&ensemble.states[k].weighted()))
}

/// `ρ ⊗ σ` weighted by both send probabilities.
pub fn weighted_product(alice: &QubitState, bob: &QubitState) -> CMatrix {
    kron(alice.rho(), bob.rho()).scale(alice.prob() * bob.prob())
}
