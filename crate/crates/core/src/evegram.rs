//! Reconstruction of Eve's Gram matrix from observed detection statistics.

use serde::{Deserialize, Serialize};

use crate::channel::{DetectionStats, GammaMatrix, N_OUTCOMES};
use crate::error::{Error, Result};
use crate::qmath::{hermitian_part, psd_project, solve_linear, CMatrix, CVector};

/// γ̂ condition numbers at or above this are rejected.
pub const MAX_GAMMA_CONDITION: f64 = 1e9;
/// Eigenvalues above `−PSD_TOL` are left untouched by the repair.
pub const PSD_TOL: f64 = 1e-10;
/// Clipped mass above which a warning is raised.
pub const WARN_CLIPPED_MASS: f64 = 1e-8;
/// Clipped mass above which the statistics are rejected.
pub const MAX_CLIPPED_MASS: f64 = 1e-4;
/// Key-basis detection probability below which nothing can be said.
pub const MIN_P_DET00: f64 = 1e-300;

/// Eve's Gram matrix `E[r, k] = ⟨e_{m'n'}|e_{mn}⟩` with `r = 2m + n`, `k = 2m' + n'`.
#[derive(Debug, Clone, PartialEq)]
pub struct EveGram {
    e_matrix: CMatrix,
    clipped_mass: f64,
    residual: f64,
}

impl EveGram {
    /// Wraps a known Gram matrix, repairing it like a reconstructed one.
    pub fn from_matrix(e: &CMatrix) -> Result<Self> {
        if e.shape() != (4, 4) {
            return Err(Error::Dimension(format!("Eve's Gram matrix must be 4x4, got {:?}", e.shape())));
        }
        let (e_matrix, clipped_mass) = psd_project(&hermitian_part(e), PSD_TOL)?;
        Ok(Self { e_matrix, clipped_mass, residual: 0.0 })
    }

    pub fn e_matrix(&self) -> &CMatrix {
        &self.e_matrix
    }

    /// Total magnitude of the eigenvalues removed by the PSD repair.
    pub fn clipped_mass(&self) -> f64 {
        self.clipped_mass
    }

    /// `‖γ̂·ê − p_det‖₂` before symmetrization and repair.
    pub fn residual(&self) -> f64 {
        self.residual
    }

    pub fn warning(&self) -> bool {
        self.clipped_mass > WARN_CLIPPED_MASS
    }

    /// The entries in γ̂-column order `s = 8m + 4m' + 2n + n'`.
    pub fn to_vector(&self) -> CVector {
        matrix_to_e_vector(&self.e_matrix)
    }

    pub fn to_document(&self) -> EveGramDocument {
        let grid = |f: fn(&crate::qmath::C64) -> f64| {
            (0..4).map(|r| (0..4).map(|k| f(&self.e_matrix[(r, k)])).collect()).collect()
        };
        EveGramDocument {
            real: grid(|z| z.re),
            imag: grid(|z| z.im),
            clipped_mass: self.clipped_mass,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_document())?)
    }
}

/// Audit form of [`EveGram`]: row-major real and imaginary parts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EveGramDocument {
    pub real: Vec<Vec<f64>>,
    pub imag: Vec<Vec<f64>>,
    pub clipped_mass: f64,
}

/// Maps the γ̂-ordered vector `ê_s` to the 4×4 Gram layout.
pub fn e_vector_to_matrix(e: &CVector) -> CMatrix {
    CMatrix::from_fn(4, 4, |r, k| {
        let (m, n, mp, np) = (r / 2, r % 2, k / 2, k % 2);
        e[8 * m + 4 * mp + 2 * n + np]
    })
}

pub fn matrix_to_e_vector(e: &CMatrix) -> CVector {
    CVector::from_fn(N_OUTCOMES, |s, _| {
        let (m, mp, n, np) = (s / 8, (s / 4) % 2, (s / 2) % 2, s % 2);
        e[(2 * m + n, 2 * mp + np)]
    })
}

/// Solves `γ̂·ê = p_det`, symmetrizes and repairs small negative eigenvalues.
pub fn solve_eve(gamma: &GammaMatrix, stats: &DetectionStats) -> Result<EveGram> {
    if !(gamma.condition() < MAX_GAMMA_CONDITION) {
        return Err(Error::SingularGamma(gamma.condition()));
    }
    let rhs = stats.to_vector();
    let solution = solve_linear(gamma.matrix(), &rhs).map_err(|err| match err {
        Error::Singular(_) => Error::SingularGamma(gamma.condition()),
        other => other,
    })?;
    let raw = e_vector_to_matrix(&solution.x);
    let (e_matrix, clipped_mass) = psd_project(&hermitian_part(&raw), PSD_TOL)?;
    if clipped_mass > MAX_CLIPPED_MASS {
        return Err(Error::UnphysicalStats(clipped_mass));
    }
    Ok(EveGram { e_matrix, clipped_mass, residual: solution.residual })
}

/// Key-basis detection probability and bit error rate `(p_det00, e_Z)`.
pub fn key_basis_stats(stats: &DetectionStats) -> Result<(f64, f64)> {
    let p00 = stats.get(0, 0, 0, 0) + stats.get(0, 0, 0, 1) + stats.get(0, 0, 1, 0) + stats.get(0, 0, 1, 1);
    if !(p00 >= MIN_P_DET00) {
        return Err(Error::NoDetections(p00));
    }
    let errors = stats.get(0, 0, 0, 1) + stats.get(0, 0, 1, 0);
    Ok((p00, (errors / p00).clamp(0.0, 1.0)))
}
