//! Dense semidefinite programming for small problems.
//!
//! Problems have the form
//!
//! ```text
//! minimize / maximize  ⟨C, X⟩ + offset
//! subject to           ⟨A_i, X⟩ = b_i,   ⟨G_j, X⟩ ≤ h_j,   X ⪰ 0
//! ```
//!
//! with `X` real symmetric. Complex Hermitian problems are expressed through
//! [`hermitian::HermitianSdp`].

pub mod hermitian;
mod ipm;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qmath::RMatrix;

pub use ipm::solve_sdp;

/// Largest supported matrix dimension.
pub const MAX_DIM: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Sense {
    #[default]
    Min,
    Max,
}

/// `⟨a, X⟩ = b` or `⟨a, X⟩ ≤ b`, depending on which list holds it.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearConstraint {
    pub a: RMatrix,
    pub b: f64,
}

impl LinearConstraint {
    pub fn new(a: RMatrix, b: f64) -> Self {
        Self { a, b }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdpProblem {
    pub dim: usize,
    pub objective: RMatrix,
    /// Constant added to the reported objective value.
    pub offset: f64,
    pub equalities: Vec<LinearConstraint>,
    pub inequalities: Vec<LinearConstraint>,
    pub sense: Sense,
}

impl SdpProblem {
    pub fn new(objective: RMatrix, sense: Sense) -> Self {
        Self {
            dim: objective.nrows(),
            objective,
            offset: 0.0,
            equalities: Vec::new(),
            inequalities: Vec::new(),
            sense,
        }
    }

    pub fn with_offset(mut self, offset: f64) -> Self {
        self.offset = offset;
        self
    }

    pub fn add_equality(&mut self, a: RMatrix, b: f64) {
        self.equalities.push(LinearConstraint::new(a, b));
    }

    /// Adds `⟨a, X⟩ ≤ h`.
    pub fn add_inequality(&mut self, a: RMatrix, h: f64) {
        self.inequalities.push(LinearConstraint::new(a, h));
    }

    /// `⟨C, X⟩ + offset`.
    pub fn evaluate(&self, x: &RMatrix) -> f64 {
        self.objective.dot(x) + self.offset
    }

    /// Largest violation of the linear constraints at `x`, in absolute terms.
    pub fn constraint_violation(&self, x: &RMatrix) -> f64 {
        let eq = self.equalities.iter().map(|c| (c.a.dot(x) - c.b).abs());
        let ineq = self.inequalities.iter().map(|c| (c.a.dot(x) - c.b).max(0.0));
        eq.chain(ineq).fold(0.0, f64::max)
    }

    /// Checks dimensions, finiteness and symmetry of every matrix.
    pub fn validate(&self) -> Result<()> {
        let n = self.dim;
        if n == 0 || n > MAX_DIM {
            return Err(Error::Dimension(format!("SDP dimension {n} outside 1..={MAX_DIM}")));
        }
        let check = |what: &str, m: &RMatrix, b: f64| -> Result<()> {
            if m.shape() != (n, n) {
                return Err(Error::Dimension(format!("{what} is {:?}, expected {n}x{n}", m.shape())));
            }
            if !b.is_finite() || m.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidParams(format!("{what} has non-finite entries")));
            }
            let defect = (m - m.transpose()).norm();
            if defect > 1e-12 * m.norm().max(1.0) {
                return Err(Error::NotHermitian(defect));
            }
            Ok(())
        };
        check("objective", &self.objective, self.offset)?;
        for (i, c) in self.equalities.iter().enumerate() {
            check(&format!("equality {i}"), &c.a, c.b)?;
        }
        for (i, c) in self.inequalities.iter().enumerate() {
            check(&format!("inequality {i}"), &c.a, c.b)?;
        }
        Ok(())
    }

    pub fn to_document(&self) -> SdpProblemDocument {
        let rows = |m: &RMatrix| (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect();
        let cons = |list: &[LinearConstraint]| {
            list.iter()
                .map(|c| ConstraintDocument { a: rows(&c.a), b: c.b })
                .collect()
        };
        SdpProblemDocument {
            dim: self.dim,
            sense: self.sense,
            objective: rows(&self.objective),
            offset: self.offset,
            equalities: cons(&self.equalities),
            inequalities: cons(&self.inequalities),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&self.to_document())?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str::<SdpProblemDocument>(text)?.into_problem()
    }
}

/// JSON form of an [`SdpProblem`]; matrices are arrays of rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdpProblemDocument {
    pub dim: usize,
    #[serde(default)]
    pub sense: Sense,
    pub objective: Vec<Vec<f64>>,
    #[serde(default)]
    pub offset: f64,
    #[serde(default)]
    pub equalities: Vec<ConstraintDocument>,
    #[serde(default)]
    pub inequalities: Vec<ConstraintDocument>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintDocument {
    pub a: Vec<Vec<f64>>,
    pub b: f64,
}

impl SdpProblemDocument {
    pub fn into_problem(self) -> Result<SdpProblem> {
        let n = self.dim;
        let matrix = |rows: &[Vec<f64>]| -> Result<RMatrix> {
            if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                return Err(Error::Dimension(format!("matrix rows do not match dimension {n}")));
            }
            Ok(RMatrix::from_fn(n, n, |i, j| rows[i][j]))
        };
        let cons = |list: &[ConstraintDocument]| -> Result<Vec<LinearConstraint>> {
            list.iter().map(|c| Ok(LinearConstraint::new(matrix(&c.a)?, c.b))).collect()
        };
        let problem = SdpProblem {
            dim: n,
            objective: matrix(&self.objective)?,
            offset: self.offset,
            equalities: cons(&self.equalities)?,
            inequalities: cons(&self.inequalities)?,
            sense: self.sense,
        };
        problem.validate()?;
        Ok(problem)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Bound on the relative residuals and duality gap at termination.
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tol: 1e-8, max_iters: 200 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SdpStatus {
    Optimal,
    Infeasible,
    NumericalTrouble,
}

impl std::fmt::Display for SdpStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SdpStatus::Optimal => "optimal",
            SdpStatus::Infeasible => "infeasible",
            SdpStatus::NumericalTrouble => "numerical_trouble",
        })
    }
}

/// One interior-point iterate, in the solver's internal (scaled, minimizing) form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterateRecord {
    pub iteration: usize,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub gap: f64,
    pub mu: f64,
    /// `⟨X, Z⟩ + sᵀz`, nonnegative for interior iterates.
    pub complementarity: f64,
    /// `⟨R_d, X⟩ + r_dᵀs − yᵀr_p`, the residual part of the primal-dual gap.
    pub residual_term: f64,
    pub step_primal: f64,
    pub step_dual: f64,
}

impl IterateRecord {
    /// How far `primal − dual` is from `complementarity + residual_term`.
    /// Zero up to rounding at every iterate.
    pub fn weak_duality_defect(&self) -> f64 {
        (self.primal_objective - self.dual_objective) - (self.complementarity + self.residual_term)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdpSolution {
    pub x: RMatrix,
    /// Multipliers of the equality constraints.
    pub y_eq: Vec<f64>,
    /// Multipliers of the inequality constraints, nonnegative.
    pub y_ineq: Vec<f64>,
    /// Dual slack matrix `C − Σ y_i A_i − Σ y_j G_j` for a minimization.
    pub z: RMatrix,
    /// `⟨C, X⟩ + offset` in the problem's own sense.
    pub objective_value: f64,
    pub dual_value: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub duality_gap: f64,
    pub iterations: usize,
    pub status: SdpStatus,
    pub message: String,
    pub history: Vec<IterateRecord>,
}

impl SdpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == SdpStatus::Optimal
    }

    /// Turns a non-optimal status into the matching error.
    pub fn into_result(self) -> Result<Self> {
        match self.status {
            SdpStatus::Optimal => Ok(self),
            SdpStatus::Infeasible => Err(Error::SdpInfeasible(self.message)),
            SdpStatus::NumericalTrouble => Err(Error::NumericalTrouble(self.message)),
        }
    }
}

/// `(E_ij + E_ji) / 2`, which picks out `X[i, j]` from a symmetric matrix.
pub fn sym_unit(n: usize, i: usize, j: usize) -> RMatrix {
    let mut m = RMatrix::zeros(n, n);
    m[(i, j)] += 0.5;
    m[(j, i)] += 0.5;
    m
}
