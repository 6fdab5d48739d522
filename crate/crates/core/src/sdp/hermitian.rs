//! Complex Hermitian SDPs through the real embedding
//! `H ↦ [[Re H, −Im H], [Im H, Re H]]`.
//!
//! For Hermitian `A` and `H`, `Tr(A H) = ½⟨embed(A), embed(H)⟩`. The two
//! copies of `Re H` and the antisymmetry of `Im H` are enforced by explicit
//! equality constraints, so every feasible real matrix is an embedding.

use super::{sym_unit, SdpProblem, Sense};
use crate::error::{Error, Result};
use crate::qmath::{ensure_hermitian, real_embed, real_unembed, CMatrix, RMatrix, C64};

/// Tolerance on the Hermiticity of objective and constraint matrices.
const TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct HermitianSdp {
    n: usize,
    objective: CMatrix,
    offset: f64,
    sense: Sense,
    equalities: Vec<(CMatrix, f64)>,
    inequalities: Vec<(CMatrix, f64)>,
}

impl HermitianSdp {
    /// Optimizes `Tr(objective · H) + offset` over `n×n` Hermitian `H ⪰ 0`.
    pub fn new(objective: CMatrix, offset: f64, sense: Sense) -> Result<Self> {
        if !objective.is_square() {
            return Err(Error::Dimension(format!("objective is {:?}", objective.shape())));
        }
        ensure_hermitian(&objective, TOL)?;
        Ok(Self {
            n: objective.nrows(),
            objective,
            offset,
            sense,
            equalities: Vec::new(),
            inequalities: Vec::new(),
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    fn check(&self, a: &CMatrix) -> Result<()> {
        if a.shape() != (self.n, self.n) {
            return Err(Error::Dimension(format!("constraint is {:?}, expected {1}x{1}", a.shape(), self.n)));
        }
        ensure_hermitian(a, TOL)
    }

    /// `Tr(a H) = b`.
    pub fn add_equality(&mut self, a: CMatrix, b: f64) -> Result<()> {
        self.check(&a)?;
        self.equalities.push((a, b));
        Ok(())
    }

    /// `Tr(a H) ≤ h`.
    pub fn add_inequality(&mut self, a: CMatrix, h: f64) -> Result<()> {
        self.check(&a)?;
        self.inequalities.push((a, h));
        Ok(())
    }

    /// Pins `H[p, q]` (and therefore `H[q, p]`) to `value`.
    pub fn fix_entry(&mut self, p: usize, q: usize, value: C64) -> Result<()> {
        if p >= self.n || q >= self.n {
            return Err(Error::Dimension(format!("entry ({p}, {q}) outside {0}x{0}", self.n)));
        }
        if p == q {
            if value.im.abs() > TOL {
                return Err(Error::NotHermitian(value.im.abs()));
            }
            return self.add_equality(real_part_selector(self.n, p, p), value.re);
        }
        self.add_equality(real_part_selector(self.n, p, q), value.re)?;
        self.add_equality(imag_part_selector(self.n, p, q), value.im)
    }

    /// The equivalent real problem over `2n×2n` symmetric matrices.
    pub fn to_real(&self) -> SdpProblem {
        let n = self.n;
        let half = |a: &CMatrix| real_embed(a).scale(0.5);
        let mut problem = SdpProblem::new(half(&self.objective), self.sense).with_offset(self.offset);
        for p in 0..n {
            for q in p..n {
                problem.add_equality(sym_unit(2 * n, p, q) - sym_unit(2 * n, n + p, n + q), 0.0);
                problem.add_equality(sym_unit(2 * n, n + p, q) + sym_unit(2 * n, n + q, p), 0.0);
            }
        }
        for (a, b) in &self.equalities {
            problem.add_equality(half(a), *b);
        }
        for (a, h) in &self.inequalities {
            problem.add_inequality(half(a), *h);
        }
        problem
    }

    /// Recovers `H` from a solution of [`Self::to_real`].
    pub fn recover(&self, y: &RMatrix) -> Result<CMatrix> {
        real_unembed(y)
    }
}

/// Hermitian `A` with `Tr(A H) = Re H[p, q]`.
pub fn real_part_selector(n: usize, p: usize, q: usize) -> CMatrix {
    let mut a = CMatrix::zeros(n, n);
    a[(q, p)] += C64::new(0.5, 0.0);
    a[(p, q)] += C64::new(0.5, 0.0);
    a
}

/// Hermitian `A` with `Tr(A H) = Im H[p, q]`.
pub fn imag_part_selector(n: usize, p: usize, q: usize) -> CMatrix {
    let mut a = CMatrix::zeros(n, n);
    a[(q, p)] += C64::new(0.0, -0.5);
    a[(p, q)] += C64::new(0.0, 0.5);
    a
}

/// The Hermitian matrix `(F + F†)/2`, for which `Tr(· H) = Re Tr(F H)`.
pub fn re_trace_form(f: &CMatrix) -> CMatrix {
    (f + f.adjoint()).scale(0.5)
}
