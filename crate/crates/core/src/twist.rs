//! Phase-error rates optimized over twisting operations on the purifying
//! ancillas, and the fixed-purification baseline.
//!
//! The key-generation states `(x, y)` are purified by ancilla vectors
//! `|γ^{x,y}_{mn}⟩`. A twist applies a unitary `U^{x,y}` to each branch, and
//! the phase errors depend only on the Gram matrix
//!
//! ```text
//! G[a, b] = ⟨v_b|v_a⟩,   v_r = U^{first}|γ^{first}_r⟩,  v_{4+r} = U^{second}|γ^{second}_r⟩
//! ```
//!
//! with `r = 2m + n`. Its diagonal blocks are fixed by the signal states; the
//! off-diagonal block is free. Both phase errors are affine in
//! `S = Σ_{r,k} Re(G[r, 4+k]·E[r, k])`:
//! `e₋ = −(2/p_det00)·S` over branches `(0,1), (1,0)` and
//! `e₊ = 1 − (2/p_det00)·S` over branches `(0,0), (1,1)`.
//!
//! Each diagonal block `A_x = W_x W_x†` has a thin factor `W_x` (4×r_x). Every
//! feasible `G` has off-diagonal block `W_0 K W_1†` with
//! `[[𝟙, K], [K†, 𝟙]] ⪰ 0`, and that reduced matrix is the SDP variable. The
//! full 8×8 problem has no strictly feasible point whenever a signal state is
//! pure, which starves interior-point methods.

use rayon::join;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::evegram::EveGram;
use crate::qmath::{c, eig2_hermitian, eigh, kron, min_eigenvalue, CMatrix, ONE, ZERO};
use crate::sdp::hermitian::{re_trace_form, HermitianSdp};
use crate::sdp::{solve_sdp, SdpProblem, SdpStatus, Sense, SolverOptions};
use crate::states::{QubitState, SignalEnsemble};

/// Eigenvalues of an ancilla block below this fraction of the largest are dropped.
pub const RANK_TOL: f64 = 1e-10;
/// Bound intervals narrower than this become equalities.
pub const DEGENERATE_WIDTH: f64 = 1e-12;
/// Slack allowed when checking phase errors against their bounds.
pub const BOUND_TOL: f64 = 1e-6;

/// Which phase-error combination a Gram SDP optimizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    /// `e₋ = e_X − e_Y`, maximized, branches `(0,1)` and `(1,0)`.
    Minus,
    /// `e₊ = e_X + e_Y`, minimized, branches `(0,0)` and `(1,1)`.
    Plus,
}

impl Branch {
    /// The two `(x, y)` bit pairs whose ancillas form the Gram matrix.
    pub fn pairs(self) -> [(usize, usize); 2] {
        match self {
            Branch::Minus => [(0, 1), (1, 0)],
            Branch::Plus => [(0, 0), (1, 1)],
        }
    }

    fn sense(self) -> Sense {
        match self {
            Branch::Minus => Sense::Max,
            Branch::Plus => Sense::Min,
        }
    }

    /// `(constant, coefficient)` with `e = constant + coefficient·S`.
    fn affine(self, p_det00: f64) -> (f64, f64) {
        let coef = -2.0 / p_det00;
        match self {
            Branch::Minus => (0.0, coef),
            Branch::Plus => (1.0, coef),
        }
    }

    /// Feasible interval for the phase error given `e_Z`.
    fn bounds(self, e_z: f64) -> (f64, f64) {
        match self {
            Branch::Minus => (0.0, e_z),
            Branch::Plus => (e_z, 1.0),
        }
    }
}

/// Inputs of the two phase-error SDPs.
#[derive(Debug, Clone)]
pub struct TwistProblem {
    alice_key: [QubitState; 2],
    bob_key: [QubitState; 2],
    eve: EveGram,
    p_det00: f64,
    e_z: f64,
}

impl TwistProblem {
    pub fn new(alice_key: [QubitState; 2], bob_key: [QubitState; 2], eve: EveGram, p_det00: f64, e_z: f64) -> Result<Self> {
        if !(p_det00 > 0.0 && p_det00 <= 1.0) {
            return Err(Error::NoDetections(p_det00));
        }
        if !(0.0..=1.0).contains(&e_z) {
            return Err(Error::InvalidParams(format!("bit error rate {e_z} outside [0, 1]")));
        }
        Ok(Self { alice_key, bob_key, eve, p_det00, e_z })
    }

    pub fn from_ensembles(alice: &SignalEnsemble, bob: &SignalEnsemble, eve: EveGram, p_det00: f64, e_z: f64) -> Result<Self> {
        let key = |e: &SignalEnsemble| e.key_states().map(Clone::clone);
        Self::new(key(alice), key(bob), eve, p_det00, e_z)
    }

    pub fn eve(&self) -> &EveGram {
        &self.eve
    }

    pub fn p_det00(&self) -> f64 {
        self.p_det00
    }

    pub fn e_z(&self) -> f64 {
        self.e_z
    }

    /// `⟨γ^{x,y}_{m'n'}|γ^{x,y}_{mn}⟩ = p^{0,x} q^{0,y} ρ[m,m'] σ[n,n']` at `(2m+n, 2m'+n')`.
    pub fn ancilla_block(&self, x: usize, y: usize) -> CMatrix {
        let (a, b) = (&self.alice_key[x], &self.bob_key[y]);
        kron(a.rho(), b.rho()).scale(a.prob() * b.prob())
    }

    /// The phase error of `branch` for a full 8×8 Gram matrix.
    pub fn phase_error_of_gram(&self, branch: Branch, gram: &CMatrix) -> f64 {
        let e = self.eve.e_matrix();
        let mut s = 0.0;
        for r in 0..4 {
            for k in 0..4 {
                s += (gram[(r, 4 + k)] * e[(r, k)]).re;
            }
        }
        let (constant, coef) = branch.affine(self.p_det00);
        constant + coef * s
    }
}

/// Phase-error combinations and the recovered rates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhaseErrors {
    pub e_minus: f64,
    pub e_plus: f64,
    pub e_x: f64,
    pub e_y: f64,
}

impl PhaseErrors {
    pub fn new(e_minus: f64, e_plus: f64) -> Self {
        Self {
            e_minus,
            e_plus,
            e_x: 0.5 * (e_plus + e_minus),
            e_y: 0.5 * (e_plus - e_minus),
        }
    }
}

/// Thin factor `W` with `A = W W†`, keeping eigenvalues above `RANK_TOL·λ_max`.
fn thin_factor(a: &CMatrix) -> Result<CMatrix> {
    let (values, vectors) = eigh(a)?;
    let top = values.first().copied().unwrap_or(0.0);
    let kept: Vec<usize> = (0..values.len()).filter(|&k| top > 0.0 && values[k] > RANK_TOL * top).collect();
    let mut w = CMatrix::zeros(a.nrows(), kept.len());
    for (dst, &k) in kept.iter().enumerate() {
        w.set_column(dst, &vectors.column(k).scale(values[k].sqrt()));
    }
    Ok(w)
}

/// `W⁺ = Λ^{−1/2} U†`, the left inverse of a thin factor.
fn left_inverse(w: &CMatrix) -> CMatrix {
    let mut out = w.adjoint();
    for (k, mut row) in out.row_iter_mut().enumerate() {
        let norm2 = w.column(k).norm_squared();
        row.unscale_mut(norm2);
    }
    out
}

/// One phase-error SDP in reduced form.
#[derive(Debug, Clone)]
pub struct GramSdp {
    branch: Branch,
    factors: [CMatrix; 2],
    /// `W_1† Eᵀ W_0`, so that `S = Re Tr(K · wc)`.
    wc: CMatrix,
    constant: f64,
    coef: f64,
    bounds: (f64, f64),
    hermitian: Option<HermitianSdp>,
}

/// Result of solving a [`GramSdp`].
#[derive(Debug, Clone)]
pub struct GramSolution {
    /// Optimal phase error, clamped into its bound interval.
    pub value: f64,
    /// Unclamped objective value reported by the solver.
    pub raw_value: f64,
    /// Optimal 8×8 Gram matrix.
    pub gram: CMatrix,
    pub status: SdpStatus,
    pub iterations: usize,
    pub duality_gap: f64,
}

impl GramSdp {
    fn build(problem: &TwistProblem, branch: Branch) -> Result<Self> {
        let [(x0, y0), (x1, y1)] = branch.pairs();
        let factors = [thin_factor(&problem.ancilla_block(x0, y0))?, thin_factor(&problem.ancilla_block(x1, y1))?];
        let wc = factors[1].adjoint() * problem.eve.e_matrix().transpose() * &factors[0];
        let (r0, r1) = (factors[0].ncols(), factors[1].ncols());
        let dim = r0 + r1;
        let (constant, coef) = branch.affine(problem.p_det00);
        let bounds = branch.bounds(problem.e_z);

        let hermitian = if r0 == 0 || r1 == 0 {
            None
        } else {
            let mut f = CMatrix::zeros(dim, dim);
            f.view_mut((r0, 0), (r1, r0)).copy_from(&wc);
            let objective = re_trace_form(&f).scale(coef);
            let mut sdp = HermitianSdp::new(objective.clone(), constant, branch.sense())?;
            for (offset, r) in [(0, r0), (r0, r1)] {
                for p in 0..r {
                    for q in p..r {
                        sdp.fix_entry(offset + p, offset + q, if p == q { ONE } else { ZERO })?;
                    }
                }
            }
            let (lo, hi) = bounds;
            if hi - lo < DEGENERATE_WIDTH {
                sdp.add_equality(objective, 0.5 * (lo + hi) - constant)?;
            } else {
                sdp.add_inequality(objective.clone(), hi - constant)?;
                sdp.add_inequality(-objective, constant - lo)?;
            }
            Some(sdp)
        };
        Ok(Self { branch, factors, wc, constant, coef, bounds, hermitian })
    }

    pub fn branch(&self) -> Branch {
        self.branch
    }

    /// Sizes `(r_0, r_1)` of the two reduced blocks.
    pub fn ranks(&self) -> (usize, usize) {
        (self.factors[0].ncols(), self.factors[1].ncols())
    }

    /// The real symmetric problem handed to the solver; `None` when a
    /// branch has zero weight and nothing can be twisted.
    pub fn real_problem(&self) -> Option<SdpProblem> {
        self.hermitian.as_ref().map(HermitianSdp::to_real)
    }

    /// Phase error at a reduced variable `[[𝟙, K], [K†, 𝟙]]`.
    pub fn value(&self, reduced: &CMatrix) -> f64 {
        let (r0, r1) = self.ranks();
        let k = reduced.view((0, r0), (r0, r1));
        self.constant + self.coef * (k * &self.wc).trace().re
    }

    /// The 8×8 Gram matrix `blockdiag(W_0, W_1)·K̃·blockdiag(W_0, W_1)†`.
    pub fn lift(&self, reduced: &CMatrix) -> CMatrix {
        let w = self.block_factor();
        &w * reduced * w.adjoint()
    }

    /// The reduced variable of a feasible 8×8 Gram matrix.
    pub fn reduce(&self, gram: &CMatrix) -> CMatrix {
        let (r0, r1) = self.ranks();
        let k = left_inverse(&self.factors[0]) * gram.view((0, 4), (4, 4)) * left_inverse(&self.factors[1]).adjoint();
        let mut out = CMatrix::identity(r0 + r1, r0 + r1);
        out.view_mut((0, r0), (r0, r1)).copy_from(&k);
        out.view_mut((r0, 0), (r1, r0)).copy_from(&k.adjoint());
        out
    }

    fn block_factor(&self) -> CMatrix {
        let (r0, r1) = self.ranks();
        let mut w = CMatrix::zeros(8, r0 + r1);
        w.view_mut((0, 0), (4, r0)).copy_from(&self.factors[0]);
        w.view_mut((4, r0), (4, r1)).copy_from(&self.factors[1]);
        w
    }

    /// Solves the SDP; a non-optimal solver status becomes an error.
    pub fn solve(&self, options: &SolverOptions) -> Result<GramSolution> {
        let (r0, r1) = self.ranks();
        let (lo, hi) = self.bounds;
        let Some(hermitian) = self.hermitian.as_ref().filter(|_| self.wc.norm() > 0.0) else {
            // the objective does not depend on the twist
            if self.constant < lo - BOUND_TOL || self.constant > hi + BOUND_TOL {
                return Err(Error::SdpInfeasible(format!(
                    "{:?} phase error is fixed at {} outside [{lo}, {hi}]",
                    self.branch, self.constant
                )));
            }
            let reduced = CMatrix::identity(r0 + r1, r0 + r1);
            return Ok(GramSolution {
                value: self.constant.clamp(lo, hi),
                raw_value: self.constant,
                gram: self.lift(&reduced),
                status: SdpStatus::Optimal,
                iterations: 0,
                duality_gap: 0.0,
            });
        };
        let sol = solve_sdp(&hermitian.to_real(), options)?;
        let branch = self.branch;
        let sol = sol.into_result().map_err(|err| match err {
            Error::SdpInfeasible(msg) => Error::SdpInfeasible(format!("{branch:?} phase error: {msg}")),
            Error::NumericalTrouble(msg) => Error::NumericalTrouble(format!("{branch:?} phase error: {msg}")),
            other => other,
        })?;
        let reduced = hermitian.recover(&sol.x)?;
        Ok(GramSolution {
            value: sol.objective_value.clamp(lo, hi),
            raw_value: sol.objective_value,
            gram: self.lift(&reduced),
            status: sol.status,
            iterations: sol.iterations,
            duality_gap: sol.duality_gap,
        })
    }
}

/// The `e₋` SDP over branches `(0,1)`, `(1,0)`, maximized subject to `0 ≤ e₋ ≤ e_Z`.
pub fn build_eminus_problem(problem: &TwistProblem) -> Result<GramSdp> {
    GramSdp::build(problem, Branch::Minus)
}

/// The `e₊` SDP over branches `(0,0)`, `(1,1)`, minimized subject to `e_Z ≤ e₊ ≤ 1`.
pub fn build_eplus_problem(problem: &TwistProblem) -> Result<GramSdp> {
    GramSdp::build(problem, Branch::Plus)
}

/// Optimized phase errors with the solutions of both SDPs.
#[derive(Debug, Clone)]
pub struct TwistOutcome {
    pub errors: PhaseErrors,
    pub minus: GramSolution,
    pub plus: GramSolution,
}

/// Solves the `e₋` and `e₊` programs concurrently.
pub fn optimize_phase_errors(problem: &TwistProblem, options: &SolverOptions) -> Result<TwistOutcome> {
    let (minus, plus) = join(
        || build_eminus_problem(problem)?.solve(options),
        || build_eplus_problem(problem)?.solve(options),
    );
    let (minus, plus) = (minus?, plus?);
    Ok(TwistOutcome {
        errors: PhaseErrors::new(minus.value, plus.value),
        minus,
        plus,
    })
}

/// Ancilla vectors of the spectral purification of branch `(x, y)`: column
/// `2m + n` is `|γ^{x,y}_{mn}⟩` in the basis `|k, k'⟩` (index `2k + k'`),
/// with eigenvalues in decreasing order.
pub fn naive_ancillas(problem: &TwistProblem, x: usize, y: usize) -> Result<CMatrix> {
    let (a, b) = (&problem.alice_key[x], &problem.bob_key[y]);
    let (ea, eb) = (eig2_hermitian(a.rho())?, eig2_hermitian(b.rho())?);
    let weight = (a.prob() * b.prob()).sqrt();
    let mut out = CMatrix::zeros(4, 4);
    for m in 0..2 {
        for n in 0..2 {
            for k in 0..2 {
                for kp in 0..2 {
                    let amp = (ea.values[k].max(0.0) * eb.values[kp].max(0.0)).sqrt();
                    out[(2 * k + kp, 2 * m + n)] = ea.vectors[k][m] * eb.vectors[kp][n] * c(weight * amp, 0.0);
                }
            }
        }
    }
    Ok(out)
}

/// `G[a, b] = ⟨v_b|v_a⟩` for the columns of `[first second]`.
pub fn gram_of(first: &CMatrix, second: &CMatrix) -> CMatrix {
    let mut v = CMatrix::zeros(first.nrows(), 8);
    v.view_mut((0, 0), (first.nrows(), 4)).copy_from(first);
    v.view_mut((0, 4), (second.nrows(), 4)).copy_from(second);
    (v.adjoint() * v).transpose()
}

/// Gram matrix after applying `u_first`, `u_second` to the spectral ancillas.
pub fn twisted_gram(problem: &TwistProblem, branch: Branch, u_first: &CMatrix, u_second: &CMatrix) -> Result<CMatrix> {
    let [(x0, y0), (x1, y1)] = branch.pairs();
    Ok(gram_of(&(u_first * naive_ancillas(problem, x0, y0)?), &(u_second * naive_ancillas(problem, x1, y1)?)))
}

/// Phase errors of the untwisted spectral purification, as computed.
pub fn naive_phase_errors_raw(problem: &TwistProblem) -> Result<PhaseErrors> {
    let id = CMatrix::identity(4, 4);
    let minus = problem.phase_error_of_gram(Branch::Minus, &twisted_gram(problem, Branch::Minus, &id, &id)?);
    let plus = problem.phase_error_of_gram(Branch::Plus, &twisted_gram(problem, Branch::Plus, &id, &id)?);
    Ok(PhaseErrors::new(minus, plus))
}

/// Phase errors of the spectral purification, with each combination moved
/// into its bound interval by a sign flip of one branch's ancilla.
///
/// Negating one branch sends `S → −S`, i.e. `e₋ → −e₋` and `e₊ → 2 − e₊`,
/// and leaves the six-state rate unchanged.
pub fn naive_phase_errors(problem: &TwistProblem) -> Result<PhaseErrors> {
    let raw = naive_phase_errors_raw(problem)?;
    Ok(PhaseErrors::new(raw.e_minus.abs(), raw.e_plus.min(2.0 - raw.e_plus)))
}

/// Checks that an 8×8 Gram matrix is PSD and has the required diagonal blocks.
pub fn gram_defect(problem: &TwistProblem, branch: Branch, gram: &CMatrix) -> f64 {
    let [(x0, y0), (x1, y1)] = branch.pairs();
    let d0 = (gram.view((0, 0), (4, 4)) - problem.ancilla_block(x0, y0)).norm();
    let d1 = (gram.view((4, 4), (4, 4)) - problem.ancilla_block(x1, y1)).norm();
    d0.max(d1).max(-min_eigenvalue(gram))
}
