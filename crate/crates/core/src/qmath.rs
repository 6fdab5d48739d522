//! Dense complex linear algebra for the small matrices the pipeline needs.
//!
//! Everything here works on matrices of at most 32×32 (the γ̂ matrix is
//! 16×16, embedded Gram variables are 16×16 real), so storage is dense and
//! backed by `nalgebra`.
//!
//! Vectorization is row-major throughout the crate: `vec(M)[d·u + v] = M[u, v]`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;
pub type RMatrix = DMatrix<f64>;
pub type RVector = DVector<f64>;

/// Relative tolerance for Hermiticity checks.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// Pivot ratio below which a linear system is reported singular.
pub const PIVOT_TOL: f64 = 1e-13;

pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };
pub const I: C64 = C64 { re: 0.0, im: 1.0 };

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Identity (index 0) followed by the Pauli matrices X, Y, Z.
pub fn pauli(r: usize) -> CMatrix {
    match r {
        0 => CMatrix::identity(2, 2),
        1 => CMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]),
        2 => CMatrix::from_row_slice(2, 2, &[ZERO, -I, I, ZERO]),
        3 => CMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE]),
        _ => panic!("pauli index {r} out of range"),
    }
}

/// `|v⟩⟨v|` for a column vector.
pub fn projector(v: &CVector) -> CMatrix {
    v * v.adjoint()
}

/// Largest entrywise deviation `|M_ij − conj(M_ji)|`, relative to ‖M‖_F.
pub fn hermitian_defect(m: &CMatrix) -> f64 {
    if !m.is_square() {
        return f64::INFINITY;
    }
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    let scale = m.norm();
    if scale == 0.0 {
        0.0
    } else {
        worst / scale
    }
}

pub fn ensure_hermitian(m: &CMatrix, tol: f64) -> Result<()> {
    let defect = hermitian_defect(m);
    if defect > tol {
        Err(Error::NotHermitian(defect))
    } else {
        Ok(())
    }
}

/// `½(M + M†)`.
pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

/// Eigenpairs of a 2×2 Hermitian matrix.
#[derive(Debug, Clone)]
pub struct Eig2 {
    /// Eigenvalues in decreasing order.
    pub values: [f64; 2],
    /// Orthonormal eigenvectors matching `values`. The first entry of
    /// non-negligible magnitude in each vector is real and positive.
    pub vectors: [CVector; 2],
}

/// Closed-form eigendecomposition of a 2×2 Hermitian matrix.
pub fn eig2_hermitian(m: &CMatrix) -> Result<Eig2> {
    if m.shape() != (2, 2) {
        return Err(Error::Dimension(format!(
            "eig2_hermitian needs 2x2, got {:?}",
            m.shape()
        )));
    }
    ensure_hermitian(m, HERMITIAN_TOL)?;
    let a = m[(0, 0)].re;
    let d = m[(1, 1)].re;
    let b = 0.5 * (m[(0, 1)] + m[(1, 0)].conj());
    let mean = 0.5 * (a + d);
    let half_gap = 0.5 * (a - d);
    let radius = half_gap.hypot(b.norm());
    let values = [mean + radius, mean - radius];

    // Pick whichever null-vector form of (M − λ₀) has the larger norm.
    let top = if a >= d {
        CVector::from_vec(vec![c(values[0] - d, 0.0), b.conj()])
    } else {
        CVector::from_vec(vec![b, c(values[0] - a, 0.0)])
    };
    let norm = top.norm();
    let v0 = if norm <= f64::EPSILON * (1.0 + a.abs() + d.abs()) {
        CVector::from_vec(vec![ONE, ZERO])
    } else {
        top.unscale(norm)
    };
    let v1 = CVector::from_vec(vec![-v0[1].conj(), v0[0].conj()]);
    Ok(Eig2 {
        values,
        vectors: [fix_phase(v0), fix_phase(v1)],
    })
}

/// Rotate a vector's global phase so its first non-negligible entry is real positive.
pub fn fix_phase(mut v: CVector) -> CVector {
    let scale = v.norm();
    if let Some(lead) = v.iter().copied().find(|z| z.norm() > 1e-12 * scale) {
        let phase = lead.conj() / lead.norm();
        for z in v.iter_mut() {
            *z *= phase;
        }
    }
    v
}

/// Hermitian eigendecomposition of any size, eigenvalues in decreasing order.
///
/// Returns the eigenvalues and a matrix whose columns are the eigenvectors.
pub fn eigh(m: &CMatrix) -> Result<(Vec<f64>, CMatrix)> {
    ensure_hermitian(m, HERMITIAN_TOL)?;
    let eig = hermitian_part(m).symmetric_eigen();
    let n = m.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let col = fix_phase(eig.eigenvectors.column(src).into_owned());
        vectors.set_column(dst, &col);
    }
    Ok((values, vectors))
}

/// Smallest eigenvalue of the symmetric part of a real matrix.
pub fn min_eigenvalue_real(m: &RMatrix) -> f64 {
    let sym = (m + m.transpose()) * 0.5;
    sym.symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

pub fn min_eigenvalue(m: &CMatrix) -> f64 {
    hermitian_part(m)
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Row-major vectorization of a square matrix.
pub fn vec_rowmajor(m: &CMatrix) -> CVector {
    let (rows, cols) = m.shape();
    CVector::from_iterator(
        rows * cols,
        (0..rows).flat_map(|u| (0..cols).map(move |v| m[(u, v)])),
    )
}

/// Inverse of [`vec_rowmajor`] for a `d×d` matrix.
pub fn reshape_rowmajor(v: &CVector, d: usize) -> Result<CMatrix> {
    if v.len() != d * d {
        return Err(Error::Dimension(format!(
            "cannot reshape length {} into {d}x{d}",
            v.len()
        )));
    }
    Ok(CMatrix::from_row_slice(d, d, v.as_slice()))
}

/// Kronecker product, `(A⊗B)[a·rB + b, c·cB + d] = A[a, c]·B[b, d]`.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Result of [`solve_linear`].
#[derive(Debug, Clone)]
pub struct LinearSolution {
    pub x: CVector,
    /// ‖Ax − b‖₂.
    pub residual: f64,
    /// 2-norm condition number estimate of A.
    pub condition: f64,
}

/// Solve `Ax = b` by Gaussian elimination with scaled partial pivoting.
pub fn solve_linear(a: &CMatrix, b: &CVector) -> Result<LinearSolution> {
    let n = a.nrows();
    if !a.is_square() || b.len() != n {
        return Err(Error::Dimension(format!(
            "solve_linear: A is {:?}, b has length {}",
            a.shape(),
            b.len()
        )));
    }
    let mut lu = a.clone();
    let mut rhs = b.clone();
    let mut scale: Vec<f64> = (0..n)
        .map(|i| lu.row(i).iter().map(|z| z.norm()).fold(0.0, f64::max))
        .collect();
    if scale.iter().any(|&s| s == 0.0) {
        return Err(Error::Singular(0.0));
    }

    for k in 0..n {
        let (pivot_row, ratio) = (k..n)
            .map(|i| (i, lu[(i, k)].norm() / scale[i]))
            .max_by(|x, y| x.1.total_cmp(&y.1))
            .expect("non-empty pivot range");
        if ratio < PIVOT_TOL {
            return Err(Error::Singular(ratio));
        }
        if pivot_row != k {
            lu.swap_rows(k, pivot_row);
            rhs.swap_rows(k, pivot_row);
            scale.swap(k, pivot_row);
        }
        let pivot = lu[(k, k)];
        for i in k + 1..n {
            let factor = lu[(i, k)] / pivot;
            if factor == ZERO {
                continue;
            }
            for j in k..n {
                let delta = factor * lu[(k, j)];
                lu[(i, j)] -= delta;
            }
            let delta = factor * rhs[k];
            rhs[i] -= delta;
        }
    }

    let mut x = CVector::zeros(n);
    for i in (0..n).rev() {
        let mut acc = rhs[i];
        for j in i + 1..n {
            acc -= lu[(i, j)] * x[j];
        }
        x[i] = acc / lu[(i, i)];
    }
    let residual = (a * &x - b).norm();
    Ok(LinearSolution {
        x,
        residual,
        condition: condition_number(a),
    })
}

/// Ratio of extreme singular values; infinite for a singular matrix.
pub fn condition_number(a: &CMatrix) -> f64 {
    let sv = a.clone().singular_values();
    let max = sv.iter().copied().fold(0.0, f64::max);
    let min = sv.iter().copied().fold(f64::INFINITY, f64::min);
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Numerical rank with singular values compared against `rel_tol · σ_max`.
pub fn rank(a: &CMatrix, rel_tol: f64) -> usize {
    let sv = a.clone().singular_values();
    let max = sv.iter().copied().fold(0.0, f64::max);
    sv.iter().filter(|&&s| s > rel_tol * max).count()
}

/// Clip negative eigenvalues of a Hermitian matrix.
///
/// If the smallest eigenvalue is at least `-tol` the input is returned
/// unchanged with zero clipped mass. Otherwise every negative eigenvalue is
/// set to zero, which gives the Frobenius-nearest PSD matrix, and the
/// returned mass is `Σ|min(λ_k, 0)|`.
pub fn psd_project(m: &CMatrix, tol: f64) -> Result<(CMatrix, f64)> {
    let (values, vectors) = eigh(m)?;
    let lowest = values.iter().copied().fold(f64::INFINITY, f64::min);
    if lowest >= -tol {
        return Ok((m.clone(), 0.0));
    }
    let clipped: f64 = values.iter().filter(|&&v| v < 0.0).map(|v| -v).sum();
    let n = m.nrows();
    let mut out = CMatrix::zeros(n, n);
    for (k, &lambda) in values.iter().enumerate() {
        if lambda > 0.0 {
            let v = vectors.column(k);
            out += (v * v.adjoint()).scale(lambda);
        }
    }
    Ok((hermitian_part(&out), clipped))
}

/// `[[Re C, −Im C], [Im C, Re C]]`, the real symmetric form of a Hermitian matrix.
pub fn real_embed_hermitian(m: &CMatrix) -> Result<RMatrix> {
    ensure_hermitian(m, HERMITIAN_TOL)?;
    Ok(real_embed(m))
}

/// Real embedding without the Hermiticity check; valid for any complex matrix
/// and multiplicative: `embed(AB) = embed(A)·embed(B)`.
pub fn real_embed(m: &CMatrix) -> RMatrix {
    let (r, cols) = m.shape();
    let mut out = RMatrix::zeros(2 * r, 2 * cols);
    for i in 0..r {
        for j in 0..cols {
            let z = m[(i, j)];
            out[(i, j)] = z.re;
            out[(r + i, cols + j)] = z.re;
            out[(r + i, j)] = z.im;
            out[(i, cols + j)] = -z.im;
        }
    }
    out
}

/// Recover the Hermitian matrix from a (possibly slightly inconsistent) real
/// embedding by averaging the duplicated blocks.
pub fn real_unembed(y: &RMatrix) -> Result<CMatrix> {
    let (rows, cols) = y.shape();
    if rows != cols || rows % 2 != 0 {
        return Err(Error::Dimension(format!(
            "real embedding must be square of even size, got {rows}x{cols}"
        )));
    }
    let n = rows / 2;
    let m = CMatrix::from_fn(n, n, |i, j| {
        let re = 0.5 * (y[(i, j)] + y[(n + i, n + j)]);
        let im = 0.5 * (y[(n + i, j)] - y[(i, n + j)]);
        c(re, im)
    });
    Ok(hermitian_part(&m))
}

/// Frobenius inner product `Σ A_ij B_ij` of two real matrices.
pub fn frobenius_dot(a: &RMatrix, b: &RMatrix) -> f64 {
    a.dot(b)
}
