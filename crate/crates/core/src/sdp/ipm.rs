//! Infeasible-start primal-dual interior-point method (HKM direction,
//! Mehrotra predictor-corrector).
//!
//! Internally every problem is a minimization in the standard form
//! `⟨a_i, X⟩ + [i is an inequality]·s_i = b_i`, `X ⪰ 0`, `s ≥ 0`, with dual
//! `Z = C − Σ y_i a_i ⪰ 0` and `z = −y_I ≥ 0`. Rows are scaled to unit
//! Frobenius norm and the cost to unit norm before iterating.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::{IterateRecord, SdpProblem, SdpSolution, SdpStatus, Sense, SolverOptions};
use crate::error::Result;
use crate::qmath::RMatrix;

const STEP_FRACTION: f64 = 0.98;
const DIVERGENCE: f64 = 1e14;

struct Standard {
    n: usize,
    n_eq: usize,
    a: Vec<RMatrix>,
    b: DVector<f64>,
    c: RMatrix,
    /// Original constraint index of each kept row: `(is_inequality, index, row scale)`.
    rows: Vec<(bool, usize, f64)>,
    c_scale: f64,
    sign: f64,
}

impl Standard {
    fn n_ineq(&self) -> usize {
        self.a.len() - self.n_eq
    }

    fn apply(&self, x: &RMatrix) -> DVector<f64> {
        DVector::from_iterator(self.a.len(), self.a.iter().map(|a| a.dot(x)))
    }

    fn adjoint(&self, y: &DVector<f64>) -> RMatrix {
        let mut out = RMatrix::zeros(self.n, self.n);
        for (a, &yi) in self.a.iter().zip(y.iter()) {
            if yi != 0.0 {
                out.zip_apply(a, |o, v| *o += yi * v);
            }
        }
        out
    }
}

enum Prepared {
    Ready(Standard),
    Trivially(SdpStatus, String),
}

fn prepare(problem: &SdpProblem, tol: f64) -> Prepared {
    let largest = problem
        .equalities
        .iter()
        .chain(&problem.inequalities)
        .map(|c| c.a.norm())
        .fold(0.0, f64::max);
    let negligible = 1e-12 * largest.max(1.0);
    let mut a = Vec::new();
    let mut b = Vec::new();
    let mut rows = Vec::new();
    for (ineq, list) in [(false, &problem.equalities), (true, &problem.inequalities)] {
        for (k, con) in list.iter().enumerate() {
            let norm = con.a.norm();
            if norm <= negligible {
                let violated = if ineq { con.b < -tol } else { con.b.abs() > tol };
                if violated {
                    let kind = if ineq { "inequality" } else { "equality" };
                    return Prepared::Trivially(
                        SdpStatus::Infeasible,
                        format!("{kind} {k} has a zero left-hand side and right-hand side {}", con.b),
                    );
                }
                continue;
            }
            a.push(con.a.unscale(norm));
            b.push(con.b / norm);
            rows.push((ineq, k, norm));
        }
    }
    let n_eq = rows.iter().filter(|r| !r.0).count();
    let sign = match problem.sense {
        Sense::Min => 1.0,
        Sense::Max => -1.0,
    };
    let c_norm = problem.objective.norm();
    let c_scale = if c_norm > 0.0 { c_norm } else { 1.0 };
    Prepared::Ready(Standard {
        n: problem.dim,
        n_eq,
        a,
        b: DVector::from_vec(b),
        c: problem.objective.scale(sign / c_scale),
        rows,
        c_scale,
        sign,
    })
}

/// Solves `problem` to relative accuracy `options.tol`.
///
/// Malformed problems are reported as errors; infeasibility and solver
/// failures are reported through [`SdpSolution::status`].
pub fn solve_sdp(problem: &SdpProblem, options: &SolverOptions) -> Result<SdpSolution> {
    problem.validate()?;
    let std = match prepare(problem, options.tol) {
        Prepared::Ready(std) => std,
        Prepared::Trivially(status, message) => {
            let n = problem.dim;
            return Ok(SdpSolution {
                x: RMatrix::zeros(n, n),
                y_eq: vec![0.0; problem.equalities.len()],
                y_ineq: vec![0.0; problem.inequalities.len()],
                z: RMatrix::zeros(n, n),
                objective_value: f64::NAN,
                dual_value: f64::NAN,
                primal_residual: f64::INFINITY,
                dual_residual: f64::INFINITY,
                duality_gap: f64::INFINITY,
                iterations: 0,
                status,
                message,
                history: Vec::new(),
            });
        }
    };
    let run = iterate(&std, options);
    Ok(finish(problem, &std, run))
}

struct Run {
    x: RMatrix,
    y: DVector<f64>,
    z: RMatrix,
    status: SdpStatus,
    message: String,
    last: IterateRecord,
    history: Vec<IterateRecord>,
}

struct Direction {
    dx: RMatrix,
    dy: DVector<f64>,
    dz: RMatrix,
    ds: DVector<f64>,
    dzs: DVector<f64>,
}

enum SchurFactor {
    Cholesky(Cholesky<f64, Dyn>),
    Lu(nalgebra::LU<f64, Dyn, Dyn>),
    Empty,
}

impl SchurFactor {
    fn new(m: DMatrix<f64>) -> Option<Self> {
        if m.nrows() == 0 {
            return Some(SchurFactor::Empty);
        }
        if let Some(ch) = Cholesky::new(m.clone()) {
            return Some(SchurFactor::Cholesky(ch));
        }
        let lu = m.clone().lu();
        if lu.is_invertible() {
            return Some(SchurFactor::Lu(lu));
        }
        // linearly dependent constraints: regularize
        let shift = 1e-12 * m.diagonal().amax().max(f64::MIN_POSITIVE);
        let shifted = &m + DMatrix::identity(m.nrows(), m.nrows()).scale(shift);
        Cholesky::new(shifted).map(SchurFactor::Cholesky)
    }

    fn solve(&self, rhs: &DVector<f64>) -> Option<DVector<f64>> {
        let out = match self {
            SchurFactor::Cholesky(ch) => ch.solve(rhs),
            SchurFactor::Lu(lu) => lu.solve(rhs)?,
            SchurFactor::Empty => DVector::zeros(0),
        };
        out.iter().all(|v| v.is_finite()).then_some(out)
    }
}

struct Workspace<'a> {
    std: &'a Standard,
    x: &'a RMatrix,
    zinv: RMatrix,
    /// `X a_j Z⁻¹` for each row.
    xaz: Vec<RMatrix>,
    s: &'a DVector<f64>,
    zs: &'a DVector<f64>,
    schur: SchurFactor,
}

impl Workspace<'_> {
    fn direction(
        &self,
        rp: &DVector<f64>,
        rd: &RMatrix,
        rd_s: &DVector<f64>,
        sigma_mu: f64,
        corr: Option<(&RMatrix, &DVector<f64>)>,
    ) -> Option<Direction> {
        let std = self.std;
        let n_eq = std.n_eq;
        let mut d = self.zinv.scale(sigma_mu) - self.x - self.x * rd * &self.zinv;
        if let Some((cm, _)) = corr {
            d -= cm * &self.zinv;
        }
        let g = DVector::from_fn(std.n_ineq(), |j, _| {
            let (s, z) = (self.s[j], self.zs[j]);
            let mut v = sigma_mu / z - s - s / z * rd_s[j];
            if let Some((_, cv)) = corr {
                v -= cv[j] / z;
            }
            v
        });
        let mut rhs = rp - std.apply(&d);
        for j in 0..g.len() {
            rhs[n_eq + j] -= g[j];
        }
        let dy = self.schur.solve(&rhs)?;
        let mut dx = d;
        for (xa, &v) in self.xaz.iter().zip(dy.iter()) {
            dx.zip_apply(xa, |o, w| *o += v * w);
        }
        let dx = (&dx + dx.transpose()).scale(0.5);
        let dz = rd - std.adjoint(&dy);
        let dzs = DVector::from_fn(g.len(), |j, _| rd_s[j] - dy[n_eq + j]);
        let ds = DVector::from_fn(g.len(), |j, _| g[j] + self.s[j] / self.zs[j] * dy[n_eq + j]);
        Some(Direction { dx, dy, dz, ds, dzs })
    }
}

/// Largest `α` with `M + α·dM ⪰ 0`, given the Cholesky factor of `M`.
fn psd_step(chol: &Cholesky<f64, Dyn>, dm: &RMatrix) -> f64 {
    let l = chol.l();
    let Some(w) = l.solve_lower_triangular(dm) else {
        return 0.0;
    };
    let Some(w) = l.solve_lower_triangular(&w.transpose()) else {
        return 0.0;
    };
    let w = (&w + w.transpose()).scale(0.5);
    let lowest = w.symmetric_eigenvalues().min();
    if lowest >= 0.0 {
        f64::INFINITY
    } else {
        -1.0 / lowest
    }
}

fn lp_step(v: &DVector<f64>, dv: &DVector<f64>) -> f64 {
    v.iter()
        .zip(dv.iter())
        .filter(|(_, &d)| d < 0.0)
        .map(|(&x, &d)| -x / d)
        .fold(f64::INFINITY, f64::min)
}

fn iterate(std: &Standard, options: &SolverOptions) -> Run {
    let n = std.n;
    let n_eq = std.n_eq;
    let n_ineq = std.n_ineq();
    let m = std.a.len();
    let nf = n as f64;
    let cones = (n + n_ineq) as f64;
    let tol = options.tol;

    let xi = std
        .b
        .iter()
        .map(|b| nf.sqrt() * (1.0 + b.abs()) / 2.0)
        .fold(10f64.max(nf.sqrt()), f64::max);
    let eta = 10f64.max(nf.sqrt());
    let mut x = RMatrix::identity(n, n).scale(xi);
    let mut z = RMatrix::identity(n, n).scale(eta);
    let mut y = DVector::zeros(m);
    let mut s = DVector::from_element(n_ineq, xi);
    let mut zs = DVector::from_element(n_ineq, eta);

    let b_norm = std.b.norm();
    let c_norm = std.c.norm();
    let mut history = Vec::new();
    let mut steps = (0.0, 0.0);
    let mut stalled = 0;

    let outcome = loop {
        let iteration = history.len();
        let mut rp = &std.b - std.apply(&x);
        for j in 0..n_ineq {
            rp[n_eq + j] -= s[j];
        }
        let rd = &std.c - std.adjoint(&y) - &z;
        let rd_s = DVector::from_fn(n_ineq, |j, _| -y[n_eq + j] - zs[j]);
        let pobj = std.c.dot(&x);
        let dobj = std.b.dot(&y);
        let complementarity = x.dot(&z) + s.dot(&zs);
        let mu = complementarity / cones;
        let pres = rp.norm() / (1.0 + b_norm);
        let dres = (rd.norm_squared() + rd_s.norm_squared()).sqrt() / (1.0 + c_norm);
        let gap = (pobj - dobj).abs().max(complementarity) / (1.0 + pobj.abs() + dobj.abs());
        let residual_term = rd.dot(&x) + rd_s.dot(&s) - y.dot(&rp);
        let record = IterateRecord {
            iteration,
            primal_objective: pobj,
            dual_objective: dobj,
            primal_residual: pres,
            dual_residual: dres,
            gap,
            mu,
            complementarity,
            residual_term,
            step_primal: steps.0,
            step_dual: steps.1,
        };
        history.push(record);

        if pres <= tol && dres <= tol && gap <= tol {
            break (SdpStatus::Optimal, format!("converged in {iteration} iterations"));
        }
        if dobj > 0.0 {
            let ray = ((&std.c - &rd).norm_squared() + rd_s.norm_squared()).sqrt() / dobj;
            if ray < tol {
                break (SdpStatus::Infeasible, format!("primal infeasibility certificate (ratio {ray:.2e})"));
            }
        }
        if pobj < 0.0 {
            let ray = (&std.b - &rp).norm() / -pobj;
            if ray < tol {
                break (
                    SdpStatus::NumericalTrouble,
                    format!("objective unbounded: dual infeasibility ray (ratio {ray:.2e})"),
                );
            }
        }
        if y.norm() > DIVERGENCE {
            break (SdpStatus::Infeasible, "dual iterates diverged".to_string());
        }
        if x.norm() > DIVERGENCE {
            break (SdpStatus::NumericalTrouble, "primal iterates diverged".to_string());
        }
        if iteration >= options.max_iters {
            break (
                SdpStatus::NumericalTrouble,
                format!("iteration limit {iteration} reached (pres {pres:.2e}, dres {dres:.2e}, gap {gap:.2e})"),
            );
        }
        if stalled >= 5 {
            break (
                SdpStatus::NumericalTrouble,
                format!("stalled (pres {pres:.2e}, dres {dres:.2e}, gap {gap:.2e})"),
            );
        }

        let Some(x_chol) = Cholesky::new(x.clone()) else {
            break (SdpStatus::NumericalTrouble, "primal iterate lost definiteness".to_string());
        };
        let Some(z_chol) = Cholesky::new(z.clone()) else {
            break (SdpStatus::NumericalTrouble, "dual iterate lost definiteness".to_string());
        };
        let zinv = z_chol.inverse();
        let xaz: Vec<RMatrix> = std.a.iter().map(|a| &x * a * &zinv).collect();
        let mut schur = DMatrix::from_fn(m, m, |i, j| std.a[i].dot(&xaz[j]));
        schur = (&schur + schur.transpose()).scale(0.5);
        for j in 0..n_ineq {
            schur[(n_eq + j, n_eq + j)] += s[j] / zs[j];
        }
        let Some(schur) = SchurFactor::new(schur) else {
            break (SdpStatus::NumericalTrouble, "singular Schur complement".to_string());
        };
        let ws = Workspace { std, x: &x, zinv, xaz, s: &s, zs: &zs, schur };

        let Some(pred) = ws.direction(&rp, &rd, &rd_s, 0.0, None) else {
            break (SdpStatus::NumericalTrouble, "Schur solve failed".to_string());
        };
        let ap = 1f64.min(psd_step(&x_chol, &pred.dx)).min(lp_step(&s, &pred.ds));
        let ad = 1f64.min(psd_step(&z_chol, &pred.dz)).min(lp_step(&zs, &pred.dzs));
        let x_aff = &x + pred.dx.scale(ap);
        let z_aff = &z + pred.dz.scale(ad);
        let mu_aff = (x_aff.dot(&z_aff) + (&s + pred.ds.scale(ap)).dot(&(&zs + pred.dzs.scale(ad)))) / cones;
        let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);

        let corr_mat = &pred.dx * &pred.dz;
        let corr_vec = pred.ds.component_mul(&pred.dzs);
        let Some(dir) = ws.direction(&rp, &rd, &rd_s, sigma * mu, Some((&corr_mat, &corr_vec))) else {
            break (SdpStatus::NumericalTrouble, "Schur solve failed".to_string());
        };
        let ap = 1f64.min(STEP_FRACTION * psd_step(&x_chol, &dir.dx).min(lp_step(&s, &dir.ds)));
        let ad = 1f64.min(STEP_FRACTION * psd_step(&z_chol, &dir.dz).min(lp_step(&zs, &dir.dzs)));
        x += dir.dx.scale(ap);
        x = (&x + x.transpose()).scale(0.5);
        s += dir.ds.scale(ap);
        y += dir.dy.scale(ad);
        z += dir.dz.scale(ad);
        z = (&z + z.transpose()).scale(0.5);
        zs += dir.dzs.scale(ad);
        steps = (ap, ad);
        stalled = if ap.max(ad) < 1e-8 { stalled + 1 } else { 0 };
    };

    let last = *history.last().expect("at least one iterate");
    Run { x, y, z, status: outcome.0, message: outcome.1, last, history }
}

fn finish(problem: &SdpProblem, std: &Standard, run: Run) -> SdpSolution {
    let mut y_eq = vec![0.0; problem.equalities.len()];
    let mut y_ineq = vec![0.0; problem.inequalities.len()];
    for (k, &(ineq, idx, norm)) in std.rows.iter().enumerate() {
        let v = run.y[k] * std.c_scale / norm;
        if ineq {
            y_ineq[idx] = -v;
        } else {
            y_eq[idx] = std.sign * v;
        }
    }
    let x = run.x;
    SdpSolution {
        objective_value: problem.evaluate(&x),
        dual_value: std.sign * std.c_scale * run.last.dual_objective + problem.offset,
        x,
        y_eq,
        y_ineq,
        z: run.z.scale(std.c_scale),
        primal_residual: run.last.primal_residual,
        dual_residual: run.last.dual_residual,
        duality_gap: run.last.gap,
        iterations: run.last.iteration,
        status: run.status,
        message: run.message,
        history: run.history,
    }
}
