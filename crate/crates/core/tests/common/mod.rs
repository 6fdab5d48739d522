//! Random instances shared by the integration and acceptance tests.
#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use twistkey::qmath::{c, CMatrix, CVector, RMatrix, C64, ONE};
use twistkey::sdp::{SdpProblem, Sense};
use twistkey::states::{QubitState, SignalEnsemble};

/// Density matrix with Bloch vector `r`.
pub fn rho_from_bloch(r: [f64; 3]) -> CMatrix {
    let [x, y, z] = r;
    CMatrix::from_row_slice(2, 2, &[c(0.5 * (1.0 + z), 0.0), c(0.5 * x, -0.5 * y), c(0.5 * x, 0.5 * y), c(0.5 * (1.0 - z), 0.0)])
}

pub fn unit_vector(rng: &mut ChaCha8Rng) -> [f64; 3] {
    loop {
        let v: [f64; 3] = [0; 3].map(|_| StandardNormal.sample(rng));
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if n > 1e-6 {
            return v.map(|x| x / n);
        }
    }
}

/// Uniform point of the Bloch ball.
pub fn bloch_in_ball(rng: &mut ChaCha8Rng) -> [f64; 3] {
    let r = rng.random::<f64>().cbrt();
    unit_vector(rng).map(|x| r * x)
}

pub fn random_priors(rng: &mut ChaCha8Rng) -> [f64; 4] {
    let raw: [f64; 4] = [0; 4].map(|_| rng.random_range(0.05..1.0));
    let total: f64 = raw.iter().sum();
    raw.map(|p| p / total)
}

pub fn random_state(rng: &mut ChaCha8Rng) -> QubitState {
    QubitState::new(rho_from_bloch(bloch_in_ball(rng)), rng.random_range(0.01..1.0)).unwrap()
}

pub fn ensemble_from_bloch(points: [[f64; 3]; 4], priors: [f64; 4]) -> SignalEnsemble {
    SignalEnsemble::from_parts(points.map(rho_from_bloch), priors).unwrap()
}

pub fn random_ensemble(rng: &mut ChaCha8Rng) -> SignalEnsemble {
    let points = [0; 4].map(|_| bloch_in_ball(rng));
    ensemble_from_bloch(points, random_priors(rng))
}

/// Four Bloch vectors in a common plane that cuts the ball.
pub fn coplanar_ensemble(rng: &mut ChaCha8Rng) -> SignalEnsemble {
    let normal = unit_vector(rng);
    let offset: f64 = rng.random_range(-0.8..0.8);
    let radius = (1.0 - offset * offset).sqrt();
    // orthonormal basis of the plane
    let helper = if normal[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let cross = |a: [f64; 3], b: [f64; 3]| [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]];
    let u = cross(normal, helper);
    let un = (u[0] * u[0] + u[1] * u[1] + u[2] * u[2]).sqrt();
    let u = u.map(|x| x / un);
    let v = cross(normal, u);
    let points = [0; 4].map(|_| {
        let rho = radius * rng.random::<f64>().sqrt();
        let phi = rng.random_range(0.0..std::f64::consts::TAU);
        let (a, b) = (rho * phi.cos(), rho * phi.sin());
        [0, 1, 2].map(|k| offset * normal[k] + a * u[k] + b * v[k])
    });
    ensemble_from_bloch(points, random_priors(rng))
}

/// Haar-random 4×4 unitary.
pub fn haar(rng: &mut ChaCha8Rng) -> CMatrix {
    let g = CMatrix::from_fn(4, 4, |_, _| c(StandardNormal.sample(rng), StandardNormal.sample(rng)));
    let qr = g.qr();
    let (q, r) = (qr.q(), qr.r());
    let phases = CMatrix::from_diagonal(&CVector::from_fn(4, |i, _| {
        let d: C64 = r[(i, i)];
        if d.norm() > 0.0 {
            d / d.norm()
        } else {
            ONE
        }
    }));
    q * phases
}

pub fn random_sym(rng: &mut ChaCha8Rng, n: usize) -> RMatrix {
    let m = RMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    (&m + m.transpose()).scale(0.5)
}

/// An SDP whose optimum is planted through complementary slackness: a
/// rank-`rank` primal optimum `X*` and a dual slack `Z*` with `X* Z* = 0`,
/// both strictly complementary. Returns the problem and its optimal value.
///
/// The first constraint fixes the trace, which makes the dual strictly
/// feasible. The others are orthogonal to `X* − X₀` for a positive definite
/// `X₀` of the same trace, which keeps `X₀` primal feasible. `m` is capped at
/// `n(n+1)/2 − 1`.
pub fn planted(rng: &mut ChaCha8Rng, n: usize, m: usize, rank: usize, sense: Sense) -> (SdpProblem, f64) {
    let m = m.clamp(1, n * (n + 1) / 2 - 1);
    let q = RMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0)).qr().q();
    let lam = RMatrix::from_fn(n, n, |i, j| if i == j && i < rank { rng.random_range(0.5..2.0) } else { 0.0 });
    let mu = RMatrix::from_fn(n, n, |i, j| if i == j && i >= rank { rng.random_range(0.5..2.0) } else { 0.0 });
    let xs = &q * lam * q.transpose();
    let zs = &q * mu * q.transpose();
    let interior = RMatrix::identity(n, n).scale(xs.trace() / n as f64);
    let d = &xs - &interior;
    let dd = d.norm_squared();
    let mut a = vec![RMatrix::identity(n, n).scale(1.0 / (n as f64).sqrt())];
    while a.len() < m {
        let g = random_sym(rng, n);
        let g = if dd > 0.0 { &g - d.scale(g.dot(&d) / dd) } else { g };
        a.push(g);
    }
    let mut cost = zs;
    for ai in &a {
        cost += ai * rng.random_range(-1.0..1.0);
    }
    let opt = cost.dot(&xs);
    let (cost, opt) = match sense {
        Sense::Min => (cost, opt),
        Sense::Max => (-cost, -opt),
    };
    let mut p = SdpProblem::new(cost, sense);
    for ai in a {
        let b = ai.dot(&xs);
        p.add_equality(ai, b);
    }
    (p, opt)
}
