//! Honest measurement node: Bell projection onto `|Φ⁺⟩`, fiber loss,
//! detector efficiency and dark counts.
//!
//! Index maps used throughout the crate:
//! - detection outcome `t = 4·a + b` with `a = 2i + x` (Alice), `b = 2j + y` (Bob);
//! - γ̂ column `s = 8m + 4m' + 2n + n'`, which is the position of
//!   `ρ[m,m']·σ[n,n']` in `vec(ρ) ⊗ vec(σ)`.

use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qmath::{c, condition_number, vec_rowmajor, CMatrix, CVector, ZERO};
use crate::states::SignalEnsemble;

/// Number of `(i, j, x, y)` detection outcomes.
pub const N_OUTCOMES: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    /// Overall detection efficiency η in (0, 1].
    pub eta: f64,
    /// Dark-count probability per detector per pulse, in [0, 1).
    pub p_dark: f64,
    /// Alice–Charlie distance in km (symmetric for Bob).
    pub distance_km: f64,
    #[serde(default = "default_atten")]
    pub atten_db_per_km: f64,
    /// Divisor in the transmittance exponent `10^(−atten·l/divisor)`.
    #[serde(default = "default_divisor")]
    pub atten_divisor: f64,
}

fn default_atten() -> f64 {
    ChannelParams::DEFAULT_ATTEN_DB_PER_KM
}

fn default_divisor() -> f64 {
    ChannelParams::DEFAULT_ATTEN_DIVISOR
}

impl ChannelParams {
    pub const DEFAULT_ATTEN_DB_PER_KM: f64 = 0.2;
    pub const DEFAULT_ATTEN_DIVISOR: f64 = 20.0;

    /// Parameters with the default fiber attenuation and divisor.
    pub fn new(eta: f64, p_dark: f64, distance_km: f64) -> Result<Self> {
        let params = Self {
            eta,
            p_dark,
            distance_km,
            atten_db_per_km: Self::DEFAULT_ATTEN_DB_PER_KM,
            atten_divisor: Self::DEFAULT_ATTEN_DIVISOR,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn lossless() -> Self {
        Self {
            eta: 1.0,
            p_dark: 0.0,
            distance_km: 0.0,
            atten_db_per_km: Self::DEFAULT_ATTEN_DB_PER_KM,
            atten_divisor: Self::DEFAULT_ATTEN_DIVISOR,
        }
    }

    pub fn at_distance(mut self, distance_km: f64) -> Self {
        self.distance_km = distance_km;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str, v: f64| Err(Error::InvalidParams(format!("{what} = {v} out of range")));
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return bad("eta", self.eta);
        }
        if !(0.0..1.0).contains(&self.p_dark) {
            return bad("p_dark", self.p_dark);
        }
        if !(self.distance_km >= 0.0 && self.distance_km.is_finite()) {
            return bad("distance_km", self.distance_km);
        }
        if !self.atten_db_per_km.is_finite() {
            return bad("atten_db_per_km", self.atten_db_per_km);
        }
        if !(self.atten_divisor.is_finite() && self.atten_divisor != 0.0) {
            return bad("atten_divisor", self.atten_divisor);
        }
        Ok(())
    }
}

/// `⟨Φ⁺|`-projection probability `Tr[(ρ⊗σ)|Φ⁺⟩⟨Φ⁺|]`.
pub fn bell_pass_prob(rho: &CMatrix, sigma: &CMatrix) -> f64 {
    // ⟨Φ⁺|ρ⊗σ|Φ⁺⟩ = ½ Σ_{m,n} ρ[m,n]·σ[m,n]
    let mut acc = ZERO;
    for m in 0..2 {
        for n in 0..2 {
            acc += rho[(m, n)] * sigma[(m, n)];
        }
    }
    0.5 * acc.re
}

/// Probability that a photon is lost: `1 − η·10^(−atten·l/divisor)`.
pub fn photon_loss(params: &ChannelParams) -> f64 {
    1.0 - params.eta * 10f64.powf(-params.atten_db_per_km * params.distance_km / params.atten_divisor)
}

/// Coefficients `(a, b)` such that the honest node produces
/// `p_det = p·q·Tr[(ρ⊗σ)(a·|Φ⁺⟩⟨Φ⁺| + b·𝟙)]`.
pub fn honest_coefficients(params: &ChannelParams) -> (f64, f64) {
    let p0 = photon_loss(params);
    let pd = params.p_dark;
    let keep = (1.0 - pd) * (1.0 - pd);
    let a = (1.0 - p0) * (1.0 - p0) * keep;
    let b = 2.0 * (p0 * p0 * pd * pd * keep + p0 * (1.0 - p0) * pd * keep);
    (a, b)
}

/// Eve's Gram matrix for the honest node, in the layout of
/// [`EveGram::e_matrix`](crate::evegram::EveGram).
pub fn honest_e_matrix(params: &ChannelParams) -> CMatrix {
    let (a, b) = honest_coefficients(params);
    let mut e = CMatrix::identity(4, 4).scale(b);
    for r in [0, 3] {
        for k in [0, 3] {
            e[(r, k)] += c(0.5 * a, 0.0);
        }
    }
    e
}

/// Sixteen detection probabilities, indexed by `t = 4(2i+x) + (2j+y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionStats {
    p_det: [f64; N_OUTCOMES],
}

impl DetectionStats {
    /// Slack allowed on the `[0, 1]` bounds and the total.
    pub const TOL: f64 = 1e-12;

    pub fn new(p_det: [f64; N_OUTCOMES]) -> Result<Self> {
        if let Some(&v) = p_det
            .iter()
            .find(|v| !v.is_finite() || **v < -Self::TOL || **v > 1.0 + Self::TOL)
        {
            return Err(Error::InvalidParams(format!("detection probability {v} outside [0, 1]")));
        }
        let total: f64 = p_det.iter().sum();
        if total > 1.0 + Self::TOL {
            return Err(Error::InvalidParams(format!("detection probabilities sum to {total} > 1")));
        }
        Ok(Self { p_det })
    }

    pub fn as_array(&self) -> &[f64; N_OUTCOMES] {
        &self.p_det
    }

    pub fn get(&self, i: usize, j: usize, x: usize, y: usize) -> f64 {
        self.p_det[outcome_index(i, j, x, y)]
    }

    pub fn to_vector(&self) -> CVector {
        CVector::from_iterator(N_OUTCOMES, self.p_det.iter().map(|&p| c(p, 0.0)))
    }

    /// Reads 16 rows `i,j,x,y,p_det`; a header line is optional.
    pub fn from_csv_reader(reader: impl Read) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(reader);
        let mut values = [f64::NAN; N_OUTCOMES];
        let mut seen = [false; N_OUTCOMES];
        for (line, record) in rdr.records().enumerate() {
            let record = record?;
            if line == 0 && record.get(0).is_some_and(|f| f.parse::<usize>().is_err()) {
                continue;
            }
            if record.len() != 5 {
                return Err(Error::Config(format!(
                    "stats row {} has {} fields, expected i,j,x,y,p_det",
                    line + 1,
                    record.len()
                )));
            }
            let mut bits = [0usize; 4];
            for (slot, field) in bits.iter_mut().zip(record.iter()) {
                *slot = match field.parse::<usize>() {
                    Ok(b @ 0..=1) => b,
                    _ => return Err(Error::Config(format!("bad index {field:?} in stats row {}", line + 1))),
                };
            }
            let p: f64 = record[4]
                .parse()
                .map_err(|_| Error::Config(format!("bad probability {:?} in stats row {}", &record[4], line + 1)))?;
            let t = outcome_index(bits[0], bits[1], bits[2], bits[3]);
            if seen[t] {
                return Err(Error::Config(format!("duplicate stats row for outcome {bits:?}")));
            }
            seen[t] = true;
            values[t] = p;
        }
        if let Some(t) = seen.iter().position(|s| !s) {
            let (i, j, x, y) = outcome_bits(t);
            return Err(Error::Config(format!("missing stats row i={i} j={j} x={x} y={y}")));
        }
        Self::new(values)
    }

    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_csv_reader(std::fs::File::open(path)?)
    }

    pub fn write_csv(&self, writer: impl std::io::Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["i", "j", "x", "y", "p_det"])?;
        for (t, p) in self.p_det.iter().enumerate() {
            let (i, j, x, y) = outcome_bits(t);
            w.write_record([i.to_string(), j.to_string(), x.to_string(), y.to_string(), format!("{p:.17e}")])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[inline]
pub fn outcome_index(i: usize, j: usize, x: usize, y: usize) -> usize {
    4 * (2 * i + x) + (2 * j + y)
}

/// Inverse of [`outcome_index`], returning `(i, j, x, y)`.
#[inline]
pub fn outcome_bits(t: usize) -> (usize, usize, usize, usize) {
    let (a, b) = (t / 4, t % 4);
    (a / 2, b / 2, a % 2, b % 2)
}

/// Simulated statistics of the honest node.
pub fn detection_stats(alice: &SignalEnsemble, bob: &SignalEnsemble, params: &ChannelParams) -> DetectionStats {
    let (a, b) = honest_coefficients(params);
    let mut p_det = [0.0; N_OUTCOMES];
    for (ia, sa) in alice.states().iter().enumerate() {
        for (ib, sb) in bob.states().iter().enumerate() {
            let weight = sa.prob() * sb.prob();
            let pass = weight * bell_pass_prob(sa.rho(), sb.rho());
            p_det[4 * ia + ib] = (a * pass + b * weight).clamp(0.0, 1.0);
        }
    }
    DetectionStats { p_det }
}

/// The linear map from Eve's Gram entries to detection probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaMatrix {
    gamma: CMatrix,
    condition: f64,
}

impl GammaMatrix {
    pub fn matrix(&self) -> &CMatrix {
        &self.gamma
    }

    pub fn condition(&self) -> f64 {
        self.condition
    }
}

/// Row `t` is `vec(p·ρ_a)ᵀ ⊗ vec(q·σ_b)ᵀ`.
pub fn build_gamma(alice: &SignalEnsemble, bob: &SignalEnsemble) -> GammaMatrix {
    let mut gamma = CMatrix::zeros(N_OUTCOMES, N_OUTCOMES);
    for (ia, sa) in alice.states().iter().enumerate() {
        let va = vec_rowmajor(&sa.weighted());
        for (ib, sb) in bob.states().iter().enumerate() {
            let row = va.kronecker(&vec_rowmajor(&sb.weighted()));
            gamma.row_mut(4 * ia + ib).tr_copy_from(&row);
        }
    }
    let condition = condition_number(&gamma);
    GammaMatrix { gamma, condition }
}

/// `vec(𝟙) ⊗ vec(𝟙)`, whose product with γ̂ gives the prior products.
pub fn identity_probe() -> CVector {
    let id = vec_rowmajor(&CMatrix::identity(2, 2));
    id.kronecker(&id)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qmath::{kron, projector, rank};
    use crate::states::{model_states, ModelParams, QubitState, UNIFORM_PRIORS};
    use proptest::prelude::*;

    fn ket(a: f64, b: f64) -> CMatrix {
        projector(&CVector::from_vec(vec![c(a, 0.0), c(b, 0.0)]))
    }

    fn ideal() -> SignalEnsemble {
        model_states(ModelParams::new(0.0, 0.0).unwrap(), UNIFORM_PRIORS).unwrap()
    }

    #[test]
    fn bell_pass_examples() {
        assert!((bell_pass_prob(&ket(1.0, 0.0), &ket(1.0, 0.0)) - 0.5).abs() < 1e-15);
        assert_eq!(bell_pass_prob(&ket(1.0, 0.0), &ket(0.0, 1.0)), 0.0);
        let mixed = CMatrix::identity(2, 2).scale(0.5);
        assert!((bell_pass_prob(&mixed, &mixed) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn bell_pass_matches_trace_formula() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let phi = CVector::from_vec(vec![c(s, 0.0), ZERO, ZERO, c(s, 0.0)]);
        let e = ideal();
        for a in e.states() {
            for b in e.states() {
                let direct = (kron(a.rho(), b.rho()) * projector(&phi)).trace().re;
                assert!((bell_pass_prob(a.rho(), b.rho()) - direct).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn photon_loss_examples() {
        assert_eq!(photon_loss(&ChannelParams::new(0.5, 0.0, 0.0).unwrap()), 0.5);
        assert_eq!(photon_loss(&ChannelParams::new(1.0, 0.0, 0.0).unwrap()), 0.0);
        assert!((photon_loss(&ChannelParams::new(0.5, 0.0, 100.0).unwrap()) - 0.95).abs() < 1e-15);
    }

    #[test]
    fn channel_param_validation() {
        assert!(ChannelParams::new(0.0, 0.0, 0.0).is_err());
        assert!(ChannelParams::new(1.1, 0.0, 0.0).is_err());
        assert!(ChannelParams::new(1.0, 1.0, 0.0).is_err());
        assert!(ChannelParams::new(1.0, 0.0, -1.0).is_err());
    }

    #[test]
    fn lossless_stats_equal_pass_probabilities() {
        let e = ideal();
        let stats = detection_stats(&e, &e, &ChannelParams::lossless());
        for (t, p) in stats.as_array().iter().enumerate() {
            let (a, b) = (t / 4, t % 4);
            let (sa, sb) = (&e.states()[a], &e.states()[b]);
            assert!((p - sa.prob() * sb.prob() * bell_pass_prob(sa.rho(), sb.rho())).abs() < 1e-16);
        }
        let key: Vec<f64> = (0..2).flat_map(|x| (0..2).map(move |y| (x, y))).map(|(x, y)| stats.get(0, 0, x, y)).collect();
        assert_eq!(key, vec![1.0 / 32.0, 0.0, 0.0, 1.0 / 32.0]);
    }

    #[test]
    fn dark_count_only_example() {
        let params = ChannelParams { p_dark: 1e-5, ..ChannelParams::lossless() };
        let params = ChannelParams { eta: 0.5, ..params };
        let e = ideal();
        let stats = detection_stats(&e, &e, &params);
        let p = stats.get(0, 0, 0, 1);
        let pd: f64 = 1e-5;
        let expected = 2.0 / 16.0 * (0.25 * pd * pd + 0.25 * pd) * (1.0 - pd).powi(2);
        assert!((p - expected).abs() < 1e-20);
        assert!((p - 3.1249e-7).abs() < 1e-11);
    }

    #[test]
    fn gamma_rows_and_probe() {
        let e = model_states(ModelParams::new(0.1, 0.05).unwrap(), [0.4, 0.3, 0.2, 0.1]).unwrap();
        let g = build_gamma(&e, &e);
        let out = g.matrix() * identity_probe();
        for t in 0..N_OUTCOMES {
            let (a, b) = (t / 4, t % 4);
            let want = e.states()[a].prob() * e.states()[b].prob();
            assert!((out[t] - c(want, 0.0)).norm() < 1e-15);
        }
        // entry (t, s) is p·ρ[m,m']·q·σ[n,n']
        let (t, m, mp, n, np) = (4 * 2 + 3, 1, 0, 0, 1);
        let s = 8 * m + 4 * mp + 2 * n + np;
        let want = e.states()[2].weighted()[(m, mp)] * e.states()[3].weighted()[(n, np)];
        assert!((g.matrix()[(t, s)] - want).norm() < 1e-16);
    }

    #[test]
    fn gamma_invertibility() {
        let g = build_gamma(&ideal(), &ideal());
        assert!(g.condition().is_finite() && g.condition() < 1e3);
        assert_eq!(rank(g.matrix(), 1e-12), 16);

        let s = std::f64::consts::FRAC_1_SQRT_2;
        let coplanar = SignalEnsemble::from_parts(
            [ket(1.0, 0.0), ket(0.0, 1.0), ket(s, s), ket(s, -s)],
            UNIFORM_PRIORS,
        )
        .unwrap();
        let g = build_gamma(&coplanar, &ideal());
        assert!(rank(g.matrix(), 1e-12) < 16);
    }

    #[test]
    fn stats_csv_roundtrip() {
        let e = model_states(ModelParams::new(0.05, 0.02).unwrap(), UNIFORM_PRIORS).unwrap();
        let stats = detection_stats(&e, &e, &ChannelParams::new(0.8, 1e-6, 30.0).unwrap());
        let mut buf = Vec::new();
        stats.write_csv(&mut buf).unwrap();
        let back = DetectionStats::from_csv_reader(buf.as_slice()).unwrap();
        assert_eq!(back, stats);

        let headerless: String = (0..16)
            .map(|t| {
                let (i, j, x, y) = outcome_bits(t);
                format!("{i},{j},{x},{y},0.01\n")
            })
            .collect();
        assert!(DetectionStats::from_csv_reader(headerless.as_bytes()).is_ok());
        let short: String = headerless.lines().take(15).map(|l| format!("{l}\n")).collect();
        assert!(matches!(DetectionStats::from_csv_reader(short.as_bytes()), Err(Error::Config(_))));
    }

    #[test]
    fn stats_validation() {
        let mut p = [0.0; 16];
        p[0] = 1.5;
        assert!(DetectionStats::new(p).is_err());
        assert!(DetectionStats::new([0.1; 16]).is_err());
        assert!(DetectionStats::new([0.05; 16]).is_ok());
    }

    fn rotate_phase(e: &SignalEnsemble, phi: f64) -> SignalEnsemble {
        // a global phase on eigenvectors leaves ρ unchanged; rebuild it from
        // phased eigenvectors to exercise that path
        let parts = e.states().clone().map(|s| {
            let eig = crate::qmath::eig2_hermitian(s.rho()).unwrap();
            let phase = crate::qmath::C64::from_polar(1.0, phi);
            let mut rho = CMatrix::zeros(2, 2);
            for k in 0..2 {
                rho += projector(&eig.vectors[k].map(|z| z * phase)).scale(eig.values[k]);
            }
            QubitState::new(crate::qmath::hermitian_part(&rho), s.prob()).unwrap()
        });
        SignalEnsemble::new(parts).unwrap()
    }

    proptest! {
        #[test]
        fn stats_phase_invariant(delta in -0.5f64..0.5, depol in 0.0f64..0.3, phi in 0.0f64..6.3, l in 0.0f64..100.0) {
            let e = model_states(ModelParams::new(delta, depol).unwrap(), UNIFORM_PRIORS).unwrap();
            let params = ChannelParams::new(0.9, 1e-6, l).unwrap();
            let s1 = detection_stats(&e, &e, &params);
            let s2 = detection_stats(&rotate_phase(&e, phi), &e, &params);
            for (a, b) in s1.as_array().iter().zip(s2.as_array()) {
                prop_assert!((a - b).abs() < 1e-15);
            }
        }

        #[test]
        fn gamma_times_honest_e_is_stats(delta in -0.5f64..0.5, depol in 0.0f64..0.5, l in 0.0f64..200.0, pd in 0.0f64..1e-3) {
            let e = model_states(ModelParams::new(delta, depol).unwrap(), UNIFORM_PRIORS).unwrap();
            let params = ChannelParams::new(0.7, pd, l).unwrap();
            let em = honest_e_matrix(&params);
            let e_vec = CVector::from_fn(16, |s, _| {
                let (m, mp, n, np) = (s / 8, (s / 4) % 2, (s / 2) % 2, s % 2);
                em[(2 * m + n, 2 * mp + np)]
            });
            let predicted = build_gamma(&e, &e).matrix() * e_vec;
            let stats = detection_stats(&e, &e, &params);
            for t in 0..16 {
                prop_assert!((predicted[t].re - stats.as_array()[t]).abs() < 1e-15);
                prop_assert!(predicted[t].im.abs() < 1e-15);
            }
        }
    }
}
