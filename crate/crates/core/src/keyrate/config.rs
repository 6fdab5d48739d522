//! JSON configuration of parameter scans.
//!
//! ```json
//! {
//!   "delta": [0.0, 0.063],
//!   "depol": 0.01,
//!   "eta": 0.5,
//!   "p_dark": 1e-5,
//!   "distance": { "min": 0, "max": 150, "step": 10 },
//!   "priors": { "alice": [0.25, 0.25, 0.25, 0.25], "bob": [0.4, 0.1, 0.25, 0.25] },
//!   "f": 1.0
//! }
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::channel::{ChannelParams, DetectionStats};
use crate::error::{Error, Result};
use crate::states::{model_states, validate_priors, EnsembleDocument, ModelParams, SignalEnsemble, UNIFORM_PRIORS};

/// A scalar or a list of scalars.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Values {
    One(f64),
    Many(Vec<f64>),
}

impl Values {
    pub fn to_vec(&self) -> Vec<f64> {
        match self {
            Values::One(v) => vec![*v],
            Values::Many(v) => v.clone(),
        }
    }
}

impl Default for Values {
    fn default() -> Self {
        Values::One(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistanceRange {
    pub min: f64,
    pub max: f64,
    pub step: f64,
}

impl DistanceRange {
    pub fn single(distance_km: f64) -> Self {
        Self { min: distance_km, max: distance_km, step: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.min.is_finite() && self.max.is_finite() && self.min >= 0.0) {
            return Err(Error::Config(format!("distance range [{}, {}] is not finite and nonnegative", self.min, self.max)));
        }
        if self.max < self.min {
            return Err(Error::Config(format!("distance range is empty (max {} < min {})", self.max, self.min)));
        }
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::Config(format!("distance step {} must be positive", self.step)));
        }
        Ok(())
    }

    /// `min, min + step, …` up to `max`; each point is computed as `min + k·step`.
    pub fn points(&self) -> Vec<f64> {
        let count = ((self.max - self.min) / self.step + 1e-9).floor() as usize + 1;
        (0..count).map(|k| self.min + k as f64 * self.step).collect()
    }
}

/// One prior list for both parties, or one each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PriorsConfig {
    Shared([f64; 4]),
    Split { alice: [f64; 4], bob: [f64; 4] },
}

impl Default for PriorsConfig {
    fn default() -> Self {
        PriorsConfig::Shared(UNIFORM_PRIORS)
    }
}

impl PriorsConfig {
    pub fn alice(&self) -> [f64; 4] {
        match self {
            PriorsConfig::Shared(p) => *p,
            PriorsConfig::Split { alice, .. } => *alice,
        }
    }

    pub fn bob(&self) -> [f64; 4] {
        match self {
            PriorsConfig::Shared(p) => *p,
            PriorsConfig::Split { bob, .. } => *bob,
        }
    }
}

/// Explicit signal states replacing the `(δ, p)` model. Bob uses Alice's
/// states when his are omitted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StatesOverride {
    pub alice: EnsembleDocument,
    #[serde(default)]
    pub bob: Option<EnsembleDocument>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    #[serde(default)]
    pub delta: Values,
    #[serde(default)]
    pub depol: Values,
    pub eta: f64,
    pub p_dark: f64,
    #[serde(default = "default_atten")]
    pub atten_db_per_km: f64,
    #[serde(default = "default_divisor")]
    pub atten_divisor: f64,
    /// Required unless `stats_csv` is given.
    #[serde(default)]
    pub distance: Option<DistanceRange>,
    #[serde(default)]
    pub priors: PriorsConfig,
    #[serde(default = "default_f")]
    pub f: f64,
    #[serde(default)]
    pub states: Option<StatesOverride>,
    /// Measured statistics used in place of the channel simulation.
    #[serde(default)]
    pub stats_csv: Option<PathBuf>,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub format: OutputFormat,
}

fn default_atten() -> f64 {
    ChannelParams::DEFAULT_ATTEN_DB_PER_KM
}

fn default_divisor() -> f64 {
    ChannelParams::DEFAULT_ATTEN_DIVISOR
}

fn default_f() -> f64 {
    1.0
}

impl ScanConfig {
    /// A model grid over a channel with default attenuation.
    pub fn new(delta: Vec<f64>, depol: Vec<f64>, eta: f64, p_dark: f64, distance: DistanceRange) -> Self {
        Self {
            delta: Values::Many(delta),
            depol: Values::Many(depol),
            eta,
            p_dark,
            atten_db_per_km: default_atten(),
            atten_divisor: default_divisor(),
            distance: Some(distance),
            priors: PriorsConfig::default(),
            f: 1.0,
            states: None,
            stats_csv: None,
            output: None,
            format: OutputFormat::Csv,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Reads a config file; relative paths inside it are resolved against
    /// the file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut config = Self::from_json(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut config.stats_csv, &mut config.output].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        let (deltas, depols) = (self.delta.to_vec(), self.depol.to_vec());
        if self.states.is_none() {
            if deltas.is_empty() || depols.is_empty() {
                return bad("delta and depol lists must be nonempty".into());
            }
            for (d, p) in self.models() {
                ModelParams::new(d, p).map_err(|e| Error::Config(e.to_string()))?;
            }
        }
        match (&self.distance, &self.stats_csv) {
            (Some(range), _) => range.validate()?,
            (None, Some(_)) => {}
            (None, None) => return bad("missing distance range".into()),
        }
        self.channel(0.0).map_err(|e| Error::Config(e.to_string()))?;
        validate_priors(&self.priors.alice()).map_err(|e| Error::Config(format!("alice {e}")))?;
        validate_priors(&self.priors.bob()).map_err(|e| Error::Config(format!("bob {e}")))?;
        if !(self.f.is_finite() && self.f >= 0.0) {
            return bad(format!("error-correction efficiency {} must be nonnegative", self.f));
        }
        Ok(())
    }

    pub fn channel(&self, distance_km: f64) -> Result<ChannelParams> {
        let channel = ChannelParams {
            eta: self.eta,
            p_dark: self.p_dark,
            distance_km,
            atten_db_per_km: self.atten_db_per_km,
            atten_divisor: self.atten_divisor,
        };
        channel.validate()?;
        Ok(channel)
    }

    /// Distances of the sweep; a single point at `min` (or 0) for measured
    /// statistics.
    pub fn distances(&self) -> Vec<f64> {
        match (&self.distance, &self.stats_csv) {
            (Some(range), None) => range.points(),
            (Some(range), Some(_)) => vec![range.min],
            (None, _) => vec![0.0],
        }
    }

    /// `(δ, p)` pairs of the model grid in row-major order; a single `NaN`
    /// pair when explicit states are given.
    pub fn models(&self) -> Vec<(f64, f64)> {
        if self.states.is_some() {
            return vec![(f64::NAN, f64::NAN)];
        }
        let depols = self.depol.to_vec();
        self.delta.to_vec().into_iter().flat_map(|d| depols.iter().map(move |&p| (d, p))).collect()
    }

    /// Alice's and Bob's ensembles for a model grid point.
    pub fn ensembles(&self, delta: f64, depol: f64) -> Result<(SignalEnsemble, SignalEnsemble)> {
        if let Some(states) = &self.states {
            let alice = states.alice.clone().into_ensemble()?;
            let bob = match &states.bob {
                Some(doc) => doc.clone().into_ensemble()?,
                None => alice.clone(),
            };
            return Ok((alice, bob));
        }
        let params = ModelParams::new(delta, depol)?;
        Ok((model_states(params, self.priors.alice())?, model_states(params, self.priors.bob())?))
    }

    pub fn measured_stats(&self) -> Result<Option<DetectionStats>> {
        self.stats_csv.as_ref().map(DetectionStats::load_csv).transpose()
    }
}
