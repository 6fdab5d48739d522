//! Parameter scans over a `(δ, p, distance)` grid.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use super::config::ScanConfig;
use super::{keyrate_from_stats, keyrate_point, KeyRateOptions, KeyRateResult};
use crate::error::{Error, Result};
use crate::sdp::SolverOptions;

pub const CSV_HEADER: [&str; 11] = [
    "delta",
    "depol",
    "distance_km",
    "p_det00",
    "e_Z",
    "e_minus",
    "e_plus",
    "rate_naive",
    "rate_twisted",
    "pct_gain",
    "status",
];

/// One grid point and its outcome.
#[derive(Debug, Serialize)]
pub struct ScanRow {
    pub delta: f64,
    pub depol: f64,
    pub distance_km: f64,
    #[serde(serialize_with = "serialize_outcome")]
    pub outcome: std::result::Result<KeyRateResult, Error>,
}

impl ScanRow {
    /// `"ok"` or the error's code.
    pub fn status(&self) -> &'static str {
        match &self.outcome {
            Ok(_) => "ok",
            Err(e) => e.code(),
        }
    }

    pub fn result(&self) -> Option<&KeyRateResult> {
        self.outcome.as_ref().ok()
    }
}

fn serialize_outcome<S: serde::Serializer>(
    outcome: &std::result::Result<KeyRateResult, Error>,
    serializer: S,
) -> std::result::Result<S::Ok, S::Error> {
    #[derive(Serialize)]
    #[serde(tag = "status", rename_all = "lowercase")]
    enum Outcome<'a> {
        Ok(&'a KeyRateResult),
        Error { code: &'a str, message: String },
    }
    match outcome {
        Ok(r) => Outcome::Ok(r).serialize(serializer),
        Err(e) => Outcome::Error { code: e.code(), message: e.to_string() }.serialize(serializer),
    }
}

/// Evaluates every grid point, in parallel, returning rows in grid order
/// (δ outermost, then p, then distance). Errors at a point are recorded in
/// its row; only configuration errors abort the scan.
pub fn scan(config: &ScanConfig, solver: &SolverOptions) -> Result<Vec<ScanRow>> {
    config.validate()?;
    let measured = config.measured_stats()?;
    let options = KeyRateOptions { f: config.f, solver: *solver };
    let distances = config.distances();
    let points: Vec<(f64, f64, f64)> = config
        .models()
        .into_iter()
        .flat_map(|(d, p)| distances.iter().map(move |&l| (d, p, l)))
        .collect();
    let rows = points
        .into_par_iter()
        .map(|(delta, depol, distance_km)| {
            let outcome = config.ensembles(delta, depol).and_then(|(alice, bob)| match &measured {
                Some(stats) => keyrate_from_stats(&alice, &bob, stats, &options),
                None => keyrate_point(&alice, &bob, &config.channel(distance_km)?, &options),
            });
            ScanRow { delta, depol, distance_km, outcome }
        })
        .collect();
    Ok(rows)
}

/// Twelve significant digits in scientific notation.
pub fn format_float(x: f64) -> String {
    format!("{x:.11e}")
}

pub fn write_csv(rows: &[ScanRow], writer: impl Write) -> Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    out.write_record(CSV_HEADER)?;
    for row in rows {
        let mut record: Vec<String> = [row.delta, row.depol, row.distance_km].map(format_float).to_vec();
        match &row.outcome {
            Ok(r) => record.extend(
                [r.p_det00, r.e_z, r.e_minus, r.e_plus, r.rate_naive, r.rate_twisted, r.pct_gain].map(format_float),
            ),
            Err(_) => record.extend(std::iter::repeat_n(String::new(), 7)),
        }
        record.push(row.status().to_string());
        out.write_record(&record)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_json(rows: &[ScanRow], writer: impl Write) -> Result<()> {
    serde_json::to_writer_pretty(writer, rows)?;
    Ok(())
}
