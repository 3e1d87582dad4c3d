//! Design-asset route-length profiling.
//!
//! Ingests per-asset route-length inventories (one length per bus bit),
//! reports distribution statistics, and predicts which bits would leave a
//! detectable imprint after a given burn duration.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::bti::{Environment, Model};
use crate::error::{Error, Result};
use crate::sensor::SensorConfig;

/// Kind of secret an asset holds: clock/control (CK), state vector (SVT),
/// or secret key material (S).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AssetType {
    CK,
    SVT,
    S,
}

impl AssetType {
    pub fn parse(s: &str) -> Result<AssetType> {
        match s {
            "CK" => Ok(AssetType::CK),
            "SVT" => Ok(AssetType::SVT),
            "S" => Ok(AssetType::S),
            other => Err(Error::Data(format!("unknown asset type {other:?}"))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            AssetType::CK => "CK",
            AssetType::SVT => "SVT",
            AssetType::S => "S",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssetRecord {
    pub path: String,
    pub asset_type: AssetType,
    /// One route length per bus bit; zero means the bit never leaves a LUT.
    pub route_lengths_ps: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssetStats {
    pub bus_width: usize,
    pub mean: f64,
    pub sd: f64,
    pub min: f64,
    pub p25: f64,
    pub p50: f64,
    pub p75: f64,
    pub max: f64,
}

/// Linear-interpolated percentile of a sorted sample, q in [0, 1].
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = q * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

pub fn compute_stats(record: &AssetRecord) -> Result<AssetStats> {
    let lengths = &record.route_lengths_ps;
    if lengths.is_empty() {
        return Err(Error::Data(format!(
            "asset {:?} has no route lengths",
            record.path
        )));
    }
    if lengths.iter().any(|l| !l.is_finite() || *l < 0.0) {
        return Err(Error::Data(format!(
            "asset {:?} has a negative or non-finite route length",
            record.path
        )));
    }
    let n = lengths.len();
    let mean = lengths.iter().sum::<f64>() / n as f64;
    let var = lengths.iter().map(|l| (l - mean) * (l - mean)).sum::<f64>()
        / (n as f64 - 1.0).max(1.0);
    let mut sorted = lengths.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(AssetStats {
        bus_width: n,
        mean,
        sd: var.sqrt(),
        min: sorted[0],
        p25: percentile(&sorted, 0.25),
        p50: percentile(&sorted, 0.50),
        p75: percentile(&sorted, 0.75),
        max: sorted[n - 1],
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VulnerabilityReport {
    pub path: String,
    /// Predicted |delta ps| per bit after the burn.
    pub per_bit_delta_ps: Vec<f64>,
    /// Sensor resolving threshold used (ps).
    pub threshold_ps: f64,
    /// Fraction of bits whose imprint exceeds the threshold.
    pub detectable_fraction: f64,
}

/// Resolving threshold of the measurement pipeline: twice the
/// post-averaging noise of a delta measurement under the environment's
/// jitter level.
pub fn detectability_threshold_ps(env: &Environment) -> f64 {
    2.0 * SensorConfig::default().delta_noise_ps(env.noise_sigma_ps)
}

pub fn vulnerability(
    record: &AssetRecord,
    burn_hours: f64,
    env: &Environment,
) -> Result<VulnerabilityReport> {
    if burn_hours < 0.0 {
        return Err(Error::Contract(format!(
            "burn_hours must be nonnegative, got {burn_hours}"
        )));
    }
    env.validate()?;
    if record.route_lengths_ps.is_empty() {
        return Err(Error::Data(format!(
            "asset {:?} has no route lengths",
            record.path
        )));
    }
    let model = Model::default();
    let threshold = detectability_threshold_ps(env);
    let per_bit: Vec<f64> = record
        .route_lengths_ps
        .iter()
        .map(|&l| model.predicted_delta_ps(l, burn_hours, env))
        .collect();
    let detectable = per_bit.iter().filter(|d| **d > threshold).count();
    Ok(VulnerabilityReport {
        path: record.path.clone(),
        detectable_fraction: detectable as f64 / per_bit.len() as f64,
        per_bit_delta_ps: per_bit,
        threshold_ps: threshold,
    })
}

/// Input schema: one row per bus bit.
pub const ASSET_CSV_HEADER: &str = "asset_path,asset_type,length_ps";

pub fn read_asset_csv(text: &str) -> Result<Vec<AssetRecord>> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Data("empty asset CSV".into()))?;
    if header.trim() != ASSET_CSV_HEADER {
        return Err(Error::Data(format!(
            "asset CSV header must be {ASSET_CSV_HEADER:?}, got {header:?}"
        )));
    }
    // Keyed by path; insertion order preserved for output stability.
    let mut order: Vec<String> = Vec::new();
    let mut by_path: BTreeMap<String, AssetRecord> = BTreeMap::new();
    for (lineno, line) in lines.enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(Error::Data(format!(
                "asset CSV line {}: expected 3 fields, got {}",
                lineno + 2,
                fields.len()
            )));
        }
        let asset_type = AssetType::parse(fields[1])?;
        let length: f64 = fields[2].parse().map_err(|_| {
            Error::Data(format!("asset CSV line {}: bad length_ps", lineno + 2))
        })?;
        if !length.is_finite() || length < 0.0 {
            return Err(Error::Data(format!(
                "asset CSV line {}: length_ps must be nonnegative",
                lineno + 2
            )));
        }
        let path = fields[0].to_string();
        match by_path.get_mut(&path) {
            Some(rec) => {
                if rec.asset_type != asset_type {
                    return Err(Error::Data(format!(
                        "asset CSV line {}: conflicting type for {path:?}",
                        lineno + 2
                    )));
                }
                rec.route_lengths_ps.push(length);
            }
            None => {
                order.push(path.clone());
                by_path.insert(
                    path.clone(),
                    AssetRecord {
                        path,
                        asset_type,
                        route_lengths_ps: vec![length],
                    },
                );
            }
        }
    }
    if order.is_empty() {
        return Err(Error::Data("asset CSV contains no data rows".into()));
    }
    Ok(order
        .into_iter()
        .map(|p| by_path.remove(&p).unwrap())
        .collect())
}

pub fn write_stats_csv<W: std::io::Write>(
    out: &mut W,
    rows: &[(AssetRecord, AssetStats)],
) -> Result<()> {
    writeln!(out, "asset_path,asset_type,bus_width,mean,sd,min,p25,p50,p75,max")?;
    for (rec, s) in rows {
        writeln!(
            out,
            "{},{},{},{:.2},{:.2},{:.2},{:.2},{:.2},{:.2},{:.2}",
            rec.path,
            rec.asset_type.as_str(),
            s.bus_width,
            s.mean,
            s.sd,
            s.min,
            s.p25,
            s.p50,
            s.p75,
            s.max
        )?;
    }
    Ok(())
}

pub fn write_vulnerability_csv<W: std::io::Write>(
    out: &mut W,
    rows: &[VulnerabilityReport],
) -> Result<()> {
    writeln!(
        out,
        "asset_path,bus_width,threshold_ps,detectable_fraction,mean_delta_ps"
    )?;
    for r in rows {
        let mean_delta =
            r.per_bit_delta_ps.iter().sum::<f64>() / r.per_bit_delta_ps.len() as f64;
        writeln!(
            out,
            "{},{},{:.4},{:.4},{:.4}",
            r.path,
            r.per_bit_delta_ps.len(),
            r.threshold_ps,
            r.detectable_fraction,
            mean_delta
        )?;
    }
    Ok(())
}
