//! Measurement ingestion, chip averaging, activation fitting, leakage onset
//! and energy per spike.
//!
//! The activation model is
//!
//! ```text
//! f(I) = 0                                   I <= i_leak
//! f(I) = 1 / (t_ref_eff + q_eff / (I - i_leak))   otherwise
//! ```
//!
//! which is the LIF charging law with an effective refractory time.

mod fit;
pub mod synthetic;

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use fit::{fit_activation, fit_activation_with, FitOptions};

pub const CSV_HEADER: [&str; 5] = ["chip_id", "i_syn_pA", "freq_hz", "v_rms_V", "i_rms_A"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasurementRecord {
    pub chip_id: u32,
    /// Amperes.
    pub i_syn: f64,
    pub freq: f64,
    pub v_rms: f64,
    pub i_rms: f64,
}

/// Frequency-vs-current samples, strictly increasing in current.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiCurve {
    pub points: Vec<(f64, f64)>,
}

impl FiCurve {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        for w in points.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(Error::Invalid(format!(
                    "currents must be strictly increasing ({:e} A then {:e} A)",
                    w[0].0, w[1].0
                )));
            }
        }
        if let Some(p) = points.iter().find(|p| !(p.0.is_finite() && p.1.is_finite() && p.1 >= 0.0)) {
            return Err(Error::Invalid(format!("bad sample ({:e} A, {:e} Hz)", p.0, p.1)));
        }
        Ok(Self { points })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Writes `i_syn_A,freq_hz`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["i_syn_A", "freq_hz"]).map_err(Error::from)?;
        for &(i, f) in &self.points {
            w.write_record([format!("{i:e}"), format!("{f:e}")]).map_err(Error::from)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActivationFit {
    #[serde(rename = "i_leak_A")]
    pub i_leak: f64,
    #[serde(rename = "q_eff_C")]
    pub q_eff: f64,
    #[serde(rename = "t_ref_eff_s")]
    pub t_ref_eff: f64,
    #[serde(rename = "residual_rms_hz")]
    pub residual_rms: f64,
}

impl ActivationFit {
    pub fn validate(&self) -> Result<()> {
        if !(self.q_eff > 0.0 && self.t_ref_eff >= 0.0 && self.i_leak >= 0.0) {
            return Err(Error::Invalid(format!(
                "fit needs q_eff > 0, t_ref_eff >= 0, i_leak >= 0 (got {:e}, {:e}, {:e})",
                self.q_eff, self.t_ref_eff, self.i_leak
            )));
        }
        Ok(())
    }

    /// Saturation rate 1/t_ref_eff (infinite for t_ref_eff = 0).
    pub fn f_max(&self) -> f64 {
        1.0 / self.t_ref_eff
    }
}

pub fn activation(i_syn: f64, fit: &ActivationFit) -> f64 {
    let d = i_syn - fit.i_leak;
    if d <= 0.0 {
        return 0.0;
    }
    1.0 / (fit.t_ref_eff + fit.q_eff / d)
}

/// Reads the measurement CSV. The header must match [`CSV_HEADER`] exactly.
pub fn ingest_measurements<R: Read>(source: R) -> Result<Vec<MeasurementRecord>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_reader(source);
    let mut rows = reader.records();
    let header = match rows.next() {
        None => return Ok(Vec::new()),
        Some(h) => h.map_err(|e| Error::parse("line 1", e.to_string()))?,
    };
    if header.iter().ne(CSV_HEADER.iter().copied()) {
        return Err(Error::parse(
            "line 1",
            format!("header must be `{}`, got `{}`", CSV_HEADER.join(","), header.iter().collect::<Vec<_>>().join(",")),
        ));
    }
    let mut out = Vec::new();
    for row in rows {
        let row = row.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            Error::parse(format!("line {line}"), e.to_string())
        })?;
        let line = row.position().map_or(0, |p| p.line());
        let loc = format!("line {line}");
        if row.len() != CSV_HEADER.len() {
            return Err(Error::parse(&loc, format!("expected 5 fields, got {}", row.len())));
        }
        let num = |idx: usize| -> Result<f64> {
            let raw = &row[idx];
            raw.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::parse(&loc, format!("{}: `{raw}` is not a finite number", CSV_HEADER[idx])))
        };
        let chip_id = row[0]
            .parse::<u32>()
            .map_err(|_| Error::parse(&loc, format!("chip_id: `{}` is not a non-negative integer", &row[0])))?;
        let rec = MeasurementRecord { chip_id, i_syn: num(1)? * 1e-12, freq: num(2)?, v_rms: num(3)?, i_rms: num(4)? };
        if rec.freq < 0.0 {
            return Err(Error::parse(&loc, format!("negative frequency {}", rec.freq)));
        }
        if rec.i_syn < 0.0 {
            return Err(Error::parse(&loc, format!("negative current {} pA", &row[1])));
        }
        out.push(rec);
    }
    Ok(out)
}

/// Writes records in the ingest format. Currents are printed in pA,
/// rounded to 1e-6 pA.
pub fn write_measurements<W: Write>(out: W, records: &[MeasurementRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER).map_err(Error::from)?;
    for r in records {
        w.write_record([
            r.chip_id.to_string(),
            format!("{}", (r.i_syn * 1e18).round() / 1e6),
            format!("{}", r.freq),
            format!("{}", r.v_rms),
            format!("{:e}", r.i_rms),
        ])
        .map_err(Error::from)?;
    }
    w.flush()?;
    Ok(())
}

/// Per-current mean frequency across chips.
///
/// Every chip must be sampled on the same current grid. The per-current sum
/// runs over values in sorted order so the result does not depend on record
/// or chip order.
pub fn average_curves(records: &[MeasurementRecord]) -> Result<FiCurve> {
    if records.is_empty() {
        return Err(Error::Empty("no measurement records".into()));
    }
    let mut chips: BTreeMap<u32, Vec<(f64, f64)>> = BTreeMap::new();
    for r in records {
        chips.entry(r.chip_id).or_default().push((r.i_syn, r.freq));
    }
    for pts in chips.values_mut() {
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    }
    let (&ref_id, reference) = chips.iter().next().expect("non-empty");
    let grid: Vec<f64> = reference.iter().map(|p| p.0).collect();
    if grid.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::Alignment(format!("chip {ref_id} has duplicate currents")));
    }
    for (&id, pts) in &chips {
        if pts.len() != grid.len() || pts.iter().zip(&grid).any(|(p, &g)| p.0 != g) {
            return Err(Error::Alignment(format!("chip {id} is not sampled on the current grid of chip {ref_id}")));
        }
    }
    let n = chips.len() as f64;
    let points = grid
        .iter()
        .enumerate()
        .map(|(k, &i)| {
            let mut fs: Vec<f64> = chips.values().map(|pts| pts[k].1).collect();
            fs.sort_by(f64::total_cmp);
            (i, fs.iter().sum::<f64>() / n)
        })
        .collect();
    FiCurve::new(points)
}

/// Where spiking starts on an f-I curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LeakageOnset {
    /// Interpolated between the last silent and first spiking samples.
    Observed(f64),
    /// Even the smallest sampled current spikes; the onset lies below it.
    BelowRange { first_positive: f64 },
}

/// Onset current of spiking.
///
/// The line through the first two spiking samples is extrapolated to zero
/// frequency and clamped to the bracket formed by the largest silent current
/// and the first spiking current.
pub fn extract_leakage(curve: &FiCurve) -> Result<LeakageOnset> {
    let pts = &curve.points;
    let first_pos =
        pts.iter().position(|p| p.1 > 0.0).ok_or_else(|| Error::Fit("no spiking sample: onset not observed".into()))?;
    if first_pos == 0 {
        return Ok(LeakageOnset::BelowRange { first_positive: pts[0].0 });
    }
    let last_zero = pts[first_pos - 1].0;
    let (i1, f1) = pts[first_pos];
    let onset = match pts.get(first_pos + 1) {
        Some(&(i2, f2)) if f2 > f1 => i1 - f1 * (i2 - i1) / (f2 - f1),
        _ => last_zero,
    };
    Ok(LeakageOnset::Observed(onset.clamp(last_zero, i1)))
}

/// E = V_rms·I_rms / f.
pub fn energy_per_spike(record: &MeasurementRecord) -> Result<f64> {
    if !(record.freq > 0.0) {
        return Err(Error::Domain(format!(
            "energy per spike undefined at {} Hz (chip {}, {:e} A)",
            record.freq, record.chip_id, record.i_syn
        )));
    }
    Ok(record.v_rms * record.i_rms / record.freq)
}

/// Plateau boundary: 10% of the 3000 pA full scale.
pub const PLATEAU_FROM: f64 = 300e-12;

/// Energy-per-spike statistics over all spiking records.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergySummary {
    #[serde(rename = "min_J")]
    pub min: f64,
    #[serde(rename = "min_at_A")]
    pub min_at: f64,
    #[serde(rename = "min_chip")]
    pub min_chip: u32,
    #[serde(rename = "plateau_mean_J")]
    pub plateau_mean: f64,
    pub plateau_records: usize,
}

/// Minimum over every record with `freq > 0`, and the mean over those at or
/// above `plateau_from`.
pub fn summarize_energy(records: &[MeasurementRecord], plateau_from: f64) -> Result<EnergySummary> {
    let mut best: Option<(f64, &MeasurementRecord)> = None;
    let mut plateau = Vec::new();
    for r in records.iter().filter(|r| r.freq > 0.0) {
        let e = energy_per_spike(r)?;
        if best.is_none_or(|(b, _)| e < b) {
            best = Some((e, r));
        }
        if r.i_syn >= plateau_from {
            plateau.push(e);
        }
    }
    let (min, at) = best.ok_or_else(|| Error::Empty("no spiking records".into()))?;
    if plateau.is_empty() {
        return Err(Error::Empty(format!("no spiking records at or above {plateau_from:e} A")));
    }
    plateau.sort_by(f64::total_cmp);
    Ok(EnergySummary {
        min,
        min_at: at.i_syn,
        min_chip: at.chip_id,
        plateau_mean: plateau.iter().sum::<f64>() / plateau.len() as f64,
        plateau_records: plateau.len(),
    })
}
