use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::Args;
use lifsim_core::calibration::synthetic::{leakage_sweep, measured_dataset, DEFAULT_SEED};
use lifsim_core::calibration::{
    average_curves, extract_leakage, fit_activation, ingest_measurements, summarize_energy, write_measurements,
    ActivationFit, EnergySummary, LeakageOnset, MeasurementRecord, PLATEAU_FROM,
};
use serde::Serialize;

use crate::output::{print_config, write_json};
use crate::units;

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    /// Measurement CSV: chip_id,i_syn_pA,freq_hz,v_rms_V,i_rms_A.
    measurements: PathBuf,

    /// Separate leakage sweep (same format) used for the onset estimate.
    #[arg(long)]
    leakage: Option<PathBuf>,

    /// Also write the chip-averaged f-I curve as CSV.
    #[arg(long)]
    emit_curve: Option<PathBuf>,

    /// Lowest current counted in the energy plateau.
    #[arg(long, default_value = "300pA", value_parser = units::current)]
    plateau_from: f64,

    /// Report JSON (stdout if absent).
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value = "data/bundled")]
    out_dir: PathBuf,

    /// Seed for the chip-to-chip spread.
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
}

#[derive(Serialize)]
struct Onset {
    source: &'static str,
    /// Null when spiking starts below the first sampled current.
    current_A: Option<f64>,
    first_spiking_A: Option<f64>,
}

#[derive(Serialize)]
struct Endpoints {
    low_current_A: f64,
    low_freq_hz: f64,
    high_current_A: f64,
    high_freq_hz: f64,
}

#[derive(Serialize)]
struct Report {
    fit: ActivationFit,
    records: usize,
    chips: usize,
    onset: Onset,
    endpoints: Endpoints,
    energy: Option<EnergySummary>,
}

fn read(path: &Path) -> anyhow::Result<Vec<MeasurementRecord>> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    ingest_measurements(BufReader::new(f)).with_context(|| format!("reading {}", path.display()))
}

pub fn run(a: CalibrateArgs, print: bool) -> anyhow::Result<()> {
    if print {
        #[derive(Serialize)]
        struct Resolved<'a> {
            measurements: &'a Path,
            leakage: Option<&'a Path>,
            emit_curve: Option<&'a Path>,
            plateau_from_A: f64,
        }
        return print_config(&Resolved {
            measurements: &a.measurements,
            leakage: a.leakage.as_deref(),
            emit_curve: a.emit_curve.as_deref(),
            plateau_from_A: a.plateau_from,
        });
    }
    let records = read(&a.measurements)?;
    let curve = average_curves(&records).with_context(|| format!("averaging {}", a.measurements.display()))?;
    let fit = fit_activation(&curve)?;
    if let Some(p) = &a.emit_curve {
        curve.write_csv(File::create(p).with_context(|| format!("creating {}", p.display()))?)?;
    }

    let (source, onset_curve) = match &a.leakage {
        Some(p) => ("leakage", average_curves(&read(p)?)?),
        None => ("measurements", curve.clone()),
    };
    let onset = match extract_leakage(&onset_curve) {
        Ok(LeakageOnset::Observed(i)) => Onset { source, current_A: Some(i), first_spiking_A: None },
        Ok(LeakageOnset::BelowRange { first_positive }) => {
            Onset { source, current_A: None, first_spiking_A: Some(first_positive) }
        }
        Err(e) => {
            eprintln!("warning: {e}");
            Onset { source, current_A: None, first_spiking_A: None }
        }
    };
    let spiking: Vec<&(f64, f64)> = curve.points.iter().filter(|p| p.1 > 0.0).collect();
    let (lo, hi) = match (spiking.first(), spiking.last()) {
        (Some(lo), Some(hi)) => (**lo, **hi),
        _ => anyhow::bail!("no spiking samples in {}", a.measurements.display()),
    };
    let energy = match summarize_energy(&records, a.plateau_from) {
        Ok(s) => Some(s),
        Err(e) => {
            eprintln!("warning: no energy summary: {e}");
            None
        }
    };
    let chips = records.iter().map(|r| r.chip_id).collect::<std::collections::BTreeSet<_>>().len();
    let report = Report {
        fit,
        records: records.len(),
        chips,
        onset,
        endpoints: Endpoints { low_current_A: lo.0, low_freq_hz: lo.1, high_current_A: hi.0, high_freq_hz: hi.1 },
        energy,
    };
    write_json(&a.out, &report)
}

pub const MEASUREMENTS_FILE: &str = "measurements.csv";
pub const LEAKAGE_FILE: &str = "leakage_sweep.csv";

pub fn synth(a: SynthArgs, print: bool) -> anyhow::Result<()> {
    if print {
        return print_config(
            &serde_json::json!({ "out_dir": a.out_dir, "seed": a.seed, "plateau_from_A": PLATEAU_FROM }),
        );
    }
    std::fs::create_dir_all(&a.out_dir).with_context(|| format!("creating {}", a.out_dir.display()))?;
    for (name, records) in [(MEASUREMENTS_FILE, measured_dataset(a.seed)), (LEAKAGE_FILE, leakage_sweep())] {
        let path = a.out_dir.join(name);
        write_measurements(File::create(&path).with_context(|| format!("creating {}", path.display()))?, &records)?;
        eprintln!("wrote {} ({} records)", path.display(), records.len());
    }
    Ok(())
}
