use std::path::PathBuf;

use anyhow::Context;
use clap::Args;
use lifsim_core::calibration::{activation, ActivationFit, FiCurve};
use lifsim_core::exec::Execution;
use lifsim_core::neuron::{calibrated_lif_run, fi_sweep_with, lif_run, write_trace_csv, LifParams};
use serde::Serialize;

use crate::output::{print_config, writer};
use crate::units::{self, Sweep};
use crate::usage;

#[derive(Debug, Args)]
pub struct NeuronArgs {
    /// Constant input current for a single trace.
    #[arg(long, value_parser = units::current, conflicts_with = "fi", required_unless_present = "fi")]
    current: Option<f64>,

    /// Current sweep for an f-I curve.
    #[arg(long, value_parser = units::current_range)]
    fi: Option<Sweep>,

    /// Simulated time per run (default 100us for a trace, 1ms per f-I point).
    #[arg(long, value_parser = units::time)]
    duration: Option<f64>,

    #[arg(long, value_parser = units::time)]
    dt: Option<f64>,

    #[arg(long, value_parser = units::voltage)]
    v_th: Option<f64>,

    #[arg(long, value_parser = units::voltage)]
    v_reset: Option<f64>,

    #[arg(long, value_parser = units::time)]
    t_ref: Option<f64>,

    /// Fitted activation JSON; drives the neuron through the fit instead of
    /// the LIF equations.
    #[arg(long)]
    fit: Option<PathBuf>,

    /// Show spiking steps at the spike voltage in the trace.
    #[arg(long)]
    draw_spikes: bool,

    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct Resolved<'a> {
    lif: &'a LifParams,
    fit: Option<&'a ActivationFit>,
    current_A: Option<f64>,
    fi_A: Option<&'a [f64]>,
    duration_s: f64,
    draw_spikes: bool,
}

pub fn load_fit(path: &PathBuf) -> anyhow::Result<ActivationFit> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let v: serde_json::Value = serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    // Accept a bare fit or a calibration report holding one under `fit`.
    let inner = v.get("fit").cloned().unwrap_or(v);
    let fit: ActivationFit = serde_json::from_value(inner).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    fit.validate().map_err(|e| usage(format!("{}: {e}", path.display())))?;
    Ok(fit)
}

pub fn run(a: NeuronArgs, print: bool) -> anyhow::Result<()> {
    let mut p = LifParams::calibrated_28nm();
    if let Some(v) = a.v_th {
        p.v_th = v;
    }
    if let Some(v) = a.v_reset {
        p.v_reset = v;
    }
    if let Some(t) = a.t_ref {
        p.t_ref = t;
    }
    if let Some(dt) = a.dt {
        p.dt = dt;
    }
    p.validate().map_err(|e| usage(e.to_string()))?;
    let duration = a.duration.unwrap_or(if a.fi.is_some() { 1e-3 } else { 1e-4 });
    if !(duration > 0.0) {
        return Err(usage("--duration must be positive"));
    }
    let fit = a.fit.as_ref().map(load_fit).transpose()?;
    if print {
        return print_config(&Resolved {
            lif: &p,
            fit: fit.as_ref(),
            current_A: a.current,
            fi_A: a.fi.as_ref().map(|s| s.0.as_slice()),
            duration_s: duration,
            draw_spikes: a.draw_spikes,
        });
    }

    let out = writer(&a.out)?;
    if let Some(Sweep(currents)) = &a.fi {
        let curve = match &fit {
            Some(fit) => FiCurve::new(currents.iter().map(|&i| (i, activation(i, fit))).collect())?,
            None => {
                let sweep = fi_sweep_with(Execution::Parallel, &p, currents, duration)?;
                for s in sweep.flagged() {
                    eprintln!(
                        "warning: {:e} A is above rheobase but spiked {} time(s) in {:e} s",
                        s.i_syn, s.spikes, duration
                    );
                }
                sweep.curve()?
            }
        };
        curve.write_csv(out)?;
        return Ok(());
    }

    let i = a.current.expect("clap requires --current or --fi");
    let n = (duration / p.dt).round() as usize;
    match &fit {
        Some(fit) => {
            let train = calibrated_lif_run(fit, i, duration, p.dt)?;
            // The fitted model has no membrane state; show rest between spikes.
            let v = vec![p.v_reset; train.spikes.len()];
            write_trace_csv(out, &p, &v, &train, true)?;
        }
        None => {
            let (v, train) = lif_run(&p, &vec![i; n], n)?;
            write_trace_csv(out, &p, &v, &train, a.draw_spikes)?;
        }
    }
    Ok(())
}
