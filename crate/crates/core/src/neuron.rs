//! Leaky integrate-and-fire neuron.
//!
//! [`lif_step`] is one forward-Euler update with a refractory guard: while
//! `t - t_last_spike < t_ref` the membrane is frozen. Threshold comparison is
//! `>=`. Spikes are binary; `v_spike` only matters when drawing traces.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::calibration::{activation, ActivationFit, FiCurve};
use crate::error::{Error, Result};
use crate::exec::{self, Execution};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LifParams {
    pub v_reset: f64,
    pub v_th: f64,
    pub v_spike: f64,
    pub tau_m: f64,
    pub r_m: f64,
    pub dt: f64,
    pub t_ref: f64,
}

/// Membrane capacitance of the 28 nm neuron.
pub const C_MEM_28NM: f64 = 3.47e-15;

impl LifParams {
    /// Physical defaults: 10 mV rest, 60 mV threshold, R_m and t_ref chosen
    /// so the f-I curve runs from 10 kHz at 10 pA to 350 kHz at 3000 pA.
    pub fn calibrated_28nm() -> Self {
        let r_m = 5.019e9;
        Self { v_reset: 0.010, v_th: 0.060, v_spike: 0.250, tau_m: r_m * C_MEM_28NM, r_m, dt: 1e-9, t_ref: 2.8e-6 }
    }

    /// Dimensionless units used for network training.
    pub fn normalized() -> Self {
        Self { v_reset: 0.0, v_th: 1.0, v_spike: 1.0, tau_m: 5.0, r_m: 1.0, dt: 1.0, t_ref: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.v_th > self.v_reset) {
            return Err(Error::Invalid(format!("v_th ({}) must exceed v_reset ({})", self.v_th, self.v_reset)));
        }
        for (name, v) in [("dt", self.dt), ("tau_m", self.tau_m), ("r_m", self.r_m)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.t_ref >= 0.0) {
            return Err(Error::Invalid(format!("t_ref must be >= 0, got {}", self.t_ref)));
        }
        Ok(())
    }

    /// Smallest constant current that eventually reaches threshold.
    pub fn rheobase(&self) -> f64 {
        (self.v_th - self.v_reset) / self.r_m
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeuronState {
    pub v_mem: f64,
    pub t_last_spike: f64,
}

impl NeuronState {
    pub fn at_rest(params: &LifParams) -> Self {
        Self { v_mem: params.v_reset, t_last_spike: f64::NEG_INFINITY }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpikeTrain {
    pub dt: f64,
    pub spikes: Vec<bool>,
}

impl SpikeTrain {
    pub fn count(&self) -> usize {
        self.spikes.iter().filter(|&&s| s).count()
    }

    pub fn spike_steps(&self) -> Vec<usize> {
        self.spikes.iter().enumerate().filter_map(|(i, &s)| s.then_some(i)).collect()
    }

    /// Inter-spike intervals in seconds.
    pub fn isis(&self) -> Vec<f64> {
        self.spike_steps().windows(2).map(|w| (w[1] - w[0]) as f64 * self.dt).collect()
    }
}

pub fn lif_step(state: NeuronState, params: &LifParams, i_syn: f64, t: f64) -> (NeuronState, bool) {
    if t - state.t_last_spike < params.t_ref {
        return (state, false);
    }
    let drive = -(state.v_mem - params.v_reset) + params.r_m * i_syn;
    let v = state.v_mem + params.dt * drive / params.tau_m;
    if v >= params.v_th {
        (NeuronState { v_mem: params.v_reset, t_last_spike: t }, true)
    } else {
        (NeuronState { v_mem: v, t_last_spike: state.t_last_spike }, false)
    }
}

/// Runs `n_steps` from rest. Step `k` happens at `t = k·dt`.
pub fn lif_run(params: &LifParams, current: &[f64], n_steps: usize) -> Result<(Vec<f64>, SpikeTrain)> {
    params.validate()?;
    if current.len() < n_steps {
        return Err(Error::Shape(format!("{} current samples for {n_steps} steps", current.len())));
    }
    let mut state = NeuronState::at_rest(params);
    let mut trace = Vec::with_capacity(n_steps);
    let mut spikes = Vec::with_capacity(n_steps);
    for (k, &i) in current[..n_steps].iter().enumerate() {
        let (next, spiked) = lif_step(state, params, i, k as f64 * params.dt);
        state = next;
        trace.push(state.v_mem);
        spikes.push(spiked);
    }
    Ok((trace, SpikeTrain { dt: params.dt, spikes }))
}

/// Spike count of a constant-current run, without keeping the trace.
fn constant_current_spikes(params: &LifParams, i_syn: f64, n_steps: usize) -> Vec<usize> {
    let mut state = NeuronState::at_rest(params);
    let mut out = Vec::new();
    for k in 0..n_steps {
        let (next, spiked) = lif_step(state, params, i_syn, k as f64 * params.dt);
        state = next;
        if spiked {
            out.push(k);
        }
    }
    out
}

/// Continuous-time firing rate under constant current.
pub fn analytic_firing_frequency(params: &LifParams, i_syn: f64) -> f64 {
    let drive = params.r_m * i_syn;
    let gap = params.v_th - params.v_reset;
    if drive <= gap {
        return 0.0;
    }
    1.0 / (params.t_ref + params.tau_m * (drive / (drive - gap)).ln())
}

#[derive(Debug, Clone, PartialEq)]
pub struct FiSample {
    pub i_syn: f64,
    pub freq: f64,
    pub spikes: usize,
    /// Supra-rheobase but fewer than two spikes inside the horizon.
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FiSweep {
    pub samples: Vec<FiSample>,
}

impl FiSweep {
    pub fn flagged(&self) -> impl Iterator<Item = &FiSample> {
        self.samples.iter().filter(|s| s.flagged)
    }

    pub fn curve(&self) -> Result<FiCurve> {
        FiCurve::new(self.samples.iter().map(|s| (s.i_syn, s.freq)).collect())
    }
}

/// Simulated f-I curve. The rate is measured between the first and last
/// spike so the start-up transient from rest does not bias it.
pub fn fi_sweep(params: &LifParams, currents: &[f64], sim_horizon: f64) -> Result<FiSweep> {
    fi_sweep_with(Execution::default(), params, currents, sim_horizon)
}

pub fn fi_sweep_with(exec: Execution, params: &LifParams, currents: &[f64], sim_horizon: f64) -> Result<FiSweep> {
    params.validate()?;
    if !(sim_horizon > 0.0) {
        return Err(Error::Invalid(format!("horizon must be positive, got {sim_horizon}")));
    }
    let n_steps = (sim_horizon / params.dt).round() as usize;
    let rheobase_drive = params.v_th - params.v_reset;
    let samples = exec::map(exec, currents, |&i_syn| {
        let steps = constant_current_spikes(params, i_syn, n_steps);
        let freq = match (steps.first(), steps.last()) {
            (Some(&a), Some(&b)) if b > a => (steps.len() - 1) as f64 / ((b - a) as f64 * params.dt),
            _ => steps.len() as f64 / sim_horizon,
        };
        FiSample { i_syn, freq, spikes: steps.len(), flagged: steps.len() < 2 && params.r_m * i_syn > rheobase_drive }
    });
    Ok(FiSweep { samples })
}

/// Spike train of a neuron driven through the fitted activation: one spike
/// every `1/activation(i_syn)` seconds, binned at `dt`.
pub fn calibrated_lif_run(fit: &ActivationFit, i_syn: f64, horizon: f64, dt: f64) -> Result<SpikeTrain> {
    if !(dt > 0.0 && horizon >= 0.0) {
        return Err(Error::Invalid(format!("need dt > 0 and horizon >= 0 (dt = {dt}, horizon = {horizon})")));
    }
    let n_steps = (horizon / dt).round() as usize;
    let mut spikes = vec![false; n_steps];
    let f = activation(i_syn, fit);
    if f <= 0.0 {
        return Ok(SpikeTrain { dt, spikes });
    }
    let period = 1.0 / f;
    if period < dt {
        return Err(Error::Invalid(format!("period {period:e} s is shorter than dt {dt:e} s")));
    }
    let count = (horizon * f * (1.0 + 1e-12)).floor() as usize;
    for k in 1..=count {
        let step = ((k as f64 * period / dt).round() as usize).clamp(1, n_steps) - 1;
        spikes[step] = true;
    }
    Ok(SpikeTrain { dt, spikes })
}

/// Writes `t_s,v_mem_V,spike`. Spiking steps show `v_spike` in the voltage
/// column when `draw_spikes` is set.
pub fn write_trace_csv<W: Write>(
    out: W,
    params: &LifParams,
    v_trace: &[f64],
    train: &SpikeTrain,
    draw_spikes: bool,
) -> Result<()> {
    if v_trace.len() != train.spikes.len() {
        return Err(Error::Shape(format!("{} voltages vs {} spike flags", v_trace.len(), train.spikes.len())));
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t_s", "v_mem_V", "spike"]).map_err(Error::from)?;
    for (k, (&v, &s)) in v_trace.iter().zip(&train.spikes).enumerate() {
        let shown = if s && draw_spikes { params.v_spike } else { v };
        w.write_record([format!("{:e}", k as f64 * train.dt), format!("{shown:e}"), (s as u8).to_string()])
            .map_err(Error::from)?;
    }
    w.flush()?;
    Ok(())
}
