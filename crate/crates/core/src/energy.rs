//! Spike-count energy accounting: energy = total spikes x energy per spike.
//!
//! Spikes are counted as integers first and multiplied once, so the
//! identity `energy_per_inference == total_spikes * e_spike` holds exactly.
//! The input layer is counted.

use serde::{Deserialize, Serialize};

use crate::dataio::Dataset;
use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::network::{encode_input, forward, ForwardMode, ForwardTrace, SnnNetwork};

/// Plateau energy per spike.
pub const E_SPIKE_DEFAULT: f64 = 2e-15;
/// Lowest measured energy per spike.
pub const E_SPIKE_MIN: f64 = 1.61e-15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    /// Per layer; a mean over samples for dataset reports.
    pub spikes_per_layer: Vec<f64>,
    pub total_spikes: f64,
    #[serde(rename = "e_spike_J")]
    pub e_spike: f64,
    #[serde(rename = "energy_per_inference_J")]
    pub energy_per_inference: f64,
}

/// Spikes per layer, summed over time and neurons.
pub fn count_spikes(trace: &ForwardTrace) -> Vec<u64> {
    trace.spikes.iter().map(|layer| layer.iter().filter(|&&s| s != 0.0).count() as u64).collect()
}

pub fn inference_energy(counts: &[u64], e_spike: f64) -> Result<EnergyReport> {
    check_e_spike(e_spike)?;
    let total: u64 = counts.iter().sum();
    Ok(EnergyReport {
        spikes_per_layer: counts.iter().map(|&c| c as f64).collect(),
        total_spikes: total as f64,
        e_spike,
        energy_per_inference: total as f64 * e_spike,
    })
}

fn check_e_spike(e_spike: f64) -> Result<()> {
    if !(e_spike > 0.0 && e_spike.is_finite()) {
        return Err(Error::Invalid(format!("energy per spike must be positive, got {e_spike}")));
    }
    Ok(())
}

/// Spike counts of one sample's spiking forward pass.
pub fn sample_counts(net: &SnnNetwork, image: &[f32]) -> Result<Vec<u64>> {
    let input = encode_input(image, net.i_max)?;
    Ok(count_spikes(&forward(net, &input, ForwardMode::Spiking)?))
}

/// Mean report over a dataset. Counts are summed as integers across samples
/// before the division, so the mean does not depend on sample order.
pub fn dataset_energy(exec: Execution, net: &SnnNetwork, data: &Dataset, e_spike: f64) -> Result<EnergyReport> {
    check_e_spike(e_spike)?;
    if data.is_empty() {
        return Err(Error::Empty("dataset is empty".into()));
    }
    let per_sample = exec::map_range(exec, data.len(), |k| sample_counts(net, data.image(k)));
    let mut sums = vec![0u64; net.sizes().len()];
    for counts in per_sample {
        for (s, c) in sums.iter_mut().zip(counts?) {
            *s += c;
        }
    }
    let n = data.len() as f64;
    let total: u64 = sums.iter().sum();
    let mean_total = total as f64 / n;
    Ok(EnergyReport {
        spikes_per_layer: sums.iter().map(|&s| s as f64 / n).collect(),
        total_spikes: mean_total,
        e_spike,
        energy_per_inference: mean_total * e_spike,
    })
}
