//! Generator for the bundled synthetic characterization data.
//!
//! The measured set has 20 chips on a 21-point grid from 0 to 3000 pA. Chip
//! `c` fires at `a_c · f(I)` and spends `b_c · E(I)` per spike, where `f` is
//! the activation model and
//!
//! ```text
//! E(I) = V · (I_static / f + Q_dyn + κ · I / f)
//! ```
//!
//! has a single minimum at 1500 pA. The factors `a_c` are evenly spaced in
//! [0.95, 1.05] and `b_c` in [0.85, 1.15], each assigned to chips by a seeded
//! shuffle, so both have a mean of exactly one across chips.
//!
//! The leakage sweep is a single noiseless simulated chip with a 53 pA onset.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{activation, ActivationFit, MeasurementRecord};

pub const N_CHIPS: u32 = 20;
pub const GRID_PA: [f64; 21] = [
    0.0, 10.0, 25.0, 50.0, 75.0, 100.0, 150.0, 200.0, 300.0, 400.0, 500.0, 600.0, 800.0, 1000.0, 1250.0, 1500.0,
    1750.0, 2000.0, 2250.0, 2500.0, 3000.0,
];
pub const DEFAULT_SEED: u64 = 53;
pub const V_RMS: f64 = 0.25;

pub const FREQ_SPREAD: f64 = 0.05;
pub const ENERGY_SPREAD: f64 = 0.15;

/// Chip-average activation: 10 kHz at 10 pA, 350 kHz at 3000 pA.
pub const BASE_FIT: ActivationFit =
    ActivationFit { i_leak: 5e-12, q_eff: 4.865265e-16, t_ref_eff: 2.694697e-6, residual_rms: 0.0 };

/// Onset current of the simulated leakage sweep.
pub const LEAKAGE_ONSET: f64 = 53e-12;

pub const I_STATIC: f64 = 2.0822164981191452e-10;
pub const Q_DYN: f64 = 6.871382348008095e-15;
pub const KAPPA: f64 = 0.016827341552559136;

/// Chip-average energy per spike at a spiking current.
pub fn base_energy(i_syn: f64) -> f64 {
    let f = activation(i_syn, &BASE_FIT);
    V_RMS * (I_STATIC / f + Q_DYN + KAPPA * i_syn / f)
}

fn spread(n: u32, half_width: f64) -> Vec<f64> {
    (0..n).map(|k| 1.0 - half_width + 2.0 * half_width * k as f64 / (n - 1) as f64).collect()
}

/// Per-chip (frequency, energy) factors.
pub fn chip_factors(seed: u64) -> Vec<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut a = spread(N_CHIPS, FREQ_SPREAD);
    let mut b = spread(N_CHIPS, ENERGY_SPREAD);
    a.shuffle(&mut rng);
    b.shuffle(&mut rng);
    a.into_iter().zip(b).collect()
}

fn record(chip_id: u32, i_pa: f64, freq: f64, energy: Option<f64>) -> MeasurementRecord {
    let i_syn = i_pa * 1e-12;
    let i_rms = match energy {
        Some(e) if freq > 0.0 => e * freq / V_RMS,
        _ => I_STATIC,
    };
    MeasurementRecord { chip_id, i_syn, freq, v_rms: V_RMS, i_rms }
}

pub fn measured_dataset(seed: u64) -> Vec<MeasurementRecord> {
    let factors = chip_factors(seed);
    let mut out = Vec::with_capacity(N_CHIPS as usize * GRID_PA.len());
    for (chip, &(a, b)) in factors.iter().enumerate() {
        for &i_pa in &GRID_PA {
            let f = activation(i_pa * 1e-12, &BASE_FIT);
            let freq = a * f;
            let energy = (f > 0.0).then(|| b * base_energy(i_pa * 1e-12));
            out.push(record(chip as u32, i_pa, freq, energy));
        }
    }
    out
}

pub fn leakage_sweep() -> Vec<MeasurementRecord> {
    let fit = ActivationFit { i_leak: LEAKAGE_ONSET, ..BASE_FIT };
    (0..=20)
        .map(|k| {
            let i_pa = 10.0 * k as f64;
            let f = activation(i_pa * 1e-12, &fit);
            record(0, i_pa, f, (f > 0.0).then(|| base_energy(i_pa * 1e-12)))
        })
        .collect()
}
