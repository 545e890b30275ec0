//! Rate evaluation through the fitted device activation.
//!
//! Each neuron's output is `activation(i_ref · Σ W·r_in, fit) / f_max`, with
//! pixel values as input-layer rates. No time stepping is involved.

use super::train::argmax;
use super::SnnNetwork;
use crate::calibration::{activation, ActivationFit};
use crate::dataio::Dataset;
use crate::error::{Error, Result};
use crate::exec::{self, Execution};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatePath {
    pub fit: ActivationFit,
    /// Physical current for a unit weight times a unit rate (A).
    pub i_ref: f64,
    /// Rate normalization (Hz).
    pub f_max: f64,
}

impl RatePath {
    /// Normalizes by the fit's saturation rate.
    pub fn new(fit: ActivationFit, i_ref: f64) -> Result<Self> {
        fit.validate()?;
        if !(fit.t_ref_eff > 0.0) {
            return Err(Error::Invalid("rate path needs t_ref_eff > 0 to normalize".into()));
        }
        Ok(Self { fit, i_ref, f_max: fit.f_max() })
    }
}

pub fn forward_rate(net: &SnnNetwork, image: &[f32], path: &RatePath) -> Result<Vec<f64>> {
    let sizes = net.sizes();
    if image.len() != sizes[0] {
        return Err(Error::Shape(format!("{} inputs for {} input neurons", image.len(), sizes[0])));
    }
    let mut r: Vec<f64> = image.iter().map(|&p| p as f64).collect();
    for l in 0..sizes.len() - 1 {
        let n = sizes[l + 1];
        let mut drive = vec![0.0; n];
        for (i, &ri) in r.iter().enumerate() {
            if ri == 0.0 {
                continue;
            }
            for (d, &w) in drive.iter_mut().zip(&net.wt[l][i * n..(i + 1) * n]) {
                *d += w * ri;
            }
        }
        r = drive.iter().map(|&d| activation(path.i_ref * d, &path.fit) / path.f_max).collect();
    }
    Ok(r)
}

pub fn evaluate_rate(exec: Execution, net: &SnnNetwork, data: &Dataset, path: &RatePath) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::Empty("evaluation set is empty".into()));
    }
    let hits = exec::map_range(exec, data.len(), |k| {
        forward_rate(net, data.image(k), path).map(|r| (argmax(&r) == data.labels[k] as usize) as usize)
    });
    let mut correct = 0;
    for h in hits {
        correct += h?;
    }
    Ok(correct as f64 / data.len() as f64)
}
