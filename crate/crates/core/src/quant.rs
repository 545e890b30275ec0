//! Symmetric per-tensor 4-bit weight quantization.
//!
//! `scale = max|w| / 7`, `code = clamp(round(w / scale), -8, 7)` with ties
//! rounded away from zero. An all-zero tensor gets scale 1.

use serde::{Deserialize, Serialize};

use crate::dataio::Dataset;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::network::{evaluate_with, SnnNetwork};

pub const CODE_MIN: i8 = -8;
pub const CODE_MAX: i8 = 7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantizedLayer {
    pub rows: usize,
    pub cols: usize,
    pub scale: f64,
    pub codes: Vec<i8>,
}

/// Quantizes a row-major `rows x cols` matrix.
pub fn quantize(weights: &[f64], rows: usize, cols: usize) -> Result<QuantizedLayer> {
    if weights.len() != rows * cols {
        return Err(Error::Shape(format!("{} values for a {rows}x{cols} matrix", weights.len())));
    }
    if let Some(k) = weights.iter().position(|w| !w.is_finite()) {
        return Err(Error::Invalid(format!("weight {k} is {}", weights[k])));
    }
    let max = weights.iter().fold(0.0f64, |m, w| m.max(w.abs()));
    if max == 0.0 {
        return Ok(QuantizedLayer { rows, cols, scale: 1.0, codes: vec![0; weights.len()] });
    }
    let scale = max / CODE_MAX as f64;
    let codes = weights.iter().map(|&w| (w / scale).round().clamp(CODE_MIN as f64, CODE_MAX as f64) as i8).collect();
    Ok(QuantizedLayer { rows, cols, scale, codes })
}

pub fn dequantize(layer: &QuantizedLayer) -> Vec<f64> {
    layer.codes.iter().map(|&c| c as f64 * layer.scale).collect()
}

/// Quantizes every layer of a network.
pub fn quantize_network(net: &SnnNetwork) -> Result<Vec<QuantizedLayer>> {
    net.layers().map(|(rows, cols, w)| quantize(&w, rows, cols)).collect()
}

/// A copy of `net` with dequantized weights.
pub fn dequantized_network(net: &SnnNetwork, layers: &[QuantizedLayer]) -> Result<SnnNetwork> {
    let mut out = net.clone();
    for (l, q) in layers.iter().enumerate() {
        out.set_weights(l, q.rows, q.cols, dequantize(q))?;
    }
    Ok(out)
}

pub fn quantized_evaluate(net: &SnnNetwork, data: &Dataset) -> Result<f64> {
    quantized_evaluate_with(Execution::default(), net, data)
}

pub fn quantized_evaluate_with(exec: Execution, net: &SnnNetwork, data: &Dataset) -> Result<f64> {
    let q = quantize_network(net)?;
    evaluate_with(exec, &dequantized_network(net, &q)?, data)
}
