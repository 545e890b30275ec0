//! Dense feed-forward spiking network.
//!
//! Every layer, the input layer included, is a population of LIF neurons.
//! The input layer receives a constant current `pixel · i_max`; layer `l > 0`
//! receives `i_ref · W[l] · s[l-1](t)` from the spikes its predecessor emitted
//! in the same time step. Layers are updated in order inside a step.
//!
//! Weights are kept transposed (`in x out`, row-major) so a presynaptic spike
//! adds one contiguous row. Checkpoints and [`SnnNetwork::layer_weights`] use
//! the conventional `out x in` row-major layout.

mod backward;
mod forward;
mod rate;
mod train;

use std::io::Write;
use std::path::Path;

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::neuron::LifParams;
use crate::quant::QuantizedLayer;

pub use backward::{backward, Gradients};
pub use forward::{forward, ForwardMode, ForwardTrace};
pub use rate::{evaluate_rate, forward_rate, RatePath};
pub use train::{batch_gradient, evaluate, evaluate_with, predict, train, EpochMetrics, TrainConfig};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Topology {
    pub layer_sizes: Vec<usize>,
}

impl Topology {
    pub fn new(layer_sizes: Vec<usize>) -> Result<Self> {
        if layer_sizes.len() < 2 {
            return Err(Error::Invalid(format!("need at least two layers, got {}", layer_sizes.len())));
        }
        if layer_sizes.contains(&0) {
            return Err(Error::Invalid("layer sizes must be positive".into()));
        }
        Ok(Self { layer_sizes })
    }

    /// Parses `400-128-10`.
    pub fn parse(spec: &str) -> Result<Self> {
        let sizes = spec
            .split('-')
            .map(|s| s.trim().parse::<usize>().map_err(|_| Error::Invalid(format!("bad topology `{spec}`"))))
            .collect::<Result<Vec<_>>>()?;
        Self::new(sizes)
    }

    pub fn inputs(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn outputs(&self) -> usize {
        *self.layer_sizes.last().expect("validated")
    }

    pub fn n_weight_layers(&self) -> usize {
        self.layer_sizes.len() - 1
    }
}

impl std::fmt::Display for Topology {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.layer_sizes.iter().map(|s| s.to_string()).collect();
        f.write_str(&parts.join("-"))
    }
}

/// Synaptic current per presynaptic spike and unit weight.
pub const DEFAULT_I_REF: f64 = 50.0;
/// Input current for a white pixel; drives about one spike every 1.2 steps.
pub const DEFAULT_I_MAX: f64 = 8.0;
pub const DEFAULT_T_SIM: usize = 25;

#[derive(Debug, Clone, PartialEq)]
pub struct SnnNetwork {
    pub topology: Topology,
    /// `wt[l]` connects layer `l` to `l + 1`, stored `in x out`.
    pub(crate) wt: Vec<Vec<f64>>,
    pub lif: LifParams,
    pub i_ref: f64,
    /// Input current for a pixel of value 1.
    pub i_max: f64,
    pub t_sim: usize,
    pub seed: u64,
}

impl SnnNetwork {
    /// Uniform init in `±sqrt(6 / (fan_in + fan_out))`, seeded.
    pub fn new(topology: Topology, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let wt = topology
            .layer_sizes
            .windows(2)
            .map(|w| {
                let (n_in, n_out) = (w[0], w[1]);
                let bound = (6.0 / (n_in + n_out) as f64).sqrt();
                let dist = Uniform::new_inclusive(-bound, bound);
                (0..n_in * n_out).map(|_| dist.sample(&mut rng)).collect()
            })
            .collect();
        Self {
            topology,
            wt,
            lif: LifParams::normalized(),
            i_ref: DEFAULT_I_REF,
            i_max: DEFAULT_I_MAX,
            t_sim: DEFAULT_T_SIM,
            seed,
        }
    }

    pub fn zeros(topology: Topology) -> Self {
        let wt = topology.layer_sizes.windows(2).map(|w| vec![0.0; w[0] * w[1]]).collect();
        Self {
            topology,
            wt,
            lif: LifParams::normalized(),
            i_ref: DEFAULT_I_REF,
            i_max: DEFAULT_I_MAX,
            t_sim: DEFAULT_T_SIM,
            seed: 0,
        }
    }

    pub fn sizes(&self) -> &[usize] {
        &self.topology.layer_sizes
    }

    /// Weight `W[l][out, in]`.
    pub fn weight(&self, l: usize, out: usize, input: usize) -> f64 {
        self.wt[l][input * self.sizes()[l + 1] + out]
    }

    pub fn set_weight(&mut self, l: usize, out: usize, input: usize, w: f64) {
        let n_out = self.sizes()[l + 1];
        self.wt[l][input * n_out + out] = w;
    }

    /// Layer `l` as an `out x in` row-major matrix.
    pub fn layer_weights(&self, l: usize) -> Vec<f64> {
        let (n_in, n_out) = (self.sizes()[l], self.sizes()[l + 1]);
        let mut out = vec![0.0; n_in * n_out];
        for i in 0..n_in {
            for k in 0..n_out {
                out[k * n_in + i] = self.wt[l][i * n_out + k];
            }
        }
        out
    }

    /// `(rows = out, cols = in, out x in weights)` for every layer.
    pub fn layers(&self) -> impl Iterator<Item = (usize, usize, Vec<f64>)> + '_ {
        (0..self.wt.len()).map(|l| (self.sizes()[l + 1], self.sizes()[l], self.layer_weights(l)))
    }

    pub fn set_weights(&mut self, l: usize, rows: usize, cols: usize, row_major: Vec<f64>) -> Result<()> {
        if l >= self.wt.len()
            || rows != self.sizes()[l + 1]
            || cols != self.sizes()[l]
            || row_major.len() != rows * cols
        {
            return Err(Error::Shape(format!("layer {l}: {rows}x{cols} with {} values does not fit", row_major.len())));
        }
        for k in 0..rows {
            for i in 0..cols {
                self.wt[l][i * rows + k] = row_major[k * cols + i];
            }
        }
        Ok(())
    }

    pub fn weights_flat(&self) -> impl Iterator<Item = &f64> {
        self.wt.iter().flatten()
    }

    pub(crate) fn apply_update(&mut self, grads: &Gradients, lr: f64) {
        for (w, g) in self.wt.iter_mut().zip(&grads.dwt) {
            for (a, b) in w.iter_mut().zip(g) {
                *a -= lr * b;
            }
        }
    }
}

/// Heaviside step with a strict comparison.
pub fn heaviside(x: f64, v_th: f64) -> f64 {
    if x > v_th {
        1.0
    } else {
        0.0
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `β·σ(β(x − v_th))·(1 − σ(β(x − v_th)))`.
pub fn surrogate_derivative(x: f64, v_th: f64, beta: f64) -> f64 {
    let s = sigmoid(beta * (x - v_th));
    beta * s * (1.0 - s)
}

/// Constant per-step input currents for one image.
pub fn encode_input(image: &[f32], i_max: f64) -> Result<Vec<f64>> {
    image
        .iter()
        .enumerate()
        .map(|(k, &p)| {
            if (0.0..=1.0).contains(&p) {
                Ok(p as f64 * i_max)
            } else {
                Err(Error::Invalid(format!("pixel {k} = {p} outside [0, 1]")))
            }
        })
        .collect()
}

/// Cross-entropy of `softmax(counts / t_sim)` against `label`.
pub fn loss(trace: &ForwardTrace, label: usize) -> f64 {
    let (logp, _) = log_softmax(&trace.output_counts, trace.t_sim as f64);
    -logp[label]
}

/// Log-probabilities and probabilities of `softmax(counts / t)`.
pub(crate) fn log_softmax(counts: &[f64], t: f64) -> (Vec<f64>, Vec<f64>) {
    let z: Vec<f64> = counts.iter().map(|c| c / t).collect();
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
    let logp: Vec<f64> = z.iter().map(|v| v - lse).collect();
    let p = logp.iter().map(|v| v.exp()).collect();
    (logp, p)
}

pub const CHECKPOINT_FORMAT: &str = "lifsim-snn";
pub const CHECKPOINT_VERSION: u32 = 1;

/// JSON model container.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub topology: Vec<usize>,
    /// Per layer, `out x in` row-major.
    pub weights: Vec<Vec<f64>>,
    pub lif: LifParams,
    pub i_ref: f64,
    pub i_max: f64,
    pub t_sim: usize,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quantized: Option<Vec<QuantizedLayer>>,
}

impl Checkpoint {
    pub fn from_network(net: &SnnNetwork) -> Self {
        Self {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            topology: net.topology.layer_sizes.clone(),
            weights: (0..net.wt.len()).map(|l| net.layer_weights(l)).collect(),
            lif: net.lif,
            i_ref: net.i_ref,
            i_max: net.i_max,
            t_sim: net.t_sim,
            seed: net.seed,
            quantized: None,
        }
    }

    pub fn to_network(&self) -> Result<SnnNetwork> {
        if self.format != CHECKPOINT_FORMAT || self.version != CHECKPOINT_VERSION {
            return Err(Error::Invalid(format!(
                "unsupported checkpoint {} v{} (expected {CHECKPOINT_FORMAT} v{CHECKPOINT_VERSION})",
                self.format, self.version
            )));
        }
        let topology = Topology::new(self.topology.clone())?;
        if self.weights.len() != topology.n_weight_layers() {
            return Err(Error::Shape(format!("{} weight layers for topology {topology}", self.weights.len())));
        }
        self.lif.validate()?;
        let mut net = SnnNetwork::zeros(topology);
        for (l, w) in self.weights.iter().enumerate() {
            let (rows, cols) = (net.sizes()[l + 1], net.sizes()[l]);
            net.set_weights(l, rows, cols, w.clone())?;
        }
        net.lif = self.lif;
        net.i_ref = self.i_ref;
        net.i_max = self.i_max;
        net.t_sim = self.t_sim;
        net.seed = self.seed;
        Ok(net)
    }

    /// The network with dequantized weights when a quantized section is
    /// present, else the float network.
    pub fn to_effective_network(&self, use_quantized: bool) -> Result<SnnNetwork> {
        let net = self.to_network()?;
        match (&self.quantized, use_quantized) {
            (Some(q), true) => crate::quant::dequantized_network(&net, q),
            (None, true) => Err(Error::Invalid("checkpoint has no quantized section".into())),
            _ => Ok(net),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        serde_json::to_writer(&mut f, self)?;
        f.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::io::BufReader::new(std::fs::File::open(path)?);
        Ok(serde_json::from_reader(f)?)
    }
}
