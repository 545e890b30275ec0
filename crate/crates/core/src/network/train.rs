use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{backward, encode_input, forward, loss, ForwardMode, Gradients, SnnNetwork};
use crate::dataio::Dataset;
use crate::error::{Error, Result};
use crate::exec::{self, Execution};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub surrogate_beta: f64,
    /// Samples folded per work item when reducing batch gradients.
    pub chunk: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { learning_rate: 1e-4, epochs: 20, batch_size: 256, seed: 7, surrogate_beta: 5.0, chunk: 16 }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Invalid(format!("learning rate must be >= 0, got {}", self.learning_rate)));
        }
        if self.batch_size == 0 {
            return Err(Error::Invalid("batch size must be >= 1".into()));
        }
        if !(self.surrogate_beta > 0.0) {
            return Err(Error::Invalid(format!("surrogate beta must be positive, got {}", self.surrogate_beta)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_loss: f64,
    /// NaN when no test set was given.
    pub test_accuracy: f64,
}

impl EpochMetrics {
    pub fn write_csv_header<W: Write>(mut out: W) -> std::io::Result<()> {
        writeln!(out, "epoch,train_loss,test_accuracy")
    }

    pub fn write_csv_row<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{},{},{}", self.epoch, self.train_loss, self.test_accuracy)
    }
}

struct BatchAcc {
    grads: Gradients,
    loss: f64,
}

/// Minibatch SGD on the summed per-sample loss of each batch.
///
/// Batches are drawn from a per-epoch shuffle seeded by `config.seed`, and
/// batch gradients are reduced in fixed chunks in sample order, so the result
/// is bit-identical for any thread count. `on_epoch` sees each epoch's
/// metrics as soon as they are computed.
pub fn train(
    exec: Execution,
    net: &mut SnnNetwork,
    train_set: &Dataset,
    test_set: Option<&Dataset>,
    config: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochMetrics),
) -> Result<Vec<EpochMetrics>> {
    config.validate()?;
    if train_set.is_empty() {
        return Err(Error::Empty("training set is empty".into()));
    }
    check_dims(net, train_set)?;
    let beta = config.surrogate_beta;
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);
    for epoch in 1..=config.epochs {
        let mut rng =
            ChaCha8Rng::seed_from_u64(config.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(epoch as u64));
        order.sort_unstable();
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(config.batch_size) {
            let (grads, batch_loss) = batch_gradient(exec, net, train_set, batch, beta, config.chunk);
            epoch_loss += batch_loss;
            if config.learning_rate > 0.0 {
                net.apply_update(&grads, config.learning_rate);
            }
        }
        let test_accuracy = match test_set {
            Some(d) => evaluate_with(exec, net, d)?,
            None => f64::NAN,
        };
        let m = EpochMetrics { epoch, train_loss: epoch_loss / train_set.len() as f64, test_accuracy };
        on_epoch(&m);
        history.push(m);
    }
    Ok(history)
}

/// Summed gradient and loss over `batch` (indices into `data`).
///
/// Samples are folded in groups of `chunk` and the groups combined in order,
/// so the result is the same for every execution mode and thread count.
/// Shapes must already match; see [`train`].
pub fn batch_gradient(
    exec: Execution,
    net: &SnnNetwork,
    data: &Dataset,
    batch: &[usize],
    beta: f64,
    chunk: usize,
) -> (Gradients, f64) {
    let acc = exec::chunked_reduce(
        exec,
        batch.len(),
        chunk,
        || BatchAcc { grads: Gradients::zeros_like(net), loss: 0.0 },
        |acc, j| {
            let idx = batch[j];
            let input = encode_input(data.image(idx), net.i_max).expect("validated dataset");
            let trace = forward(net, &input, ForwardMode::Spiking).expect("validated shape");
            let label = data.labels[idx] as usize;
            acc.loss += loss(&trace, label);
            backward(net, &trace, label, beta, &mut acc.grads);
        },
        |acc, part| {
            acc.grads.add(&part.grads);
            acc.loss += part.loss;
        },
    );
    (acc.grads, acc.loss)
}

fn check_dims(net: &SnnNetwork, data: &Dataset) -> Result<()> {
    let n_in = net.topology.inputs();
    if n_in != data.dim {
        return Err(Error::Shape(format!("network takes {n_in} inputs, samples have {}", data.dim)));
    }
    if let Some(&l) = data.labels.iter().find(|&&l| l as usize >= net.topology.outputs()) {
        return Err(Error::Shape(format!("label {l} but only {} output neurons", net.topology.outputs())));
    }
    Ok(())
}

/// Index of the largest count; ties go to the lowest index.
pub fn argmax(counts: &[f64]) -> usize {
    let mut best = 0;
    for (k, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = k;
        }
    }
    best
}

pub fn predict(net: &SnnNetwork, image: &[f32]) -> Result<usize> {
    let input = encode_input(image, net.i_max)?;
    Ok(argmax(&forward(net, &input, ForwardMode::Spiking)?.output_counts))
}

pub fn evaluate(net: &SnnNetwork, data: &Dataset) -> Result<f64> {
    evaluate_with(Execution::default(), net, data)
}

pub fn evaluate_with(exec: Execution, net: &SnnNetwork, data: &Dataset) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::Empty("evaluation set is empty".into()));
    }
    check_dims(net, data)?;
    let hits = exec::map_range(exec, data.len(), |k| {
        predict(net, data.image(k)).map(|p| (p == data.labels[k] as usize) as usize)
    });
    let mut correct = 0;
    for h in hits {
        correct += h?;
    }
    Ok(correct as f64 / data.len() as f64)
}
