use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::Args;
use lifsim_core::dataio::{load_mnist, Dataset};
use lifsim_core::energy::dataset_energy;
use lifsim_core::exec::Execution;
use lifsim_core::network::{
    evaluate_rate, evaluate_with, train as train_net, Checkpoint, EpochMetrics, RatePath, SnnNetwork, Topology,
    TrainConfig, DEFAULT_I_MAX, DEFAULT_I_REF, DEFAULT_T_SIM,
};
use lifsim_core::quant::{dequantize, quantize_network};
use serde::Serialize;

use crate::neuron::load_fit;
use crate::output::{print_config, write_json, writer};
use crate::units;
use crate::usage;

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Directory with the four uncompressed MNIST IDX files.
    #[arg(long, env = "MNIST_DIR", default_value = "data/mnist")]
    data: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long, default_value = "400-128-10")]
    topology: String,

    #[arg(long, default_value_t = 1e-4)]
    lr: f64,

    #[arg(long, default_value_t = 20)]
    epochs: usize,

    #[arg(long, default_value_t = 256)]
    batch: usize,

    #[arg(long, default_value_t = 7)]
    seed: u64,

    /// Surrogate steepness.
    #[arg(long, default_value_t = 5.0)]
    beta: f64,

    /// Synaptic current per spike and unit weight (model units).
    #[arg(long, default_value_t = DEFAULT_I_REF)]
    i_ref: f64,

    /// Input current of a white pixel (model units).
    #[arg(long, default_value_t = DEFAULT_I_MAX)]
    i_max: f64,

    #[arg(long, default_value_t = DEFAULT_T_SIM)]
    t_sim: usize,

    /// Use only the first N training images.
    #[arg(long)]
    train_limit: Option<usize>,

    /// Use only the first N test images.
    #[arg(long)]
    test_limit: Option<usize>,

    #[command(flatten)]
    data: DataArgs,

    /// Checkpoint to write.
    #[arg(long, short, default_value = "model.json")]
    out: PathBuf,

    /// Metrics CSV (stdout if absent).
    #[arg(long)]
    metrics: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    checkpoint: PathBuf,

    /// Use the checkpoint's 4-bit weights.
    #[arg(long)]
    quantized: bool,

    /// Evaluate through the fitted activation instead of spiking dynamics.
    #[arg(long, requires = "fit")]
    rate: bool,

    /// Activation fit JSON for --rate.
    #[arg(long)]
    fit: Option<PathBuf>,

    /// Physical current of a unit weight at a unit input rate, for --rate.
    #[arg(long, default_value = "1nA", value_parser = units::current)]
    synapse_current: f64,

    #[arg(long)]
    limit: Option<usize>,

    #[command(flatten)]
    data: DataArgs,

    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct QuantizeArgs {
    checkpoint: PathBuf,

    /// Where to write the checkpoint with 4-bit weights (default: in place).
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EnergyArgs {
    checkpoint: PathBuf,

    #[arg(long, default_value = "2fJ", value_parser = units::energy)]
    e_spike: f64,

    #[arg(long)]
    quantized: bool,

    #[arg(long)]
    limit: Option<usize>,

    #[command(flatten)]
    data: DataArgs,

    #[arg(long, short)]
    out: Option<PathBuf>,
}

fn load_split(dir: &Path, train: bool, limit: Option<usize>) -> anyhow::Result<Dataset> {
    let raw = load_mnist(dir, train)?;
    let data = Dataset::from_raw(&raw)?;
    Ok(match limit {
        Some(n) => data.take(n),
        None => data,
    })
}

fn load_checkpoint(path: &Path) -> anyhow::Result<Checkpoint> {
    if !path.exists() {
        return Err(usage(format!("checkpoint {} not found", path.display())));
    }
    Checkpoint::load(path).map_err(|e| usage(format!("{}: {e}", path.display())))
}

pub fn train(a: TrainArgs, print: bool) -> anyhow::Result<()> {
    let topology = Topology::parse(&a.topology).map_err(|e| usage(e.to_string()))?;
    let cfg = TrainConfig {
        learning_rate: a.lr,
        epochs: a.epochs,
        batch_size: a.batch,
        seed: a.seed,
        surrogate_beta: a.beta,
        ..TrainConfig::default()
    };
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    if !(a.i_ref > 0.0 && a.i_max > 0.0) || a.t_sim == 0 {
        return Err(usage("--i-ref, --i-max and --t-sim must be positive"));
    }
    if print {
        #[derive(Serialize)]
        struct Resolved<'a> {
            topology: &'a [usize],
            train: &'a TrainConfig,
            i_ref: f64,
            i_max: f64,
            t_sim: usize,
            data: &'a Path,
            train_limit: Option<usize>,
            test_limit: Option<usize>,
            out: &'a Path,
        }
        return print_config(&Resolved {
            topology: &topology.layer_sizes,
            train: &cfg,
            i_ref: a.i_ref,
            i_max: a.i_max,
            t_sim: a.t_sim,
            data: &a.data.data,
            train_limit: a.train_limit,
            test_limit: a.test_limit,
            out: &a.out,
        });
    }
    let train_set = load_split(&a.data.data, true, a.train_limit)?;
    let test_set = load_split(&a.data.data, false, a.test_limit)?;
    let mut net = SnnNetwork::new(topology, a.seed);
    net.i_ref = a.i_ref;
    net.i_max = a.i_max;
    net.t_sim = a.t_sim;

    let mut metrics = writer(&a.metrics)?;
    EpochMetrics::write_csv_header(&mut metrics)?;
    metrics.flush()?;
    let mut io_err = None;
    let start = std::time::Instant::now();
    train_net(Execution::Parallel, &mut net, &train_set, Some(&test_set), &cfg, |m| {
        eprintln!(
            "epoch {:>3}  loss {:.4}  test {:.2}%  ({:.0} s)",
            m.epoch,
            m.train_loss,
            100.0 * m.test_accuracy,
            start.elapsed().as_secs_f64()
        );
        if let Err(e) = m.write_csv_row(&mut metrics).and_then(|_| metrics.flush()) {
            io_err.get_or_insert(e);
        }
    })?;
    if let Some(e) = io_err {
        return Err(e).context("writing metrics");
    }
    Checkpoint::from_network(&net).save(&a.out).with_context(|| format!("writing {}", a.out.display()))?;
    eprintln!("wrote {}", a.out.display());
    Ok(())
}

#[derive(Serialize)]
struct EvalReport {
    accuracy: f64,
    samples: usize,
    quantized: bool,
    path: &'static str,
}

pub fn eval(a: EvalArgs, print: bool) -> anyhow::Result<()> {
    let ck = load_checkpoint(&a.checkpoint)?;
    let net = ck.to_effective_network(a.quantized).map_err(|e| usage(e.to_string()))?;
    let fit = a.fit.as_ref().map(load_fit).transpose()?;
    if print {
        return print_config(&serde_json::json!({
            "checkpoint": a.checkpoint,
            "quantized": a.quantized,
            "rate": a.rate,
            "fit": fit,
            "synapse_current_A": a.synapse_current,
            "limit": a.limit,
            "data": a.data.data,
        }));
    }
    let data = load_split(&a.data.data, false, a.limit)?;
    let (accuracy, path) = match fit.filter(|_| a.rate) {
        Some(fit) => {
            let path = RatePath::new(fit, a.synapse_current).map_err(|e| usage(e.to_string()))?;
            (evaluate_rate(Execution::Parallel, &net, &data, &path)?, "rate")
        }
        None => (evaluate_with(Execution::Parallel, &net, &data)?, "spiking"),
    };
    write_json(&a.out, &EvalReport { accuracy, samples: data.len(), quantized: a.quantized, path })
}

#[derive(Serialize)]
struct LayerSummary {
    rows: usize,
    cols: usize,
    scale: f64,
    levels_used: usize,
    max_abs_error: f64,
}

pub fn quantize(a: QuantizeArgs, print: bool) -> anyhow::Result<()> {
    let out = a.out.clone().unwrap_or_else(|| a.checkpoint.clone());
    if print {
        return print_config(&serde_json::json!({ "checkpoint": a.checkpoint, "out": out, "bits": 4 }));
    }
    let mut ck = load_checkpoint(&a.checkpoint)?;
    let net = ck.to_network().map_err(|e| usage(e.to_string()))?;
    let layers = quantize_network(&net)?;
    let summary: Vec<LayerSummary> = layers
        .iter()
        .zip(net.layers())
        .map(|(q, (_, _, w))| {
            let mut codes = q.codes.clone();
            codes.sort_unstable();
            codes.dedup();
            let err = dequantize(q).iter().zip(&w).fold(0.0f64, |m, (d, x)| m.max((d - x).abs()));
            LayerSummary { rows: q.rows, cols: q.cols, scale: q.scale, levels_used: codes.len(), max_abs_error: err }
        })
        .collect();
    ck.quantized = Some(layers);
    ck.save(&out).with_context(|| format!("writing {}", out.display()))?;
    eprintln!("wrote {}", out.display());
    write_json(&None, &summary)
}

pub fn energy(a: EnergyArgs, print: bool) -> anyhow::Result<()> {
    let ck = load_checkpoint(&a.checkpoint)?;
    let net = ck.to_effective_network(a.quantized).map_err(|e| usage(e.to_string()))?;
    if print {
        return print_config(&serde_json::json!({
            "checkpoint": a.checkpoint,
            "e_spike_J": a.e_spike,
            "quantized": a.quantized,
            "limit": a.limit,
            "data": a.data.data,
        }));
    }
    let data = load_split(&a.data.data, false, a.limit)?;
    let report = dataset_energy(Execution::Parallel, &net, &data, a.e_spike)?;
    write_json(&a.out, &report)
}
