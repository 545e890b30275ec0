// Report structs use unit-suffixed field names (`current_A`) as JSON keys.
#![allow(non_snake_case)]
// `!(x > 0.0)` guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod calibrate;
mod device;
mod neuron;
mod output;
mod snn;
mod units;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

/// Device-calibrated LIF neuron and spiking network toolkit.
///
/// Physical flags take unit suffixes (10pA, 5mV, 2fJ, 1us). Ranges are
/// start:stop:step or start:stop:count. Exit codes: 0 success, 1 runtime
/// failure, 2 usage or configuration error.
#[derive(Debug, Parser)]
#[command(name = "lifsim", version)]
struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Print the resolved configuration as JSON and exit.
    #[arg(long, global = true)]
    print_config: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sub-threshold device curves.
    Device(device::DeviceArgs),
    /// Single-neuron traces and f-I sweeps.
    Neuron(neuron::NeuronArgs),
    /// Fit the activation curve to chip measurements.
    Calibrate(calibrate::CalibrateArgs),
    /// Write the bundled synthetic measurement files.
    Synth(calibrate::SynthArgs),
    /// Train a spiking network on MNIST.
    Train(snn::TrainArgs),
    /// Test accuracy of a checkpoint.
    Eval(snn::EvalArgs),
    /// Add 4-bit weights to a checkpoint.
    Quantize(snn::QuantizeArgs),
    /// Spike-count energy per inference.
    Energy(snn::EnergyArgs),
}

/// Bad flags, missing or malformed configuration: exit code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// Core errors that mean the request itself was malformed.
fn is_usage(err: &anyhow::Error) -> bool {
    if err.downcast_ref::<UsageError>().is_some() {
        return true;
    }
    matches!(
        err.downcast_ref::<lifsim_core::Error>(),
        Some(lifsim_core::Error::Invalid(_) | lifsim_core::Error::Shape(_))
    )
}

fn is_broken_pipe(err: &anyhow::Error) -> bool {
    err.chain().any(|c| {
        let io = c
            .downcast_ref::<std::io::Error>()
            .or_else(|| match c.downcast_ref::<lifsim_core::Error>() {
                Some(lifsim_core::Error::Io(io)) => Some(io),
                _ => None,
            })
            .or_else(|| match c.downcast_ref::<csv::Error>().map(|e| e.kind()) {
                Some(csv::ErrorKind::Io(io)) => Some(io),
                _ => None,
            });
        io.is_some_and(|e| e.kind() == std::io::ErrorKind::BrokenPipe)
    })
}

/// Resolves `--out`: a file path, or stdout when absent or `-`.
pub fn out_path(p: &Option<PathBuf>) -> Option<&PathBuf> {
    p.as_ref().filter(|p| p.as_os_str() != "-")
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(usage("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let print = cli.print_config;
    match cli.command {
        Command::Device(a) => device::run(a, print),
        Command::Neuron(a) => neuron::run(a, print),
        Command::Calibrate(a) => calibrate::run(a, print),
        Command::Synth(a) => calibrate::synth(a, print),
        Command::Train(a) => snn::train(a, print),
        Command::Eval(a) => snn::eval(a, print),
        Command::Quantize(a) => snn::quantize(a, print),
        Command::Energy(a) => snn::energy(a, print),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        // Downstream closed the pipe (e.g. `| head`); not our failure.
        Err(e) if is_broken_pipe(&e) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(if is_usage(&e) { 2 } else { 1 })
        }
    }
}
