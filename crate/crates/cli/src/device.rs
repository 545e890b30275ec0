use std::path::PathBuf;

use anyhow::Context;
use clap::{Args, ValueEnum};
use lifsim_core::config::DeviceConfig;
use lifsim_core::device::{inverter_vinv, OperatingPoint, Subthreshold, TransistorParams, MAX_TAYLOR_ORDER};
use serde::Serialize;

use crate::output::{cell, print_config, writer};
use crate::units::{self, Dim, Sweep};
use crate::usage;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Curve {
    /// Drain current against V_GS at fixed V_DS.
    IdVgs,
    /// Drain current against V_DS at fixed V_GS.
    IdVds,
    /// V_OH, V_inv and t_PHL against supply voltage.
    Inverter,
    /// V_OH exact and series against membrane current.
    VohTaylor,
    /// Mirror current and membrane peak against synaptic current.
    Membrane,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Device {
    Nmos,
    Pmos,
    Mirror,
}

#[derive(Debug, Args)]
pub struct DeviceArgs {
    /// Parameter file (`name = value`, SI units). Built-in 28 nm values if absent.
    #[arg(long, env = "LIFSIM_DEVICE_CONFIG")]
    config: Option<PathBuf>,

    #[arg(long, value_enum)]
    curve: Curve,

    /// Transistor for the I_D curves.
    #[arg(long, value_enum, default_value = "nmos")]
    device: Device,

    /// Gate voltage: a range for id-vgs, a value for id-vds.
    #[arg(long)]
    vgs: Option<String>,

    /// Drain voltage: a range for id-vds, a value for id-vgs (default V_DD).
    #[arg(long)]
    vds: Option<String>,

    /// Supply sweep for the inverter curve.
    #[arg(long, default_value = "0.1V:0.4V:10mV", value_parser = units::voltage_range)]
    vdd: Sweep,

    /// Membrane current sweep for voh-taylor.
    #[arg(long, default_value = "300pA:1000pA:15", value_parser = units::current_range)]
    imem: Sweep,

    /// Synaptic current sweep for membrane.
    #[arg(long, default_value = "0pA:3000pA:31", value_parser = units::current_range)]
    isyn: Sweep,

    /// Integration time for voh-taylor and membrane.
    #[arg(long, default_value = "2us", value_parser = units::time)]
    delta_t: f64,

    /// Number of series terms for voh-taylor.
    #[arg(long, default_value_t = MAX_TAYLOR_ORDER)]
    order: u32,

    /// Output CSV (stdout if absent).
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct Resolved<'a> {
    curve: Curve,
    device: Device,
    sweep: &'a [f64],
    fixed_V: Option<f64>,
    delta_t_s: f64,
    order: u32,
    config: &'a DeviceConfig,
}

fn load_config(path: &Option<PathBuf>) -> anyhow::Result<DeviceConfig> {
    let cfg = match path {
        None => DeviceConfig::default(),
        Some(p) => {
            if !p.exists() {
                return Err(usage(format!("parameter file {} not found", p.display())));
            }
            DeviceConfig::load(p).map_err(|e| usage(format!("{}: {e}", p.display())))?
        }
    };
    cfg.validate().map_err(|e| usage(format!("invalid device parameters: {e}")))?;
    Ok(cfg)
}

pub fn run(a: DeviceArgs, print: bool) -> anyhow::Result<()> {
    let cfg = load_config(&a.config)?;
    if a.order > MAX_TAYLOR_ORDER {
        return Err(usage(format!("--order must be at most {MAX_TAYLOR_ORDER}")));
    }
    let transistor: TransistorParams = match a.device {
        Device::Nmos => cfg.inverter_nmos,
        Device::Pmos => cfg.inverter_pmos,
        Device::Mirror => cfg.mirror_pmos,
    };
    let range = |s: &Option<String>, default: &str| {
        units::parse_range(s.as_deref().unwrap_or(default), Dim::Voltage).map_err(usage)
    };
    let value = |s: &Option<String>, default: f64| match s {
        Some(s) => units::voltage(s).map_err(usage),
        None => Ok(default),
    };
    let (sweep, fixed) = match a.curve {
        Curve::IdVgs => (range(&a.vgs, "0V:0.25V:5mV")?, Some(value(&a.vds, cfg.vdd)?)),
        Curve::IdVds => (range(&a.vds, "0V:0.25V:5mV")?, Some(value(&a.vgs, cfg.vdd / 2.0)?)),
        Curve::Inverter => (a.vdd.0.clone(), None),
        Curve::VohTaylor => (a.imem.0.clone(), None),
        Curve::Membrane => (a.isyn.0.clone(), None),
    };
    if print {
        return print_config(&Resolved {
            curve: a.curve,
            device: a.device,
            sweep: &sweep,
            fixed_V: fixed,
            delta_t_s: a.delta_t,
            order: a.order,
            config: &cfg,
        });
    }

    let model = Subthreshold::default();
    let t = cfg.temperature;
    let mut w = csv::Writer::from_writer(writer(&a.out)?);
    match a.curve {
        Curve::IdVgs | Curve::IdVds => {
            let swept = if a.curve == Curve::IdVgs { "v_gs_V" } else { "v_ds_V" };
            w.write_record([swept, "i_d_A", "i_d_approx_A"])?;
            let fixed = fixed.expect("set for I_D curves");
            for &v in &sweep {
                let (v_gs, v_ds) = if a.curve == Curve::IdVgs { (v, fixed) } else { (fixed, v) };
                let op = OperatingPoint { v_gs, v_ds, v_sb: 0.0, temperature: t };
                w.write_record([
                    format!("{v:e}"),
                    cell(model.drain_current(&transistor, &op).ok()),
                    cell(model.drain_current_approx(&transistor, &op).ok()),
                ])?;
            }
        }
        Curve::Inverter => {
            w.write_record(["vdd_V", "v_oh_V", "v_inv_V", "tphl_s"])?;
            for &vdd in &sweep {
                let inv = lifsim_core::device::InverterParams { vdd, ..cfg.inverter() };
                w.write_record([
                    format!("{vdd:e}"),
                    cell(model.inverter_voh(&inv, t).ok()),
                    cell(inverter_vinv(&inv, t).ok()),
                    cell(model.tphl_subthreshold(cfg.c_out, &cfg.inverter_nmos, vdd, t).ok()),
                ])?;
            }
        }
        Curve::VohTaylor => {
            w.write_record(["i_mem_A", "v_oh_exact_V", "v_oh_series_V"])?;
            let inv = cfg.inverter();
            for &i in &sweep {
                w.write_record([
                    format!("{i:e}"),
                    cell(model.voh_direct(&inv, i, a.delta_t, cfg.c_mem, t).ok()),
                    cell(model.voh_taylor(&inv, i, a.delta_t, cfg.c_mem, t, a.order).ok()),
                ])?;
            }
        }
        Curve::Membrane => {
            w.write_record(["i_syn_A", "i_mem_A", "v_mem_peak_V"])?;
            for &i in &sweep {
                let i_mem = model.mirror_membrane_current(i, cfg.r_syn, &cfg.mirror_pmos, cfg.vdd, t).ok();
                let peak = model.membrane_peak(i, a.delta_t, cfg.c_mem, cfg.r_syn, &cfg.mirror_pmos, cfg.vdd, t).ok();
                w.write_record([format!("{i:e}"), cell(i_mem), cell(peak)])?;
            }
        }
    }
    w.flush().context("writing CSV")?;
    Ok(())
}
