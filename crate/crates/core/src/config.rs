//! Flat `name = value` device parameter files.
//!
//! ```text
//! # 28 nm defaults, SI units
//! vdd = 0.25
//! inverter.nmos.v_th0 = 0.35
//! ```
//!
//! Blank lines and `#` comments are ignored. Unknown keys and duplicate keys
//! are errors. Missing keys keep their defaults.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::device::{InverterParams, TransistorParams};
use crate::error::{Error, Result};

/// Full parameter set of the neuron circuit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviceConfig {
    pub vdd: f64,
    pub temperature: f64,
    pub c_mem: f64,
    pub r_syn: f64,
    pub c_out: f64,
    pub mirror_pmos: TransistorParams,
    pub inverter_nmos: TransistorParams,
    pub inverter_pmos: TransistorParams,
}

impl Default for DeviceConfig {
    fn default() -> Self {
        Self {
            vdd: 0.25,
            temperature: 300.0,
            c_mem: 3.47e-15,
            r_syn: 200.0,
            c_out: 0.2e-15,
            mirror_pmos: TransistorParams::mirror_pmos_28nm(),
            inverter_nmos: TransistorParams::nmos_28nm(),
            inverter_pmos: TransistorParams::pmos_28nm(),
        }
    }
}

impl DeviceConfig {
    pub fn inverter(&self) -> InverterParams {
        InverterParams { nmos: self.inverter_nmos, pmos: self.inverter_pmos, vdd: self.vdd, c_out: self.c_out }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in
            [("vdd", self.vdd), ("temperature", self.temperature), ("c_mem", self.c_mem), ("c_out", self.c_out)]
        {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.r_syn >= 0.0) {
            return Err(Error::Invalid(format!("r_syn must be >= 0, got {}", self.r_syn)));
        }
        self.mirror_pmos.validate()?;
        self.inverter().validate()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (key, (line, value)) in parse_pairs(text)? {
            let loc = format!("line {line}");
            let slot = cfg.slot(&key).ok_or_else(|| Error::parse(&loc, format!("unknown key `{key}`")))?;
            *slot = value
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::parse(&loc, format!("`{key}`: `{value}` is not a finite number")))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn slot(&mut self, key: &str) -> Option<&mut f64> {
        match key {
            "vdd" => return Some(&mut self.vdd),
            "temperature" => return Some(&mut self.temperature),
            "c_mem" => return Some(&mut self.c_mem),
            "r_syn" => return Some(&mut self.r_syn),
            "c_out" => return Some(&mut self.c_out),
            _ => {}
        }
        let (device, field) = key.rsplit_once('.')?;
        let params = match device {
            "mirror.pmos" => &mut self.mirror_pmos,
            "inverter.nmos" => &mut self.inverter_nmos,
            "inverter.pmos" => &mut self.inverter_pmos,
            _ => return None,
        };
        Some(match field {
            "width" => &mut params.width,
            "length" => &mut params.length,
            "mu0" => &mut params.mobility_mu0,
            "c_ox" => &mut params.c_ox,
            "c_sigma" => &mut params.c_sigma,
            "v_th0" => &mut params.v_th0,
            "eta" => &mut params.eta,
            "gamma" => &mut params.gamma,
            _ => return None,
        })
    }

    /// Renders the file format; `parse(render())` is the identity.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in [
            ("vdd", self.vdd),
            ("temperature", self.temperature),
            ("c_mem", self.c_mem),
            ("r_syn", self.r_syn),
            ("c_out", self.c_out),
        ] {
            out.push_str(&format!("{k} = {v:e}\n"));
        }
        for (prefix, p) in [
            ("mirror.pmos", &self.mirror_pmos),
            ("inverter.nmos", &self.inverter_nmos),
            ("inverter.pmos", &self.inverter_pmos),
        ] {
            for (k, v) in [
                ("width", p.width),
                ("length", p.length),
                ("mu0", p.mobility_mu0),
                ("c_ox", p.c_ox),
                ("c_sigma", p.c_sigma),
                ("v_th0", p.v_th0),
                ("eta", p.eta),
                ("gamma", p.gamma),
            ] {
                out.push_str(&format!("{prefix}.{k} = {v:e}\n"));
            }
        }
        out
    }
}

/// Splits a config text into `key -> (line number, raw value)`.
pub fn parse_pairs(text: &str) -> Result<BTreeMap<String, (usize, String)>> {
    let mut out = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let loc = format!("line {line_no}");
        let (key, value) =
            line.split_once('=').ok_or_else(|| Error::parse(&loc, format!("expected `name = value`, got `{line}`")))?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() || value.is_empty() {
            return Err(Error::parse(&loc, "empty name or value"));
        }
        if let Some((first, _)) = out.insert(key.to_string(), (line_no, value.to_string())) {
            return Err(Error::parse(&loc, format!("duplicate key `{key}` (first on line {first})")));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_gives_defaults() {
        assert_eq!(DeviceConfig::parse("").unwrap(), DeviceConfig::default());
        assert_eq!(DeviceConfig::parse("# nothing\n\n").unwrap(), DeviceConfig::default());
    }

    #[test]
    fn overrides_and_comments() {
        let cfg = DeviceConfig::parse("vdd = 0.3  # raised\ninverter.nmos.eta=0.01\n").unwrap();
        assert_eq!(cfg.vdd, 0.3);
        assert_eq!(cfg.inverter_nmos.eta, 0.01);
        assert_eq!(cfg.inverter_pmos, DeviceConfig::default().inverter_pmos);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let err = DeviceConfig::parse("vdd = 0.25\nbogus = 1\n").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
        let err = DeviceConfig::parse("\n\nvdd 0.25").unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
        let err = DeviceConfig::parse("vdd = abc").unwrap_err();
        assert!(err.to_string().contains("line 1"), "{err}");
        let err = DeviceConfig::parse("vdd = 1\nvdd = 2").unwrap_err();
        assert!(err.to_string().contains("duplicate"), "{err}");
    }

    #[test]
    fn invalid_values_rejected() {
        assert!(DeviceConfig::parse("vdd = -1").is_err());
        assert!(DeviceConfig::parse("inverter.nmos.width = 0").is_err());
        assert!(DeviceConfig::parse("vdd = inf").is_err());
    }

    #[test]
    fn render_round_trips() {
        let mut cfg = DeviceConfig::default();
        cfg.mirror_pmos.v_th0 = 0.612345678901;
        cfg.r_syn = 0.0;
        assert_eq!(DeviceConfig::parse(&cfg.render()).unwrap(), cfg);
    }

    #[test]
    fn shipped_file_matches_defaults() {
        let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/device_28nm.conf");
        assert_eq!(DeviceConfig::load(&path).unwrap(), DeviceConfig::default());
    }
}
