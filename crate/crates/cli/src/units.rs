//! Unit-suffixed quantities and `start:stop:step` ranges.
//!
//! Physical flags must carry a unit (`10pA`, `5mV`, `2fJ`). In a range,
//! fields without a unit inherit the unit of the first field that has one,
//! so `0:0.25:5mV` and `0V:250mV:5mV` are the same sweep. A bare integer in
//! the third field, with a unit on an endpoint, is a point count:
//! `10pA:3000pA:50` is 50 evenly spaced currents.

use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dim {
    Current,
    Voltage,
    Time,
    Energy,
}

impl Dim {
    fn base(self) -> &'static str {
        match self {
            Dim::Current => "A",
            Dim::Voltage => "V",
            Dim::Time => "s",
            Dim::Energy => "J",
        }
    }
}

impl fmt::Display for Dim {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.base())
    }
}

const PREFIXES: [(&str, f64); 11] = [
    ("a", 1e-18),
    ("f", 1e-15),
    ("p", 1e-12),
    ("n", 1e-9),
    ("u", 1e-6),
    ("µ", 1e-6),
    ("m", 1e-3),
    ("", 1.0),
    ("k", 1e3),
    ("M", 1e6),
    ("G", 1e9),
];

/// Splits `12.5mV` into `(12.5, Some(1e-3))`; `(x, None)` for a bare number.
fn split(text: &str, dim: Dim) -> Result<(f64, Option<f64>), String> {
    let text = text.trim();
    let base = dim.base();
    let mut unit_scale = None;
    let mut number = text;
    if let Some(head) = text.strip_suffix(base) {
        let (prefix, scale) = PREFIXES
            .iter()
            .filter(|(p, _)| !p.is_empty())
            .find(|(p, _)| head.ends_with(p) && head[..head.len() - p.len()].parse::<f64>().is_ok())
            .copied()
            .unwrap_or(("", 1.0));
        number = &head[..head.len() - prefix.len()];
        unit_scale = Some(scale);
    }
    let value: f64 = number.parse().map_err(|_| {
        if unit_scale.is_none() && text.chars().any(|c| c.is_alphabetic() && c != 'e' && c != 'E') {
            format!("`{text}`: expected a {dim} quantity such as 10p{dim} or 2.5{dim}")
        } else {
            format!("`{text}` is not a number")
        }
    })?;
    if !value.is_finite() {
        return Err(format!("`{text}` is not finite"));
    }
    Ok((value, unit_scale))
}

/// A single quantity in SI units. Bare numbers are rejected.
pub fn parse_quantity(text: &str, dim: Dim) -> Result<f64, String> {
    match split(text, dim)? {
        (v, Some(scale)) => Ok(v * scale),
        (_, None) => {
            Err(format!("`{}` needs a unit suffix, e.g. {}p{dim} or {}{dim}", text.trim(), text.trim(), text.trim()))
        }
    }
}

/// Expands a range into its points, endpoints included.
pub fn parse_range(text: &str, dim: Dim) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 3 {
        return Err(format!("`{text}`: expected start:stop:step or start:stop:count"));
    }
    let fields = parts.iter().map(|p| split(p, dim)).collect::<Result<Vec<_>, _>>()?;
    let unit = fields
        .iter()
        .find_map(|f| f.1)
        .ok_or_else(|| format!("`{text}` has no unit; write e.g. `{}{dim}` on a field", parts[2]))?;
    let start = fields[0].0 * fields[0].1.unwrap_or(unit);
    let stop = fields[1].0 * fields[1].1.unwrap_or(unit);
    let endpoints_have_unit = fields[0].1.is_some() || fields[1].1.is_some();
    let third = parts[2].trim();
    if fields[2].1.is_none() && endpoints_have_unit && third.parse::<usize>().is_ok() {
        let n: usize = third.parse().unwrap();
        if n < 2 {
            return Err(format!("`{text}`: a point count must be at least 2"));
        }
        return Ok((0..n).map(|k| start + (stop - start) * k as f64 / (n - 1) as f64).collect());
    }
    let step = fields[2].0 * fields[2].1.unwrap_or(unit);
    if !(step > 0.0) {
        return Err(format!("`{text}`: step must be positive"));
    }
    if stop < start {
        return Err(format!("`{text}`: stop is below start"));
    }
    let n = ((stop - start) / step * (1.0 + 1e-9)).floor() as usize + 1;
    if n > 10_000_000 {
        return Err(format!("`{text}`: {n} points is too many"));
    }
    Ok((0..n).map(|k| start + step * k as f64).collect())
}

pub fn current(s: &str) -> Result<f64, String> {
    parse_quantity(s, Dim::Current)
}

pub fn voltage(s: &str) -> Result<f64, String> {
    parse_quantity(s, Dim::Voltage)
}

pub fn time(s: &str) -> Result<f64, String> {
    parse_quantity(s, Dim::Time)
}

pub fn energy(s: &str) -> Result<f64, String> {
    parse_quantity(s, Dim::Energy)
}

/// Points of a parsed range, as one flag value.
#[derive(Debug, Clone, PartialEq)]
pub struct Sweep(pub Vec<f64>);

pub fn current_range(s: &str) -> Result<Sweep, String> {
    parse_range(s, Dim::Current).map(Sweep)
}

pub fn voltage_range(s: &str) -> Result<Sweep, String> {
    parse_range(s, Dim::Voltage).map(Sweep)
}
