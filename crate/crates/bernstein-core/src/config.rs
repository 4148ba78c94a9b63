//! Flat `key = value` model configuration: the format consumed by the CLI
//! and by scripted runs. Comments start with `#`, blank lines are ignored,
//! and every parse error names the offending line and key.
//!
//! Boundary data are given either as a named preset or as an inline
//! comma-separated coefficient list in the spectral basis of the geometry:
//!
//! ```text
//! geometry = interval
//! horizon  = 1.0
//! phi      = example1_phi     # 1 + cos(pi x)/2
//! psi      = unit
//! ```

use std::f64::consts::FRAC_1_PI;

use crate::bernstein_model::BernsteinModel;
use crate::spectral_core::{Geometry, TruncationPolicy};
use crate::{Error, Result};

/// Parsed model description; `build` turns it into a working model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub geometry: Geometry,
    pub horizon: f64,
    pub potential: f64,
    pub phi: Vec<f64>,
    pub psi: Vec<f64>,
    pub max_modes: Option<usize>,
    pub min_gap: Option<f64>,
    pub tail_tol: Option<f64>,
}

impl ModelConfig {
    /// Truncation policy with any configured overrides applied on top of
    /// the geometry default.
    pub fn policy(&self) -> Result<TruncationPolicy> {
        let base = TruncationPolicy::default_for(self.geometry);
        TruncationPolicy::new(
            self.geometry,
            self.max_modes.unwrap_or(base.max_modes),
            self.min_gap.unwrap_or(base.min_gap),
            self.tail_tol.unwrap_or(base.tail_tol),
        )
    }

    pub fn build(&self) -> Result<BernsteinModel> {
        BernsteinModel::new(
            self.geometry,
            self.horizon,
            self.potential,
            self.phi.clone(),
            self.psi.clone(),
            self.policy()?,
        )
    }
}

fn config_error(line: usize, key: &str, message: impl Into<String>) -> Error {
    Error::Config {
        line,
        key: key.to_string(),
        message: message.into(),
    }
}

fn parse_float(line: usize, key: &str, raw: &str) -> Result<f64> {
    let value: f64 = raw
        .parse()
        .map_err(|_| config_error(line, key, format!("expected a number, got `{raw}`")))?;
    if !value.is_finite() {
        return Err(config_error(line, key, "value must be finite"));
    }
    Ok(value)
}

/// Named boundary data in the spectral basis of each geometry.
fn preset(name: &str) -> Option<(&'static [f64], Option<Geometry>)> {
    const EXAMPLE1: &[f64] = &[1.0, 0.5];
    const UNIT: &[f64] = &[1.0];
    const EXAMPLE2: &[f64] = &[FRAC_1_PI, FRAC_1_PI];
    match name {
        "example1_phi" => Some((EXAMPLE1, Some(Geometry::Interval))),
        "unit" => Some((UNIT, None)),
        "example2_phi" => Some((EXAMPLE2, Some(Geometry::DiskRadial))),
        _ => None,
    }
}

fn parse_datum(line: usize, key: &str, raw: &str, geometry: Geometry) -> Result<Vec<f64>> {
    if let Some((coefficients, required)) = preset(raw) {
        if let Some(required) = required {
            if required != geometry {
                let name = match required {
                    Geometry::Interval => "interval",
                    Geometry::DiskRadial => "disk",
                };
                return Err(config_error(
                    line,
                    key,
                    format!("preset `{raw}` is only valid for geometry `{name}`"),
                ));
            }
        }
        return Ok(coefficients.to_vec());
    }
    if raw.chars().next().is_some_and(|c| c.is_ascii_alphabetic()) {
        return Err(config_error(
            line,
            key,
            format!("unknown preset `{raw}`; known: example1_phi, unit, example2_phi"),
        ));
    }
    let coefficients: Vec<f64> = raw
        .split(',')
        .map(|part| parse_float(line, key, part.trim()))
        .collect::<Result<_>>()?;
    if coefficients.is_empty() {
        return Err(config_error(line, key, "empty coefficient list"));
    }
    Ok(coefficients)
}

/// Parse a configuration document. Keys: `geometry`, `horizon`,
/// `potential`, `phi`, `psi`, `max_modes`, `min_gap`, `tail_tol`.
/// `geometry` is mandatory; `horizon` defaults to 1 and `potential` to 0;
/// `phi` and `psi` default to `unit`.
pub fn parse_config(text: &str) -> Result<ModelConfig> {
    let mut entries: Vec<(usize, String, String)> = Vec::new();
    for (index, raw_line) in text.lines().enumerate() {
        let line = index + 1;
        let content = raw_line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(config_error(
                line,
                content,
                "expected `key = value`",
            ));
        };
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if value.is_empty() {
            return Err(config_error(line, &key, "empty value"));
        }
        if entries.iter().any(|(_, k, _)| *k == key) {
            return Err(config_error(line, &key, "duplicate key"));
        }
        entries.push((line, key, value));
    }

    let geometry = match entries.iter().find(|(_, k, _)| k == "geometry") {
        Some((line, _, value)) => match value.as_str() {
            "interval" => Geometry::Interval,
            "disk" => Geometry::DiskRadial,
            other => {
                return Err(config_error(
                    *line,
                    "geometry",
                    format!("expected `interval` or `disk`, got `{other}`"),
                ))
            }
        },
        None => {
            return Err(config_error(
                0,
                "geometry",
                "missing mandatory key `geometry`",
            ))
        }
    };

    let mut config = ModelConfig {
        geometry,
        horizon: 1.0,
        potential: 0.0,
        phi: vec![1.0],
        psi: vec![1.0],
        max_modes: None,
        min_gap: None,
        tail_tol: None,
    };
    for (line, key, value) in &entries {
        let (line, value) = (*line, value.as_str());
        match key.as_str() {
            "geometry" => {}
            "horizon" => {
                let t = parse_float(line, key, value)?;
                if t <= 0.0 {
                    return Err(config_error(line, key, "horizon must be positive"));
                }
                config.horizon = t;
            }
            "potential" => config.potential = parse_float(line, key, value)?,
            "phi" => config.phi = parse_datum(line, key, value, geometry)?,
            "psi" => config.psi = parse_datum(line, key, value, geometry)?,
            "max_modes" => {
                let n: usize = value.parse().map_err(|_| {
                    config_error(line, key, format!("expected a positive integer, got `{value}`"))
                })?;
                if n == 0 {
                    return Err(config_error(line, key, "max_modes must be at least 1"));
                }
                config.max_modes = Some(n);
            }
            "min_gap" => {
                let g = parse_float(line, key, value)?;
                if g <= 0.0 {
                    return Err(config_error(line, key, "min_gap must be positive"));
                }
                config.min_gap = Some(g);
            }
            "tail_tol" => {
                let tol = parse_float(line, key, value)?;
                if tol <= 0.0 {
                    return Err(config_error(line, key, "tail_tol must be positive"));
                }
                config.tail_tol = Some(tol);
            }
            other => {
                return Err(config_error(
                    line,
                    other,
                    "unknown key; known: geometry, horizon, potential, phi, psi, \
                     max_modes, min_gap, tail_tol",
                ))
            }
        }
    }
    Ok(config)
}
