//! Flat `key = value` configuration with `[section]` headers.

use std::collections::BTreeMap;
use std::fmt::Write;
use std::path::PathBuf;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::holonomy::PhaseLoop;
use crate::thermal::ThermalSpec;
use crate::tripod::{Envelope, TripodConfig};
use crate::units;

/// Documentation for every recognised key, shown by `--help`.
pub const KEYS_HELP: &str = "\
Configuration file keys (flat `key = value`, grouped under [section] headers; `#` starts a comment):
  [atom]         wavelength_um (0.689), mass_amu (86.909), recoil_khz (derived from the two above)
  [lasers]       rabi_khz (250 for fig2, 450 otherwise), rabi_scale (1,1,1)
  [thermal]      temperature_uk (0.5), quadrature_order (64), monte_carlo_samples (0 = quadrature), seed (1)
  [loop]         phi0_over_pi (1), segment_us (4), orientation (phi1_first | phi2_first),
                 vertices_over_pi (e.g. `0,0; 1,0; 1,1`; replaces the triangle in `loop`)
  [grid]         phi0_max_over_pi (1.2), phi0_points (25), t_max_us (80), t_step_us (1), steps (12)
  [thermometry]  noise (0.02), shots (100)
  [adiabaticity] ratio_min (1), ratio_max (20), ratio_points (20)
  [output]       path (stdout when absent)
Command-line flags override file values.";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScenarioName {
    Fig2,
    Fig3,
    Fig4,
    Thermometry,
    Adiabaticity,
    Loop,
}

impl ScenarioName {
    pub fn as_str(&self) -> &'static str {
        match self {
            ScenarioName::Fig2 => "fig2",
            ScenarioName::Fig3 => "fig3",
            ScenarioName::Fig4 => "fig4",
            ScenarioName::Thermometry => "thermometry",
            ScenarioName::Adiabaticity => "adiabaticity",
            ScenarioName::Loop => "loop",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Orientation {
    Phi1First,
    Phi2First,
}

/// Everything a scenario needs, after file values and flags are merged.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub scenario: ScenarioName,
    pub wavelength_um: f64,
    pub mass_amu: f64,
    pub recoil_khz: Option<f64>,
    pub rabi_khz: Option<f64>,
    pub rabi_scale: [f64; 3],
    pub temperature_uk: f64,
    pub quadrature_order: usize,
    pub monte_carlo_samples: usize,
    pub seed: u64,
    pub phi0_over_pi: f64,
    pub segment_us: f64,
    pub orientation: Orientation,
    pub vertices_over_pi: Option<Vec<(f64, f64)>>,
    pub phi0_max_over_pi: f64,
    pub phi0_points: usize,
    pub t_max_us: f64,
    pub t_step_us: f64,
    pub steps: usize,
    pub noise: f64,
    pub shots: usize,
    pub ratio_min: f64,
    pub ratio_max: f64,
    pub ratio_points: usize,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn defaults(scenario: ScenarioName) -> Self {
        Self {
            scenario,
            wavelength_um: units::SR87_WAVELENGTH_UM,
            mass_amu: units::SR87_MASS_AMU,
            recoil_khz: None,
            rabi_khz: None,
            rabi_scale: [1.0; 3],
            temperature_uk: 0.5,
            quadrature_order: 64,
            monte_carlo_samples: 0,
            seed: 1,
            phi0_over_pi: 1.0,
            segment_us: 4.0,
            orientation: Orientation::Phi1First,
            vertices_over_pi: None,
            phi0_max_over_pi: 1.2,
            phi0_points: 25,
            t_max_us: if scenario == ScenarioName::Thermometry { 60.0 } else { 80.0 },
            t_step_us: 1.0,
            steps: 12,
            noise: 0.02,
            shots: 100,
            ratio_min: 1.0,
            ratio_max: 20.0,
            ratio_points: 20,
            out: None,
        }
    }

    /// Reads `key = value` lines into this config.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        let mut section = String::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| Error::Config(format!("line {}: unterminated section header", n + 1)))?;
                section = name.trim().to_string();
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", n + 1)))?;
            let key = if section.is_empty() { k.trim().to_string() } else { format!("{section}.{}", k.trim()) };
            self.set(&key, v.trim()).map_err(|e| match e {
                Error::Config(msg) => Error::Config(format!("line {}: {msg}", n + 1)),
                other => other,
            })?;
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim_matches('"');
        match key {
            "atom.wavelength_um" => self.wavelength_um = num(key, value)?,
            "atom.mass_amu" => self.mass_amu = num(key, value)?,
            "atom.recoil_khz" => self.recoil_khz = Some(num(key, value)?),
            "lasers.rabi_khz" => self.rabi_khz = Some(num(key, value)?),
            "lasers.rabi_scale" => {
                let v: Vec<f64> = value.split(',').map(|s| num(key, s)).collect::<Result<_>>()?;
                self.rabi_scale = v
                    .try_into()
                    .map_err(|_| Error::Config(format!("{key} needs three comma-separated values")))?;
            }
            "thermal.temperature_uk" => self.temperature_uk = num(key, value)?,
            "thermal.quadrature_order" => self.quadrature_order = count(key, value)?,
            "thermal.monte_carlo_samples" => self.monte_carlo_samples = count(key, value)?,
            "thermal.seed" => self.seed = count(key, value)? as u64,
            "loop.phi0_over_pi" => self.phi0_over_pi = num(key, value)?,
            "loop.segment_us" => self.segment_us = num(key, value)?,
            "loop.orientation" => {
                self.orientation = match value {
                    "phi1_first" => Orientation::Phi1First,
                    "phi2_first" => Orientation::Phi2First,
                    _ => return Err(Error::Config(format!("{key} must be phi1_first or phi2_first"))),
                }
            }
            "loop.vertices_over_pi" => {
                let pts = value
                    .split(';')
                    .map(|p| {
                        let (a, b) = p
                            .split_once(',')
                            .ok_or_else(|| Error::Config(format!("{key}: vertex `{p}` needs two coordinates")))?;
                        Ok((num(key, a)?, num(key, b)?))
                    })
                    .collect::<Result<Vec<_>>>()?;
                self.vertices_over_pi = Some(pts);
            }
            "grid.phi0_max_over_pi" => self.phi0_max_over_pi = num(key, value)?,
            "grid.phi0_points" => self.phi0_points = count(key, value)?,
            "grid.t_max_us" => self.t_max_us = num(key, value)?,
            "grid.t_step_us" => self.t_step_us = num(key, value)?,
            "grid.steps" => self.steps = count(key, value)?,
            "thermometry.noise" => self.noise = num(key, value)?,
            "thermometry.shots" => self.shots = count(key, value)?,
            "adiabaticity.ratio_min" => self.ratio_min = num(key, value)?,
            "adiabaticity.ratio_max" => self.ratio_max = num(key, value)?,
            "adiabaticity.ratio_points" => self.ratio_points = count(key, value)?,
            "output.path" => self.out = Some(PathBuf::from(value)),
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("atom.wavelength_um", self.wavelength_um),
            ("atom.mass_amu", self.mass_amu),
            ("loop.segment_us", self.segment_us),
            ("grid.t_max_us", self.t_max_us),
            ("grid.t_step_us", self.t_step_us),
            ("adiabaticity.ratio_min", self.ratio_min),
        ];
        for (k, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("{k} must be positive")));
            }
        }
        if let Some(r) = self.recoil_khz {
            if !(r >= 0.0) {
                return Err(Error::Config("atom.recoil_khz must be non-negative".into()));
            }
        }
        if let Some(r) = self.rabi_khz {
            if !(r > 0.0) {
                return Err(Error::Config("lasers.rabi_khz must be positive".into()));
            }
        }
        if self.rabi_scale.iter().any(|s| !(*s >= 0.0)) {
            return Err(Error::Config("lasers.rabi_scale entries must be non-negative".into()));
        }
        if !(self.temperature_uk >= 0.0) {
            return Err(Error::Config("thermal.temperature_uk must be non-negative".into()));
        }
        if self.monte_carlo_samples == 0 && self.quadrature_order < 8 {
            return Err(Error::Config("thermal.quadrature_order must be at least 8".into()));
        }
        if self.monte_carlo_samples == 1 {
            return Err(Error::Config("thermal.monte_carlo_samples must be 0 or at least 2".into()));
        }
        if self.phi0_points < 2 || self.ratio_points < 2 || self.steps == 0 || self.shots == 0 {
            return Err(Error::Config("grid sizes must be at least 2 and step counts at least 1".into()));
        }
        if !(self.ratio_max > self.ratio_min) {
            return Err(Error::Config("adiabaticity.ratio_max must exceed ratio_min".into()));
        }
        if !(self.noise >= 0.0) {
            return Err(Error::Config("thermometry.noise must be non-negative".into()));
        }
        if let Some(v) = &self.vertices_over_pi {
            if v.len() < 2 {
                return Err(Error::Config("loop.vertices_over_pi needs at least two vertices".into()));
            }
        }
        Ok(())
    }

    pub fn rabi_khz(&self) -> f64 {
        self.rabi_khz.unwrap_or(if self.scenario == ScenarioName::Fig2 { 250.0 } else { 450.0 })
    }

    pub fn mass_kg(&self) -> f64 {
        self.mass_amu * units::ATOMIC_MASS_UNIT
    }

    pub fn recoil(&self) -> f64 {
        match self.recoil_khz {
            Some(khz) => units::khz_to_rad_per_us(khz),
            None => units::recoil_frequency(self.wavelength_um, self.mass_kg()),
        }
    }

    pub fn tripod(&self) -> TripodConfig {
        let k = units::wavenumber(self.wavelength_um);
        let omega = units::khz_to_rad_per_us(self.rabi_khz());
        TripodConfig {
            wavevectors: [[k, 0.0, 0.0], [0.0, k, 0.0], [k, 0.0, 0.0]],
            rabi: self.rabi_scale.map(|s| Envelope::Constant(omega * s)),
            offset_phases: [0.0; 3],
            recoil: self.recoil(),
            thermal_velocity: units::thermal_velocity(self.temperature_uk, self.mass_kg()),
        }
    }

    pub fn thermal(&self) -> ThermalSpec {
        let spec = ThermalSpec::new(units::thermal_velocity(self.temperature_uk, self.mass_kg()))
            .with_order(self.quadrature_order);
        if self.monte_carlo_samples > 0 {
            spec.with_monte_carlo(self.monte_carlo_samples, self.seed)
        } else {
            spec
        }
    }

    /// Loop at `phi0` (rad) with the configured shape and orientation.
    pub fn phase_loop(&self, phi0: f64) -> Result<PhaseLoop> {
        match (&self.vertices_over_pi, self.orientation) {
            (Some(v), _) => {
                let pts: Vec<(f64, f64)> =
                    v.iter().map(|&(a, b)| (a * std::f64::consts::PI, b * std::f64::consts::PI)).collect();
                PhaseLoop::from_vertices(&pts, &vec![self.segment_us; pts.len()])
            }
            (None, Orientation::Phi1First) => PhaseLoop::canonical(phi0, self.segment_us),
            (None, Orientation::Phi2First) => PhaseLoop::canonical_phi2_first(phi0, self.segment_us),
        }
    }

    /// Sorted `key = value` dump of every setting that affects the output.
    pub fn canonical(&self) -> String {
        let mut m = BTreeMap::new();
        let f = |x: f64| super::csv::fmt_g(x);
        m.insert("scenario", self.scenario.as_str().to_string());
        m.insert("atom.wavelength_um", f(self.wavelength_um));
        m.insert("atom.mass_amu", f(self.mass_amu));
        m.insert("atom.recoil_khz", f(crate::units::rad_per_us_to_khz(self.recoil())));
        m.insert("lasers.rabi_khz", f(self.rabi_khz()));
        m.insert("lasers.rabi_scale", self.rabi_scale.map(f).join(","));
        m.insert("thermal.temperature_uk", f(self.temperature_uk));
        m.insert("thermal.quadrature_order", self.quadrature_order.to_string());
        m.insert("thermal.monte_carlo_samples", self.monte_carlo_samples.to_string());
        m.insert("thermal.seed", self.seed.to_string());
        m.insert("loop.phi0_over_pi", f(self.phi0_over_pi));
        m.insert("loop.segment_us", f(self.segment_us));
        m.insert(
            "loop.orientation",
            match self.orientation {
                Orientation::Phi1First => "phi1_first",
                Orientation::Phi2First => "phi2_first",
            }
            .to_string(),
        );
        if let Some(v) = &self.vertices_over_pi {
            m.insert(
                "loop.vertices_over_pi",
                v.iter().map(|(a, b)| format!("{},{}", f(*a), f(*b))).collect::<Vec<_>>().join(";"),
            );
        }
        m.insert("grid.phi0_max_over_pi", f(self.phi0_max_over_pi));
        m.insert("grid.phi0_points", self.phi0_points.to_string());
        m.insert("grid.t_max_us", f(self.t_max_us));
        m.insert("grid.t_step_us", f(self.t_step_us));
        m.insert("grid.steps", self.steps.to_string());
        m.insert("thermometry.noise", f(self.noise));
        m.insert("thermometry.shots", self.shots.to_string());
        m.insert("adiabaticity.ratio_min", f(self.ratio_min));
        m.insert("adiabaticity.ratio_max", f(self.ratio_max));
        m.insert("adiabaticity.ratio_points", self.ratio_points.to_string());
        let mut out = String::new();
        for (k, v) in m {
            writeln!(out, "{k} = {v}").expect("write to string");
        }
        out
    }

    /// SHA-256 of [`RunConfig::canonical`], hex encoded.
    pub fn hash(&self) -> String {
        Sha256::digest(self.canonical().as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn num(key: &str, s: &str) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|_| Error::Config(format!("{key}: `{}` is not a number", s.trim())))
}

fn count(key: &str, s: &str) -> Result<usize> {
    s.trim().parse::<usize>().map_err(|_| Error::Config(format!("{key}: `{}` is not a non-negative integer", s.trim())))
}
