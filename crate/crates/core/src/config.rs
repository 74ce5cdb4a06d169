//! Experiment configuration: flat `key = value` lines with `#` comments.
//!
//! Keys are case sensitive (`h` is the temporal factor, `H` the Hurst index).
//! Unknown or repeated keys are rejected so a typo never silently falls back
//! to a default.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;

use crate::ensemble::SolverKind;
use crate::error::{config, HeliosError, Result};
use crate::fbm::HurstIndex;
use crate::functions::{parse_number, FunctionSpec};
use crate::inverse::KernelConfig;

/// Every key the parser accepts.
pub const KEYS: &[&str] = &[
    "R0",
    "T",
    "M",
    "N",
    "N1",
    "P",
    "H",
    "H_list",
    "epsilon",
    "seed",
    "sweep_seeds",
    "a",
    "f",
    "g",
    "h",
    "solver",
    "mc_paths",
    "mc_tolerance",
    "decay_n_min",
    "decay_n_max",
    "assume_h_positive",
];

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub r0: f64,
    pub t_final: f64,
    /// `M`, time steps.
    pub time_steps: usize,
    /// `N`, radial intervals.
    pub radial_points: usize,
    /// `N1`, retained modes.
    pub truncation: usize,
    /// `P`, sample paths.
    pub paths: usize,
    pub hurst: f64,
    /// Hurst indices visited by `sweep-h`.
    pub hurst_list: Vec<f64>,
    pub epsilon: f64,
    pub seed: u64,
    /// Consecutive seeds `seed, seed + 1, ...` visited by `sweep-h`.
    pub sweep_seeds: usize,
    pub a: FunctionSpec,
    pub f: FunctionSpec,
    pub g: FunctionSpec,
    pub h: FunctionSpec,
    pub solver: SolverKind,
    pub mc_paths: usize,
    pub mc_tolerance: f64,
    pub decay_n_min: usize,
    pub decay_n_max: usize,
    pub assume_h_positive: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let kernel = KernelConfig::default();
        Self {
            r0: PI,
            t_final: 1.0,
            time_steps: 2048,
            radial_points: 100,
            truncation: 30,
            paths: 1000,
            hurst: 0.5,
            hurst_list: vec![0.1, 0.5, 0.9],
            epsilon: 0.001,
            seed: 0,
            sweep_seeds: 1,
            a: FunctionSpec::Power(2.0),
            f: FunctionSpec::Sin(3.0),
            g: FunctionSpec::Sin(2.0),
            h: FunctionSpec::Const(1.0),
            solver: SolverKind::FiniteDifference,
            mc_paths: kernel.mc_paths,
            mc_tolerance: kernel.mc_tolerance,
            decay_n_min: 5,
            decay_n_max: 40,
            assume_h_positive: true,
        }
    }
}

/// Which command the configuration is validated for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    SinglePath,
    Ensemble,
}

impl ExperimentConfig {
    /// Parses configuration text; `table(file)` specs resolve against `base_dir`.
    pub fn parse(text: &str, base_dir: Option<&Path>) -> Result<Self> {
        let mut seen = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return config(format!("line {}: expected 'key = value', got '{line}'", idx + 1));
            };
            let (key, value) = (key.trim(), value.trim());
            if !KEYS.contains(&key) {
                return config(format!("line {}: unknown key '{key}'", idx + 1));
            }
            if seen.insert(key.to_string(), (idx + 1, value.to_string())).is_some() {
                return config(format!("line {}: key '{key}' given twice", idx + 1));
            }
        }
        let mut cfg = Self::default();
        for (key, (line, value)) in &seen {
            cfg.set(key, value, base_dir).map_err(|e| match e {
                HeliosError::Config(m) => HeliosError::Config(format!("line {line}: {key}: {m}")),
                other => other,
            })?;
        }
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HeliosError::Config(format!("cannot read config '{}': {e}", path.display())))?;
        Self::parse(&text, path.parent())
    }

    fn set(&mut self, key: &str, value: &str, base_dir: Option<&Path>) -> Result<()> {
        match key {
            "R0" => self.r0 = parse_number(value)?,
            "T" => self.t_final = parse_number(value)?,
            "M" => self.time_steps = parse_count(value)?,
            "N" => self.radial_points = parse_count(value)?,
            "N1" => self.truncation = parse_count(value)?,
            "P" => self.paths = parse_count(value)?,
            "H" => self.hurst = parse_number(value)?,
            "H_list" => {
                self.hurst_list = value
                    .split(',')
                    .filter(|s| !s.trim().is_empty())
                    .map(parse_number)
                    .collect::<Result<Vec<_>>>()?
            }
            "epsilon" => self.epsilon = parse_number(value)?,
            "seed" => self.seed = value.parse().map_err(|_| HeliosError::Config(format!("bad seed '{value}'")))?,
            "sweep_seeds" => self.sweep_seeds = parse_count(value)?,
            "a" => self.a = FunctionSpec::parse(value, base_dir)?,
            "f" => self.f = FunctionSpec::parse(value, base_dir)?,
            "g" => self.g = FunctionSpec::parse(value, base_dir)?,
            "h" => self.h = FunctionSpec::parse(value, base_dir)?,
            "solver" => self.solver = value.parse()?,
            "mc_paths" => self.mc_paths = parse_count(value)?,
            "mc_tolerance" => self.mc_tolerance = parse_number(value)?,
            "decay_n_min" => self.decay_n_min = parse_count(value)?,
            "decay_n_max" => self.decay_n_max = parse_count(value)?,
            "assume_h_positive" => {
                self.assume_h_positive = match value {
                    "true" | "yes" | "1" => true,
                    "false" | "no" | "0" => false,
                    _ => return config(format!("expected true or false, got '{value}'")),
                }
            }
            _ => unreachable!("key list and setter out of sync"),
        }
        Ok(())
    }

    /// Checks the invariants; returns advisory warnings that do not stop a run.
    pub fn validate(&self, purpose: Purpose) -> Result<Vec<String>> {
        let violated = |what: String| -> Result<Vec<String>> { config(format!("invariant violated: {what}")) };
        if !(self.r0 > 0.0 && self.r0.is_finite()) {
            return violated(format!("R0 > 0 (got {})", self.r0));
        }
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return violated(format!("T > 0 (got {})", self.t_final));
        }
        if self.time_steps < 1 {
            return violated("M >= 1 (got 0)".into());
        }
        if self.radial_points < 2 || self.radial_points % 2 != 0 {
            return violated(format!("N even and >= 2 (got {})", self.radial_points));
        }
        if self.truncation < 1 {
            return violated("N1 >= 1 (got 0)".into());
        }
        if !(self.hurst > 0.0 && self.hurst < 1.0) {
            return violated(format!("0 < H < 1 (got {})", self.hurst));
        }
        if let Some(h) = self.hurst_list.iter().find(|h| !(**h > 0.0 && **h < 1.0)) {
            return violated(format!("0 < H < 1 for every H_list entry (got {h})"));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return violated(format!("epsilon >= 0 (got {})", self.epsilon));
        }
        if purpose == Purpose::Ensemble && self.paths < 2 {
            return violated(format!("P >= 2 (got {})", self.paths));
        }
        if self.mc_paths < 2 {
            return violated(format!("mc_paths >= 2 (got {})", self.mc_paths));
        }
        if self.sweep_seeds < 1 {
            return violated("sweep_seeds >= 1 (got 0)".into());
        }
        if self.decay_n_min < 1 || self.decay_n_max <= self.decay_n_min {
            return violated(format!(
                "1 <= decay_n_min < decay_n_max (got {}..{})",
                self.decay_n_min, self.decay_n_max
            ));
        }
        let mut warnings = Vec::new();
        if self.truncation > self.radial_points / 3 {
            warnings.push(format!(
                "N1 = {} exceeds N/3 = {}; quadrature of the highest modes is unreliable",
                self.truncation,
                self.radial_points / 3
            ));
        }
        Ok(warnings)
    }

    pub fn hurst_index(&self) -> Result<HurstIndex> {
        HurstIndex::new(self.hurst)
    }

    pub fn kernel_config(&self) -> KernelConfig {
        KernelConfig { mc_paths: self.mc_paths, mc_seed: self.seed, mc_tolerance: self.mc_tolerance }
    }

    /// Canonical text form; parsing it yields an equal configuration.
    pub fn to_text(&self) -> String {
        let list: Vec<String> = self.hurst_list.iter().map(|h| h.to_string()).collect();
        let solver = match self.solver {
            SolverKind::FiniteDifference => "fd",
            SolverKind::Mild => "mild",
        };
        format!(
            "R0 = {}\nT = {}\nM = {}\nN = {}\nN1 = {}\nP = {}\nH = {}\nH_list = {}\nepsilon = {}\nseed = {}\n\
             sweep_seeds = {}\na = {}\nf = {}\ng = {}\nh = {}\nsolver = {solver}\nmc_paths = {}\nmc_tolerance = {}\n\
             decay_n_min = {}\ndecay_n_max = {}\nassume_h_positive = {}\n",
            self.r0,
            self.t_final,
            self.time_steps,
            self.radial_points,
            self.truncation,
            self.paths,
            self.hurst,
            list.join(", "),
            self.epsilon,
            self.seed,
            self.sweep_seeds,
            self.a,
            self.f,
            self.g,
            self.h,
            self.mc_paths,
            self.mc_tolerance,
            self.decay_n_min,
            self.decay_n_max,
            self.assume_h_positive,
        )
    }
}

fn parse_count(value: &str) -> Result<usize> {
    value.trim().parse().map_err(|_| HeliosError::Config(format!("expected a non-negative integer, got '{value}'")))
}

/// Builtin configurations for the three reference examples.
pub fn preset(name: &str) -> Option<&'static str> {
    match name {
        "example1" => Some(include_str!("../../../presets/example1.cfg")),
        "example2" => Some(include_str!("../../../presets/example2.cfg")),
        "example3" => Some(include_str!("../../../presets/example3.cfg")),
        _ => None,
    }
}

pub fn preset_names() -> &'static [&'static str] {
    &["example1", "example2", "example3"]
}
