//! The run configuration: a TOML document whose every field has a default.

use std::path::PathBuf;

use kdvb::data::InitialData;
use kdvb::grid::Grid1D;
use kdvb::multiplier::{EstimateSettings, ShellRanges};
use kdvb::quadrature::QuadSettings;
use kdvb::solver::SolverConfig;
use kdvb::symbols::EquationParams;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("malformed config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub n: usize,
    pub half_width: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            n: 256,
            half_width: 8.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InflateSpec {
    pub t: f64,
    /// `N` runs over `2^k` for `k` in this inclusive range.
    pub n_exponents: (i32, i32),
    pub quad: QuadSettings,
}

impl Default for InflateSpec {
    fn default() -> Self {
        Self {
            t: 0.1,
            n_exponents: (4, 9),
            quad: QuadSettings {
                rel_tol: 1e-9,
                ..QuadSettings::default()
            },
        }
    }
}

impl InflateSpec {
    pub fn n_list(&self) -> Vec<f64> {
        (self.n_exponents.0..=self.n_exponents.1).map(|k| 2f64.powi(k)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum MultiplierMode {
    /// Dyadic block sweep.
    Blocks,
    /// Weighted multiplier on nested boxes.
    Weighted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MultiplierSpec {
    pub mode: MultiplierMode,
    /// Largest admissible `lower / bound` before the run counts as a violation.
    pub c_max: f64,
    pub ranges: ShellRanges,
    pub resolution: usize,
    pub cells: usize,
    pub estimate: EstimateSettings,
    pub sizes: Vec<usize>,
    pub dtau: f64,
    pub dxi: f64,
    /// Largest accepted ratio of the last two box estimates.
    pub max_final_ratio: f64,
}

impl Default for MultiplierSpec {
    fn default() -> Self {
        Self {
            mode: MultiplierMode::Blocks,
            c_max: 4.0,
            ranges: ShellRanges::default(),
            resolution: 32,
            cells: 2,
            estimate: EstimateSettings {
                restarts: 0,
                max_iter: 20,
                tol: 1e-6,
                seed: 0,
            },
            sizes: vec![16, 32, 64],
            dtau: 1.0,
            dxi: 0.25,
            max_final_ratio: 1.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NormsSpec {
    pub s_list: Vec<f64>,
    /// Evolution time for the propagated norms.
    pub t: f64,
    pub tail_cut: f64,
}

impl Default for NormsSpec {
    fn default() -> Self {
        Self {
            s_list: vec![-1.5, -1.0, -0.5, 0.0, 1.0, 2.0],
            t: 0.1,
            tail_cut: 32.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub out: PathBuf,
    pub format: Format,
    pub equation: EquationParams,
    /// Spatial grid; `inflate` only checks representability when one is given.
    pub grid: Option<GridSpec>,
    pub data: InitialData,
    pub solver: SolverConfig,
    pub inflate: InflateSpec,
    pub multiplier: MultiplierSpec,
    pub norms: NormsSpec,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out: PathBuf::from("out"),
            format: Format::Csv,
            equation: EquationParams {
                s: -1.5,
                ..EquationParams::default()
            },
            grid: None,
            data: InitialData::default(),
            solver: SolverConfig::default(),
            inflate: InflateSpec::default(),
            multiplier: MultiplierSpec::default(),
            norms: NormsSpec::default(),
        }
    }
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let cfg: ExperimentConfig = toml::from_str(text)?;
    cfg.validate()?;
    Ok(cfg)
}

impl ExperimentConfig {
    /// Cheap structural checks; the experiments validate their own parameters.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if let Some(g) = self.grid {
            if let Err(e) = Grid1D::new(g.n, g.half_width) {
                return bad(format!("grid: {e}"));
            }
        }
        if let Err(e) = self.equation.validate() {
            return bad(format!("equation: {e}"));
        }
        if let Err(e) = self.solver.validate() {
            return bad(format!("solver: {e}"));
        }
        let (a, b) = self.inflate.n_exponents;
        if !(-20..=40).contains(&a) || !(-20..=40).contains(&b) {
            return bad(format!("inflate: exponent range {a}..={b} out of bounds"));
        }
        let r = &self.multiplier.ranges;
        for (name, (lo, hi)) in [("n", r.n), ("h", r.h), ("l", r.l)] {
            if !(-30..=30).contains(&lo) || !(-30..=30).contains(&hi) {
                return bad(format!("multiplier: {name} range {lo}..={hi} out of bounds"));
            }
        }
        if !(self.multiplier.c_max > 0.0) {
            return bad(format!("multiplier: c_max must be positive, got {}", self.multiplier.c_max));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid1D, ConfigError> {
        let g = self.grid.unwrap_or_default();
        Grid1D::new(g.n, g.half_width).map_err(|e| ConfigError::Invalid(format!("grid: {e}")))
    }

    /// Single-line JSON rendering; also the input of [`Self::digest`].
    pub fn canonical(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.canonical().as_bytes()))
    }
}
