//! Declarative run configuration: a TOML file plus `--set key=value`
//! overrides (environment variables `MVCIRCLE_SET_<PATH>` mirror `--set`,
//! with `__` standing for `.`). Unknown keys are rejected.

use anyhow::{bail, Context, Result};
use mvcircle::bessel::transformer_spectrum;
use mvcircle::continuation::{ContinuationControls, NewtonControls};
use mvcircle::energy::EnergyControls;
use mvcircle::particle::SimControls;
use mvcircle::PotentialSpectrum;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub potential: PotentialConfig,
    /// Fourier truncation of the solver (number of retained modes).
    #[serde(default = "default_truncation")]
    pub truncation: usize,
    #[serde(default)]
    pub kappa: KappaConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub simulation: SimulationConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_truncation() -> usize {
    64
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialConfig {
    /// One of: "kuramoto", "logsine", "transformer", "finite", "custom".
    pub kind: String,
    /// Inverse temperature for the transformer potential.
    #[serde(default)]
    pub beta: Option<f64>,
    /// Coefficients a_1..a_L for the finite potential.
    #[serde(default)]
    pub coefficients: Option<Vec<f64>>,
    /// Path to a coefficient file (one a_l per line) for "custom".
    #[serde(default)]
    pub file: Option<String>,
    /// Stored spectrum length for infinitely supported potentials;
    /// defaults to the truncation.
    #[serde(default)]
    pub stored: Option<usize>,
}

macro_rules! default_fn {
    ($name:ident, $ty:ty, $value:expr) => {
        fn $name() -> $ty {
            $value
        }
    };
}

default_fn!(d_kappa_min, f64, 0.5);
default_fn!(d_kappa_max, f64, 3.0);
default_fn!(d_kappa_step, f64, 0.01);
default_fn!(d_newton_tol, f64, 1e-11);
default_fn!(d_step, f64, 0.01);
default_fn!(d_step_min, f64, 1e-5);
default_fn!(d_step_max, f64, 0.05);
default_fn!(d_max_points, usize, 400);
default_fn!(d_epsilon, f64, 0.02);
default_fn!(d_m_tol, f64, 1e-10);
default_fn!(d_jump_tol, f64, 1e-3);
default_fn!(d_kink_tol, f64, 10.0);
default_fn!(d_particles, usize, 4000);
default_fn!(d_dt, f64, 1e-3);
default_fn!(d_burn_in, f64, 50.0);
default_fn!(d_horizon, f64, 200.0);
default_fn!(d_sample_every, usize, 100);
default_fn!(d_out_dir, String, "out".into());
default_fn!(d_seed, u64, 1);

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KappaConfig {
    #[serde(default = "d_kappa_min")]
    pub min: f64,
    #[serde(default = "d_kappa_max")]
    pub max: f64,
    #[serde(default = "d_kappa_step")]
    pub step: f64,
}

impl Default for KappaConfig {
    fn default() -> Self {
        Self { min: d_kappa_min(), max: d_kappa_max(), step: d_kappa_step() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default = "d_newton_tol")]
    pub newton_tol: f64,
    #[serde(default)]
    pub presmooth: usize,
    #[serde(default = "d_step")]
    pub step: f64,
    #[serde(default = "d_step_min")]
    pub step_min: f64,
    #[serde(default = "d_step_max")]
    pub step_max: f64,
    #[serde(default = "d_max_points")]
    pub max_points: usize,
    /// Branch-switch amplitude.
    #[serde(default = "d_epsilon")]
    pub epsilon: f64,
    /// Quadrature grid (0 = automatic).
    #[serde(default)]
    pub grid: usize,
    #[serde(default = "d_m_tol")]
    pub m_tol: f64,
    #[serde(default = "d_jump_tol")]
    pub jump_tol: f64,
    #[serde(default = "d_kink_tol")]
    pub kink_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            newton_tol: d_newton_tol(),
            presmooth: 0,
            step: d_step(),
            step_min: d_step_min(),
            step_max: d_step_max(),
            max_points: d_max_points(),
            epsilon: d_epsilon(),
            grid: 0,
            m_tol: d_m_tol(),
            jump_tol: d_jump_tol(),
            kink_tol: d_kink_tol(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    #[serde(default = "d_particles")]
    pub particles: usize,
    #[serde(default = "d_dt")]
    pub dt: f64,
    #[serde(default = "d_burn_in")]
    pub burn_in: f64,
    #[serde(default = "d_horizon")]
    pub horizon: f64,
    #[serde(default = "d_sample_every")]
    pub sample_every: usize,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            particles: d_particles(),
            dt: d_dt(),
            burn_in: d_burn_in(),
            horizon: d_horizon(),
            sample_every: d_sample_every(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "d_out_dir")]
    pub dir: String,
    #[serde(default = "d_seed")]
    pub seed: u64,
    #[serde(default)]
    pub threads: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: d_out_dir(), seed: d_seed(), threads: 0 }
    }
}

impl RunConfig {
    /// Loads, overrides, and validates a configuration.
    pub fn load(path: &Path, sets: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let mut value: toml::Value =
            text.parse().with_context(|| format!("parsing config {}", path.display()))?;
        // environment overrides first, explicit --set flags win
        let mut overrides: Vec<String> = Vec::new();
        let mut env_sets: Vec<(String, String)> = std::env::vars()
            .filter_map(|(k, v)| {
                k.strip_prefix("MVCIRCLE_SET_")
                    .map(|rest| (rest.to_ascii_lowercase().replace("__", "."), v))
            })
            .collect();
        env_sets.sort();
        for (k, v) in env_sets {
            overrides.push(format!("{k}={v}"));
        }
        overrides.extend(sets.iter().cloned());
        for assignment in &overrides {
            apply_set(&mut value, assignment)?;
        }
        let config: RunConfig = value.try_into().context("validating config")?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.truncation == 0 {
            bail!("truncation must be >= 1");
        }
        if !(self.kappa.min < self.kappa.max) || !(self.kappa.step > 0.0) {
            bail!("kappa range requires min < max and step > 0");
        }
        match self.potential.kind.as_str() {
            "kuramoto" | "logsine" => {}
            "transformer" => {
                let beta = self.potential.beta.unwrap_or(0.0);
                if !(beta > 0.0) {
                    bail!("transformer potential requires beta > 0");
                }
            }
            "finite" => {
                if self.potential.coefficients.as_ref().map_or(true, |c| c.is_empty()) {
                    bail!("finite potential requires a nonempty coefficient list");
                }
            }
            "custom" => {
                if self.potential.file.is_none() {
                    bail!("custom potential requires a coefficient file");
                }
            }
            other => bail!("unknown potential kind '{other}'"),
        }
        Ok(())
    }

    /// Builds the interaction potential described by the config.
    pub fn build_potential(&self) -> Result<PotentialSpectrum> {
        let stored = self.potential.stored.unwrap_or(self.truncation).max(self.truncation);
        let w = match self.potential.kind.as_str() {
            "kuramoto" => PotentialSpectrum::kuramoto(),
            "logsine" => PotentialSpectrum::log_sine(stored),
            "transformer" => {
                transformer_spectrum(self.potential.beta.unwrap(), stored)
                    .map_err(|e| anyhow::anyhow!("{e}"))?
            }
            "finite" => PotentialSpectrum::finite(self.potential.coefficients.clone().unwrap())
                .map_err(|e| anyhow::anyhow!("{e}"))?,
            "custom" => {
                let path = self.potential.file.as_ref().unwrap();
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading coefficients {path}"))?;
                let coeffs: Vec<f64> = text
                    .lines()
                    .map(str::trim)
                    .filter(|l| !l.is_empty() && !l.starts_with('#'))
                    .map(|l| l.parse::<f64>().context("parsing coefficient"))
                    .collect::<Result<_>>()?;
                PotentialSpectrum::finite(coeffs).map_err(|e| anyhow::anyhow!("{e}"))?
            }
            _ => unreachable!("validated earlier"),
        };
        Ok(w)
    }

    pub fn newton_controls(&self) -> NewtonControls {
        NewtonControls {
            tol: self.solver.newton_tol,
            presmooth: self.solver.presmooth,
            ..NewtonControls::default()
        }
    }

    pub fn continuation_controls(&self) -> ContinuationControls {
        ContinuationControls {
            step: self.solver.step,
            step_min: self.solver.step_min,
            step_max: self.solver.step_max,
            max_points: self.solver.max_points,
            kappa_min: self.kappa.min,
            kappa_max: self.kappa.max,
            newton: self.newton_controls(),
        }
    }

    pub fn energy_controls(&self) -> EnergyControls {
        EnergyControls {
            grid: self.solver.grid,
            m_tol: self.solver.m_tol,
            jump_tol: self.solver.jump_tol,
            kink_tol: self.solver.kink_tol,
            newton: self.newton_controls(),
        }
    }

    pub fn sim_controls(&self) -> SimControls {
        SimControls {
            n_particles: self.simulation.particles,
            dt: self.simulation.dt,
            burn_in: self.simulation.burn_in,
            horizon: self.simulation.horizon,
            sample_every: self.simulation.sample_every,
            seed: self.output.seed,
        }
    }

    /// Canonical single-line rendering of the resolved config for file headers.
    pub fn resolved_line(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}

/// Applies one `path.to.key=value` assignment onto a TOML tree.
fn apply_set(root: &mut toml::Value, assignment: &str) -> Result<()> {
    let (path, raw) = assignment
        .split_once('=')
        .with_context(|| format!("override '{assignment}' is not of the form key=value"))?;
    let segments: Vec<&str> = path.split('.').collect();
    if segments.is_empty() {
        bail!("empty override path");
    }
    let mut node = root;
    for seg in &segments[..segments.len() - 1] {
        let table = node
            .as_table_mut()
            .with_context(|| format!("override path '{path}' crosses a non-table"))?;
        node = table
            .entry(seg.to_string())
            .or_insert_with(|| toml::Value::Table(Default::default()));
    }
    let table = node
        .as_table_mut()
        .with_context(|| format!("override path '{path}' crosses a non-table"))?;
    // parse the value as a TOML literal; fall back to a plain string
    let parsed: toml::Value = match format!("x = {raw}").parse::<toml::Value>() {
        Ok(toml::Value::Table(mut t)) => t.remove("x").unwrap(),
        _ => toml::Value::String(raw.to_string()),
    };
    table.insert(segments[segments.len() - 1].to_string(), parsed);
    Ok(())
}
